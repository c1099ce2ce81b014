# Build the compiled kernels in place with: python setup.py build_ext --inplace
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "ratelab._core",
        ["src/ratelab/_core.pyx"],
        # no FMA contraction: keeps results bitwise equal to the Python fallback
        extra_compile_args=["-O3", "-ffp-contract=off"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
