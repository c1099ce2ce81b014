"""Command-line interface: ``ratelab <command> ...``.

Exit codes: 0 success, 1 config errors, 2 classification failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, harness
from ._backend import BACKEND
from .critical import ClassificationError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CLASSIFICATION = 2


def _kv(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        val = json.loads(v)
    except json.JSONDecodeError:
        val = v
    return k, val


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=harness._json_default))


def cmd_run(a):
    _emit(harness.run_config(a.config, a.out))


def cmd_critrate(a):
    res = harness.critical_rate(a.system, dict(a.params), a.bracket, a.tol)
    d = dict(res.to_dict(), system=a.system, params=dict(a.params))
    if a.out:
        out = Path(a.out)
        out.mkdir(parents=True, exist_ok=True)
        harness._json_dump(d, out / "critrate.json")
    _emit(d)


def cmd_sweep(a):
    try:
        spec = json.loads(Path(a.spec).read_text())
    except OSError as exc:
        raise harness.ConfigInvalid(f"cannot read sweep spec: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise harness.ConfigInvalid(f"malformed JSON in sweep spec: {exc}") from None
    if not isinstance(spec, dict):
        raise harness.ConfigInvalid("sweep spec must be a JSON object")
    header, rows = harness.sweep(harness.SweepSpec.from_dict(spec))
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    path = harness.write_table(out / "sweep.csv", header, rows)
    print(path)


def cmd_ensemble(a):
    _emit(harness.run_ensemble_config(a.config, a.out, a.n, a.seed, a.workers))


def cmd_diagram(a):
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = harness.diagram_rows(a.step)
    print(harness.write_table(out / "diagram.csv", rows[0], rows[1:]))


def cmd_figures(a):
    for f in harness.export_figures(a.out, seed=a.seed):
        print(Path(a.out) / f)


def cmd_systems(a):
    for name, spec in sorted(harness.SYSTEMS.items()):
        rate = spec.rate_param or "-"
        print(f"{name:18s} rate={rate:4s} params={','.join(sorted(spec.defaults))}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ratelab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version",
                    version=f"ratelab {__version__} ({BACKEND} kernels)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a JSON config")
    p.add_argument("config")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("critrate", help="bisect for a critical rate")
    p.add_argument("--system", required=True)
    p.add_argument("--bracket", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--out")
    p.add_argument("params", nargs="*", type=_kv, metavar="key=value")
    p.set_defaults(func=cmd_critrate)

    p = sub.add_parser("sweep", help="tabulate outputs over a parameter grid")
    p.add_argument("spec")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ensemble", help="exit-time ensemble for a stochastic config")
    p.add_argument("config")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("diagram", help="critical rate r_c(omega) table for the Hopf example")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_diagram)

    p = sub.add_parser("figures", help="export reproduction data for all examples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("systems", help="list registered systems")
    p.set_defaults(func=cmd_systems)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ClassificationError as exc:
        print(f"classification error: {exc}", file=sys.stderr)
        return EXIT_CLASSIFICATION
    except (ValueError, harness.UnknownSystem) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
