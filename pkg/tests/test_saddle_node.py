import math

import numpy as np
import pytest

from ratelab.dynamics import TimeGrid, integrate_ode
from ratelab.saddle_node import (InitialAboveSaddleBranch, SaddleNodeParams, classify,
                                 comoving_rate, empirical_critical_rate, invariant_lines,
                                 linearisation, sn_critical_rate, sn_effective_radius, sn_field)


def test_field_values():
    f = sn_field(SaddleNodeParams(0.25, 0.1))
    assert f([0.0, 0.0], 0.0)[0] == pytest.approx(-0.25)
    x = 0.3
    assert f([x, -0.5 - x], 0.0)[0] == pytest.approx(0.0, abs=1e-15)


def test_invariant_lines():
    A, B = invariant_lines(0.25, 0.0)
    assert (A.intercept, B.intercept) == (-0.5, 0.5)
    assert A.stable and not B.stable
    A, B = invariant_lines(0.25, 0.25)
    assert A is B and A.intercept == 0.0 and A.stable is None
    A, B = invariant_lines(0.25, 0.16)
    assert A.intercept == pytest.approx(-0.3) and B.intercept == pytest.approx(0.3)
    assert invariant_lines(0.25, 0.3) is None


@pytest.mark.parametrize("line", [0, 1])
def test_lines_invariant_under_flow(line):
    mu, r = 0.25, 0.16
    L = invariant_lines(mu, r)[line]
    x0 = 0.2
    p = SaddleNodeParams(mu, r)
    t1 = 50.0 if line == 0 else 5.0
    tr = integrate_ode(sn_field(p), [x0, float(L.lam(x0))], TimeGrid(0, t1, 0.005))
    assert np.max(np.abs(tr.states[:, 0] + tr.states[:, 1] - L.intercept)) < 1e-6


def test_critical_rate_formula():
    assert sn_critical_rate(SaddleNodeParams(0.25)) == 0.25
    assert sn_critical_rate(SaddleNodeParams(0.25, lambda0=0.3)) == pytest.approx(0.16)
    assert sn_critical_rate(SaddleNodeParams(0.25, lambda0=-5)) == 0.25
    with pytest.raises(InitialAboveSaddleBranch):
        sn_critical_rate(SaddleNodeParams(0.25, lambda0=0.5))


def test_radius_and_linearisation():
    assert sn_effective_radius(1.0) == 0.5
    assert sn_effective_radius(0.25) == 0.25
    mu = 0.36
    assert -linearisation(mu) * sn_effective_radius(mu) == pytest.approx(mu)
    with pytest.raises(ValueError):
        sn_effective_radius(0.0)


def test_comoving_sign():
    mu = 0.25
    assert comoving_rate(-0.5, mu, 0.0) == 0.0
    # below the fold in r: two equilibria of y' = y^2 - mu + r; above: none
    assert np.all(comoving_rate(np.linspace(-2, 2, 41), mu, 0.3) > 0)
    assert comoving_rate(0.0, mu, 0.2) < 0


def test_classify_both_sides():
    p = SaddleNodeParams(0.25)
    assert classify(p, 0.2).tracks
    assert classify(p, 0.3).tips


def test_params_validation():
    with pytest.raises(ValueError):
        SaddleNodeParams(0.0)


def test_empirical_matches_formula():
    res = empirical_critical_rate(SaddleNodeParams(0.25), (0.1, 0.4))
    assert res.rel_error() < 0.01
    assert res.class_lo == "tracks" and res.class_hi == "tips"
