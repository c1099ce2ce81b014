import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from ratelab.dynamics import TimeGrid
from ratelab.hopf import shift_path
from ratelab.linear import (InitialOutsideRadius, LinearTippingSystem, NotSteadyDrift, QsePath,
                            ZeroDrift, avoid_criterion_general, avoid_criterion_steady,
                            criteria_report, decay_envelope, instantaneous_lag,
                            natural_timescale, qse_drift, r_max, simulate_linear_model,
                            stable_matrix, steady_drift_deviation, steady_path,
                            tip_criterion_steady)

M_SPIRAL = np.array([[-1.0, 5.0], [-5.0, -1.0]])


def steady(M, r, R=1.0):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return LinearTippingSystem(M, R, steady_path(r, 1.0))


# --- oracles ----------------------------------------------------------------------


def test_qse_drift_affine_path():
    p = QsePath(lambda lam: np.array([-lam, 0.0]), lambda t: 2 * t, lambda t: 2.0)
    sys = LinearTippingSystem(M_SPIRAL, 1.0, p)
    assert np.allclose(qse_drift(sys, 0.3), [-2.0, 0.0], atol=1e-9)


def test_qse_drift_frozen():
    sys = steady(-2.0, 0.0)
    assert qse_drift(sys, 1.0) == pytest.approx([0.0])


def test_qse_drift_shift_path_peak():
    p = QsePath(lambda lam: lam, lambda t: shift_path(1.0, 8.0, 0.0, t)[0],
                lambda t: shift_path(1.0, 8.0, 0.0, t)[1])
    sys = LinearTippingSystem(-2.0, 1.0, p)
    assert qse_drift(sys, 0.0)[0] == pytest.approx(16.0, rel=1e-9)


def test_instantaneous_lag():
    assert instantaneous_lag(steady(-2.0, 1.0), 0.0)[0] == pytest.approx(-0.5)
    assert instantaneous_lag(steady(-2.0, 0.0), 0.0)[0] == 0.0
    L = instantaneous_lag(steady(M_SPIRAL, [1.0, 0.0]), 0.0)
    assert np.allclose(L, [-1 / 26, 5 / 26], atol=1e-14)


def test_steady_deviation():
    assert steady_drift_deviation(steady(-2.0, 1.0)) == pytest.approx(0.5)
    assert steady_drift_deviation(steady(-2.0, 0.0)) == 0.0
    assert steady_drift_deviation(steady(M_SPIRAL, [1.0, 0.0])) == pytest.approx(1 / math.sqrt(26))
    assert 1 / math.sqrt(26) == pytest.approx(0.1961, abs=1e-4)


def test_steady_deviation_rejects_unsteady():
    p = QsePath(lambda lam: lam, lambda t: t * t, lambda t: 2 * t)
    with pytest.raises(NotSteadyDrift):
        steady_drift_deviation(LinearTippingSystem(-1.0, 1.0, p))


def test_avoid_steady_examples():
    assert avoid_criterion_steady(steady(-2.0, 1.0, R=1.0), [1.0])
    assert not avoid_criterion_steady(steady(-2.0, 1.0, R=0.4), [1.0])
    assert avoid_criterion_steady(steady(M_SPIRAL, [5.0, 0.0], R=1.0), [5.0, 0.0])


def test_tip_steady_examples():
    assert tip_criterion_steady(steady(-2.0, 1.0, R=0.4), [1.0])
    assert not tip_criterion_steady(steady(-2.0, 1.0, R=1.0), [1.0])


def test_silent_avoid_then_simulation_tips():
    sys = steady(-2.0, 1.0, R=0.4)
    _, tip = simulate_linear_model(sys, [0.0], TimeGrid(0, 20, 0.01))
    assert tip is not None


@pytest.mark.parametrize("M,c,beta", [(-2.0, 1.0, 2.0), (M_SPIRAL, 1.0, 1.0), (-np.eye(2), 1.0, 1.0)])
def test_decay_envelope_examples(M, c, beta):
    env = decay_envelope(M)
    assert env.c == pytest.approx(c, abs=1e-9)
    assert env.beta == pytest.approx(beta, abs=1e-12)


def test_decay_envelope_defective_fallback():
    M = np.array([[-1.0, 1.0], [0.0, -1.0]])
    env = decay_envelope(M)
    assert env.beta == pytest.approx(0.9)
    for u in np.arange(0, 20.01, 0.1):
        assert np.linalg.norm(expm(M * u), 2) <= env.bound(u) * (1 + 1e-9)


def test_avoid_general_examples():
    assert avoid_criterion_general(steady(-2.0, 0.0, R=1.0), 5.0)
    sys = steady(-2.0, 1.5, R=1.0)
    assert avoid_criterion_general(sys, 3.0) == avoid_criterion_steady(sys, [1.5])
    p = QsePath(lambda lam: lam, lambda t: shift_path(12 / 64 * 4 / 4, 8.0, 0.0, t)[0],
                lambda t: shift_path(12 / 64 * 4 / 4, 8.0, 0.0, t)[1])
    shift = LinearTippingSystem(-2.0, 1.0, p)
    assert r_max(shift, 10.0) == pytest.approx(3.0, rel=1e-6)
    assert not avoid_criterion_general(shift, 10.0)


def test_natural_timescale():
    assert natural_timescale(steady(-1.0, 2.0, R=1.0), 0.0) == pytest.approx(0.5)
    assert natural_timescale(steady(-1.0, 1.0, R=2.0), 0.0) == pytest.approx(2.0)
    mu = 0.25
    R = math.sqrt(mu) / 2
    ts = natural_timescale(steady(-2 * math.sqrt(mu), mu, R=R), 0.0)
    assert ts == pytest.approx(1 / (2 * math.sqrt(mu)))
    with pytest.raises(ZeroDrift):
        natural_timescale(steady(-1.0, 0.0), 0.0)


def test_simulate_examples():
    sys = steady(-2.0, 0.0, R=1.0)
    tr, tip = simulate_linear_model(sys, [0.0], TimeGrid(0, 10, 0.01))
    assert tip is None and np.all(tr.states == 0.0)
    _, tip = simulate_linear_model(steady(-1.0, 2.0, R=1.0), [0.0], TimeGrid(0, 20, 0.01))
    assert tip is not None
    with pytest.raises(InitialOutsideRadius):
        simulate_linear_model(sys, [2.0], TimeGrid(0, 1, 0.1))


@pytest.mark.parametrize("M,r", [(-2.0, [1.0]), (M_SPIRAL, [1.0, 0.0]),
                                 (np.array([[-1.0, 0.3], [0.0, -2.0]]), [0.5, -0.2])])
def test_steady_identity_by_simulation(M, r):
    sys = steady(M, r, R=10.0)
    tr, tip = simulate_linear_model(sys, np.zeros(len(r)), TimeGrid(0, 40, 0.01))
    assert tip is None
    dev = np.linalg.norm(tr.final_state - sys.path.position(tr.final_time))
    assert dev == pytest.approx(steady_drift_deviation(sys), abs=1e-6)


def test_finite_difference_slope():
    p = QsePath(lambda lam: np.array([math.sin(lam), lam ** 2]), lambda t: t, lambda t: 1.0)
    assert np.allclose(p.slope(0.7), [math.cos(0.7), 1.4], atol=1e-9)


def test_validation():
    with pytest.raises(ValueError):
        stable_matrix([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(ValueError):
        stable_matrix(np.eye(3) * -1)
    with pytest.raises(ValueError):
        LinearTippingSystem(-1.0, 0.0, steady_path([1.0], 1.0))
    with pytest.raises(ValueError):
        LinearTippingSystem(-1.0, 1.0, steady_path([1.0, 0.0], 1.0))


def test_criteria_report_json():
    sys = steady(-2.0, 1.0, R=0.4)
    recs = criteria_report(sys, [1.0], t=1.0)
    json.dumps(recs)
    assert [r["criterion"] for r in recs] == ["avoid_steady", "tip_steady", "avoid_general"]
    assert recs[0]["verdict"] is False and recs[1]["verdict"] is True
    assert all(set(r) == {"criterion", "value", "threshold_R", "verdict"} for r in recs)


# --- properties -------------------------------------------------------------------

floats = st.floats(-3, 3, allow_nan=False)


@st.composite
def stable_2x2(draw):
    A = np.array([[draw(floats), draw(floats)], [draw(floats), draw(floats)]])
    shift = max(np.linalg.eigvals(A).real) + draw(st.floats(0.1, 2.0))
    M = A - shift * np.eye(2)
    if np.linalg.cond(M) > 1e6:
        M = M - np.eye(2)
    return M


vecs = st.tuples(floats, floats).map(np.array)


@settings(max_examples=100, deadline=None)
@given(stable_2x2(), vecs)
def test_norm_sandwich(M, r):
    mid = np.linalg.norm(np.linalg.solve(M, r))
    rn = np.linalg.norm(r)
    lo = rn / np.linalg.norm(M, 2)
    hi = np.linalg.norm(np.linalg.inv(M), 2) * rn
    assert lo <= mid * (1 + 1e-9) + 1e-12
    assert mid <= hi * (1 + 1e-9) + 1e-12


@settings(max_examples=100, deadline=None)
@given(stable_2x2(), vecs, st.floats(0.05, 3.0))
def test_soundness_steady_criteria(M, r, R):
    # the steady-drift solution sits at the constant lag M^-1 r from the QSE
    sys = steady(M, r, R)
    lag = np.linalg.solve(M, r)
    tr, tip = simulate_linear_model(sys, lag, TimeGrid(0, 20, 0.01), record_every=1000) \
        if np.linalg.norm(lag) < R else (None, 0.0)
    if avoid_criterion_steady(sys, r):
        assert tip is None
    if tip_criterion_steady(sys, r):
        assert tip is not None
        assert steady_drift_deviation(sys) > R


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-5.0, 5.0), st.floats(0.05, 3.0))
def test_soundness_steady_scalar_from_qse(m, r, R):
    sys = steady(-m, r, R)
    _, tip = simulate_linear_model(sys, [0.0], TimeGrid(0, 30.0 / m, 0.01), record_every=1000)
    if avoid_criterion_steady(sys, [r]):
        assert tip is None
    if tip_criterion_steady(sys, [r]):
        assert tip is not None


@pytest.mark.slow
@settings(max_examples=100, deadline=None)
@given(stable_2x2(), st.floats(0.1, 3.0), st.floats(0.5, 8.0), st.floats(0.1, 4.0))
def test_soundness_general_criterion(M, rho, delta, R):
    d = np.array([1.0, 0.5]) / math.sqrt(1.25)
    p = QsePath(lambda lam: lam * d, lambda t: shift_path(rho, delta, 0.0, t)[0],
                lambda t: shift_path(rho, delta, 0.0, t)[1], lambda lam: d)
    sys = LinearTippingSystem(M, R, p)
    t0 = -20.0 / (delta * rho) - 1.0
    t_end = 5.0
    x0 = p.position(t0)
    _, tip = simulate_linear_model(sys, x0, TimeGrid(t0, t_end, 0.01))
    if avoid_criterion_general(sys, t_end, t_start=t0):
        assert tip is None


@settings(max_examples=100, deadline=None)
@given(stable_2x2())
def test_envelope_bounds_exponential(M):
    env = decay_envelope(M)
    assert env.c >= 1.0 and env.beta > 0
    for u in np.arange(0.0, 20.01, 0.1):
        assert np.linalg.norm(expm(M * u), 2) <= env.bound(u) * (1 + 1e-7) + 1e-12
