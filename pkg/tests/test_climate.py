import json
import math

import numpy as np
import pytest

from ratelab.critical import BracketInvalid
from ratelab.climate import (SECONDS_PER_YEAR, AlbedoParams, BRamp, EBMConstants, NNoise, RShift,
                             Static, albedo, derived_groups, discriminant, ebm_empirical_rho_c,
                             ebm_field, ebm_tendency_flux, ebm_tendency_quartic, equilibria,
                             exit_time_stats, mu_critical, radiation_terms, run_scenario,
                             scenario_from_dict, scenario_R_path, scenario_to_dict, table2,
                             classify_shift)

C = EBMConstants()
AP = AlbedoParams()
AP_D = AlbedoParams(1.2, 1.04e-5)


def quartic_oracle(consts, ap, mu):
    es = consts.e_SA * consts.sigma
    coeffs = [-es, 0.0, 0.25 * mu * consts.I0 * ap.b2, 0.0, 0.25 * mu * consts.I0 * (1 - ap.a2)]
    roots = np.roots(coeffs)
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-9 and r.real > 0)
    return real


def test_albedo():
    assert albedo(AP, 0.0) == 1.6927
    T1 = math.sqrt((AP.a2 - 1) / AP.b2)
    assert albedo(AP, T1) == pytest.approx(1.0)
    assert albedo(AP, 290.0) == pytest.approx(1.6927 - 1.690e-5 * 290 ** 2, abs=1e-12)
    assert albedo(AP, 290.0) == pytest.approx(0.27141, abs=1e-5)
    with pytest.raises(ValueError):
        AlbedoParams(0.9, 1e-5)


def test_radiation_terms():
    T1 = math.sqrt((AP.a2 - 1) / AP.b2)
    down, _ = radiation_terms(C, AP, 1.0, T1)
    assert down == pytest.approx(0.0, abs=1e-10)
    _, up = radiation_terms(C, AP, 1.0, 0.0)
    assert up == 0.0
    for T in equilibria(C, AP, 1.0):
        d, u = radiation_terms(C, AP, 1.0, T)
        assert d == pytest.approx(u, rel=1e-12)


def test_formulations_agree():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        T = rng.uniform(150, 350)
        mu = rng.uniform(0.5, 1.5)
        ap = AlbedoParams(rng.uniform(1.01, 2.0), rng.uniform(0.5e-5, 2.5e-5))
        a = ebm_tendency_flux(C, ap, mu, T)
        b = ebm_tendency_quartic(C, ap, mu, T)
        assert abs(a - b) <= 1e-12 * max(abs(a), abs(b)) + 1e-12 * abs(
            C.k * radiation_terms(C, ap, mu, T)[1] / C.c)


def test_kernel_field_matches_flux():
    f = ebm_field(C, AP, 1.0)
    for T in (200.0, 285.0, 300.0):
        assert f([T], 0.0)[0] == pytest.approx(ebm_tendency_flux(C, AP, 1.0, T), rel=1e-13)


def test_units_per_year():
    T = 280.0
    d, u = radiation_terms(C, AP, 1.0, T)
    assert ebm_tendency_flux(C, AP, 1.0, T) == pytest.approx(SECONDS_PER_YEAR * (d - u) / C.c)
    c2 = EBMConstants(time_scale=2.0)
    assert ebm_tendency_flux(c2, AP, 1.0, T) == pytest.approx(2 * ebm_tendency_flux(C, AP, 1.0, T))


def test_equilibria_table1():
    Tm, Tp = equilibria(C, AP, 1.0)
    oracle = quartic_oracle(C, AP, 1.0)
    assert Tm == pytest.approx(oracle[0], abs=0.1)
    assert Tp == pytest.approx(oracle[1], abs=0.1)
    assert Tp == pytest.approx(291.6, abs=0.1) and Tm == pytest.approx(281.3, abs=0.1)
    for T in (Tm, Tp):
        assert abs(ebm_tendency_quartic(C, AP, 1.0, T)) < 1e-9 * C.k * derived_groups(C, AP, 1.0).a * T ** 4


def test_stability_signs():
    for ap, mus in ((AP, (1.0, 1.1)), (AP_D, (0.8, 1.0))):
        for mu in mus:
            Tm, Tp = equilibria(C, ap, mu)
            h = 1e-3
            fp = lambda T: ebm_tendency_flux(C, ap, mu, T)
            assert (fp(Tp + h) - fp(Tp - h)) < 0
            assert (fp(Tm + h) - fp(Tm - h)) > 0
            assert fp(Tp + 0.5) < 0
    assert ebm_tendency_flux(C, AP, 1.0, 1e4) < -1e6


def test_mu_critical():
    assert mu_critical(C, AP_D) == pytest.approx(0.761, abs=1e-3)
    g = derived_groups(C, AP_D, 1.0)
    assert mu_critical(C, AP_D) == pytest.approx(4 * g.d_mu / g.b_mu ** 2, rel=1e-15)
    assert mu_critical(C, AP) == pytest.approx(0.9987, abs=1e-4)
    assert mu_critical(C, AlbedoParams(1.0 + 1e-9, 1e-5)) < 1e-6
    mc = mu_critical(C, AP)
    assert discriminant(C, AP, mc) == pytest.approx(0.0, abs=1e-6 * derived_groups(C, AP, mc).b_mu ** 2)
    Tm, Tp = equilibria(C, AP, mc * (1 + 1e-12))
    assert Tp - Tm < 0.05
    assert equilibria(C, AP, mc * (1 - 1e-6)) is None


def test_equilibria_sqrt_scaling():
    mc = mu_critical(C, AP_D)
    d = np.logspace(-8, -4, 9)
    gaps = [np.subtract(*equilibria(C, AP_D, mc + x)[::-1]) for x in d]
    slope = np.polyfit(np.log(d), np.log(gaps), 1)[0]
    assert abs(slope - 0.5) < 0.1


def test_r_path():
    s = RShift()
    b2, a2, _ = scenario_R_path(C, s, 0.0)
    assert b2 == 1.690e-5 and a2 == pytest.approx(1.6927, abs=1e-12)
    b2, a2, _ = scenario_R_path(C, s, 1.0)
    assert b2 == pytest.approx(1.8350e-5) and a2 == pytest.approx(1.8168, abs=1e-4)
    D0 = discriminant(C, AP, 1.0)
    for lam in np.linspace(0, 1, 11):
        b2, a2, rate = scenario_R_path(C, s, lam)
        assert abs(discriminant(C, AlbedoParams(a2, b2), 1.0) - D0) <= 1e-9 * abs(D0)
        assert rate == pytest.approx(s.rho * lam * (1 - lam))


def test_scenario_json_roundtrip():
    for label in "abcd":
        s = table2(label)
        d = scenario_to_dict(s)
        json.dumps(d)
        assert scenario_from_dict(d) == s
    assert scenario_to_dict(table2("d"))["a2"] == 1.2
    with pytest.raises(ValueError):
        scenario_from_dict({"kind": "X"})
    with pytest.raises(ValueError):
        scenario_from_dict({"kind": "N_noise", "bogus": 1})
    with pytest.raises(ValueError):
        NNoise(nu=-1.0)


def test_b_ramp_tips_near_prediction():
    res = run_scenario(table2("d"))
    pred = (1 - mu_critical(C, AP_D)) / 0.0004
    assert res.outcome.tips
    assert abs(res.outcome.time - pred) / pred < 0.1
    assert res.columns == ("t_years", "T_kelvin", "mu")
    assert np.allclose(res.trajectory.states[:, 1], 1 - 0.0004 * res.trajectory.times)


def test_static_tracks():
    res = run_scenario(Static())
    assert res.outcome.tracks
    assert res.trajectory.final_state[0] == pytest.approx(equilibria(C, AP, 1.0)[1], abs=1e-6)


def test_r_shift_tips_at_019():
    assert run_scenario(table2("b")).outcome.tips


def test_r_shift_slow_tracks():
    res = run_scenario(RShift(rho=0.05))
    assert abs(res.trajectory.final_time - RShift(rho=0.05).run_horizon) <= 0.05 + 1e-9
    assert res.outcome.tracks


def test_bracket_invalid_low():
    with pytest.raises(BracketInvalid):
        ebm_empirical_rho_c((0.01, 0.02))


def test_classification_monotone_above_rho_c():
    res = ebm_empirical_rho_c((0.1, 0.3), rel_tol=1e-2)
    for rho in np.linspace(res.rate_hi, 2 * res.rate_mid, 6):
        assert classify_shift(rho).tips


def test_n_noise_single_run_reproducible():
    a = run_scenario(table2("c"), seed=4)
    b = run_scenario(table2("c"), seed=4)
    assert np.array_equal(a.trajectory.states, b.trajectory.states)
    assert a.outcome == b.outcome


def test_exit_stats_no_noise():
    s = exit_time_stats(0.0, 5, horizon=200.0)
    assert s.fraction_tipped == 0.0 and s.mean is None
    assert s.restricted_mean == 200.0


def test_exit_stats_monotone_in_nu():
    means = [exit_time_stats(nu, 100, base_seed=3).restricted_mean for nu in (0.5, 1.0, 2.0)]
    assert means[0] > means[1] > means[2]
