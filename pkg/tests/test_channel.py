import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from relayplan.channel import (FsoLinkModel, RfLinkModel, asnr_linear, attenuation_per_m, fso_gain, fso_k1,
                               fso_rate, fso_rate_linearized, fso_rate_surrogate, kim_coefficient,
                               link_models, los_probability, rf_rate, rf_rate_linearized,
                               rf_taylor_coefficients, solve_mu_star)
from relayplan.scenario import ScenarioParams

H = 100.0


def bisect_mu(apr):
    """Plain bisection on the average-to-peak equation."""
    f = lambda m: 1 / m - math.exp(-m) / (1 - math.exp(-m)) - apr
    lo, hi = 1e-6, 1e3
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) > 0 else (lo, mid)
    return lo


def fso_model(k1=0.3778, beta=8.25e-4, bw=1e8):
    return FsoLinkModel(beta, k1, 2 * beta, bw, 3.162, 0.7, None, (0.0, 0.0, 0.0))


def rf_model(gamma0=(H * H) ** 2.2 * 10**0.6, alpha=2.2):
    return RfLinkModel(gamma0, alpha, 1e8, 10.0, 0.6, 0.2, 1.0, (2000.0, 0.0, 0.0))


@pytest.mark.parametrize("v, p", [(0.8, 0.3), (10, 1.3), (0.3, 0.0), (60, 1.6), (3.0, 0.82),
                                  (6.0, 0.16 * 6 + 0.34), (1.0, 0.5), (0.5, 0.0), (50, 1.3)])
def test_kim(v, p):
    assert kim_coefficient(v) == pytest.approx(p, abs=1e-12)


def test_attenuation_default():
    assert attenuation_per_m(0.8) == pytest.approx(8.247299315469979e-4, rel=1e-12)


def test_gain():
    assert fso_gain(0.0, 8.25e-4) == 1.0
    assert fso_gain(1000.0, 8.25e-4) == pytest.approx(0.43823499246494924, rel=1e-12)
    g = fso_gain(np.linspace(0, 3000, 50), 8.25e-4)
    assert np.all(np.diff(g) < 0)


@pytest.mark.parametrize("apr, mu", [(0.1, 9.99544113381484), (0.2, 4.801007549722517)])
def test_mu_star(apr, mu):
    got = solve_mu_star(apr)
    assert got == pytest.approx(mu, rel=1e-9)
    assert got == pytest.approx(bisect_mu(apr), rel=1e-9)


def test_mu_star_residuals_random():
    rng = np.random.default_rng(7)
    for apr in rng.uniform(0.01, 0.49, 100):
        mu = solve_mu_star(apr)
        assert abs(apr - (1 / mu - math.exp(-mu) / (1 - math.exp(-mu)))) <= 1e-12


def test_k1_branches():
    assert fso_k1(3.162, 0.7) == pytest.approx(0.37782564750999426, rel=1e-12)
    mu = 9.99544113381484
    direct = math.exp(0.2 * mu) / (2 * math.pi * math.e) * ((1 - math.exp(-mu)) / mu) ** 2 * 3.162 / 0.01
    assert fso_k1(3.162, 0.1) == pytest.approx(direct, rel=1e-9)
    assert fso_k1(6.324, 0.1) == pytest.approx(2 * fso_k1(3.162, 0.1), rel=1e-14)
    with pytest.raises(ValueError):
        fso_k1(1.0, 0.5)


def test_asnr_readings():
    assert asnr_linear(5.0) == pytest.approx(10**0.5)
    assert asnr_linear(5.0, is_amplitude=True) == pytest.approx(10.0)


def test_fso_rate_values():
    m = fso_model()
    assert float(fso_rate(m, (0, 0, 0))) == pytest.approx(5e7 * math.log2(1.3778), rel=1e-12)
    m2 = fso_model(k1=5.0)
    d_unit = math.log(5.0) / m2.k2
    assert float(fso_rate(m2, (d_unit, 0, 0))) == pytest.approx(5e7, rel=1e-12)
    assert float(fso_rate_surrogate(m2, (d_unit, 0, 0))) == pytest.approx(0.0, abs=1e-6)
    r = fso_rate(m2, np.column_stack([np.linspace(0, 3000, 40), np.zeros(40), np.full(40, H)]))
    assert np.all(np.diff(r) < 0)


def test_fso_surrogate_gap_bound():
    m = fso_model(k1=50.0)
    d = np.linspace(0, 2000, 200)
    pts = np.column_stack([d, np.zeros_like(d), np.zeros_like(d)])
    x = 50.0 * np.exp(-m.k2 * d)
    gap = fso_rate(m, pts) - fso_rate_surrogate(m, pts)
    assert np.all(gap >= 0)
    assert np.all(gap <= 1e8 / (2 * math.log(2)) / x * (1 + 1e-12))


def test_los_probability():
    assert los_probability((5, 5, H), (5, 5, 0), H, 10.0, 0.6) == pytest.approx(1.0, abs=1e-10)
    ground = H / math.tan(math.radians(10.0))
    assert los_probability((ground, 0, H), (0, 0, 0), H, 10.0, 0.6) == pytest.approx(1 / 11, rel=1e-9)
    xs = np.linspace(0, 3000, 60)
    pr = los_probability(np.column_stack([xs, 0 * xs, 0 * xs + H]), (0, 0, 0), H, 10.0, 0.6)
    assert np.all(np.diff(pr) <= 1e-15)


def test_rf_rate_values():
    m = rf_model()
    assert float(rf_rate(m, (2000, 0, H))) == pytest.approx(231645617.96262598, rel=1e-12)
    assert float(rf_rate(rf_model(gamma0=1e-300), (0, 0, H))) == pytest.approx(0.0, abs=1e-200)
    assert rf_rate(rf_model(gamma0=2 * m.gamma0), (0, 0, H)) > rf_rate(m, (0, 0, H))


def test_rf_alpha_below_one_rejected():
    with pytest.raises(ValueError):
        rf_model(alpha=0.9)


def test_rf_tangency_and_b_positive():
    m = rf_model()
    rng = np.random.default_rng(3)
    q = np.column_stack([rng.uniform(-500, 2500, 50), rng.uniform(-300, 300, 50), np.full(50, H)])
    lin = rf_rate_linearized(m, q, q)
    np.testing.assert_allclose(lin, rf_rate(m, q), rtol=1e-9)
    _, b, _ = rf_taylor_coefficients(m, q)
    assert np.all(b > 0)


def test_rf_gradient_matches_finite_differences():
    """B^k is the slope in squared distance, so grad = -B_RF * B * 2 (q - q_D)."""
    m = rf_model()
    for x in (300.0, 1000.0, 1700.0, 2050.0):
        q = np.array([x, 40.0, H])
        _, b, _ = rf_taylor_coefficients(m, q)
        grad = -m.bandwidth_hz * b * 2 * (q - np.array(m.dst_pos))
        for axis in (0, 1):
            e = np.zeros(3)
            e[axis] = 1.0

            def central(h):
                return (float(rf_rate(m, q + h * e)) - float(rf_rate(m, q - h * e))) / (2 * h)

            fd = (4 * central(0.1) - central(0.2)) / 3  # Richardson step
            assert fd == pytest.approx(grad[axis], rel=1e-5)


def test_rf_lower_bound_1000_pairs():
    m = rf_model()
    rng = np.random.default_rng(11)
    q = np.column_stack([rng.uniform(-1000, 3000, 1000), rng.uniform(-500, 500, 1000), np.full(1000, H)])
    qk = np.column_stack([rng.uniform(-1000, 3000, 1000), rng.uniform(-500, 500, 1000), np.full(1000, H)])
    true = rf_rate(m, q)
    assert np.all(rf_rate_linearized(m, q, qk) <= true + 1e-9 * true)


def test_fso_tangent_lower_bound_and_tight():
    m = fso_model(k1=30.0)
    rng = np.random.default_rng(5)
    q = np.column_stack([rng.uniform(-1000, 3000, 500), rng.uniform(-500, 500, 500), np.full(500, H)])
    qk = np.column_stack([rng.uniform(-1000, 3000, 500), rng.uniform(-500, 500, 500), np.full(500, H)])
    true = fso_rate(m, q)
    assert np.all(fso_rate_linearized(m, q, qk) <= true + 1e-9 * true)
    np.testing.assert_allclose(fso_rate_linearized(m, q, q), true, rtol=1e-12)


@given(st.floats(-3000, 5000), st.floats(-1000, 1000), st.floats(-3000, 5000), st.floats(-1000, 1000),
       st.sampled_from([1.0, 1.1, 2.2, 3.0]), st.floats(-20, 40))
@example(0.984375, 0.0, 1.0, 0.0, 3.0, 1.0)  # SNR near 3e-8, where log2(1 + s) loses digits
def test_surrogate_dominance(x, y, xk, yk, alpha, snr_db):
    rf = rf_model(gamma0=(H * H) ** alpha * 10 ** (snr_db / 10), alpha=alpha)
    fso = fso_model(k1=12.0)
    q, qk = (x, y, H), (xk, yk, H)
    r = float(rf_rate(rf, q))
    assert float(rf_rate_linearized(rf, q, qk)) <= r + 1e-9 * max(r, 1e-300)
    f = float(fso_rate(fso, q))
    assert float(fso_rate_surrogate(fso, q)) <= f
    assert float(fso_rate_linearized(fso, q, qk)) <= f + 1e-9 * f


def test_link_models_from_defaults():
    fso, rf = link_models(ScenarioParams())
    assert fso.k2 == 2 * fso.beta_per_m and fso.k1 > 0 and rf.alpha == 2.2
    assert rf.dst_pos == (2000.0, 0.0, 0.0)
