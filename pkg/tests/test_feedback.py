import json
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mixedosc.exceptions import ConfigError, InvalidInputError
from mixedosc.feedback import (PIECEWISE_LINEAR, TANH, FeedbackConfig, controller_tf,
                               controller_zero, estimate_oscillation, find_equilibria,
                               loop_tf, realize_loop, simulate)
from mixedosc.lti import TransferFunction, eigenvalues, tf_evaluate

from conftest import first_order_load


def test_controller_pure_channels():
    tp, tn = 1.0, 10.0
    g = controller_tf(0.0, tp, tn)
    s = 0.3 + 0.7j
    assert g(s) == pytest.approx(1.0 / (tn * s + 1))
    g = controller_tf(1.0, tp, tn)
    assert g(s) == pytest.approx(-1.0 / (tp * s + 1))


def test_controller_balanced_has_zero_dc():
    g = controller_tf(0.5, 1.0, 10.0)
    np.testing.assert_allclose(g.num.coeffs, [0.0, -(10.0 - 1.0) / 2])
    assert g(0.0) == 0.0


def test_controller_zero():
    assert controller_zero(0.5, 1.0, 10.0) == 0.0
    assert math.isinf(controller_zero(1.0 / 11.0, 1.0, 10.0))
    assert controller_zero(0.3548, 1.0, 10.0) == pytest.approx(0.1001, abs=1e-4)


def test_loop_tf_two_mass_expansion(two_mass_load):
    # expand -200((11b - 1)s + 2b - 1) / ((s^2 + 20 s + 200)(s + 1)(10 s + 1)) by hand
    for beta in (0.1538, 0.5, 0.8):
        cfg = FeedbackConfig(two_mass_load, 1.0, 10.0, beta, 1.0)
        G = loop_tf(cfg)
        num = np.array([-200 * (2 * beta - 1), -200 * (11 * beta - 1)])
        den = np.convolve(np.convolve([200, 20, 1], [1, 1]), [1, 10])
        scale = G.den.coeffs[0] / den[0]
        np.testing.assert_allclose(np.array(G.num.coeffs) / scale, num, rtol=1e-12, atol=1e-9)
        np.testing.assert_allclose(np.array(G.den.coeffs) / scale, den, rtol=1e-12)
        assert G(0.0) == pytest.approx(-(2 * beta - 1), abs=1e-12)


def test_two_mass_phase_at_design_point(two_mass):
    g = tf_evaluate(loop_tf(two_mass), 1j)
    assert 1.0 / abs(g) == pytest.approx(14.5217, abs=2e-3)
    phase = math.degrees(math.atan2(g.imag, g.real))
    assert abs(abs(phase) - 180.0) < 0.1


def test_realize_first_order_load(first_order):
    ss = realize_loop(first_order)
    assert ss.order == 3
    np.testing.assert_allclose(np.sort(eigenvalues(ss.A).real), [-100.0, -10.0, -1.0])
    assert ss.labels[-2:] == ("x_p", "x_n")


def test_realize_two_mass(two_mass):
    ss = realize_loop(two_mass)
    ev = np.sort_complex(eigenvalues(ss.A))
    np.testing.assert_allclose(ev, np.sort_complex([-10 - 10j, -10 + 10j, -1, -0.1]),
                               atol=1e-10)
    np.testing.assert_array_equal(ss.C, [0.0, 0.0, 0.1538, 0.1538 - 1.0])


@pytest.mark.parametrize("beta", [0.0, 0.2, 0.5, 0.77, 1.0])
def test_realization_matches_transfer_function(two_mass, rng, beta):
    cfg = two_mass.replace(beta=beta)
    ss = realize_loop(cfg)
    s = rng.normal(size=20) + 1j * rng.normal(size=20) * 5
    np.testing.assert_allclose(ss.frequency_response(s), tf_evaluate(loop_tf(cfg), s),
                               rtol=1e-8, atol=1e-14)
    dc = ss.C @ (-np.linalg.solve(ss.A, ss.B))
    assert dc == pytest.approx(-(2 * beta - 1), abs=1e-12)


def test_nonlinearity_invariants():
    y = np.linspace(-20, 20, 10_000)
    for phi in (TANH, PIECEWISE_LINEAR):
        v, d = phi(y), phi.slope(y)
        assert np.all((d >= 0) & (d <= 1))
        assert np.all(v * y >= 0)
        assert np.all(np.abs(v) <= 1)
        assert phi(0.0) == 0.0
    assert TANH.slope(0.0) == 1.0


def test_config_rejects_bad_ordering(two_mass_load):
    with pytest.raises(ConfigError) as exc:
        FeedbackConfig(two_mass_load, tau_p=10.0, tau_n=1.0)
    assert any("tau_n > tau_p" in v for v in exc.value.violations)


def test_config_rejects_unnormalized_load():
    with pytest.raises(ConfigError) as exc:
        FeedbackConfig(TransferFunction.from_coeffs([2.0], [1.0, 0.01]), 0.1, 1.0)
    assert any("DC gain" in v for v in exc.value.violations)


def test_config_warns_on_slow_load():
    with pytest.warns(UserWarning):
        FeedbackConfig(first_order_load(20.0), 0.1, 1.0)


def test_config_json_round_trip(two_mass):
    back = FeedbackConfig.from_json(two_mass.to_json())
    assert back == two_mass
    assert back.digest() == two_mass.digest()
    assert json.loads(two_mass.to_json())["load"]["den"] == [200.0, 20.0, 1.0]


def test_equilibria_symmetric_cases(two_mass):
    for beta in (0.1538, 0.3, 0.5):
        eqs = find_equilibria(two_mass.replace(beta=beta))
        assert len(eqs) == 1 and eqs[0].y_star == 0.0


def _bisection_roots(f, lo, hi, n=20_001):
    y = np.linspace(lo, hi, n)
    v = f(y)
    out = []
    for i in np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:])):
        a, b = y[i], y[i + 1]
        for _ in range(200):
            m = 0.5 * (a + b)
            if np.sign(f(m)) == np.sign(f(a)):
                a = m
            else:
                b = m
        out.append(0.5 * (a + b))
    return out


def test_equilibria_three_for_positive_balance(two_mass):
    cfg = two_mass.replace(beta=0.8, k=10.0)
    g0 = cfg.k * (2 * cfg.beta - 1)
    oracle = _bisection_roots(lambda y: np.tanh(y) - y / g0, -(abs(g0) + 1), abs(g0) + 1 + 1e-3)
    eqs = find_equilibria(cfg)
    assert len(eqs) == 3
    np.testing.assert_allclose([e.y_star for e in eqs], oracle, atol=1e-10)
    assert eqs[0].y_star == pytest.approx(-eqs[2].y_star)
    ss = realize_loop(cfg)
    for e in eqs:
        # fixed point of the closed loop and of the scalar relation
        rhs = ss.A @ e.x_star - ss.B * (np.tanh(cfg.k * ss.C @ e.x_star) - cfg.r)
        assert np.max(np.abs(rhs)) < 1e-10
        assert abs(np.tanh(e.y_star) - e.y_star / g0) < 1e-10
    # outer equilibria saturate the slope, origin is a saddle of positive feedback
    assert eqs[1].classification == "unstable"
    assert eqs[0].classification == eqs[2].classification == "stable"


def test_equilibria_with_reference(two_mass):
    cfg = two_mass.replace(beta=0.3, k=5.0, r=0.2)
    for e in find_equilibria(cfg):
        assert abs(np.tanh(e.y_star) - 0.2 - e.y_star / (5.0 * (2 * 0.3 - 1))) < 1e-10


def test_equilibria_degenerate_with_reference(two_mass):
    cfg = two_mass.replace(beta=0.5, k=3.0, r=0.4)
    (e,) = find_equilibria(cfg)
    ss = realize_loop(cfg)
    rhs = ss.A @ e.x_star - ss.B * (np.tanh(cfg.k * ss.C @ e.x_star) - cfg.r)
    assert e.y_star == 0.0 and np.max(np.abs(rhs)) < 1e-12


def test_equilibria_require_gain(two_mass):
    with pytest.raises(InvalidInputError):
        find_equilibria(two_mass.replace(k=0.0))


def test_simulate_decays_below_threshold(two_mass):
    ts = simulate(two_mass.replace(k=5.0), T=100.0)
    assert abs(ts.y[-1]) < 1e-4
    assert estimate_oscillation(ts) is None


def test_simulate_matches_solve_ivp(two_mass):
    cfg = two_mass.replace(k=20.0)
    ss = realize_loop(cfg)
    x0 = np.zeros(4)
    x0[-2] = 0.01
    ts = simulate(cfg, x0=x0, T=20.0, dt=1e-3)

    def rhs(t, x):
        return ss.A @ x - ss.B * np.tanh(cfg.k * ss.C @ x)

    ref = solve_ivp(rhs, (0, 20.0), x0, t_eval=ts.t[::1000], rtol=1e-11, atol=1e-13)
    np.testing.assert_allclose(ts.x[::1000], ref.y.T, atol=1e-8)


def test_simulate_odd_symmetry(two_mass, rng):
    for phi in ("tanh", "pl"):
        cfg = two_mass.replace(phi=phi)
        x0 = rng.normal(size=4) * 0.1
        a = simulate(cfg, x0=x0, T=30.0)
        b = simulate(cfg, x0=-x0, T=30.0)
        np.testing.assert_allclose(b.x, -a.x, atol=1e-9)


def test_simulate_rejects_bad_horizon(two_mass):
    with pytest.raises(InvalidInputError):
        simulate(two_mass, T=0.0)
    with pytest.raises(InvalidInputError):
        simulate(two_mass, T=1.0, dt=-1.0)


def test_timeseries_is_well_formed(two_mass):
    ts = simulate(two_mass, T=5.0, stride=10)
    assert np.all(np.diff(ts.t) > 0)
    assert np.all(np.isfinite(ts.y))
    assert ts.metadata["solver"] == "rk4"


def test_oscillation_two_mass_design_point(two_mass):
    est = estimate_oscillation(simulate(two_mass, T=200.0))
    assert est.omega == pytest.approx(0.9906, rel=0.02)
    assert est.waveform == "quasi-harmonic"


def test_oscillation_step_halving(two_mass):
    dt = simulate(two_mass, T=1.0).metadata["dt"]
    w1 = estimate_oscillation(simulate(two_mass, T=200.0, dt=dt)).omega
    w2 = estimate_oscillation(simulate(two_mass, T=200.0, dt=dt / 2)).omega
    assert abs(w1 - w2) / w2 < 1e-3


def test_estimate_synthetic_sine():
    t = np.arange(0.0, 100.0, 0.01)
    est = estimate_oscillation(t, np.sin(2 * t))
    assert est.omega == pytest.approx(2.0, abs=1e-3)
    assert est.amplitude == pytest.approx(1.0, abs=1e-3)
    assert est.waveform == "quasi-harmonic"


def test_estimate_square_wave_is_relaxation():
    t = np.arange(0.0, 100.0, 0.01)
    est = estimate_oscillation(t, np.sign(np.sin(2 * t)))
    assert est.waveform == "relaxation"


def test_estimate_constant_and_irregular():
    t = np.arange(0.0, 100.0, 0.01)
    assert estimate_oscillation(t, np.full_like(t, 3.0)) is None
    assert estimate_oscillation(t, np.sin(0.002 * t ** 3)) is None
    assert estimate_oscillation(t, np.exp(-0.2 * t) * np.sin(2 * t)) is None
