import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixedosc.dominance import (Label, RegionGrid, best_k_bar_2, classify_cell, critical_gain,
                                k_bar_2, rate_grid, region_scan, validate_rate)
from mixedosc.exceptions import InvalidInputError
from mixedosc.feedback import estimate_oscillation, loop_tf, realize_loop, simulate
from mixedosc.lti import Polynomial, TransferFunction, eigenvalues


def dense_min_re(G, lam, w_max, n=1_000_000):
    w = np.linspace(0.0, w_max, n)
    return float(np.min(np.real(G(1j * w - lam))))


def test_validate_rate_examples(two_mass):
    G = loop_tf(two_mass)
    rc = validate_rate(G, 5.0)
    assert rc.valid and rc.n_unstable == 2 and rc.n_stable == 2
    assert not validate_rate(G, 0.05).valid and validate_rate(G, 0.05).n_unstable == 0
    assert not validate_rate(G, 20.0).valid and validate_rate(G, 20.0).n_unstable == 4


def test_validate_rate_marginal(two_mass):
    rc = validate_rate(loop_tf(two_mass), 1.0)
    assert rc.marginal and not rc.valid


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 50.0), st.integers(1, 3)), min_size=1, max_size=4,
                unique_by=lambda t: round(t[0], 1)))
def test_rate_inventory_flips_by_multiplicity(poles):
    den = Polynomial((1.0,))
    for p, m in poles:
        for _ in range(m):
            den = den * Polynomial((p, 1.0))
    G = TransferFunction(Polynomial((den.coeffs[0],)), den)
    # repeated roots are only recovered to about eps**(1/m); step well beyond that
    for p, m in poles:
        nearest = min([abs(p - q) for q, _ in poles if q != p] + [1.0])
        d = min(0.3 * nearest, 0.05 * p)
        below = validate_rate(G, p - d).n_unstable
        above = validate_rate(G, p + d).n_unstable
        assert above - below == m


def test_k_bar_2_infinite_when_min_nonnegative(first_order):
    G = loop_tf(first_order)
    lam = rate_grid(G)[8]
    assert dense_min_re(G, lam, 1e3) >= 0
    assert math.isinf(k_bar_2(G, lam))


def test_k_bar_2_matches_dense_scan(first_order):
    G = loop_tf(first_order)
    lam = rate_grid(G)[0]
    got = k_bar_2(G, lam)
    oracle = -1.0 / dense_min_re(G, lam, 1e3)
    assert math.isfinite(got)
    assert got == pytest.approx(oracle, rel=1e-3)
    assert got <= oracle * (1 + 1e-9)  # refinement can only deepen the minimum


def test_k_bar_2_grid_refinement(first_order):
    G = loop_tf(first_order)
    lam = rate_grid(G)[0]
    assert k_bar_2(G, lam, 4000) == pytest.approx(k_bar_2(G, lam, 2000), rel=1e-3)


def test_k_bar_2_rejects_invalid_rate(two_mass):
    with pytest.raises(InvalidInputError):
        k_bar_2(loop_tf(two_mass), 0.05)


def test_two_mass_design_point_certified(two_mass):
    G = loop_tf(two_mass)
    kb, lam = best_k_bar_2(G)
    assert kb > 20.0
    if math.isfinite(kb):
        assert kb == pytest.approx(-1.0 / dense_min_re(G, lam, 1e3), rel=1e-3)


def test_rate_grid_inside_valid_interval(two_mass):
    G = loop_tf(two_mass)
    lams = rate_grid(G)
    assert lams.size == 20
    assert 1.0 < lams.min() and lams.max() < 10.0
    assert all(validate_rate(G, lam).valid for lam in lams)


def test_critical_gain_two_mass(two_mass):
    assert critical_gain(two_mass) == pytest.approx(14.5217, abs=0.01)


def _eig_onset(cfg, ks):
    """First gain on ``ks`` at which the linearization at the origin is unstable."""
    ss = realize_loop(cfg)
    for k in ks:
        if np.max(eigenvalues(ss.A - k * np.outer(ss.B, ss.C)).real) > 0:
            return k
    return None


def test_critical_gain_balanced_matches_eigen_sweep(two_mass):
    cfg = two_mass.replace(beta=0.5)
    ks = np.linspace(0.01, 50.0, 50_000)
    onset = _eig_onset(cfg, ks)
    assert critical_gain(cfg) == pytest.approx(onset, abs=2e-3)


def test_critical_gain_pure_negative_feedback(first_order):
    cfg = first_order.replace(beta=0.0)
    kb, _ = best_k_bar_2(loop_tf(cfg))
    assert _eig_onset(cfg, np.geomspace(1e-3, kb, 5000)) is None
    assert critical_gain(cfg) is None


def test_classify_examples(two_mass, first_order):
    kb = best_k_bar_2(loop_tf(two_mass))[0]
    assert classify_cell(two_mass, kb) == Label.OSC
    assert classify_cell(two_mass.replace(k=0.01), kb) == Label.DOM_STABLE
    assert classify_cell(two_mass, 15.0) == Label.NOT_2DOM


def test_region_structure_first_order(first_order):
    ks = np.linspace(0.01, 40.0, 25)
    betas = np.linspace(0.0, 1.0, 21)
    grid = region_scan(first_order, ks, betas)
    grid.check()
    assert grid.count(Label.OSC) > 0
    assert all(grid.labels[i, 0] == Label.DOM_STABLE for i in range(betas.size))
    # no oscillation for pure negative feedback at any gain
    assert not any(lab == Label.OSC for lab in grid.labels[0])
    mid = (betas > 0.2) & (betas < 0.6)
    assert all(any(lab == Label.OSC for lab in grid.labels[i]) for i in np.flatnonzero(mid))


def test_region_osc_cells_oscillate(first_order, rng):
    ks = np.linspace(0.5, 40.0, 20)
    betas = np.linspace(0.05, 0.95, 19)
    grid = region_scan(first_order, ks, betas, with_critical=False)
    cells = np.argwhere(grid.labels == Label.OSC)
    pick = cells[rng.choice(len(cells), size=min(10, len(cells)), replace=False)]
    for i, j in pick:
        cfg = first_order.replace(beta=float(betas[i]), k=float(ks[j]))
        x0 = rng.normal(size=3) * 1e-2
        assert estimate_oscillation(simulate(cfg, x0=x0, T=60.0)) is not None, (i, j)


def test_region_csv_round_trip(first_order, tmp_path):
    grid = region_scan(first_order, np.linspace(1.0, 10.0, 4), np.linspace(0.1, 0.9, 3))
    path = tmp_path / "r.csv"
    text = grid.to_csv(path)
    assert text.splitlines()[0] == "k,beta,label,kbar2,critical_k"
    assert len(text.splitlines()) == 13
    back = RegionGrid.from_csv(path)
    assert back.to_csv() == text


def test_region_check_rejects_inconsistent_grid():
    labels = np.array([[Label.OSC]], dtype=object)
    with pytest.raises(AssertionError):
        RegionGrid(np.array([5.0]), np.array([0.3]), labels, np.array([1.0]), np.array([1.0]))
