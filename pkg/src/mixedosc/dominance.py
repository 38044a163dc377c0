"""2-dominance certification and (k, beta) region classification.

For a rate ``lam`` at which ``G(s - lam)`` has exactly two unstable poles, the
closed loop is 2-dominant for every ``0 <= k < kbar2(lam)`` with

    kbar2 = inf                           if min_w Re G(jw - lam) >= 0
    kbar2 = -1 / min_w Re G(jw - lam)     otherwise.

Inside the 2-dominant region, bounded trajectories converge to a simple
attractor, so the loop oscillates wherever every equilibrium is unstable.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import InvalidInputError
from .feedback import FeedbackConfig, find_equilibria, loop_tf, realize_loop
from .lti import TransferFunction

__all__ = [
    "Label",
    "RateCandidate",
    "RegionGrid",
    "validate_rate",
    "k_bar_2",
    "rate_grid",
    "best_k_bar_2",
    "oscillation_certified",
    "critical_gain",
    "classify_cell",
    "region_scan",
]

AXIS_TOL = 1e-9
N_RATES = 20
RATE_EPS = 1e-3


class Label(str, enum.Enum):
    NOT_2DOM = "NOT_2DOM"
    DOM_STABLE = "DOM_STABLE"
    OSC = "OSC"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class RateCandidate:
    lam: float
    valid: bool
    n_unstable: int
    n_stable: int
    marginal: bool


def validate_rate(G: TransferFunction, lam: float) -> RateCandidate:
    """Count poles of ``G(s - lam)`` on each side of the imaginary axis."""
    shifted = G.poles().real + lam
    marginal = bool(np.any(np.abs(shifted) <= AXIS_TOL))
    n_unst = int(np.sum(shifted > AXIS_TOL))
    n_st = int(np.sum(shifted < -AXIS_TOL))
    return RateCandidate(float(lam), n_unst == 2 and not marginal, n_unst, n_st, marginal)


def _re_shifted(G, lam, w):
    return np.real(G(1j * np.asarray(w) - lam))


def k_bar_2(G: TransferFunction, lam: float, n_grid: int = 2000) -> float:
    """Largest gain certified 2-dominant at rate ``lam``.

    ``min_w Re G(jw - lam)`` is bracketed on a log grid (plus ``w = 0``)
    spanning 1e-4 x the smallest to 1e4 x the largest pole magnitude, then
    refined by golden-section search.

    Raises
    ------
    InvalidInputError
        If ``lam`` is not a valid rate for ``G``.
    """
    cand = validate_rate(G, lam)
    if not cand.valid:
        raise InvalidInputError(
            f"rate {lam:g} is not valid: G(s - lam) has {cand.n_unstable} unstable poles"
            + (" and a pole on the axis" if cand.marginal else ""))
    mags = np.abs(G.poles() + lam)
    mags = mags[mags > 0]
    lo = 1e-4 * float(mags.min()) if mags.size else 1e-4
    hi = 1e4 * float(np.abs(G.poles()).max()) if G.poles().size else 1e4
    w = np.concatenate(([0.0], np.geomspace(lo, hi, n_grid)))
    vals = _re_shifted(G, lam, w)
    i = int(np.argmin(vals))
    best = float(vals[i])
    if 0 < i < w.size - 1:
        f = lambda x: float(_re_shifted(G, lam, x))
        res = minimize_scalar(f, bracket=(w[i - 1], w[i], w[i + 1]), method="golden",
                              tol=1e-12)
        if res.fun < best:
            best = float(res.fun)
    if best >= 0.0:
        return math.inf
    return -1.0 / best


def rate_grid(G: TransferFunction, n: int = N_RATES, eps: float = RATE_EPS) -> np.ndarray:
    """Log-spaced candidate rates strictly between the 2nd and 3rd pole abscissae.

    With the load left of ``-1/tau_p`` this is the interval
    ``(1/tau_p, min |Re(load poles)|)``.
    """
    re = np.sort(-G.poles().real)
    if re.size < 3:
        lo = re[-1] * (1 + eps) if re.size == 2 else None
        if lo is None or lo <= 0:
            return np.zeros(0)
        return np.geomspace(lo, 10 * lo, n)
    lo, hi = re[1] * (1 + eps), re[2] * (1 - eps)
    if not (0 < lo < hi):
        return np.zeros(0)
    return np.geomspace(lo, hi, n)


def best_k_bar_2(G: TransferFunction, rates: Optional[Sequence[float]] = None):
    """Maximum of ``kbar2`` over valid rates.

    Returns ``(kbar2, lam)``; ``(0.0, nan)`` when no candidate rate is valid.
    """
    rates = rate_grid(G) if rates is None else rates
    best, arg = 0.0, math.nan
    for lam in rates:
        if not validate_rate(G, lam).valid:
            continue
        kb = k_bar_2(G, lam)
        if kb > best:
            best, arg = kb, float(lam)
        if math.isinf(best):
            break
    return best, arg


def oscillation_certified(cfg: FeedbackConfig, ss=None) -> bool:
    """True when every equilibrium is hyperbolically unstable (marginal -> False)."""
    eqs = find_equilibria(cfg, ss)
    return all(e.classification == "unstable" for e in eqs)


def critical_gain(cfg: FeedbackConfig, k_cap: float = 1e3, n_scan: int = 400,
                  rtol: float = 1e-10) -> Optional[float]:
    """Smallest ``k`` at which every equilibrium is hyperbolically unstable.

    The search runs over ``[1e-3, kbar2)`` with ``kbar2`` the best certified
    bound at this ``beta`` (capped at ``k_cap`` when infinite): a log scan
    locates the first unstable gain and bisection refines it.  Returns
    ``None`` when no such gain exists below the bound.
    """
    ss = realize_loop(cfg)
    kb, _ = best_k_bar_2(loop_tf(cfg))
    upper = min(kb, k_cap)
    if upper <= 1e-3:
        return None

    def unstable(k):
        return oscillation_certified(cfg.replace(k=float(k)), ss)

    ks = np.geomspace(1e-3, upper, n_scan, endpoint=False)
    prev = None
    for k in ks:
        if unstable(k):
            break
        prev = k
    else:
        return None
    if prev is None:
        return float(ks[0])
    lo, hi = prev, k
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if unstable(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


def classify_cell(cfg: FeedbackConfig, kbar2: float, ss=None) -> Label:
    if cfg.k >= kbar2:
        return Label.NOT_2DOM
    if cfg.k > 0 and oscillation_certified(cfg, ss):
        return Label.OSC
    return Label.DOM_STABLE


@dataclass
class RegionGrid:
    """Labels on a (beta, k) lattice; ``labels[i, j]`` is cell (betas[i], ks[j])."""

    ks: np.ndarray
    betas: np.ndarray
    labels: np.ndarray
    kbar2: np.ndarray
    critical_k: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.check()

    def check(self):
        osc = self.labels == Label.OSC
        inside = self.ks[None, :] < self.kbar2[:, None]
        if np.any(osc & ~inside):
            raise AssertionError("oscillation cell outside the 2-dominant region")

    def count(self, label: Label) -> int:
        return int(np.sum(self.labels == label))

    def rows(self):
        for i, b in enumerate(self.betas):
            for j, k in enumerate(self.ks):
                yield float(k), float(b), self.labels[i, j], float(self.kbar2[i]), \
                    float(self.critical_k[i])

    def to_csv(self, path=None) -> str:
        """CSV ``k,beta,label,kbar2,critical_k`` (``%.9g``), beta-major order."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["k", "beta", "label", "kbar2", "critical_k"])
        for k, b, lab, kb, kc in self.rows():
            wr.writerow(["%.9g" % k, "%.9g" % b, str(lab), "%.9g" % kb, "%.9g" % kc])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "RegionGrid":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        ks = np.array(sorted({float(r["k"]) for r in rows}))
        betas = np.array(sorted({float(r["beta"]) for r in rows}))
        labels = np.empty((betas.size, ks.size), dtype=object)
        kbar2 = np.empty(betas.size)
        crit = np.empty(betas.size)
        for r in rows:
            i = int(np.searchsorted(betas, float(r["beta"])))
            j = int(np.searchsorted(ks, float(r["k"])))
            labels[i, j] = Label(r["label"])
            kbar2[i] = float(r["kbar2"])
            crit[i] = float(r["critical_k"])
        return cls(ks, betas, labels, kbar2, crit)


def region_scan(template: FeedbackConfig, ks: Sequence[float], betas: Sequence[float],
                with_critical: bool = True) -> RegionGrid:
    """Classify every (k, beta) cell as NOT_2DOM, DOM_STABLE or OSC.

    A cell is 2-dominant when ``k`` is below the largest ``kbar2`` over the
    rate grid; a 2-dominant cell is OSC when all equilibria are unstable.
    """
    ks = np.asarray(ks, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if np.any(ks < 0) or np.any((betas < 0) | (betas > 1)):
        raise InvalidInputError("k must be >= 0 and beta in [0, 1]")
    labels = np.empty((betas.size, ks.size), dtype=object)
    kbar2 = np.empty(betas.size)
    crit = np.full(betas.size, math.nan)
    for i, b in enumerate(betas):
        row_cfg = template.replace(beta=float(b))
        ss = realize_loop(row_cfg)
        kbar2[i], _ = best_k_bar_2(loop_tf(row_cfg))
        for j, k in enumerate(ks):
            labels[i, j] = classify_cell(row_cfg.replace(k=float(k)), kbar2[i], ss)
        if with_critical:
            c = critical_gain(row_cfg)
            crit[i] = math.nan if c is None else c
    meta = {"config": template.to_dict()}
    return RegionGrid(ks, betas, labels, kbar2, crit, meta)
