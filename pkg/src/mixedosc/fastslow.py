"""Relay (fast/slow) analysis of relaxation oscillations.

With the saturation replaced by an ideal relay and negligible transit
between the planes ``|kCx| = 1``, a symmetric half cycle of length ``h``
starting from ``a`` ends at ``-a``, which gives

    a = (I + e^{Ah})^{-1} Gamma(h),   Gamma(h) = A^{-1}(e^{Ah} - I) B,

and the half period solves ``k f(h) = k C a = -1``.  Since ``A`` and ``B``
do not depend on ``(k, beta)``, the vector ``a(h)`` is shared by every
balance and gain.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .dominance import best_k_bar_2, oscillation_certified
from .exceptions import DegeneracyError, InvalidInputError
from .feedback import FeedbackConfig, loop_tf, realize_loop
from .harmonic import beta_bar
from .lti import matrix_exponential

__all__ = [
    "NoRootReason",
    "HalfCycleResult",
    "FSCandidate",
    "FSDesign",
    "half_cycle_map",
    "half_cycle_state",
    "predict_half_period",
    "switching_distance",
    "design_fs",
]

COND_MAX = 1e12
N_SCAN = 4000


class NoRootReason(str, enum.Enum):
    MIN_ABOVE_MINUS1 = "MIN_ABOVE_MINUS1"
    DCGAIN_BELOW_MINUS1 = "DCGAIN_BELOW_MINUS1"
    NO_ROOT_IN_HORIZON = "NO_ROOT_IN_HORIZON"

    def __str__(self):
        return self.value


def half_cycle_state(A, B, h):
    """Switching state ``a(h)`` for scalar or 1-D array ``h``; shape (..., n)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    h_arr = np.atleast_1d(np.asarray(h, dtype=float))
    if np.any(h_arr < 0):
        raise InvalidInputError("h must be non-negative")
    n = A.shape[0]
    E = matrix_exponential(A, h_arr)
    eye = np.eye(n)
    M = eye[None] + E
    cond = np.linalg.cond(M)
    if np.any(cond > COND_MAX):
        raise DegeneracyError(f"I + exp(A h) is near-singular (condition {cond.max():.3g})")
    gamma = np.linalg.solve(A, ((E - eye[None]) @ B).T).T
    a = np.linalg.solve(M, gamma[..., None])[..., 0]
    return a[0] if np.ndim(h) == 0 else a


def half_cycle_map(cfg: FeedbackConfig, h):
    """``k f(h) = k C (I + e^{Ah})^{-1} A^{-1} (e^{Ah} - I) B`` on the loop realization."""
    ss = realize_loop(cfg)
    a = half_cycle_state(ss.A, ss.B, h)
    out = cfg.k * (a @ ss.C)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class HalfCycleResult:
    h2: Optional[float]
    h1: Optional[float]
    reason: Optional[NoRootReason]
    roots: tuple = ()

    @property
    def omega(self) -> Optional[float]:
        return None if self.h2 is None else math.pi / self.h2


def _h_grid(cfg: FeedbackConfig, n: int = N_SCAN) -> np.ndarray:
    return np.concatenate(([0.0], np.geomspace(1e-3 * cfg.tau_p, 100.0 * cfg.tau_n, n)))


class _HalfCycleTable:
    """Precomputed ``a(h)`` on the scan grid for one (load, tau_p, tau_n)."""

    def __init__(self, cfg: FeedbackConfig, n: int = N_SCAN):
        self.ss = realize_loop(cfg)
        self.h = _h_grid(cfg, n)
        self.a = half_cycle_state(self.ss.A, self.ss.B, self.h)

    def kf(self, k, beta, h=None):
        C = self._C(beta)
        if h is None:
            return k * (self.a @ C)
        return k * float(half_cycle_state(self.ss.A, self.ss.B, float(h)) @ C)

    def _C(self, beta):
        C = np.zeros(self.ss.order)
        C[-2], C[-1] = beta, beta - 1.0
        return C

    def predict(self, k, beta) -> HalfCycleResult:
        dc = -k * (2.0 * beta - 1.0)
        if dc < -1.0:
            return HalfCycleResult(None, None, NoRootReason.DCGAIN_BELOW_MINUS1)
        vals = self.kf(k, beta) + 1.0
        if np.min(vals) > 0:
            return HalfCycleResult(None, None, NoRootReason.MIN_ABOVE_MINUS1)
        roots = []
        for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
            roots.append(brentq(lambda x: self.kf(k, beta, x) + 1.0, self.h[i], self.h[i + 1],
                                xtol=1e-12, rtol=1e-13))
        roots.extend(float(self.h[i]) for i in np.flatnonzero(vals == 0.0))
        roots.sort()
        if not roots:
            return HalfCycleResult(None, None, NoRootReason.NO_ROOT_IN_HORIZON)
        h2 = roots[-1]
        h1 = roots[0] if len(roots) > 1 else None
        if h1 is not None and abs(h2 - h1) <= 0.01 * h2:
            return HalfCycleResult(None, h1, NoRootReason.NO_ROOT_IN_HORIZON, tuple(roots))
        return HalfCycleResult(float(h2), None if h1 is None else float(h1), None, tuple(roots))


def predict_half_period(cfg: FeedbackConfig) -> HalfCycleResult:
    """Long half-period ``h2`` of the relay cycle, or the reason none exists.

    ``k f(h) + 1`` is scanned on 4000 log-spaced points from ``1e-3 tau_p``
    to ``100 tau_n`` and every sign change is refined by bisection; the
    largest root is ``h2`` and the smallest is reported as the short
    transient root ``h1``.
    """
    if not cfg.k > 0:
        raise InvalidInputError("k must be positive")
    return _HalfCycleTable(cfg).predict(cfg.k, cfg.beta)


def switching_distance(k: float, beta: float) -> float:
    """Distance ``2 / (k sqrt(2 beta^2 - 2 beta + 1))`` between the relay planes."""
    if not k > 0:
        raise InvalidInputError("k must be positive")
    return 2.0 / (k * math.sqrt(2.0 * beta * beta - 2.0 * beta + 1.0))


@dataclass(frozen=True)
class FSCandidate:
    beta: float
    k: float
    f_hr: float
    d: float
    h2: Optional[float]
    in_osc: bool
    beta_above_bar: bool
    accepted: bool
    reason: str = ""


@dataclass
class FSDesign:
    omega_r: float
    h_r: float
    beta_bar: float
    candidates: list
    trace: list = field(default_factory=list)

    @property
    def found(self) -> bool:
        return bool(self.candidates)

    def best(self) -> Optional[FSCandidate]:
        return self.candidates[0] if self.candidates else None

    def nearest(self, beta: float) -> Optional[FSCandidate]:
        if not self.candidates:
            return None
        return min(self.candidates, key=lambda c: abs(c.beta - beta))

    def to_dict(self) -> dict:
        return {
            "omega_r": self.omega_r,
            "h_r": self.h_r,
            "beta_bar": self.beta_bar,
            "candidates": [asdict(c) for c in self.candidates],
            "rejections": {str(c.beta): c.reason for c in self.trace if not c.accepted},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def trace_csv(self, path=None) -> str:
        """Sweep trace as CSV ``beta,f_hr,k_candidate,accepted,reason``."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["beta", "f_hr", "k_candidate", "accepted", "reason"])
        for c in self.trace:
            wr.writerow(["%.9g" % c.beta, "%.9g" % c.f_hr, "%.9g" % c.k, int(c.accepted),
                         c.reason])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def default_beta_grid(bb: float, n: int = 200) -> np.ndarray:
    """``n`` evenly spaced balances in (bb, 1] plus the multiples of 0.05 there."""
    grid = np.linspace(bb, 1.0, n + 1)[1:]
    round_ = np.round(np.arange(0.0, 1.0 + 1e-9, 0.05), 10)
    return np.unique(np.concatenate((grid, round_[round_ > bb])))


def design_fs(template: FeedbackConfig, omega_r: float,
              betas: Optional[Sequence[float]] = None, h_tol: float = 0.05) -> FSDesign:
    """Gain/balance pairs whose relay half period equals ``pi / omega_r``.

    For each balance, ``f(h_r)`` is evaluated at unit gain (the map is linear
    in ``k``) and ``k = -1/f(h_r)`` whenever ``f(h_r) < 0``.  A candidate is
    kept when it lies in the oscillation region (2-dominant with all
    equilibria unstable) and its predicted long half period is within
    ``h_tol`` of ``h_r``.  Survivors are ranked by switching distance.
    ``beta > beta_bar`` is reported as a flag, not enforced.
    """
    if not omega_r > 0:
        raise InvalidInputError("omega_r must be positive")
    h_r = math.pi / omega_r
    bb = beta_bar(template)
    betas = default_beta_grid(bb) if betas is None else np.asarray(betas, dtype=float)
    table = _HalfCycleTable(template)
    a_r = half_cycle_state(table.ss.A, table.ss.B, h_r)
    trace = []
    for beta in betas:
        beta = float(beta)
        f = float(a_r @ table._C(beta))
        if not f < 0:
            trace.append(FSCandidate(beta, math.nan, f, math.nan, None, False, beta > bb, False,
                                     "f(h_r) >= 0"))
            continue
        k = -1.0 / f
        cfg = template.replace(beta=beta, k=k)
        kb, _ = best_k_bar_2(loop_tf(cfg))
        in_osc = k < kb and oscillation_certified(cfg, table.ss)
        res = table.predict(k, beta)
        d = switching_distance(k, beta)
        reason = ""
        if not k < kb:
            reason = "not 2-dominant"
        elif not in_osc:
            reason = "stable equilibrium"
        elif res.h2 is None:
            reason = f"no long root ({res.reason})"
        elif abs(res.h2 - h_r) > h_tol * h_r:
            reason = f"long root h2 = {res.h2:.4g} s differs from h_r"
        trace.append(FSCandidate(beta, k, f, d, res.h2, bool(in_osc), beta > bb, not reason,
                                 reason))
    accepted = sorted((c for c in trace if c.accepted), key=lambda c: c.d)
    return FSDesign(float(omega_r), h_r, bb, accepted, trace)
