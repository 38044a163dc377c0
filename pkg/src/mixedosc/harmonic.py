"""Describing-function prediction and quasi-harmonic frequency design.

All harmonic-balance computations use the unit saturation, whatever
nonlinearity the simulation uses.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .dominance import critical_gain
from .exceptions import InvalidInputError
from .feedback import FeedbackConfig, controller_zero, loop_tf

__all__ = [
    "describing_function",
    "beta_bar",
    "k_bar",
    "theta_n",
    "theta_n_bucket",
    "HBPrediction",
    "HBDesign",
    "predict",
    "design_hb",
]

E_MAX = 1e3


def describing_function(E):
    """Describing function of the unit saturation for input amplitude ``E``.

    Equal to 1 for ``E <= 1`` and
    ``(2/pi) (asin(1/E) + (1/E) sqrt(1 - 1/E**2))`` above.
    """
    E = np.asarray(E, dtype=float)
    if np.any(~(E > 0)):
        raise InvalidInputError("amplitude must be positive")
    inv = 1.0 / np.maximum(E, 1.0)
    out = np.where(E <= 1.0, 1.0,
                   (2.0 / np.pi) * (np.arcsin(inv) + inv * np.sqrt(1.0 - inv * inv)))
    return float(out) if out.ndim == 0 else out


def _smallest_pole(cfg: FeedbackConfig) -> float:
    return float(np.min(np.abs(loop_tf(cfg).poles())))


def beta_bar(cfg: FeedbackConfig) -> float:
    """Largest ``beta`` in [0, 0.5) whose controller zero stays at least as far
    from the origin as the slowest pole of ``G``.

    On ``(tau_p/(tau_p + tau_n), 1/2)`` the zero magnitude decreases
    monotonically from infinity to 0, so the bound solves
    ``1 - 2 beta = p_min (beta (tau_p + tau_n) - tau_p)`` in closed form.
    """
    p = _smallest_pole(cfg)
    tp, tn = cfg.tau_p, cfg.tau_n
    lo = tp / (tp + tn)
    b = (1.0 + p * tp) / (2.0 + p * (tp + tn))
    if lo < b < 0.5:
        return float(b)

    def h(beta):
        return abs(controller_zero(beta, tp, tn)) - p

    try:
        return float(brentq(h, lo + 1e-12, 0.5 - 1e-12, xtol=1e-14))
    except ValueError:
        import warnings
        warnings.warn("no beta in [0, 0.5) balances the zero against the slowest pole")
        return 0.5


def k_bar(cfg: FeedbackConfig, beta: float, omega_r: float) -> float:
    """Gain bound ``1/|G(2 j omega_r)|`` that keeps the second harmonic attenuated."""
    if not omega_r > 0:
        raise InvalidInputError("omega_r must be positive")
    g = abs(loop_tf(cfg.replace(beta=float(beta)))(2j * omega_r))
    return math.inf if g == 0 else 1.0 / g


def theta_n(beta: float, tau_p: float, tau_n: float, omega: float) -> float:
    """Phase (degrees, in [0, 360)) of ``(beta (tau_p + tau_n) - tau_p) j omega + 2 beta - 1``."""
    z = complex(2.0 * beta - 1.0, (beta * (tau_p + tau_n) - tau_p) * omega)
    return math.degrees(math.atan2(z.imag, z.real)) % 360.0


_BUCKET_RANGES = ((180.0, 270.0), (90.0, 180.0), (0.0, 90.0))


def theta_n_bucket(beta: float, tau_p: float, tau_n: float) -> int:
    """Index of the beta interval [0, b0), [b0, 1/2), [1/2, 1] with b0 = tau_p/(tau_p + tau_n)."""
    if beta < tau_p / (tau_p + tau_n):
        return 0
    if beta < 0.5:
        return 1
    return 2


@dataclass(frozen=True)
class HBPrediction:
    omega: float
    amplitude: float
    intersections: int
    beta_ok: bool
    k_ok: bool
    loop_gain: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _phase_crossings(G, w_lo, w_hi, n=20000):
    w = np.geomspace(w_lo, w_hi, n)
    gv = G(1j * w)
    im = gv.imag
    out = []
    for i in np.flatnonzero(np.sign(im[:-1]) * np.sign(im[1:]) < 0):
        wc = brentq(lambda x: G(1j * x).imag, w[i], w[i + 1], xtol=1e-14, rtol=1e-12)
        if G(1j * wc).real < 0:
            out.append(wc)
    for i in np.flatnonzero(im == 0.0):
        if gv[i].real < 0:
            out.append(float(w[i]))
    return sorted(out)


def predict(cfg: FeedbackConfig, omega_max: Optional[float] = None) -> list:
    """Harmonic-balance oscillation predictions for ``cfg``.

    Every frequency where the Nyquist plot of ``G`` crosses the negative real
    axis is a candidate; one with ``k|G(jw)| >= 1`` yields a prediction with
    amplitude solving ``N(E) = 1/(k|G(jw)|)``.  An empty list means no
    oscillation is predicted.
    """
    if not cfg.k > 0:
        raise InvalidInputError("k must be positive")
    G = loop_tf(cfg)
    mags = np.abs(G.poles())
    w_hi = omega_max if omega_max is not None else 1e4 * float(mags.max())
    w_lo = 1e-4 * float(mags.min())
    bb = beta_bar(cfg)
    found = []
    for wc in _phase_crossings(G, w_lo, w_hi):
        M = cfg.k * abs(G(1j * wc))
        if M < 1.0:
            continue
        target = 1.0 / M
        if target >= 1.0:
            E = 1.0
        elif describing_function(E_MAX) > target:
            continue
        else:
            E = brentq(lambda e: describing_function(e) - target, 1.0, E_MAX, xtol=1e-13,
                       rtol=1e-14)
        found.append((wc, E, M))
    out = []
    for wc, E, M in found:
        out.append(HBPrediction(
            omega=float(wc),
            amplitude=float(E),
            intersections=len(found),
            beta_ok=bool(cfg.beta < bb),
            k_ok=bool(cfg.k < k_bar(cfg, cfg.beta, wc)),
            loop_gain=float(M),
        ))
    return out


@dataclass(frozen=True)
class HBDesign:
    omega_r: float
    beta: float
    beta_bar: float
    theta_n: float
    theta_n_bucket: int
    accepted: bool
    k_range: Optional[tuple] = None
    k: Optional[float] = None
    reason: Optional[str] = None

    @property
    def k_min(self):
        return None if self.k_range is None else self.k_range[0]

    @property
    def k_max(self):
        return None if self.k_range is None else self.k_range[1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k_min"], d["k_max"] = self.k_min, self.k_max
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _phase_beta(template: FeedbackConfig, omega_r: float, n_grid: int = 2001) -> list:
    """Values of beta in [0, 1] where G(j omega_r) lies on the negative real axis."""
    K = template.load(1j * omega_r) / ((1j * omega_r * template.tau_p + 1)
                                       * (1j * omega_r * template.tau_n + 1))

    def g_of(beta):
        num = complex(2.0 * beta - 1.0,
                      (beta * (template.tau_n + template.tau_p) - template.tau_p) * omega_r)
        return -num * K

    betas = np.linspace(0.0, 1.0, n_grid)
    im = np.array([g_of(b).imag for b in betas])
    roots = []
    for i in np.flatnonzero(np.sign(im[:-1]) * np.sign(im[1:]) <= 0):
        a, b = betas[i], betas[i + 1]
        if im[i] == 0.0:
            r = a
        elif im[i + 1] == 0.0:
            continue
        else:
            r = brentq(lambda x: g_of(x).imag, a, b, xtol=1e-15, rtol=1e-15)
        if g_of(r).real < 0:
            roots.append(float(r))
    return roots


def design_hb(template: FeedbackConfig, omega_r: float) -> Optional[HBDesign]:
    """Choose ``beta`` so that ``angle G(j omega_r) = -180 deg`` and bracket ``k``.

    The balance is accepted only below :func:`beta_bar`; then the gain range
    runs from the oscillation onset (:func:`~mixedosc.dominance.critical_gain`)
    to :func:`k_bar` and the midpoint is returned as the suggested gain.  A
    rejected design keeps the candidate balance so callers can switch to the
    fast/slow procedure.  Returns ``None`` when no balance satisfies the
    phase condition.
    """
    if not omega_r > 0:
        raise InvalidInputError("omega_r must be positive")
    roots = _phase_beta(template, omega_r)
    if not roots:
        return None
    beta = roots[0]
    tp, tn = template.tau_p, template.tau_n
    bb = beta_bar(template)
    common = dict(omega_r=float(omega_r), beta=beta, beta_bar=bb,
                  theta_n=theta_n(beta, tp, tn, omega_r),
                  theta_n_bucket=theta_n_bucket(beta, tp, tn))
    if beta >= bb:
        return HBDesign(accepted=False,
                        reason=f"beta = {beta:.4f} >= beta_bar = {bb:.4f}: relaxation regime",
                        **common)
    cfg = template.replace(beta=beta)
    kmin = critical_gain(cfg)
    kmax = k_bar(cfg, beta, omega_r)
    if kmin is None:
        return HBDesign(accepted=False, reason="no gain destabilizes the equilibria",
                        **common)
    if not kmin < kmax:
        return HBDesign(accepted=False, k_range=(kmin, kmax),
                        reason="oscillation onset above the harmonic-attenuation bound",
                        **common)
    return HBDesign(accepted=True, k_range=(kmin, kmax), k=0.5 * (kmin + kmax), **common)
