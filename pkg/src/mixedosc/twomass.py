"""Two-mass locomotion model driven by the mixed-feedback oscillator.

    x1'' = -k_m w - d_m w' + gamma F - f(x1')
    x2'' =  k_m w + d_m w' - gamma F - f(x2'),      w = x1 - x2,

with the actuator force ``F = phi(y) - r`` and
``y = k (beta x_p + (beta - 1) x_n)``, the filters driven by ``w``.
Without friction ``w`` obeys the load ``2 gamma / (s^2 + 2 d_m s + 2 k_m)``,
and the model coincides with :func:`mixedosc.feedback.simulate` on that
load with ``w = -z``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _integrate
from .exceptions import DivergenceError, InvalidInputError
from .feedback import FeedbackConfig, default_dt, estimate_oscillation, get_nonlinearity
from .lti import TransferFunction

__all__ = [
    "TwoMassParams",
    "LocomotionTrace",
    "load_tf",
    "friction_force",
    "two_mass_config",
    "simulate_locomotion",
    "net_displacement",
]


@dataclass(frozen=True)
class TwoMassParams:
    k_m: float = 100.0
    d_m: float = 10.0
    gamma: float = 100.0
    f_plus: float = 5.0
    f_minus: float = -20.0
    epsilon: float = 1e-2

    def __post_init__(self):
        bad = [n for n in ("k_m", "d_m", "gamma", "epsilon") if not getattr(self, n) > 0]
        if bad:
            raise InvalidInputError(f"parameters must be positive: {', '.join(bad)}")


def load_tf(params: TwoMassParams = TwoMassParams()) -> TransferFunction:
    """``L(s) = 2 gamma / (s^2 + 2 d_m s + 2 k_m)`` of the elongation ``w``."""
    p = params
    return TransferFunction.from_coeffs([2.0 * p.gamma], [2.0 * p.k_m, 2.0 * p.d_m, 1.0])


def friction_force(v, params: TwoMassParams = TwoMassParams()):
    """Smoothed asymmetric friction: ``f_plus`` forward, ``f_minus`` backward, 0 at rest."""
    t = np.tanh(np.asarray(v, dtype=float) / params.epsilon)
    out = 0.5 * (params.f_plus - params.f_minus) * t + 0.5 * (params.f_plus + params.f_minus) * t * t
    return float(out) if out.ndim == 0 else out


def two_mass_config(params: TwoMassParams = TwoMassParams(), beta: float = 0.5,
                    k: float = 1.0, tau_p: float = 1.0, tau_n: float = 10.0, r: float = 0.0,
                    phi: str = "tanh") -> FeedbackConfig:
    """Design configuration using the friction-free load."""
    return FeedbackConfig(load_tf(params), tau_p, tau_n, beta, k, r, phi)


@dataclass
class LocomotionTrace:
    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    x_p: np.ndarray
    x_n: np.ndarray
    y: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def w(self) -> np.ndarray:
        return self.x1 - self.x2

    @property
    def com(self) -> np.ndarray:
        return 0.5 * (self.x1 + self.x2)

    def oscillation(self):
        return estimate_oscillation(self.t, self.w)

    def to_csv(self, path=None) -> str:
        """CSV with columns ``t,x1,x2,v1,v2,w,y,com``."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "x1", "x2", "v1", "v2", "w", "y", "com"])
        cols = np.column_stack((self.t, self.x1, self.x2, self.v1, self.v2, self.w, self.y,
                                self.com))
        for row in cols:
            wr.writerow(["%.9g" % v for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _default_dt(params, cfg, friction):
    dt = default_dt(cfg)
    if friction:
        # friction slope at rest is (f_plus - f_minus) / (2 epsilon)
        dt = min(dt, 2.0 * params.epsilon / (params.f_plus - params.f_minus))
    return dt


def simulate_locomotion(params: TwoMassParams = TwoMassParams(), k: float = 20.0,
                        beta: float = 0.1538, tau_p: float = 1.0, tau_n: float = 10.0,
                        r: float = 0.0, friction: bool = True, T: float = 200.0,
                        dt: Optional[float] = None, x0=None, phi: str = "tanh",
                        record_dt: Optional[float] = 0.01) -> LocomotionTrace:
    """RK4 simulation of the six states ``(x1, v1, x2, v2, x_p, x_n)``.

    Starts from rest with ``w = 1e-2`` unless ``x0`` is given.  The step
    defaults to the loop default, reduced when friction is on to resolve the
    smoothed friction at rest.  States are recorded roughly every
    ``record_dt`` seconds (every step when ``None``).
    """
    if not T > 0:
        raise InvalidInputError("T must be positive")
    cfg = two_mass_config(params, beta, k, tau_p, tau_n, r, phi)
    dt = _default_dt(params, cfg, friction) if dt is None else float(dt)
    stride = 1 if record_dt is None else max(1, int(round(record_dt / dt)))
    if x0 is None:
        x0 = np.zeros(6)
        x0[0] = 1e-2
    x0 = np.array(x0, dtype=float).reshape(6)
    pvec = np.array([params.k_m, params.d_m, params.gamma, params.f_plus, params.f_minus,
                     params.epsilon, k, beta, tau_p, tau_n, r,
                     get_nonlinearity(phi).code, 1.0 if friction else 0.0])
    nsteps = int(round(T / dt))
    rec, bad = _integrate.rk4_two_mass(pvec, x0, dt, nsteps, stride)
    if bad >= 0:
        raise DivergenceError(f"two-mass state diverged at t = {bad * dt:.6g} s")
    t = np.arange(rec.shape[0]) * dt * stride
    y = k * (beta * rec[:, 4] + (beta - 1.0) * rec[:, 5])
    meta = {"params": params, "config": cfg.to_dict(), "friction": friction, "dt": dt,
            "stride": stride}
    return LocomotionTrace(t, rec[:, 0], rec[:, 2], rec[:, 1], rec[:, 3], rec[:, 4], rec[:, 5],
                           y, meta)


def net_displacement(trace: LocomotionTrace, window: Optional[float] = None) -> float:
    """Centre-of-mass advance over the last ``window`` seconds of the steady part.

    The first half of the trace is discarded; ``window`` defaults to the
    whole remaining half.
    """
    t, com = trace.t, trace.com
    start = len(t) // 2
    if window is not None:
        if window <= 0 or window > t[-1] - t[start]:
            raise InvalidInputError("window must fit inside the steady half of the trace")
        start = int(np.searchsorted(t, t[-1] - window))
    return float(com[-1] - com[start])
