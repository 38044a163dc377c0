"""Mixed positive/negative feedback closed loop.

The controller blends a fast positive channel ``1/(tau_p s + 1)`` and a slow
negative channel ``1/(tau_n s + 1)`` with balance ``beta`` and gain ``k``::

    G(s) = C(s) L(s),
    C(s) = -((beta (tau_n + tau_p) - tau_p) s + 2 beta - 1) / ((tau_p s + 1)(tau_n s + 1))

and closes the loop through a sigmoid ``phi`` as the Lure system::

    x' = A x - B (phi(k C x) - r),     y = k C x,

where ``(A, B, C)`` realizes ``G``.  The DC gain of ``k G`` is
``-k (2 beta - 1)``, so equilibria satisfy
``phi(y) - r = y / (k (2 beta - 1))``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import _integrate
from .exceptions import ConfigError, DivergenceError, InvalidInputError
from .lti import (Polynomial, StateSpaceModel, TransferFunction, eigenvalues,
                  tf_to_statespace)

__all__ = [
    "Nonlinearity",
    "TANH",
    "PIECEWISE_LINEAR",
    "get_nonlinearity",
    "FeedbackConfig",
    "Equilibrium",
    "Timeseries",
    "OscillationEstimate",
    "controller_tf",
    "controller_zero",
    "loop_tf",
    "realize_loop",
    "closed_loop_jacobian",
    "find_equilibria",
    "simulate",
    "default_dt",
    "estimate_oscillation",
]

MARGINAL_TOL = 1e-7


@dataclass(frozen=True)
class Nonlinearity:
    """Odd, bounded, non-decreasing sigmoid with slope in [0, 1]."""

    kind: str

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.tanh(y) if self.kind == "tanh" else np.clip(y, -1.0, 1.0)
        return out[()] if out.ndim == 0 else out

    def slope(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "tanh":
            out = 1.0 - np.tanh(y) ** 2
        else:
            out = (np.abs(y) <= 1.0).astype(float)
        return out[()] if out.ndim == 0 else out

    @property
    def code(self) -> int:
        return _integrate.PHI_CODES[self.kind]


TANH = Nonlinearity("tanh")
PIECEWISE_LINEAR = Nonlinearity("pl")

_PHI_ALIASES = {"tanh": TANH, "pl": PIECEWISE_LINEAR, "piecewise-linear": PIECEWISE_LINEAR,
                "sat": PIECEWISE_LINEAR}


def get_nonlinearity(name) -> Nonlinearity:
    if isinstance(name, Nonlinearity):
        return name
    try:
        return _PHI_ALIASES[str(name).lower()]
    except KeyError:
        raise InvalidInputError(f"unknown nonlinearity {name!r}; use 'tanh' or 'pl'") from None


@dataclass(frozen=True)
class FeedbackConfig:
    """One design session: load plus controller parameters.

    Hard constraints (``0 < tau_p < tau_n``, unit load DC gain, strictly
    proper load, ``beta`` in [0, 1], ``k >= 0``) raise :class:`ConfigError`
    listing every violation.  Load poles or zeros right of ``-1/tau_n`` only
    trigger a warning.
    """

    load: TransferFunction
    tau_p: float = 1.0
    tau_n: float = 10.0
    beta: float = 0.5
    k: float = 1.0
    r: float = 0.0
    phi: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "phi", get_nonlinearity(self.phi).kind)
        for name in ("tau_p", "tau_n", "beta", "k", "r"):
            object.__setattr__(self, name, float(getattr(self, name)))
        violations = config_violations(self)
        if violations:
            raise ConfigError(violations)
        for msg in config_warnings(self):
            warnings.warn(msg, stacklevel=3)

    @property
    def nonlinearity(self) -> Nonlinearity:
        return get_nonlinearity(self.phi)

    def replace(self, **changes) -> "FeedbackConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "load": {"num": list(self.load.num.coeffs), "den": list(self.load.den.coeffs)},
            "tau_p": self.tau_p,
            "tau_n": self.tau_n,
            "beta": self.beta,
            "k": self.k,
            "r": self.r,
            "phi": self.phi,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackConfig":
        violations = []
        try:
            load = d["load"]
            tf = TransferFunction.from_coeffs(load["num"], load["den"])
        except (KeyError, TypeError) as exc:
            raise ConfigError([f"load: expected {{'num': [...], 'den': [...]}} ({exc})"]) from None
        except InvalidInputError as exc:
            raise ConfigError([f"load: {exc}"]) from None
        kwargs = {}
        for name in ("tau_p", "tau_n", "beta", "k", "r"):
            if name in d:
                try:
                    kwargs[name] = float(d[name])
                except (TypeError, ValueError):
                    violations.append(f"{name}: not a number ({d[name]!r})")
        if "phi" in d:
            kwargs["phi"] = d["phi"]
        if violations:
            raise ConfigError(violations)
        try:
            return cls(load=tf, **kwargs)
        except InvalidInputError as exc:
            raise ConfigError([str(exc)]) from None

    @classmethod
    def from_json(cls, text: str) -> "FeedbackConfig":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        """Short SHA-256 of the canonical JSON form."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def config_violations(cfg: FeedbackConfig) -> list:
    out = []
    if not (cfg.tau_p > 0):
        out.append(f"tau_p = {cfg.tau_p:g} must be positive (ordering tau_n > tau_p > 0)")
    if not (cfg.tau_n > cfg.tau_p):
        out.append(f"tau_n = {cfg.tau_n:g} must exceed tau_p = {cfg.tau_p:g} "
                   "(ordering tau_n > tau_p > 0: slow negative, fast positive channel)")
    if not (0.0 <= cfg.beta <= 1.0):
        out.append(f"beta = {cfg.beta:g} outside the balance interval [0, 1]")
    if not (cfg.k >= 0.0):
        out.append(f"k = {cfg.k:g} must be non-negative")
    if not math.isfinite(cfg.r):
        out.append("r must be finite")
    load = cfg.load
    if not load.is_strictly_proper:
        out.append("load must have relative degree at least one")
    den0 = load.den.coeffs[0]
    if den0 == 0.0:
        out.append("load has a pole at s = 0; DC gain must be normalized to 1")
    else:
        dc = load.num.coeffs[0] / den0
        if abs(dc - 1.0) > 1e-9:
            out.append(f"load DC gain is {dc:.9g}; the load must have normalized DC gain L(0) = 1")
    return out


def config_warnings(cfg: FeedbackConfig) -> list:
    out = []
    if cfg.tau_n <= 0 or not cfg.load.is_strictly_proper:
        return out
    bound = -1.0 / cfg.tau_n
    for what, roots in (("pole", cfg.load.poles()), ("zero", cfg.load.zeros())):
        bad = [z for z in roots if z.real >= bound]
        if bad:
            out.append(f"load {what}s {bad} not left of -1/tau_n = {bound:g}")
    return out


def controller_tf(beta: float, tau_p: float, tau_n: float) -> TransferFunction:
    """Mixed controller ``C(s) = beta*(-C_p) + (1 - beta)*C_n`` in closed form."""
    num = Polynomial((-(2.0 * beta - 1.0), -(beta * (tau_n + tau_p) - tau_p)))
    den = Polynomial((1.0, tau_p)) * Polynomial((1.0, tau_n))
    return TransferFunction(num, den)


def controller_zero(beta: float, tau_p: float, tau_n: float) -> float:
    """Zero of the controller, ``(1 - 2 beta)/(beta (tau_p + tau_n) - tau_p)``.

    Returns ``math.inf`` when the first-order numerator coefficient vanishes.
    """
    a = beta * (tau_p + tau_n) - tau_p
    if abs(a) <= 1e-12 * (tau_p + tau_n):
        return math.inf
    return (1.0 - 2.0 * beta) / a


def loop_tf(cfg: FeedbackConfig) -> TransferFunction:
    return controller_tf(cfg.beta, cfg.tau_p, cfg.tau_n) * cfg.load


def realize_loop(cfg: FeedbackConfig) -> StateSpaceModel:
    """Realize ``G`` with state ``(xbar, x_p, x_n)`` and ``C = [0 .. 0, beta, beta - 1]``.

    The load block uses its controllable canonical form with output ``z``;
    the filters obey ``tau_p x_p' = -z - x_p`` and ``tau_n x_n' = -z - x_n``.
    The matrices do not depend on ``k`` and only ``C`` depends on ``beta``.
    """
    ld = tf_to_statespace(cfg.load)
    m = ld.order
    n = m + 2
    A = np.zeros((n, n))
    A[:m, :m] = ld.A
    A[m, :m] = -ld.C / cfg.tau_p
    A[m, m] = -1.0 / cfg.tau_p
    A[m + 1, :m] = -ld.C / cfg.tau_n
    A[m + 1, m + 1] = -1.0 / cfg.tau_n
    B = np.zeros(n)
    B[:m] = ld.B
    C = np.zeros(n)
    C[m] = cfg.beta
    C[m + 1] = cfg.beta - 1.0
    labels = tuple(f"xbar{i}" for i in range(m)) + ("x_p", "x_n")
    return StateSpaceModel(A, B, C, labels)


def closed_loop_jacobian(ss: StateSpaceModel, k: float, slope: float) -> np.ndarray:
    """Linearization ``A - phi'(y*) k B C`` of the closed loop."""
    return ss.A - slope * k * np.outer(ss.B, ss.C)


@dataclass(frozen=True)
class Equilibrium:
    y_star: float
    x_star: np.ndarray
    classification: str
    max_real_eig: float
    eigenvalues: np.ndarray = field(repr=False, default=None)


def _classify(max_re: float) -> str:
    if max_re > MARGINAL_TOL:
        return "unstable"
    if max_re < -MARGINAL_TOL:
        return "stable"
    return "marginal"


def find_equilibria(cfg: FeedbackConfig, ss: Optional[StateSpaceModel] = None) -> list:
    """All isolated equilibria of the closed loop, sorted by output value.

    Solutions of ``phi(y) - r = y/(k(2 beta - 1))`` are bracketed on a
    2000-interval grid over ``|y| <= k|2 beta - 1|(1 + |r|) + 1`` and refined
    by bisection.  When ``k(2 beta - 1) = 0`` the output equilibrium is
    ``y* = 0`` for every ``r``.  The state is recovered as
    ``x* = A^{-1} B (phi(y*) - r)``.
    """
    if not cfg.k > 0:
        raise InvalidInputError("equilibrium search requires k > 0")
    ss = realize_loop(cfg) if ss is None else ss
    phi = cfg.nonlinearity
    g0 = cfg.k * (2.0 * cfg.beta - 1.0)
    if abs(g0) < 1e-14:
        ys = [0.0]
    else:
        Y = abs(g0) * (1.0 + abs(cfg.r)) + 1.0
        grid = np.linspace(-Y, Y, 2001)

        def resid(y):
            return phi(y) - cfg.r - y / g0

        vals = resid(grid)
        ys = list(grid[vals == 0.0])
        idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
        for i in idx:
            ys.append(brentq(resid, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15, maxiter=200))
        ys = sorted(ys)
        dedup = []
        for y in ys:
            if not dedup or abs(y - dedup[-1]) > 1e-9:
                dedup.append(y)
        ys = dedup
    out = []
    ABinv = np.linalg.solve(ss.A, ss.B)
    for y in ys:
        x = ABinv * (float(phi(y)) - cfg.r)
        ev = eigenvalues(closed_loop_jacobian(ss, cfg.k, float(phi.slope(y))))
        mr = float(np.max(ev.real))
        out.append(Equilibrium(float(y), x, _classify(mr), mr, ev))
    return out


@dataclass
class Timeseries:
    """Sampled closed-loop trajectory; ``y = k C x``."""

    t: np.ndarray
    y: np.ndarray
    x: np.ndarray
    metadata: dict = field(default_factory=dict)

    def oscillation(self):
        return estimate_oscillation(self)


def default_dt(cfg: FeedbackConfig) -> float:
    """``min(tau_p, fastest load time constant) / 20``."""
    poles = cfg.load.poles()
    taus = [cfg.tau_p] + [1.0 / abs(p) for p in poles if abs(p) > 0]
    return min(taus) / 20.0


def simulate(cfg: FeedbackConfig, x0=None, T: float = 100.0, dt: Optional[float] = None,
             stride: int = 1) -> Timeseries:
    """Fixed-step RK4 integration of the closed loop.

    Parameters
    ----------
    cfg : FeedbackConfig
    x0 : array-like, optional
        Initial state in the :func:`realize_loop` coordinates.  Defaults to a
        1e-2 perturbation of the filter state ``x_p``.
    T, dt : float
        Horizon and step in seconds; ``dt`` defaults to :func:`default_dt`.
    stride : int
        Record every ``stride``-th step.

    Raises
    ------
    DivergenceError
        If the state norm exceeds 1e6.
    """
    if not T > 0:
        raise InvalidInputError("T must be positive")
    dt = default_dt(cfg) if dt is None else float(dt)
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    ss = realize_loop(cfg)
    if x0 is None:
        x0 = np.zeros(ss.order)
        x0[-2] = 1e-2
    x0 = np.array(x0, dtype=float).reshape(ss.order)
    nsteps = int(round(T / dt))
    kC = cfg.k * ss.C
    rec, bad = _integrate.rk4_lure(ss.A, ss.B, kC, cfg.r, cfg.nonlinearity.code, x0, dt,
                                   nsteps, int(stride))
    if bad >= 0:
        raise DivergenceError(
            f"state norm exceeded {_integrate.DIVERGENCE_RADIUS:g} at t = {bad * dt:.6g} s; "
            "check the realization or the configuration")
    t = np.arange(rec.shape[0]) * dt * stride
    meta = {"config": cfg.to_dict(), "solver": "rk4", "dt": dt, "stride": int(stride)}
    return Timeseries(t, rec @ kC, rec, meta)


@dataclass(frozen=True)
class OscillationEstimate:
    omega: float
    amplitude: float
    waveform: str
    third_harmonic_ratio: float
    n_crossings: int


def estimate_oscillation(ts, y=None) -> Optional[OscillationEstimate]:
    """Frequency and amplitude of a steady oscillation in a sampled signal.

    ``ts`` is a :class:`Timeseries` (its ``y`` is used) or a time grid, in
    which case ``y`` must be given.  The first half of the record is dropped
    as transient.  Returns ``None`` when fewer than four upward crossings of
    the mean are found, when the crossing intervals vary by more than 20%
    (coefficient of variation), or when the signal is flat or decaying.
    """
    if y is None:
        t, y = np.asarray(ts.t, float), np.asarray(ts.y, float)
    else:
        t, y = np.asarray(ts, float), np.asarray(y, float)
    half = len(t) // 2
    t, y = t[half:], y[half:]
    if len(t) < 8:
        return None
    yc = y - y.mean()
    scale = max(1.0, float(np.max(np.abs(y))))
    if np.ptp(yc) <= 1e-9 * scale:
        return None
    idx = np.flatnonzero((yc[:-1] < 0) & (yc[1:] >= 0))
    if idx.size < 4:
        return None
    tc = t[idx] - yc[idx] * (t[idx + 1] - t[idx]) / (yc[idx + 1] - yc[idx])
    gaps = np.diff(tc)
    if gaps.std() / gaps.mean() > 0.2:
        return None
    omega = 2.0 * np.pi / gaps.mean()
    amps = np.array([np.ptp(y[a:b + 1]) / 2.0 for a, b in zip(idx[:-1], idx[1:])])
    if amps[-1] < 0.5 * amps[0]:
        return None
    a, b = idx[0], idx[-1]
    ts_, ys_ = t[a:b + 1], yc[a:b + 1]
    c1 = abs(np.trapezoid(ys_ * np.exp(-1j * omega * ts_), ts_))
    c3 = abs(np.trapezoid(ys_ * np.exp(-3j * omega * ts_), ts_))
    ratio = c3 / c1 if c1 > 0 else math.inf
    return OscillationEstimate(
        omega=float(omega),
        amplitude=float(amps.mean()),
        waveform="relaxation" if ratio >= 0.15 else "quasi-harmonic",
        third_harmonic_ratio=float(ratio),
        n_crossings=int(idx.size),
    )
