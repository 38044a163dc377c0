"""scikit-learn style front ends.

Hyperparameters live in ``__init__`` (so ``get_params``/``set_params`` and
``clone`` work); ``fit`` runs the design and stores results in trailing
underscore attributes; ``predict`` maps rows of ``(k, beta)`` to a label or a
predicted frequency.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dominance import Label, best_k_bar_2, classify_cell
from .fastslow import _HalfCycleTable, design_fs
from .feedback import FeedbackConfig, estimate_oscillation, find_equilibria, loop_tf, \
    realize_loop, simulate
from .harmonic import design_hb, predict as hb_predict
from .lti import TransferFunction

__all__ = [
    "RegionClassifier",
    "HarmonicBalanceDesigner",
    "FastSlowDesigner",
    "MixedFeedbackOscillator",
    "check_kbeta",
]

TWO_MASS_NUM = (200.0,)
TWO_MASS_DEN = (200.0, 20.0, 1.0)


def check_kbeta(X) -> np.ndarray:
    """Validate an ``(n_samples, 2)`` array of ``(k, beta)`` rows."""
    X = check_array(X, dtype=float)
    if X.shape[1] != 2:
        raise ValueError(f"expected columns (k, beta), got {X.shape[1]} columns")
    if np.any(X[:, 0] < 0) or np.any((X[:, 1] < 0) | (X[:, 1] > 1)):
        raise ValueError("k must be >= 0 and beta in [0, 1]")
    return X


class _LoopParams(BaseEstimator):
    def _template(self, beta=0.5, k=1.0) -> FeedbackConfig:
        load = TransferFunction.from_coeffs(self.load_num, self.load_den)
        return FeedbackConfig(load, self.tau_p, self.tau_n, beta, k, self.r, self.phi)


class RegionClassifier(ClassifierMixin, _LoopParams):
    """Label ``(k, beta)`` points as ``NOT_2DOM``, ``DOM_STABLE`` or ``OSC``.

    Examples
    --------
    >>> clf = RegionClassifier().fit()
    >>> clf.predict([[20.0, 0.1538]])[0]
    'OSC'
    """

    def __init__(self, load_num=TWO_MASS_NUM, load_den=TWO_MASS_DEN, tau_p=1.0, tau_n=10.0,
                 r=0.0, phi="tanh"):
        self.load_num = load_num
        self.load_den = load_den
        self.tau_p = tau_p
        self.tau_n = tau_n
        self.r = r
        self.phi = phi

    def fit(self, X=None, y=None):
        self.template_ = self._template()
        self.classes_ = np.array([lab.value for lab in Label])
        self._kbar2 = {}
        return self

    def kbar2(self, beta: float) -> float:
        check_is_fitted(self, "template_")
        if beta not in self._kbar2:
            self._kbar2[beta] = best_k_bar_2(loop_tf(self.template_.replace(beta=beta)))[0]
        return self._kbar2[beta]

    def predict(self, X):
        check_is_fitted(self, "template_")
        X = check_kbeta(X)
        out = np.empty(X.shape[0], dtype=object)
        for i, (k, beta) in enumerate(X):
            cfg = self.template_.replace(beta=float(beta), k=float(k))
            out[i] = classify_cell(cfg, self.kbar2(float(beta))).value
        return out


class HarmonicBalanceDesigner(_LoopParams):
    """Quasi-harmonic design for a target frequency ``omega_r``.

    After ``fit``: ``design_`` (:class:`~mixedosc.harmonic.HBDesign`),
    ``beta_``, ``k_`` and ``k_range_``.  ``predict`` returns the
    harmonic-balance frequency for each ``(k, beta)`` row (NaN when none).
    """

    def __init__(self, load_num=TWO_MASS_NUM, load_den=TWO_MASS_DEN, tau_p=1.0, tau_n=10.0,
                 r=0.0, phi="tanh", omega_r=1.0):
        self.load_num = load_num
        self.load_den = load_den
        self.tau_p = tau_p
        self.tau_n = tau_n
        self.r = r
        self.phi = phi
        self.omega_r = omega_r

    def fit(self, X=None, y=None):
        template = self._template()
        design = design_hb(template, self.omega_r)
        if design is None:
            raise ValueError(f"no balance puts G(j{self.omega_r:g}) on the negative real axis")
        self.design_ = design
        self.beta_ = design.beta
        self.k_ = design.k
        self.k_range_ = design.k_range
        self.accepted_ = design.accepted
        return self

    def predict(self, X):
        check_is_fitted(self, "design_")
        X = check_kbeta(X)
        out = np.full(X.shape[0], np.nan)
        base = self._template()
        for i, (k, beta) in enumerate(X):
            if k <= 0:
                continue
            preds = hb_predict(base.replace(beta=float(beta), k=float(k)))
            if preds:
                out[i] = min(preds, key=lambda p: abs(p.omega - self.omega_r)).omega
        return out


class FastSlowDesigner(_LoopParams):
    """Relaxation design for a target frequency ``omega_r``.

    After ``fit``: ``design_`` (:class:`~mixedosc.fastslow.FSDesign`) and the
    best-ranked ``beta_``, ``k_``.  ``predict`` returns ``pi / h2`` for each
    ``(k, beta)`` row (NaN when the relay analysis predicts no cycle).
    """

    def __init__(self, load_num=TWO_MASS_NUM, load_den=TWO_MASS_DEN, tau_p=1.0, tau_n=10.0,
                 r=0.0, phi="tanh", omega_r=0.1, betas=None):
        self.load_num = load_num
        self.load_den = load_den
        self.tau_p = tau_p
        self.tau_n = tau_n
        self.r = r
        self.phi = phi
        self.omega_r = omega_r
        self.betas = betas

    def fit(self, X=None, y=None):
        design = design_fs(self._template(), self.omega_r, betas=self.betas)
        if not design.found:
            raise ValueError(f"no (k, beta) pair yields the half period pi/{self.omega_r:g}")
        self.design_ = design
        self.beta_ = design.best().beta
        self.k_ = design.best().k
        self._table = _HalfCycleTable(self._template())
        return self

    def predict(self, X):
        check_is_fitted(self, "design_")
        X = check_kbeta(X)
        out = np.full(X.shape[0], np.nan)
        for i, (k, beta) in enumerate(X):
            if k <= 0:
                continue
            res = self._table.predict(float(k), float(beta))
            if res.h2 is not None:
                out[i] = math.pi / res.h2
        return out


class MixedFeedbackOscillator(_LoopParams):
    """Simulate one closed loop and measure its oscillation.

    After ``fit``: ``equilibria_``, ``timeseries_`` and, when a steady
    oscillation is found, ``omega_``, ``amplitude_`` and ``waveform_``
    (otherwise these are ``None``).
    """

    def __init__(self, load_num=TWO_MASS_NUM, load_den=TWO_MASS_DEN, tau_p=1.0, tau_n=10.0,
                 r=0.0, phi="tanh", beta=0.1538, k=20.0, T=200.0, dt=None):
        self.load_num = load_num
        self.load_den = load_den
        self.tau_p = tau_p
        self.tau_n = tau_n
        self.r = r
        self.phi = phi
        self.beta = beta
        self.k = k
        self.T = T
        self.dt = dt

    def fit(self, X=None, y=None):
        cfg = self._template(self.beta, self.k)
        self.config_ = cfg
        self.realization_ = realize_loop(cfg)
        self.equilibria_ = find_equilibria(cfg) if cfg.k > 0 else []
        self.timeseries_ = simulate(cfg, T=self.T, dt=self.dt)
        est = estimate_oscillation(self.timeseries_)
        self.omega_ = None if est is None else est.omega
        self.amplitude_ = None if est is None else est.amplitude
        self.waveform_ = None if est is None else est.waveform
        return self

    def predict(self, X):
        """Output ``y`` interpolated at the times in ``X`` (shape ``(n,)`` or ``(n, 1)``)."""
        check_is_fitted(self, "timeseries_")
        t = check_array(np.asarray(X, dtype=float).reshape(-1, 1)).ravel()
        return np.interp(t, self.timeseries_.t, self.timeseries_.y)
