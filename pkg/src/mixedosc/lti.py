"""Dense linear-systems primitives for low-order continuous-time models.

Polynomials store coefficients in *ascending* powers of ``s`` throughout, so
``Polynomial([200.0])`` is the constant 200 and ``Polynomial([200, 20, 1])``
is ``s**2 + 20 s + 200``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as P

from .exceptions import InvalidInputError, PoleEvaluationError

__all__ = [
    "Polynomial",
    "TransferFunction",
    "StateSpaceModel",
    "poly_roots",
    "tf_evaluate",
    "tf_combine",
    "matrix_exponential",
    "eigenvalues",
    "tf_to_statespace",
    "ROOT_TOL",
    "EIG_TOL",
    "RANK_TOL",
]

ROOT_TOL = 1e-8
EIG_TOL = 1e-8
RANK_TOL = 1e-9
CANCEL_TOL = 1e-7


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial with ascending coefficients; trailing zeros trimmed."""

    coeffs: tuple = (0.0,)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise InvalidInputError("polynomial needs a 1-D, non-empty coefficient list")
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("polynomial coefficients must be finite")
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:1] * 0.0
        object.__setattr__(self, "coeffs", tuple(float(v) for v in c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0.0

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs)

    def __call__(self, s):
        # Horner, highest power first
        s = np.asarray(s, dtype=complex) if np.iscomplexobj(s) else np.asarray(s)
        acc = np.zeros_like(s, dtype=np.result_type(s, float)) + self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * s + c
        return acc[()] if acc.ndim == 0 else acc

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(P.polymul(self.as_array(), other.as_array()))
        return Polynomial(self.as_array() * float(other))

    __rmul__ = __mul__

    def __add__(self, other):
        return Polynomial(P.polyadd(self.as_array(), _as_poly(other).as_array()))

    def __neg__(self):
        return Polynomial(-self.as_array())

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def shift(self, lam: float) -> "Polynomial":
        """Return q(s) = p(s - lam)."""
        out = np.zeros(1)
        base = np.array([-lam, 1.0])
        for c in reversed(self.coeffs):
            out = P.polyadd(P.polymul(out, base), [c])
        return Polynomial(out)

    def roots(self) -> np.ndarray:
        return poly_roots(self)


def _as_poly(p) -> Polynomial:
    if isinstance(p, Polynomial):
        return p
    return Polynomial(np.atleast_1d(np.asarray(p, dtype=float)))


def poly_roots(p) -> np.ndarray:
    """All roots (with multiplicity) of a polynomial of degree >= 1.

    Roots are the eigenvalues of the companion matrix of the monic
    normalization of ``p``.

    Raises
    ------
    InvalidInputError
        If ``p`` is identically zero or constant.
    """
    p = _as_poly(p)
    if p.is_zero:
        raise InvalidInputError("the zero polynomial has no well-defined roots")
    if p.degree < 1:
        raise InvalidInputError("constant polynomial has no roots")
    c = p.as_array()
    n = p.degree
    # leading zero roots are split off exactly
    nzero = int(np.flatnonzero(c)[0])
    c = c[nzero:]
    m = n - nzero
    roots = [np.zeros(nzero, dtype=complex)]
    if m > 0:
        monic = c[:-1] / c[-1]
        comp = np.zeros((m, m))
        comp[1:, :-1] = np.eye(m - 1)
        comp[:, -1] = -monic
        roots.append(eigenvalues(comp))
    r = np.concatenate(roots)
    return r[np.lexsort((r.imag, r.real))]


def eigenvalues(M) -> np.ndarray:
    """Eigenvalues of a square real matrix (LAPACK Hessenberg + shifted QR)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"eigenvalues need a square matrix, got shape {M.shape}")
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    return np.linalg.eigvals(M).astype(complex)


def matrix_exponential(M, t=1.0) -> np.ndarray:
    """``exp(M t)`` by scaling-and-squaring with Pade approximation.

    ``t`` may be a scalar or a 1-D array of times; for an array the result is
    stacked along a leading axis.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"matrix exponential needs a square matrix, got shape {M.shape}")
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidInputError("time must be finite")
    if t.ndim == 0:
        return scipy.linalg.expm(M * float(t))
    return scipy.linalg.expm(t[:, None, None] * M[None, :, :])


@dataclass(frozen=True)
class TransferFunction:
    """Rational transfer function ``num(s) / den(s)`` with real coefficients.

    Arithmetic never cancels common factors; call :meth:`minimize` for that.
    """

    num: Polynomial
    den: Polynomial = field(default_factory=lambda: Polynomial((1.0,)))

    def __post_init__(self):
        object.__setattr__(self, "num", _as_poly(self.num))
        object.__setattr__(self, "den", _as_poly(self.den))
        if self.den.is_zero:
            raise InvalidInputError("denominator is identically zero")

    @classmethod
    def from_coeffs(cls, num: Sequence[float], den: Sequence[float]) -> "TransferFunction":
        return cls(Polynomial(tuple(num)), Polynomial(tuple(den)))

    @property
    def relative_degree(self) -> int:
        if self.num.is_zero:
            return self.den.degree + 1
        return self.den.degree - self.num.degree

    @property
    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    @property
    def is_strictly_proper(self) -> bool:
        return self.relative_degree >= 1

    def poles(self) -> np.ndarray:
        if self.den.degree == 0:
            return np.zeros(0, dtype=complex)
        return poly_roots(self.den)

    def zeros(self) -> np.ndarray:
        if self.num.is_zero or self.num.degree == 0:
            return np.zeros(0, dtype=complex)
        return poly_roots(self.num)

    def dc_gain(self) -> float:
        return float(tf_evaluate(self, 0.0).real)

    def __call__(self, s):
        return tf_evaluate(self, s)

    def __mul__(self, other):
        return tf_combine("multiply", self, other) if isinstance(other, TransferFunction) \
            else tf_combine("scale", self, other)

    def __rmul__(self, other):
        return tf_combine("scale", self, other)

    def __add__(self, other):
        return tf_combine("add", self, other)

    def __neg__(self):
        return tf_combine("negate", self)

    def __sub__(self, other):
        return tf_combine("add", self, tf_combine("negate", other))

    def shift(self, lam: float) -> "TransferFunction":
        """Return ``G(s - lam)``."""
        return TransferFunction(self.num.shift(lam), self.den.shift(lam))

    def minimize(self, tol: float = CANCEL_TOL):
        """Cancel pole/zero pairs closer than ``tol``.

        Returns
        -------
        tf : TransferFunction
            The reduced transfer function.
        cancelled : list of complex
            The cancelled root locations (one entry per pair).
        """
        zs = list(self.zeros())
        ps = list(self.poles())
        cancelled = []
        for z in list(zs):
            if not ps:
                break
            d = np.abs(np.asarray(ps) - z)
            i = int(np.argmin(d))
            if d[i] < tol:
                cancelled.append(complex(ps[i]))
                ps.pop(i)
                zs.remove(z)
        if not cancelled:
            return self, []
        num_lead = self.num.coeffs[-1]
        den_lead = self.den.coeffs[-1]
        num = Polynomial(np.real(P.polyfromroots(zs)) * num_lead) if zs else Polynomial((num_lead,))
        den = Polynomial(np.real(P.polyfromroots(ps)) * den_lead) if ps else Polynomial((den_lead,))
        return TransferFunction(num, den), cancelled


def tf_evaluate(g: TransferFunction, s):
    """Evaluate ``g`` at complex point(s) ``s`` by Horner's rule.

    Raises
    ------
    PoleEvaluationError
        If the denominator vanishes (relative to its coefficient scale).
    """
    s = np.asarray(s, dtype=complex)
    d = g.den(s)
    scale = max(abs(c) for c in g.den.coeffs)
    if np.any(np.abs(d) <= 1e-14 * scale):
        raise PoleEvaluationError("transfer function evaluated at a pole")
    out = g.num(s) / d
    return complex(out) if np.ndim(out) == 0 else out


def tf_combine(op: str, *args) -> TransferFunction:
    """Exact coefficient arithmetic on transfer functions.

    ``op`` is one of ``"multiply"``, ``"add"`` (two transfer functions),
    ``"scale"`` (transfer function and real factor) or ``"negate"``.
    """
    if op == "multiply":
        a, b = args
        return TransferFunction(a.num * b.num, a.den * b.den)
    if op == "add":
        a, b = args
        if a.den == b.den:
            return TransferFunction(a.num + b.num, a.den)
        return TransferFunction(a.num * b.den + b.num * a.den, a.den * b.den)
    if op == "scale":
        g, c = args
        return TransferFunction(g.num * float(c), g.den)
    if op == "negate":
        (g,) = args
        return TransferFunction(-g.num, g.den)
    raise InvalidInputError(f"unknown transfer-function operation {op!r}")


@dataclass(frozen=True)
class StateSpaceModel:
    """Single-input single-output realization ``(A, B, C, 0)``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise InvalidInputError("A must be square")
        B = np.asarray(self.B, dtype=float).reshape(n)
        C = np.asarray(self.C, dtype=float).reshape(n)
        for name, v in (("A", A), ("B", B), ("C", C)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"x{i}" for i in range(n)))

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def frequency_response(self, s):
        """``C (sI - A)^{-1} B`` at complex point(s) ``s``."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
        n = self.order
        out = np.empty(s_arr.shape, dtype=complex)
        eye = np.eye(n)
        for i, si in enumerate(s_arr.flat):
            out.flat[i] = self.C @ np.linalg.solve(si * eye - self.A, self.B)
        return complex(out[0]) if np.ndim(s) == 0 else out

    def controllability_matrix(self) -> np.ndarray:
        cols = [self.B]
        for _ in range(self.order - 1):
            cols.append(self.A @ cols[-1])
        return np.column_stack(cols)

    def observability_matrix(self) -> np.ndarray:
        rows = [self.C]
        for _ in range(self.order - 1):
            rows.append(rows[-1] @ self.A)
        return np.vstack(rows)

    def is_minimal(self, tol: float = RANK_TOL) -> bool:
        return (_rank(self.controllability_matrix(), tol) == self.order
                and _rank(self.observability_matrix(), tol) == self.order)

    def poles(self) -> np.ndarray:
        return eigenvalues(self.A)


def _rank(M, tol):
    # row scaling keeps the test meaningful for badly scaled Krylov matrices
    M = np.asarray(M, dtype=float)
    norms = np.linalg.norm(M, axis=1)
    norms[norms == 0] = 1.0
    sv = np.linalg.svd(M / norms[:, None], compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def tf_to_statespace(g: TransferFunction) -> StateSpaceModel:
    """Controllable canonical realization of a strictly proper ``g``."""
    if not g.is_strictly_proper:
        raise InvalidInputError("realization requires a strictly proper transfer function")
    den = g.den.as_array()
    n = g.den.degree
    lead = den[-1]
    a = den[:-1] / lead
    b = np.zeros(n)
    num = g.num.as_array() / lead
    b[: num.size] = num
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -a
    B = np.zeros(n)
    B[-1] = 1.0
    return StateSpaceModel(A, B, b)
