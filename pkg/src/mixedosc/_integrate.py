"""Compiled fixed-step RK4 kernels.

Nonlinearity codes: 0 = tanh, 1 = unit saturation.
"""

import numba
import numpy as np

PHI_CODES = {"tanh": 0, "pl": 1}
DIVERGENCE_RADIUS = 1e6


@numba.njit(cache=True, inline="always")
def _phi(code, y):
    if code == 0:
        return np.tanh(y)
    if y > 1.0:
        return 1.0
    if y < -1.0:
        return -1.0
    return y


@numba.njit(cache=True)
def _lure_rhs(A, B, kC, r, code, x, out):
    y = 0.0
    for j in range(x.shape[0]):
        y += kC[j] * x[j]
    u = -(_phi(code, y) - r)
    for i in range(x.shape[0]):
        acc = B[i] * u
        for j in range(x.shape[0]):
            acc += A[i, j] * x[j]
        out[i] = acc


@numba.njit(cache=True)
def rk4_lure(A, B, kC, r, code, x0, dt, nsteps, stride):
    """Integrate x' = A x - B (phi(kC x) - r).

    Returns the recorded states (every ``stride`` steps, first row = x0) and
    the step index of divergence (-1 when none).
    """
    n = x0.shape[0]
    nrec = nsteps // stride + 1
    rec = np.empty((nrec, n))
    x = x0.copy()
    rec[0] = x
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    irec = 1
    for step in range(1, nsteps + 1):
        _lure_rhs(A, B, kC, r, code, x, k1)
        for i in range(n):
            tmp[i] = x[i] + 0.5 * dt * k1[i]
        _lure_rhs(A, B, kC, r, code, tmp, k2)
        for i in range(n):
            tmp[i] = x[i] + 0.5 * dt * k2[i]
        _lure_rhs(A, B, kC, r, code, tmp, k3)
        for i in range(n):
            tmp[i] = x[i] + dt * k3[i]
        _lure_rhs(A, B, kC, r, code, tmp, k4)
        nrm = 0.0
        for i in range(n):
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            nrm += x[i] * x[i]
        if not nrm < DIVERGENCE_RADIUS * DIVERGENCE_RADIUS:
            return rec[:irec], step
        if step % stride == 0:
            rec[irec] = x
            irec += 1
    return rec[:irec], -1


@numba.njit(cache=True, inline="always")
def _friction(v, fp, fm, eps):
    t = np.tanh(v / eps)
    return 0.5 * (fp - fm) * t + 0.5 * (fp + fm) * t * t


@numba.njit(cache=True)
def _two_mass_rhs(p, x, out):
    km, dm, gamma, fp, fm, eps, k, beta, tau_p, tau_n, r, code, fric = (
        p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11], p[12])
    x1, v1, x2, v2, xp, xn = x[0], x[1], x[2], x[3], x[4], x[5]
    w = x1 - x2
    wd = v1 - v2
    F = _phi(int(code), k * (beta * xp + (beta - 1.0) * xn)) - r
    s = -km * w - dm * wd + gamma * F
    f1 = 0.0
    f2 = 0.0
    if fric != 0.0:
        f1 = _friction(v1, fp, fm, eps)
        f2 = _friction(v2, fp, fm, eps)
    out[0] = v1
    out[1] = s - f1
    out[2] = v2
    out[3] = -s - f2
    out[4] = (w - xp) / tau_p
    out[5] = (w - xn) / tau_n


@numba.njit(cache=True)
def rk4_two_mass(p, x0, dt, nsteps, stride):
    """RK4 for the (x1, v1, x2, v2, x_p, x_n) locomotion model."""
    n = 6
    nrec = nsteps // stride + 1
    rec = np.empty((nrec, n))
    x = x0.copy()
    rec[0] = x
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    irec = 1
    for step in range(1, nsteps + 1):
        _two_mass_rhs(p, x, k1)
        for i in range(n):
            tmp[i] = x[i] + 0.5 * dt * k1[i]
        _two_mass_rhs(p, tmp, k2)
        for i in range(n):
            tmp[i] = x[i] + 0.5 * dt * k2[i]
        _two_mass_rhs(p, tmp, k3)
        for i in range(n):
            tmp[i] = x[i] + dt * k3[i]
        _two_mass_rhs(p, tmp, k4)
        nrm = 0.0
        for i in range(n):
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            nrm += x[i] * x[i]
        if not nrm < DIVERGENCE_RADIUS * DIVERGENCE_RADIUS:
            return rec[:irec], step
        if step % stride == 0:
            rec[irec] = x
            irec += 1
    return rec[:irec], -1
