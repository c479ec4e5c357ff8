"""Embedded 5(4) Runge-Kutta machinery.

Two entry points share the same Dormand-Prince tableau:

* ``dopri_integrate``  -- generic adaptive integrator for a callable RHS on
  complex arrays; used for one-off solves (gauge factor, reference paths).
* ``fundamental_batch`` -- numba-compiled batched propagation of the matrix
  solution of ``y' = i * diag(b) ((lam I - Q(x)) y)`` together with its
  lambda-derivative stack.  This runs inside the eigenvalue scans, where the
  same problem is integrated for thousands of lambda values, so the inner
  loops are nopython-compiled.

Steps always land exactly on the requested output grid, the PI controller
follows the usual order-5 exponents, and the step size is capped by
``hmax_coef / (1 + |lam| max|b|)`` so that oscillatory solutions stay
resolved in contour scans.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import StiffnessError

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (
    9017 / 3168,
    -355 / 33,
    46732 / 5247,
    49 / 176,
    -5103 / 18656,
)
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

KIND_ZERO, KIND_CONST, KIND_GRID, KIND_POLY = 0, 1, 2, 3


def dopri_integrate(f, y0, grid, rtol=1e-12, atol=1e-14, max_step=np.inf):
    """Integrate ``y' = f(x, y)`` over an increasing grid; returns the stack
    of states at the grid points (including the initial one)."""
    y = np.asarray(y0, dtype=complex).copy()
    grid = np.asarray(grid, dtype=float)
    out = np.empty((grid.size,) + y.shape, dtype=complex)
    out[0] = y
    x = grid[0]
    k1 = f(x, y)
    h = min(max_step, (grid[-1] - grid[0]) / 16 + 1e-30)
    errold = 1e-4
    for gi in range(1, grid.size):
        xend = grid[gi]
        while x < xend - 1e-15 * max(1.0, abs(xend)):
            h = min(h, xend - x)
            k2 = f(x + _C2 * h, y + h * (_A21 * k1))
            k3 = f(x + _C3 * h, y + h * (_A31 * k1 + _A32 * k2))
            k4 = f(x + _C4 * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
            k5 = f(
                x + _C5 * h,
                y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4),
            )
            k6 = f(
                x + h,
                y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5),
            )
            y5 = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
            k7 = f(x + h, y5)
            err_vec = h * (
                _E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7
            )
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
            err = float(np.sqrt(np.mean(np.abs(err_vec / scale) ** 2)))
            if err <= 1.0:
                x += h
                y = y5
                k1 = k7
                fac = 5.0 if err < 1e-30 else 0.9 * err**-0.14 * errold**0.08
                h = min(h * min(fac, 5.0), max_step)
                errold = max(err, 1e-10)
            else:
                h *= max(0.2, 0.9 * err**-0.2)
                if h < 1e-14:
                    raise StiffnessError("step size underflow in dopri_integrate")
        out[gi] = y
        x = xend
    return out


@njit(cache=True)
def _q_eval(kind, qconst, qxs, qvals, qpoly, flip, x, out):  # pragma: no cover
    n = out.shape[0]
    if flip == 1:
        x = 1.0 - x
    if kind == 0:
        for i in range(n):
            for j in range(n):
                out[i, j] = 0.0
    elif kind == 1:
        for i in range(n):
            for j in range(n):
                out[i, j] = qconst[i, j]
    elif kind == 2:
        m = qxs.shape[0]
        lo = 0
        hi = m - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if qxs[mid] <= x:
                lo = mid
            else:
                hi = mid
        w = (x - qxs[lo]) / (qxs[hi] - qxs[lo])
        for i in range(n):
            for j in range(n):
                out[i, j] = (1.0 - w) * qvals[lo, i, j] + w * qvals[hi, i, j]
    else:
        deg = qpoly.shape[2]
        for i in range(n):
            for j in range(n):
                acc = 0.0 + 0.0j
                for d in range(deg - 1, -1, -1):
                    acc = acc * x + qpoly[i, j, d]
                out[i, j] = acc


@njit(cache=True)
def _deriv(ib, lam, x, kind, qconst, qxs, qvals, qpoly, flip, y, out, qtmp):  # pragma: no cover
    P = y.shape[0]
    n = y.shape[1]
    _q_eval(kind, qconst, qxs, qvals, qpoly, flip, x, qtmp)
    for p in range(P):
        for i in range(n):
            for j in range(n):
                acc = lam * y[p, i, j]
                for k in range(n):
                    acc -= qtmp[i, k] * y[p, k, j]
                if p > 0:
                    acc += p * y[p - 1, i, j]
                out[p, i, j] = ib[i] * acc


@njit(cache=True)
def _fundamental_kernel(
    lams, order, grid, ib, kind, qconst, qxs, qvals, qpoly, flip, rtol, atol, hmax_coef, out
):  # pragma: no cover
    L = lams.shape[0]
    P = order + 1
    n = ib.shape[0]
    G = grid.shape[0]
    maxb = 0.0
    for i in range(n):
        m = abs(ib[i])
        if m > maxb:
            maxb = m
    for li in range(L):
        lam = lams[li]
        hmax = hmax_coef / (1.0 + abs(lam) * maxb)
        y = np.zeros((P, n, n), dtype=np.complex128)
        for i in range(n):
            y[0, i, i] = 1.0
        k1 = np.empty((P, n, n), dtype=np.complex128)
        k2 = np.empty_like(k1)
        k3 = np.empty_like(k1)
        k4 = np.empty_like(k1)
        k5 = np.empty_like(k1)
        k6 = np.empty_like(k1)
        k7 = np.empty_like(k1)
        ytmp = np.empty_like(k1)
        y5 = np.empty_like(k1)
        qtmp = np.empty((n, n), dtype=np.complex128)
        for p in range(P):
            for i in range(n):
                for j in range(n):
                    out[li, p, 0, i, j] = y[p, i, j]
        x = grid[0]
        _deriv(ib, lam, x, kind, qconst, qxs, qvals, qpoly, flip, y, k1, qtmp)
        errold = 1e-4
        h = hmax
        for gi in range(1, G):
            xend = grid[gi]
            while x < xend - 1e-15:
                if h > xend - x:
                    h = xend - x
                for p in range(P):
                    for i in range(n):
                        for j in range(n):
                            ytmp[p, i, j] = y[p, i, j] + h * (_A21 * k1[p, i, j])
                _deriv(ib, lam, x + _C2 * h, kind, qconst, qxs, qvals, qpoly, flip, ytmp, k2, qtmp)
                for p in range(P):
                    for i in range(n):
                        for j in range(n):
                            ytmp[p, i, j] = y[p, i, j] + h * (
                                _A31 * k1[p, i, j] + _A32 * k2[p, i, j]
                            )
                _deriv(ib, lam, x + _C3 * h, kind, qconst, qxs, qvals, qpoly, flip, ytmp, k3, qtmp)
                for p in range(P):
                    for i in range(n):
                        for j in range(n):
                            ytmp[p, i, j] = y[p, i, j] + h * (
                                _A41 * k1[p, i, j]
                                + _A42 * k2[p, i, j]
                                + _A43 * k3[p, i, j]
                            )
                _deriv(ib, lam, x + _C4 * h, kind, qconst, qxs, qvals, qpoly, flip, ytmp, k4, qtmp)
                for p in range(P):
                    for i in range(n):
                        for j in range(n):
                            ytmp[p, i, j] = y[p, i, j] + h * (
                                _A51 * k1[p, i, j]
                                + _A52 * k2[p, i, j]
                                + _A53 * k3[p, i, j]
                                + _A54 * k4[p, i, j]
                            )
                _deriv(ib, lam, x + _C5 * h, kind, qconst, qxs, qvals, qpoly, flip, ytmp, k5, qtmp)
                for p in range(P):
                    for i in range(n):
                        for j in range(n):
                            ytmp[p, i, j] = y[p, i, j] + h * (
                                _A61 * k1[p, i, j]
                                + _A62 * k2[p, i, j]
                                + _A63 * k3[p, i, j]
                                + _A64 * k4[p, i, j]
                                + _A65 * k5[p, i, j]
                            )
                _deriv(ib, lam, x + h, kind, qconst, qxs, qvals, qpoly, flip, ytmp, k6, qtmp)
                for p in range(P):
                    for i in range(n):
                        for j in range(n):
                            y5[p, i, j] = y[p, i, j] + h * (
                                _B1 * k1[p, i, j]
                                + _B3 * k3[p, i, j]
                                + _B4 * k4[p, i, j]
                                + _B5 * k5[p, i, j]
                                + _B6 * k6[p, i, j]
                            )
                _deriv(ib, lam, x + h, kind, qconst, qxs, qvals, qpoly, flip, y5, k7, qtmp)
                errsum = 0.0
                cnt = 0
                for p in range(P):
                    for i in range(n):
                        for j in range(n):
                            e = h * (
                                _E1 * k1[p, i, j]
                                + _E3 * k3[p, i, j]
                                + _E4 * k4[p, i, j]
                                + _E5 * k5[p, i, j]
                                + _E6 * k6[p, i, j]
                                + _E7 * k7[p, i, j]
                            )
                            a5 = abs(y5[p, i, j])
                            a0 = abs(y[p, i, j])
                            sc = atol + rtol * (a5 if a5 > a0 else a0)
                            q = abs(e) / sc
                            errsum += q * q
                            cnt += 1
                err = np.sqrt(errsum / cnt)
                if err <= 1.0:
                    x = x + h
                    for p in range(P):
                        for i in range(n):
                            for j in range(n):
                                y[p, i, j] = y5[p, i, j]
                                k1[p, i, j] = k7[p, i, j]
                    if err < 1e-30:
                        fac = 5.0
                    else:
                        fac = 0.9 * err**-0.14 * errold**0.08
                        if fac > 5.0:
                            fac = 5.0
                    h = h * fac
                    if h > hmax:
                        h = hmax
                    errold = max(err, 1e-10)
                else:
                    fac = 0.9 * err**-0.2
                    if fac < 0.2:
                        fac = 0.2
                    h = h * fac
                    if h < 1e-14:
                        return li
            for p in range(P):
                for i in range(n):
                    for j in range(n):
                        out[li, p, gi, i, j] = y[p, i, j]
            x = xend
    return -1


_EMPTY_CONST = np.zeros((1, 1), dtype=complex)
_EMPTY_XS = np.zeros(2, dtype=float)
_EMPTY_VALS = np.zeros((2, 1, 1), dtype=complex)
_EMPTY_POLY = np.zeros((1, 1, 1), dtype=complex)


def potential_kernel_data(potential, n):
    """Pack a potential spec into the (kind, const, xs, vals, poly) tuple
    consumed by the compiled kernel.  Unknown variants are sampled onto a
    fine grid and handled by linear interpolation."""
    from .model import ConstantPotential, GridPotential, PolynomialPotential, ZeroPotential

    if isinstance(potential, ZeroPotential):
        return KIND_ZERO, _EMPTY_CONST, _EMPTY_XS, _EMPTY_VALS, _EMPTY_POLY
    if isinstance(potential, ConstantPotential):
        return (
            KIND_CONST,
            np.ascontiguousarray(potential.matrix, dtype=complex),
            _EMPTY_XS,
            _EMPTY_VALS,
            _EMPTY_POLY,
        )
    if isinstance(potential, GridPotential):
        return (
            KIND_GRID,
            _EMPTY_CONST,
            np.ascontiguousarray(potential.abscissae, dtype=float),
            np.ascontiguousarray(potential.values, dtype=complex),
            _EMPTY_POLY,
        )
    if isinstance(potential, PolynomialPotential):
        deg = max(
            max(len(entry) for entry in row) for row in potential.coefficients
        )
        poly = np.zeros((n, n, max(deg, 1)), dtype=complex)
        for i in range(n):
            for j in range(n):
                for d, c in enumerate(potential.coefficients[i][j]):
                    poly[i, j, d] = c
        return KIND_POLY, _EMPTY_CONST, _EMPTY_XS, _EMPTY_VALS, poly
    xs = np.linspace(0.0, 1.0, 4097)
    vals = np.stack([potential(x) for x in xs]).astype(complex)
    return KIND_GRID, _EMPTY_CONST, xs, vals, _EMPTY_POLY


def fundamental_batch(
    blocks,
    potential,
    lams,
    order=0,
    grid=None,
    rtol=1e-10,
    atol=1e-12,
    hmax_coef=0.1,
    backward=False,
):
    """Propagate the matrix solution (and lambda-derivative stack) for a
    batch of lambda values.

    Returns an array of shape ``(len(lams), order + 1, len(grid), n, n)``.
    With ``backward=True`` the system is integrated from x = 1 towards
    x = 0 (the grid is still given in forward coordinates) and the result
    is the backward propagator normalised to the identity at x = 1.
    """
    n = blocks.n
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    if grid is None:
        grid = np.array([0.0, 1.0])
    grid = np.asarray(grid, dtype=float)
    ib = 1j * blocks.coordinate_weights()
    kind, qc, qxs, qvals, qpoly = potential_kernel_data(potential, n)
    flip = 0
    if backward:
        ib = -ib
        flip = 1
        grid_k = 1.0 - grid[::-1]
    else:
        grid_k = grid
    out = np.empty((lams.size, order + 1, grid.size, n, n), dtype=complex)
    bad = _fundamental_kernel(
        lams,
        order,
        np.ascontiguousarray(grid_k),
        np.ascontiguousarray(ib),
        kind,
        qc,
        qxs,
        qvals,
        qpoly,
        flip,
        float(rtol),
        float(atol),
        float(hmax_coef),
        out,
    )
    if bad >= 0:
        raise StiffnessError(
            f"step size underflow while integrating at lambda = {lams[bad]}",
            lam=complex(lams[bad]),
        )
    if backward:
        out = out[:, :, ::-1]
    return out
