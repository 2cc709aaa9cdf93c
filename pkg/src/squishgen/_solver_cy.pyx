# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled projection kernel for the legalization system.

Mirror of _solver_py.py: identical loop structure and operation order, so
both backends produce bit-identical float64 results (built with
-ffp-contract=off).  Keep the two files in sync.
"""

from libc.math cimport sqrt

BACKEND = "compiled"


def project(
    double[::1] dx,
    double[::1] dy,
    long long[::1] xa,
    long long[::1] xb,
    double[::1] xm,
    long long[::1] ya,
    long long[::1] yb,
    double[::1] ym,
    long long[::1] cell_r,
    long long[::1] cell_c,
    long long[::1] cell_off,
    long long[::1] urow,
    long long[::1] urow_off,
    long long[::1] ucol,
    long long[::1] ucol_off,
    double amin,
    double amax,
    double sum_x,
    double sum_y,
    double lo,
    double tol,
    double atol,
    long long max_iters,
):
    """Iterate constraint projections in place; returns (converged, sweeps)."""
    cdef Py_ssize_t nx = dx.shape[0]
    cdef Py_ssize_t ny = dy.shape[0]
    cdef Py_ssize_t n_xruns = xa.shape[0]
    cdef Py_ssize_t n_yruns = ya.shape[0]
    cdef Py_ssize_t n_polys = cell_off.shape[0] - 1
    cdef Py_ssize_t i, t, p, ci
    cdef long long it = 0
    cdef bint ok, converged = False
    cdef double s, add, area, target, sc

    while it < max_iters:
        it += 1
        ok = True

        for t in range(n_xruns):
            s = 0.0
            for i in range(xa[t], xb[t] + 1):
                s += dx[i]
            if s < xm[t] - tol:
                ok = False
                add = (xm[t] - s) / (xb[t] - xa[t] + 1)
                for i in range(xa[t], xb[t] + 1):
                    dx[i] += add
        for i in range(nx):
            if dx[i] < lo - tol:
                ok = False
                dx[i] = lo
        s = 0.0
        for i in range(nx):
            s += dx[i]
        if s < sum_x - tol or s > sum_x + tol:
            ok = False
            add = (sum_x - s) / nx
            for i in range(nx):
                dx[i] += add

        for t in range(n_yruns):
            s = 0.0
            for i in range(ya[t], yb[t] + 1):
                s += dy[i]
            if s < ym[t] - tol:
                ok = False
                add = (ym[t] - s) / (yb[t] - ya[t] + 1)
                for i in range(ya[t], yb[t] + 1):
                    dy[i] += add
        for i in range(ny):
            if dy[i] < lo - tol:
                ok = False
                dy[i] = lo
        s = 0.0
        for i in range(ny):
            s += dy[i]
        if s < sum_y - tol or s > sum_y + tol:
            ok = False
            add = (sum_y - s) / ny
            for i in range(ny):
                dy[i] += add

        for p in range(n_polys):
            area = 0.0
            for ci in range(cell_off[p], cell_off[p + 1]):
                area += dx[cell_c[ci]] * dy[cell_r[ci]]
            if area < amin - atol:
                target = amin
            elif area > amax + atol:
                target = amax
            else:
                continue
            ok = False
            sc = sqrt(target / area)
            for i in range(ucol_off[p], ucol_off[p + 1]):
                dx[ucol[i]] *= sc
            for i in range(urow_off[p], urow_off[p + 1]):
                dy[urow[i]] *= sc

        if ok:
            converged = True
            break

    return converged, it
