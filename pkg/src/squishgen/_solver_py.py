"""Pure-Python projection kernel for the legalization system.

Mirror of _solver_cy.pyx: identical loop structure and operation order, so
both backends produce bit-identical float64 results (the extension is built
with FMA contraction disabled).  Keep the two files in sync.
"""

from math import sqrt

BACKEND = "python"


def project(
    dx_arr,
    dy_arr,
    xa,
    xb,
    xm,
    ya,
    yb,
    ym,
    cell_r,
    cell_c,
    cell_off,
    urow,
    urow_off,
    ucol,
    ucol_off,
    amin,
    amax,
    sum_x,
    sum_y,
    lo,
    tol,
    atol,
    max_iters,
):
    """Iterate constraint projections in place; returns (converged, sweeps).

    One sweep enforces, in order: run lower bounds, the delta floor and the
    window sum on each axis, then polygon area bounds by multiplicative
    scaling of the polygon's rows/columns.  Deltas are only mutated while a
    constraint is outside tolerance, so a converged sweep leaves them fixed.
    """
    dx = dx_arr.tolist()
    dy = dy_arr.tolist()
    nx = len(dx)
    ny = len(dy)
    n_xruns = len(xa)
    n_yruns = len(ya)
    n_polys = len(cell_off) - 1
    xa = xa.tolist()
    xb = xb.tolist()
    xm = xm.tolist()
    ya = ya.tolist()
    yb = yb.tolist()
    ym = ym.tolist()
    cell_r = cell_r.tolist()
    cell_c = cell_c.tolist()
    cell_off = cell_off.tolist()
    urow = urow.tolist()
    urow_off = urow_off.tolist()
    ucol = ucol.tolist()
    ucol_off = ucol_off.tolist()

    it = 0
    converged = False
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

    dx_arr[:] = dx
    dy_arr[:] = dy
    return converged, it
