"""Pure numpy/scipy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def compose_block_perm(cumulative, factors):
    cumulative = np.asarray(cumulative, dtype=np.int64)
    factors = np.asarray(factors, dtype=np.int64)
    n = len(factors)
    Mn = int(cumulative[n])
    pos = np.arange(Mn, dtype=np.int64)
    for i in range(n):
        M, m = int(cumulative[i]), int(factors[i])
        width = Mn // (M * m)
        # entry (q, r, s) of the step table is block q*m + r, offset s
        q = np.arange(M)[:, None, None]
        r = np.arange(m)[None, :, None]
        s = np.arange(width)[None, None, :]
        step = ((M * r + q) * width + s).reshape(-1)
        pos = step[pos]
    return pos


def digit_reversal_inverse(cumulative, factors):
    cumulative = np.asarray(cumulative, dtype=np.int64)
    factors = np.asarray(factors, dtype=np.int64)
    acc = np.zeros(1, dtype=np.int64)
    for m in factors:
        acc = (acc[None, :] * m + np.arange(m, dtype=np.int64)[:, None]).reshape(-1)
    return acc


def _tridiag(sub, diag, sup):
    P = len(diag)
    return sp.diags([np.asarray(sub)[1:], np.asarray(diag), np.asarray(sup)[:-1]],
                    [-1, 0, 1], shape=(P, P), format="csc")


def heat_cn_run(sub, diag, sup, mass, u0, dt, nsteps, snap_every):
    mass = np.asarray(mass, dtype=np.float64)
    S = _tridiag(sub, diag, sup)
    Mm = sp.diags(mass, format="csc")
    lu = spla.splu((Mm + 0.5 * dt * S).tocsc())
    rhs_op = (Mm - 0.5 * dt * S).tocsr()
    nsnap = nsteps // snap_every + 1
    snaps = np.empty((nsnap, len(mass)))
    diss = np.zeros(nsnap)
    u = np.array(u0, dtype=np.float64)
    snaps[0] = u
    acc = 0.0
    k = 1
    for step in range(1, nsteps + 1):
        new = lu.solve(rhs_op @ u)
        v = (new - u) / dt
        acc += dt * float(np.dot(mass * v, v))
        u = new
        if step % snap_every == 0:
            snaps[k] = u
            diss[k] = acc
            k += 1
    return snaps, diss


def heat_explicit_run(sub, diag, sup, mass, u0, dt, nsteps, snap_every):
    mass = np.asarray(mass, dtype=np.float64)
    S = _tridiag(sub, diag, sup).tocsr()
    nsnap = nsteps // snap_every + 1
    snaps = np.empty((nsnap, len(mass)))
    diss = np.zeros(nsnap)
    u = np.array(u0, dtype=np.float64)
    snaps[0] = u
    acc = 0.0
    k = 1
    for step in range(1, nsteps + 1):
        du = -(S @ u) / mass
        acc += dt * float(np.dot(mass * du, du))
        u = u + dt * du
        if step % snap_every == 0:
            snaps[k] = u
            diss[k] = acc
            k += 1
    return snaps, diss
