# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.  Signatures mirror tsshuffle._kernels_py."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def compose_block_perm(const long long[:] cumulative, const long long[:] factors):
    """Block image of every level-n block under the composed layer reversals.

    Each step is tabulated without division, then composed by a gather.
    """
    cdef Py_ssize_t n = factors.shape[0]
    cdef long long Mn = cumulative[n]
    cdef long long k, width, M, m, q, r, s, src, dst
    cdef Py_ssize_t i
    out = np.arange(Mn, dtype=np.int64)
    step = np.empty(Mn, dtype=np.int64)
    cdef long long[:] o = out
    cdef long long[:] st = step
    for i in range(n):
        M = cumulative[i]
        m = factors[i]
        width = Mn // (M * m)
        if M == 1:
            continue  # R_{1,m} is the identity
        for q in range(M):
            for r in range(m):
                src = (q * m + r) * width
                dst = (M * r + q) * width
                for s in range(width):
                    st[src + s] = dst + s
        for k in range(Mn):
            o[k] = st[o[k]]
    return out


def digit_reversal_inverse(const long long[:] cumulative, const long long[:] factors):
    """inv[sum_j b_j M_{j-1}] = sum_j b_j M_n / M_j.

    Built level by level: r_j(t + b M_{j-1}) = m_j r_{j-1}(t) + b.
    """
    cdef Py_ssize_t n = factors.shape[0]
    cdef long long Mn = cumulative[n]
    cdef long long t, b, Mp, m, base
    cdef Py_ssize_t j
    out = np.zeros(Mn, dtype=np.int64)
    cdef long long[:] o = out
    for j in range(n):
        Mp = cumulative[j]
        m = factors[j]
        # fill the upper copies first so o[t] for t < Mp is still level j-1
        for b in range(m - 1, -1, -1):
            base = b * Mp
            for t in range(Mp):
                o[base + t] = o[t] * m + b
    return out


def heat_cn_run(const double[:] sub, const double[:] diag, const double[:] sup,
                const double[:] mass, const double[:] u0, double dt,
                long nsteps, long snap_every):
    """Crank-Nicolson for ``mass * u' = -S u`` with tridiagonal S.

    Returns (snapshots, dissipation) where dissipation[k] accumulates
    dt * v^T diag(mass) v with v the discrete time derivative.
    """
    cdef Py_ssize_t P = diag.shape[0]
    cdef Py_ssize_t i
    cdef long step, nsnap = nsteps // snap_every + 1, isnap = 1
    cdef double half = 0.5 * dt, v, acc = 0.0
    snaps = np.empty((nsnap, P), dtype=np.float64)
    diss = np.zeros(nsnap, dtype=np.float64)
    cdef double[:, :] S = snaps
    cdef double[:] D = diss
    cdef double[:] u = np.array(u0, dtype=np.float64)
    cdef double[:] r = np.empty(P, dtype=np.float64)
    cdef double[:] cp = np.empty(P, dtype=np.float64)
    cdef double[:] inv = np.empty(P, dtype=np.float64)
    cdef double[:] lo = np.empty(P, dtype=np.float64)
    # factor (mass + dt/2 S) once
    cdef double a, b, c
    for i in range(P):
        a = half * sub[i] if i > 0 else 0.0
        b = mass[i] + half * diag[i]
        c = half * sup[i] if i < P - 1 else 0.0
        lo[i] = a
        if i == 0:
            inv[i] = 1.0 / b
        else:
            inv[i] = 1.0 / (b - a * cp[i - 1])
        cp[i] = c * inv[i]
    S[0, :] = u
    for step in range(1, nsteps + 1):
        for i in range(P):
            v = (mass[i] - half * diag[i]) * u[i]
            if i > 0:
                v -= half * sub[i] * u[i - 1]
            if i < P - 1:
                v -= half * sup[i] * u[i + 1]
            r[i] = v
        r[0] = r[0] * inv[0]
        for i in range(1, P):
            r[i] = (r[i] - lo[i] * r[i - 1]) * inv[i]
        for i in range(P - 2, -1, -1):
            r[i] = r[i] - cp[i] * r[i + 1]
        for i in range(P):
            v = (r[i] - u[i]) / dt
            acc += dt * mass[i] * v * v
            u[i] = r[i]
        if step % snap_every == 0:
            S[isnap, :] = u
            D[isnap] = acc
            isnap += 1
    return snaps, diss


def heat_explicit_run(const double[:] sub, const double[:] diag, const double[:] sup,
                      const double[:] mass, const double[:] u0, double dt,
                      long nsteps, long snap_every):
    """Forward Euler for ``mass * u' = -S u``; same outputs as heat_cn_run."""
    cdef Py_ssize_t P = diag.shape[0]
    cdef Py_ssize_t i
    cdef long step, nsnap = nsteps // snap_every + 1, isnap = 1
    cdef double v, acc = 0.0
    snaps = np.empty((nsnap, P), dtype=np.float64)
    diss = np.zeros(nsnap, dtype=np.float64)
    cdef double[:, :] S = snaps
    cdef double[:] D = diss
    cdef double[:] u = np.array(u0, dtype=np.float64)
    cdef double[:] du = np.empty(P, dtype=np.float64)
    S[0, :] = u
    for step in range(1, nsteps + 1):
        for i in range(P):
            v = diag[i] * u[i]
            if i > 0:
                v += sub[i] * u[i - 1]
            if i < P - 1:
                v += sup[i] * u[i + 1]
            du[i] = -v / mass[i]
        for i in range(P):
            acc += dt * mass[i] * du[i] * du[i]
            u[i] += dt * du[i]
        if step % snap_every == 0:
            S[isnap, :] = u
            D[isnap] = acc
            isnap += 1
    return snaps, diss
