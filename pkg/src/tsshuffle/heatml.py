"""Multilayer heat conduction: the layered problem and its two limit systems.

Transversally homogeneous data are assumed throughout, so the transverse
Laplacian drops out and only the vertical variable ``z`` in ``(0, 1)``
remains.  Layer ``k`` (``0 <= k < N``) occupies
``((k + delta)/N, (k + 1 - delta)/N)``; the gap between layers ``k - 1`` and
``k`` carries the flux ``(K/N) u + (J/N)(u - u_other)`` out of each face, and
the two outermost faces are insulated.

Limit systems, with ``a = 2K/(1 - 2 delta)`` and ``b = J/(1 - 2 delta)``:

* cyclic layer system ``u_j' = -a u_j - b (2 u_j - u_{j+1} - u_{j-1})``;
* shuffled system on ``M_N`` blocks, the same operator with the neighbours
  replaced by the block maps ``tau+`` / ``tau-``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .mgrid import CellFunction, coarse_grain, refine, from_shuffled, to_shuffled
from .schedule import PeriodSchedule
from .shuffle import compose_shuffle, neighbor_maps_finite

MIN_CELLS_PER_LAYER = 8


class StabilityError(ValueError):
    pass


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class HeatParams:
    A: float = 1.0
    K: float = 0.5
    J: float = 1.0
    delta: float = 0.1

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("A must be positive")
        if not (self.K >= 0 and self.J >= 0):
            raise ValueError("K and J must be nonnegative")
        if not 0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")
        for v in (self.A, self.K, self.J, self.delta):
            if not math.isfinite(v):
                raise ValueError("parameters must be finite")

    @property
    def decay(self) -> float:
        return 2 * self.K / (1 - 2 * self.delta)

    @property
    def coupling(self) -> float:
        return self.J / (1 - 2 * self.delta)

    def to_dict(self):
        return {"A": self.A, "K": self.K, "J": self.J, "delta": self.delta}


@dataclass(frozen=True)
class LayerState:
    M: int
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape[:1] != (self.M,):
            raise ValueError(f"expected {self.M} layer values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("layer values must be finite")
        object.__setattr__(self, "values", v)

    def value(self, j: int) -> np.ndarray:
        return self.values[j % self.M]


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray  # (n_times, ...)
    meta: dict = field(default_factory=dict)
    dissipation: np.ndarray | None = None  # cumulative int ||u_t||^2 at each time

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[i], t, rel_tol=1e-12, abs_tol=1e-14):
            raise KeyError(f"no snapshot at t={t}")
        return self.values[i]

    def to_csv_rows(self):
        """Rows ``(t, index, value)`` with the index flattened over non-time axes."""
        for t, v in zip(self.times, self.values):
            flat = np.asarray(v).reshape(-1)
            for i, x in enumerate(flat):
                yield (t, i, x)


def _snapshot_times(T, n_snapshots):
    if not (T >= 0 and math.isfinite(T)):
        raise ValueError("T must be finite and nonnegative")
    if T == 0:
        return np.array([0.0])
    return np.linspace(0.0, T, n_snapshots + 1)


# ---------------------------------------------------------------------------
# cyclic layer system


def circulant_rates(M: int, params: HeatParams) -> np.ndarray:
    """Decay rate of Fourier mode ``k`` of the cyclic system."""
    k = np.arange(M)
    return params.decay + params.coupling * (2 - 2 * np.cos(2 * np.pi * k / M))


def circulant_basis(M: int) -> np.ndarray:
    """Real orthonormal eigenbasis (columns) of any symmetric circulant of size M."""
    j = np.arange(M)
    cols = [np.full(M, 1 / math.sqrt(M))]
    rates_k = [0]
    for k in range(1, M // 2 + 1):
        c = np.cos(2 * np.pi * j * k / M)
        if 2 * k == M:
            cols.append(c / math.sqrt(M))
            rates_k.append(k)
        else:
            s = np.sin(2 * np.pi * j * k / M)
            cols.append(c * math.sqrt(2 / M))
            cols.append(s * math.sqrt(2 / M))
            rates_k += [k, k]
    Q = np.column_stack(cols)
    return Q, np.array(rates_k)


def _cyclic_rhs(params):
    a, b = params.decay, params.coupling

    def f(u):
        return -a * u - b * (2 * u - np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0))

    return f


def _rk4(f, u0, times, dt):
    out = [u0.copy()]
    u = u0.copy()
    t = times[0]
    for t_next in times[1:]:
        steps = max(1, math.ceil(round((t_next - t) / dt, 9)))
        h = (t_next - t) / steps
        for _ in range(steps):
            k1 = f(u)
            k2 = f(u + 0.5 * h * k1)
            k3 = f(u + 0.5 * h * k2)
            k4 = f(u + h * k3)
            u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(u.copy())
        t = t_next
    return np.array(out)


def default_rk4_step(max_rate: float) -> float:
    # |lambda dt| <= 0.02 keeps the RK4 endpoint error near 1e-10 for these systems
    return 0.02 / max(max_rate, 1e-12)


def solve_two_scale_system(M: int, params: HeatParams, u0: LayerState, T: float,
                           method: str = "exact", n_snapshots: int = 10,
                           dt: float | None = None) -> Trajectory:
    """Cyclic M-layer system; ``exact`` uses the closed-form circulant basis."""
    if u0.M != M:
        raise ValueError(f"initial state has {u0.M} layers, expected {M}")
    times = _snapshot_times(T, n_snapshots) + u0.time
    lam_k = circulant_rates(M, params)
    if method == "exact":
        Q, ks = circulant_basis(M)
        lam = lam_k[ks]
        c = np.tensordot(Q.T, u0.values, axes=1)
        tt = times - u0.time
        decay = np.exp(-np.outer(tt, lam))
        vals = np.einsum("ij,tj,j...->ti...", Q, decay, c)
    elif method == "rk4":
        dt = dt or default_rk4_step(float(lam_k.max()))
        vals = _rk4(_cyclic_rhs(params), u0.values, times, dt)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Trajectory(times, vals, {"system": "cyclic", "M": M, "method": method, "dt": dt})


# ---------------------------------------------------------------------------
# shuffled system


def shuffle_coupling_matrix(s: PeriodSchedule, N: int) -> np.ndarray:
    """``2 I - P_up - P_down`` on the ``M_N`` blocks of level ``N``."""
    nb = neighbor_maps_finite(s, N)
    M = s.cumulative[N]
    L = 2 * np.eye(M)
    rows = np.arange(M)
    np.add.at(L, (rows, nb.up_perm), -1.0)
    np.add.at(L, (rows, nb.down_perm), -1.0)
    return L


def solve_shuffle_limit(s: PeriodSchedule, N: int, params: HeatParams, w0: CellFunction,
                        T: float, method: str = "exact", n_snapshots: int = 10,
                        dt: float | None = None) -> Trajectory:
    """Evolve block values under ``w' = -a w - b (2w - w o tau+ - w o tau-)``."""
    s.check_level(N)
    if w0.level != N or w0.schedule != s or w0.dim != 1:
        raise ValueError("initial data must be a 1-d cell function at the resolution level")
    L = shuffle_coupling_matrix(s, N)
    Op = params.decay * np.eye(L.shape[0]) + params.coupling * L
    times = _snapshot_times(T, n_snapshots)
    u0 = np.asarray(w0.values)
    if method == "exact":
        lam, V = np.linalg.eigh(Op)
        c = np.tensordot(V.T, u0, axes=1)
        decay = np.exp(-np.outer(times, lam))
        vals = np.einsum("ij,tj,j...->ti...", V, decay, c)
    elif method == "rk4":
        nb = neighbor_maps_finite(s, N)
        a, b = params.decay, params.coupling

        def f(u):
            return -a * u - b * (2 * u - u[nb.up_perm] - u[nb.down_perm])

        dt = dt or default_rk4_step(params.decay + 4 * params.coupling)
        vals = _rk4(f, u0, times, dt)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Trajectory(times, vals, {"system": "shuffle", "level": N, "method": method, "dt": dt})


@dataclass
class CrossValidationReport:
    passed: bool
    max_deviation: float
    by_time: dict

    def __bool__(self):
        return self.passed


def cross_validate(s: PeriodSchedule, params: HeatParams, n: int, N: int,
                   w0: CellFunction, times: Sequence[float], tol: float = 1e-6) -> CrossValidationReport:
    """Coarse-grained shuffled flow at level N versus the shuffled cyclic M_n flow.

    ``w0`` is the shuffled initial datum at level ``n`` (hence measurable for
    the level-``n`` blocks once refined to level ``N``).
    """
    if not 0 <= n <= N:
        raise ValueError("need 0 <= n <= N")
    if w0.level != n:
        raise ValueError("initial data must live at level n")
    H_n = compose_shuffle(s, n)
    fine0 = refine(w0, N)
    layers0 = from_shuffled(w0, H_n).values
    Mn = s.cumulative[n]
    by_time = {}
    for T in times:
        fine = solve_shuffle_limit(s, N, params, fine0, T, n_snapshots=1)
        lhs = coarse_grain(CellFunction(s, N, 1, fine.values[-1]), n).values
        cyc = solve_two_scale_system(Mn, params, LayerState(Mn, layers0), T, n_snapshots=1)
        rhs = to_shuffled(CellFunction(s, n, 1, cyc.values[-1]), H_n).values
        by_time[float(T)] = float(np.max(np.abs(lhs - rhs)))
    worst = max(by_time.values(), default=0.0)
    return CrossValidationReport(worst <= tol, worst, by_time)


# ---------------------------------------------------------------------------
# layered problem


@dataclass(frozen=True)
class HeatGeometry:
    N: int
    delta: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("need at least one layer")
        if not 0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")

    @property
    def thickness(self) -> float:
        return (1 - 2 * self.delta) / self.N

    @property
    def layer_intervals(self) -> list[tuple[float, float]]:
        N, d = self.N, self.delta
        return [((k + d) / N, (k + 1 - d) / N) for k in range(N)]

    @property
    def interfaces(self) -> list[tuple[float, float]]:
        """Pairs ``((j - delta)/N, (j + delta)/N)`` for ``j = 1..N-1``; gamma' swaps them."""
        N, d = self.N, self.delta
        return [((j - d) / N, (j + d) / N) for j in range(1, N)]


@dataclass(frozen=True)
class LayerGrid:
    geom: HeatGeometry
    cells: int  # per layer

    @property
    def h(self) -> float:
        return self.geom.thickness / self.cells

    @property
    def size(self) -> int:
        return self.geom.N * (self.cells + 1)

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([a + self.h * np.arange(self.cells + 1) for a, _ in self.geom.layer_intervals])

    @property
    def mass(self) -> np.ndarray:
        w = np.full(self.cells + 1, self.h)
        w[0] = w[-1] = self.h / 2
        return np.tile(w, self.geom.N)

    def layer_view(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u).reshape(u.shape[:-1] + (self.geom.N, self.cells + 1))


def make_grid(geom: HeatGeometry, dz: float) -> LayerGrid:
    cells = math.ceil(round(geom.thickness / dz, 9))
    if cells < MIN_CELLS_PER_LAYER:
        raise ResolutionError(
            f"dz={dz:g} gives {cells} cells per layer; need >= {MIN_CELLS_PER_LAYER}"
        )
    return LayerGrid(geom, cells)


def assemble(grid: LayerGrid, params: HeatParams):
    """Tridiagonal stiffness (sub, diag, sup) of the discrete energy, plus the lumped mass.

    Node-based finite differences with the Robin flux eliminated into the
    face nodes; ``0.5 u.S.u`` is exactly :func:`energy` on the grid.
    """
    N, n, h = grid.geom.N, grid.cells, grid.h
    P = grid.size
    diag = np.zeros(P)
    off = np.zeros(P - 1)  # off[i] couples i and i+1
    for k in range(N):
        o = k * (n + 1)
        diag[o : o + n + 1] += 2 * params.A / h
        diag[o] -= params.A / h
        diag[o + n] -= params.A / h
        off[o : o + n] = -params.A / h
    for j in range(1, N):
        top, bot = j * (n + 1) - 1, j * (n + 1)
        diag[top] += (params.K + params.J) / N
        diag[bot] += (params.K + params.J) / N
        off[top] = -params.J / N
    sub = np.concatenate([[0.0], off])
    sup = np.concatenate([off, [0.0]])
    return sub, diag, sup, grid.mass


def explicit_dt_bound(grid: LayerGrid, params: HeatParams) -> float:
    """Forward Euler bound: ``dz^2/(2A)`` tightened by Gershgorin at the face nodes."""
    sub, diag, sup, mass = assemble(grid, params)
    gersh = float(np.max((diag + np.abs(sub) + np.abs(sup)) / mass))
    return min(grid.h**2 / (2 * params.A), 2.0 / gersh)


def energy(grid: LayerGrid, params: HeatParams, u: np.ndarray) -> float:
    """Gradient, boundary-loss and jump terms of the layered energy (per unit cross-section)."""
    N = grid.geom.N
    U = grid.layer_view(np.asarray(u, float))
    grad = params.A / 2 * float(np.sum(np.diff(U, axis=-1) ** 2)) / grid.h
    tops, bots = U[:-1, -1], U[1:, 0]
    loss = params.K / (2 * N) * float(np.sum(tops**2) + np.sum(bots**2))
    jump = params.J / (2 * N) * float(np.sum((bots - tops) ** 2))
    return grad + loss + jump


def layer_averages(grid: LayerGrid, u: np.ndarray) -> np.ndarray:
    U = grid.layer_view(np.asarray(u, float))
    w = grid.layer_view(grid.mass)[0]
    return U @ w / grid.geom.thickness


def layered_initial(grid: LayerGrid, layer_values: Sequence[float], intra: float = 0.0) -> np.ndarray:
    """Nodal data equal to ``layer_values[k] + intra*cos(pi s)`` in layer ``k``.

    ``s`` is the relative position in the layer; the cosine has zero
    trapezoid mean, so the layer averages are exactly ``layer_values``.
    """
    vals = np.asarray(layer_values, float)
    if vals.shape != (grid.geom.N,):
        raise ValueError("need one value per layer")
    s = np.arange(grid.cells + 1) / grid.cells
    prof = intra * np.cos(np.pi * s)
    return (vals[:, None] + prof[None, :]).ravel()


def solve_epsilon_1d(geom: HeatGeometry, params: HeatParams, u0, T: float, dz: float,
                     dt: float | None = None, method: str = "cn",
                     n_snapshots: int = 10) -> Trajectory:
    """Layered heat problem on the node grid.

    ``u0`` is a nodal array or a callable of ``z``.  ``method`` is ``cn``
    (Crank-Nicolson), ``explicit`` (forward Euler, stability enforced) or
    ``exact`` (eigen-decomposition).  ``dissipation`` holds the running
    ``int_0^t ||u_t||^2`` from the scheme's own step quadrature.
    """
    if not math.isclose(geom.delta, params.delta):
        raise ValueError("geometry and parameters disagree on delta")
    grid = make_grid(geom, dz)
    z = grid.z
    u0 = np.asarray(u0(z) if callable(u0) else u0, float)
    if u0.shape != z.shape or not np.all(np.isfinite(u0)):
        raise ValueError("initial profile must be finite on the node grid")
    sub, diag, sup, mass = assemble(grid, params)
    times = _snapshot_times(T, n_snapshots)
    meta = {"system": "layered", "N": geom.N, "cells": grid.cells, "method": method}
    if method == "exact":
        vals, diss = _exact_layered(sub, diag, sup, mass, u0, times)
        traj = Trajectory(times, vals, meta, diss)
    elif method in ("cn", "explicit"):
        if T == 0:
            return Trajectory(times, u0[None, :].copy(), meta, np.zeros(1))
        bound = explicit_dt_bound(grid, params)
        if dt is None:
            dt = 0.9 * bound if method == "explicit" else min(1e-4, T / n_snapshots)
        if method == "explicit" and dt > bound * (1 + 1e-12):
            raise StabilityError(f"dt={dt:g} exceeds the explicit stability bound {bound:g}")
        per = math.ceil(round(T / (n_snapshots * dt), 9))
        nsteps = per * n_snapshots
        step = T / nsteps
        run = kernels.heat_cn_run if method == "cn" else kernels.heat_explicit_run
        vals, diss = run(sub, diag, sup, mass, u0, step, nsteps, per)
        meta["dt"] = step
        meta["backend"] = kernels.BACKEND
        traj = Trajectory(times, np.asarray(vals), meta, np.asarray(diss))
    else:
        raise ValueError(f"unknown method {method!r}")
    traj.meta["grid"] = grid
    return traj


def _exact_layered(sub, diag, sup, mass, u0, times):
    S = np.diag(diag) + np.diag(sup[:-1], 1) + np.diag(sub[1:], -1)
    r = 1 / np.sqrt(mass)
    lam, V = np.linalg.eigh(r[:, None] * S * r[None, :])
    lam = np.clip(lam, 0.0, None)
    c = V.T @ (np.sqrt(mass) * u0)
    decay = np.exp(-np.outer(times, lam))
    vals = (decay * c) @ V.T * r
    # int_0^t ||u_t||_M^2 = sum lam c^2 (1 - e^{-2 lam t}) / 2
    diss = 0.5 * (lam * c**2) @ (1 - np.exp(-2 * np.outer(lam, times)))
    return vals, diss


@dataclass
class EnergyReport:
    passed: bool
    max_residual: float  # relative to the initial energy (absolute if it is zero)
    residuals: np.ndarray
    energies: np.ndarray

    def __bool__(self):
        return self.passed


def energy_balance_check(traj: Trajectory, params: HeatParams, tol: float = 1e-6) -> EnergyReport:
    """``E(u(t)) + int_0^t ||u_t||^2 = E(u(0))`` along a layered trajectory."""
    grid = traj.meta["grid"]
    if traj.dissipation is None:
        raise ValueError("trajectory carries no dissipation record")
    E = np.array([energy(grid, params, u) for u in traj.values])
    scale = E[0] if E[0] > 0 else 1.0  # absolute residual when the initial energy vanishes
    res = np.abs(E + traj.dissipation - E[0]) / scale
    worst = float(res.max())
    return EnergyReport(worst <= tol, worst, res, E)
