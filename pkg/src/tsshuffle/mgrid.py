"""Piecewise-constant cell functions on mixed-radix partitions of ``[0, 1)^d``.

A :class:`CellFunction` at level ``n`` holds one value (or one payload
array) per block ``prod_i [beta_i / M_n, (beta_i + 1) / M_n)``.  Blocks sit
on the leading ``dim`` axes in row-major order; any trailing axes are the
payload, typically a sampling of the slow variable and of the position
inside one base cell.

Two block groupings matter:

* the filtration groups level-``n`` blocks into *contiguous* runs of
  ``M_n / M_k`` (``coarse_grain``);
* two-scale aggregation groups them *with stride* ``M_k``
  (``aggregate_two_scale``).

The shuffle turns the second grouping into the first.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .schedule import PeriodSchedule, ScheduleError
from .shuffle import ShuffleMap


class LevelError(ValueError):
    pass


@dataclass(frozen=True)
class CellFunction:
    schedule: PeriodSchedule
    level: int
    dim: int
    values: np.ndarray

    def __post_init__(self):
        self.schedule.check_level(self.level)
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        vals = np.asarray(self.values, dtype=np.float64)
        M = self.schedule.cumulative[self.level]
        if vals.ndim < self.dim or vals.shape[: self.dim] != (M,) * self.dim:
            raise ValueError(
                f"expected leading shape {(M,) * self.dim}, got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("cell function values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def M(self) -> int:
        return self.schedule.cumulative[self.level]

    @property
    def payload_shape(self) -> tuple[int, ...]:
        return self.values.shape[self.dim :]

    def mean(self) -> np.ndarray:
        """Integral over ``[0, 1)^d`` (uniform measure), per payload entry."""
        return self.values.mean(axis=tuple(range(self.dim)))

    def with_values(self, values, level=None) -> "CellFunction":
        return CellFunction(self.schedule, self.level if level is None else level, self.dim, values)


@dataclass(frozen=True)
class MartingaleSequence:
    terms: tuple[CellFunction, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("empty sequence")
        for a, b in zip(terms, terms[1:]):
            if b.level <= a.level:
                raise LevelError("levels must be strictly increasing")
            if b.schedule != a.schedule or b.dim != a.dim:
                raise ScheduleError("terms must share schedule and dimension")
        object.__setattr__(self, "terms", terms)


@dataclass(frozen=True)
class MartingaleReport:
    is_martingale: bool
    max_residual: float
    residuals: tuple[float, ...]

    def __bool__(self):
        return self.is_martingale


def _same_schedule(f: CellFunction, g: CellFunction):
    if f.schedule != g.schedule:
        raise ScheduleError("cell functions live on different schedules")
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")


def _group_mean(values, dim, M_coarse, ratio, strided):
    """Average groups of ``ratio`` blocks along each of the leading ``dim`` axes."""
    out = values
    for ax in range(dim):
        shape = out.shape
        if strided:
            split = shape[:ax] + (ratio, M_coarse) + shape[ax + 1 :]
        else:
            split = shape[:ax] + (M_coarse, ratio) + shape[ax + 1 :]
        out = out.reshape(split)
        red = ax if strided else ax + 1
        # contiguous copy keeps numpy's pairwise summation order fixed
        out = np.ascontiguousarray(np.moveaxis(out, red, -1)).mean(axis=-1)
    return out


def coarse_grain(f: CellFunction, k: int) -> CellFunction:
    """Conditional expectation onto the level-``k`` blocks."""
    f.schedule.check_level(k)
    if k > f.level:
        raise LevelError(f"target level {k} is finer than {f.level}")
    if k == f.level:
        return f
    Mk = f.schedule.cumulative[k]
    vals = _group_mean(f.values, f.dim, Mk, f.M // Mk, strided=False)
    return CellFunction(f.schedule, k, f.dim, vals)


def refine(f: CellFunction, n: int) -> CellFunction:
    """Replicate each block into its ``M_n / M_k`` level-``n`` sub-blocks."""
    f.schedule.check_level(n)
    if n < f.level:
        raise LevelError(f"target level {n} is coarser than {f.level}")
    r = f.schedule.cumulative[n] // f.M
    vals = f.values
    for ax in range(f.dim):
        vals = np.repeat(vals, r, axis=ax)
    return CellFunction(f.schedule, n, f.dim, vals)


def is_martingale(seq: MartingaleSequence, tol: float) -> MartingaleReport:
    res = []
    for coarse, fine in zip(seq.terms, seq.terms[1:]):
        d = coarse_grain(fine, coarse.level).values - coarse.values
        res.append(float(np.max(np.abs(d))) if d.size else 0.0)
    worst = max(res, default=0.0)
    return MartingaleReport(worst <= tol, worst, tuple(res))


def aggregate_two_scale(u_fine: CellFunction, n: int) -> CellFunction:
    """Average the period-``p_n`` translates of a finer two-scale limit.

    ``u_fine`` holds ``u_{0,p_{n+j}}`` cell by cell over one period: block
    ``alpha`` is the base cell ``[alpha p0, (alpha + 1) p0)``.  The result
    holds ``u_{0,p_n}``, whose cell ``alpha`` is the mean of the fine cells
    ``alpha + M_n beta``.
    """
    u_fine.schedule.check_level(n)
    if n > u_fine.level:
        raise LevelError(f"target level {n} is finer than {u_fine.level}")
    Mn = u_fine.schedule.cumulative[n]
    vals = _group_mean(u_fine.values, u_fine.dim, Mn, u_fine.M // Mn, strided=True)
    return CellFunction(u_fine.schedule, n, u_fine.dim, vals)


def rearrange_v(u_grid: np.ndarray, s: PeriodSchedule, n: int, dim: int = 1,
                samples_per_cell: int | None = None) -> CellFunction:
    """Cut a sampling of ``u_{0,p_n}`` over one period into base cells.

    ``u_grid`` has ``dim`` leading axes of length ``M_n * q`` uniformly
    sampling ``[0, p_n)``, followed by any payload axes (e.g. the slow
    variable).  The result is indexed by the cell ``alpha`` with the ``q``
    in-cell samples moved into the payload: ``v[alpha, ..., y, ...]``.
    No value changes.
    """
    s.check_level(n)
    u_grid = np.asarray(u_grid, dtype=np.float64)
    Mn = s.cumulative[n]
    length = u_grid.shape[0]
    if length % Mn:
        raise ValueError(f"grid length {length} is not a multiple of M_n={Mn}")
    q = length // Mn if samples_per_cell is None else samples_per_cell
    if q * Mn != length or u_grid.shape[:dim] != (length,) * dim:
        raise ValueError("grid does not tile the period evenly")
    rest = u_grid.shape[dim:]
    out = u_grid.reshape(sum(((Mn, q) for _ in range(dim)), ()) + rest)
    # (a0, y0, a1, y1, rest...) -> (a0, a1, rest..., y0, y1)
    alpha_axes = [2 * i for i in range(dim)]
    y_axes = [2 * i + 1 for i in range(dim)]
    rest_axes = list(range(2 * dim, out.ndim))
    out = np.transpose(out, alpha_axes + rest_axes + y_axes)
    return CellFunction(s, n, dim, out)


def flatten_v(v: CellFunction, payload_axes: int = 0) -> np.ndarray:
    """Inverse of :func:`rearrange_v`; ``payload_axes`` counts non-``y`` payload axes."""
    dim = v.dim
    vals = v.values
    nd = vals.ndim
    y_axes = list(range(nd - dim, nd))
    rest_axes = list(range(dim, dim + payload_axes))
    order = []
    for i in range(dim):
        order += [i, y_axes[i]]
    out = np.transpose(vals, order + rest_axes)
    shape = tuple(out.shape[2 * i] * out.shape[2 * i + 1] for i in range(dim)) + out.shape[2 * dim :]
    return out.reshape(shape)


def _check_match(w: CellFunction, H: ShuffleMap):
    if H.schedule != w.schedule or H.level != w.level:
        raise LevelError(
            f"shuffle is level {H.level}, cell function is level {w.level}"
        )


def to_shuffled(w: CellFunction, H: ShuffleMap) -> CellFunction:
    """``w~(beta) = w(H_n(beta))`` along every block axis."""
    _check_match(w, H)
    return w.with_values(H.apply_blocks(w.values, w.dim))


def from_shuffled(wt: CellFunction, H: ShuffleMap) -> CellFunction:
    _check_match(wt, H)
    return wt.with_values(H.unapply_blocks(wt.values, wt.dim))


def recover_two_scale(w_inf: CellFunction, n: int, H_n: ShuffleMap) -> CellFunction:
    """Read ``u_{0,p_n}`` (cell-indexed) back out of a fine shuffled function.

    Coarse-grain to level ``n`` (conditional expectation), then undo the
    level-``n`` shuffle.  Use :func:`flatten_v` for the sampled profile.
    """
    if n > w_inf.level:
        raise LevelError(f"target level {n} is finer than {w_inf.level}")
    return from_shuffled(coarse_grain(w_inf, n), H_n)


def l2_distance(f: CellFunction, g: CellFunction) -> float:
    """L2 norm of ``f - g`` on ``[0, 1)^d``; payload entries are averaged."""
    _same_schedule(f, g)
    if f.level < g.level:
        f = refine(f, g.level)
    elif g.level < f.level:
        g = refine(g, f.level)
    if f.payload_shape != g.payload_shape:
        raise ValueError("payload shapes differ")
    d = f.values - g.values
    return math.sqrt(float(np.mean(d * d))) if d.size else 0.0


def to_csv(f: CellFunction) -> str:
    """Header row (level, dim, payload_size) then one row per block."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    payload = int(np.prod(f.payload_shape)) if f.payload_shape else 1
    w.writerow(["level", "dim", "payload_size"])
    w.writerow([f.level, f.dim, payload])
    flat = f.values.reshape((f.M,) * f.dim + (payload,))
    for idx in np.ndindex(*(f.M,) * f.dim):
        w.writerow([*idx, *(format(float(x), ".17g") for x in flat[idx])])
    return buf.getvalue()


def from_csv(text: str, s: PeriodSchedule, payload_shape: tuple[int, ...] = ()) -> CellFunction:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    level, dim, payload = (int(x) for x in rows[1])
    M = s.cumulative[level]
    vals = np.empty((M,) * dim + (payload,))
    for r in rows[2:]:
        idx = tuple(int(x) for x in r[:dim])
        vals[idx] = [float(x) for x in r[dim:]]
    shape = (M,) * dim + tuple(payload_shape)
    return CellFunction(s, level, dim, vals.reshape(shape))
