"""Layer reversals, the composed shuffle and its neighbour maps.

Everything is computed on integer block indices.  A continuous map on
``[0, 1)`` is a block permutation plus a preserved offset inside the block;
points on a block boundary belong to the block on their right.

Conventions at level ``n`` (resolution ``M = M_n``):

* ``block_perm[k]`` is the original layer carried by rearranged block ``k``,
  i.e. the block image of ``[k/M, (k+1)/M)`` under the shuffle ``H_n``.
* For a block with mixed-radix digits ``k = sum_j b_j M_{j-1}``,
  ``inverse_perm[k] = sum_j b_j M_n / M_j`` (digit reversal).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import kernels
from .schedule import PeriodSchedule, ScheduleError


class BreakpointError(ValueError):
    """A limit neighbour map was evaluated exactly on one of its breakpoints."""

    def __init__(self, y, breakpoint):
        super().__init__(f"y'={y!r} is the breakpoint {breakpoint}")
        self.y = y
        self.breakpoint = breakpoint


def _check_unit(y):
    if not 0 <= y < 1:
        raise ValueError(f"y'={y!r} outside [0, 1)")


def _block(y, M):
    b = math.floor(y * M)
    # float products can round up onto the right end
    return min(b, M - 1)


def _move(y, old_block, new_block, M):
    if isinstance(y, Fraction):
        return y + Fraction(new_block - old_block, M)
    return y + (new_block - old_block) / M


def layer_reversal(M: int, m: int, i: int) -> int:
    """Map ``k*m + j`` to ``j*M + k``."""
    if not 0 <= i < M * m:
        raise ValueError(f"layer {i} outside [0, {M * m})")
    return M * (i % m) + i // m


def step_map(M: int, m: int, y):
    """One rearrangement step on ``[0, 1)`` at resolution ``M*m``."""
    _check_unit(y)
    res = M * m
    b = _block(y, res)
    return _move(y, b, layer_reversal(M, m, b), res)


@dataclass(frozen=True)
class ShuffleMap:
    schedule: PeriodSchedule
    level: int
    block_perm: np.ndarray
    inverse_perm: np.ndarray

    @property
    def M(self) -> int:
        return self.schedule.cumulative[self.level]

    def forward(self, y):
        """Scalar shuffle ``H*_n(y')``."""
        _check_unit(y)
        b = _block(y, self.M)
        return _move(y, b, int(self.block_perm[b]), self.M)

    def inverse(self, y):
        _check_unit(y)
        b = _block(y, self.M)
        return _move(y, b, int(self.inverse_perm[b]), self.M)

    def apply_blocks(self, values: np.ndarray, axes: int = 1) -> np.ndarray:
        """Return ``values[perm[b0], perm[b1], ...]`` over the leading ``axes`` axes."""
        out = values
        for ax in range(axes):
            out = np.take(out, self.block_perm, axis=ax)
        return out

    def unapply_blocks(self, values: np.ndarray, axes: int = 1) -> np.ndarray:
        out = values
        for ax in range(axes):
            out = np.take(out, self.inverse_perm, axis=ax)
        return out


def _as_int64(seq):
    return np.asarray(seq, dtype=np.int64)


def _perm_check(perm, M):
    if perm.shape != (M,) or perm.min() < 0 or not np.all(np.bincount(perm, minlength=M) == 1):
        raise AssertionError("shuffle block map is not a permutation")


def compose_shuffle(s: PeriodSchedule, n: int) -> ShuffleMap:
    """Compose the one-step maps ``h*_{M_{j-1}, m_j}`` for ``j = 1..n``."""
    s.check_level(n)
    perm = kernels.compose_block_perm(_as_int64(s.cumulative[: n + 1]), _as_int64(s.factors[:n]))
    perm = np.asarray(perm, dtype=np.int64)
    M = s.cumulative[n]
    _perm_check(perm, M)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(M, dtype=np.int64)
    perm.setflags(write=False)
    inv.setflags(write=False)
    return ShuffleMap(s, n, perm, inv)


def inverse_block_closed_form(s: PeriodSchedule, n: int) -> np.ndarray:
    """Inverse block map by mixed-radix digit reversal."""
    s.check_level(n)
    return np.asarray(
        kernels.digit_reversal_inverse(_as_int64(s.cumulative[: n + 1]), _as_int64(s.factors[:n])),
        dtype=np.int64,
    )


def inverse_shuffle_scalar(s: PeriodSchedule, n: int, y):
    """``H*_n^{-1}(y')`` evaluated digit by digit, without building a table."""
    _check_unit(y)
    s.check_level(n)
    Mn = s.cumulative[n]
    b = _block(y, Mn)
    t, image = b, 0
    for j in range(n):
        t, digit = divmod(t, s.factors[j])
        image += digit * (Mn // s.cumulative[j + 1])
    return _move(y, b, image, Mn)


def shuffle_point(s: PeriodSchedule, n: int, y, H: ShuffleMap | None = None):
    """Apply ``H*_n`` to every component of ``y``."""
    H = H or compose_shuffle(s, n)
    return tuple(H.forward(c) for c in y)


@dataclass(frozen=True)
class NeighborMaps:
    level: float  # math.inf for the limit maps
    up: Callable
    down: Callable
    up_perm: np.ndarray | None = None
    down_perm: np.ndarray | None = None

    @property
    def wrap_zone_up(self):
        if self.level == math.inf:
            return None
        return (1 - Fraction(1, int(self.up_perm.size)), Fraction(1))

    @property
    def wrap_zone_down(self):
        if self.level == math.inf:
            return None
        return (Fraction(0), Fraction(1, int(self.up_perm.size)))


def up_shift_blocks(s: PeriodSchedule, n: int) -> np.ndarray:
    """Block shift of the closed-form up map at level ``n``.

    On ``[1 - 1/M_j, 1 - 1/M_{j+1})`` the leading ``j`` reversed digits are
    maximal, so incrementing the original index carries through them:
    the shift is ``-(1 - 1/M_j) + 1/M_{j+1}``.  The last branch (``j = n``)
    is the periodic wrap ``-1 + 1/M_n``.
    """
    s.check_level(n)
    Mn = s.cumulative[n]
    shift = np.empty(Mn, dtype=np.int64)
    for j in range(n):
        lo = Mn - Mn // s.cumulative[j]
        hi = Mn - Mn // s.cumulative[j + 1]
        shift[lo:hi] = -lo + Mn // s.cumulative[j + 1]
    shift[Mn - 1] = 1 - Mn
    return shift


def down_shift_blocks(s: PeriodSchedule, n: int) -> np.ndarray:
    """Mirror of :func:`up_shift_blocks` on ``[1/M_{j+1}, 1/M_j)``."""
    s.check_level(n)
    Mn = s.cumulative[n]
    shift = np.empty(Mn, dtype=np.int64)
    for j in range(n):
        lo = Mn // s.cumulative[j + 1]
        hi = Mn // s.cumulative[j]
        shift[lo:hi] = (Mn - hi) - lo
    shift[0] = Mn - 1
    return shift


def neighbor_blocks_bruteforce(H: ShuffleMap, step: int = 1) -> np.ndarray:
    """``H^{-1}(H(block) + step)`` with cyclic wrap, straight from the tables."""
    return H.inverse_perm[(H.block_perm + step) % H.M]


def neighbor_maps_finite(s: PeriodSchedule, n: int) -> NeighborMaps:
    s.check_level(n)
    Mn = s.cumulative[n]
    beta = np.arange(Mn, dtype=np.int64)
    up_perm = beta + up_shift_blocks(s, n)
    down_perm = beta + down_shift_blocks(s, n)
    up_perm.setflags(write=False)
    down_perm.setflags(write=False)

    def up(y):
        _check_unit(y)
        b = _block(y, Mn)
        return _move(y, b, int(up_perm[b]), Mn)

    def down(y):
        _check_unit(y)
        b = _block(y, Mn)
        return _move(y, b, int(down_perm[b]), Mn)

    return NeighborMaps(n, up, down, up_perm, down_perm)


def _limit_branch_up(s: PeriodSchedule, y):
    cum = s.cumulative
    for j in range(s.levels):
        lo = 1 - Fraction(1, cum[j])
        hi = 1 - Fraction(1, cum[j + 1])
        if y == hi:
            raise BreakpointError(y, hi)
        if lo <= y < hi:
            return j
    raise ScheduleError(f"y'={y!r} lies beyond the schedule resolution (needs more levels)")


def _limit_branch_down(s: PeriodSchedule, y):
    cum = s.cumulative
    for j in range(s.levels):
        lo = Fraction(1, cum[j + 1])
        hi = Fraction(1, cum[j])
        if y == lo:
            raise BreakpointError(y, lo)
        if lo < y < hi:
            return j
    raise ScheduleError(f"y'={y!r} lies beyond the schedule resolution (needs more levels)")


def _shift(y, num: Fraction):
    if isinstance(y, Fraction):
        return y + num
    return y + float(num)


def neighbor_maps_limit(s: PeriodSchedule) -> NeighborMaps:
    """Limit maps tau+/tau- on ``(0, 1)`` minus the breakpoints.

    Defined for ``y'`` below ``1 - 1/M_L`` (up) or above ``1/M_L`` (down);
    use a long schedule (e.g. ``dyadic_schedule(52)``) to cover more of the
    interval.
    """
    cum = s.cumulative

    def up(y):
        if not 0 < y < 1:
            raise ValueError(f"y'={y!r} outside (0, 1)")
        j = _limit_branch_up(s, y)
        return _shift(y, -(1 - Fraction(1, cum[j])) + Fraction(1, cum[j + 1]))

    def down(y):
        if not 0 < y < 1:
            raise ValueError(f"y'={y!r} outside (0, 1)")
        j = _limit_branch_down(s, y)
        return _shift(y, (1 - Fraction(1, cum[j])) - Fraction(1, cum[j + 1]))

    return NeighborMaps(math.inf, up, down)
