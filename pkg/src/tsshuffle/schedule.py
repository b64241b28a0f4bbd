"""Nested period schedules and mixed-radix digit arithmetic.

A schedule is a base period ``p0`` and integer ratios ``m_1, ..., m_L``
between successive periods.  The cumulative products ``M_n`` count how many
base cells fit in one period ``p_n = p0 * M_n``; every permutation in the
package is expressed on block indices ``[0, M_n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

# Block indices must survive a round trip through a double.
MAX_CUMULATIVE = 2**53


class ScheduleError(ValueError):
    """Invalid schedule, level, index or digit."""


@dataclass(frozen=True)
class PeriodSchedule:
    p0: float
    factors: tuple[int, ...]
    cumulative: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.p0 > 0) or self.p0 != self.p0 or self.p0 == float("inf"):
            raise ScheduleError(f"base period must be a positive finite real, got {self.p0!r}")
        factors = tuple(self.factors)
        cum = [1]
        for m in factors:
            if isinstance(m, bool) or int(m) != m:
                raise ScheduleError(f"factor {m!r} is not an integer")
            m = int(m)
            if m < 2:
                raise ScheduleError(f"factor {m} must be >= 2")
            nxt = cum[-1] * m
            if nxt > MAX_CUMULATIVE:
                raise ScheduleError(
                    f"cumulative product {nxt} exceeds 2**53; block indices would lose exactness"
                )
            cum.append(nxt)
        object.__setattr__(self, "factors", tuple(int(m) for m in factors))
        object.__setattr__(self, "cumulative", tuple(cum))

    @property
    def levels(self) -> int:
        """Number of refinement levels L (level indices run 0..L)."""
        return len(self.factors)

    def M(self, n: int) -> int:
        self.check_level(n)
        return self.cumulative[n]

    def m(self, n: int) -> int:
        """Ratio p_n / p_{n-1}, for 1 <= n <= L."""
        if not 1 <= n <= self.levels:
            raise ScheduleError(f"ratio index {n} outside [1, {self.levels}]")
        return self.factors[n - 1]

    def period(self, n: int) -> float:
        return self.p0 * self.M(n)

    def check_level(self, n: int, lo: int = 0) -> None:
        if isinstance(n, bool) or int(n) != n or not lo <= n <= self.levels:
            raise ScheduleError(f"level {n!r} outside [{lo}, {self.levels}]")

    def is_dyadic(self) -> bool:
        return all(m == 2 for m in self.factors)

    def truncate(self, n: int) -> "PeriodSchedule":
        self.check_level(n)
        return PeriodSchedule(self.p0, self.factors[:n])

    def to_dict(self) -> dict:
        return {"p0": self.p0, "factors": list(self.factors)}

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodSchedule":
        return make_schedule(d.get("p0", 1.0), d.get("factors", []))


def make_schedule(p0: float, factors: Sequence[int]) -> PeriodSchedule:
    return PeriodSchedule(float(p0), tuple(factors))


def dyadic_schedule(levels: int, p0: float = 1.0) -> PeriodSchedule:
    return make_schedule(p0, [2] * levels)


@dataclass(frozen=True)
class MixedRadixDigits:
    """Digits ``b_1..b_n`` with ``b_j`` in ``[0, m_j)``; ``b_1`` is least significant."""

    level: int
    digits: tuple[int, ...]


def to_digits(i: int, n: int, s: PeriodSchedule) -> MixedRadixDigits:
    """Expand ``i = sum_j b_j * M_{j-1}`` in the mixed basis of level ``n``."""
    s.check_level(n)
    if isinstance(i, bool) or int(i) != i or not 0 <= i < s.cumulative[n]:
        raise ScheduleError(f"index {i!r} outside [0, {s.cumulative[n]})")
    i = int(i)
    digits = []
    for m in s.factors[:n]:
        i, b = divmod(i, m)
        digits.append(b)
    return MixedRadixDigits(n, tuple(digits))


def from_digits(d: MixedRadixDigits, s: PeriodSchedule) -> int:
    s.check_level(d.level)
    if len(d.digits) != d.level:
        raise ScheduleError(f"expected {d.level} digits, got {len(d.digits)}")
    total = 0
    for j, b in enumerate(d.digits):
        m = s.factors[j]
        if int(b) != b or not 0 <= b < m:
            raise ScheduleError(f"digit b_{j + 1}={b!r} outside [0, {m})")
        total += int(b) * s.cumulative[j]
    return total
