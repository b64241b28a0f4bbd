"""Numerical two-scale pairings and sampled two-scale limits.

The oscillating side ``int u_eps(x) psi(x, x/eps) dx`` is evaluated with a
composite midpoint rule whose cells tile every ``p*eps`` period exactly.
The limit side ``p^-d int int u0(x, y) psi(x, y) dy dx`` uses Gauss-Legendre
in the slow variable and the periodic midpoint rule in the fast one.

Points are passed to user callables as numpy arrays: shape ``(n,)`` when
``dim == 1`` and ``(n, dim)`` otherwise.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .mgrid import CellFunction, aggregate_two_scale, rearrange_v
from .schedule import PeriodSchedule

# residuals at or below this are treated as quadrature round-off when
# checking that they do not increase
RESIDUAL_FLOOR = 1e-12
MIN_NODES_PER_PERIOD = 8


class QuadratureError(ValueError):
    pass


class PeriodError(ValueError):
    pass


@dataclass(frozen=True)
class OscillatoryFunction:
    evaluator: Callable  # (x, eps) -> values
    dim: int = 1
    label: str = "u"

    def __call__(self, x, eps):
        return np.asarray(self.evaluator(x, eps), dtype=np.float64)


def separated(U: Callable, dim: int = 1, label: str = "u") -> OscillatoryFunction:
    """``u_eps(x) = U(x, x / eps)``."""
    return OscillatoryFunction(lambda x, eps: U(x, x / eps), dim, label)


def _periodic_probe(fn, p, dim, args_first=None, n=7, atol=1e-10):
    rng = np.random.default_rng(12345)
    y = rng.uniform(0, p, size=(n, dim))
    for ax in range(dim):
        shifted = y.copy()
        shifted[:, ax] += p
        a, b = _pt(y, dim), _pt(shifted, dim)
        if args_first is not None:
            fa, fb = fn(args_first, a), fn(args_first, b)
        else:
            fa, fb = fn(a), fn(b)
        fa, fb = np.asarray(fa, float), np.asarray(fb, float)
        if not np.allclose(fa, fb, rtol=0, atol=atol * max(1.0, float(np.max(np.abs(fa))))):
            return False
    return True


def _pt(a, dim):
    return a[:, 0] if dim == 1 else a


@dataclass(frozen=True)
class TestFunction:
    slow: Callable
    fast: Callable
    p: float = 1.0
    dim: int = 1
    id: str = "psi"

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not self.p > 0:
            raise PeriodError("period must be positive")
        if not _periodic_probe(self.fast, self.p, self.dim):
            raise PeriodError(f"fast part of {self.id} is not {self.p}-periodic")

    def __call__(self, x, y):
        return np.asarray(self.slow(x), float) * np.asarray(self.fast(y), float)


@dataclass(frozen=True)
class TwoScaleCandidate:
    p: float
    u0: Callable  # (x, y) -> values
    dim: int = 1

    def __post_init__(self):
        if not self.p > 0:
            raise PeriodError("period must be positive")
        x0 = np.full(7, 0.37) if self.dim == 1 else np.full((7, self.dim), 0.37)
        if not _periodic_probe(self.u0, self.p, self.dim, args_first=x0):
            raise PeriodError(f"candidate is not {self.p}-periodic in its fast variable")


def zero_candidate(p: float, dim: int = 1) -> TwoScaleCandidate:
    return TwoScaleCandidate(p, lambda x, y: np.zeros(np.shape(y)[:1]), dim)


@dataclass(frozen=True)
class Quadrature:
    nodes_per_period: int = 16
    slow_nodes: int = 64
    slow_panels: int = 4
    fast_nodes: int = 256
    chunk: int = 1 << 20


def _grid(n_per_axis, dim):
    h = 1.0 / n_per_axis
    t = (np.arange(n_per_axis) + 0.5) * h
    if dim == 1:
        return t, h
    mesh = np.meshgrid(*([t] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1), h


def pairing_eps(u: OscillatoryFunction, psi: TestFunction, eps: float,
                quad: Quadrature = Quadrature()) -> float:
    """Midpoint-rule approximation of ``int_[0,1)^d u_eps(x) psi(x, x/eps) dx``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    period = min(psi.p, 1.0) * eps
    n = quad.nodes_per_period * math.ceil(round(1.0 / period, 9))
    if n * period < MIN_NODES_PER_PERIOD:
        raise QuadratureError(
            f"{n} nodes per axis give {n * period:.2f} nodes per eps-period; need >= {MIN_NODES_PER_PERIOD}"
        )
    dim = psi.dim
    if dim == 1:
        x, h = _grid(n, 1)
        return float(np.sum(u(x, eps) * psi(x, x / eps)) * h)
    # tensor grid, streamed along the first axis
    h = 1.0 / n
    t = (np.arange(n) + 0.5) * h
    rest, _ = _grid(n, dim - 1)
    rest = rest.reshape(-1, dim - 1)
    total = 0.0
    for x0 in t:
        x = np.column_stack([np.full(len(rest), x0), rest])
        total += float(np.sum(u(x, eps) * psi(x, x / eps)))
    return total * h**dim


def _gauss_slow(quad: Quadrature):
    g, w = np.polynomial.legendre.leggauss(quad.slow_nodes)
    P = quad.slow_panels
    xs = np.concatenate([(g + 1) / (2 * P) + k / P for k in range(P)])
    ws = np.tile(w / (2 * P), P)
    return xs, ws


def pairing_limit(cand: TwoScaleCandidate, psi: TestFunction,
                  quad: Quadrature = Quadrature()) -> float:
    """``p^-d int_Omega int_{Y_p} u0 psi`` (Gauss in x, periodic midpoint in y)."""
    if not math.isclose(cand.p, psi.p, rel_tol=1e-12) or cand.dim != psi.dim:
        raise PeriodError(f"candidate period {cand.p} does not match test period {psi.p}")
    if cand.dim != 1:
        return _pairing_limit_nd(cand, psi, quad)
    xs, wx = _gauss_slow(quad)
    ny = quad.fast_nodes
    ys = (np.arange(ny) + 0.5) * cand.p / ny
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vals = cand.u0(X.ravel(), Y.ravel()) * psi(X.ravel(), Y.ravel())
    vals = np.asarray(vals, float).reshape(X.shape)
    # mean over y is (1/p) int_{Y_p}
    return float(np.sum(wx * vals.mean(axis=1)))


def _pairing_limit_nd(cand, psi, quad):
    d = cand.dim
    xs, wx = _gauss_slow(quad)
    ny = max(8, int(round(quad.fast_nodes ** (1.0 / d))) * 4)
    ys = (np.arange(ny) + 0.5) * cand.p / ny
    xg = np.stack([m.ravel() for m in np.meshgrid(*([xs] * d), indexing="ij")], -1)
    wg = np.prod(np.stack(np.meshgrid(*([wx] * d), indexing="ij"), -1).reshape(-1, d), axis=1)
    yg = np.stack([m.ravel() for m in np.meshgrid(*([ys] * d), indexing="ij")], -1)
    total = 0.0
    for xi, wi in zip(xg, wg):
        X = np.broadcast_to(xi, yg.shape)
        total += wi * float(np.mean(cand.u0(X, yg) * psi(X, yg)))
    return total


@dataclass
class TwoScaleReport:
    passed: bool
    rows: list = field(default_factory=list)  # (eps, psi id, pairing_eps, pairing_limit, residual)
    per_function: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "test_fn_id", "pairing_eps", "pairing_limit", "residual"])
        for eps, fid, pe, pl, r in self.rows:
            w.writerow([format(eps, ".17g"), fid, format(pe, ".17g"), format(pl, ".17g"), format(r, ".17g")])
        return buf.getvalue()


def non_increasing(seq: Sequence[float], floor: float = RESIDUAL_FLOOR) -> bool:
    return all(b <= a or b <= floor for a, b in zip(seq, seq[1:]))


def verify_two_scale(u: OscillatoryFunction, cand: TwoScaleCandidate,
                     basis: Sequence[TestFunction], eps_seq: Sequence[float], tol: float,
                     quad: Quadrature = Quadrature()) -> TwoScaleReport:
    eps_seq = list(eps_seq)
    if any(b >= a for a, b in zip(eps_seq, eps_seq[1:])):
        raise ValueError("eps sequence must be strictly decreasing")
    report = TwoScaleReport(True)
    for psi in basis:
        lim = pairing_limit(cand, psi, quad)
        res = []
        for eps in eps_seq:
            pe = pairing_eps(u, psi, eps, quad)
            r = abs(pe - lim)
            res.append(r)
            report.rows.append((eps, psi.id, pe, lim, r))
        ok = res[-1] <= tol and non_increasing(res[-3:])
        report.per_function[psi.id] = (ok, res)
        report.passed &= ok
    return report


def fourier_basis(p: float, dim: int = 1) -> list[TestFunction]:
    """Slow parts {1, e^x} times fast parts {sin, cos} of the first mode and sin of the second."""
    k = 2 * math.pi / p
    if dim != 1:
        raise ValueError("fourier_basis is one-dimensional")
    slows = [("1", lambda x: np.ones_like(x)), ("exp", np.exp)]
    fasts = [
        ("sin1", lambda y: np.sin(k * y)),
        ("cos1", lambda y: np.cos(k * y)),
        ("sin2", lambda y: np.sin(2 * k * y)),
    ]
    return [TestFunction(s, f, p, 1, f"{sn}*{fn}@p={p:g}") for sn, s in slows for fn, f in fasts]


@dataclass(frozen=True)
class BoundReport:
    passed: bool
    limit_norm: float  # ||u0|| / p^{d/2}
    liminf_norm: float  # min of ||u_eps|| over the tail

    def __bool__(self):
        return self.passed


def l2_norm_eps(u: OscillatoryFunction, eps: float, nodes_per_period: int = 16) -> float:
    n = nodes_per_period * math.ceil(round(1.0 / eps, 9))
    if u.dim != 1:
        x, h = _grid(n, u.dim)
        return math.sqrt(float(np.sum(u(x, eps) ** 2)) * h**u.dim)
    x, h = _grid(n, 1)
    return math.sqrt(float(np.sum(u(x, eps) ** 2)) * h)


def l2_norm_limit(cand: TwoScaleCandidate, quad: Quadrature = Quadrature()) -> float:
    """``||u0||_{L2(Omega x Y_p)} / p^{d/2}``."""
    one = TestFunction(lambda x: np.ones(np.shape(x)[:1]), lambda y: np.ones(np.shape(y)[:1]), cand.p, cand.dim)
    sq = TwoScaleCandidate(cand.p, lambda x, y: np.asarray(cand.u0(x, y), float) ** 2, cand.dim)
    return math.sqrt(max(pairing_limit(sq, one, quad), 0.0))


def l2_bound_check(u: OscillatoryFunction, cand: TwoScaleCandidate, eps_seq: Sequence[float],
                   rtol: float = 1e-8, tail: int = 3) -> BoundReport:
    left = l2_norm_limit(cand)
    right = min(l2_norm_eps(u, e) for e in list(eps_seq)[-tail:])
    return BoundReport(left <= right * (1 + rtol) + rtol, left, right)


def sample_limits(U: Callable, s: PeriodSchedule, levels: Sequence[int], samples_per_cell: int,
                  x: np.ndarray | None = None, periodic_atol: float = 1e-10) -> dict[int, CellFunction]:
    """Cell functions holding ``u_{0,p_n}`` of ``u_eps(x) = U(x, x/eps)``.

    ``U(x, y)`` must be ``p_L``-periodic in ``y`` (``L`` = last schedule
    level).  Its ``p_L`` two-scale limit is ``U`` itself; coarser limits
    come from averaging translates.  Payload layout is ``(x, y)`` when a slow
    grid ``x`` is given, else ``(y,)``; ``y`` runs over cell midpoints.
    """
    L = s.levels
    pL = s.period(L)
    q = int(samples_per_cell)
    y = s.p0 * (np.arange(s.cumulative[L] * q) + 0.5) / q
    xs = np.array([0.5]) if x is None else np.asarray(x, float)
    X, Y = np.meshgrid(xs, y, indexing="ij")
    base = np.asarray(U(X, Y), float)
    shifted = np.asarray(U(X, Y + pL), float)
    if not np.allclose(base, shifted, rtol=0, atol=periodic_atol * max(1.0, float(np.max(np.abs(base))))):
        raise PeriodError(f"fast part is not {pL}-periodic: it carries scales outside the schedule")
    grid = base.T  # (y, x)
    if x is None:
        grid = grid[:, 0]
    finest = rearrange_v(grid, s, L)
    out = {}
    for n in levels:
        s.check_level(n)
        out[n] = aggregate_two_scale(finest, n)
    return out


def sample_candidates(u: OscillatoryFunction, s: PeriodSchedule,
                      candidates: Mapping[int, Callable], samples_per_cell: int,
                      eps_seq: Sequence[float], tol: float) -> dict[int, CellFunction]:
    """Numerical path: keep the candidate ``u_{0,p_n}`` that the pairings confirm.

    Only pairings are checked; a candidate that fails raises ``ValueError``.
    """
    out = {}
    for n, u0 in candidates.items():
        p = s.period(n)
        cand = TwoScaleCandidate(p, u0)
        rep = verify_two_scale(u, cand, fourier_basis(p), eps_seq, tol)
        if not rep:
            raise ValueError(f"candidate for level {n} (p={p:g}) is not confirmed by the pairings")
        q = int(samples_per_cell)
        y = s.p0 * (np.arange(s.cumulative[n] * q) + 0.5) / q
        vals = np.asarray(u0(np.full_like(y, 0.5), y), float)
        out[n] = rearrange_v(vals, s, n)
    return out
