import numpy as np
import pytest

from tsshuffle.mgrid import (
    CellFunction,
    LevelError,
    MartingaleSequence,
    aggregate_two_scale,
    coarse_grain,
    flatten_v,
    from_csv,
    from_shuffled,
    is_martingale,
    l2_distance,
    rearrange_v,
    recover_two_scale,
    refine,
    to_csv,
    to_shuffled,
)
from tsshuffle.schedule import ScheduleError, dyadic_schedule, make_schedule
from tsshuffle.shuffle import compose_shuffle


def test_validation():
    s = dyadic_schedule(2)
    with pytest.raises(ValueError):
        CellFunction(s, 2, 1, np.zeros(3))
    with pytest.raises(ValueError):
        CellFunction(s, 1, 1, [0.0, np.nan])
    with pytest.raises(ValueError):
        CellFunction(s, 1, 3, np.zeros((2, 2, 2)))
    with pytest.raises(ScheduleError):
        CellFunction(s, 3, 1, np.zeros(8))
    f = CellFunction(s, 1, 1, [1.0, 2.0])
    with pytest.raises(ValueError):
        f.values[0] = 5


def test_coarse_grain_loop_oracle(rng):
    s = make_schedule(1, [2, 3, 2])
    f = CellFunction(s, 3, 1, rng.standard_normal(12))
    g = coarse_grain(f, 1)
    expect = [np.mean(f.values[6 * b : 6 * b + 6]) for b in range(2)]
    assert np.allclose(g.values, expect, rtol=0, atol=1e-15)
    with pytest.raises(LevelError):
        coarse_grain(g, 3)


def test_coarse_grain_2d(rng):
    s = make_schedule(1, [2, 3])
    v = rng.standard_normal((6, 6, 4))
    g = coarse_grain(CellFunction(s, 2, 2, v), 1)
    expect = v.reshape(2, 3, 2, 3, 4).mean(axis=(1, 3))
    assert np.allclose(g.values, expect, atol=1e-15)


def test_refine_then_coarse_grain_is_identity(rng):
    s = make_schedule(1, [3, 2, 2])
    f = CellFunction(s, 1, 2, rng.standard_normal((3, 3)))
    assert np.allclose(coarse_grain(refine(f, 3), 1).values, f.values, atol=1e-15)
    with pytest.raises(LevelError):
        refine(refine(f, 3), 2)


def test_tower_property(rng):
    s = make_schedule(1, [2, 3, 2, 2])
    f = CellFunction(s, 4, 1, rng.standard_normal(24))
    assert np.allclose(coarse_grain(coarse_grain(f, 3), 1).values, coarse_grain(f, 1).values, atol=1e-14)


def test_martingale_of_conditional_expectations(rng):
    s = dyadic_schedule(5)
    top = CellFunction(s, 5, 1, rng.standard_normal(32))
    seq = MartingaleSequence(tuple(coarse_grain(top, n) for n in range(6)))
    rep = is_martingale(seq, 1e-12)
    assert rep and rep.max_residual <= 1e-12
    bad = list(seq.terms)
    bad[2] = bad[2].with_values(bad[2].values + 0.1)
    rep = is_martingale(MartingaleSequence(tuple(bad)), 1e-12)
    assert not rep and rep.max_residual == pytest.approx(0.1)


def test_sequence_validation():
    s = dyadic_schedule(2)
    f = CellFunction(s, 1, 1, np.zeros(2))
    with pytest.raises(LevelError):
        MartingaleSequence((f, f))
    with pytest.raises(ScheduleError):
        MartingaleSequence((f, CellFunction(make_schedule(1, [2, 3]), 2, 1, np.zeros(6))))


def test_aggregation_loop_oracle(rng):
    s = make_schedule(1, [2, 3])
    u = CellFunction(s, 2, 1, rng.standard_normal((6, 5)))
    a = aggregate_two_scale(u, 1)
    for alpha in range(2):
        expect = np.mean([u.values[alpha + 2 * b] for b in range(3)], axis=0)
        assert np.allclose(a.values[alpha], expect, atol=1e-15)


def test_shuffle_turns_aggregation_into_conditional_expectation(rng):
    for factors in ([2, 2, 2, 2], [2, 3, 2], [3, 5, 2]):
        s = make_schedule(1, factors)
        L = s.levels
        u = CellFunction(s, L, 1, rng.standard_normal((s.cumulative[L], 3)))
        for n in range(L + 1):
            agg = aggregate_two_scale(u, n)
            lhs = coarse_grain(to_shuffled(u, compose_shuffle(s, L)), n)
            rhs = to_shuffled(agg, compose_shuffle(s, n))
            assert np.allclose(lhs.values, rhs.values, atol=1e-14)


def test_shuffle_roundtrip_2d(rng):
    s = make_schedule(1, [2, 3])
    H = compose_shuffle(s, 2)
    f = CellFunction(s, 2, 2, rng.standard_normal((6, 6)))
    g = to_shuffled(f, H)
    assert g.values[1, 2] == f.values[H.block_perm[1], H.block_perm[2]]
    assert np.array_equal(from_shuffled(g, H).values, f.values)
    with pytest.raises(LevelError):
        to_shuffled(f, compose_shuffle(s, 1))


def test_rearrange_flatten_roundtrip(rng):
    s = make_schedule(1, [2, 3])
    grid = rng.standard_normal((24, 5))  # 6 cells x 4 samples, 5 slow samples
    v = rearrange_v(grid, s, 2)
    assert v.values.shape == (6, 5, 4)
    assert v.values[1, 2, 3] == grid[7, 2]
    assert np.array_equal(flatten_v(v, payload_axes=1), grid)
    grid2 = rng.standard_normal((12, 12))
    v2 = rearrange_v(grid2, s, 2, dim=2)
    assert v2.values.shape == (6, 6, 2, 2)
    assert np.array_equal(flatten_v(v2), grid2)
    with pytest.raises(ValueError):
        rearrange_v(np.zeros(10), s, 2)


def test_recover(rng):
    s = dyadic_schedule(4)
    u = CellFunction(s, 4, 1, rng.standard_normal(16))
    w = to_shuffled(u, compose_shuffle(s, 4))
    for n in range(5):
        rec = recover_two_scale(w, n, compose_shuffle(s, n))
        assert np.allclose(rec.values, aggregate_two_scale(u, n).values, atol=1e-14)


def test_l2_distance():
    s = dyadic_schedule(2)
    f = CellFunction(s, 1, 1, [1.0, -1.0])
    g = CellFunction(s, 2, 1, [1.0, 1.0, -1.0, -1.0])
    assert l2_distance(f, g) == 0.0
    h = CellFunction(s, 2, 1, [1.0, 1.0, -1.0, 1.0])
    assert l2_distance(f, h) == pytest.approx(1.0)


def test_csv_roundtrip(rng):
    s = make_schedule(1, [2, 3])
    f = CellFunction(s, 2, 1, rng.standard_normal((6, 2, 3)))
    text = to_csv(f)
    assert text.splitlines()[:2] == ["level,dim,payload_size", "2,1,6"]
    g = from_csv(text, s, (2, 3))
    assert np.array_equal(g.values, f.values)
    f2 = CellFunction(s, 1, 2, rng.standard_normal((2, 2)))
    assert np.array_equal(from_csv(to_csv(f2), s).values, f2.values)
