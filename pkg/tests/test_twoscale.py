import math

import numpy as np
import pytest

from tsshuffle.mgrid import aggregate_two_scale
from tsshuffle.schedule import dyadic_schedule, make_schedule
from tsshuffle.twoscale import (
    PeriodError,
    Quadrature,
    QuadratureError,
    TestFunction,
    TwoScaleCandidate,
    fourier_basis,
    l2_bound_check,
    non_increasing,
    pairing_eps,
    pairing_limit,
    sample_candidates,
    sample_limits,
    separated,
    verify_two_scale,
    zero_candidate,
)


def U_demo(x, y):
    return np.sin(2 * np.pi * y) + np.sin(np.pi * y)


def one(x):
    return np.ones_like(x)


def test_pairing_eps_closed_form():
    # int_0^1 sin(2 pi x / eps) sin(2 pi x / eps) dx = 1/2 for eps = 1/k
    u = separated(lambda x, y: np.sin(2 * np.pi * y))
    psi = TestFunction(one, lambda y: np.sin(2 * np.pi * y), 1.0)
    assert pairing_eps(u, psi, 1 / 8) == pytest.approx(0.5, abs=1e-13)


def test_pairing_limit_closed_form():
    # int_0^1 e^x dx * (1/p) int_0^p sin^2 = (e - 1) / 2
    cand = TwoScaleCandidate(2.0, lambda x, y: np.exp(x) * np.sin(np.pi * y))
    psi = TestFunction(np.exp, lambda y: np.sin(np.pi * y), 2.0)
    psi1 = TestFunction(one, lambda y: np.sin(np.pi * y), 2.0)
    cand1 = TwoScaleCandidate(2.0, lambda x, y: np.sin(np.pi * y))
    assert pairing_limit(cand1, psi1) == pytest.approx(0.5, abs=1e-13)
    assert pairing_limit(cand, psi1) == pytest.approx((math.e - 1) / 2, abs=1e-12)
    assert pairing_limit(cand, psi) == pytest.approx((math.e**2 - 1) / 4, abs=1e-12)


def test_linearity(rng):
    u1 = separated(U_demo)
    u2 = separated(lambda x, y: np.exp(x) * np.cos(2 * np.pi * y))
    a, b = rng.standard_normal(2)
    uc = separated(lambda x, y: a * U_demo(x, y) + b * np.exp(x) * np.cos(2 * np.pi * y))
    for psi in fourier_basis(2.0):
        lhs = pairing_eps(uc, psi, 1 / 16)
        rhs = a * pairing_eps(u1, psi, 1 / 16) + b * pairing_eps(u2, psi, 1 / 16)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_quadrature_refinement_is_stable():
    u = separated(U_demo)
    for psi in fourier_basis(1.0):
        a, b, c = (pairing_eps(u, psi, 1 / 64, Quadrature(nodes_per_period=q)) for q in (16, 32, 64))
        # well below the 1e-2 demo tolerance, and shrinking on refinement
        assert abs(a - b) < 1e-4
        assert abs(b - c) <= max(abs(a - b) / 3, 1e-14)


def test_quadrature_guards():
    u = separated(U_demo)
    psi = fourier_basis(1.0)[0]
    with pytest.raises(QuadratureError):
        pairing_eps(u, psi, 1 / 8, Quadrature(nodes_per_period=4))
    with pytest.raises(ValueError):
        pairing_eps(u, psi, 0.0)


def test_periodicity_guards():
    with pytest.raises(PeriodError):
        TestFunction(one, lambda y: np.sin(2 * np.pi * y / 3), 1.0)
    with pytest.raises(PeriodError):
        TwoScaleCandidate(1.0, U_demo)


@pytest.mark.parametrize(
    "cand",
    [
        TwoScaleCandidate(1.0, lambda x, y: np.sin(2 * np.pi * y)),
        TwoScaleCandidate(2.0, U_demo),
        zero_candidate(0.5),
    ],
    ids=["p=1", "p=2", "p=1/2"],
)
def test_demo_example(cand):
    u = separated(U_demo)
    eps = [2.0**-k for k in range(4, 13)]
    rep = verify_two_scale(u, cand, fourier_basis(cand.p), eps, 1e-2)
    assert rep.passed
    assert len(rep.rows) == 6 * len(eps)


def test_wrong_candidate_fails():
    u = separated(U_demo)
    eps = [2.0**-k for k in range(4, 10)]
    rep = verify_two_scale(u, zero_candidate(1.0), fourier_basis(1.0), eps, 1e-2)
    assert not rep.passed
    assert rep.per_function["1*sin1@p=1"][1][-1] == pytest.approx(0.5, abs=1e-10)


def test_report_csv():
    u = separated(U_demo)
    rep = verify_two_scale(u, zero_candidate(0.5), fourier_basis(0.5)[:1], [1 / 4, 1 / 8, 1 / 16], 1e-2)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "epsilon,test_fn_id,pairing_eps,pairing_limit,residual"
    assert len(lines) == 4


def test_non_increasing_floor():
    assert non_increasing([3.0, 2.0, 2.0])
    assert not non_increasing([1.0, 2.0])
    assert non_increasing([1e-15, 3e-15, 2e-16])


def test_l2_bound():
    u = separated(U_demo)
    eps = [2.0**-k for k in range(6, 10)]
    assert l2_bound_check(u, TwoScaleCandidate(2.0, U_demo), eps)
    assert l2_bound_check(u, TwoScaleCandidate(1.0, lambda x, y: np.sin(2 * np.pi * y)), eps)
    assert not l2_bound_check(u, TwoScaleCandidate(2.0, lambda x, y: 2 * U_demo(x, y)), eps)


def test_sample_limits_demo():
    s = dyadic_schedule(1)
    out = sample_limits(U_demo, s, [0, 1], 8)
    y0 = (np.arange(8) + 0.5) / 8
    assert np.allclose(out[0].values[0], np.sin(2 * np.pi * y0), atol=1e-14)
    y1 = (np.arange(16) + 0.5) / 8
    assert np.allclose(out[1].values.ravel(), U_demo(0, y1), atol=1e-14)


def test_sample_limits_constant_and_quarter_mode():
    s = dyadic_schedule(2)
    const = sample_limits(lambda x, y: 3.0 + 0 * y, s, [0, 1, 2], 4)
    for f in const.values():
        assert np.all(f.values == 3.0)
    q = sample_limits(lambda x, y: np.sin(2 * np.pi * y / 4), s, [0, 1, 2], 4)
    assert np.max(np.abs(q[0].values)) < 1e-15
    assert np.max(np.abs(q[1].values)) < 1e-15
    y = (np.arange(16) + 0.5) / 4
    assert np.allclose(q[2].values.ravel(), np.sin(2 * np.pi * y / 4), atol=1e-15)


def test_sample_limits_aggregation_consistency():
    s = make_schedule(1, [2, 3, 2])

    def U(x, y):
        return np.exp(x) * (np.cos(2 * np.pi * y / 12) + np.sin(2 * np.pi * y / 3) + 0.5)

    x = np.linspace(0, 1, 5)
    out = sample_limits(U, s, range(4), 4, x=x)
    for n in range(4):
        for j in range(n, 4):
            assert np.allclose(aggregate_two_scale(out[j], n).values, out[n].values, atol=1e-10)


def test_sample_limits_rejects_unresolved_period():
    with pytest.raises(PeriodError):
        sample_limits(lambda x, y: np.sin(2 * np.pi * y / 3), dyadic_schedule(3), [0], 4)


def test_sample_candidates_numerical_path():
    s = dyadic_schedule(1)
    u = separated(U_demo)
    eps = [2.0**-k for k in range(5, 9)]
    out = sample_candidates(u, s, {0: lambda x, y: np.sin(2 * np.pi * y), 1: U_demo}, 4, eps, 1e-2)
    assert out[1].values.shape == (2, 4)
    with pytest.raises(ValueError):
        sample_candidates(u, s, {0: U_demo}, 4, eps, 1e-2)
