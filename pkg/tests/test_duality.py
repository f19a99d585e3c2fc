import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualbridge import (
    ConsensusProblem,
    NotStrictlyConvex,
    PrimalRecoveryInconsistent,
    QuadraticFunction,
    ResourceAllocationProblem,
    fenchel_dual,
    lagrange_dual,
    recover_primal,
    solve_consensus,
    solve_ra_quadratic,
)
from dualbridge.convex import BlackBoxFunction
from dualbridge.duality import as_resource_allocation

from conftest import random_quadratic, softplus_regularized


def unit(n=1):
    return QuadraticFunction(np.eye(n))


def half_square_shift(a):
    return QuadraticFunction([[1.0]], [a])


class TestLagrangeDual:
    def test_single_agent(self):
        dp = lagrange_dual(ResourceAllocationProblem([unit()], [3.0]))
        for y in (-1.0, 0.0, 2.5):
            assert dp.value(0, [y]) == pytest.approx(0.5 * y * y - 3 * y, abs=1e-14)
            assert dp.gradient(0, [y]) == pytest.approx([y - 3])

    def test_two_agents_at_zero(self):
        dp = lagrange_dual(ResourceAllocationProblem([unit(), unit()], [1.0, 3.0]))
        assert dp.gradient(0, [0.0]) == pytest.approx([-1.0])
        assert dp.gradient(1, [0.0]) == pytest.approx([-3.0])

    def test_gradient_vanishes_at_resource_slope(self, rng):
        costs = [random_quadratic(rng, 2), softplus_regularized(2)]
        R = rng.standard_normal((2, 2))
        dp = lagrange_dual(ResourceAllocationProblem(costs, R))
        for i, f in enumerate(costs):
            assert np.linalg.norm(dp.gradient(i, f.gradient(R[i]))) < 1e-9

    def test_constants(self):
        costs = [QuadraticFunction([[2.0]]), QuadraticFunction([[4.0]])]
        dp = lagrange_dual(ResourceAllocationProblem(costs, [0.0, 0.0]))
        # K = 1 / min rho = 1/2, mu = 1 / max L = 1/4
        assert dp.K == pytest.approx(0.5) and dp.mu == pytest.approx(0.25)
        assert dp.beta_interval == pytest.approx((0.0, 2.0))
        assert dp.default_beta == pytest.approx(1.0)
        assert dp.constants()["rho"] == [2.0, 4.0]

    def test_not_strictly_convex(self):
        f = BlackBoxFunction(1, lambda x: float(abs(x[0])), np.sign)
        with pytest.raises(NotStrictlyConvex):
            lagrange_dual(ResourceAllocationProblem([f], [0.0]))

    def test_shapes_checked(self):
        with pytest.raises(ValueError):
            ResourceAllocationProblem([unit(), unit(2)], [0.0, 0.0])
        with pytest.raises(ValueError):
            ResourceAllocationProblem([unit(), unit()], [0.0])


class TestFenchelDual:
    def test_quadratic_costs(self):
        a = (0.0, 2.0)
        dp = fenchel_dual(ConsensusProblem([half_square_shift(v) for v in a]))
        assert np.all(dp.resources == 0.0)
        for i, ai in enumerate(a):
            for y in (-1.5, 0.0, 0.7):
                assert dp.value(i, [y]) == pytest.approx(0.5 * y * y + ai * y, abs=1e-14)

    def test_single_agent_dual_optimum_is_zero(self):
        dp = fenchel_dual(ConsensusProblem([half_square_shift(5.0)]))
        sol = solve_ra_quadratic(as_resource_allocation(dp))
        assert sol.primal == pytest.approx(np.zeros((1, 1)))

    def test_dual_optimum_sums_to_zero(self):
        dp = fenchel_dual(ConsensusProblem([half_square_shift(0.0), half_square_shift(2.0)]))
        sol = solve_ra_quadratic(as_resource_allocation(dp))
        np.testing.assert_allclose(sol.primal.ravel(), [1.0, -1.0], atol=1e-12)
        assert abs(sol.primal.sum()) < 1e-12


class TestRecoverPrimal:
    def test_forward(self):
        ra = ResourceAllocationProblem([unit(), unit()], [1.0, 3.0])
        y = solve_ra_quadratic(ra).dual
        assert y == pytest.approx([2.0])
        X = recover_primal(lagrange_dual(ra), y)
        np.testing.assert_allclose(X.ravel(), [2.0, 2.0])
        assert X.sum() == pytest.approx(4.0)

    def test_reverse(self):
        dp = fenchel_dual(ConsensusProblem([half_square_shift(0.0), half_square_shift(2.0)]))
        assert dp.gradient(0, [1.0]) == pytest.approx([1.0])
        assert dp.gradient(1, [-1.0]) == pytest.approx([1.0])
        assert recover_primal(dp, [[1.0], [-1.0]]) == pytest.approx([1.0])

    def test_forward_non_optimal_rejected(self):
        ra = ResourceAllocationProblem([unit(), unit()], [1.0, 3.0])
        with pytest.raises(PrimalRecoveryInconsistent, match="4.0"):
            recover_primal(lagrange_dual(ra), [0.0])

    def test_reverse_disagreement_rejected(self):
        dp = fenchel_dual(ConsensusProblem([half_square_shift(0.0), half_square_shift(2.0)]))
        with pytest.raises(PrimalRecoveryInconsistent):
            recover_primal(dp, [[0.0], [0.0]])


# -- properties -----------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_strong_duality_on_quadratics(m, n, seed):
    rng = np.random.default_rng(seed)
    ra = ResourceAllocationProblem([random_quadratic(rng, n) for _ in range(m)],
                                   rng.standard_normal((m, n)))
    sol = solve_ra_quadratic(ra)
    dp = lagrange_dual(ra)
    dual_opt = dp.total_value(np.tile(sol.dual, (m, 1)))
    assert ra.objective(sol.primal) == pytest.approx(-dual_opt, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_round_trip_through_dual(m, n, seed):
    rng = np.random.default_rng(seed)
    ra = ResourceAllocationProblem([random_quadratic(rng, n) for _ in range(m)],
                                   rng.standard_normal((m, n)))
    sol = solve_ra_quadratic(ra)
    np.testing.assert_allclose(recover_primal(lagrange_dual(ra), sol.dual), sol.primal, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-4, 4), min_size=2, max_size=2), st.integers(0, 2**32 - 1))
def test_dual_gradient_matches_finite_differences(y, seed):
    rng = np.random.default_rng(seed)
    y = np.array(y)
    ra = ResourceAllocationProblem([random_quadratic(rng, 2), softplus_regularized(2)],
                                   rng.standard_normal((2, 2)))
    dp = lagrange_dual(ra)
    h = 1e-5
    for i in range(2):
        g = dp.gradient(i, y)
        fd = np.array([(dp.value(i, y + h * e) - dp.value(i, y - h * e)) / (2 * h) for e in np.eye(2)])
        assert np.linalg.norm(fd - g) <= 1e-4 * max(1.0, np.linalg.norm(g))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_reverse_dual_has_zero_resources(m, n, seed):
    rng = np.random.default_rng(seed)
    dp = fenchel_dual(ConsensusProblem([random_quadratic(rng, n) for _ in range(m)]))
    assert np.all(dp.resources.sum(axis=0) == 0.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_reverse_recovery_matches_consensus_oracle(m, seed):
    rng = np.random.default_rng(seed)
    cp = ConsensusProblem([random_quadratic(rng, 2) for _ in range(m)])
    sol = solve_consensus(cp)
    assert abs(sol.dual.sum(axis=0)).max() < 1e-9
    np.testing.assert_allclose(recover_primal(fenchel_dual(cp), sol.dual), sol.primal, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_explicit_conjugate_of_quadratic(n, seed):
    rng = np.random.default_rng(seed)
    h = random_quadratic(rng, n)
    dp = fenchel_dual(ConsensusProblem([h]))
    g = as_resource_allocation(dp).costs[0]
    assert isinstance(g, QuadraticFunction)
    for _ in range(3):
        y = 3 * rng.standard_normal(n)
        assert g.value(y) == pytest.approx(dp.conjugates[0].value(y), rel=1e-9, abs=1e-9)
        np.testing.assert_allclose(g.gradient(y), dp.conjugates[0].gradient(y), rtol=1e-9, atol=1e-9)
