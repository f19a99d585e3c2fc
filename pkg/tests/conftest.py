import numpy as np
import pytest

from dualbridge import BlackBoxFunction, QuadraticFunction


def random_spd(rng, n, lo=0.5, hi=5.0):
    """SPD matrix with eigenvalues drawn from [lo, hi]."""
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return U @ np.diag(rng.uniform(lo, hi, n)) @ U.T


def random_quadratic(rng, n):
    return QuadraticFunction(random_spd(rng, n), rng.standard_normal(n))


def softplus_regularized(n, rho=1.0):
    """rho/2 ||x||^2 + sum log(1 + exp(x_k)); gradient Lipschitz rho + 1/4."""
    return BlackBoxFunction(
        n,
        lambda x: 0.5 * rho * x @ x + np.logaddexp(0.0, x).sum(),
        lambda x: rho * x + 1.0 / (1.0 + np.exp(-x)),
        strong_convexity=rho, lipschitz=rho + 0.25)


def pseudo_huber_regularized(n, rho=1.0):
    """rho/2 ||x||^2 + sum sqrt(1 + x_k^2); gradient Lipschitz rho + 1."""
    return BlackBoxFunction(
        n,
        lambda x: 0.5 * rho * x @ x + np.sqrt(1.0 + x ** 2).sum(),
        lambda x: rho * x + x / np.sqrt(1.0 + x ** 2),
        strong_convexity=rho, lipschitz=rho + 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
