import numpy as np
import pytest

from cyclicnet.oracle import finite_diff_grad, relative_error


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def fd_check(forward, backward, x, rng, h=1e-5):
    """Relative error between ``backward`` and central differences of ``<w, forward(x)>``."""
    w = rng.standard_normal(forward(x).shape)
    analytic = backward(w)
    numeric = finite_diff_grad(lambda z: float(np.sum(w * forward(z))), x, h)
    return relative_error(analytic, numeric)


def adjoint_error(forward, adjoint, x, rng):
    """``|<g, L x> - <L^T g, x>|`` relative to the larger magnitude."""
    y = forward(x)
    g = rng.standard_normal(y.shape)
    lhs = float(np.sum(g * y))
    rhs = float(np.sum(adjoint(g) * x))
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)


def away_from_zero(rng, shape, low=0.2):
    """Random values with ``|v| >= low`` and random signs.

    Keeps central differences off the ReLU kink and away from the tiny
    gradients of rms pooling near zero, where roundoff dominates the estimate.
    """
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(low, 1.5, size=shape)
