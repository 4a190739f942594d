import itertools

import numpy as np
import pytest

from cyclicnet import group as G
from cyclicnet.cyclic import (
    cyclic_pool,
    cyclic_pool_backward,
    cyclic_roll,
    cyclic_roll_backward,
    cyclic_slice,
    cyclic_slice_backward,
    cyclic_stack,
    cyclic_stack_backward,
)
from cyclicnet.tensor import rotate90

from conftest import adjoint_error, away_from_zero, fd_check

X22 = np.array([[1.0, 2.0], [3.0, 4.0]])[None, None]


def permute_blocks(x, perm):
    blocks = np.split(x, len(perm))
    return np.concatenate([blocks[i] for i in perm])


def pathway_values(*vals):
    """A sliced batch of 1x1 maps holding one value per pathway."""
    return np.array(vals, dtype=float).reshape(-1, 1, 1, 1)


def test_slice_pinned_blocks():
    blocks = np.split(cyclic_slice(X22), 4)
    expected = [[[1, 2], [3, 4]], [[3, 1], [4, 2]], [[4, 3], [2, 1]], [[2, 4], [1, 3]]]
    for b, e in zip(blocks, expected):
        np.testing.assert_array_equal(b[0, 0], e)


def test_slice_of_1x1_repeats():
    x = np.array([[[[5.0]]], [[[6.0]]]])
    np.testing.assert_array_equal(cyclic_slice(x), np.tile(x, (4, 1, 1, 1)))


def test_slice_rejects_non_square():
    with pytest.raises(ValueError):
        cyclic_slice(np.zeros((1, 1, 2, 3)))


def test_slice_of_rotated_input_is_backward_shift(rng):
    x = rng.standard_normal((3, 2, 5, 5))
    assert np.array_equal(cyclic_slice(rotate90(x, 1)), permute_blocks(cyclic_slice(x), [1, 2, 3, 0]))


@pytest.mark.parametrize("kind", G.KINDS)
def test_slice_equivariance_all_elements(kind, rng):
    x = rng.standard_normal((2, 1, 4, 4))
    s = cyclic_slice(x, kind)
    for g in G.elements(kind):
        assert np.array_equal(cyclic_slice(G.apply(g, x), kind), permute_blocks(s, G.slice_permutation(g)))


def test_dihedral_slice_shape(rng):
    assert cyclic_slice(rng.standard_normal((1, 3, 6, 6)), G.D4).shape == (8, 3, 6, 6)


@pytest.mark.parametrize("kind", G.KINDS)
def test_mean_pool_inverts_slice(kind, rng):
    x = rng.standard_normal((3, 2, 7, 7))
    y, _ = cyclic_pool(cyclic_slice(x, kind), kind, "mean", realign=True)
    ulp = np.spacing(np.abs(x))
    assert np.all(np.abs(y - x) <= 4 * ulp)


@pytest.mark.parametrize("function, expected", [
    ("mean", 2.5), ("max", 4.0), ("rms", np.sqrt(30 / 4)),
])
def test_pool_functions_on_scalars(function, expected):
    y, _ = cyclic_pool(pathway_values(1, 2, 3, 4), function=function)
    assert y.shape == (1, 1, 1, 1)
    assert y.item() == pytest.approx(expected, rel=1e-15)


def test_pool_pre_relu():
    y, _ = cyclic_pool(pathway_values(-1, 2, -3, 4), function="mean", pre_relu=True)
    assert y.item() == 1.5
    y, _ = cyclic_pool(pathway_values(-1, -2, -3, -4), function="max", pre_relu=True)
    assert y.item() == 0.0


def test_pool_realign_rotates_back():
    s = cyclic_slice(X22)
    y, _ = cyclic_pool(s, function="max", realign=False)
    np.testing.assert_array_equal(y, np.max(np.split(s, 4), axis=0))
    y, _ = cyclic_pool(s, function="max", realign=True)
    np.testing.assert_array_equal(y, X22)


def test_pool_errors():
    with pytest.raises(ValueError):
        cyclic_pool(np.zeros((6, 1, 2, 2)))
    with pytest.raises(ValueError):
        cyclic_pool(np.zeros((4, 1, 2, 2)), function="median")
    with pytest.raises(ValueError):
        cyclic_pool(np.zeros((4, 1, 2, 3)), realign=True)


def test_max_pool_gradient_ties_go_to_first_pathway():
    x = pathway_values(3, 1, 3, 2)
    _, cache = cyclic_pool(x, function="max")
    np.testing.assert_array_equal(cyclic_pool_backward(cache, np.ones((1, 1, 1, 1))).ravel(), [1, 0, 0, 0])


def test_rms_pool_gradient_is_zero_at_zero():
    _, cache = cyclic_pool(np.zeros((4, 2, 3, 3)), function="rms")
    g = cyclic_pool_backward(cache, np.ones((1, 2, 3, 3)))
    assert np.all(g == 0)


def test_stack_shapes_and_values(rng):
    assert cyclic_stack(rng.standard_normal((4, 2, 3, 3))).shape == (1, 8, 3, 3)
    np.testing.assert_array_equal(cyclic_stack(pathway_values(1, 2, 3, 4)).ravel(), [1, 2, 3, 4])
    with pytest.raises(ValueError):
        cyclic_stack(np.zeros((3, 1, 2, 2)))


@pytest.mark.parametrize("kind", G.KINDS)
def test_stack_of_slice_repeats_input(kind, rng):
    x = rng.standard_normal((2, 3, 5, 5))
    for block in np.split(cyclic_stack(cyclic_slice(x, kind), kind), G.order(kind), axis=1):
        assert np.array_equal(block, x)


def test_roll_on_scalars():
    y = cyclic_roll(pathway_values(1, 2, 3, 4))
    np.testing.assert_array_equal(y.reshape(4, 4), [[1, 2, 3, 4], [2, 3, 4, 1], [3, 4, 1, 2], [4, 1, 2, 3]])


def test_roll_shape(rng):
    assert cyclic_roll(rng.standard_normal((8, 3, 5, 5))).shape == (8, 12, 5, 5)
    assert cyclic_roll(rng.standard_normal((16, 3, 5, 5)), G.D4).shape == (16, 24, 5, 5)


def test_roll_matches_stack_of_shifted_pathways(rng):
    # R(x) = [T(x), T(sx), T(s^2 x), T(s^3 x)] with s the backward shift
    x = rng.standard_normal((8, 2, 4, 4))
    rows = [cyclic_stack(permute_blocks(x, np.roll(np.arange(4), -k))) for k in range(4)]
    assert np.array_equal(cyclic_roll(x), np.concatenate(rows))


def test_roll_commutes_with_cyclic_shift(rng):
    x = rng.standard_normal((8, 3, 5, 5))
    sigma = [1, 2, 3, 0]
    assert np.array_equal(cyclic_roll(permute_blocks(x, sigma)), permute_blocks(cyclic_roll(x), sigma))


@pytest.mark.parametrize("kind", G.KINDS)
def test_roll_commutes_with_every_slice_permutation(kind, rng):
    x = rng.standard_normal((G.order(kind) * 2, 2, 4, 4))
    for g in G.elements(kind):
        perm = G.slice_permutation(g)
        assert np.array_equal(cyclic_roll(permute_blocks(x, perm), kind), permute_blocks(cyclic_roll(x, kind), perm))


def test_left_translation_roll_is_not_dihedral_equivariant(rng):
    # Filling block h of pathway g from pathway g*h (instead of h*g) agrees on C4
    # but breaks the pathway structure for D4, which is why roll uses h*g.
    els = G.elements(G.D4)
    x = rng.standard_normal((8, 1, 4, 4))

    def left_roll(z):
        blocks = np.split(z, 8)
        return np.concatenate([np.concatenate([G.apply(h.inverse, blocks[(g * h).index]) for h in els], axis=1)
                               for g in els])

    broken = 0
    for g in els:
        perm = G.slice_permutation(g)
        broken += not np.array_equal(left_roll(permute_blocks(x, perm)), permute_blocks(left_roll(x), perm))
    assert broken > 0


def test_dihedral_pool_of_slice_is_identity(rng):
    x = rng.standard_normal((2, 2, 5, 5))
    y, _ = cyclic_pool(cyclic_slice(x, G.D4), G.D4, "mean")
    np.testing.assert_allclose(y, x, rtol=0, atol=4 * np.spacing(np.abs(x).max()))


# adjoints -------------------------------------------------------------------

def _mean_pool(kind, realign):
    return (lambda x: cyclic_pool(x, kind, "mean", realign=realign)[0],
            lambda g: cyclic_pool_backward(cyclic_pool(np.zeros((G.order(kind), 2, 3, 3)), kind, "mean",
                                                       realign=realign)[1], g))


LINEAR = {
    "slice": (lambda k: (lambda x: cyclic_slice(x, k), lambda g: cyclic_slice_backward(g, k)), 1),
    "stack": (lambda k: (lambda x: cyclic_stack(x, k), lambda g: cyclic_stack_backward(g, k)), None),
    "roll": (lambda k: (lambda x: cyclic_roll(x, k), lambda g: cyclic_roll_backward(g, k)), None),
    "pool-mean-realign": (lambda k: _mean_pool(k, True), None),
    "pool-mean-raw": (lambda k: _mean_pool(k, False), None),
}


@pytest.mark.parametrize("name", list(LINEAR))
@pytest.mark.parametrize("kind", G.KINDS)
def test_adjoint_dot_product(name, kind, rng):
    make, batch = LINEAR[name]
    forward, adjoint = make(kind)
    n = batch or G.order(kind)
    for _ in range(5):
        x = rng.standard_normal((n, 2, 3, 3))
        assert adjoint_error(forward, adjoint, x, rng) <= 1e-12


# finite differences ---------------------------------------------------------

@pytest.mark.parametrize("function, pre_relu, realign",
                         list(itertools.product(("mean", "max", "rms"), (False, True), (True, False))))
@pytest.mark.parametrize("kind", G.KINDS)
def test_pool_gradients(function, pre_relu, realign, kind, rng):
    x = away_from_zero(rng, (G.order(kind) * 2, 2, 3, 3))

    def forward(z):
        return cyclic_pool(z, kind, function, pre_relu, realign)[0]

    def backward(g):
        return cyclic_pool_backward(cyclic_pool(x, kind, function, pre_relu, realign)[1], g)

    assert fd_check(forward, backward, x, rng) <= 1e-6


@pytest.mark.parametrize("kind", G.KINDS)
def test_slice_stack_roll_gradients(kind, rng):
    n = G.order(kind)
    x1 = rng.standard_normal((2, 2, 3, 3))
    assert fd_check(lambda z: cyclic_slice(z, kind), lambda g: cyclic_slice_backward(g, kind), x1, rng) <= 1e-6
    x = rng.standard_normal((n, 2, 3, 3))
    assert fd_check(lambda z: cyclic_stack(z, kind), lambda g: cyclic_stack_backward(g, kind), x, rng) <= 1e-6
    assert fd_check(lambda z: cyclic_roll(z, kind), lambda g: cyclic_roll_backward(g, kind), x, rng) <= 1e-6
