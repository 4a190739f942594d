"""Slice, pool, stack and roll over pathway batches, with their adjoints.

A sliced batch of ``N0`` examples has ``|G| * N0`` rows stored block-major:
rows ``p*N0 .. (p+1)*N0`` form the pathway of group element ``g_p`` (in
:func:`cyclicnet.group.elements` order). Every function here takes the group
kind explicitly; the caller is responsible for only pooling, stacking or
rolling batches that actually came out of a slice.
"""

import numpy as np

from cyclicnet import group as G
from cyclicnet.tensor import concat_batch, concat_channel, split_batch, split_channel

POOL_FUNCTIONS = ("mean", "max", "rms")


def _blocks(x, kind):
    n = G.order(kind)
    if x.shape[0] % n:
        raise ValueError(f"batch of {x.shape[0]} rows cannot hold {n} pathways of {kind}")
    return split_batch(x, n)


def _require_square(x, what):
    if x.shape[2] != x.shape[3]:
        raise ValueError(f"{what} needs square feature maps, got {x.shape[2]}x{x.shape[3]}")


def cyclic_slice(x, kind=G.C4):
    """Stack ``g(x)`` for every group element along the batch axis."""
    _require_square(x, "slice")
    return concat_batch([G.apply(g, x) for g in G.elements(kind)])


def cyclic_slice_backward(grad, kind=G.C4):
    blocks = _blocks(grad, kind)
    out = np.zeros_like(blocks[0])
    for g, b in zip(G.elements(kind), blocks):
        out += G.apply(g.inverse, b)
    return out


def _realigned(x, kind, realign):
    blocks = _blocks(x, kind)
    if not realign:
        return blocks
    _require_square(x, "realigning pool")
    return [G.apply(g.inverse, b) for g, b in zip(G.elements(kind), blocks)]


def cyclic_pool(x, kind=G.C4, function="mean", pre_relu=False, realign=True):
    """Reduce the pathways with a permutation-invariant function.

    With ``realign`` each block is first rotated back by ``g_p^-1``; without it
    the blocks are pooled as they are (for dense features). Returns
    ``(output, cache)``.
    """
    if function not in POOL_FUNCTIONS:
        raise ValueError(f"unknown pool function {function!r}; expected one of {POOL_FUNCTIONS}")
    z = np.stack(_realigned(x, kind, realign))
    mask = None
    if pre_relu:
        mask = z > 0
        z = z * mask
    if function == "mean":
        y = z.mean(axis=0)
    elif function == "max":
        y = z.max(axis=0)
    else:
        y = np.sqrt((z * z).mean(axis=0))
    cache = (kind, function, realign, z, y, mask)
    return y, cache


def cyclic_pool_backward(cache, grad):
    kind, function, realign, z, y, mask = cache
    n = z.shape[0]
    if function == "mean":
        dz = np.broadcast_to(grad / n, z.shape).copy()
    elif function == "max":
        # ties go to the lowest pathway index (np.argmax returns the first)
        winner = z.argmax(axis=0)
        dz = np.zeros_like(z)
        np.put_along_axis(dz, winner[None], grad[None], axis=0)
    else:
        safe = np.where(y > 0, y, 1.0)
        dz = np.where(y > 0, grad * z / (n * safe), 0.0)
    if mask is not None:
        dz = dz * mask
    elements = G.elements(kind)
    if realign:
        blocks = [G.apply(g, dz[p]) for p, g in enumerate(elements)]
    else:
        blocks = list(dz)
    return concat_batch(blocks)


def cyclic_stack(x, kind=G.C4):
    """Realign every pathway and concatenate them along channels."""
    _require_square(x, "stack")
    return concat_channel(_realigned(x, kind, True))


def cyclic_stack_backward(grad, kind=G.C4):
    n = G.order(kind)
    parts = split_channel(grad, n)
    return concat_batch([G.apply(g, part) for g, part in zip(G.elements(kind), parts)])


def roll_sources(kind):
    """``src[a, b]``: input pathway feeding channel block ``b`` of output pathway ``a``.

    Block ``b`` of pathway ``g_a`` is ``h_b^-1`` applied to pathway ``h_b g_a``.
    """
    els = G.elements(kind)
    return np.array([[G.compose(h, g).index for h in els] for g in els])


def cyclic_roll(x, kind=G.C4):
    """Stack realigned copies of every pathway into every pathway."""
    _require_square(x, "roll")
    blocks = _blocks(x, kind)
    els = G.elements(kind)
    src = roll_sources(kind)
    rows = [concat_channel([G.apply(h.inverse, blocks[src[a, b]]) for b, h in enumerate(els)])
            for a in range(len(els))]
    return concat_batch(rows)


def cyclic_roll_backward(grad, kind=G.C4):
    els = G.elements(kind)
    src = roll_sources(kind)
    rows = _blocks(grad, kind)
    out = [np.zeros_like(split_channel(rows[0], len(els))[0]) for _ in els]
    for a, row in enumerate(rows):
        for b, (h, part) in enumerate(zip(els, split_channel(row, len(els)))):
            out[src[a, b]] += G.apply(h, part)
    return concat_batch(out)
