"""The cyclic group C4 and the dihedral group D4 acting on square images.

Elements are written ``g = r^k f^m``: flip the columns first (if ``m == 1``),
then rotate clockwise ``k`` quarter turns. The product law follows from
``f r = r^-1 f``::

    (m1, k1) * (m2, k2) = (m1 ^ m2, (k1 + (-1)**m1 * k2) % 4)
"""

from dataclasses import dataclass

import numpy as np

from cyclicnet.tensor import fliph, rotate90

C4 = "c4"
D4 = "d4"
KINDS = (C4, D4)


def check_kind(kind):
    kind = str(kind).lower()
    if kind not in KINDS:
        raise ValueError(f"unknown group {kind!r}; expected one of {KINDS}")
    return kind


@dataclass(frozen=True)
class GroupElement:
    rot: int = 0
    flip: int = 0
    kind: str = C4

    def __post_init__(self):
        object.__setattr__(self, "kind", check_kind(self.kind))
        object.__setattr__(self, "rot", int(self.rot) % 4)
        if self.flip not in (0, 1):
            raise ValueError(f"flip must be 0 or 1, got {self.flip!r}")
        if self.kind == C4 and self.flip:
            raise ValueError("C4 elements cannot flip")

    def __mul__(self, other):
        return compose(self, other)

    @property
    def inverse(self):
        return inverse(self)

    @property
    def index(self):
        """Position in :func:`elements` order (m-major)."""
        return 4 * self.flip + self.rot

    def __call__(self, x):
        return apply(self, x)

    def __repr__(self):
        if self.kind == C4:
            return f"r^{self.rot}"
        return f"r^{self.rot}f^{self.flip}"


def order(kind):
    return 4 if check_kind(kind) == C4 else 8


def elements(kind):
    """All elements in the fixed enumeration order used for pathway layouts."""
    kind = check_kind(kind)
    flips = (0,) if kind == C4 else (0, 1)
    return [GroupElement(k, m, kind) for m in flips for k in range(4)]


def identity(kind):
    return GroupElement(0, 0, kind)


def compose(g1, g2):
    if g1.kind != g2.kind:
        raise ValueError(f"cannot compose elements of {g1.kind} and {g2.kind}")
    sign = -1 if g1.flip else 1
    return GroupElement((g1.rot + sign * g2.rot) % 4, g1.flip ^ g2.flip, g1.kind)


def inverse(g):
    # (r^k f)^-1 = f r^-k = r^k f, so reflections are involutions
    if g.flip:
        return g
    return GroupElement(-g.rot % 4, 0, g.kind)


def apply(g, x):
    """Act on the spatial axes of a 4-D array: ``r^k(f^m(x))``."""
    if g.rot % 2 and x.shape[2] != x.shape[3]:
        raise ValueError(f"odd rotations need square feature maps, got {x.shape[2]}x{x.shape[3]}")
    if g.flip:
        x = fliph(x)
    return rotate90(x, g.rot)


def slice_permutation(g):
    """Pathway reordering induced on a sliced batch when the input is transformed by ``g``.

    Returns an index array ``perm`` with ``slice(g x)[p] == slice(x)[perm[p]]``:
    the block for ``h`` in ``slice(g x)`` holds ``(h g)(x)``. For C4 and ``g = r``
    this is the backward shift ``[1, 2, 3, 0]``.
    """
    return np.array([compose(h, g).index for h in elements(g.kind)])


def cayley_table(kind):
    """``table[i, j]`` is the index of ``elements[i] * elements[j]``."""
    els = elements(kind)
    return np.array([[compose(a, b).index for b in els] for a in els])
