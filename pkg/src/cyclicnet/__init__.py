"""Convolutional networks with built-in cyclic (C4) and dihedral (D4) symmetry.

The four pathway layers (slice, pool, stack, roll) share filters across the
orientations of the input so that the network is invariant or equivariant to
quarter turns (and flips) by construction.
"""

from cyclicnet import group
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
from cyclicnet.estimator import CyclicCNNClassifier, CyclicCNNRegressor, NumericalError, check_images
from cyclicnet.group import GroupElement
from cyclicnet.tensor import fliph, load_tensor, rotate90, save_tensor

__version__ = "0.1.0"
