"""Slow reference computations to check the fast paths against.

Nothing here is used for training. The naive convolution is written from the
textbook index formula and shares no code with :mod:`cyclicnet.nn`.
"""

from dataclasses import dataclass, field

import numpy as np

from cyclicnet import group as G
from cyclicnet.cyclic import cyclic_slice, cyclic_stack
from cyclicnet.nn.functional import conv2d_forward

INVARIANT = "invariant"
SAME_EQUIVARIANT = "same-equivariant"
MODES = (INVARIANT, SAME_EQUIVARIANT)


def naive_conv2d(x, weight, bias=None, padding="same"):
    """Direct loop evaluation of a stride-1 cross-correlation with zero padding."""
    n_batch, n_in, h, w = x.shape
    n_out, c_in, kh, kw = weight.shape
    if c_in != n_in:
        raise ValueError(f"input has {n_in} channels but the kernel expects {c_in}")
    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError("'same' padding needs an odd kernel")
        top, left = kh // 2, kw // 2
        out_h, out_w = h, w
    elif padding == "valid":
        top = left = 0
        out_h, out_w = h - kh + 1, w - kw + 1
        if out_h < 1 or out_w < 1:
            raise ValueError("kernel larger than input")
    else:
        raise ValueError(f"unknown padding {padding!r}")
    out = np.zeros((n_batch, n_out, out_h, out_w), dtype=np.result_type(x, weight))
    for n in range(n_batch):
        for f in range(n_out):
            for i in range(out_h):
                for j in range(out_w):
                    acc = 0.0 if bias is None else float(bias[f])
                    for c in range(n_in):
                        for u in range(kh):
                            for v in range(kw):
                                row, col = i + u - top, j + v - left
                                if 0 <= row < h and 0 <= col < w:
                                    acc += x[n, c, row, col] * weight[f, c, u, v]
                    out[n, f, i, j] = acc
    return out


def finite_diff_grad(f, x, h=1e-5):
    """Central-difference gradient of the scalar function ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(x)
        flat[i] = orig - h
        down = f(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return grad


def relative_error(a, b):
    """Largest elementwise ``|a - b| / max(|a|, |b|, 1e-8)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


@dataclass
class EquivarianceReport:
    group: str
    mode: str
    tolerance: float
    deviations: dict = field(default_factory=dict)

    @property
    def max_deviation(self):
        return max(self.deviations.values(), default=0.0)

    @property
    def passed(self):
        return self.max_deviation <= self.tolerance

    def to_dict(self):
        return {"group": self.group, "mode": self.mode, "tolerance": self.tolerance,
                "deviations": dict(self.deviations), "max_deviation": self.max_deviation,
                "passed": self.passed}


def _max_abs(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.size(a) else 0.0


def check_filter_rotation_equivalence(x, weight, kind=G.C4, tolerance=1e-12):
    """Check that transforming the filter equals inversely transforming the input.

    For each element ``g`` two identities are checked:

    * ``g^-1 (x * g w) == (g^-1 x) * w``
    * channel block ``p`` of ``stack(conv(slice(x), w))`` equals ``x * g_p^-1 w``,
      i.e. four (eight) transformed filters on the unchanged input.
    """
    if x.shape[2] != x.shape[3]:
        raise ValueError("filter rotation check needs square inputs")
    if weight.shape[2] != weight.shape[3]:
        raise ValueError("filter rotation check needs square kernels")
    report = EquivarianceReport(kind, "filter-rotation", tolerance)
    els = G.elements(kind)
    pathway, _ = conv2d_forward(cyclic_slice(x, kind), weight)
    stacked = np.split(cyclic_stack(pathway, kind), len(els), axis=1)
    for p, g in enumerate(els):
        lhs = G.apply(g.inverse, conv2d_forward(x, G.apply(g, weight))[0])
        rhs = conv2d_forward(G.apply(g.inverse, x), weight)[0]
        family = conv2d_forward(x, G.apply(g.inverse, weight))[0]
        report.deviations[repr(g)] = max(_max_abs(lhs, rhs), _max_abs(stacked[p], family))
    return report


def check_model_equivariance(model, input_shape, kind=G.C4, mode=INVARIANT, trials=10,
                             tolerance=1e-5, rng=None, dtype=np.float64):
    """Run ``model`` on transformed random inputs and record the worst deviation per element.

    ``model`` maps an (N, C, H, W) array to an array. Invariant mode compares
    ``f(g x)`` with ``f(x)``; same-equivariant mode compares it with ``g f(x)``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    rng = np.random.default_rng(rng)
    x = rng.standard_normal((trials, *input_shape)).astype(dtype)
    base = model(x)
    report = EquivarianceReport(kind, mode, tolerance)
    for g in G.elements(kind):
        out = model(G.apply(g, x))
        expected = base if mode == INVARIANT else G.apply(g, base)
        report.deviations[repr(g)] = _max_abs(out, expected)
    return report
