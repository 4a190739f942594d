"""Forward and backward kernels for the standard layers.

Convolution is cross-correlation computed through an im2col matrix product.
Every forward returns ``(output, cache)``; the matching backward consumes the
cache.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_padding(kernel, padding):
    if padding == "valid":
        return 0
    if padding == "same":
        if kernel % 2 == 0:
            raise ValueError(f"'same' padding needs an odd kernel, got {kernel}")
        return (kernel - 1) // 2
    raise ValueError(f"unknown padding {padding!r}")


def conv2d_forward(x, weight, bias=None, padding="same"):
    n, c, h, w = x.shape
    f, c_in, k, k2 = weight.shape
    if k != k2:
        raise ValueError(f"kernels must be square, got {k}x{k2}")
    if c != c_in:
        raise ValueError(f"input has {c} channels but the kernel expects {c_in}")
    pad = conv_padding(k, padding)
    if h + 2 * pad < k or w + 2 * pad < k:
        raise ValueError(f"{k}x{k} kernel does not fit a {h}x{w} input with {padding!r} padding")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    ho, wo = xp.shape[2] - k + 1, xp.shape[3] - k + 1
    cols = sliding_window_view(xp, (k, k), axis=(2, 3)).transpose(0, 2, 3, 1, 4, 5)
    cols = cols.reshape(n * ho * wo, c * k * k)
    out = cols @ weight.reshape(f, -1).T
    if bias is not None:
        out += bias
    out = np.ascontiguousarray(out.reshape(n, ho, wo, f).transpose(0, 3, 1, 2))
    return out, (x.shape, pad, cols, weight)


def conv2d_backward(cache, grad):
    (n, c, h, w), pad, cols, weight = cache
    f, _, k, _ = weight.shape
    ho, wo = grad.shape[2], grad.shape[3]
    g2 = grad.transpose(0, 2, 3, 1).reshape(-1, f)
    grad_w = (g2.T @ cols).reshape(weight.shape)
    grad_b = g2.sum(axis=0)
    gcols = (g2 @ weight.reshape(f, -1)).reshape(n, ho, wo, c, k, k)
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=grad.dtype)
    for u in range(k):
        for v in range(k):
            dxp[:, :, u:u + ho, v:v + wo] += gcols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
    grad_x = dxp[:, :, pad:pad + h, pad:pad + w] if pad else dxp
    return np.ascontiguousarray(grad_x), grad_w, grad_b


def dense_forward(x, weight, bias=None):
    """``x`` is (N, F, 1, 1); ``weight`` is (out, F)."""
    n, f = x.shape[0], x.shape[1]
    if x.shape[2:] != (1, 1):
        raise ValueError(f"dense layers take flattened (N, F, 1, 1) input, got {x.shape}")
    if weight.shape[1] != f:
        raise ValueError(f"input has {f} features but the weight expects {weight.shape[1]}")
    flat = x.reshape(n, f)
    out = flat @ weight.T
    if bias is not None:
        out += bias
    return out.reshape(n, -1, 1, 1), (flat, weight)


def dense_backward(cache, grad):
    flat, weight = cache
    g2 = grad.reshape(grad.shape[0], -1)
    grad_x = (g2 @ weight).reshape(flat.shape[0], flat.shape[1], 1, 1)
    return grad_x, g2.T @ flat, g2.sum(axis=0)


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(mask, grad):
    return grad * mask


def maxpool2d_forward(x, window=2, stride=2):
    n, c, h, w = x.shape
    if window > h or window > w:
        raise ValueError(f"pool window {window} exceeds {h}x{w} feature maps")
    win = sliding_window_view(x, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = win.shape[2], win.shape[3]
    win = win.reshape(n, c, ho, wo, window * window)
    # argmax takes the first maximum in row-major window order
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), (x.shape, window, stride, arg)


def maxpool2d_backward(cache, grad):
    shape, window, stride, arg = cache
    ho, wo = arg.shape[2], arg.shape[3]
    dx = np.zeros(shape, dtype=grad.dtype)
    for u in range(window):
        for v in range(window):
            hit = arg == u * window + v
            dx[:, :, u:u + stride * (ho - 1) + 1:stride, v:v + stride * (wo - 1) + 1:stride] += grad * hit
    return dx


def flatten_forward(x):
    return x.reshape(x.shape[0], -1, 1, 1), x.shape


def flatten_backward(shape, grad):
    return grad.reshape(shape)
