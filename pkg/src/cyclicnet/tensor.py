"""Dense (N, C, H, W) arrays and the interpolation-free spatial transforms.

A "Tensor4" is a plain C-contiguous ``numpy.ndarray`` with four axes. All
transforms here are pure permutations of the buffer: they never change
values, only where they live.
"""

import struct

import numpy as np

_DTYPES = {"float32": np.float32, "float64": np.float64}
_default_dtype = np.float64

MAGIC = b"T4D1"
_DTYPE_CODES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


def set_default_dtype(dtype):
    """Set the run-wide float type used by :func:`as_tensor4`."""
    global _default_dtype
    _default_dtype = resolve_dtype(dtype)


def get_default_dtype():
    return _default_dtype


def resolve_dtype(dtype):
    if isinstance(dtype, str):
        if dtype not in _DTYPES:
            raise ValueError(f"unsupported dtype {dtype!r}; use float32 or float64")
        return _DTYPES[dtype]
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype!r}; use float32 or float64")
    return dtype


def as_tensor4(x, dtype=None):
    """Return ``x`` as a C-contiguous 4-D float array."""
    x = np.asarray(x)
    if x.ndim != 4:
        raise ValueError(f"expected a 4-D (N, C, H, W) array, got shape {x.shape}")
    return np.ascontiguousarray(x, dtype=resolve_dtype(dtype or _default_dtype))


def rotate90(x, k=1):
    """Rotate the spatial axes clockwise by ``k`` quarter turns.

    ``(r x)[n, c, i, j] == x[n, c, H - 1 - j, i]``.
    """
    k %= 4
    if k == 0:
        return x.copy()
    if k == 2:
        return np.ascontiguousarray(x[:, :, ::-1, ::-1])
    if k == 1:
        return np.ascontiguousarray(x[:, :, ::-1, :].transpose(0, 1, 3, 2))
    return np.ascontiguousarray(x.transpose(0, 1, 3, 2)[:, :, ::-1, :])


def fliph(x):
    """Mirror the columns: ``(f x)[n, c, i, j] == x[n, c, i, W - 1 - j]``."""
    return np.ascontiguousarray(x[:, :, :, ::-1])


def _check_concat(xs, axis):
    if not xs:
        raise ValueError("nothing to concatenate")
    ref = xs[0].shape
    for x in xs:
        if x.ndim != 4:
            raise ValueError(f"expected 4-D arrays, got shape {x.shape}")
        other = tuple(s for a, s in enumerate(x.shape) if a != axis)
        if other != tuple(s for a, s in enumerate(ref) if a != axis):
            raise ValueError(f"shape mismatch: {x.shape} vs {ref} outside axis {axis}")


def concat_batch(xs):
    _check_concat(xs, 0)
    return np.concatenate(xs, axis=0)


def concat_channel(xs):
    _check_concat(xs, 1)
    return np.concatenate(xs, axis=1)


def _split(x, sizes, axis):
    if isinstance(sizes, int):
        if x.shape[axis] % sizes:
            raise ValueError(f"axis {axis} of size {x.shape[axis]} is not divisible into {sizes} blocks")
        sizes = [x.shape[axis] // sizes] * sizes
    if sum(sizes) != x.shape[axis]:
        raise ValueError(f"block sizes {list(sizes)} do not sum to {x.shape[axis]}")
    bounds = np.cumsum(sizes)[:-1]
    return [np.ascontiguousarray(b) for b in np.split(x, bounds, axis=axis)]


def split_batch(x, sizes):
    """Split along the batch axis into ``sizes`` equal blocks (int) or the given block sizes."""
    return _split(x, sizes, 0)


def split_channel(x, sizes):
    return _split(x, sizes, 1)


def write_tensor(fp, x):
    """Write ``x`` in the little-endian ``T4D1`` golden-tensor format."""
    x = np.asarray(x)
    if x.ndim != 4:
        raise ValueError(f"only 4-D arrays can be dumped, got shape {x.shape}")
    code = x.dtype.itemsize
    if x.dtype.kind != "f" or code not in _DTYPE_CODES:
        raise ValueError(f"unsupported dtype {x.dtype}")
    fp.write(MAGIC)
    fp.write(struct.pack("<4I", *x.shape))
    fp.write(struct.pack("<B", code))
    fp.write(np.ascontiguousarray(x, dtype=_DTYPE_CODES[code]).tobytes())


def read_tensor(fp):
    magic = fp.read(4)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    dims = struct.unpack("<4I", fp.read(16))
    (code,) = struct.unpack("<B", fp.read(1))
    if code not in _DTYPE_CODES:
        raise ValueError(f"unknown dtype code {code}")
    dtype = _DTYPE_CODES[code]
    count = int(np.prod(dims))
    buf = fp.read(count * dtype.itemsize)
    if len(buf) != count * dtype.itemsize:
        raise ValueError("truncated tensor buffer")
    return np.frombuffer(buf, dtype=dtype).astype(dtype.newbyteorder("="), copy=True).reshape(dims)


def save_tensor(path, x):
    with open(path, "wb") as fp:
        write_tensor(fp, x)


def load_tensor(path):
    with open(path, "rb") as fp:
        return read_tensor(fp)
