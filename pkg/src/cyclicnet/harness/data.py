"""Synthetic images whose class does not change under quarter turns.

Each class owns a random binary motif. An example is Gaussian noise with its
class motif added at a random quarter-turn orientation and a random position.
Rotating an image by any multiple of 90 degrees gives another valid image of
the same class, so the label is invariant by construction.

With ``placement="upper"`` the motif only ever lands in the top half of the
canvas. Rotated copies then put it where training never did, which exposes
models whose invariance was learned rather than built in.
"""

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from cyclicnet.tensor import load_tensor, rotate90, save_tensor

PLACEMENTS = ("anywhere", "upper")
SPLITS = ("train", "val", "test")


@dataclass
class SyntheticTaskSpec:
    image_size: int = 16
    n_classes: int = 4
    n_train: int = 2000
    n_val: int = 500
    n_test: int = 500
    noise: float = 0.5
    motif_size: int = 5
    placement: str = "upper"
    seed: int = 0

    def validate(self):
        if self.motif_size < 1 or self.image_size < self.motif_size:
            raise ValueError(f"image_size {self.image_size} must be at least motif_size {self.motif_size}")
        if self.placement not in PLACEMENTS:
            raise ValueError(f"placement must be one of {PLACEMENTS}")
        if self.placement == "upper" and self.image_size // 2 < self.motif_size:
            raise ValueError("upper placement needs motif_size <= image_size // 2")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if min(self.n_train, self.n_val, self.n_test) < 0:
            raise ValueError("split sizes must be non-negative")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")


@dataclass
class Dataset:
    spec: SyntheticTaskSpec
    motifs: np.ndarray
    X_train: np.ndarray
    y_train: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray

    def test_rotations(self):
        """The test split turned by 0, 1, 2 and 3 quarter turns (same labels)."""
        return [rotate90(self.X_test, k) for k in range(4)]

    def split(self, name):
        return getattr(self, f"X_{name}"), getattr(self, f"y_{name}")


def _motifs(rng, n_classes, size):
    """Distinct binary motifs; no motif is a rotation of another."""
    motifs = []
    while len(motifs) < n_classes:
        m = (rng.random((size, size)) < 0.5).astype(np.float64)
        if m.sum() == 0:
            continue
        rotations = [np.rot90(m, k) for k in range(4)]
        if any(np.array_equal(r, other) for r in rotations for other in motifs):
            continue
        motifs.append(m)
    return np.stack(motifs)


def _sample(rng, spec, motifs, n):
    s, m = spec.image_size, spec.motif_size
    labels = np.arange(n) % spec.n_classes
    rng.shuffle(labels)
    images = spec.noise * rng.standard_normal((n, 1, s, s))
    max_row = (s // 2 if spec.placement == "upper" else s) - m
    rows = rng.integers(0, max_row + 1, size=n)
    cols = rng.integers(0, s - m + 1, size=n)
    turns = rng.integers(0, 4, size=n)
    for i in range(n):
        motif = rotate90(motifs[labels[i]][None, None], turns[i])[0, 0]
        images[i, 0, rows[i]:rows[i] + m, cols[i]:cols[i] + m] += motif
    return images, labels


def generate_dataset(spec):
    """Deterministic train/val/test splits for ``spec``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    motifs = _motifs(rng, spec.n_classes, spec.motif_size)
    parts = [_sample(rng, spec, motifs, n) for n in (spec.n_train, spec.n_val, spec.n_test)]
    (xt, yt), (xv, yv), (xs, ys) = parts
    return Dataset(spec, motifs, xt, yt, xv, yv, xs, ys)


def _labels_tensor(y):
    return np.asarray(y, dtype=np.float64).reshape(-1, 1, 1, 1)


def save_dataset(data, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "spec.json"), "w") as fp:
        json.dump(asdict(data.spec), fp, indent=2, sort_keys=True)
        fp.write("\n")
    for name in SPLITS:
        x, y = data.split(name)
        save_tensor(os.path.join(out_dir, f"{name}_x.t4d"), x)
        save_tensor(os.path.join(out_dir, f"{name}_y.t4d"), _labels_tensor(y))
    for k, xr in enumerate(data.test_rotations()):
        if k:
            save_tensor(os.path.join(out_dir, f"test_rot{k}_x.t4d"), xr)
    save_tensor(os.path.join(out_dir, "motifs.t4d"), data.motifs[:, None])


def load_dataset(path):
    with open(os.path.join(path, "spec.json")) as fp:
        spec = SyntheticTaskSpec(**json.load(fp))
    arrays = {}
    for name in SPLITS:
        arrays[f"X_{name}"] = load_tensor(os.path.join(path, f"{name}_x.t4d"))
        arrays[f"y_{name}"] = load_tensor(os.path.join(path, f"{name}_y.t4d")).reshape(-1).astype(np.int64)
    motifs = load_tensor(os.path.join(path, "motifs.t4d"))[:, 0]
    return Dataset(spec, motifs, **arrays)
