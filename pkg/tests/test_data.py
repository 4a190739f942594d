import numpy as np
import pytest

from cyclicnet.harness.data import SyntheticTaskSpec, generate_dataset, load_dataset, save_dataset
from cyclicnet.tensor import rotate90

SMALL = SyntheticTaskSpec(image_size=10, n_classes=3, n_train=31, n_val=10, n_test=11, motif_size=3, seed=5)


def test_same_seed_same_bytes():
    a, b = generate_dataset(SMALL), generate_dataset(SMALL)
    for name in ("train", "val", "test"):
        assert a.split(name)[0].tobytes() == b.split(name)[0].tobytes()
        assert a.split(name)[1].tobytes() == b.split(name)[1].tobytes()
    c = generate_dataset(SyntheticTaskSpec(**{**SMALL.__dict__, "seed": 6}))
    assert c.X_train.tobytes() != a.X_train.tobytes()


@pytest.mark.parametrize("n", [31, 10, 11])
def test_class_balance(n):
    spec = SyntheticTaskSpec(**{**SMALL.__dict__, "n_train": n})
    counts = np.bincount(generate_dataset(spec).y_train, minlength=spec.n_classes)
    assert counts.max() - counts.min() <= 1


def test_label_is_rotation_invariant():
    # every rotated image is explained by its own class motif, rotated: the
    # noiseless image minus that motif at some quarter turn and offset is zero
    spec = SyntheticTaskSpec(**{**SMALL.__dict__, "noise": 0.0})
    data = generate_dataset(spec)
    m = spec.motif_size
    for k in range(4):
        xr = rotate90(data.X_test, k)
        for img, label in zip(xr[:, 0], data.y_test):
            hits = set()
            for c, motif in enumerate(data.motifs):
                for t in range(4):
                    rm = np.rot90(motif, -t)
                    for i in range(img.shape[0] - m + 1):
                        for j in range(img.shape[1] - m + 1):
                            canvas = np.zeros_like(img)
                            canvas[i:i + m, j:j + m] = rm
                            if np.array_equal(canvas, img):
                                hits.add(c)
            assert hits == {label}


def test_motifs_are_rotation_distinct():
    data = generate_dataset(SyntheticTaskSpec(n_classes=6, motif_size=3, n_train=0, n_val=0, n_test=0))
    for a in range(6):
        for b in range(a + 1, 6):
            assert not any(np.array_equal(np.rot90(data.motifs[a], k), data.motifs[b]) for k in range(4))


def test_upper_placement_uses_top_half():
    spec = SyntheticTaskSpec(**{**SMALL.__dict__, "noise": 0.0, "placement": "upper"})
    x = generate_dataset(spec).X_train
    assert not x[:, :, spec.image_size // 2:].any()


def test_save_load_round_trip(tmp_path):
    data = generate_dataset(SMALL)
    save_dataset(data, tmp_path)
    back = load_dataset(tmp_path)
    assert back.spec == SMALL
    for name in ("train", "val", "test"):
        np.testing.assert_array_equal(back.split(name)[0], data.split(name)[0])
        np.testing.assert_array_equal(back.split(name)[1], data.split(name)[1])
    assert (tmp_path / "test_rot3_x.t4d").exists()


@pytest.mark.parametrize("bad", [
    {"motif_size": 12}, {"placement": "left"}, {"n_classes": 1}, {"noise": -1.0}, {"motif_size": 6},
])
def test_invalid_specs(bad):
    with pytest.raises(ValueError):
        generate_dataset(SyntheticTaskSpec(**{**SMALL.__dict__, **bad}))
