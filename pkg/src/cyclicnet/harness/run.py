import csv
import io
import json
import os

import numpy as np

from cyclicnet.estimator import CyclicCNNClassifier, CyclicCNNRegressor
from cyclicnet.harness.data import Dataset, generate_dataset, load_dataset

METRICS_HEADER = ("epoch", "split", "loss", "accuracy")


def make_estimator(run):
    cls = CyclicCNNClassifier if run.model.loss == "ce" else CyclicCNNRegressor
    t = run.train
    return cls(layers=run.model.layers, epochs=t.epochs, batch_size=t.batch_size,
               learning_rate=t.learning_rate, beta1=t.beta1, beta2=t.beta2, epsilon=t.epsilon,
               milestones=tuple(t.milestones), augment=t.augment, dtype=run.model.dtype,
               random_state=t.seed)


def load_data(run):
    if isinstance(run.data, dict):
        return load_dataset(run.data["path"])
    return generate_dataset(run.data)


def _targets(estimator, labels, n_classes):
    if isinstance(estimator, CyclicCNNRegressor):
        return np.eye(n_classes)[labels]
    return labels


def format_metrics_row(row):
    return f"{row['epoch']},{row['split']},{float(row['loss'])!r},{float(row['accuracy'])!r}\n"


def train(run, out_dir, data=None):
    """Train ``run`` and write ``metrics.csv``, ``config.json`` and ``checkpoint/`` into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    data = data if data is not None else load_data(run)
    est = make_estimator(run)
    k = data.spec.n_classes
    with open(os.path.join(out_dir, "config.json"), "w") as fp:
        json.dump(run.to_dict(), fp, indent=2, sort_keys=True)
        fp.write("\n")
    with open(os.path.join(out_dir, "metrics.csv"), "w") as fp:
        fp.write(",".join(METRICS_HEADER) + "\n")
        fp.flush()

        def log(row):
            fp.write(format_metrics_row(row))
            fp.flush()

        est.fit(data.X_train, _targets(est, data.y_train, k),
                data.X_val, _targets(est, data.y_val, k), callback=log)
    est.save(os.path.join(out_dir, "checkpoint"))
    return est


def evaluate(estimator, data, tta=False):
    """Metrics on the test split and on its three rotated copies."""
    if not isinstance(data, Dataset):
        data = load_dataset(data)
    y = _targets(estimator, data.y_test, data.spec.n_classes)
    results = {}
    for k, xr in enumerate(data.test_rotations()):
        name = "test" if k == 0 else f"test_rot{k}"
        results[name] = estimator.evaluate(xr, y, tta=tta)
    return results


def load_estimator(checkpoint_dir):
    with open(os.path.join(checkpoint_dir, "manifest.json")) as fp:
        loss = json.load(fp)["model"]["loss"]
    cls = CyclicCNNClassifier if loss == "ce" else CyclicCNNRegressor
    return cls.from_checkpoint(checkpoint_dir)


def read_metrics(path):
    with open(path, newline="") as fp:
        reader = csv.DictReader(fp)
        if tuple(reader.fieldnames or ()) != METRICS_HEADER:
            raise ValueError(f"{path}: unexpected metrics header {reader.fieldnames}")
        return [{"epoch": int(r["epoch"]), "split": r["split"], "loss": float(r["loss"]),
                 "accuracy": float(r["accuracy"])} for r in reader]


def params_csv(spec):
    """Per-layer parameter table (CSV text) with a trailing total row."""
    rows = spec.build().count_params()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "kind", "in_channels", "weights", "biases", "total"])
    for r in rows:
        writer.writerow([r["index"], r["kind"], r["in_channels"], r["weights"], r["biases"], r["total"]])
    writer.writerow(["", "total", "", sum(r["weights"] for r in rows),
                     sum(r["biases"] for r in rows), sum(r["total"] for r in rows)])
    return buf.getvalue()
