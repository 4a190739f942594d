"""scikit-learn style estimators wrapping a layer stack.

The architecture is a list of layer dicts in the same format as the ``model``
section of a run config, so estimators clone, grid-search and pickle like any
other scikit-learn estimator::

    clf = CyclicCNNClassifier(layers=[
        {"kind": "slice"},
        {"kind": "conv", "filters": 8}, {"kind": "relu"},
        {"kind": "flatten"}, {"kind": "dense", "units": 4},
        {"kind": "pool", "realign": False},
    ])
    clf.fit(X, y).predict(X)
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from cyclicnet import group as G
from cyclicnet.nn.losses import rmse, softmax, softmax_cross_entropy
from cyclicnet.nn.network import Tape
from cyclicnet.nn.optim import AdamState, adam_step, lr_schedule
from cyclicnet.tensor import resolve_dtype, rotate90

PREDICT_CHUNK = 256


class NumericalError(FloatingPointError):
    """Training produced a non-finite loss."""


def check_images(X, dtype=np.float64):
    """Validate an image batch and return it as (N, C, H, W).

    Accepts (N, H, W) single-channel batches as well.
    """
    X = check_array(X, allow_nd=True, ensure_2d=False, dtype=resolve_dtype(dtype))
    if X.ndim == 3:
        X = X[:, None]
    if X.ndim != 4:
        raise ValueError(f"expected images of shape (N, H, W) or (N, C, H, W), got {X.shape}")
    return np.ascontiguousarray(X)


def _augment(X, rng):
    """Rotate each example by an independent random multiple of 90 degrees."""
    turns = rng.integers(0, 4, size=X.shape[0])
    out = X.copy()
    for k in range(1, 4):
        sel = turns == k
        if sel.any():
            out[sel] = rotate90(X[sel], k)
    return out


class _CyclicCNNBase(BaseEstimator):
    _loss = None

    def __init__(self, layers=None, epochs=10, batch_size=32, learning_rate=1e-3, beta1=0.9,
                 beta2=0.999, epsilon=1e-8, milestones=(), augment=False, tta=False,
                 dtype="float64", random_state=0):
        self.layers = layers
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.milestones = milestones
        self.augment = augment
        self.tta = tta
        self.dtype = dtype
        self.random_state = random_state

    def _build(self, input_shape):
        from cyclicnet.harness.config import parse_model

        if not self.layers:
            raise ValueError("layers must be a non-empty list of layer configs")
        doc = {"input_shape": list(input_shape), "layers": list(self.layers),
               "loss": self._loss, "dtype": self.dtype}
        return parse_model(doc)

    def fit(self, X, y, X_val=None, y_val=None, callback=None):
        """Train from scratch.

        ``callback(row)`` is called with each metrics row (``epoch``, ``split``,
        ``loss``, ``accuracy``) as soon as it is available.
        """
        X = check_images(X, self.dtype)
        target = self._encode_fit_targets(y, X.shape[0])
        self.model_spec_ = self._build(X.shape[1:])
        rng = np.random.default_rng(self.random_state)
        self.network_ = self.model_spec_.build(rng)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        self.history_ = []
        val = None
        if X_val is not None:
            val = (check_images(X_val, self.dtype), self._encode_targets(y_val))

        state = AdamState(self.learning_rate, self.beta1, self.beta2, self.epsilon)
        net = self.network_
        params = net.named_params()
        n = X.shape[0]
        for epoch in range(self.epochs):
            state.lr = lr_schedule(epoch, self.learning_rate, self.milestones)
            order = rng.permutation(n)
            loss_sum, correct = 0.0, 0
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                xb = _augment(X[idx], rng) if self.augment else X[idx]
                tape = Tape()
                out = net.forward(xb, tape)
                loss, grad, hits = self._objective(out, target[idx])
                if not np.isfinite(loss):
                    raise NumericalError(f"non-finite loss {loss} at epoch {epoch + 1}, batch starting {start}")
                _, grads = net.backward(tape, grad)
                adam_step(params, net.named_grads(grads), state)
                loss_sum += loss * len(idx)
                correct += hits
            self._log({"epoch": epoch + 1, "split": "train", "loss": loss_sum / n,
                       "accuracy": correct / n if self._has_accuracy(target) else float("nan")}, callback)
            if val is not None:
                metrics = self._evaluate_encoded(*val)
                self._log({"epoch": epoch + 1, "split": "val", **metrics}, callback)
        return self

    def _log(self, row, callback):
        self.history_.append(row)
        if callback is not None:
            callback(row)

    def _forward(self, X):
        net = self.network_
        chunks = [net.forward(X[i:i + PREDICT_CHUNK]) for i in range(0, X.shape[0], PREDICT_CHUNK)]
        if not chunks:
            c, h, w = net.output_shape
            return np.zeros((0, c, h, w), dtype=net.dtype)
        return np.concatenate(chunks)

    def _outputs(self, X, tta=None):
        """Model outputs; with TTA, averaged over the four quarter turns (realigned if spatial)."""
        check_is_fitted(self, "network_")
        X = check_images(X, self.dtype)
        tta = self.tta if tta is None else tta
        if not tta:
            return self._transform_output(self._forward(X))
        total = None
        for k in range(4):
            out = self._transform_output(self._forward(rotate90(X, k)))
            if out.ndim == 4 and out.shape[2:] != (1, 1):
                out = rotate90(out, -k)
            total = out if total is None else total + out
        return total / 4

    def _transform_output(self, out):
        return out

    def _evaluate_encoded(self, X, target):
        out = self._forward(X)
        loss, _, hits = self._objective(out, target)
        acc = hits / X.shape[0] if self._has_accuracy(target) and X.shape[0] else float("nan")
        return {"loss": loss, "accuracy": acc}

    def evaluate(self, X, y, tta=None):
        """Loss and accuracy on ``(X, y)``."""
        check_is_fitted(self, "network_")
        X = check_images(X, self.dtype)
        target = self._encode_targets(y)
        tta = self.tta if tta is None else tta
        if not tta:
            return self._evaluate_encoded(X, target)
        return self._evaluate_averaged(self._outputs(X, tta=True), target)

    @classmethod
    def from_checkpoint(cls, path):
        from cyclicnet.harness.checkpoint import load_checkpoint

        spec, net, extra = load_checkpoint(path)
        est = cls(layers=spec.layers, dtype=spec.dtype)
        est.model_spec_ = spec
        est.network_ = net
        est.n_features_in_ = int(np.prod(spec.input_shape))
        est.history_ = []
        est._restore(extra)
        return est

    def _restore(self, extra):
        pass

    def _checkpoint_extra(self):
        return {}

    def save(self, path):
        from cyclicnet.harness.checkpoint import save_checkpoint

        check_is_fitted(self, "network_")
        save_checkpoint(path, self.model_spec_, self.network_, self._checkpoint_extra())

    def count_params(self):
        check_is_fitted(self, "network_")
        return self.network_.count_params()


class CyclicCNNClassifier(ClassifierMixin, _CyclicCNNBase):
    """Image classifier trained with softmax cross-entropy and Adam.

    ``batch_size`` counts examples before any slice layer; a C4 slice makes
    every step process four times as many rows (eight for D4).
    """

    _loss = "ce"

    def _encode_fit_targets(self, y, n):
        y = np.asarray(y)
        if y.shape[0] != n:
            raise ValueError(f"{y.shape[0]} labels for {n} images")
        self.classes_ = np.unique(y)
        return self._encode_targets(y)

    def _encode_targets(self, y):
        y = np.asarray(y)
        idx = np.searchsorted(self.classes_, y)
        idx = np.clip(idx, 0, len(self.classes_) - 1)
        if not np.array_equal(self.classes_[idx], y):
            raise ValueError("labels contain classes not seen during fit")
        return idx

    def _has_accuracy(self, target):
        return True

    def _objective(self, out, target):
        n_out = out.shape[1] * out.shape[2] * out.shape[3]
        if n_out != len(self.classes_):
            raise ValueError(f"model emits {n_out} logits for {len(self.classes_)} classes")
        loss, grad = softmax_cross_entropy(out, target)
        hits = int((out.reshape(out.shape[0], -1).argmax(axis=1) == target).sum())
        return loss, grad, hits

    def _evaluate_averaged(self, proba, target):
        n = proba.shape[0]
        if n == 0:
            return {"loss": float("nan"), "accuracy": float("nan")}
        p = np.clip(proba[np.arange(n), target], np.finfo(proba.dtype).tiny, None)
        return {"loss": float(-np.log(p).mean()), "accuracy": float((proba.argmax(axis=1) == target).mean())}

    def predict_proba(self, X, tta=None):
        return self._outputs(X, tta)

    def _transform_output(self, out):
        return softmax(out)

    def predict(self, X, tta=None):
        proba = self.predict_proba(X, tta)
        return self.classes_[proba.argmax(axis=1)]

    def _checkpoint_extra(self):
        return {"classes": self.classes_.tolist()}

    def _restore(self, extra):
        self.classes_ = np.asarray(extra["classes"])


class CyclicCNNRegressor(RegressorMixin, _CyclicCNNBase):
    """Regressor trained on root-mean-square error.

    Targets must have as many values per example as the model outputs. Output
    maps (fully convolutional models) are returned as (N, C, H, W); flat
    outputs as (N, K).
    """

    _loss = "rmse"

    def _encode_fit_targets(self, y, n):
        y = self._encode_targets(y)
        if y.shape[0] != n:
            raise ValueError(f"{y.shape[0]} targets for {n} images")
        return y

    def _encode_targets(self, y):
        return np.asarray(y, dtype=resolve_dtype(self.dtype))

    def _has_accuracy(self, target):
        # one-hot targets on a flat output: report argmax agreement
        return target.ndim == 2

    def _objective(self, out, target):
        loss, grad = rmse(out, target.reshape(out.shape))
        hits = 0
        if target.ndim == 2:
            hits = int((out.reshape(out.shape[0], -1).argmax(axis=1) == target.argmax(axis=1)).sum())
        return loss, grad, hits

    def _evaluate_averaged(self, pred, target):
        loss, _ = rmse(pred.reshape(pred.shape[0], -1) if pred.ndim == 2 else pred, target.reshape(pred.shape))
        acc = float("nan")
        if target.ndim == 2 and pred.shape[0]:
            acc = float((pred.reshape(pred.shape[0], -1).argmax(axis=1) == target.argmax(axis=1)).mean())
        return {"loss": loss, "accuracy": acc}

    def _transform_output(self, out):
        return out

    def predict(self, X, tta=None):
        out = self._outputs(X, tta)
        if out.shape[2:] == (1, 1):
            return out.reshape(out.shape[0], -1)
        return out
