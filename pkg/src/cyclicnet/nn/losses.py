import numpy as np


def _as_matrix(outputs):
    return outputs.reshape(outputs.shape[0], -1)


def _one_hot(labels, n_classes, dtype):
    labels = np.asarray(labels)
    if labels.ndim == 2:
        if labels.shape[1] != n_classes:
            raise ValueError(f"one-hot labels have {labels.shape[1]} columns, logits have {n_classes}")
        return labels.astype(dtype)
    if labels.ndim != 1:
        raise ValueError(f"labels must be class indices or one-hot rows, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"class index out of range for {n_classes} classes")
    out = np.zeros((labels.shape[0], n_classes), dtype=dtype)
    out[np.arange(labels.shape[0]), labels.astype(int)] = 1
    return out


def softmax(logits):
    z = _as_matrix(logits)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. ``logits``."""
    z = _as_matrix(logits)
    target = _one_hot(labels, z.shape[1], z.dtype)
    if target.shape[0] != z.shape[0]:
        raise ValueError(f"{target.shape[0]} labels for {z.shape[0]} predictions")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_norm
    loss = -(target * log_p).sum() / z.shape[0]
    grad = (np.exp(log_p) - target) / z.shape[0]
    return float(loss), grad.reshape(logits.shape)


def rmse(pred, target):
    """Root-mean-square error over every element, and its gradient w.r.t. ``pred``."""
    target = np.asarray(target, dtype=pred.dtype)
    if target.size != pred.size:
        raise ValueError(f"target of shape {target.shape} does not match prediction {pred.shape}")
    diff = pred - target.reshape(pred.shape)
    value = np.sqrt(np.mean(diff * diff))
    if value == 0:
        return 0.0, np.zeros_like(pred)
    return float(value), diff / (diff.size * value)
