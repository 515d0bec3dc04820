"""Losses: softmax cross-entropy for the imitation head, Huber for the Q head."""

from __future__ import annotations

import numpy as np


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Loss and gradient for a single logit row and integer class target."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.shape[0] < 2:
        raise ValueError(f"expected a logit vector of length >= 2, got shape {logits.shape}")
    if not 0 <= target < logits.shape[0]:
        raise ValueError(f"target {target} out of range for {logits.shape[0]} classes")
    shifted = logits - logits.max()
    log_z = np.log(np.exp(shifted).sum())
    loss = float(log_z - shifted[target])
    grad = softmax(logits)
    grad[target] -= 1.0
    return loss, grad


def softmax_cross_entropy_batch(
    logits: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean loss over a batch and the gradient of that mean wrt logits."""
    n = logits.shape[0]
    if targets.shape != (n,):
        raise ValueError(f"targets shape {targets.shape} does not match batch {n}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float((log_z - shifted[rows, targets]).mean())
    grad = softmax(logits, axis=1)
    grad[rows, targets] -= 1.0
    return loss, grad / n


def huber(prediction: float, target: float, delta: float = 1.0) -> tuple[float, float]:
    """Huber loss and gradient wrt the prediction: quadratic within delta."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    error = prediction - target
    if abs(error) <= delta:
        return 0.5 * error * error, error
    return delta * (abs(error) - 0.5 * delta), delta * (1.0 if error > 0 else -1.0)


def huber_batch(
    predictions: np.ndarray, targets: np.ndarray, delta: float = 1.0
) -> tuple[float, np.ndarray]:
    """Mean Huber loss over a batch and the gradient of that mean."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    error = predictions - targets
    abs_err = np.abs(error)
    quadratic = abs_err <= delta
    losses = np.where(quadratic, 0.5 * error * error, delta * (abs_err - 0.5 * delta))
    grads = np.where(quadratic, error, delta * np.sign(error))
    n = predictions.shape[0]
    return float(losses.mean()), grads / n
