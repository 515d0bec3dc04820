"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

_ABS_SWITCH = 1e-6  # below this reference magnitude, compare absolutely


def grad_check(
    loss_fn: Callable[[], float],
    tensors: Mapping[str, np.ndarray],
    analytic: Mapping[str, np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Maximum relative error between analytic gradients and central differences.

    `loss_fn` recomputes the scalar loss from the current tensor contents;
    each tensor entry is perturbed in place by +/- eps. Where the reference
    derivative is below 1e-6 in magnitude, absolute error is used instead.
    """
    max_err = 0.0
    for name, tensor in tensors.items():
        grad = analytic[name]
        if grad.shape != tensor.shape:
            raise ValueError(f"gradient shape mismatch for {name}: {grad.shape} vs {tensor.shape}")
        flat = tensor.reshape(-1)
        grad_flat = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            loss_plus = loss_fn()
            flat[i] = original - eps
            loss_minus = loss_fn()
            flat[i] = original
            fd = (loss_plus - loss_minus) / (2.0 * eps)
            diff = abs(grad_flat[i] - fd)
            err = diff if abs(fd) < _ABS_SWITCH else diff / abs(fd)
            if err > max_err:
                max_err = err
    return max_err
