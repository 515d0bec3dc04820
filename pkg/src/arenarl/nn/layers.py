"""Layer primitives with explicit backward passes.

Every layer's forward returns (output, cache); backward consumes the cache
and an upstream gradient, accumulates parameter gradients in place, and
returns gradients with respect to its inputs. All math is float64 so the
finite-difference checks can use tight tolerances.
"""

from __future__ import annotations

import math

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not agree."""


class Param:
    """Named tensor with an accumulated gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad.fill(0.0)

    def __repr__(self) -> str:
        return f"Param({self.name}, shape={self.value.shape})"


def kaiming_uniform(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Dense:
    """Affine map y = x @ W + b over the last axis."""

    def __init__(self, name: str, n_in: int, n_out: int, rng: np.random.Generator):
        self.n_in = n_in
        self.n_out = n_out
        self.weight = Param(f"{name}.weight", kaiming_uniform(rng, n_in, (n_in, n_out)))
        self.bias = Param(f"{name}.bias", np.zeros(n_out))

    @property
    def params(self) -> list[Param]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"dense expected last dim {self.n_in}, got {x.shape}")
        # One flat GEMM instead of a batched loop over leading axes.
        out = x.reshape(-1, self.n_in) @ self.weight.value
        out += self.bias.value
        return out.reshape(*x.shape[:-1], self.n_out), x

    def backward(self, cache: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        x = cache
        x2 = x.reshape(-1, self.n_in)
        g2 = grad_out.reshape(-1, self.n_out)
        self.weight.grad += x2.T @ g2
        self.bias.grad += g2.sum(axis=0)
        return (g2 @ self.weight.value.T).reshape(x.shape)


class LeakyReLU:
    def __init__(self, slope: float = 0.01):
        if not 0.0 < slope < 1.0:
            raise ValueError(f"slope must be in (0, 1), got {slope}")
        self.slope = slope

    params: list[Param] = []

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.where(x >= 0.0, x, self.slope * x), x

    def backward(self, cache: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        return grad_out * np.where(cache >= 0.0, 1.0, self.slope)


class LayerNorm:
    """Row-wise normalization over the last axis with learned gain and shift."""

    def __init__(self, name: str, dim: int, eps: float = 1e-5):
        if dim < 2:
            raise ValueError("layer_norm needs rows of length >= 2")
        self.dim = dim
        self.eps = eps
        self.gain = Param(f"{name}.gain", np.ones(dim))
        self.shift = Param(f"{name}.shift", np.zeros(dim))

    @property
    def params(self) -> list[Param]:
        return [self.gain, self.shift]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        mean = x.mean(axis=-1, keepdims=True)
        centered = x - mean
        var = np.einsum("...d,...d->...", centered, centered)[..., None] / self.dim
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = centered * inv_std
        out = self.gain.value * x_hat + self.shift.value
        return out, (x_hat, inv_std)

    def backward(self, cache: tuple, grad_out: np.ndarray) -> np.ndarray:
        x_hat, inv_std = cache
        self.gain.grad += (grad_out * x_hat).reshape(-1, self.dim).sum(axis=0)
        self.shift.grad += grad_out.reshape(-1, self.dim).sum(axis=0)
        g = grad_out * self.gain.value
        g_mean = g.mean(axis=-1, keepdims=True)
        gx_mean = (g * x_hat).mean(axis=-1, keepdims=True)
        return inv_std * (g - g_mean - x_hat * gx_mean)


def _stable_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class MultiHeadAttention:
    """Scaled dot-product attention of one query row over masked key rows.

    Shapes: query (B, 1, D), keys/values (B, N, D), mask (B, N) bool. Fully
    masked batch rows yield the zero context vector.
    """

    _MASK_FILL = -1e30

    def __init__(self, name: str, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.wq = Param(f"{name}.wq", kaiming_uniform(rng, dim, (dim, dim)))
        self.wk = Param(f"{name}.wk", kaiming_uniform(rng, dim, (dim, dim)))
        self.wv = Param(f"{name}.wv", kaiming_uniform(rng, dim, (dim, dim)))
        self.wo = Param(f"{name}.wo", kaiming_uniform(rng, dim, (dim, dim)))

    @property
    def params(self) -> list[Param]:
        return [self.wq, self.wk, self.wv, self.wo]

    @staticmethod
    def _project(x: np.ndarray, weight: Param) -> np.ndarray:
        flat = x.reshape(-1, x.shape[-1]) @ weight.value
        return flat.reshape(*x.shape[:-1], weight.value.shape[1])

    def _split_rows(self, x: np.ndarray) -> np.ndarray:
        b, n, _ = x.shape
        return x.reshape(b, n, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def _merge_rows(self, x: np.ndarray) -> np.ndarray:
        b, _, n, _ = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, n, self.dim)

    def forward(
        self,
        query: np.ndarray,
        keys: np.ndarray,
        values: np.ndarray,
        mask: np.ndarray,
    ) -> tuple[np.ndarray, tuple]:
        if query.shape[-1] != self.dim or keys.shape[-1] != self.dim:
            raise ShapeError(f"attention dim mismatch: {query.shape}, {keys.shape}")
        b = query.shape[0]
        # Single-row query: everything stays broadcast-multiply-reduce, which
        # beats looping tiny per-batch GEMMs.
        q = self._project(query, self.wq).reshape(b, self.heads, self.head_dim)
        k = self._split_rows(self._project(keys, self.wk))  # (B, h, N, dh)
        v = self._split_rows(self._project(values, self.wv))
        scale = 1.0 / math.sqrt(self.head_dim)
        scores = (k * q[:, :, None, :]).sum(-1) * scale  # (B, h, N)
        scores = np.where(mask[:, None, :], scores, self._MASK_FILL)
        weights = _stable_softmax(scores)
        # Rows with no unmasked key collapse to the zero context.
        weights = weights * mask.any(axis=-1)[:, None, None]
        context = (v * weights[..., None]).sum(axis=2)  # (B, h, dh)
        out = self._project(context.reshape(b, 1, self.dim), self.wo)
        cache = (query, keys, values, q, k, v, weights, context, scale)
        return out, cache

    def backward(
        self, cache: tuple, grad_out: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        query, keys, values, q, k, v, weights, context, scale = cache
        b = query.shape[0]
        ctx2 = context.reshape(-1, self.dim)
        g2 = grad_out.reshape(-1, self.dim)
        self.wo.grad += ctx2.T @ g2
        d_context = (g2 @ self.wo.value.T).reshape(b, self.heads, self.head_dim)

        d_weights = (v * d_context[:, :, None, :]).sum(-1)  # (B, h, N)
        d_v = weights[..., None] * d_context[:, :, None, :]  # (B, h, N, dh)
        # Softmax backward; masked columns carry weight 0, so their gradient
        # vanishes and the -inf fill never propagates.
        inner = (d_weights * weights).sum(axis=-1, keepdims=True)
        d_scores = weights * (d_weights - inner) * scale  # (B, h, N)
        d_q = (k * d_scores[..., None]).sum(axis=2)  # (B, h, dh)
        d_k = d_scores[..., None] * q[:, :, None, :]  # (B, h, N, dh)

        d_q_full = d_q.reshape(b, self.dim)
        d_k_full = self._merge_rows(d_k)
        d_v_full = self._merge_rows(d_v)
        self.wq.grad += query.reshape(-1, self.dim).T @ d_q_full
        self.wk.grad += keys.reshape(-1, self.dim).T @ d_k_full.reshape(-1, self.dim)
        self.wv.grad += values.reshape(-1, self.dim).T @ d_v_full.reshape(-1, self.dim)
        d_query = (d_q_full @ self.wq.value.T).reshape(query.shape)
        d_keys = (d_k_full.reshape(-1, self.dim) @ self.wk.value.T).reshape(keys.shape)
        d_values = (d_v_full.reshape(-1, self.dim) @ self.wv.value.T).reshape(values.shape)
        return d_query, d_keys, d_values
