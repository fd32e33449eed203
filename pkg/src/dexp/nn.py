"""Minimal dense-network toolkit: ReLU MLPs with hand-derived gradients,
the two task losses, global-norm clipping and Adam.

Everything is float64 numpy; no autodiff framework. Gradients are exact
for the implemented ops (kinks use the conventional subgradient 0).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, ShapeMismatch

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
CLIP_MAX_NORM = 1.0
BCE_CLAMP = 1e-7
SMOOTH_L1_DELTA = 1.0

LAMBDA_EXIST = 2.0
LAMBDA_WEIGHT = 0.5
LAMBDA_NODE = 20.0


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Mlp:
    """Fully connected net, ReLU hidden layers, linear output."""

    def __init__(self, dims: list[int], rng: np.random.Generator):
        if len(dims) < 2:
            raise DimensionMismatch("mlp needs at least input and output dims")
        self.dims = list(dims)
        self.weights = [
            rng.normal(0.0, np.sqrt(2.0 / dims[i]), size=(dims[i], dims[i + 1]))
            for i in range(len(dims) - 1)
        ]
        self.biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
        self.grad_w = [np.zeros_like(w) for w in self.weights]
        self.grad_b = [np.zeros_like(b) for b in self.biases]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns output and the activation stack needed for backward."""
        if x.shape[1] != self.dims[0]:
            raise DimensionMismatch(
                f"input dim {x.shape[1]} != expected {self.dims[0]}"
            )
        acts = [x]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            acts.append(z if i == last else np.maximum(z, 0.0))
        return acts[-1], acts

    def backward(self, acts: list[np.ndarray], dout: np.ndarray) -> np.ndarray:
        """Accumulates parameter grads, returns gradient w.r.t. the input."""
        grad = dout
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                grad = grad * (acts[i + 1] > 0.0)
            self.grad_w[i] += acts[i].T @ grad
            self.grad_b[i] += grad.sum(axis=0)
            grad = grad @ self.weights[i].T
        return grad

    def zero_grad(self) -> None:
        for g in self.grad_w:
            g[:] = 0.0
        for g in self.grad_b:
            g[:] = 0.0

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def grads(self) -> list[np.ndarray]:
        out = []
        for gw, gb in zip(self.grad_w, self.grad_b):
            out.extend([gw, gb])
        return out


def bce_with_logits(
    logits: np.ndarray,
    labels: np.ndarray,
    pos_weight: float = 1.0,
    clamp: float = BCE_CLAMP,
) -> tuple[float, np.ndarray]:
    """Mean weighted binary cross-entropy from raw logits.

    Probabilities are clamped away from 0/1; positives are up-weighted by
    pos_weight. Returns (loss, dloss/dlogits).
    """
    p = np.clip(sigmoid(logits), clamp, 1.0 - clamp)
    w = np.where(labels > 0.5, pos_weight, 1.0)
    per = -(w * labels * np.log(p) + (1.0 - labels) * np.log1p(-p))
    n = logits.size
    loss = float(per.sum() / n)
    # in the clamped region the loss is locally constant in z
    raw = sigmoid(logits)
    active = (raw > clamp) & (raw < 1.0 - clamp)
    dz = np.where(active, w * (raw - labels) / n, 0.0)
    return loss, dz


def smooth_l1(
    pred: np.ndarray,
    target: np.ndarray,
    delta: float = SMOOTH_L1_DELTA,
) -> tuple[float, np.ndarray]:
    """Mean smooth-L1: quadratic inside delta, linear outside."""
    r = pred - target
    a = np.abs(r)
    quad = a < delta
    per = np.where(quad, r * r / (2.0 * delta), a - delta / 2.0)
    n = pred.size
    loss = float(per.sum() / n)
    dr = np.where(quad, r / delta, np.sign(r)) / n
    return loss, dr


def total_loss(
    l_exist: float,
    l_weight: float,
    l_node: float,
    lambdas: tuple[float, float, float] = (LAMBDA_EXIST, LAMBDA_WEIGHT, LAMBDA_NODE),
) -> float:
    le, lw, ln_ = lambdas
    return le * l_exist + lw * l_weight + ln_ * l_node


def clip_gradients(grads: list[np.ndarray], max_norm: float = CLIP_MAX_NORM) -> float:
    """Scale all grads in place so the global L2 norm is at most max_norm."""
    total = 0.0
    for g in grads:
        total += float((g * g).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


class Adam:
    """Adam with bias correction; one learning rate per parameter tensor."""

    def __init__(
        self,
        params: list[np.ndarray],
        lrs: list[float],
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        eps: float = ADAM_EPS,
    ):
        if len(params) != len(lrs):
            raise ShapeMismatch("one learning rate per parameter tensor")
        self.lrs = list(lrs)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise ShapeMismatch("parameter/gradient count changed")
        for p, g, m in zip(params, grads, self.m):
            if p.shape != g.shape or p.shape != m.shape:
                raise ShapeMismatch(f"shape {p.shape} vs grad {g.shape}")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            p -= self.lrs[i] * m_hat / (np.sqrt(v_hat) + self.eps)
