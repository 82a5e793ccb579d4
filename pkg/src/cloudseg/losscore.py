"""Soft Jaccard, cross-entropy and Filtered Jaccard losses with analytic gradients.

All losses take flat arrays ``t`` (binary ground truth) and ``y`` (predicted
probabilities) of equal length and return a Python float. Gradients are
returned as arrays shaped like ``y``.

Filtered Jaccard Loss (FJL) gates two terms on ``S = sum(t)``::

    FJL(t, y) = k_G * G(t, y) * LP(S) + k_J * J(t, y) * HP(S)

with sigmoid low/high-pass filters ``LP``/``HP``. ``G`` is either the inverse
Jaccard loss over complements (FJL1) or cross-entropy scaled into [0, 1]
(FJL2). Since the filters depend only on ``t``, they are constants when
differentiating with respect to ``y``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "CEVariant",
    "LossKind",
    "LossConfig",
    "soft_jaccard",
    "cross_entropy",
    "inverse_jaccard",
    "normalized_ce",
    "sigmoid_filters",
    "fjl",
    "loss_value",
    "loss_gradient",
    "class_weights",
    "multiclass_loss",
    "multiclass_gradient",
]


class CEVariant(str, enum.Enum):
    AS_WRITTEN = "as-written"
    SYMMETRIC = "symmetric"


class LossKind(str, enum.Enum):
    JACCARD = "jaccard"
    CE = "ce"
    FJL1 = "fjl1"
    FJL2 = "fjl2"


@dataclass(frozen=True)
class LossConfig:
    epsilon: float = 1e-7
    m: float = 1000.0
    p_c: float = 0.5
    p_prime_c: float = 0.5
    k_G: float = 1.0
    k_J: float = 1.0
    max_ce: float | None = None
    ce_variant: CEVariant = CEVariant.AS_WRITTEN

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")
        object.__setattr__(self, "ce_variant", CEVariant(self.ce_variant))
        expected = -math.log(self.epsilon)
        if self.max_ce is None:
            object.__setattr__(self, "max_ce", expected)
        elif abs(self.max_ce - expected) > 1e-4:
            raise ValueError(
                f"max_ce={self.max_ce} disagrees with -log(epsilon)={expected:.6f}"
            )


DEFAULT = LossConfig()


def _prepare(t, y):
    t = np.asarray(t, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if t.size == 0 or y.size == 0:
        raise ValueError("empty input")
    if t.size != y.size:
        raise ValueError(f"length mismatch: t has {t.size}, y has {y.size}")
    return t, y


def _target_sum(t: np.ndarray) -> int:
    # t is binary; counting in integers keeps S exact for any N
    return int(np.count_nonzero(t))


def _jaccard_terms(t, y, eps):
    ty = np.sum(t * y)
    return ty + eps, np.sum(t) + np.sum(y) - ty + eps


def soft_jaccard(t, y, cfg: LossConfig = DEFAULT) -> float:
    t, y = _prepare(t, y)
    inter, union = _jaccard_terms(t, y, cfg.epsilon)
    return float(1.0 - inter / union)


def _soft_jaccard_grad(t, y, eps):
    inter, union = _jaccard_terms(t, y, eps)
    # d(inter)/dy = t, d(union)/dy = 1 - t
    return -(t * union - inter * (1.0 - t)) / union**2


def cross_entropy(t, y, cfg: LossConfig = DEFAULT) -> float:
    """Mean pixel cross-entropy, unnormalized.

    The as-written variant keeps only the ``t * log(y + eps)`` term, so it is
    zero for an all-background target.
    """
    t, y = _prepare(t, y)
    y = np.clip(y, 0.0, 1.0)
    eps = cfg.epsilon
    # capping the log argument at 1 keeps the loss non-negative at y in {0, 1}
    terms = t * np.log(np.minimum(y + eps, 1.0))
    if cfg.ce_variant is CEVariant.SYMMETRIC:
        terms = terms + (1.0 - t) * np.log(np.minimum(1.0 - y + eps, 1.0))
    return float(-np.sum(terms) / t.size)


def _cross_entropy_grad(t, y, cfg):
    eps = cfg.epsilon
    # saturated outputs would otherwise sit on the kink of the [0, 1] clamp
    yc = np.clip(y, eps, 1.0 - eps)
    g = t / (yc + eps)
    if cfg.ce_variant is CEVariant.SYMMETRIC:
        g = g - (1.0 - t) / (1.0 - yc + eps)
    return -g / t.size


def inverse_jaccard(t, y, cfg: LossConfig = DEFAULT) -> float:
    t, y = _prepare(t, y)
    return soft_jaccard(1.0 - t, 1.0 - y, cfg)


def normalized_ce(t, y, cfg: LossConfig = DEFAULT) -> float:
    return cross_entropy(t, y, cfg) / cfg.max_ce


def sigmoid_filters(S: float, cfg: LossConfig = DEFAULT) -> tuple[float, float]:
    """Return ``(LP(S), HP(S))``.

    With equal cut-offs the smaller filter is evaluated directly and the other
    one as its complement, which keeps ``LP + HP == 1`` in floating point.
    """
    if S < 0:
        raise ValueError(f"S must be non-negative, got {S}")
    S = float(S)
    z_low = cfg.m * (S - cfg.p_c)
    z_high = cfg.m * (-S + cfg.p_prime_c)
    if cfg.p_c == cfg.p_prime_c:
        if z_low >= 0:
            lp = float(expit(-z_low))
            return lp, 1.0 - lp
        hp = float(expit(-z_high))
        return 1.0 - hp, hp
    return float(expit(-z_low)), float(expit(-z_high))


def _compensatory(kind: LossKind):
    if kind is LossKind.FJL1:
        return inverse_jaccard
    if kind is LossKind.FJL2:
        return normalized_ce
    raise ValueError(f"{kind} has no compensatory term")


def fjl(t, y, variant: LossKind | str = LossKind.FJL1, cfg: LossConfig = DEFAULT) -> float:
    variant = LossKind(variant)
    t, y = _prepare(t, y)
    lp, hp = sigmoid_filters(_target_sum(t), cfg)
    g = _compensatory(variant)(t, y, cfg)
    j = soft_jaccard(t, y, cfg)
    return cfg.k_G * g * lp + cfg.k_J * j * hp


def loss_value(kind: LossKind | str, t, y, cfg: LossConfig = DEFAULT) -> float:
    kind = LossKind(kind)
    if kind is LossKind.JACCARD:
        return soft_jaccard(t, y, cfg)
    if kind is LossKind.CE:
        return cross_entropy(t, y, cfg)
    return fjl(t, y, kind, cfg)


def loss_gradient(kind: LossKind | str, t, y, cfg: LossConfig = DEFAULT) -> np.ndarray:
    """Analytic d(loss)/dy, shaped like ``y``."""
    kind = LossKind(kind)
    shape = np.shape(y)
    t, y = _prepare(t, y)
    eps = cfg.epsilon
    if kind is LossKind.JACCARD:
        g = _soft_jaccard_grad(t, y, eps)
    elif kind is LossKind.CE:
        g = _cross_entropy_grad(t, y, cfg)
    else:
        lp, hp = sigmoid_filters(_target_sum(t), cfg)
        if kind is LossKind.FJL1:
            # chain rule through the complements flips the sign
            g_comp = -_soft_jaccard_grad(1.0 - t, 1.0 - y, eps)
        else:
            g_comp = _cross_entropy_grad(t, y, cfg) / cfg.max_ce
        g = cfg.k_G * lp * g_comp + cfg.k_J * hp * _soft_jaccard_grad(t, y, eps)
    return g.reshape(shape)


def class_weights(counts) -> np.ndarray:
    """Inverse-frequency class weights, normalized to sum to one.

    A class with no pixels in the batch is treated as having one pixel.
    """
    counts = np.maximum(np.asarray(counts, dtype=np.float64), 1.0)
    w = 1.0 / counts
    return w / w.sum()


def _split_classes(t, y):
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if t.shape != y.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {y.shape}")
    if t.ndim != 2 or t.shape[1] < 2:
        raise ValueError("multiclass arrays must be shaped (N, K) with K >= 2")
    return t, y


def multiclass_loss(t, y, kind: LossKind | str, cfg: LossConfig = DEFAULT,
                    weights=None) -> float:
    """Weighted mean of one-vs-rest losses over the K columns of ``(N, K)`` arrays."""
    t, y = _split_classes(t, y)
    if weights is None:
        weights = class_weights(t.sum(axis=0))
    per_class = [loss_value(kind, t[:, k], y[:, k], cfg) for k in range(t.shape[1])]
    return float(np.dot(weights, per_class) / np.sum(weights))


def multiclass_gradient(t, y, kind: LossKind | str, cfg: LossConfig = DEFAULT,
                        weights=None) -> np.ndarray:
    t, y = _split_classes(t, y)
    if weights is None:
        weights = class_weights(t.sum(axis=0))
    weights = np.asarray(weights, dtype=np.float64) / np.sum(weights)
    cols = [weights[k] * loss_gradient(kind, t[:, k], y[:, k], cfg) for k in range(t.shape[1])]
    return np.stack(cols, axis=1)
