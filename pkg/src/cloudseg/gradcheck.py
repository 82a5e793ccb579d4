"""Central finite differences for checking hand-written gradients."""
from __future__ import annotations

import numpy as np


def numeric_gradient(f, x: np.ndarray, h: float = 1e-5, indices=None,
                     signature=None, retries: int = 3) -> np.ndarray:
    """Central difference gradient of scalar ``f`` at ``x``.

    ``x`` is perturbed in place and restored. When ``indices`` is given only
    those flat positions are evaluated; the rest of the result is NaN.

    For piecewise-smooth functions pass ``signature``, a callable returning a
    hashable description of the active piece (ReLU masks, pooling winners)
    after the most recent call to ``f``. A step that lands on a different piece
    is retried with ``h / 10``; if it still straddles a kink after ``retries``
    attempts the entry is NaN, since no derivative exists there at that scale.
    """
    flat = x.reshape(-1)
    grad = np.full(flat.shape, np.nan) if indices is not None else np.empty(flat.shape)
    base = None
    if signature is not None:
        f()
        base = signature()
    for i in (range(flat.size) if indices is None else indices):
        orig = flat[i]
        step = h
        for _ in range(retries + 1):
            flat[i] = orig + step
            fp = f()
            same = base is None or signature() == base
            flat[i] = orig - step
            fm = f()
            same = same and (base is None or signature() == base)
            flat[i] = orig
            if same:
                grad[i] = (fp - fm) / (2.0 * step)
                break
            step /= 10.0
        else:
            grad[i] = np.nan
    return grad.reshape(x.shape)


def relative_error(analytic, numeric, floor: float = 1e-8) -> np.ndarray:
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
