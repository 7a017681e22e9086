"""Central finite differences, the independent oracle for :mod:`stekit.tensor`."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ContractError


def finite_diff(f: Callable[[np.ndarray], float], x, step: float = 1e-5):
    """Estimate ``df/dx`` elementwise with ``(f(x+h) - f(x-h)) / 2h``."""
    if not step > 0:
        raise ContractError(f"finite_diff step must be positive, got {step}")
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = out.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = float(f(x.copy()))
        flat[i] = orig - step
        lo = float(f(x.copy()))
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * step)
    return out


def max_rel_error(analytic, numeric, floor: float = 1e-8) -> float:
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over all entries.

    The floor keeps entries that are zero on both routes from dividing by zero;
    for those the measure degrades to an absolute error scaled by ``1/floor``.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / denom))
