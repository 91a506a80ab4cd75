"""Small shared numeric kernels."""

from __future__ import annotations

import numpy as np

# probabilities entering the cross-entropy loss are clipped to this band
PROB_CLIP = 1e-7


def sigmoid(x):
    """Numerically stable logistic function; preserves float dtype."""
    arr = np.asarray(x)
    if arr.dtype.kind != "f":
        arr = arr.astype(np.float64)
    ez = np.exp(-np.abs(arr))
    out = np.where(arr >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    if out.ndim == 0:
        return float(out)
    return out
