"""Episode metrics: percentage of trash cleaned and Gaussian-smoothed model error."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter


class ZeroTrashError(ValueError):
    pass


def ptc(collected_per_step, n_initial: int) -> np.ndarray:
    """Cumulative percentage of the initial ``n_initial`` items removed by each step."""
    if n_initial <= 0:
        raise ZeroTrashError("PTC needs at least one initial item")
    return 100.0 * np.cumsum(np.asarray(collected_per_step, dtype=np.float64)) / n_initial


def smooth(a: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    # 'reflect' mirrors about the edge (d c b a | a b c d); kernel radius 3 sigma.
    return gaussian_filter(np.asarray(a, dtype=np.float64), sigma=sigma, mode="reflect", truncate=3.0)


def gaussian_mse(truth: np.ndarray, model: np.ndarray, sigma: float = 1.0) -> float:
    """Mean squared difference of the two density maps after Gaussian smoothing."""
    truth = np.asarray(truth)
    model = np.asarray(model)
    if truth.shape != model.shape:
        raise ValueError(f"shape mismatch {truth.shape} vs {model.shape}")
    # The filter is linear, so smoothing the difference is the same thing.
    diff = smooth(truth.astype(np.float64) - model, sigma)
    return float(np.mean(diff**2))


def ci95(values) -> float:
    """Half-width of the normal-approximation 95% interval of the mean."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < 2:
        return 0.0
    return float(1.96 * v.std(ddof=1) / np.sqrt(len(v)))
