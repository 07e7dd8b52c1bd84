"""Sampling sets on the circle [0, 1) with adaptive weights and frame bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NyquistViolatedError, SamplingSetError

__all__ = [
    "FrameBounds",
    "SamplingSet",
    "build_sampling_set",
    "generate_jittered_set",
    "nyquist_level",
    "theoretical_frame_bounds",
]


@dataclass(frozen=True, eq=False)
class SamplingSet:
    points: np.ndarray
    weights: np.ndarray
    max_gap: float
    gap_sigma: float

    @property
    def size(self) -> int:
        return self.points.size

    def __len__(self) -> int:
        return self.points.size

    @property
    def gaps(self) -> np.ndarray:
        """Periodic gaps t_{j+1} - t_j, the last one wrapping through 1."""
        return np.diff(np.append(self.points, self.points[0] + 1.0))

    def subset(self, step: int = 2, offset: int = 0) -> "SamplingSet":
        """Every ``step``-th point, weights recomputed for the thinner set."""
        return build_sampling_set(self.points[offset::step])


@dataclass(frozen=True)
class FrameBounds:
    lower: float
    upper: float
    source: str = "theoretical"

    def __post_init__(self):
        if not (0 < self.lower <= self.upper):
            raise ValueError(f"frame bounds need 0 < A <= B, got A={self.lower}, B={self.upper}")
        if self.source not in ("theoretical", "empirical", "dense"):
            raise ValueError(f"unknown frame bound source {self.source!r}")

    @property
    def condition(self) -> float:
        return self.upper / self.lower


def build_sampling_set(points) -> SamplingSet:
    """Weights w_j = (t_{j+1} - t_{j-1}) / 2 with periodic wrap, plus gap stats.

    ``gap_sigma`` is the standard deviation of the r periodic gaps with
    divisor r - 1.
    """
    t = np.array(points, dtype=float).ravel()
    if t.size < 2:
        raise SamplingSetError("a sampling set needs at least 2 points")
    if not np.all(np.isfinite(t)) or t.min() < 0.0 or t.max() >= 1.0:
        raise SamplingSetError("sampling points must lie in [0, 1)")
    if np.any(np.diff(t) <= 0):
        raise SamplingSetError("sampling points must be strictly increasing")

    gaps = np.diff(np.append(t, t[0] + 1.0))
    weights = 0.5 * (gaps + np.roll(gaps, 1))
    sigma = float(np.std(gaps, ddof=1))
    t.setflags(write=False)
    weights.setflags(write=False)
    return SamplingSet(points=t, weights=weights, max_gap=float(gaps.max()), gap_sigma=sigma)


def nyquist_level(s: SamplingSet) -> int:
    """Largest N >= 0 with (2N+1) * max_gap < 1."""
    gamma = s.max_gap
    n = max(int(np.floor((1.0 / gamma - 1.0) / 2.0)), 0)
    while n > 0 and (2 * n + 1) * gamma >= 1.0:
        n -= 1
    while (2 * (n + 1) + 1) * gamma < 1.0:
        n += 1
    return n


def theoretical_frame_bounds(s: SamplingSet, N: int) -> FrameBounds:
    """Worst-case bounds A = (1 - (2N+1) gamma)^2, B = (1 + (2N+1) gamma)^2."""
    ratio = (2 * N + 1) * s.max_gap
    if ratio >= 1.0:
        raise NyquistViolatedError(
            f"(2N+1) * gamma = {ratio:.4g} >= 1 at level {N}; no theoretical frame bound")
    return FrameBounds((1.0 - ratio) ** 2, (1.0 + ratio) ** 2, "theoretical")


def generate_jittered_set(count: int, irregularity: float, seed=None) -> SamplingSet:
    """Regular grid j/r with uniform jitter of half-width irregularity / (2r)."""
    if count < 2:
        raise SamplingSetError("a sampling set needs at least 2 points")
    if not (0.0 <= irregularity < 1.0):
        raise ValueError(f"irregularity must lie in [0, 1), got {irregularity}")
    rng = np.random.default_rng(seed)
    half = irregularity / (2.0 * count)
    t = np.arange(count) / count + rng.uniform(-half, half, size=count)
    t = np.mod(t, 1.0)
    t[t >= 1.0] = 0.0
    t = np.sort(t)
    return build_sampling_set(t)
