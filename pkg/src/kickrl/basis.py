"""Finite-support basis kernels and per-dimension center grids.

Every kernel is peak-normalized (value 1 at its center) and evaluated on the
scaled distance u = |d| / halfWidth.  Compact kernels are exactly zero for
u >= 1, which is what makes sparse featurization possible; the full Gaussian
never reaches zero and is kept as the dense reference.

Kernels:
    gaussian       exp(-d^2 / (2 sigma^2)),  unbounded support
    gaussian3s     exp(-d^2 / (2 sigma^2)) truncated at u >= 1
    epanechnikov   1 - u^2
    cosine         cos(pi u / 2)
    triangular     1 - u
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np


class KernelKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    GAUSSIAN3S = "gaussian3s"
    EPANECHNIKOV = "epanechnikov"
    COSINE = "cosine"
    TRIANGULAR = "triangular"


COMPACT_KINDS = frozenset(
    {
        KernelKind.GAUSSIAN3S,
        KernelKind.EPANECHNIKOV,
        KernelKind.COSINE,
        KernelKind.TRIANGULAR,
    }
)


def is_compact(kind: KernelKind) -> bool:
    """True for kernels whose support ends at |d| = halfWidth."""
    return kind in COMPACT_KINDS


def kernel_eval(kind: KernelKind, distance: float, sigma: float, half_width: float) -> float:
    """Evaluate a peak-normalized kernel at signed distance ``distance``.

    Compact kinds return exactly 0.0 for |distance| >= half_width (open
    support); the full Gaussian ignores half_width.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if half_width <= 0.0:
        raise ValueError(f"half_width must be positive, got {half_width}")
    kind = KernelKind(kind)
    d = abs(distance)
    if kind is KernelKind.GAUSSIAN:
        return math.exp(d * d * (-0.5 / (sigma * sigma)))
    u = d / half_width  # division keeps u == 1.0 exact at the support edge
    if u >= 1.0:
        return 0.0
    if kind is KernelKind.GAUSSIAN3S:
        return math.exp(d * d * (-0.5 / (sigma * sigma)))
    if kind is KernelKind.EPANECHNIKOV:
        return 1.0 - u * u
    if kind is KernelKind.COSINE:
        return math.cos((0.5 * math.pi) * u)
    return 1.0 - u  # triangular


@dataclass(frozen=True)
class DimensionGrid:
    """Evenly spaced kernel centers covering one state dimension.

    ``delta`` is the center spacing, ``sigma`` the kernel scale and
    ``half_width`` the support radius used by compact kernels.  Values are
    clamped to [lo, hi] before featurization, so boundary centers absorb
    out-of-range readings.
    """

    lo: float
    hi: float
    n_centers: int
    delta: float
    sigma: float
    half_width: float

    @classmethod
    def uniform(cls, lo: float, hi: float, n_centers: int) -> "DimensionGrid":
        """Continuous dimension: sigma = delta/2, support radius 1.5*delta."""
        if n_centers < 2:
            raise ValueError(f"need at least 2 centers, got {n_centers}")
        if not hi > lo:
            raise ValueError(f"need hi > lo, got [{lo}, {hi}]")
        delta = (hi - lo) / (n_centers - 1)
        return cls(lo, hi, n_centers, delta, 0.5 * delta, 1.5 * delta)

    @classmethod
    def indicator(cls, n_values: int) -> "DimensionGrid":
        """Discrete dimension over {0, .., n_values-1}.

        Support radius delta/2 keeps compact kernels on exactly the matching
        center (value 1.0) while the full Gaussian still sees every center.
        """
        if n_values < 2:
            raise ValueError(f"need at least 2 values, got {n_values}")
        hi = float(n_values - 1)
        delta = 1.0
        return cls(0.0, hi, n_values, delta, 0.5 * delta, 0.5 * delta)

    @classmethod
    def binary(cls) -> "DimensionGrid":
        return cls.indicator(2)

    def center(self, k: int) -> float:
        if not 0 <= k < self.n_centers:
            raise IndexError(f"center index {k} out of range [0, {self.n_centers})")
        return self.lo + k * self.delta

    def clamp(self, x: float) -> float:
        return min(max(x, self.lo), self.hi)

    def to_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "n_centers": self.n_centers,
            "delta": self.delta,
            "sigma": self.sigma,
            "half_width": self.half_width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DimensionGrid":
        return cls(
            float(d["lo"]),
            float(d["hi"]),
            int(d["n_centers"]),
            float(d["delta"]),
            float(d["sigma"]),
            float(d["half_width"]),
        )


@functools.lru_cache(maxsize=None)
def grid_arrays(grid: DimensionGrid) -> tuple[np.ndarray, np.ndarray]:
    """Cached (indices, center positions) arrays for one grid."""
    ks = np.arange(grid.n_centers, dtype=np.int64)
    return ks, grid.lo + grid.delta * ks


def support_window(grid: DimensionGrid, kind: KernelKind, x: float) -> tuple[int, int]:
    """Inclusive center-index range that can be nonzero at clamped ``x``.

    The full Gaussian touches every center; compact kernels only the ones
    within half_width of x (rounded outward, so boundary centers are
    included in the scan and dropped by evaluation).
    """
    if KernelKind(kind) is KernelKind.GAUSSIAN:
        return 0, grid.n_centers - 1
    x = grid.clamp(x)
    k_first = max(int(math.floor((x - grid.lo - grid.half_width) / grid.delta)), 0)
    k_last = min(int(math.ceil((x - grid.lo + grid.half_width) / grid.delta)), grid.n_centers - 1)
    return k_first, k_last


def active_arrays(
    grid: DimensionGrid,
    kind: KernelKind,
    x: float,
    counters=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Center indices and kernel values with nonzero value at clamped ``x``.

    Returns ``(indices, values)`` as aligned arrays in ascending index
    order; values come from kernel_eval one center at a time, so this is
    the per-dimension reference that featurization is checked against.
    """
    kind = KernelKind(kind)
    x = grid.clamp(x)
    k_first, k_last = support_window(grid, kind, x)
    if counters is not None:
        counters.kernel_evals += k_last - k_first + 1
    ks = []
    vs = []
    for k in range(k_first, k_last + 1):
        v = kernel_eval(kind, x - (grid.lo + k * grid.delta), grid.sigma, grid.half_width)
        if v > 0.0:
            ks.append(k)
            vs.append(v)
    return np.array(ks, dtype=np.int64), np.array(vs, dtype=np.float64)


def active_centers(
    grid: DimensionGrid,
    kind: KernelKind,
    x: float,
    counters=None,
) -> list[tuple[int, float]]:
    """Centers with nonzero kernel value at clamped ``x``, ascending index."""
    ks, vs = active_arrays(grid, kind, x, counters)
    return [(int(k), float(v)) for k, v in zip(ks, vs)]
