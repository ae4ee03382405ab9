"""Synthetic structured regression data: a 3D weight volume with cubic
regions of interest, spatially smooth Gaussian design, linear response."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import Dataset, GridGeometry, GroundTruth

MIN_GAP = 2
MAX_PLACEMENT_TRIES = 100_000
PLACEMENT_RESTART = 1_000


@dataclass(frozen=True)
class SimulationSpec:
    shape: Tuple[int, int, int] = (50, 50, 50)
    n_samples: int = 100
    n_rois: int = 5
    roi_size: int = 6
    # one amplitude per ROI; None alternates +1, -1, +1, ...
    roi_amplitude: Optional[Tuple[float, ...]] = None
    target_snr: float = 3.6
    smoothing_width: float = 1.0
    seed: int = 0
    # explicit lower corners; None places ROIs at seeded random positions
    roi_corners: Optional[Tuple[Tuple[int, int, int], ...]] = None

    def __post_init__(self):
        if len(self.shape) != 3 or min(self.shape) < 1:
            raise ValueError("shape must be three positive integers")
        if self.n_samples < 2:
            raise ValueError("n_samples must be at least 2")
        if self.n_rois < 0 or self.roi_size < 1:
            raise ValueError("n_rois must be >= 0 and roi_size >= 1")
        if self.n_rois and self.roi_size > min(self.shape):
            raise ValueError(f"ROI does not fit: edge {self.roi_size} exceeds grid {self.shape}")
        if not self.target_snr > 0:
            raise ValueError("target_snr must be positive")
        if self.smoothing_width < 0:
            raise ValueError("smoothing_width must be nonnegative")
        if self.roi_amplitude is not None and len(self.roi_amplitude) != self.n_rois:
            raise ValueError("need one amplitude per ROI")
        if self.roi_corners is not None:
            if len(self.roi_corners) != self.n_rois:
                raise ValueError("need one corner per ROI")
            for corner in self.roi_corners:
                if any(c < 0 or c + self.roi_size > s for c, s in zip(corner, self.shape)):
                    raise ValueError(f"ROI does not fit: corner {tuple(corner)} in grid {self.shape}")
            for i, a in enumerate(self.roi_corners):
                for b in self.roi_corners[:i]:
                    if _boxes_overlap(a, b, self.roi_size, 0):
                        raise ValueError(f"ROIs at {tuple(a)} and {tuple(b)} overlap")

    def replace(self, **changes) -> "SimulationSpec":
        return dataclasses.replace(self, **changes)

    def amplitudes(self):
        if self.roi_amplitude is not None:
            return [float(a) for a in self.roi_amplitude]
        return [1.0 if i % 2 == 0 else -1.0 for i in range(self.n_rois)]


def _boxes_overlap(a, b, size, gap):
    # boxes are separated when some axis leaves at least `gap` free voxels between them
    return all(abs(int(x) - int(y)) < size + gap for x, y in zip(a, b))


def place_rois(shape, n_rois, roi_size, rng):
    """Seeded non-overlapping corners with at least ``MIN_GAP`` voxels between boxes.

    Rejection sampling; a placement that gets stuck starts over from scratch.
    """
    if n_rois == 0:
        return []
    highs = [s - roi_size + 1 for s in shape]
    if min(highs) < 1:
        raise ValueError(f"ROI does not fit: edge {roi_size} exceeds grid {tuple(shape)}")
    tries = 0
    while tries < MAX_PLACEMENT_TRIES:
        corners, stuck = [], 0
        while len(corners) < n_rois and stuck < PLACEMENT_RESTART and tries < MAX_PLACEMENT_TRIES:
            cand = tuple(int(rng.integers(0, h)) for h in highs)
            tries += 1
            if all(not _boxes_overlap(cand, c, roi_size, MIN_GAP) for c in corners):
                corners.append(cand)
                stuck = 0
            else:
                stuck += 1
        if len(corners) == n_rois:
            return corners
    raise ValueError(f"could not place {n_rois} separated ROIs of edge {roi_size} in {tuple(shape)}")


def compute_snr(X, w_star, sigma, epsilon) -> float:
    """``||X w||^2 / (sigma^2 ||eps||^2)``."""
    eps_sq = float(np.dot(epsilon, epsilon))
    if eps_sq == 0:
        raise ValueError("noise vector is zero")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    signal = np.asarray(X) @ np.asarray(w_star)
    return float(signal @ signal) / (sigma ** 2 * eps_sq)


def generate_synthetic(spec: SimulationSpec):
    """Draw ``(Dataset, GroundTruth)`` for ``spec``.

    ``sigma`` is solved from the realised noise so the returned triple has
    SNR equal to ``spec.target_snr``; with no signal, ``sigma = 1``.
    """
    rng = np.random.default_rng(spec.seed)
    geometry = GridGeometry.full(spec.shape)
    corners = spec.roi_corners
    if corners is None:
        corners = place_rois(spec.shape, spec.n_rois, spec.roi_size, rng)

    w_vol = np.zeros(spec.shape)
    for corner, amp in zip(corners, spec.amplitudes()):
        box = tuple(slice(c, c + spec.roi_size) for c in corner)
        w_vol[box] = amp
    w_star = w_vol[geometry.mask]

    noise = rng.standard_normal((spec.n_samples,) + tuple(spec.shape))
    if spec.smoothing_width > 0:
        noise = gaussian_filter(noise, sigma=(0,) + (spec.smoothing_width,) * 3)
    X = noise.reshape(spec.n_samples, -1)[:, geometry.mask.ravel()]

    epsilon = rng.standard_normal(spec.n_samples)
    signal = X @ w_star
    sig_sq = float(signal @ signal)
    sigma = 1.0 if sig_sq == 0 else float(np.sqrt(sig_sq / (spec.target_snr * (epsilon @ epsilon))))
    y = signal + sigma * epsilon
    return Dataset(X, y, geometry), GroundTruth(w_star, sigma, epsilon)
