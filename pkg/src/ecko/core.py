"""Domain types, voxel-grid geometry and deterministic seeding."""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridGeometry:
    """3D voxel lattice with a mask of active voxels.

    Features are the active voxels, enumerated in lexicographic
    ``(x, y, z)`` order; ``feature_coords[j]`` is the grid coordinate of
    feature ``j``.
    """

    shape: tuple
    mask: np.ndarray
    feature_coords: np.ndarray = field(init=False)

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) != 3 or any(s < 1 for s in shape):
            raise ValueError(f"shape must be three positive integers, got {self.shape}")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != shape:
            raise ValueError(f"mask shape {mask.shape} does not match {shape}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "mask", _frozen(mask))
        # argwhere walks C order, which is lexicographic in (x, y, z)
        object.__setattr__(self, "feature_coords", _frozen(np.argwhere(mask), np.int64))

    @classmethod
    def full(cls, shape) -> "GridGeometry":
        return cls(shape, np.ones(tuple(shape), dtype=bool))

    @property
    def n_features(self) -> int:
        return len(self.feature_coords)

    def index_volume(self) -> np.ndarray:
        """Volume holding each active voxel's feature index, -1 elsewhere."""
        vol = np.full(self.shape, -1, dtype=np.intp)
        vol[self.mask] = np.arange(self.n_features)
        return vol

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "mask_packed": np.packbits(self.mask.ravel()).tobytes().hex(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridGeometry":
        shape = tuple(d["shape"])
        bits = np.unpackbits(np.frombuffer(bytes.fromhex(d["mask_packed"]), dtype=np.uint8))
        return cls(shape, bits[: math.prod(shape)].astype(bool).reshape(shape))

    def __eq__(self, other):
        if not isinstance(other, GridGeometry):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.mask, other.mask)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix ``X`` (n x p), response ``y`` and optional geometry."""

    X: np.ndarray
    y: np.ndarray
    geometry: Optional[GridGeometry] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be a 2D array")
        if y.shape != (X.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        if not np.isfinite(X).all() or not np.isfinite(y).all():
            raise ValueError("X and y must be finite")
        if self.geometry is not None and self.geometry.n_features != X.shape[1]:
            raise ValueError(
                f"geometry has {self.geometry.n_features} active voxels but X has {X.shape[1]} columns"
            )
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """True weights, noise level and support of a simulated dataset.

    ``noise`` is the standard-normal draw behind ``y = X w* + sigma * noise``
    when known.
    """

    w_star: np.ndarray
    sigma: float
    noise: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "w_star", _frozen(self.w_star, np.float64))
        if self.noise is not None:
            object.__setattr__(self, "noise", _frozen(self.noise, np.float64))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.w_star)


@dataclass(frozen=True, eq=False)
class SelectionResult:
    q_tilde: np.ndarray
    selected: np.ndarray
    signs: np.ndarray
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        q = _frozen(self.q_tilde, np.float64)
        sel = _frozen(self.selected, np.intp)
        signs = _frozen(self.signs, np.int8)
        if not np.array_equal(sel, np.flatnonzero(q <= self.alpha)):
            raise ValueError("selected must equal {k : q_tilde_k <= alpha}")
        outside = np.ones(len(q), dtype=bool)
        outside[sel] = False
        if np.any(signs[outside] != 0):
            raise ValueError("non-selected voxels must carry sign 0")
        object.__setattr__(self, "q_tilde", q)
        object.__setattr__(self, "selected", sel)
        object.__setattr__(self, "signs", signs)


def voxel_distance(j: int, k: int, geometry: GridGeometry) -> float:
    """Euclidean distance between the grid coordinates of features j and k."""
    p = geometry.n_features
    for idx in (j, k):
        if not 0 <= idx < p:
            raise ValueError(f"feature index {idx} outside [0, {p})")
    a = geometry.feature_coords[j]
    b = geometry.feature_coords[k]
    return math.sqrt(float(np.sum((a - b) ** 2)))


def derive_seed(master_seed: int, labels: Sequence[int]) -> int:
    """Mix a master seed and integer labels into an independent 63-bit seed.

    Uses BLAKE2b over the length-prefixed, fixed-width encoding, so
    ``(c,)`` and ``(c, 0)`` give unrelated streams.
    """
    labels = [int(v) for v in labels]
    payload = struct.pack(f"<Qq{len(labels)}q", int(master_seed) % 2**64, len(labels), *labels)
    digest = hashlib.blake2b(payload, digest_size=8, person=b"ecko-seed").digest()
    return int.from_bytes(digest, "little") >> 1
