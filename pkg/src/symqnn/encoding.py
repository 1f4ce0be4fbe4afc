"""Point-cloud preprocessing and Z feature maps.

Feature vectors for the invariant models are laid out self block first
(``q_00 .. q_{n-1,n-1}``) followed by the pair block (``q_ij``, ``i < j`` in
lexicographic order). Qubit ``k`` of the register encodes feature ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .circuit import ParamCircuit
from .statevector import Gate

TWO_PI = 2.0 * np.pi
MINKOWSKI = np.array([1.0, -1.0, -1.0, -1.0])


class SignatureError(ValueError):
    """Minkowski features need 4-vectors (E, px, py, pz)."""


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class PointCloudSample:
    points: np.ndarray
    label: int = 1

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be an (n, d) matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label}")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class InvariantFeatures:
    self_block: np.ndarray
    pair_block: np.ndarray
    include_self: bool = True

    def vector(self) -> np.ndarray:
        if self.include_self:
            return np.concatenate([self.self_block, self.pair_block])
        return np.asarray(self.pair_block)

    def __len__(self) -> int:
        return len(self.vector())


def pair_list(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


def n_invariant_features(n_points: int, include_self: bool) -> int:
    return n_points * (n_points + 1) // 2 if include_self else n_points * (n_points - 1) // 2


def _gram_features(points: np.ndarray, metric: np.ndarray | None, include_self: bool) -> np.ndarray:
    """Batched inner-product features; ``points`` is (..., n, d)."""
    pts = np.asarray(points, dtype=np.float64)
    weighted = pts if metric is None else pts * metric
    gram = np.einsum("...ik,...jk->...ij", weighted, pts)
    n = pts.shape[-2]
    iu, ju = np.triu_indices(n, k=1)
    pair = gram[..., iu, ju]
    if not include_self:
        return pair
    diag = np.diagonal(gram, axis1=-2, axis2=-1)
    return np.concatenate([diag, pair], axis=-1)


def euclidean_features(points: np.ndarray, include_self: bool = True) -> np.ndarray:
    return _gram_features(points, None, include_self)


def minkowski_features(points: np.ndarray, include_self: bool = False) -> np.ndarray:
    pts = np.asarray(points)
    if pts.shape[-1] != 4:
        raise SignatureError(f"Minkowski features need d = 4, got d = {pts.shape[-1]}")
    return _gram_features(pts, MINKOWSKI, include_self)


def _split(sample_points: np.ndarray, flat: np.ndarray, include_self: bool) -> InvariantFeatures:
    n = sample_points.shape[0]
    if include_self:
        return InvariantFeatures(flat[:n], flat[n:], True)
    return InvariantFeatures(np.empty(0), flat, False)


def inner_products_euclidean(sample: PointCloudSample, include_self: bool = True) -> InvariantFeatures:
    return _split(sample.points, euclidean_features(sample.points, include_self), include_self)


def inner_products_minkowski(sample: PointCloudSample, include_self: bool = False) -> InvariantFeatures:
    return _split(sample.points, minkowski_features(sample.points, include_self), include_self)


def flatten_baseline(sample: PointCloudSample | np.ndarray) -> np.ndarray:
    """Row-major flattening: point 0 coordinates, then point 1, ..."""
    pts = sample.points if isinstance(sample, PointCloudSample) else np.asarray(sample, dtype=np.float64)
    return pts.reshape(*pts.shape[:-2], -1)


def center_points(points: np.ndarray) -> np.ndarray:
    """Subtract each cloud's centroid (removes global translations)."""
    pts = np.asarray(points, dtype=np.float64)
    return pts - pts.mean(axis=-2, keepdims=True)


def normalize_size(points: np.ndarray) -> np.ndarray:
    """Center each cloud and rescale it to unit RMS radius (removes translation and resizing)."""
    pts = center_points(points)
    rms = np.sqrt(np.mean(np.sum(pts * pts, axis=-1), axis=-1))
    rms = np.where(rms > 0, rms, 1.0)
    return pts / rms[..., None, None]


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature min-max map onto [0, 2*pi] with clamping outside the fitted range."""

    lo: np.ndarray
    hi: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        span = self.hi - self.lo
        degenerate = span <= 0
        safe = np.where(degenerate, 1.0, span)
        scaled = TWO_PI * ((x - self.lo) / safe)  # ratio is exactly 1 at the fitted max
        scaled = np.clip(scaled, 0.0, TWO_PI)
        return np.where(degenerate, np.pi, scaled)

    __call__ = transform

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        return cls(np.asarray(d["lo"], dtype=np.float64), np.asarray(d["hi"], dtype=np.float64))


def fit_scaler(training_features, groups: Sequence[int] | None = None) -> FeatureScaler:
    """Fit min/max per feature on a training set.

    ``training_features`` is an (N, F) array or a list of
    :class:`InvariantFeatures`. Features sharing a ``groups`` id share one
    min/max, which keeps the map symmetric across features that a point
    permutation can exchange.
    """
    if isinstance(training_features, (list, tuple)) and training_features and isinstance(
        training_features[0], InvariantFeatures
    ):
        training_features = [f.vector() for f in training_features]
    X = np.asarray(training_features, dtype=np.float64)
    if X.size == 0 or X.shape[0] == 0:
        raise FitError("cannot fit a scaler on an empty training set")
    X = X.reshape(X.shape[0], -1)
    lo, hi = X.min(axis=0), X.max(axis=0)
    if groups is not None:
        groups = np.asarray(groups)
        if groups.shape != (X.shape[1],):
            raise FitError(f"groups must have one entry per feature ({X.shape[1]})")
        for g in np.unique(groups):
            sel = groups == g
            lo[sel], hi[sel] = lo[sel].min(), hi[sel].max()
    return FeatureScaler(lo, hi)


def block_groups(n_points: int, include_self: bool) -> list[int]:
    """Group ids tying the self block and the pair block separately."""
    n_pair = n_points * (n_points - 1) // 2
    return ([0] * n_points if include_self else []) + [1] * n_pair


def z_feature_map(scaled_features: Sequence[float]) -> ParamCircuit:
    """H then RZ(feature) on one qubit per feature, all angles fixed."""
    feats = np.asarray(scaled_features, dtype=np.float64).reshape(-1)
    gates = []
    for k, phi in enumerate(feats):
        gates.append(Gate("H", (k,)))
        gates.append(Gate("RZ", (k,), fixed_angle=float(phi)))
    return ParamCircuit(len(feats), tuple(gates), 0, {"builder": "z_feature_map"})


_BITS_CACHE: dict[int, np.ndarray] = {}


def _bit_table(n: int) -> np.ndarray:
    if n not in _BITS_CACHE:
        idx = np.arange(1 << n)
        _BITS_CACHE[n] = ((idx[:, None] >> np.arange(n)) & 1).astype(np.float64)
    return _BITS_CACHE[n]


def encode_batch(scaled_features: np.ndarray) -> np.ndarray:
    """Statevectors produced by :func:`z_feature_map` on |0...0>, for a batch.

    Each qubit ends up in (e^{-i phi/2}|0> + e^{i phi/2}|1>)/sqrt(2), so the
    product state has amplitude 2^{-n/2} exp(i(sum_k b_k phi_k - sum_k phi_k/2)).
    """
    phi = np.atleast_2d(np.asarray(scaled_features, dtype=np.float64))
    n = phi.shape[1]
    phase = phi @ _bit_table(n).T - 0.5 * phi.sum(axis=1, keepdims=True)
    return np.exp(1j * phase) * (2.0 ** (-0.5 * n))
