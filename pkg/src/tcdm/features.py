"""Per-patch quality features from complexities and prediction terms.

Two complexity similarities (geometry, color) compare self- against
cross-prediction complexity in an SSIM-style ratio; a third feature
correlates local difference fields computed over the two reconstructed
patches, exploiting their row-for-row point correspondence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import MetricConfig, color_weights_for
from .pointcloud import Point
from .savar import PatchEncoding, cross_complexity, self_complexity
from .segmentation import PatchPair
from .spatial import build_index, knn_batch

__all__ = [
    "PatchFeatures",
    "complexity_similarity",
    "g_difference",
    "difference_fields",
    "prediction_similarity",
    "patch_features",
]


@dataclass(frozen=True)
class PatchFeatures:
    """Feature triple for one patch pair, plus complexity diagnostics.

    ``skipped`` marks degenerate patches (fewer than 2 reference points)
    that must not enter any aggregate. Diagnostics hold (geometry self,
    geometry cross, color self, color cross) complexities.
    """

    f1_geometry: float
    f1_color: float
    f2: float
    diagnostics: tuple
    skipped: bool = False


def complexity_similarity(c_self: float, c_cross: float, stability: float) -> float:
    """SSIM-style ratio of two complexities, 1 iff they coincide."""
    if c_self < 0 or c_cross < 0:
        raise ValueError("complexities must be nonnegative")
    if stability <= 0:
        raise ValueError("stability constant must be positive")
    return (2.0 * c_self * c_cross + stability) / (c_self * c_self + c_cross * c_cross + stability)


def g_difference(a: Point, b: Point, color_weights) -> float:
    """Combined geometry-color difference of two points.

    The weighted absolute color difference (plus one) scales the Euclidean
    position distance, so coincident positions always give zero.
    """
    w = np.asarray(color_weights, dtype=np.float64)
    if (w < 0).any():
        raise ValueError("color weights must be nonnegative")
    color_term = float((w * np.abs(a.color - b.color)).sum()) + 1.0
    geom = float(np.sqrt(((a.position - b.position) ** 2).sum()))
    return color_term * geom


def _g_rows(anchor: np.ndarray, neighbors: np.ndarray, color_weights: np.ndarray) -> np.ndarray:
    """Vectorized g over (n, 6) anchors and their (n, K, 6) neighbors."""
    dpos = neighbors[:, :, :3] - anchor[:, None, :3]
    geom = np.sqrt((dpos ** 2).sum(axis=2))
    dcol = np.abs(neighbors[:, :, 3:] - anchor[:, None, 3:])
    return ((dcol * color_weights).sum(axis=2) + 1.0) * geom


def difference_fields(x_hat: np.ndarray, y_hat: np.ndarray, k: int, color_weights):
    """Point-wise difference fields over both reconstructed patches.

    Neighbor lists are found once on the first reconstruction (self
    excluded, short lists padded with the farthest neighbor) and reused
    row-for-row on the second, so the two fields stay in correspondence.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if x_hat.shape != y_hat.shape or x_hat.ndim != 2 or x_hat.shape[1] != 6:
        raise ValueError("prediction terms must be matching (n, 6) matrices")
    n = x_hat.shape[0]
    if n < 2:
        raise ValueError("difference fields need at least 2 points")
    ids = _field_neighbor_ids(x_hat, k)
    w = np.asarray(color_weights, dtype=np.float64)
    return _g_rows(x_hat, x_hat[ids], w), _g_rows(y_hat, y_hat[ids], w)


def _field_neighbor_ids(x_hat: np.ndarray, k: int) -> np.ndarray:
    index = build_index(x_hat[:, :3])
    n = x_hat.shape[0]
    idx, _ = knn_batch(index, x_hat[:, :3], k, exclude=np.arange(n))
    k_eff = min(k, n - 1)
    idx = idx[:, :k_eff]
    if k_eff < k:
        idx = np.concatenate([idx, np.repeat(idx[:, -1:], k - k_eff, axis=1)], axis=1)
    return idx


def prediction_similarity(field_x: np.ndarray, field_y: np.ndarray, stability: float) -> float:
    """Normalized covariance of the two flattened difference fields."""
    if field_x.shape != field_y.shape:
        raise ValueError("difference fields must have the same shape")
    if stability <= 0:
        raise ValueError("stability constant must be positive")
    vx = np.asarray(field_x, dtype=np.float64).ravel()
    vy = np.asarray(field_y, dtype=np.float64).ravel()
    dx = vx - vx.mean()
    dy = vy - vy.mean()
    var_x = (dx * dx).mean()
    var_y = (dy * dy).mean()
    cov = (dx * dy).mean()
    # sqrt of the variance product: identical fields give exactly 1
    return float((cov + stability) / (np.sqrt(var_x * var_y) + stability))


_EMPTY_DIAGNOSTICS = (0.0, 0.0, 0.0, 0.0)


def patch_features(pair: PatchPair, config: MetricConfig | None = None,
                   self_encoding: PatchEncoding | None = None,
                   field_x: np.ndarray | None = None,
                   field_ids: np.ndarray | None = None) -> PatchFeatures:
    """Compute the feature triple of one patch pair.

    Reference patches with fewer than 2 points are skipped; an empty
    distorted patch means the cell lost all content and scores 0 on every
    feature. Reference-side intermediates (self encoding, first field) may
    be passed in when the caller scores many distorted clouds against one
    reference.
    """
    config = config or MetricConfig()
    n_ref, n_dist = pair.ref.count, pair.dist.count
    if n_ref < 2:
        return PatchFeatures(0.0, 0.0, 0.0, _EMPTY_DIAGNOSTICS, skipped=True)
    if self_encoding is None:
        self_encoding = self_complexity(pair.ref, config.neighbors, config.weight_scheme,
                                        config.eta_mode, config.ridge)
    if n_dist == 0:
        diag = (self_encoding.complexity_geometry, 0.0, self_encoding.complexity_color, 0.0)
        return PatchFeatures(0.0, 0.0, 0.0, diag, skipped=False)
    cross_encoding = cross_complexity(pair.ref, pair.dist, config.neighbors,
                                      config.weight_scheme, config.eta_mode, config.ridge)
    f1_geom = complexity_similarity(self_encoding.complexity_geometry,
                                    cross_encoding.complexity_geometry, config.stability)
    f1_col = complexity_similarity(self_encoding.complexity_color,
                                   cross_encoding.complexity_color, config.stability)
    weights = color_weights_for(config)
    if field_x is None or field_ids is None:
        field_ids = _field_neighbor_ids(self_encoding.predictions, config.neighbors)
        field_x = _g_rows(self_encoding.predictions,
                          self_encoding.predictions[field_ids], weights)
    field_y = _g_rows(cross_encoding.predictions,
                      cross_encoding.predictions[field_ids], weights)
    f2 = prediction_similarity(field_x, field_y, config.stability)
    diag = (self_encoding.complexity_geometry, cross_encoding.complexity_geometry,
            self_encoding.complexity_color, cross_encoding.complexity_color)
    return PatchFeatures(f1_geom, f1_col, f2, diag, skipped=False)
