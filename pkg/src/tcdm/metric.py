"""Full scoring pipeline: segmentation, per-patch features, fusion.

The final score fuses two global indices: F1, the product of the mean
geometry and mean color complexity similarities, and F2, the mean
prediction-field correlation, as Q = alpha * F1 + (1 - alpha) * F2.
Higher Q predicts better visual quality.

Scoring many distorted versions of one reference should go through
``prepare_reference`` once; everything derived from the reference alone
(seeds, its partition, self encodings, first difference fields) is reused.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_CONFIG, MetricConfig, color_weights_for, rgb_to_yuv
from .features import PatchFeatures, _field_neighbor_ids, _g_rows, patch_features
from .pointcloud import PointCloud
from .savar import PatchEncoding, self_complexity
from .segmentation import Patch, PatchPair, nearest_seed_labels, select_seeds
from .spatial import build_index

__all__ = [
    "MetricConfig",
    "PatchCounts",
    "QualityReport",
    "ReferenceState",
    "prepare_reference",
    "score",
    "score_with_reference",
    "score_if_color",
    "resolve_threads",
]


@dataclass(frozen=True)
class PatchCounts:
    ref_points: int
    dist_points: int
    used: int
    skipped: int
    empty: int


@dataclass(frozen=True)
class QualityReport:
    q: float
    f1: float
    f1_geometry_mean: float
    f1_color_mean: float
    f2: float
    per_patch: list
    config: MetricConfig
    counts: PatchCounts

    def to_dict(self, include_patches: bool = False) -> dict:
        out = {
            "q": self.q,
            "f1": self.f1,
            "f1_geometry_mean": self.f1_geometry_mean,
            "f1_color_mean": self.f1_color_mean,
            "f2": self.f2,
            "config": self.config.to_dict(),
            "counts": {
                "ref_points": self.counts.ref_points,
                "dist_points": self.counts.dist_points,
                "patches_used": self.counts.used,
                "patches_skipped": self.counts.skipped,
                "patches_empty": self.counts.empty,
            },
        }
        if include_patches:
            out["per_patch"] = [
                {
                    "f1_geometry": p.f1_geometry,
                    "f1_color": p.f1_color,
                    "f2": p.f2,
                    "diagnostics": list(p.diagnostics),
                    "skipped": p.skipped,
                }
                for p in self.per_patch
            ]
        return out


@dataclass(frozen=True)
class _ReferencePatch:
    patch: Patch
    encoding: PatchEncoding | None   # None when the patch is degenerate
    field_ids: np.ndarray | None
    field_x: np.ndarray | None


@dataclass(frozen=True)
class ReferenceState:
    """Everything scoring needs that depends only on the reference."""

    config: MetricConfig
    seed_positions: np.ndarray
    ref_points: int
    patches: list


def resolve_threads(threads: int | None) -> int:
    """Worker count: explicit argument, then TCDM_THREADS, then machine."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("TCDM_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _working_colors(cloud: PointCloud, config: MetricConfig) -> np.ndarray:
    if config.color_space == "yuv":
        return rgb_to_yuv(cloud.colors)
    return cloud.colors


def _patches_for(positions: np.ndarray, colors: np.ndarray, labels: np.ndarray,
                 seed_positions: np.ndarray) -> list:
    n_seeds = seed_positions.shape[0]
    # stable sort groups members per label while keeping cloud order
    order = np.argsort(labels, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(np.bincount(labels, minlength=n_seeds))])
    patches = []
    for l in range(n_seeds):
        members = order[bounds[l]:bounds[l + 1]]
        patches.append(Patch(
            indices=members,
            positions=positions[members] - seed_positions[l],
            colors=colors[members],
        ))
    return patches


def prepare_reference(reference: PointCloud, config: MetricConfig | None = None) -> ReferenceState:
    """Segment the reference and encode every patch from itself."""
    config = config or DEFAULT_CONFIG
    reference.validate()
    if config.seeds > reference.count:
        raise ValueError(
            f"seed count {config.seeds} exceeds reference size {reference.count}")
    colors = _working_colors(reference, config)
    seeds = select_seeds(reference, config.seeds, config.sampling, config.sampling_seed)
    labels = nearest_seed_labels(reference.positions, seeds.positions)
    weights = color_weights_for(config)
    ref_patches = _patches_for(reference.positions, colors, labels, seeds.positions)

    def encode(patch: Patch) -> _ReferencePatch:
        if patch.count < 2:
            return _ReferencePatch(patch, None, None, None)
        index = build_index(patch.positions)
        enc = self_complexity(patch, config.neighbors, config.weight_scheme,
                              config.eta_mode, config.ridge, patch_index=index)
        ids = _field_neighbor_ids(enc.predictions, config.neighbors)
        fx = _g_rows(enc.predictions, enc.predictions[ids], weights)
        return _ReferencePatch(patch, enc, ids, fx)

    prepared = [encode(p) for p in ref_patches]
    return ReferenceState(config=config, seed_positions=seeds.positions,
                          ref_points=reference.count, patches=prepared)


def score_with_reference(state: ReferenceState, distorted: PointCloud,
                         threads: int | None = None) -> QualityReport:
    """Score a distorted cloud against a prepared reference."""
    distorted.validate()
    config = state.config
    colors = _working_colors(distorted, config)
    labels = nearest_seed_labels(distorted.positions, state.seed_positions)
    dist_patches = _patches_for(distorted.positions, colors, labels, state.seed_positions)

    def one(l: int) -> PatchFeatures:
        ref = state.patches[l]
        pair = PatchPair(l, state.seed_positions[l], ref.patch, dist_patches[l])
        return patch_features(pair, config, self_encoding=ref.encoding,
                              field_x=ref.field_x, field_ids=ref.field_ids)

    n_workers = resolve_threads(threads)
    indices = range(len(state.patches))
    if n_workers > 1 and len(state.patches) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            feats = list(pool.map(one, indices))
    else:
        feats = [one(l) for l in indices]
    empty = sum(1 for l in indices
                if state.patches[l].patch.count >= 2 and dist_patches[l].count == 0)
    return _fuse(feats, config, state.ref_points, distorted.count, empty)


def _fuse(feats: list, config: MetricConfig, n_ref: int, n_dist: int,
          empty: int) -> QualityReport:
    used = [f for f in feats if not f.skipped]
    if not used:
        raise ValueError("every patch is degenerate; cannot score this pair")
    f1_geom = float(np.mean([f.f1_geometry for f in used]))
    f1_col = float(np.mean([f.f1_color for f in used]))
    f2 = float(np.mean([f.f2 for f in used]))
    f1 = f1_geom * f1_col
    q = config.alpha * f1 + (1.0 - config.alpha) * f2
    counts = PatchCounts(
        ref_points=n_ref,
        dist_points=n_dist,
        used=len(used),
        skipped=len(feats) - len(used),
        empty=empty,
    )
    return QualityReport(q=q, f1=f1, f1_geometry_mean=f1_geom, f1_color_mean=f1_col,
                         f2=f2, per_patch=feats, config=config, counts=counts)


def score(reference: PointCloud, distorted: PointCloud,
          config: MetricConfig | None = None, threads: int | None = None) -> QualityReport:
    """Score one (reference, distorted) pair end to end."""
    state = prepare_reference(reference, config)
    return score_with_reference(state, distorted, threads=threads)


def score_if_color(reference: PointCloud, distorted: PointCloud,
                   config: MetricConfig | None = None,
                   threads: int | None = None) -> QualityReport:
    """Score with the configured color space applied.

    Input colors are always RGB as stored; when the config selects yuv the
    channels are converted before encoding and the luma-weighted color
    difference is used. ``score`` applies the same conversion, so this is
    the explicit entry point for color-space experiments.
    """
    return score(reference, distorted, config, threads=threads)
