"""Evaluation metrics: angular and positional RMS errors, plus the
global/local segmentation consistency pair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PointCloud, angles_degrees_rows, canonicalize_rows
from .planes import OUTLIER, Hyperplane, LabeledCloud


@dataclass(frozen=True)
class GroundTruth:
    """Reference data aligned with the evaluated cloud by index.

    ``cloud`` holds the noise-free positions and true normals;
    ``inlier_mask`` marks the rows that count as ground truth (outlier
    rows are only placeholders); ``labels`` optionally carry segment ids.
    """

    cloud: PointCloud
    inlier_mask: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        mask = np.asarray(self.inlier_mask, dtype=bool)
        if mask.shape != (len(self.cloud),):
            raise ValueError("inlier mask length does not match the cloud")
        object.__setattr__(self, "inlier_mask", mask)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != mask.shape:
                raise ValueError("labels length does not match the cloud")
            object.__setattr__(self, "labels", lab)

    def inlier_points(self) -> np.ndarray:
        return self.cloud.points[self.inlier_mask]


def normal_rms_error(normals: np.ndarray, truth: GroundTruth) -> float:
    """RMS angle, in degrees, between reconstructed and true normals over
    the ground-truth inliers (index correspondence).

    Both sides are canonicalized first, so orientation flips never count
    as error.
    """
    if truth.cloud.normals is None:
        raise ValueError("ground truth has no normals")
    mask = truth.inlier_mask
    if not mask.any():
        raise ValueError("ground truth has no inliers")
    est = np.asarray(normals, dtype=float)
    if est.shape != truth.cloud.points.shape:
        raise ValueError("normals do not align with the ground-truth cloud")
    a = canonicalize_rows(est[mask])
    b = canonicalize_rows(truth.cloud.normals[mask])
    ang = angles_degrees_rows(a, b)
    return float(np.sqrt((ang ** 2).mean()))


def plane_distance_rms(truth: GroundTruth, planes: list[Hyperplane]) -> float:
    """RMS distance from each ground-truth inlier to its closest plane."""
    if not planes:
        raise ValueError("no planes to evaluate")
    pts = truth.inlier_points()
    if len(pts) == 0:
        raise ValueError("ground truth has no inliers")
    normals = np.stack([p.normal for p in planes])
    offsets = np.array([p.offset for p in planes])
    dists = np.abs(pts @ normals.T - offsets)
    dmin = dists.min(axis=1)
    return float(np.sqrt((dmin ** 2).mean()))


def projection_rms(labeled: LabeledCloud, planes: list[Hyperplane],
                   truth: GroundTruth) -> float:
    """RMS distance from projected non-outlier points to the nearest
    ground-truth inlier.

    Each labeled point is projected onto its own plane; the divisor is
    the full input point count, outliers included, so scenes flooded with
    outliers are not rewarded for labeling almost nothing.
    """
    gt = truth.inlier_points()
    if len(gt) == 0:
        raise ValueError("ground truth has no inliers")
    labels = labeled.labels
    total = len(labels)
    picked = labels != OUTLIER
    if not picked.any():
        return 0.0
    pts = labeled.cloud.points[picked]
    lab = labels[picked]
    projected = np.empty_like(pts)
    for plane in planes:
        sel = lab == plane.id
        if not sel.any():
            continue
        sub = pts[sel]
        projected[sel] = sub - ((sub @ plane.normal) - plane.offset)[:, None] \
            * plane.normal
    d, _ = cKDTree(gt).query(projected)
    return float(np.sqrt((d ** 2).sum() / total))


def consistency_errors(seg_a, seg_b) -> tuple[float, float]:
    """Global and local consistency error between two segmentations.

    Per point p, E(S1, S2, p) = |R1(p) \\ R2(p)| / |R1(p)| with R the
    segment containing p. The global score takes the better direction
    summed over all points; the local score picks the better direction
    per point. Both are 0 when one segmentation refines the other and
    LCE <= GCE always.
    """
    a = np.asarray(seg_a).reshape(-1)
    b = np.asarray(seg_b).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"segmentations differ in length: {a.shape} vs {b.shape}")
    n = len(a)
    if n == 0:
        raise ValueError("empty segmentations")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    ka = int(ia.max()) + 1
    kb = int(ib.max()) + 1
    sizes_a = np.bincount(ia, minlength=ka)
    sizes_b = np.bincount(ib, minlength=kb)
    pair = ia * kb + ib
    inter = np.bincount(pair, minlength=ka * kb)[pair]
    e_ab = (sizes_a[ia] - inter) / sizes_a[ia]
    e_ba = (sizes_b[ib] - inter) / sizes_b[ib]
    gce = min(float(e_ab.sum()), float(e_ba.sum())) / n
    lce = float(np.minimum(e_ab, e_ba).sum()) / n
    return gce, lce
