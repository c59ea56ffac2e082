"""Synthetic benchmark scenes: 2D line layouts, sampled polyhedra,
Gaussian noise and uniform outliers.

Every generator is a pure function of its parameters and seed (PCG64
streams), so scenes regenerate bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .geometry import PointCloud, canonicalize, canonicalize_rows
from .metrics import GroundTruth
from .planes import OUTLIER

# Outliers are drawn uniformly over the inlier bounding box inflated by
# this fraction on each side.
BOX_INFLATION = 0.05


@dataclass(frozen=True)
class SyntheticScene:
    """Generated input cloud with its aligned ground truth."""

    cloud: PointCloud
    truth: GroundTruth
    params: dict


def _inflated_box(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    pad = (hi - lo) * BOX_INFLATION
    return lo - pad, hi + pad


# ----------------------------------------------------------------------
# 2D eight-segment layout: an axis-aligned square plus a 45-degree
# parallel bundle, three distinct directions in total. The square sides
# stop short of the corners so no neighborhood straddles two directions.
# ----------------------------------------------------------------------

_SQUARE_GAP = 0.4
_LINES_2D = [
    ((0.0 + _SQUARE_GAP, 0.0), (6.0 - _SQUARE_GAP, 0.0)),
    ((6.0, 0.0 + _SQUARE_GAP), (6.0, 6.0 - _SQUARE_GAP)),
    ((6.0 - _SQUARE_GAP, 6.0), (0.0 + _SQUARE_GAP, 6.0)),
    ((0.0, 6.0 - _SQUARE_GAP), (0.0, 0.0 + _SQUARE_GAP)),
    ((8.0, 0.0), (14.0, 6.0)),
    ((9.5, 0.0), (15.5, 6.0)),
    ((11.0, 0.0), (17.0, 6.0)),
    ((12.5, 0.0), (18.5, 6.0)),
]


def gen_lines_2d(points_per_line: int = 100, sigma: float = 0.0,
                 outlier_fraction: float = 0.0, seed: int = 0) -> SyntheticScene:
    """Eight 2D segments: four forming a square, four parallel at 45
    degrees, so the ground truth holds exactly three distinct directions.

    Each segment gets ``points_per_line`` samples uniform along it,
    perturbed by isotropic Gaussian noise of scale ``sigma``. Outliers
    are appended uniformly over the inflated inlier bounding box until
    they make up ``outlier_fraction`` of the total count.

    Sample points carry the exact normal of their segment (outliers get
    random directions), the same convention as the surface samplers.
    Near-horizontal directions cannot survive per-point canonicalization
    of estimated normals: the noise sign splits them into antipodal
    camps, so estimation has to be a deliberate choice (strip the
    normals) rather than the default here.
    """
    if not 0.0 <= outlier_fraction < 1.0:
        raise ValueError("outlier_fraction must lie in [0, 1)")
    if points_per_line < 1:
        raise ValueError("points_per_line must be positive")
    rng = np.random.default_rng(seed)

    exact_parts = []
    normal_parts = []
    for start, end in _LINES_2D:
        a = np.array(start)
        b = np.array(end)
        t = rng.random(points_per_line)
        exact_parts.append(a + t[:, None] * (b - a))
        direction = b - a
        normal_parts.append(canonicalize((-direction[1], direction[0])))
    exact = np.concatenate(exact_parts)
    seg_normals = np.repeat(np.stack(normal_parts), points_per_line, axis=0)
    labels = np.repeat(np.arange(len(_LINES_2D)), points_per_line)

    noisy = exact + rng.normal(0.0, sigma, exact.shape) if sigma > 0 \
        else exact.copy()

    n_in = len(exact)
    n_out = int(round(n_in * outlier_fraction / (1.0 - outlier_fraction)))
    lo, hi = _inflated_box(exact)
    outliers = rng.uniform(lo, hi, (n_out, 2))
    outlier_normals = canonicalize_rows(rng.normal(size=(n_out, 2))) \
        if n_out else np.empty((0, 2))

    cloud = PointCloud(np.vstack([noisy, outliers]),
                       np.vstack([seg_normals, outlier_normals]))
    fill = np.zeros((n_out, 2))
    fill[:, -1] = 1.0
    truth = GroundTruth(
        cloud=PointCloud(np.vstack([exact, outliers]),
                         np.vstack([seg_normals, fill])),
        inlier_mask=np.concatenate([np.ones(n_in, bool), np.zeros(n_out, bool)]),
        labels=np.concatenate([labels, np.full(n_out, OUTLIER, dtype=np.int64)]),
    )
    params = {"generator": "lines2d", "points_per_line": points_per_line,
              "sigma": sigma, "rho": outlier_fraction, "seed": seed}
    return SyntheticScene(cloud=cloud, truth=truth, params=params)


# ----------------------------------------------------------------------
# Polyhedron and triangle-mesh surface sampling
# ----------------------------------------------------------------------

_PHI = (1.0 + np.sqrt(5.0)) / 2.0

_CUBE_VERTICES = np.array([(x, y, z) for x in (-1, 1) for y in (-1, 1)
                           for z in (-1, 1)], dtype=float)

_DODECAHEDRON_VERTICES = np.array(
    [(x, y, z) for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)]
    + [(0.0, s * 1.0 / _PHI, t * _PHI) for s in (-1, 1) for t in (-1, 1)]
    + [(s * 1.0 / _PHI, t * _PHI, 0.0) for s in (-1, 1) for t in (-1, 1)]
    + [(s * _PHI, 0.0, t * 1.0 / _PHI) for s in (-1, 1) for t in (-1, 1)],
    dtype=float)

_SHAPES = {"cube": _CUBE_VERTICES, "dodecahedron": _DODECAHEDRON_VERTICES}


def _hull_faces(vertices: np.ndarray) -> tuple[np.ndarray, list[np.ndarray], np.ndarray]:
    """Triangulate a convex solid and group coplanar triangles into faces.

    Returns the triangle array, the list of triangle-row indices per face
    (face ids sorted by the rounded plane equation, hence deterministic),
    and one outward face normal per face.
    """
    hull = ConvexHull(vertices)
    eqs = np.round(hull.equations, 9)
    groups: dict[tuple, list[int]] = {}
    for row, eq in enumerate(eqs):
        groups.setdefault(tuple(eq), []).append(row)
    face_keys = sorted(groups)
    tri_rows = [np.array(groups[k], dtype=np.int64) for k in face_keys]
    normals = np.array([k[:3] for k in face_keys])
    return hull.simplices, tri_rows, normals


def _sample_triangles(vertices: np.ndarray, triangles: np.ndarray,
                      tri_face: np.ndarray, face_normals: np.ndarray,
                      n: int, noise_factor: float, rng,
                      params: dict) -> SyntheticScene:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    cdf = np.cumsum(areas)
    cdf /= cdf[-1]
    tri = np.searchsorted(cdf, rng.random(n))
    u = rng.random(n)
    v = rng.random(n)
    over = u + v > 1.0
    u[over] = 1.0 - u[over]
    v[over] = 1.0 - v[over]
    exact = a[tri] + u[:, None] * (b[tri] - a[tri]) + v[:, None] * (c[tri] - a[tri])

    labels = tri_face[tri]
    canon = canonicalize_rows(face_normals)
    per_point_normals = canon[labels]

    diag = float(np.linalg.norm(exact.max(axis=0) - exact.min(axis=0)))
    sigma = noise_factor * diag
    noisy = exact + rng.normal(0.0, sigma, exact.shape) if sigma > 0 \
        else exact.copy()

    # Samples carry the normal of the face they came from; estimation from
    # scratch stays available by stripping them.
    cloud = PointCloud(noisy, per_point_normals.copy())
    truth = GroundTruth(cloud=PointCloud(exact, per_point_normals),
                        inlier_mask=np.ones(n, bool),
                        labels=labels.astype(np.int64))
    params = dict(params, noise_sigma=sigma, box_diagonal=diag)
    return SyntheticScene(cloud=cloud, truth=truth, params=params)


def sample_polyhedron(shape: str, n: int, noise_factor: float = 0.0,
                      seed: int = 0) -> SyntheticScene:
    """Sample a polyhedron surface uniformly by area.

    ``shape`` is ``cube`` or ``dodecahedron``. Gaussian noise of scale
    ``noise_factor`` times the bounding-box diagonal of the clean cloud
    perturbs every coordinate. Labels are face ids; truth normals are the
    canonical face normals (3 distinct for the cube, 6 for the
    dodecahedron, since parallel faces collapse).
    """
    if shape not in _SHAPES:
        raise ValueError(f"unknown shape {shape!r}; pick one of {sorted(_SHAPES)}")
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    vertices = _SHAPES[shape]
    triangles, tri_rows, face_normals = _hull_faces(vertices)
    tri_face = np.empty(len(triangles), dtype=np.int64)
    for fid, rows in enumerate(tri_rows):
        tri_face[rows] = fid
    params = {"generator": "polyhedron", "shape": shape, "n": n,
              "noise_factor": noise_factor, "seed": seed}
    return _sample_triangles(vertices, triangles, tri_face, face_normals,
                             n, noise_factor, rng, params)


def sample_mesh(vertices: np.ndarray, faces: np.ndarray, n: int,
                noise_factor: float = 0.0, seed: int = 0) -> SyntheticScene:
    """Sample an arbitrary triangle mesh, one label per triangle."""
    vertices = np.asarray(vertices, dtype=float)
    faces = np.asarray(faces, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise ValueError("vertices must be (V, 3)")
    if faces.ndim != 2 or faces.shape[1] != 3:
        raise ValueError("faces must be (F, 3)")
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    normals = np.cross(vertices[faces[:, 1]] - vertices[faces[:, 0]],
                       vertices[faces[:, 2]] - vertices[faces[:, 0]])
    params = {"generator": "mesh", "n": n, "noise_factor": noise_factor,
              "seed": seed}
    return _sample_triangles(vertices, faces,
                             np.arange(len(faces), dtype=np.int64),
                             normals, n, noise_factor, rng, params)


def corrupt(scene: SyntheticScene, extra_outliers: int,
            seed: int = 0) -> SyntheticScene:
    """Append uniformly distributed outliers to an existing scene.

    Outliers extend the inlier mask with False and the labels with the
    OUTLIER sentinel. When the input cloud carries normals, the new
    points get random unit directions, mimicking what estimation on
    scatter would produce.
    """
    if extra_outliers < 0:
        raise ValueError("extra_outliers must be nonnegative")
    if extra_outliers == 0:
        return scene
    rng = np.random.default_rng(seed)
    pts = scene.cloud.points
    dim = scene.cloud.dimension
    lo, hi = _inflated_box(pts)
    extra = rng.uniform(lo, hi, (extra_outliers, dim))

    new_points = np.vstack([pts, extra])
    new_normals = None
    if scene.cloud.normals is not None:
        rand = rng.normal(size=(extra_outliers, dim))
        new_normals = np.vstack([scene.cloud.normals, canonicalize_rows(rand)])

    t = scene.truth
    fill = np.zeros((extra_outliers, dim))
    fill[:, -1] = 1.0
    truth_normals = t.cloud.normals
    if truth_normals is not None:
        truth_normals = np.vstack([truth_normals, fill])
    truth = GroundTruth(
        cloud=PointCloud(np.vstack([t.cloud.points, extra]), truth_normals),
        inlier_mask=np.concatenate([t.inlier_mask,
                                    np.zeros(extra_outliers, bool)]),
        labels=None if t.labels is None else np.concatenate(
            [t.labels, np.full(extra_outliers, OUTLIER, dtype=np.int64)]),
    )
    params = dict(scene.params)
    params["extra_outliers"] = params.get("extra_outliers", 0) + extra_outliers
    return SyntheticScene(cloud=PointCloud(new_points, new_normals),
                          truth=truth, params=params)
