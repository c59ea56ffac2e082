"""Point cloud primitives: clouds, exact k-NN graphs, PCA normals.

Works for 2D and 3D clouds alike; the dimension is fixed by the point
array and every operation stays within it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

# Components with magnitude at or below this count as zero when picking
# the canonical orientation of a direction.
HORIZON_EPS = 1e-12


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of D-dimensional points with optional unit normals."""

    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError(f"points must be (M, 2) or (M, 3), got {pts.shape}")
        object.__setattr__(self, "points", pts)
        if self.normals is not None:
            nrm = np.asarray(self.normals, dtype=float)
            if nrm.shape != pts.shape:
                raise ValueError(
                    f"normals shape {nrm.shape} does not match points {pts.shape}"
                )
            object.__setattr__(self, "normals", nrm)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def with_normals(self, normals: np.ndarray) -> "PointCloud":
        return PointCloud(self.points, normals)


@dataclass(frozen=True)
class NeighborGraph:
    """Symmetric k-NN adjacency over point indices.

    Per-point neighbor lists are sorted, deduplicated and self-free; the
    union symmetrization guarantees j in N_i whenever i in N_j.
    """

    neighbors: list[np.ndarray]
    k: int

    def __len__(self) -> int:
        return len(self.neighbors)

    @cached_property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return sum(len(nb) for nb in self.neighbors) // 2

    @cached_property
    def _directed_edges(self) -> tuple[np.ndarray, np.ndarray]:
        sizes = np.fromiter((len(nb) for nb in self.neighbors), dtype=np.int64,
                            count=len(self.neighbors))
        src = np.repeat(np.arange(len(self.neighbors), dtype=np.int64), sizes)
        if len(self.neighbors):
            dst = np.concatenate([np.asarray(nb, dtype=np.int64)
                                  for nb in self.neighbors])
        else:
            dst = np.empty(0, dtype=np.int64)
        return src, dst

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Directed edge arrays (each undirected edge appears both ways)."""
        return self._directed_edges


def canonicalize(direction) -> np.ndarray:
    """Unit-normalize a direction and flip it into the canonical half space.

    The canonical representative has a nonnegative last component; when the
    last component vanishes (within 1e-12) the first component of magnitude
    above 1e-12 is made positive instead, so antipodal directions always
    collapse to a single representative.
    """
    v = np.asarray(direction, dtype=float).reshape(-1)
    return canonicalize_rows(v[None, :])[0]


def canonicalize_rows(directions: np.ndarray) -> np.ndarray:
    """Vectorized :func:`canonicalize` over the rows of an (N, D) array."""
    arr = np.asarray(directions, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected an (N, D) array of directions")
    norms = np.linalg.norm(arr, axis=1)
    if not np.all(norms > 0.0) or not np.all(np.isfinite(norms)):
        raise ValueError("cannot canonicalize zero or non-finite directions")
    norms = np.where(np.abs(norms - 1.0) <= 4e-16, 1.0, norms)
    out = arr / norms[:, None]
    last = out[:, -1]
    flip = last < -HORIZON_EPS
    horizon = np.abs(last) <= HORIZON_EPS
    if horizon.any():
        rows = np.where(horizon)[0]
        sub = out[rows]
        significant = np.abs(sub) > HORIZON_EPS
        # all-zero rows were excluded by the norm check above
        first = np.argmax(significant, axis=1)
        vals = sub[np.arange(len(rows)), first]
        flip[rows] = vals < 0.0
    out[flip] *= -1.0
    return out


def angle_degrees(a, b) -> float:
    """Angle between two unit directions, in degrees within [0, 180].

    Uses the half-angle form 2*atan2(|a-b|, |a+b|), which stays accurate
    down to machine precision near 0 and 180 where the arccosine of a dot
    product loses digits.
    """
    av = np.asarray(a, dtype=float).reshape(-1)
    bv = np.asarray(b, dtype=float).reshape(-1)
    return float(np.degrees(2.0 * np.arctan2(np.linalg.norm(av - bv),
                                             np.linalg.norm(av + bv))))


def angles_degrees_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise :func:`angle_degrees` for two (N, D) arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.degrees(2.0 * np.arctan2(np.linalg.norm(a - b, axis=1),
                                       np.linalg.norm(a + b, axis=1)))


def _knn_candidates(points: np.ndarray, tree: cKDTree, k: int,
                    workers: int) -> np.ndarray:
    """Exact k nearest neighbors per point, ties broken by lower index."""
    m = points.shape[0]
    q = min(m, k + 2)
    _, idxs = tree.query(points, k=q, workers=workers)
    # Distances are recomputed from coordinates so that ordering decisions
    # and the tie handling below share one consistent value per pair.
    diffs = points[idxs] - points[:, None, :]
    d2 = np.einsum("mqd,mqd->mq", diffs, diffs)
    order = np.lexsort((idxs, d2), axis=-1)
    idxs = np.take_along_axis(idxs, order, axis=1)
    d2 = np.take_along_axis(d2, order, axis=1)

    out = np.empty((m, k), dtype=np.int64)
    for i in range(m):
        row = idxs[i]
        keep = row != i
        cand = row[keep]
        cd2 = d2[i][keep]
        if len(cand) > k and cd2[k - 1] == cd2[k]:
            # The cut falls inside a group of equidistant points; widen the
            # pool to every point at the boundary radius and re-select.
            r = float(np.sqrt(cd2[k - 1]))
            pool = np.asarray(tree.query_ball_point(points[i], r * (1.0 + 1e-9)),
                              dtype=np.int64)
            pool = pool[pool != i]
            pd = points[pool] - points[i]
            pd2 = np.einsum("nd,nd->n", pd, pd)
            sel = np.lexsort((pool, pd2))[:k]
            out[i] = pool[sel]
        else:
            out[i] = cand[:k]
    return out


def build_knn_graph(cloud: PointCloud, k: int, workers: int = 1) -> NeighborGraph:
    """Exact k nearest neighbor graph, symmetrized by edge union.

    Ties in distance resolve to the lower point index, so the result is
    reproducible and matches an exhaustive search. Requires at least k+1
    points.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    m = len(cloud)
    if m < k + 1:
        raise ValueError(f"need at least {k + 1} points for k={k}, got {m}")
    pts = cloud.points
    tree = cKDTree(pts)
    knn = _knn_candidates(pts, tree, k, workers)

    src = np.repeat(np.arange(m, dtype=np.int64), k)
    dst = knn.reshape(-1)
    data = np.ones(len(src), dtype=np.int8)
    adj = sparse.coo_matrix((data, (src, dst)), shape=(m, m))
    sym = ((adj + adj.T) > 0).tocsr()
    sym.sort_indices()
    neighbors = np.split(sym.indices.astype(np.int64), sym.indptr[1:-1])
    return NeighborGraph(neighbors=list(neighbors), k=k)


def estimate_normals_pca(cloud: PointCloud,
                         graph: NeighborGraph) -> tuple[PointCloud, int]:
    """Per-point normals from the smallest principal axis of each
    neighborhood (the point together with its graph neighbors).

    Returns the cloud with canonical normals attached plus the number of
    degenerate neighborhoods (all points coincident) that fell back to the
    last-axis unit direction.
    """
    if len(graph) != len(cloud):
        raise ValueError("graph was not built over this cloud")
    pts = cloud.points
    m, dim = pts.shape
    sizes = np.fromiter((len(nb) + 1 for nb in graph.neighbors),
                        dtype=np.int64, count=m)
    normals = np.empty((m, dim))
    degenerate = 0
    for s in np.unique(sizes):
        rows = np.where(sizes == s)[0]
        nbh = np.empty((len(rows), s), dtype=np.int64)
        for j, i in enumerate(rows):
            nbh[j, 0] = i
            nbh[j, 1:] = graph.neighbors[i]
        coords = pts[nbh]
        centered = coords - coords.mean(axis=1, keepdims=True)
        cov = np.einsum("bki,bkj->bij", centered, centered)
        evals, evecs = np.linalg.eigh(cov)
        nrm = evecs[:, :, 0].copy()
        flat = evals.sum(axis=1) <= 1e-24
        if flat.any():
            degenerate += int(flat.sum())
            nrm[flat] = 0.0
            nrm[flat, -1] = 1.0
        normals[rows] = nrm
    return cloud.with_normals(canonicalize_rows(normals)), degenerate
