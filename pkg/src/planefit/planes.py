"""Plane extraction from a reconstructed cloud.

Points sharing a selected normal index split into connected components of
the neighbor graph; components with enough support become planes, the
rest are outliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .geometry import NeighborGraph, PointCloud
from .reconstruct import ReconstructionResult

OUTLIER = -1


@dataclass(frozen=True)
class Hyperplane:
    """A line (2D) or plane (3D): unit normal, signed offset, support.

    Points x on the surface satisfy <normal, x> = offset.
    """

    normal: np.ndarray
    offset: float
    support: np.ndarray
    id: int


@dataclass(frozen=True)
class LabeledCloud:
    """Cloud with per-point plane labels; OUTLIER marks unassigned points.

    The embedded cloud carries the reconstructed per-point normals.
    """

    cloud: PointCloud
    labels: np.ndarray


def extract_planes(cloud: PointCloud, graph: NeighborGraph,
                   result: ReconstructionResult,
                   tau: int) -> tuple[list[Hyperplane], LabeledCloud]:
    """Group same-direction points into planes.

    Only edges whose endpoints share a selected normal index survive;
    each connected component of at least tau points becomes one plane
    with the shared normal and the least-squares offset (the mean of
    <normal, p> over the support). Plane ids are handed out by
    descending support size, ties by first point index. Everything else
    is labeled OUTLIER. An empty plane list is a valid outcome.
    """
    m = len(cloud)
    idx = result.point_normal_index
    src, dst = graph.edge_arrays()
    labels = np.full(m, OUTLIER, dtype=np.int64)
    per_point_normals = result.selected_normals[idx]
    labeled = LabeledCloud(PointCloud(cloud.points, per_point_normals), labels)

    if len(src):
        same = idx[src] == idx[dst]
        adj = sparse.coo_matrix(
            (np.ones(int(same.sum()), dtype=np.int8),
             (src[same], dst[same])), shape=(m, m)).tocsr()
        _, comp = connected_components(adj, directed=False)
    else:
        comp = np.arange(m)

    sizes = np.bincount(comp)
    big = np.flatnonzero(sizes >= tau)
    # scipy assigns component labels in first-point order, so sorting on
    # the label breaks size ties by earliest member
    order = big[np.lexsort((big, -sizes[big]))]

    planes: list[Hyperplane] = []
    for pid, cid in enumerate(order):
        support = np.flatnonzero(comp == cid)
        normal = result.selected_normals[idx[support[0]]]
        offset = float((cloud.points[support] @ normal).mean())
        planes.append(Hyperplane(normal=normal, offset=offset,
                                 support=support, id=pid))
        labels[support] = pid
    return planes, labeled


def point_plane_distance(p, plane: Hyperplane) -> float:
    """Unsigned distance from a point to the plane."""
    p = np.asarray(p, dtype=float)
    return abs(float(p @ plane.normal) - plane.offset)


def project_point(p, plane: Hyperplane) -> np.ndarray:
    """Closest point on the plane."""
    p = np.asarray(p, dtype=float)
    return p - (float(p @ plane.normal) - plane.offset) * plane.normal
