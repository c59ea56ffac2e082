import numpy as np
import pytest

from planefit import NeighborGraph, PointCloud


def brute_force_knn(points: np.ndarray, k: int) -> list[np.ndarray]:
    """Exhaustive k-NN with union symmetrization, ties to lower index."""
    m = len(points)
    diff = points[:, None, :] - points[None, :, :]
    d2 = np.einsum("ijd,ijd->ij", diff, diff)
    sets = [set() for _ in range(m)]
    for i in range(m):
        order = np.lexsort((np.arange(m), d2[i]))
        picked = [j for j in order if j != i][:k]
        for j in picked:
            sets[i].add(j)
            sets[j].add(i)
    return [np.array(sorted(s), dtype=np.int64) for s in sets]


def graph_from_lists(lists, k=1) -> NeighborGraph:
    """Explicit adjacency for hand-built fixtures (already symmetric)."""
    return NeighborGraph(
        neighbors=[np.array(sorted(nb), dtype=np.int64) for nb in lists], k=k)


def random_rotation(dim: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_cloud(points, normals=None) -> PointCloud:
    return PointCloud(np.asarray(points, float),
                      None if normals is None else np.asarray(normals, float))
