"""Region fusion: one greedy merging sweep of an L0-gradient objective.

Points start as singleton regions carrying their own normal. A sweep
merges neighboring regions whenever the weighted variance increase of
averaging their normals is paid for by the smoothness term, which drops
by lambda for every graph edge the merge internalizes.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geometry import HORIZON_EPS, NeighborGraph, PointCloud


@dataclass(frozen=True)
class Region:
    """A maximal set of points sharing one reconstruction normal."""

    id: int
    point_ids: np.ndarray
    weight: int
    normal: np.ndarray


class RegionPartition:
    """Disjoint constant-normal regions over one point cloud.

    Region ids index a slot table sized by the point count; a merge keeps
    the smaller id live and records the other in a merge forest, so point
    membership resolves lazily instead of being copied around. Adjacency
    is kept per region as ``{neighbor id: edge multiplicity}``.
    """

    def __init__(self, cloud: PointCloud, graph: NeighborGraph,
                 normals: list[tuple], weights: list[int], alive: list[bool],
                 adjacency: list[dict[int, int]], parent: np.ndarray):
        self.cloud = cloud
        self.graph = graph
        self._normals = normals
        self._weights = weights
        self._alive = alive
        self._adj = adjacency
        self._parent = parent

    # ------------------------------------------------------------------
    # bookkeeping
    # ------------------------------------------------------------------

    def copy(self) -> "RegionPartition":
        return RegionPartition(
            self.cloud,
            self.graph,
            list(self._normals),
            list(self._weights),
            list(self._alive),
            [dict(d) for d in self._adj],
            self._parent.copy(),
        )

    def live_ids(self) -> list[int]:
        return [i for i, a in enumerate(self._alive) if a]

    @property
    def num_regions(self) -> int:
        return sum(self._alive)

    def weight_of(self, rid: int) -> int:
        return self._weights[rid]

    def normal_of(self, rid: int) -> np.ndarray:
        return np.array(self._normals[rid])

    def point_to_region(self) -> np.ndarray:
        """Region id per point, resolved through the merge forest."""
        p = self._parent.copy()
        while True:
            pp = p[p]
            if np.array_equal(pp, p):
                return p
            p = pp

    def region_normals_per_point(self) -> np.ndarray:
        """(M, D) array of each point's current region normal."""
        dim = self.cloud.dimension
        table = np.zeros((len(self._parent), dim))
        for rid in self.live_ids():
            table[rid] = self._normals[rid]
        return table[self.point_to_region()]

    def regions(self) -> list[Region]:
        """Live regions with their member point ids, ascending by id."""
        p2r = self.point_to_region()
        order = np.argsort(p2r, kind="stable")
        sorted_rids = p2r[order]
        cuts = np.flatnonzero(np.diff(sorted_rids)) + 1
        out = []
        for chunk in np.split(order, cuts):
            rid = int(p2r[chunk[0]])
            out.append(Region(id=rid, point_ids=chunk,
                              weight=self._weights[rid],
                              normal=self.normal_of(rid)))
        return out

    def adjacency_pairs(self) -> dict[tuple[int, int], int]:
        """Edge multiplicities keyed by (lower id, higher id)."""
        pairs = {}
        for i, alive in enumerate(self._alive):
            if not alive:
                continue
            for j, c in self._adj[i].items():
                if j > i:
                    pairs[(i, j)] = c
        return pairs


def init_partition(cloud: PointCloud, graph: NeighborGraph) -> RegionPartition:
    """Singleton partition: one region per point, one unit of adjacency per
    graph edge."""
    if cloud.normals is None:
        raise ValueError("cloud has no normals; estimate them first")
    if len(graph) != len(cloud):
        raise ValueError("graph was not built over this cloud")
    m = len(cloud)
    normals = [tuple(row) for row in cloud.normals]
    weights = [1] * m
    alive = [True] * m
    adjacency = [dict.fromkeys(nb.tolist(), 1) for nb in graph.neighbors]
    parent = np.arange(m, dtype=np.int64)
    return RegionPartition(cloud, graph, normals, weights, alive, adjacency, parent)


def partition_energy(partition: RegionPartition, original: PointCloud,
                     lam: float) -> float:
    """Objective value of a partition against a reference cloud.

    Data term: squared distance from each point's region normal to its
    reference normal. Smoothness term: lambda times the number of directed
    graph edges whose endpoint normals differ (each undirected edge counts
    twice, once per direction).
    """
    if original.normals is None:
        raise ValueError("reference cloud has no normals")
    per_point = partition.region_normals_per_point()
    data = float(((per_point - original.normals) ** 2).sum())
    src, dst = partition.graph.edge_arrays()
    if len(src) == 0:
        return data
    differs = (per_point[src] != per_point[dst]).any(axis=1)
    return data + lam * float(differs.sum())


def _canonical_mean(yk: tuple, yd: tuple, wk: int, wd: int, dim: int) -> tuple:
    """Weight-averaged normal, renormalized and flipped canonical."""
    if yk == yd:
        # keep equal normals bitwise stable so identical-normal regions
        # still pool after any number of merges
        return yk
    wm = wk + wd
    if dim == 3:
        mx = (wk * yk[0] + wd * yd[0]) / wm
        my = (wk * yk[1] + wd * yd[1]) / wm
        mz = (wk * yk[2] + wd * yd[2]) / wm
        n = math.sqrt(mx * mx + my * my + mz * mz)
        if n < 1e-12:
            return yk if wk >= wd else yd
        mx /= n
        my /= n
        mz /= n
        if mz < -HORIZON_EPS:
            return (-mx, -my, -mz)
        if mz <= HORIZON_EPS:
            if mx < -HORIZON_EPS or (abs(mx) <= HORIZON_EPS and my < 0.0):
                return (-mx, -my, -mz)
        return (mx, my, mz)
    mx = (wk * yk[0] + wd * yd[0]) / wm
    my = (wk * yk[1] + wd * yd[1]) / wm
    n = math.sqrt(mx * mx + my * my)
    if n < 1e-12:
        return yk if wk >= wd else yd
    mx /= n
    my /= n
    if my < -HORIZON_EPS:
        return (-mx, -my)
    if my <= HORIZON_EPS and mx < 0.0:
        return (-mx, -my)
    return (mx, my)


class _MergeEnergyChecker:
    """Asserts that every executed merge leaves the sweep objective
    non-increasing, measured against the normals at sweep start."""

    def __init__(self, part: RegionPartition, lam: float):
        self.reference = PointCloud(part.cloud.points,
                                    part.region_normals_per_point())
        self.lam = lam
        self.energy = partition_energy(part, self.reference, lam)

    def after_merge(self, part: RegionPartition, keep: int, drop: int):
        e = partition_energy(part, self.reference, self.lam)
        if e > self.energy + 1e-9:
            raise AssertionError(
                f"merge of regions {keep} and {drop} raised the objective "
                f"from {self.energy!r} to {e!r}"
            )
        self.energy = e


def fuse_pass(partition: RegionPartition, lam: float,
              check_energy: bool = False, in_place: bool = False) -> RegionPartition:
    """One merging sweep at a fixed lambda.

    Live regions are visited in ascending id order. During a visit the
    region's neighbors are examined smallest id first; a neighbor j merges
    into the current region i when

        (w_i * w_j) / (w_i + w_j) * ||Y_i - Y_j||^2  <=  lambda * c_ij,

    the exact condition under which averaging the two constant normals
    does not raise the sweep objective. The merged region keeps the
    smaller id and the weight-averaged (renormalized, canonical) normal,
    and the visit continues over its extended adjacency, so merge chains
    complete within the single sweep. Each neighbor id is examined at most
    once per visit.

    Returns the updated partition; the input is untouched unless
    ``in_place`` is set (callers that own the partition exclusively can
    skip the copy).
    """
    if lam < 0.0:
        raise ValueError("lambda must be nonnegative")
    part = partition if in_place else partition.copy()
    normals = part._normals
    weights = part._weights
    alive = part._alive
    adj = part._adj
    parent = part._parent
    dim = part.cloud.dimension
    three_d = dim == 3

    checker = _MergeEnergyChecker(part, lam) if check_energy else None

    heappush = heapq.heappush
    heappop = heapq.heappop
    for start in range(len(alive)):
        if not alive[start]:
            continue
        cur = start
        adj_cur = adj[cur]
        heap = list(adj_cur)
        heapq.heapify(heap)
        examined = {cur}
        while heap:
            j = heappop(heap)
            if j in examined or not alive[j]:
                continue
            examined.add(j)
            wi = weights[cur]
            wj = weights[j]
            yi = normals[cur]
            yj = normals[j]
            if three_d:
                d0 = yi[0] - yj[0]
                d1 = yi[1] - yj[1]
                d2 = yi[2] - yj[2]
                dd = d0 * d0 + d1 * d1 + d2 * d2
            else:
                d0 = yi[0] - yj[0]
                d1 = yi[1] - yj[1]
                dd = d0 * d0 + d1 * d1
            if wi * wj * dd <= lam * adj_cur[j] * (wi + wj):
                keep, drop = (cur, j) if cur < j else (j, cur)
                # Only the absorbed side can contribute neighbor ids the
                # heap has not seen; the current side's were pushed before.
                frontier = list(adj[j])
                normals[keep] = _canonical_mean(normals[keep], normals[drop],
                                                weights[keep], weights[drop], dim)
                weights[keep] = wi + wj
                alive[drop] = False
                parent[drop] = keep
                a_keep = adj[keep]
                a_drop = adj[drop]
                del a_keep[drop]
                for k, c in a_drop.items():
                    if k == keep:
                        continue
                    a_keep[k] = a_keep.get(k, 0) + c
                    ak = adj[k]
                    ak[keep] = ak.get(keep, 0) + ak.pop(drop)
                adj[drop] = {}
                cur = keep
                adj_cur = a_keep
                for nb in frontier:
                    if nb not in examined and alive[nb]:
                        heappush(heap, nb)
                if checker is not None:
                    checker.after_merge(part, keep, drop)
    return part
