import numpy as np
import pytest
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from planefit import (PointCloud, build_knn_graph, canonicalize_rows,
                      fuse_pass, init_partition, partition_energy)

from conftest import graph_from_lists, make_cloud

EX = 1.0, 0.0, 0.0
EY = 0.0, 1.0, 0.0
EZ = 0.0, 0.0, 1.0


def path_graph(n):
    lists = []
    for i in range(n):
        nb = [j for j in (i - 1, i + 1) if 0 <= j < n]
        lists.append(nb)
    return graph_from_lists(lists)


def singleton_cloud(normals):
    normals = np.asarray(normals, float)
    pts = np.zeros((len(normals), normals.shape[1]))
    pts[:, 0] = np.arange(len(normals))
    return make_cloud(pts, normals)


def manual_energy(partition, reference, lam):
    """Direct per-term evaluation of the objective."""
    per_point = partition.region_normals_per_point()
    total = 0.0
    for p in range(len(reference)):
        total += float(((per_point[p] - reference.normals[p]) ** 2).sum())
    for i, nb in enumerate(partition.graph.neighbors):
        for j in nb:
            if not np.array_equal(per_point[i], per_point[j]):
                total += lam
    return total


class TestInitPartition:
    def test_path_of_four(self):
        cloud = singleton_cloud([EZ] * 4)
        part = init_partition(cloud, path_graph(4))
        assert part.num_regions == 4
        pairs = part.adjacency_pairs()
        assert pairs == {(0, 1): 1, (1, 2): 1, (2, 3): 1}

    def test_empty_graph(self):
        cloud = singleton_cloud([EZ] * 5)
        part = init_partition(cloud, graph_from_lists([[]] * 5))
        assert part.num_regions == 5
        assert part.adjacency_pairs() == {}

    def test_edge_multiplicity_sum_matches_graph(self, rng):
        cloud = make_cloud(rng.random((100, 3)))
        graph = build_knn_graph(cloud, k=10)
        cloud, _ = __import__("planefit").estimate_normals_pca(cloud, graph)
        part = init_partition(cloud, graph)
        assert part.num_regions == 100
        assert sum(part.adjacency_pairs().values()) == graph.num_edges

    def test_requires_normals(self, rng):
        cloud = make_cloud(rng.random((20, 3)))
        graph = build_knn_graph(cloud, k=3)
        with pytest.raises(ValueError):
            init_partition(cloud, graph)


class TestFusePass:
    def test_identical_normals_merge_at_zero_lambda(self):
        cloud = singleton_cloud([EZ, EZ])
        part = init_partition(cloud, path_graph(2))
        out = fuse_pass(part, 0.0)
        assert out.num_regions == 1
        region = out.regions()[0]
        assert region.weight == 2
        assert np.array_equal(region.normal, EZ)

    def test_orthogonal_normals_do_not_merge_at_zero_lambda(self):
        cloud = singleton_cloud([EX, EY])
        part = init_partition(cloud, path_graph(2))
        out = fuse_pass(part, 0.0)
        assert out.num_regions == 2

    def test_three_point_path_partial_merge(self):
        # first two merge for free; merged pair vs third:
        # (2*1/3) * ||(1,0,0)-(0,1,0)||^2 = 4/3 > 0.4 * 1
        cloud = singleton_cloud([EX, EX, EY])
        part = init_partition(cloud, path_graph(3))
        out = fuse_pass(part, 0.4)
        assert out.num_regions == 2
        regions = {r.id: r for r in out.regions()}
        assert regions[0].weight == 2
        assert np.array_equal(regions[0].normal, EX)
        assert regions[2].weight == 1

    def test_huge_lambda_collapses_components(self, rng):
        pts = rng.random((60, 3))
        cloud = make_cloud(pts, canonicalize_rows(rng.normal(size=(60, 3))))
        graph = build_knn_graph(cloud, k=3)
        part = init_partition(cloud, graph)
        out = fuse_pass(part, 4.0 * len(cloud))
        src, dst = graph.edge_arrays()
        adj = sparse.coo_matrix((np.ones(len(src)), (src, dst)), shape=(60, 60))
        ncomp, _ = connected_components(adj.tocsr(), directed=False)
        assert out.num_regions == ncomp

    def test_zero_lambda_merges_exactly_identical(self):
        a = (0.6, 0.8, 0.0)
        b = (0.0, 0.0, 1.0)
        cloud = singleton_cloud([a, a, b, a])
        part = init_partition(cloud, path_graph(4))
        out = fuse_pass(part, 0.0)
        # 0-1 merge (adjacent, identical); 3 is only adjacent to 2
        assert out.num_regions == 3
        weights = sorted(r.weight for r in out.regions())
        assert weights == [1, 1, 2]

    def test_weights_always_sum_to_point_count(self, rng):
        cloud = make_cloud(rng.random((80, 2)),
                           canonicalize_rows(rng.normal(size=(80, 2))))
        graph = build_knn_graph(cloud, k=4)
        part = init_partition(cloud, graph)
        for lam in (0.0, 0.05, 0.3, 2.0):
            part = fuse_pass(part, lam)
            assert sum(r.weight for r in part.regions()) == 80
            p2r = part.point_to_region()
            live = set(part.live_ids())
            assert set(np.unique(p2r)) == live

    def test_deterministic(self, rng):
        cloud = make_cloud(rng.random((120, 3)),
                           canonicalize_rows(rng.normal(size=(120, 3))))
        graph = build_knn_graph(cloud, k=5)
        a = fuse_pass(init_partition(cloud, graph), 0.7)
        b = fuse_pass(init_partition(cloud, graph), 0.7)
        assert a.live_ids() == b.live_ids()
        assert np.array_equal(a.point_to_region(), b.point_to_region())
        for rid in a.live_ids():
            assert a._normals[rid] == b._normals[rid]

    def test_input_partition_untouched_by_default(self):
        cloud = singleton_cloud([EZ, EZ])
        part = init_partition(cloud, path_graph(2))
        fuse_pass(part, 1.0)
        assert part.num_regions == 2

    def test_rejects_negative_lambda(self):
        cloud = singleton_cloud([EZ, EZ])
        part = init_partition(cloud, path_graph(2))
        with pytest.raises(ValueError):
            fuse_pass(part, -0.1)


class TestPartitionEnergy:
    def test_singleton_partition_energy_is_smoothness_only(self):
        normals = [EX, EX, EY, EZ]
        cloud = singleton_cloud(normals)
        part = init_partition(cloud, path_graph(4))
        lam = 0.7
        # unequal directed edges: (1,2),(2,1),(2,3),(3,2)
        assert partition_energy(part, cloud, lam) == pytest.approx(4 * lam)

    def test_single_region_equal_normals_zero(self):
        cloud = singleton_cloud([EZ] * 5)
        part = fuse_pass(init_partition(cloud, path_graph(5)), 0.0)
        assert part.num_regions == 1
        assert partition_energy(part, cloud, 3.0) == 0.0

    def test_matches_manual_summation(self, rng):
        cloud = make_cloud(rng.random((30, 3)),
                           canonicalize_rows(rng.normal(size=(30, 3))))
        graph = build_knn_graph(cloud, k=4)
        part = fuse_pass(init_partition(cloud, graph), 0.5)
        lam = 0.37
        assert partition_energy(part, cloud, lam) == pytest.approx(
            manual_energy(part, cloud, lam), abs=1e-9)

    def test_three_point_example_value(self):
        cloud = singleton_cloud([EX, EX, EY])
        part = fuse_pass(init_partition(cloud, path_graph(3)), 0.4)
        # data: 0 (means of equal normals); smoothness: edge 1-2 both ways
        assert partition_energy(part, cloud, 0.4) == pytest.approx(0.8)


class TestMergeMonotonicity:
    def test_instrumented_merges_never_raise_energy(self, rng):
        for trial in range(8):
            n = 40 + 10 * trial
            cloud = make_cloud(rng.random((n, 3)),
                               canonicalize_rows(rng.normal(size=(n, 3))))
            graph = build_knn_graph(cloud, k=4)
            part = init_partition(cloud, graph)
            for lam in (0.02, 0.1, 0.5, 2.0, 10.0):
                part = fuse_pass(part, lam, check_energy=True)

    def test_pass_energy_never_increases_vs_start(self, rng):
        for _ in range(5):
            cloud = make_cloud(rng.random((60, 2)),
                               canonicalize_rows(rng.normal(size=(60, 2))))
            graph = build_knn_graph(cloud, k=5)
            part = init_partition(cloud, graph)
            for lam in (0.05, 0.4, 1.5):
                reference = PointCloud(cloud.points,
                                       part.region_normals_per_point())
                before = partition_energy(part, reference, lam)
                part = fuse_pass(part, lam)
                after = partition_energy(part, reference, lam)
                assert after <= before + 1e-9
