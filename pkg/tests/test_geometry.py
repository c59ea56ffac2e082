import numpy as np
import pytest

from planefit import (PointCloud, angle_degrees, build_knn_graph, canonicalize,
                      canonicalize_rows, estimate_normals_pca)
from planefit.geometry import angles_degrees_rows

from conftest import brute_force_knn, make_cloud, random_rotation


class TestCanonicalize:
    def test_flip_and_normalize(self):
        assert np.allclose(canonicalize((0, 0, -2)), (0, 0, 1))

    def test_horizon_first_nonzero(self):
        assert np.allclose(canonicalize((3, 4, 0)), (0.6, 0.8, 0))

    def test_horizon_flip(self):
        assert np.allclose(canonicalize((-1, 0, 0)), (1, 0, 0))

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            canonicalize((0.0, 0.0, 0.0))

    def test_idempotent(self, rng):
        for _ in range(200):
            v = rng.normal(size=3)
            once = canonicalize(v)
            twice = canonicalize(once)
            assert np.array_equal(once, twice)

    def test_rows_match_scalar(self, rng):
        vecs = rng.normal(size=(100, 3))
        rows = canonicalize_rows(vecs)
        for v, r in zip(vecs, rows):
            assert np.array_equal(canonicalize(v), r)

    def test_2d_horizon(self):
        assert np.allclose(canonicalize((-5, 0)), (1, 0))
        assert np.allclose(canonicalize((0.3, -0.4)), (-0.6, 0.8))


class TestAngle:
    def test_equal_is_zero(self):
        assert angle_degrees((1, 0, 0), (1, 0, 0)) == 0.0

    def test_orthogonal(self):
        assert angle_degrees((1, 0, 0), (0, 1, 0)) == pytest.approx(90.0, abs=1e-12)

    def test_analytic_45(self):
        s = np.sqrt(2) / 2
        assert angle_degrees((1, 0, 0), (s, s, 0)) == pytest.approx(45.0, abs=1e-12)

    def test_symmetry_and_triangle(self, rng):
        for _ in range(200):
            a, b, c = canonicalize_rows(rng.normal(size=(3, 3)))
            ab = angle_degrees(a, b)
            assert ab == pytest.approx(angle_degrees(b, a), abs=0)
            assert ab <= angle_degrees(a, c) + angle_degrees(c, b) + 1e-9

    def test_row_version(self, rng):
        a = canonicalize_rows(rng.normal(size=(50, 2)))
        b = canonicalize_rows(rng.normal(size=(50, 2)))
        rows = angles_degrees_rows(a, b)
        for i in range(50):
            assert rows[i] == pytest.approx(angle_degrees(a[i], b[i]), abs=1e-12)


class TestKnnGraph:
    def test_symmetry_closure_on_collinear_points(self):
        cloud = make_cloud([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)])
        graph = build_knn_graph(cloud, k=1)
        # ends pick the middle; middle picked one end; union gives it both
        assert list(graph.neighbors[1]) == [0, 2]
        assert list(graph.neighbors[0]) == [1]
        assert list(graph.neighbors[2]) == [1]

    def test_square_corners_never_link_diagonal(self):
        cloud = make_cloud([(0, 0), (1, 0), (1, 1), (0, 1)])
        graph = build_knn_graph(cloud, k=2)
        assert list(graph.neighbors[0]) == [1, 3]
        assert list(graph.neighbors[2]) == [1, 3]

    def test_matches_exhaustive_oracle_random(self, rng):
        pts = rng.random((1000, 3))
        cloud = make_cloud(pts)
        graph = build_knn_graph(cloud, k=10)
        oracle = brute_force_knn(pts, 10)
        for got, want in zip(graph.neighbors, oracle):
            assert np.array_equal(got, want)

    def test_matches_oracle_on_tie_heavy_grid(self):
        xs, ys = np.meshgrid(np.arange(10.0), np.arange(10.0))
        pts = np.column_stack([xs.ravel(), ys.ravel()])
        cloud = make_cloud(pts)
        graph = build_knn_graph(cloud, k=4)
        oracle = brute_force_knn(pts, 4)
        for got, want in zip(graph.neighbors, oracle):
            assert np.array_equal(got, want)

    def test_requires_enough_points(self):
        cloud = make_cloud([(0, 0), (1, 1)])
        with pytest.raises(ValueError):
            build_knn_graph(cloud, k=2)
        with pytest.raises(ValueError):
            build_knn_graph(cloud, k=0)

    def test_no_self_loops_sorted_unique(self, rng):
        pts = rng.random((200, 2))
        graph = build_knn_graph(make_cloud(pts), k=5)
        for i, nb in enumerate(graph.neighbors):
            assert i not in nb
            assert np.array_equal(nb, np.unique(nb))


class TestPcaNormals:
    def test_plane_z0(self, rng):
        pts = np.column_stack([rng.random((300, 2)), np.zeros(300)])
        cloud = make_cloud(pts)
        graph = build_knn_graph(cloud, k=10)
        result, degenerate = estimate_normals_pca(cloud, graph)
        assert degenerate == 0
        assert np.allclose(result.normals, [0.0, 0.0, 1.0], atol=1e-9)

    def test_2d_diagonal_line(self, rng):
        t = np.sort(rng.random(200))
        pts = np.column_stack([t, t])
        cloud = make_cloud(pts)
        graph = build_knn_graph(cloud, k=6)
        result, _ = estimate_normals_pca(cloud, graph)
        s = np.sqrt(2) / 2
        assert np.allclose(result.normals, [-s, s], atol=1e-9)

    def test_noisy_plane_interior_below_one_degree(self, rng):
        # x + y + z = 1 sampled over a patch, sigma = 0.001
        u = rng.random((4000, 2))
        z = 1.0 - u[:, 0] - u[:, 1]
        pts = np.column_stack([u, z]) + rng.normal(0, 0.001, (4000, 3))
        cloud = make_cloud(pts)
        # the neighborhood must average well over the positional noise for
        # a pointwise sub-degree bound to hold
        graph = build_knn_graph(cloud, k=60)
        result, _ = estimate_normals_pca(cloud, graph)
        truth = np.ones(3) / np.sqrt(3)
        interior = ((u > 0.1) & (u < 0.9)).all(axis=1)
        angles = angles_degrees_rows(result.normals[interior],
                                     np.tile(truth, (int(interior.sum()), 1)))
        assert angles.max() < 1.0

    def test_degenerate_neighborhood_falls_back(self):
        pts = np.zeros((6, 3))
        cloud = make_cloud(pts)
        graph = build_knn_graph(cloud, k=2)
        result, degenerate = estimate_normals_pca(cloud, graph)
        assert degenerate == 6
        assert np.allclose(result.normals, [0.0, 0.0, 1.0])

    def test_rotation_invariance_as_line_angle(self, rng):
        # exact planar patches: the small eigenvector is exact, so the
        # estimate must rotate with the cloud to fp precision
        base = np.column_stack([rng.random((400, 2)), np.zeros(400)])
        cloud = make_cloud(base)
        graph = build_knn_graph(cloud, k=8)
        plain, _ = estimate_normals_pca(cloud, graph)
        for seed in range(3):
            rot = random_rotation(3, np.random.default_rng(seed))
            rotated_cloud = make_cloud(base @ rot.T)
            rgraph = build_knn_graph(rotated_cloud, k=8)
            rotated, _ = estimate_normals_pca(rotated_cloud, rgraph)
            expected = plain.normals @ rot.T
            got = rotated.normals
            # compare as undirected lines: canonical flips may differ
            line_angle = np.minimum(
                angles_degrees_rows(got, expected),
                180.0 - angles_degrees_rows(got, expected))
            assert line_angle.max() <= 1e-9

    def test_graph_cloud_mismatch(self, rng):
        cloud = make_cloud(rng.random((50, 3)))
        graph = build_knn_graph(cloud, k=4)
        with pytest.raises(ValueError):
            estimate_normals_pca(make_cloud(rng.random((49, 3))), graph)
