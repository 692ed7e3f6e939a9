"""
Tests for the point-cloud losses.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from src.loss import (
    emd,
    emd_grad,
    evaluate_losses,
    hmd,
    hmd_grad,
    hmd_point_grad,
    hole_statistics,
    rasterize_height_map,
    validation_loss,
    write_height_map_csv,
    write_height_map_pgm,
)
from src.models.domain import LossKind
from src.models.errors import ContractViolation
from src.scene.observation import cell_centers, surface_observation

heights = arrays(np.float64, (6, 6), elements=st.floats(min_value=0.0, max_value=0.1, allow_nan=False))


def brute_force_emd(X, X_hat):
    best = np.inf
    for chosen in itertools.permutations(range(len(X_hat)), len(X)):
        best = min(best, np.linalg.norm(X - X_hat[list(chosen)], axis=1).sum())
    return best


def grid_surface(z, grid_res=4, extent=0.08):
    """A surface observation with one point per cell center at heights z"""
    points = np.zeros((grid_res * grid_res, 3))
    points[:, :2] = cell_centers(grid_res, extent, (0.0, 0.0))
    points[:, 2] = np.broadcast_to(z, grid_res * grid_res)
    return surface_observation(points, grid_res, extent)


class TestEmd:
    """Test the Earth Mover's distance"""

    @pytest.mark.parametrize('n, m', [(1, 1), (3, 3), (4, 6), (6, 6), (5, 7)])
    def test_matches_brute_force(self, rng, n, m):
        X, X_hat = rng.normal(size=(n, 3)), rng.normal(size=(m, 3))
        assert emd(X, X_hat).value == pytest.approx(brute_force_emd(X, X_hat), rel=1e-12)

    def test_random_pairs_match_brute_force(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 8))
            m = int(rng.integers(n, 8))
            X, X_hat = rng.uniform(-0.1, 0.1, size=(n, 3)), rng.uniform(-0.1, 0.1, size=(m, 3))
            assert emd(X, X_hat).value == pytest.approx(brute_force_emd(X, X_hat), rel=1e-12)

    def test_assignment_is_injective(self, rng):
        result = emd(rng.normal(size=(20, 3)), rng.normal(size=(30, 3)))
        assert len(set(result.assignment.tolist())) == 20

    def test_identical_sets(self, rng):
        X = rng.normal(size=(10, 3))
        result = emd(X, X[::-1])
        assert result.value == pytest.approx(0.0)
        assert np.array_equal(result.assignment, np.arange(9, -1, -1))

    def test_larger_source_rejected(self, rng):
        with pytest.raises(ContractViolation):
            emd(rng.normal(size=(4, 3)), rng.normal(size=(3, 3)))

    def test_wrong_shape_rejected(self):
        with pytest.raises(ContractViolation):
            emd(np.zeros((3, 2)), np.zeros((3, 2)))

    def test_gradient_against_finite_differences(self, rng):
        X, X_hat = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
        result = emd(X, X_hat)
        grad = emd_grad(X, X_hat, result.assignment)
        h = 1e-7
        for i, k in [(0, 0), (2, 1), (5, 2)]:
            shifted = X.copy()
            shifted[i, k] += h
            assert (emd(shifted, X_hat).value - result.value) / h == pytest.approx(grad[i, k], abs=1e-5)

    def test_gradient_rows_are_unit_or_zero(self, rng):
        X = rng.normal(size=(5, 3))
        X_hat = X.copy()
        X_hat[0] += 1.0
        grad = emd_grad(X, X_hat, emd(X, X_hat).assignment)
        norms = np.linalg.norm(grad, axis=1)
        assert norms[0] == pytest.approx(1.0)
        assert np.all(norms[1:] == 0.0)


class TestHeightMap:
    """Test rasterization and the height-map distance"""

    def test_rasterize_keeps_highest_point(self):
        points = np.array([[0.01, 0.01, 0.02], [0.011, 0.012, 0.05], [-0.03, -0.03, 0.01]])
        height_map = rasterize_height_map(points, 4, 0.08, (0.0, 0.0), 2e-7)
        assert height_map.pixels[2, 2] == 0.05
        assert height_map.owner[2, 2] == 1
        assert height_map.pixels[0, 0] == 0.01
        assert np.count_nonzero(height_map.pixels) == 2

    def test_points_at_or_below_zero_leave_pixel_empty(self):
        height_map = rasterize_height_map(np.array([[0.0, 0.0, -0.01]]), 4, 0.08, (0.0, 0.0), 2e-7)
        assert np.all(height_map.pixels == 0.0)
        assert np.all(height_map.owner == -1)

    def test_splat_reaches_neighbour_pixel(self):
        """A point on a pixel edge is splatted into both neighbours"""
        height_map = rasterize_height_map(np.array([[0.0, 0.01, 0.03]]), 4, 0.08, (0.0, 0.0), 1e-3)
        assert height_map.pixels[2, 1] == 0.03
        assert height_map.pixels[2, 2] == 0.03

    def test_empty_points_rejected(self):
        with pytest.raises(ContractViolation):
            rasterize_height_map(np.zeros((0, 3)), 4, 0.08, (0.0, 0.0), 2e-7)

    @settings(max_examples=100, deadline=None)
    @given(heights, heights)
    def test_hmd_is_symmetric(self, a, b):
        first = rasterize_height_map(self._pillars(a), 6, 0.06, (0.0, 0.0), 0.0)
        second = rasterize_height_map(self._pillars(b), 6, 0.06, (0.0, 0.0), 0.0)
        assert hmd(first, second) == pytest.approx(hmd(second, first))
        assert hmd(first, first) == 0.0
        assert np.array_equal(hmd_grad(first, second), -hmd_grad(second, first))

    @staticmethod
    def _pillars(z):
        points = np.zeros((36, 3))
        points[:, :2] = cell_centers(6, 0.06, (0.0, 0.0))
        points[:, 2] = z.ravel()
        return points

    def test_resolution_mismatch_rejected(self):
        a = rasterize_height_map(np.array([[0.0, 0.0, 0.01]]), 4, 0.08, (0.0, 0.0), 0.0)
        b = rasterize_height_map(np.array([[0.0, 0.0, 0.01]]), 8, 0.08, (0.0, 0.0), 0.0)
        with pytest.raises(ContractViolation):
            hmd(a, b)

    def test_point_gradient_routes_to_owner(self):
        points = np.array([[0.01, 0.01, 0.02], [0.011, 0.012, 0.05]])
        target = np.array([[0.01, 0.01, 0.06]])
        I = rasterize_height_map(points, 4, 0.08, (0.0, 0.0), 0.0)
        I_hat = rasterize_height_map(target, 4, 0.08, (0.0, 0.0), 0.0)
        grad = hmd_point_grad(I, I_hat, 2)
        assert grad.tolist() == [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0]]


class TestHoleStatistics:
    """Test crater location and depth"""

    def test_deepest_pixel(self):
        pixels = np.full((4, 4), 0.07)
        pixels[1, 3] = 0.03
        points = np.zeros((16, 3))
        points[:, :2] = cell_centers(4, 0.08, (0.0, 0.0))
        points[:, 2] = pixels.ravel()
        stats = hole_statistics(rasterize_height_map(points, 4, 0.08, (0.0, 0.0), 0.0), 0.07)
        assert stats.pixel == (3, 1)
        assert stats.center == pytest.approx((0.03, -0.01))
        assert stats.depth == pytest.approx(0.04)

    def test_ties_pick_first_pixel(self):
        points = np.zeros((16, 3))
        points[:, :2] = cell_centers(4, 0.08, (0.0, 0.0))
        points[:, 2] = 0.05
        stats = hole_statistics(rasterize_height_map(points, 4, 0.08, (0.0, 0.0), 0.0), 0.05)
        assert stats.pixel == (0, 0)
        assert stats.depth == 0.0


class TestExports:
    """Test height-map files"""

    def test_csv_rows(self, temp_dir):
        height_map = rasterize_height_map(np.array([[0.03, -0.03, 0.02]]), 4, 0.08, (0.0, 0.0), 0.0)
        path = temp_dir / 'height.csv'
        write_height_map_csv(path, height_map)
        loaded = np.loadtxt(path, delimiter=',')
        assert loaded.shape == (4, 4)
        assert loaded[0, 3] == 0.02

    def test_pgm_header_and_values(self, temp_dir):
        height_map = rasterize_height_map(np.array([[0.03, -0.03, 0.02]]), 4, 0.08, (0.0, 0.0), 0.0)
        path = temp_dir / 'height.pgm'
        write_height_map_pgm(path, height_map)
        data = path.read_bytes()
        assert data.startswith(b'P5\n')
        body = data[-32:]
        values = np.frombuffer(body, dtype='>u2').reshape(4, 4)
        assert values[0, 3] == 2000
        assert b'\n4 4\n65535\n' in data


class TestCombinedLosses:
    """Test validation loss and training-loss evaluation"""

    def test_validation_of_identical_observations(self):
        obs = grid_surface(0.05)
        assert validation_loss(obs, obs) == 0.0

    def test_validation_of_uniform_offset(self):
        """Every matched pair is 1 cm apart and every pixel differs by 1 cm"""
        obs, target = grid_surface(0.05), grid_surface(0.04)
        expected = (16 * 0.01 + 16 * 0.01) / 16
        assert validation_loss(obs, target) == pytest.approx(expected)

    def test_evaluate_hmd(self):
        obs, target = grid_surface(0.05), grid_surface(0.04)
        result = evaluate_losses(obs, target, LossKind.HMD)
        assert result.loss == pytest.approx(0.16)
        assert np.all(result.point_grad[:, 2] == 1.0)
        assert np.all(result.point_grad[:, :2] == 0.0)

    def test_evaluate_emd(self):
        obs, target = grid_surface(0.05), grid_surface(0.04)
        result = evaluate_losses(obs, target, LossKind.EMD)
        assert result.loss == pytest.approx(0.16)
        assert np.allclose(result.point_grad, [0.0, 0.0, 1.0])
        assert result.validation == pytest.approx(0.02)

    def test_resolution_mismatch(self):
        with pytest.raises(ContractViolation):
            validation_loss(grid_surface(0.05, grid_res=4), grid_surface(0.05, grid_res=8))
