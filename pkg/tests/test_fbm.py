"""Covariance structure, exact samplers and path serialization."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbmlab.errors import DomainError
from fbmlab.fbm import (DENSE_CAP, ModelParams, TimeGrid, covariance_matrix,
                        empirical_covariance_check, fbm_covariance, generate_path,
                        generate_paths, increment_covariance, path_from_bytes, path_to_bytes,
                        path_to_csv)
from fbmlab.kernels import mu_formula

hurst = st.floats(0.01, 0.99)
times = st.floats(0.0, 10.0)


# ---------------------------------------------------------------------------
# ModelParams / TimeGrid
# ---------------------------------------------------------------------------

class TestModelParams:
    @pytest.mark.parametrize("d,H,T", [(0, 0.5, 1.0), (2, 0.0, 1.0), (2, 1.0, 1.0), (2, 0.5, 0.0),
                                       (2, 0.5, -1.0), (1.5, 0.5, 1.0)])
    def test_rejects_invalid(self, d, H, T):
        with pytest.raises(DomainError):
            ModelParams(d, H, T)

    def test_regime_flags(self):
        p = ModelParams(2, 0.4)
        assert p.strong and not p.critical and p.centered and p.rate_regime
        p = ModelParams(2, 0.5)
        assert p.critical and not p.strong and p.centered and not p.rate_regime
        p = ModelParams(3, 1 / 3)
        assert p.critical
        p = ModelParams(2, 0.75)
        assert not p.centered

    def test_grid(self):
        g = TimeGrid(4, 2.0)
        assert g.step == 0.5
        np.testing.assert_array_equal(g.points, [0.0, 0.5, 1.0, 1.5, 2.0])
        assert np.all(np.diff(g.points) > 0)
        with pytest.raises(DomainError):
            TimeGrid(0)


# ---------------------------------------------------------------------------
# covariance
# ---------------------------------------------------------------------------

class TestCovariance:
    def test_examples(self):
        assert fbm_covariance(1, 1, 0.5) == pytest.approx(1.0, abs=1e-15)
        assert fbm_covariance(2, 3, 0.5) == pytest.approx(2.0, abs=1e-15)
        assert fbm_covariance(1, 2, 0.4) == pytest.approx(0.5 * 2**0.8, rel=1e-14)
        assert fbm_covariance(1, 2, 0.4) == pytest.approx(0.870551, abs=5e-7)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            fbm_covariance(-1, 1, 0.5)
        with pytest.raises(DomainError):
            fbm_covariance(1, 1, 1.2)

    @given(times, times, hurst)
    def test_symmetric(self, s, t, H):
        assert fbm_covariance(s, t, H) == fbm_covariance(t, s, H)

    @given(times, times, hurst, st.sampled_from([0.5, 2.0, 10.0]))
    def test_self_similar(self, s, t, H, c):
        lhs = fbm_covariance(c * s, c * t, H)
        rhs = c ** (2 * H) * fbm_covariance(s, t, H)
        scale = c ** (2 * H) * max(s, t, 1e-300) ** (2 * H)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(rhs), scale)

    @given(times, times)
    def test_brownian_degeneracy(self, s, t):
        assert fbm_covariance(s, t, 0.5) == pytest.approx(min(s, t), abs=1e-14 * max(1.0, s, t))

    @pytest.mark.parametrize("H", [0.05, 0.3, 0.5, 0.8, 0.95])
    @pytest.mark.parametrize("n", [16, 128, 512])
    def test_positive_semidefinite(self, H, n):
        ev = np.linalg.eigvalsh(covariance_matrix(TimeGrid(n), H))
        assert ev.min() >= -1e-10 * ev.max()

    def test_increment_examples(self):
        assert increment_covariance(0, 1, 2, 3, 0.5) == pytest.approx(0.0, abs=1e-15)
        assert increment_covariance(0, 2, 1, 3, 0.5) == pytest.approx(1.0, abs=1e-15)
        tau = (0.1, 0.5, 0.2, 0.9)
        assert increment_covariance(*tau, 0.3) == pytest.approx(mu_formula(*tau, 0.3), abs=1e-12)

    @pytest.mark.parametrize("H", [0.2, 1 / 3, 0.45, 0.5, 0.7])
    def test_mu_identity(self, H):
        rng = np.random.default_rng(3)
        u = rng.random((10_000, 4))
        a, b = np.sort(u[:, :2], axis=1), np.sort(u[:, 2:], axis=1)
        lhs = increment_covariance(a[:, 0], a[:, 1], b[:, 0], b[:, 1], H)
        rhs = mu_formula(a[:, 0], a[:, 1], b[:, 0], b[:, 1], H)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

class TestSampling:
    @pytest.mark.parametrize("method", ["dense", "fast"])
    def test_starts_at_origin_and_is_readonly(self, method):
        p = generate_path(ModelParams(3, 0.3), TimeGrid(32), seed=1, method=method)
        assert p.values.shape == (33, 3)
        assert np.all(p.values[0] == 0)
        with pytest.raises(ValueError):
            p.values[1, 0] = 1.0

    def test_single_step_variance(self):
        params = ModelParams(2, 0.3, 2.0)
        X = generate_paths(params, TimeGrid(1, 2.0), 5, range(100_000))[:, 1, :]
        target = 2.0 ** (2 * 0.3)
        se = target * np.sqrt(2.0 / X.shape[0])
        for coord in range(2):
            assert abs(X[:, coord].var() - target) < 3 * se

    @pytest.mark.parametrize("method", ["dense", "fast"])
    def test_brownian_covariance(self, method):
        grid = TimeGrid(256)
        X = generate_paths(ModelParams(1, 0.5), grid, 11, range(10_000), method=method)[:, 1:, 0]
        target = np.minimum.outer(grid.points[1:], grid.points[1:])
        assert empirical_covariance_check(X, target) < 5

    @pytest.mark.parametrize("H", [0.2, 0.4, 0.7, 0.9])
    def test_fast_matches_covariance(self, H):
        grid = TimeGrid(64)
        X = generate_paths(ModelParams(1, H), grid, 2, range(10_000))[:, 1:, 0]
        assert empirical_covariance_check(X, covariance_matrix(grid, H)) < 5

    @pytest.mark.parametrize("method", ["dense", "fast"])
    def test_marginal_means(self, method):
        grid = TimeGrid(64)
        X = generate_paths(ModelParams(2, 0.4), grid, 4, range(10_000), method=method)
        sd = grid.points[1:] ** 0.4
        z = X[:, 1:, :].mean(axis=0) / (sd[:, None] / np.sqrt(X.shape[0]))
        assert np.max(np.abs(z)) < 4

    def test_determinism_across_workers(self):
        params, grid = ModelParams(2, 0.4), TimeGrid(128)
        one = generate_path(params, grid, 7, 0).values.tobytes()
        with ThreadPoolExecutor(8) as pool:
            many = list(pool.map(lambda i: generate_path(params, grid, 7, i).values.tobytes(), [0] * 8))
        assert all(m == one for m in many)
        stack = generate_paths(params, grid, 7, [3, 0, 5])
        assert stack[1].tobytes() == one
        assert np.array_equal(stack[0], generate_path(params, grid, 7, 3).values)

    def test_distinct_streams(self):
        params, grid = ModelParams(2, 0.4), TimeGrid(16)
        a = generate_path(params, grid, 7, 0).values
        assert not np.array_equal(a, generate_path(params, grid, 7, 1).values)
        assert not np.array_equal(a, generate_path(params, grid, 8, 0).values)
        assert not np.array_equal(a[:, 0], a[:, 1])

    def test_dense_cap(self):
        with pytest.raises(DomainError, match="capped"):
            generate_path(ModelParams(1, 0.5), TimeGrid(DENSE_CAP + 1), 0, method="dense")
        with pytest.raises(DomainError):
            generate_path(ModelParams(1, 0.5), TimeGrid(8), 0, method="wavelet")

    def test_horizon_mismatch(self):
        with pytest.raises(DomainError):
            generate_path(ModelParams(1, 0.5, 2.0), TimeGrid(8, 1.0), 0)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

class TestExport:
    def test_csv(self):
        p = generate_path(ModelParams(2, 0.4), TimeGrid(4), 3)
        lines = path_to_csv(p).splitlines()
        assert lines[0] == "t,x_1,x_2"
        assert len(lines) == 6
        row = [float(v) for v in lines[2].split(",")]
        assert row[0] == 0.25 and row[1:] == list(p.values[1])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 40), hurst, st.integers(0, 2**63 - 1))
    def test_binary_round_trip(self, d, n, H, seed):
        p = generate_path(ModelParams(d, H), TimeGrid(n), seed)
        blob = path_to_bytes(p)
        assert blob[:4] == b"FBMP"
        assert len(blob) == 36 + 8 * (n + 1) * d
        q = path_from_bytes(blob)
        assert q.grid == p.grid and q.H == p.H and q.seed == p.seed
        assert np.array_equal(q.values, p.values)

    def test_binary_is_column_major(self):
        p = generate_path(ModelParams(2, 0.4), TimeGrid(3), 3)
        payload = np.frombuffer(path_to_bytes(p)[36:], dtype="<f8")
        np.testing.assert_array_equal(payload[:4], p.values[:, 0])

    def test_binary_rejects_garbage(self):
        p = generate_path(ModelParams(1, 0.4), TimeGrid(3), 3)
        blob = path_to_bytes(p)
        with pytest.raises(DomainError):
            path_from_bytes(b"XXXX" + blob[4:])
        with pytest.raises(DomainError):
            path_from_bytes(blob[:-8])
