"""Pathwise local-time estimator, centering and Edwards weights."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fbmlab.errors import DomainError
from fbmlab.fbm import ModelParams, Path, TimeGrid, generate_path, generate_paths
from fbmlab.kernels import mean_local_time
from fbmlab.localtime import (EXPONENT_CLAMP, LocalTimeEstimate, center, edwards_weight,
                              heat_kernel, local_time_approx, local_times)


def explicit_sum(values, eps, T):
    """Independent double loop over the lower triangle with half-weight diagonal cells."""
    n = values.shape[0] - 1
    d = values.shape[1]
    h = T / n
    total = 0.0
    for i in range(n):
        for j in range(i + 1):
            r2 = float(np.sum((values[i] - values[j]) ** 2))
            w = 0.5 if i == j else 1.0
            total += w * (2 * math.pi * eps) ** (-d / 2) * math.exp(-r2 / (2 * eps))
    return h * h * total


def make_path(values, T=1.0):
    values = np.asarray(values, dtype=float)
    return Path(TimeGrid(values.shape[0] - 1, T), values, 0, 0)


class TestHeatKernel:
    def test_examples(self):
        assert heat_kernel([0.0, 0.0], 1 / (2 * math.pi), 2) == pytest.approx(1.0, rel=1e-15)
        assert heat_kernel([1.0, 1.0], 1.0, 2) == pytest.approx(math.exp(-1) / (2 * math.pi), rel=1e-15)
        assert heat_kernel([1.0, 1.0], 1.0, 2) == pytest.approx(0.0585498, abs=5e-8)

    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    def test_unit_exponent(self, d):
        eps = 0.3
        x = np.zeros(d)
        x[0] = math.sqrt(2 * eps)
        assert heat_kernel(x, eps, d) == pytest.approx((2 * math.pi * eps) ** (-d / 2) / math.e, rel=1e-14)

    def test_errors(self):
        with pytest.raises(DomainError):
            heat_kernel([0.0], 0.0)
        with pytest.raises(DomainError):
            heat_kernel([0.0, 1.0], 1.0, 3)


class TestLocalTime:
    @pytest.mark.parametrize("d,eps,T,n", [(1, 0.1, 1.0, 64), (2, 0.01, 2.0, 100), (3, 1.0, 0.5, 7)])
    def test_constant_path(self, d, eps, T, n):
        est = local_time_approx(make_path(np.zeros((n + 1, d)), T), eps)
        exact = T * T / 2 * (2 * math.pi * eps) ** (-d / 2)
        assert est.value == pytest.approx(exact, rel=1e-10)

    def test_three_step_hand_sum(self):
        vals = np.array([[0.0, 0.0], [0.3, -0.1], [0.2, 0.4], [1.0, 1.0]])
        eps, h = 0.2, 1 / 3
        p = lambda x: math.exp(-float(np.dot(x, x)) / (2 * eps)) / (2 * math.pi * eps)
        hand = h * h * (p(vals[1] - vals[0]) + p(vals[2] - vals[0]) + p(vals[2] - vals[1])
                        + 1.5 * p(np.zeros(2)))
        assert local_time_approx(make_path(vals), eps).value == pytest.approx(hand, rel=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 8), st.integers(1, 3), st.floats(0.01, 5.0), st.floats(0.1, 3.0),
           st.data())
    def test_matches_explicit_double_sum(self, n, d, eps, T, data):
        vals = data.draw(arrays(float, (n + 1, d), elements=st.floats(-3, 3)))
        got = local_time_approx(make_path(vals, T), eps).value
        assert got == pytest.approx(explicit_sum(vals, eps, T), rel=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 1000), st.floats(0.01, 2.0),
           arrays(float, 2, elements=st.floats(-100, 100)))
    def test_nonnegative_and_translation_invariant(self, seed, eps, shift):
        p = generate_path(ModelParams(2, 0.4), TimeGrid(32), seed)
        base = local_time_approx(p, eps).value
        moved = local_time_approx(make_path(p.values + shift), eps).value
        assert base >= 0
        assert moved == pytest.approx(base, rel=1e-14)

    def test_refinement_is_cauchy(self):
        f = lambda t: np.column_stack([np.sin(3 * t), np.cos(2 * t) - 1])
        est = [local_time_approx(make_path(f(TimeGrid(n).points)), 0.05).value
               for n in (32, 64, 128, 256)]
        diffs = np.abs(np.diff(est))
        assert np.all(diffs[1:] < diffs[:-1])

    def test_batch_matches_single(self):
        params, grid = ModelParams(2, 0.4), TimeGrid(64)
        X = generate_paths(params, grid, 9, range(5))
        batch = local_times(X, [0.1, 0.02], 1.0)
        for k in range(5):
            p = generate_path(params, grid, 9, k)
            assert batch[k, 0] == local_time_approx(p, 0.1).value
            assert batch[k, 1] == local_time_approx(p, 0.02).value

    def test_errors(self):
        p = generate_path(ModelParams(2, 0.4), TimeGrid(8), 0)
        with pytest.raises(DomainError):
            local_time_approx(p, 0.1, d=3)
        with pytest.raises(DomainError):
            local_time_approx(p, 0.0)
        with pytest.raises(DomainError):
            local_time_approx(make_path(np.zeros((2, 2))), 0.1)

    def test_mean_against_quadrature(self, canonical_report):
        # the shared Monte Carlo fixture: d=2, H=0.4, eps=0.1, n=512, 10^4 paths
        est = canonical_report.stat("mean_L")
        target = mean_local_time(ModelParams(2, 0.4), 0.1)
        assert abs(est.mean - target) < 3 * est.std_error


class TestCenterAndWeights:
    def est(self, value, mean=0.0):
        return center(LocalTimeEstimate(0.1, value, value, 0.0, 512), mean)

    def test_center(self):
        e = self.est(1.0, 0.26064)
        assert e.centered == pytest.approx(0.73936, abs=1e-15)
        assert e.mean_reference == 0.26064
        assert self.est(0.4).centered == 0.4
        assert self.est(0.4, 0.4).centered == 0.0

    @given(st.floats(0, 1e6), st.floats(-1e3, 1e3))
    def test_centered_is_exact_difference(self, v, m):
        e = self.est(v, m)
        assert e.centered == v - m

    def test_weight_examples(self):
        assert edwards_weight(self.est(3.7), 0.0).weight == 1.0
        assert edwards_weight(self.est(2.0), 1.0).weight == pytest.approx(math.exp(-2), rel=1e-15)
        w = edwards_weight(self.est(0.5, 1.5), 2.0, use_centered=True)
        assert w.weight == pytest.approx(math.exp(2), rel=1e-15) and w.centered_flag

    @given(st.floats(0, 1e9), st.floats(0, 1e9))
    def test_uncentered_weight_in_unit_interval(self, v, g):
        w = edwards_weight(self.est(v), g)
        assert 0 < w.weight <= 1

    def test_clamp(self):
        w = edwards_weight(self.est(1e6), 1.0)
        assert w.saturated and w.weight == pytest.approx(math.exp(-EXPONENT_CLAMP))
        w = edwards_weight(self.est(0.0, 1e6), 1.0, use_centered=True)
        assert w.saturated and math.isfinite(w.weight)
        with pytest.raises(DomainError):
            edwards_weight(self.est(1.0), -0.1)
