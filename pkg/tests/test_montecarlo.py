"""Monte Carlo engine: batching, determinism, Edwards weights and tails."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbmlab.errors import ConfigError, DomainError
from fbmlab.fbm import ModelParams
from fbmlab.montecarlo import (ExperimentSpec, McEstimate, batch_estimate, edwards_curve,
                               epsilon_ladder, jensen_check, local_time_samples, run_experiment,
                               tail_probe)
from fbmlab.quadrature import QuadConfig, compute_E

P = ModelParams(2, 0.4)


def small_spec(**kw):
    base = dict(params=P, eps=0.1, grid_n=64, n_paths=400, g_list=(0.0, 1.0, 5.0),
                center_mode="quadrature_mean", seed=3, n_batches=20)
    base.update(kw)
    return ExperimentSpec(**base)


class TestBatching:
    def test_mean_is_sample_mean(self):
        v = np.arange(100.0)
        est = batch_estimate(v, 10, 0)
        assert est.mean == 49.5 and est.n_batches == 10
        per = v.reshape(10, 10).mean(axis=1)
        assert est.std_error == pytest.approx(per.std(ddof=1) / math.sqrt(10), rel=1e-14)

    def test_var_is_mean_of_batch_variances(self):
        v = np.random.default_rng(0).normal(size=10_000) * 2
        est = batch_estimate(v, 50, 0, "var")
        per = [b.var(ddof=1) for b in np.array_split(v, 50)]
        assert est.mean == pytest.approx(np.mean(per), rel=1e-12)
        assert abs(est.mean - 4) < 3 * est.std_error

    @given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=200), st.integers(2, 10))
    def test_standard_error_nonnegative(self, vals, nb):
        est = batch_estimate(np.array(vals), nb, 0)
        assert est.std_error >= 0
        assert est.mean == pytest.approx(np.mean(vals), abs=1e-9)

    def test_coverage(self):
        # mean +- 3 SE covers the truth for most independent replications
        rng = np.random.default_rng(1)
        hits = sum(abs(batch_estimate(rng.exponential(size=2000), 50, 0).mean - 1)
                   < 3 * batch_estimate(rng.exponential(size=2000), 50, 0).std_error
                   for _ in range(200))
        assert hits >= 190

    def test_errors(self):
        with pytest.raises(DomainError):
            batch_estimate(np.ones(10), 10, 0, "var")
        with pytest.raises(DomainError):
            batch_estimate(np.ones(10), 2, 0, "median")

    def test_interval(self):
        e = McEstimate(1.0, 0.1, 100, 10, 0)
        assert e.interval() == pytest.approx((0.7, 1.3))
        assert e.overlaps(McEstimate(1.5, 0.1, 100, 10, 0))
        assert not e.overlaps(McEstimate(1.7, 0.1, 100, 10, 0))


class TestSpec:
    @pytest.mark.parametrize("kw,err", [({"eps": 0.0}, DomainError), ({"grid_n": 1}, DomainError),
                                        ({"n_paths": 0}, DomainError), ({"g_list": (-1.0,)}, DomainError),
                                        ({"center_mode": "median"}, ConfigError), ({"seed": -1}, DomainError)])
    def test_validation(self, kw, err):
        with pytest.raises(err):
            small_spec(**kw)

    def test_batches_capped_by_paths(self):
        assert small_spec(n_paths=7).n_batches == 7


class TestEngine:
    @pytest.mark.parametrize("workers", [1, 4, 8])
    def test_worker_count_invariance(self, workers):
        ref = local_time_samples(P, [0.1, 0.05], 64, 300, 9, workers=2)
        got = local_time_samples(P, [0.1, 0.05], 64, 300, 9, workers=workers)
        assert got.tobytes() == ref.tobytes()

    def test_seed_changes_samples(self):
        a = local_time_samples(P, [0.1], 32, 50, 1, workers=1)
        b = local_time_samples(P, [0.1], 32, 50, 2, workers=1)
        assert not np.array_equal(a, b)

    def test_report_contents(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rep = run_experiment(small_spec(), workers=2)
        names = [(s["name"], s.get("g")) for s in rep.statistics]
        assert names == [("mean_L", None), ("var_L", None), ("edwards_centered", 0.0),
                         ("edwards_centered", 1.0), ("edwards_centered", 5.0)]
        g0 = rep.stat("edwards_centered", 0.0)
        assert g0.mean == 1.0 and g0.std_error == 0.0
        assert rep.floors["floor_holds"]
        assert rep.floors["min_L"] >= 0
        assert rep.floors["floor"] == -rep.floors["mean_reference"]
        np.testing.assert_allclose(rep.centered_samples, rep.samples - rep.floors["mean_reference"],
                                   rtol=0, atol=1e-15)

    def test_uncentered_curve_decreasing(self):
        spec = small_spec(g_list=(0.0, 0.5, 1.0, 5.0, 25.0), center_mode="none")
        curve = edwards_curve(spec, workers=2)
        assert "centered" not in curve
        means = [e.mean for _, e in curve["uncentered"]]
        assert means[0] == 1.0
        assert all(b <= a for a, b in zip(means, means[1:]))
        assert all(0 < m <= 1 for m in means)

    def test_jensen(self):
        rep = run_experiment(small_spec(g_list=(1.0, 5.0), center_mode="none"), workers=2)
        rows = jensen_check(rep)
        assert [r["g"] for r in rows] == [1.0, 5.0]
        assert all(r["holds"] for r in rows)

    def test_epsilon_ladder_shares_paths(self):
        spec = small_spec(n_paths=200)
        reps = epsilon_ladder(spec, [0.2, 0.1], workers=2)
        single = run_experiment(spec, workers=2)
        assert reps[1].samples.tobytes() == single.samples.tobytes()
        assert reps[0].spec["eps"] == 0.2
        assert np.all(reps[0].samples <= reps[1].samples)

    def test_tails(self):
        spec = small_spec()
        rep = run_experiment(spec, workers=2)
        ref = rep.floors["mean_reference"]
        out = tail_probe(spec, [0.5 * ref, ref, 2 * ref], report=rep)
        probs = [r["probability"] for r in out["tails"]]
        assert probs[0] >= probs[1] >= probs[2]
        assert probs[2] == 0.0
        with pytest.raises(ConfigError):
            tail_probe(small_spec(center_mode="none"), [1.0])

    def test_saturation_warns(self):
        spec = small_spec(g_list=(1e4,), center_mode="quadrature_mean", n_paths=64, n_batches=4,
                          eps=0.01)
        with pytest.warns(RuntimeWarning, match="clamped"):
            rep = run_experiment(spec, workers=1)
        est = rep.stat("edwards_centered", 1e4)
        assert est.saturated_fraction > 0 and math.isfinite(est.mean)


class TestCanonical:
    """The shared 10^4-path run (d=2, H=0.4, eps=0.1, n=512)."""

    def test_variance_matches_quadrature(self, canonical_report):
        var = canonical_report.stat("var_L")
        target = compute_E(0.1, 0.1, P, QuadConfig(rel_tol=1e-6)).value
        assert abs(var.mean - target) < 3 * var.std_error

    def test_edwards_ordering(self, canonical_report):
        means = [canonical_report.stat("edwards", g).mean for g in (0.0, 1.0, 5.0, 25.0)]
        assert means[0] == 1.0
        assert all(b < a for a, b in zip(means, means[1:]))


@pytest.fixture(scope="module")
def tails():
    """Lower tails of the centered local time at d=2, H=0.5, eps=0.05 for two seeds."""
    out = []
    for seed in (1, 2):
        spec = ExperimentSpec(ModelParams(2, 0.5), 0.05, 256, 4000, (), "quadrature_mean", seed)
        out.append(tail_probe(spec, np.arange(0.05, 0.35, 0.025)))
    return out


class TestTails:

    def test_log_frequencies_fall_at_least_linearly(self, tails):
        counts = np.array([t["count"] for t in tails[0]["tails"]])
        logs = np.log(counts[counts >= 10])
        steps = np.diff(logs)
        assert len(logs) >= 4
        assert np.all(steps < 0)
        assert np.all(np.diff(steps) <= 0.1)

    def test_beyond_floor_is_empty(self, tails):
        floor = tails[0]["floors"]["floor"]
        for t in tails[0]["tails"]:
            if t["N"] > -floor:
                assert t["count"] == 0

    def test_seed_change_within_binomial_error(self, tails):
        for a, b in zip(tails[0]["tails"], tails[1]["tails"]):
            sigma = math.hypot(a["std_error"], b["std_error"])
            assert abs(a["probability"] - b["probability"]) <= 3 * sigma + 1e-15


def test_batch_means_average_to_full_mean():
    v = np.random.default_rng(4).gamma(2.0, size=10_000)
    est = batch_estimate(v, 50, 0)
    batch_means = [b.mean() for b in np.array_split(v, 50)]
    assert est.mean == pytest.approx(np.mean(batch_means), rel=1e-12)
