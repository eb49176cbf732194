import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tlsid.model import SystemParams, benchmark_params, ideal_signal
from tlsid.noise import (MeasurementTrace, NoiseSpec, gaussian_sigma_from_ensemble, projection_sample,
                         simulate_trace, uniform_schedule)

TIMES = uniform_schedule(100, 30.0)


class TestNoiseSpec:
    def test_sigma(self):
        assert NoiseSpec.gaussian(0.05).sigma == 0.05
        assert NoiseSpec.projection(100).sigma == pytest.approx(0.1)
        assert NoiseSpec().sigma == 0.0

    @pytest.mark.parametrize("bad", [("gaussian", 0.0), ("projection", 0.5), ("projection", 10.5), ("pink", 1)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            NoiseSpec(*bad)

    def test_dict_round_trip(self):
        for spec in (NoiseSpec(), NoiseSpec.gaussian(0.02), NoiseSpec.projection(500)):
            assert NoiseSpec.from_dict(spec.to_dict()) == spec


class TestEnsembleSigma:
    def test_values(self):
        # sqrt(log(log(Ne)) / (2 Ne)) evaluated by hand
        assert gaussian_sigma_from_ensemble(16) == pytest.approx(0.178516581909971, rel=1e-12)
        assert gaussian_sigma_from_ensemble(10_000) == pytest.approx(0.0105364292015081, rel=1e-12)

    def test_monotone(self):
        vals = [gaussian_sigma_from_ensemble(n) for n in (16, 100, 1000, 10**4, 10**6)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_domain(self):
        with pytest.raises(ValueError):
            gaussian_sigma_from_ensemble(15)


class TestSchedule:
    def test_uniform(self):
        t = uniform_schedule(100, 30.0)
        assert t[0] == 0 and t[-1] == pytest.approx(29.7) and t.size == 100


class TestProjectionSample:
    def test_extremes(self):
        rng = np.random.default_rng(1)
        assert projection_sample(-1.0, 500, rng) == 0.0
        assert projection_sample(1.0, 500, rng) == 1.0

    def test_concentration(self):
        hits = sum(abs(projection_sample(0.0, 10**5, np.random.default_rng(s)) - 0.5) < 0.01 for s in range(100))
        assert hits >= 99

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            projection_sample(1.5, 10, np.random.default_rng(0))

    def test_mean_and_variance(self):
        # binomial oracle: mean (1+p)/2, variance q(1-q)/Ne
        rng = np.random.default_rng(7)
        p, ne = 0.3, 50
        x = projection_sample(np.full(20000, p), ne, rng)
        q = 0.5 * (1 + p)
        assert abs(x.mean() - q) < 4 * math.sqrt(q * (1 - q) / ne / x.size)
        assert x.var() == pytest.approx(q * (1 - q) / ne, rel=0.05)


class TestSimulateTrace:
    def test_noiseless(self):
        p = benchmark_params(1)
        tr = simulate_trace(p, "fid", 0.3 * np.arange(100))
        assert np.array_equal(tr.values, ideal_signal(p, "fid", 0.3 * np.arange(100)))

    def test_projection_at_unit_expectation(self):
        tr = simulate_trace(benchmark_params(1), "fid", np.array([0.0]), NoiseSpec.projection(100), 3)
        assert tr.values[0] == 1.0

    def test_projection_large_ensemble(self):
        p = benchmark_params(1)
        ideal = ideal_signal(p, "fid", TIMES)
        for seed in range(100):
            tr = simulate_trace(p, "fid", TIMES, NoiseSpec.projection(10**6), seed)
            assert np.max(np.abs(tr.values - ideal)) < 0.01

    def test_projection_values_in_range(self):
        tr = simulate_trace(benchmark_params(3), "fid", TIMES, NoiseSpec.projection(7), 0)
        assert np.all(np.abs(tr.values) <= 1)

    def test_gaussian_residual_scale(self):
        p = benchmark_params(2)
        res = np.concatenate([simulate_trace(p, "fid", TIMES, NoiseSpec.gaussian(0.05), s).values
                              - ideal_signal(p, "fid", TIMES) for s in range(50)])
        assert res.std() == pytest.approx(0.05, rel=0.05)

    def test_seed_reproducible(self):
        a = simulate_trace(benchmark_params(4), "fid", TIMES, NoiseSpec.gaussian(0.1), 42)
        b = simulate_trace(benchmark_params(4), "fid", TIMES, NoiseSpec.gaussian(0.1), 42)
        c = simulate_trace(benchmark_params(4), "fid", TIMES, NoiseSpec.gaussian(0.1), 43)
        assert np.array_equal(a.values, b.values) and not np.array_equal(a.values, c.values)
        assert a.seed == 42


class TestMeasurementTrace:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            MeasurementTrace([0, 2, 1], [0, 0, 0])

    def test_rejects_mismatch(self):
        with pytest.raises(ValueError):
            MeasurementTrace([0, 1], [0])

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=40))
    def test_csv_round_trip(self, values):
        tr = MeasurementTrace(np.arange(len(values)) * 0.37, values)
        back = MeasurementTrace.from_csv(io.StringIO(tr.to_csv()))
        assert np.array_equal(back.times, tr.times) and np.array_equal(back.values, tr.values)

    def test_json_round_trip(self):
        tr = simulate_trace(benchmark_params(5), "fid", TIMES, NoiseSpec.projection(100), np.int64(9))
        back = MeasurementTrace.from_json(tr.to_json())
        assert np.array_equal(back.values, tr.values) and back.noise == tr.noise and back.seed == 9

    def test_csv_header_required(self):
        with pytest.raises(ValueError):
            MeasurementTrace.from_csv(io.StringIO("a,b\n0,1\n"))
