import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tlsid.adaptive import (PosteriorSamples, average_traces, ld_schedule, max_gap, predicted_variance,
                            refine_loop, sample_posterior, simulated_acquirer, star_discrepancy,
                            trace_variance_schedule, van_der_corput, van_der_corput_points, write_jsonl)
from tlsid.likelihood import strategy3
from tlsid.model import benchmark_params, ideal_signal
from tlsid.noise import MeasurementTrace, NoiseSpec, simulate_trace, uniform_schedule
from tlsid.optim import grid_axes

TIMES = uniform_schedule(100, 30.0)
BOX = ((0.05, 3.0), (0.001, 1.0))


def cell_index(params):
    a0, a1 = grid_axes(BOX, (60, 40))
    i = np.round((params[:, 0] - a0[0]) / (a0[1] - a0[0])).astype(int)
    j = np.round((params[:, 1] - a1[0]) / (a1[1] - a1[0])).astype(int)
    return i, j


class TestAverageTraces:
    def test_single(self):
        tr = simulate_trace(benchmark_params(2), "fid", TIMES, NoiseSpec.gaussian(0.1), 1)
        assert np.array_equal(average_traces([tr]).values, tr.values)

    def test_identical_copies(self):
        tr = simulate_trace(benchmark_params(2), "fid", TIMES)
        avg = average_traces([tr] * 7)
        assert np.allclose(avg.values, tr.values) and avg.repeats == 7

    def test_residual_shrinks(self):
        p = benchmark_params(4)
        ideal = ideal_signal(p, "fid", TIMES)
        rng = np.random.default_rng(0)
        for K in (1, 10, 100, 1000):
            avg = average_traces(simulate_trace(p, "fid", TIMES, NoiseSpec.gaussian(0.1), rng) for _ in range(K))
            assert np.std(avg.values - ideal) == pytest.approx(0.1 / math.sqrt(K), rel=0.25)

    def test_mismatched_times(self):
        a = MeasurementTrace([0, 1, 2], [0, 0, 0])
        b = MeasurementTrace([0, 1, 3], [0, 0, 0])
        with pytest.raises(ValueError):
            average_traces([a, b])


class TestVanDerCorput:
    def test_base2(self):
        assert [van_der_corput(n) for n in range(1, 6)] == [0.5, 0.25, 0.75, 0.125, 0.625]

    def test_base3(self):
        assert [van_der_corput(n, 3) for n in (1, 2, 3)] == pytest.approx([1 / 3, 2 / 3, 1 / 9])

    @pytest.mark.parametrize("k", [1, 3, 6, 10])
    def test_bit_reversal_property(self, k):
        vals = van_der_corput_points(1, 2 ** k)
        assert sorted(vals) == pytest.approx([m / 2 ** k for m in range(1, 2 ** k)])

    def test_invalid(self):
        with pytest.raises(ValueError):
            van_der_corput(0)
        with pytest.raises(ValueError):
            van_der_corput(3, 1)


class TestLdSchedule:
    def test_single_point(self):
        assert ld_schedule(1, 0, 0, 30.0)[0].times.tolist() == [15.0]

    def test_cumulative_and_gaps(self):
        schedules = ld_schedule(20, 8, 10, 30.0)
        assert [s.times.size for s in schedules] == [20 + 8 * k for k in range(11)]
        assert schedules[-1].times.size == 100
        for a, b in zip(schedules, schedules[1:]):
            assert set(a.times) <= set(b.times)
            assert max_gap(b.times, 30.0) <= max_gap(a.times, 30.0)

    @pytest.mark.parametrize("n", [5, 10, 20, 40])
    def test_discrepancy_beats_random(self, n):
        rng = np.random.default_rng(n)
        random_disc = np.median([star_discrepancy(rng.uniform(size=n)) for _ in range(100)])
        assert star_discrepancy(van_der_corput_points(1, n + 1)) < random_disc

    def test_star_discrepancy_known(self):
        # centred grid (2i - 1) / 2n is optimal with discrepancy 1 / 2n
        n = 8
        assert star_discrepancy((2 * np.arange(1, n + 1) - 1) / (2 * n)) == pytest.approx(1 / (2 * n))


class TestPosterior:
    def test_sharp_peak(self):
        tr = simulate_trace(benchmark_params(1), "fid", TIMES)
        fit = strategy3(tr, uncertainties=False)
        s = sample_posterior(tr, "fid", J=100, rng=0)
        i, j = cell_index(s.params)
        i0, j0 = cell_index(np.array([[fit.omega, fit.gamma]]))
        assert np.all(np.abs(i - i0) <= 1) and np.all(np.abs(j - j0) <= 1)

    def test_flat_spreads(self):
        rng = np.random.default_rng(4)
        tr = MeasurementTrace(np.sort(rng.uniform(0, 30, 5)), rng.normal(size=5))
        cells = set()
        for _ in range(100):
            i, j = cell_index(sample_posterior(tr, "fid", J=100, rng=rng).params)
            cells |= set(zip(i.tolist(), j.tolist()))
        assert len(cells) >= 0.25 * 60 * 40

    def test_concentrates_after_25_samples(self):
        tr = simulate_trace(benchmark_params(1), "fid", 1.2 * np.arange(1, 26), NoiseSpec.gaussian(0.05), 1)
        s = sample_posterior(tr, "fid", J=200, rng=1)
        assert np.allclose(np.median(s.params, axis=0), (1.0, 0.1), atol=0.03)

    def test_in_box(self):
        tr = simulate_trace(benchmark_params(8), "fid", TIMES, NoiseSpec.gaussian(0.1), 2)
        p = sample_posterior(tr, "fid", J=500, rng=3).params
        assert np.all((p[:, 0] >= 0.05) & (p[:, 0] <= 3) & (p[:, 1] >= 0.001) & (p[:, 1] <= 1))


class TestTraceVariance:
    def test_identical_samples(self):
        s = PosteriorSamples(np.tile([1.0, 0.1], (10, 1)), np.full(10, 0.1))
        cand = np.linspace(0, 30, 50)
        assert np.allclose(predicted_variance(s, "fid", cand), 0)
        assert trace_variance_schedule(s, "fid", cand, 3).tolist() == [0.0]

    def test_zero_at_origin(self):
        s = PosteriorSamples(np.array([[1.0, 0.1], [1.05, 0.1]]), np.full(2, 0.5))
        v = predicted_variance(s, "fid", np.linspace(0, 30, 301))
        assert v[0] == 0 and v.max() > 0

    def test_model1_global_peak(self):
        tr = simulate_trace(benchmark_params(1), "fid", 1.2 * np.arange(1, 26), NoiseSpec.gaussian(0.05), 1)
        s = sample_posterior(tr, "fid", J=100, rng=1)
        cand = np.linspace(0, 30, 3001)
        first = trace_variance_schedule(s, "fid", cand, 8)
        mean_w = s.params[:, 0].mean()
        assert 2.5 <= first[0] * mean_w / math.pi <= 4.0
        assert len(first) == 8

    def test_peaks_sorted_by_variance(self):
        tr = simulate_trace(benchmark_params(1), "fid", 1.2 * np.arange(1, 26), NoiseSpec.gaussian(0.05), 1)
        s = sample_posterior(tr, "fid", J=100, rng=2)
        peaks = trace_variance_schedule(s, "fid", np.linspace(0, 30, 1001), 5)
        v = predicted_variance(s, "fid", peaks)
        assert np.all(np.diff(v) <= 0)


class TestRefineLoop:
    def test_noiseless(self):
        p = benchmark_params(4)
        acquire = simulated_acquirer(p, "fid", NoiseSpec())
        for method in ("ld", "variance"):
            res = refine_loop(ld_schedule(20, 8, 0, 30.0)[0].times, acquire, method, iterations=3, J=30)
            assert len(res) == 4
            for fit in res:
                assert fit.omega == pytest.approx(p.omega, rel=1e-6) and fit.gamma == pytest.approx(p.gamma, rel=1e-6)

    def test_ld_final_schedule_matches_ld(self):
        p = benchmark_params(4)
        res = refine_loop(ld_schedule(20, 8, 0, 30.0)[0].times, simulated_acquirer(p, "fid", NoiseSpec()),
                          "ld", iterations=10)
        assert res[-1].n_samples == 100 and res[-1].extra == {"iteration": 10, "method": "ld"}

    def test_model4_trend_and_ordering(self):
        p = benchmark_params(4)
        noise = NoiseSpec.gaussian(0.05)
        truth = np.array([p.omega, p.gamma])
        err = {}
        for method in ("ld", "variance"):
            runs = []
            for seed in range(20):
                res = refine_loop(ld_schedule(20, 8, 0, 30.0)[0].times, simulated_acquirer(p, "fid", noise, seed),
                                  method, iterations=10, seed=seed)
                runs.append([np.abs([f.omega, f.gamma] - truth) / truth for f in res])
            err[method] = np.median(np.array(runs), axis=0)  # (iterations + 1, 2)
        for method in ("ld", "variance"):
            assert np.all(err[method][-1] < err[method][0])
        assert np.all(err["ld"][-1] <= err["variance"][-1])

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            refine_loop(TIMES, lambda t: np.zeros_like(t), "random")

    def test_jsonl(self, tmp_path):
        p = benchmark_params(1)
        res = refine_loop(ld_schedule(20, 8, 0, 30.0)[0].times, simulated_acquirer(p, "fid", NoiseSpec()),
                          "ld", iterations=2)
        text = write_jsonl(res, tmp_path / "out.jsonl")
        lines = (tmp_path / "out.jsonl").read_text().splitlines()
        assert text.count("\n") == 3 and [json.loads(x)["extra"]["iteration"] for x in lines] == [0, 1, 2]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.01, 29.99), min_size=1, max_size=30, unique=True))
def test_max_gap_bounds(times):
    g = max_gap(times, 30.0)
    assert 30.0 / (len(times) + 1) - 1e-12 <= g <= 30.0
