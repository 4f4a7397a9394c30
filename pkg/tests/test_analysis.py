"""Tests for error metrics, the network error recursions, and spectra."""

import math
import types

import numpy as np
import pytest

from gridfreq.analysis import (
    AnalysisError,
    MseReport,
    empirical_mse,
    empirical_mse_mc,
    error_spectrum,
    initial_network_state,
    mean_error_step,
    mse_step,
    write_mse_csv,
    write_spectrum_csv,
)
from gridfreq.augmented import AugmentedVector
from gridfreq.estimators import FreqTrace, lss_model, run_filter, shared_increment_model
from gridfreq.network import (
    BridgeAssignment,
    DiffusionWeights,
    TickRecord,
    Topology,
    reference_network,
    run_distributed,
    run_distributed_mc,
    uniform_weights,
)
from gridfreq.signals import ConstantFreq, Scenario, ScenarioSegment, clarke_arrays, generate_arrays

FS = 1000.0


def make_scenario(duration, amps=(1.0, 1.0, 1.0), offs=(0.0, 0.0, 0.0)):
    return Scenario(
        [ScenarioSegment(0.0, duration, ConstantFreq(50.0), amplitudes=amps, phase_offsets_rad=offs)],
        sample_rate_hz=FS,
        duration_s=duration,
    )


def make_trace(err, f0=50.0):
    err = np.asarray(err, dtype=float)
    k = np.arange(err.size)
    return FreqTrace(
        k=k,
        t_s=k / FS,
        f_hat_hz=f0 + err,
        innovation_power=np.zeros(err.size),
        states=np.zeros((err.size, 1), dtype=complex),
        flags=np.zeros(err.size, dtype=int),
        f_true_hz=f0,
    )


def single_node_weights():
    return DiffusionWeights(beta={0: {0: 1.0}}, gamma={})


class TestEmpiricalMse:
    def test_exact_trace_scores_zero(self):
        report = empirical_mse({1: make_trace(np.zeros(100))}, window=(0, 100))
        assert report.empirical_mse_hz2[1] == 0.0

    def test_constant_offset_squares(self):
        report = empirical_mse({1: make_trace(np.full(100, 0.1))}, window=(50, 100))
        assert report.empirical_mse_hz2[1] == pytest.approx(0.01)

    def test_mc_variant_averages_symmetric_errors(self):
        e = 0.35
        f_hat = np.stack([np.full((1, 40), 50.0 + e), np.full((1, 40), 50.0 - e)])
        mc = types.SimpleNamespace(node_ids=(7,), f_hat_hz=f_hat)
        report = empirical_mse_mc(mc, window=(0, 40), f_true=50.0)
        assert report.empirical_mse_hz2[7] == pytest.approx(e**2)

    def test_empty_window_rejected(self):
        with pytest.raises(AnalysisError, match="empty"):
            empirical_mse({1: make_trace(np.zeros(10))}, window=(5, 5))

    def test_window_outside_trace_rejected(self):
        with pytest.raises(AnalysisError, match="outside"):
            empirical_mse({1: make_trace(np.zeros(10))}, window=(0, 11))


def half_step_record(k=1, d=2):
    return TickRecord(
        k=k,
        M_prior=np.eye(d, dtype=complex),
        M_post=0.5 * np.eye(d, dtype=complex),
        A=np.eye(d, dtype=complex),
        gain=np.zeros((d, d), dtype=complex),
        H=np.ones((d, d), dtype=complex),
    )


class TestMeanErrorStep:
    def test_zero_means_stay_zero(self):
        w = single_node_weights()
        out = mean_error_step(
            {0: AugmentedVector(np.zeros(1, dtype=complex))}, w, {0: half_step_record()}
        )
        assert out[0].top[0] == 0.0

    def test_halving_correction_halves_the_mean(self):
        # A = I and M_post = M_prior/2 make the correction map exactly 1/2
        w = single_node_weights()
        means = {0: AugmentedVector(np.array([0.8 - 0.4j]))}
        for expect in (0.4 - 0.2j, 0.2 - 0.1j, 0.1 - 0.05j):
            means = mean_error_step(means, w, {0: half_step_record()})
            assert means[0].top[0] == pytest.approx(expect)

    def test_singular_prior_rejected(self):
        w = single_node_weights()
        rec = TickRecord(
            k=1, M_prior=np.zeros((2, 2), dtype=complex), M_post=np.eye(2, dtype=complex),
            A=np.eye(2, dtype=complex), gain=np.zeros((2, 2)), H=np.ones((2, 2)),
        )
        with pytest.raises(AnalysisError, match="singular prior"):
            mean_error_step({0: AugmentedVector(np.ones(1, dtype=complex))}, w, {0: rec})

    def test_monte_carlo_mean_stays_on_zero_fixed_point(self):
        # unbiased start: the recursion predicts zero mean error throughout,
        # and the shared-increment network should agree to Monte-Carlo noise
        scn = make_scenario(0.06)
        t3 = Topology((1, 2, 3), [(1, 2), (2, 3)])
        b3 = BridgeAssignment(t3, {2})
        mc = run_distributed_mc(
            t3, scn, seeds=range(500), snr_db=50.0, assignment=b3, record_x=True
        )
        err = mc.x_hat - np.exp(2j * np.pi * 50.0 / FS)
        for k in range(1, 51):
            for j in range(3):
                emp = err[:, j, k]
                se = np.sqrt((np.var(emp.real) + np.var(emp.imag)) / err.shape[0])
                assert abs(np.mean(emp)) <= 3 * se, f"node {j + 1}, tick {k}"

    def test_monte_carlo_tracks_biased_transient(self):
        # full-state mode: a 1 Hz initialization bias decays through the
        # recorded correction maps; 500-seed empirical means must follow
        scn = make_scenario(0.06)
        t3 = Topology((1, 2, 3), [(1, 2), (2, 3)])
        b3 = BridgeAssignment(t3, {2})
        w3 = uniform_weights(t3, b3)
        ref = run_distributed(
            t3, scn, snr_db=None, mode="distributed-acekf", assignment=b3,
            f_init_hz=49.0, record_matrices=True,
        )
        x_true = np.exp(2j * np.pi * 50.0 / FS)
        e0 = np.array([np.exp(2j * np.pi * 49.0 / FS) - x_true, 0.0, 0.0], dtype=complex)
        means = {n: AugmentedVector(e0) for n in t3.node_ids}
        theory = [dict(means)]
        for k in range(50):
            means = mean_error_step(means, w3, {n: ref.records[n][k] for n in t3.node_ids})
            theory.append(means)

        mc = run_distributed_mc(
            t3, scn, seeds=range(500), snr_db=50.0, mode="distributed-acekf",
            assignment=b3, f_init_hz=49.0, record_x=True,
        )
        err = mc.x_hat - x_true
        for k in range(1, 51):
            for j, n in enumerate(t3.node_ids):
                emp = err[:, j, k]
                se = np.sqrt((np.var(emp.real) + np.var(emp.imag)) / err.shape[0])
                z = abs(np.mean(emp) - theory[k][n].top[0]) / se
                assert z <= 3, f"node {n}, tick {k}: {z:.2f}"
        # the transient itself is visible at the first corrected tick
        assert abs(theory[1][1].top[0]) > 1e-3


class TestMseStep:
    def test_zero_noise_zero_init_stays_zero(self):
        w = single_node_weights()
        state = initial_network_state(
            (0,), w, M0=np.zeros((2, 2)), Cu=np.zeros((2, 2)), Cn=np.zeros((2, 2))
        )
        for _ in range(5):
            V, sigma, state = mse_step(state, w, {0: half_step_record()})
        assert np.all(sigma[0] == 0)
        assert np.all(V[(0, 0)] == 0)

    def test_single_node_matches_filter_covariance(self):
        # with one node the recursion is the Joseph-form covariance update,
        # so it must reproduce the filter's own M sequence
        scn = make_scenario(0.2)
        t1 = Topology((0,), [])
        run = run_distributed(t1, scn, seed=0, snr_db=30.0, record_matrices=True)
        model = shared_increment_model(FS, snr_db=30.0)
        w = single_node_weights()
        state = initial_network_state(
            (0,), w, M0=0.1 * np.eye(2), Cu=model.Cu.materialize(), Cn=model.Cn.materialize()
        )
        for rec in run.records[0]:
            V, sigma, state = mse_step(state, w, {0: rec})
            assert np.max(np.abs(sigma[0] - rec.M_post)) < 1e-9

    def test_nonbridge_trace_bounded_by_worst_serving_bridge(self):
        # a path with two serving bridges per interior non-bridge makes the
        # convexity bound strict rather than degenerate
        scn = make_scenario(0.2)
        t5 = Topology((1, 2, 3, 4, 5), [(1, 2), (2, 3), (3, 4), (4, 5)])
        b5 = BridgeAssignment(t5, {1, 3, 5})
        w5 = uniform_weights(t5, b5)
        run = run_distributed(t5, scn, seed=0, snr_db=30.0, assignment=b5, record_matrices=True)
        model = shared_increment_model(FS, snr_db=30.0)
        state = initial_network_state(
            t5.node_ids, w5, M0=0.1 * np.eye(2),
            Cu=model.Cu.materialize(), Cn=model.Cn.materialize(),
        )
        saw_strict = False
        for k in range(len(run.records[1])):
            V, sigma, state = mse_step(state, w5, {n: run.records[n][k] for n in t5.node_ids})
            for i in (2, 4):
                tr = np.trace(sigma[i]).real
                bound = max(np.trace(V[(y, y)]).real for y in b5.bridges_of(i))
                assert tr <= bound * (1 + 1e-9), f"node {i}, tick {k}"
                saw_strict = saw_strict or tr < bound * 0.999
        assert saw_strict

    def test_preserves_hermitian_psd(self):
        scn = make_scenario(0.1)
        t, b = reference_network()
        w = uniform_weights(t, b)
        run = run_distributed(t, scn, seed=1, snr_db=30.0, assignment=b, record_matrices=True)
        model = shared_increment_model(FS, snr_db=30.0)
        state = initial_network_state(
            t.node_ids, w, M0=0.1 * np.eye(2),
            Cu=model.Cu.materialize(), Cn=model.Cn.materialize(),
        )
        for k in range(len(run.records[1])):
            _, _, state = mse_step(state, w, {n: run.records[n][k] for n in t.node_ids})
        np.testing.assert_array_equal(state.E, state.E.conj().T)
        assert np.min(np.linalg.eigvalsh(state.E)) > -1e-12

    def test_sigma_iterates_converge(self):
        scn = make_scenario(1.0)
        t, b = reference_network()
        w = uniform_weights(t, b)
        run = run_distributed(t, scn, seed=0, snr_db=30.0, assignment=b, record_matrices=True)
        model = shared_increment_model(FS, snr_db=30.0)
        state = initial_network_state(
            t.node_ids, w, M0=0.1 * np.eye(2),
            Cu=model.Cu.materialize(), Cn=model.Cn.materialize(),
        )
        prev = None
        delta = np.inf
        for k in range(len(run.records[1])):
            _, sigma, state = mse_step(state, w, {n: run.records[n][k] for n in t.node_ids})
            if prev is not None:
                delta = max(np.linalg.norm(sigma[i] - prev[i]) for i in t.node_ids)
            prev = sigma
        assert delta < 1e-8

    def test_dimension_mismatch_rejected(self):
        w = single_node_weights()
        state = initial_network_state(
            (0,), w, M0=np.eye(2), Cu=np.zeros((2, 2)), Cn=np.zeros((2, 2))
        )
        with pytest.raises(AnalysisError, match="expected"):
            mse_step(state, w, {0: half_step_record(d=4)})

    def test_state_requires_every_node_covered(self):
        w = DiffusionWeights(beta={1: {1: 1.0}}, gamma={})
        with pytest.raises(AnalysisError, match="neither"):
            initial_network_state((1, 2), w, np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)))

    def test_unknown_aggregator_rejected(self):
        w = DiffusionWeights(beta={9: {9: 1.0}}, gamma={})
        with pytest.raises(AnalysisError, match="unknown"):
            initial_network_state((1,), w, np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)))


class TestErrorSpectrum:
    def test_pure_tone_peaks_at_its_frequency(self):
        n = 1024
        tone = 0.2 * np.sin(2 * np.pi * 100.0 * np.arange(n) / FS)
        spec = error_spectrum(make_trace(tone), window=(0, n))
        assert spec.peak_freq_hz == pytest.approx(100.0, abs=FS / n)
        assert spec.peak_power > 10 * np.median(spec.power)

    def test_white_noise_has_no_dominant_peak(self):
        rng = np.random.default_rng(2024)
        spec = error_spectrum(make_trace(rng.normal(size=2048)), window=(0, 2048))
        assert spec.peak_power < 5 * np.median(spec.power[1:])

    def test_short_window_rejected(self):
        with pytest.raises(AnalysisError, match="512"):
            error_spectrum(make_trace(np.zeros(600)), window=(0, 400))

    def test_window_beyond_trace_rejected(self):
        with pytest.raises(AnalysisError, match="outside"):
            error_spectrum(make_trace(np.zeros(600)), window=(0, 700))

    def test_strictly_linear_filter_oscillates_at_twice_mains(self):
        # an unbalanced sag makes the proper-signal model's error spin at 2f
        scn = make_scenario(
            1.5, amps=(0.2, 1.0, 1.0), offs=(0.0, math.radians(20.0), math.radians(-20.0))
        )
        v = clarke_arrays(generate_arrays(scn, seed=5, snr_db=30.0))[1]
        trace = run_filter(lss_model(FS, snr_db=30.0), v, FS)
        err_trace = FreqTrace(
            k=trace.k, t_s=trace.t_s, f_hat_hz=trace.f_hat_hz,
            innovation_power=trace.innovation_power, states=trace.states,
            flags=trace.flags, f_true_hz=50.0,
        )
        spec = error_spectrum(err_trace, window=(500, 1500))
        assert abs(spec.peak_freq_hz - 100.0) < 2.0


class TestCsvExports:
    def test_mse_report_with_theory_columns(self, tmp_path):
        report = MseReport(
            nodes=(1, 2),
            empirical_mse_hz2={1: 0.5, 2: 0.25},
            theoretical_trace={1: 0.125, 2: None},
            bound_ok={1: True, 2: None},
        )
        path = tmp_path / "mse.csv"
        write_mse_csv(path, report)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "node,empirical_mse_hz2,theoretical_trace,bound_ok"
        assert lines[1] == "1,0.5,0.125,True"
        assert lines[2] == "2,0.25,,"

    def test_spectrum_csv(self, tmp_path):
        n = 1024
        tone = np.sin(2 * np.pi * 50.0 * np.arange(n) / FS)
        spec = error_spectrum(make_trace(tone), window=(0, n))
        path = tmp_path / "spec.csv"
        write_spectrum_csv(path, spec)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "freq_hz,power"
        assert len(lines) == 1 + spec.freq_hz.size
