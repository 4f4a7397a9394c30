"""Tests for the graph model, diffusion combiners, and multi-node simulation."""

import math

import numpy as np
import pytest

from gridfreq.augmented import augment
from gridfreq.estimators import (
    acekf_step,
    nss_model,
    shared_increment_model,
    with_sequence_observation,
)
from gridfreq.network import (
    BridgeAssignment,
    BridgeAssignmentError,
    DiffusionError,
    DiffusionWeights,
    DistributedConfigError,
    Message,
    Topology,
    TopologyError,
    WeightsError,
    bridge_diffuse,
    conventional_weights,
    dfe_tick,
    nonbridge_diffuse,
    reference_network,
    run_distributed,
    run_distributed_mc,
    select_bridges,
    uniform_weights,
    write_messages_csv,
)
from gridfreq.signals import ConstantFreq, Scenario, ScenarioSegment

FS = 1000.0


def make_scenario(amps=(1.0, 1.0, 1.0), offs=(0.0, 0.0, 0.0), duration=1.0, f_hz=50.0):
    return Scenario(
        [ScenarioSegment(0.0, duration, ConstantFreq(f_hz), amplitudes=amps, phase_offsets_rad=offs)],
        sample_rate_hz=FS,
        duration_s=duration,
    )


def sag_scenario(duration=1.0):
    """Unbalanced condition: 80% drop on phase a plus 20-degree shifts on b/c."""
    return make_scenario(
        amps=(0.2, 1.0, 1.0),
        offs=(0.0, math.radians(20.0), math.radians(-20.0)),
        duration=duration,
    )


class TestTopology:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(TopologyError, match="duplicate"):
            Topology((1, 1, 2), [(1, 2)])

    def test_self_loop_rejected(self):
        with pytest.raises(TopologyError, match="self-loop"):
            Topology((1, 2), [(1, 1)])

    def test_unknown_endpoint_rejected(self):
        with pytest.raises(TopologyError, match="unknown node"):
            Topology((1, 2), [(1, 3)])

    def test_neighbors_sorted_and_degree(self):
        t, _ = reference_network()
        assert t.neighbors(4) == (1, 2, 3)
        assert t.neighbors(2) == (1, 4, 7)
        assert t.degree(4) == 3
        assert t.closed_neighborhood(6) == (5, 6, 7)

    def test_disconnected_graph_warns_but_constructs(self):
        with pytest.warns(UserWarning, match="not connected"):
            t = Topology((1, 2, 3), [(1, 2)])
        assert not t.is_connected

    def test_reference_is_connected(self):
        t, _ = reference_network()
        assert t.is_connected
        assert len(t.edges) == 8


class TestBridgeAssignment:
    def test_reference_assignment_valid(self):
        t, b = reference_network()
        assert b.bridges == {4, 6}
        # every non-bridge is served by exactly one bridge here
        assert b.bridges_of(1) == (4,)
        assert b.bridges_of(5) == (6,)
        assert b.bridges_of(4) == (4,)

    def test_adjacent_bridges_rejected(self):
        t, _ = reference_network()
        with pytest.raises(BridgeAssignmentError, match="adjacent"):
            BridgeAssignment(t, {1, 4})

    def test_undominated_node_rejected(self):
        t, _ = reference_network()
        # {6} leaves nodes 1..3 without a bridge neighbor
        with pytest.raises(BridgeAssignmentError, match="no bridge neighbor"):
            BridgeAssignment(t, {6})

    def test_unknown_bridge_rejected(self):
        t, _ = reference_network()
        with pytest.raises(BridgeAssignmentError, match="unknown"):
            BridgeAssignment(t, {99})


class TestSelectBridges:
    def test_star_graph_picks_center(self):
        t = Topology(("c", "l1", "l2", "l3"), [("c", "l1"), ("c", "l2"), ("c", "l3")])
        assert select_bridges(t).bridges == {"c"}

    def test_single_edge_picks_exactly_one(self):
        t = Topology(("a", "b"), [("a", "b")])
        assert len(select_bridges(t).bridges) == 1

    def test_path_graph_picks_middle(self):
        t = Topology((1, 2, 3), [(1, 2), (2, 3)])
        assert select_bridges(t).bridges == {2}

    def test_reference_topology_yields_valid_assignment(self):
        t, _ = reference_network()
        b = select_bridges(t, seed=0)
        # constructor re-checks independence and domination
        BridgeAssignment(t, b.bridges)

    def test_deterministic_given_seed(self):
        t, _ = reference_network()
        assert select_bridges(t, seed=7).bridges == select_bridges(t, seed=7).bridges

    def test_random_graphs_always_valid(self):
        # the greedy builds a maximal independent set, which dominates any graph
        rng = np.random.default_rng(42)
        for trial in range(25):
            n = int(rng.integers(2, 31))
            ids = tuple(range(n))
            edges = [
                (i, j)
                for i in range(n)
                for j in range(i + 1, n)
                if rng.random() < 0.2
            ]
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # sparse draws may be disconnected
                t = Topology(ids, edges)
            b = select_bridges(t, seed=trial)
            BridgeAssignment(t, b.bridges)


class TestWeights:
    def test_negative_weight_rejected(self):
        with pytest.raises(WeightsError, match="negative"):
            DiffusionWeights(beta={1: {1: 1.5, 2: -0.5}}, gamma={})

    def test_row_must_sum_to_one(self):
        with pytest.raises(WeightsError, match="sums to"):
            DiffusionWeights(beta={1: {1: 0.6, 2: 0.6}}, gamma={})

    def test_empty_row_rejected(self):
        with pytest.raises(WeightsError, match="empty"):
            DiffusionWeights(beta={1: {}}, gamma={})

    def test_zero_weight_allowed(self):
        w = DiffusionWeights(beta={1: {1: 1.0, 2: 0.0}}, gamma={})
        assert w.beta[1][2] == 0.0

    def test_uniform_weights_on_reference(self):
        t, b = reference_network()
        w = uniform_weights(t, b)
        assert set(w.beta) == {4, 6}
        assert w.beta[4] == {1: 0.25, 2: 0.25, 3: 0.25, 4: 0.25}
        assert w.beta[6] == {5: pytest.approx(1 / 3), 6: pytest.approx(1 / 3), 7: pytest.approx(1 / 3)}
        assert set(w.gamma) == {1, 2, 3, 5, 7}
        assert w.gamma[1] == {4: 1.0}
        assert w.gamma[5] == {6: 1.0}

    def test_conventional_weights_cover_every_node(self):
        t, _ = reference_network()
        w = conventional_weights(t)
        assert set(w.beta) == set(t.node_ids)
        assert w.beta[1] == {1: pytest.approx(1 / 3), 2: pytest.approx(1 / 3), 4: pytest.approx(1 / 3)}
        assert w.gamma == {}


def _vec(z):
    return augment(np.array([z], dtype=complex))


class TestCombiners:
    def setup_method(self):
        self.t = Topology(("a", "b"), [("a", "b")])
        self.b = BridgeAssignment(self.t, {"a"})

    def test_consensus_fixed_point(self):
        w = uniform_weights(self.t, self.b)
        z = np.exp(0.25j)
        out = bridge_diffuse("a", {"a": _vec(z), "b": _vec(z)}, w)
        assert out.top[0] == pytest.approx(z)

    def test_arithmetic_mean(self):
        w = uniform_weights(self.t, self.b)
        out = bridge_diffuse("a", {"a": _vec(np.exp(0.1j)), "b": _vec(np.exp(0.3j))}, w)
        assert out.top[0] == pytest.approx((np.exp(0.1j) + np.exp(0.3j)) / 2)

    def test_passthrough_weights(self):
        w = DiffusionWeights(beta={"a": {"a": 1.0, "b": 0.0}}, gamma={})
        out = bridge_diffuse("a", {"a": _vec(2.0 + 1.0j), "b": _vec(-5.0j)}, w)
        assert out.top[0] == 2.0 + 1.0j

    def test_missing_estimate_raises(self):
        w = uniform_weights(self.t, self.b)
        with pytest.raises(DiffusionError, match="'b'"):
            bridge_diffuse("a", {"a": _vec(1.0)}, w)

    def test_renormalize_drops_missing(self):
        w = uniform_weights(self.t, self.b)
        out = bridge_diffuse("a", {"a": _vec(2.0 + 0.5j)}, w, renormalize=True)
        assert out.top[0] == pytest.approx(2.0 + 0.5j)

    def test_no_estimates_at_all_raises(self):
        w = uniform_weights(self.t, self.b)
        with pytest.raises(DiffusionError, match="no estimates"):
            bridge_diffuse("a", {}, w, renormalize=True)

    def test_nonbridge_mirrors_bridge_cases(self):
        w = uniform_weights(self.t, self.b)
        psi = {"a": _vec(np.exp(0.2j))}
        out = nonbridge_diffuse("b", psi, w)
        assert out.top[0] == pytest.approx(np.exp(0.2j))
        with pytest.raises(DiffusionError, match="redistribution"):
            nonbridge_diffuse("b", {}, w)

    def test_output_keeps_conjugate_structure(self):
        w = uniform_weights(self.t, self.b)
        out = bridge_diffuse("a", {"a": _vec(1.0 + 2.0j), "b": _vec(0.5 - 1.0j)}, w)
        full = out.materialize()
        assert full[1] == np.conj(full[0])

    def test_two_stage_round_is_idempotent_on_consensus(self):
        t, b = reference_network()
        w = uniform_weights(t, b)
        z = _vec(np.exp(0.7j))
        psi = {i: bridge_diffuse(i, {n: z for n in t.node_ids}, w) for i in b.bridges}
        for m in t.node_ids:
            out = psi[m] if m in b.bridges else nonbridge_diffuse(m, psi, w)
            assert out.top[0] == pytest.approx(z.top[0])


class TestDistributedRuns:
    def test_single_node_network_equals_manual_loop(self):
        scn = make_scenario(duration=0.3)
        t = Topology((0,), [])
        run = run_distributed(t, scn, seed=0, snr_db=None, mode="dfe")

        from gridfreq.signals import clarke_arrays, generate_arrays

        v = clarke_arrays(generate_arrays(scn))[1]
        aux_model = nss_model(FS)
        shared_model = shared_increment_model(FS)
        aux = aux_model.initial_state(v[0])
        shared = shared_model.initial_state(v[0])
        manual = [shared_model.extract_freq(shared.x_hat.materialize())[0]]
        for k in range(1, scn.n_samples):
            vp, vm = aux.x_hat.top[1], aux.x_hat.top[2]
            y = augment(v[k : k + 1])
            aux = acekf_step(aux_model, aux, y)
            shared = acekf_step(with_sequence_observation(shared_model, vp, vm), shared, y)
            manual.append(shared_model.extract_freq(shared.x_hat.materialize())[0])
        np.testing.assert_array_equal(run.traces[0].f_hat_hz, np.array(manual))

    def test_noiseless_balanced_network_reaches_consensus(self):
        # symmetric fixed point: every node settles on the true increment
        t, b = reference_network()
        run = run_distributed(t, make_scenario(duration=1.0), snr_db=None, assignment=b)
        xs = np.array([run.traces[n].states[-1, 0] for n in t.node_ids])
        assert np.max(np.abs(xs - xs[0])) < 1e-9
        for n in t.node_ids:
            assert abs(run.traces[n].f_hat_hz[-1] - 50.0) < 1e-9

    def test_heterogeneous_nodes_stay_unbiased(self):
        # one healthy node among six sagged ones; trailing mean error per node
        t, b = reference_network()
        scens = {n: sag_scenario(duration=1.5) for n in t.node_ids}
        scens[1] = make_scenario(duration=1.5)
        run = run_distributed(t, scens, seed=0, snr_db=30.0, assignment=b)
        for n in t.node_ids:
            tail = run.traces[n].f_hat_hz[-500:] - 50.0
            assert abs(np.mean(tail)) < 0.01, f"node {n}"

    def test_batched_mc_matches_single_runs(self):
        t, b = reference_network()
        scn = make_scenario(duration=0.3)
        mc = run_distributed_mc(t, scn, seeds=[3, 11], snr_db=30.0, assignment=b)
        for row, seed in enumerate([3, 11]):
            single = run_distributed(t, scn, seed=seed, snr_db=30.0, assignment=b)
            for col, n in enumerate(t.node_ids):
                np.testing.assert_array_equal(mc.f_hat_hz[row, col], single.traces[n].f_hat_hz)

    def test_no_diffusion_equals_isolated_node(self):
        # node in position 0 draws the same noise stream either way
        t, b = reference_network()
        scn = make_scenario(duration=0.3)
        joint = run_distributed(t, scn, seed=5, snr_db=30.0, diffusion="none", assignment=b)
        alone = run_distributed(Topology((1,), []), scn, seed=5, snr_db=30.0)
        np.testing.assert_array_equal(joint.traces[1].f_hat_hz, alone.traces[1].f_hat_hz)

    def test_full_state_mode_agrees_with_dfe_at_steady_state(self):
        t, b = reference_network()
        scn = make_scenario(duration=1.0)
        r_dfe = run_distributed(t, scn, snr_db=None, mode="dfe", assignment=b)
        r_full = run_distributed(t, scn, snr_db=None, mode="distributed-acekf", assignment=b)
        for n in t.node_ids:
            x_dfe = r_dfe.traces[n].states[-1, 0]
            x_full = r_full.traces[n].states[-1, 0]
            assert abs(x_dfe - x_full) < 1e-9

    def test_reseeding_the_tracker_increment_is_unstable(self):
        # re-feeding the diffused increment into the local tracker couples the
        # two filters; with noiseless gains the loop oscillates and diverges
        t, b = reference_network()
        scn = make_scenario(duration=1.0)
        run = run_distributed(t, scn, snr_db=None, assignment=b, reseed_aux=True)
        err = np.abs(run.traces[1].f_hat_hz[-100:] - 50.0)
        assert np.max(err) > 0.1

    def test_message_log_respects_topology(self):
        t, b = reference_network()
        scn = make_scenario(duration=0.1)
        run = run_distributed(t, scn, seed=1, snr_db=30.0, assignment=b, collect_messages=True)
        assert run.messages, "expected a populated message log"
        for m in run.messages:
            assert frozenset((m.src, m.dst)) in t.edges
            if m.phase == "to_bridge":
                assert m.dst in b.bridges
            else:
                assert m.phase == "from_bridge"
                assert m.src in b.bridges
        # 5 uploads + 5 downloads per tick on this graph
        n_ticks = scn.n_samples - 1
        assert len(run.messages) == 10 * n_ticks

    def test_conventional_messages_flow_both_ways(self):
        t, b = reference_network()
        scn = make_scenario(duration=0.05)
        run = run_distributed(
            t, scn, seed=1, snr_db=30.0, diffusion="conventional", collect_messages=True
        )
        per_tick = 2 * len(t.edges)
        assert len(run.messages) == per_tick * (scn.n_samples - 1)
        assert {m.phase for m in run.messages} == {"to_neighbor"}

    def test_messages_csv_roundtrip(self, tmp_path):
        msgs = [Message(k=1, phase="to_bridge", src=2, dst=4, payload=0.5 - 0.25j)]
        path = tmp_path / "msgs.csv"
        write_messages_csv(path, msgs)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "k,phase,src,dst,payload_re,payload_im"
        assert lines[1] == "1,to_bridge,2,4,0.5,-0.25"

    def test_recorded_matrices_have_filter_shapes(self):
        t, b = reference_network()
        scn = make_scenario(duration=0.05)
        run = run_distributed(t, scn, seed=0, snr_db=30.0, assignment=b, record_matrices=True)
        recs = run.records[4]
        assert len(recs) == scn.n_samples - 1
        first = recs[0]
        for mat in (first.M_prior, first.M_post, first.A, first.H):
            assert mat.shape == (2, 2)
        assert first.gain.shape == (2, 2)

    def test_innovation_power_positive_under_noise(self):
        t, b = reference_network()
        run = run_distributed(t, make_scenario(duration=0.1), seed=2, snr_db=30.0, assignment=b)
        assert np.all(run.traces[3].innovation_power[1:] > 0)

    def test_trace_metadata(self):
        t, b = reference_network()
        scn = make_scenario(duration=0.1)
        run = run_distributed(t, scn, snr_db=None, assignment=b)
        tr = run.traces[7]
        assert tr.t_s[1] - tr.t_s[0] == pytest.approx(1.0 / FS)
        np.testing.assert_allclose(tr.f_true_hz, 50.0)


class TestConfigErrors:
    def test_missing_scenario_rejected(self):
        t, b = reference_network()
        with pytest.raises(DistributedConfigError, match="no scenario"):
            run_distributed(t, {1: make_scenario()}, assignment=b)

    def test_mismatched_sampling_rejected(self):
        t, b = reference_network()
        scens = {n: make_scenario() for n in t.node_ids}
        scens[3] = make_scenario(duration=0.5)
        with pytest.raises(DistributedConfigError, match="disagrees"):
            run_distributed(t, scens, assignment=b)

    def test_unknown_mode_rejected(self):
        t, b = reference_network()
        with pytest.raises(DistributedConfigError, match="mode"):
            run_distributed(t, make_scenario(), mode="centralized", assignment=b)

    def test_unknown_diffusion_rejected(self):
        t, b = reference_network()
        with pytest.raises(DistributedConfigError, match="diffusion"):
            run_distributed(t, make_scenario(), diffusion="gossip", assignment=b)

    def test_empty_seed_list_rejected(self):
        t, b = reference_network()
        with pytest.raises(DistributedConfigError, match="empty"):
            run_distributed_mc(t, make_scenario(), seeds=[], assignment=b)

    def test_incomplete_weights_rejected(self):
        t, b = reference_network()
        w = DiffusionWeights(beta={4: {1: 0.25, 2: 0.25, 3: 0.25, 4: 0.25}}, gamma={})
        with pytest.raises(DistributedConfigError, match="incomplete"):
            run_distributed(t, make_scenario(), assignment=b, weights=w)
