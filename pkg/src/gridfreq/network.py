"""Node topology, bridge selection, diffusion combiners, and the synchronous
multi-node simulation loop.

The distributed estimator exchanges phase-increment estimates through a
two-stage protocol: designated *bridge* nodes (an independent dominating set)
average the posterior estimates of their closed neighborhood, then every
remaining node averages the results of its neighboring bridges.  The module
also hosts a conventional one-stage variant (every node averages over its own
closed neighborhood) used as the comparison baseline, and a mode that diffuses
full state vectors instead of the shared increment alone.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from .augmented import AugmentedVector, augment
from .estimators import (
    DEFAULT_COND_LIMIT,
    FilterDegenerateError,
    FilterState,
    FreqTrace,
    StateSpaceModel,
    _step,
    nss_model,
    shared_increment_model,
    with_sequence_observation,
)
from .signals import ClarkeSample, Scenario, clarke_arrays, generate_arrays

__all__ = [
    "TopologyError",
    "BridgeAssignmentError",
    "WeightsError",
    "DiffusionError",
    "DistributedConfigError",
    "Topology",
    "BridgeAssignment",
    "DiffusionWeights",
    "NodeRuntime",
    "TickRecord",
    "Message",
    "DistributedRun",
    "DistributedMcRun",
    "select_bridges",
    "uniform_weights",
    "conventional_weights",
    "bridge_diffuse",
    "nonbridge_diffuse",
    "dfe_tick",
    "run_distributed",
    "run_distributed_mc",
    "reference_network",
    "write_messages_csv",
]


class TopologyError(ValueError):
    pass


class BridgeAssignmentError(ValueError):
    pass


class WeightsError(ValueError):
    pass


class DiffusionError(RuntimeError):
    """A combiner was asked to run without the estimates it needs."""


class DistributedConfigError(ValueError):
    """Pre-run validation of a distributed setup failed."""


# ---------------------------------------------------------------------------
# graph model


@dataclass(frozen=True)
class Topology:
    """Undirected communication graph.

    ``node_ids`` fixes the stacking order used everywhere downstream (per-node
    random streams, Monte-Carlo arrays, block matrices in the error analysis).
    """

    node_ids: tuple
    edges: frozenset

    def __init__(self, node_ids: Sequence, edges):
        ids = tuple(node_ids)
        if len(set(ids)) != len(ids):
            raise TopologyError("duplicate node ids")
        known = set(ids)
        normalized = set()
        for e in edges:
            a, b = tuple(e)
            if a == b:
                raise TopologyError(f"self-loop on node {a!r}")
            if a not in known or b not in known:
                raise TopologyError(f"edge ({a!r}, {b!r}) references unknown node")
            normalized.add(frozenset((a, b)))
        object.__setattr__(self, "node_ids", ids)
        object.__setattr__(self, "edges", frozenset(normalized))
        if ids and not self.is_connected:
            warnings.warn("topology is not connected", stacklevel=2)

    def neighbors(self, i) -> tuple:
        return tuple(sorted((set(e) - {i}).pop() for e in self.edges if i in e))

    def closed_neighborhood(self, i) -> tuple:
        return tuple(sorted(self.neighbors(i) + (i,)))

    def degree(self, i) -> int:
        return len(self.neighbors(i))

    @property
    def is_connected(self) -> bool:
        if not self.node_ids:
            return True
        seen = {self.node_ids[0]}
        frontier = [self.node_ids[0]]
        while frontier:
            nxt = frontier.pop()
            for nb in self.neighbors(nxt):
                if nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        return len(seen) == len(self.node_ids)


@dataclass(frozen=True)
class BridgeAssignment:
    """A subset of nodes acting as diffusion aggregators.

    Valid assignments are independent (no two bridges adjacent) and dominating
    (every other node can reach at least one bridge in a single hop).
    """

    topology: Topology
    bridges: frozenset

    def __init__(self, topology: Topology, bridges):
        bset = frozenset(bridges)
        unknown = bset - set(topology.node_ids)
        if unknown:
            raise BridgeAssignmentError(f"unknown bridge nodes {sorted(unknown)!r}")
        for e in topology.edges:
            if e <= bset:
                a, b = sorted(e)
                raise BridgeAssignmentError(
                    f"bridges {a!r} and {b!r} are adjacent (independence violated)"
                )
        for n in topology.node_ids:
            if n not in bset and not bset.intersection(topology.neighbors(n)):
                raise BridgeAssignmentError(f"node {n!r} has no bridge neighbor")
        object.__setattr__(self, "topology", topology)
        object.__setattr__(self, "bridges", bset)

    def bridges_of(self, i) -> tuple:
        """Bridges serving node ``i`` (itself, if ``i`` is a bridge)."""
        if i in self.bridges:
            return (i,)
        return tuple(sorted(self.bridges.intersection(self.topology.neighbors(i))))


def select_bridges(t: Topology, seed: int = 0) -> BridgeAssignment:
    """Pick a bridge set greedily: highest degree first, seeded tie-break.

    A maximal independent set is automatically dominating, so the greedy sweep
    always yields a valid assignment on a well-formed topology; the trailing
    check is defensive and names the uncovered node if it ever trips.
    """
    order = {n: r for n, r in zip(t.node_ids, np.random.default_rng(seed).permutation(len(t.node_ids)))}
    chosen: set = set()
    for n in sorted(t.node_ids, key=lambda n: (-t.degree(n), order[n])):
        if not chosen.intersection(t.neighbors(n)):
            chosen.add(n)
    for n in t.node_ids:
        if n not in chosen and not chosen.intersection(t.neighbors(n)):
            raise BridgeAssignmentError(f"greedy selection left node {n!r} uncovered")
    return BridgeAssignment(t, chosen)


@dataclass(frozen=True)
class DiffusionWeights:
    """Convex combination weights for the two diffusion stages.

    ``beta[i]`` maps each member of node i's closed neighborhood to its weight
    in i's aggregation stage; ``gamma[m]`` maps each bridge serving node m to
    its weight in m's redistribution stage.  Every row must be non-negative
    and sum to one (zeros are allowed so a row can ignore a contributor).
    """

    beta: Mapping
    gamma: Mapping

    def __post_init__(self):
        for label, rows in (("beta", self.beta), ("gamma", self.gamma)):
            for node, row in rows.items():
                if not row:
                    raise WeightsError(f"{label} row for node {node!r} is empty")
                vals = np.array(list(row.values()), dtype=float)
                if np.any(vals < 0):
                    raise WeightsError(f"{label} row for node {node!r} has negative weights")
                if abs(vals.sum() - 1.0) > 1e-9:
                    raise WeightsError(
                        f"{label} row for node {node!r} sums to {vals.sum():.12f}, expected 1"
                    )


def uniform_weights(t: Topology, b: BridgeAssignment) -> DiffusionWeights:
    """Equal weights over each bridge's closed neighborhood and each node's bridges."""
    beta = {}
    for i in sorted(b.bridges, key=str):
        members = t.closed_neighborhood(i)
        beta[i] = {m: 1.0 / len(members) for m in members}
    gamma = {}
    for n in t.node_ids:
        if n in b.bridges:
            continue
        serving = b.bridges_of(n)
        gamma[n] = {l: 1.0 / len(serving) for l in serving}
    return DiffusionWeights(beta=beta, gamma=gamma)


def conventional_weights(t: Topology) -> DiffusionWeights:
    """One-stage baseline: every node averages over its own closed neighborhood."""
    beta = {}
    for n in t.node_ids:
        members = t.closed_neighborhood(n)
        beta[n] = {m: 1.0 / len(members) for m in members}
    return DiffusionWeights(beta=beta, gamma={})


def reference_network() -> tuple[Topology, BridgeAssignment]:
    """The seven-node benchmark graph with bridges at nodes 4 and 6."""
    t = Topology(
        node_ids=(1, 2, 3, 4, 5, 6, 7),
        edges=[(1, 4), (2, 4), (3, 4), (5, 6), (7, 6), (1, 2), (3, 5), (2, 7)],
    )
    return t, BridgeAssignment(t, {4, 6})


# ---------------------------------------------------------------------------
# diffusion combiners


def _combine(row: Mapping, estimates: Mapping, renormalize: bool, who: str) -> AugmentedVector:
    present = {m: w for m, w in row.items() if m in estimates}
    missing = sorted(set(row) - set(present), key=str)
    if missing and not renormalize:
        raise DiffusionError(f"{who}: missing estimates from nodes {missing!r}")
    if not present:
        raise DiffusionError(f"{who}: no estimates available")
    total = sum(present.values())
    if total <= 0.0:
        raise DiffusionError(f"{who}: surviving weights sum to zero")
    out = None
    for m, w in present.items():
        term = (w / total) * estimates[m].top
        out = term if out is None else out + term
    return AugmentedVector(out)


def bridge_diffuse(
    i,
    estimates: Mapping,
    w: DiffusionWeights,
    renormalize: bool = False,
) -> AugmentedVector:
    """Aggregation stage: weighted average of closed-neighborhood posteriors.

    With ``renormalize`` the weights of missing contributors are dropped and
    the rest rescaled for this tick (link-failure behavior); otherwise a
    missing estimate raises.
    """
    if i not in w.beta:
        raise DiffusionError(f"node {i!r} has no aggregation weight row")
    return _combine(w.beta[i], estimates, renormalize, f"aggregation at node {i!r}")


def nonbridge_diffuse(
    m,
    bridge_estimates: Mapping,
    w: DiffusionWeights,
    renormalize: bool = False,
) -> AugmentedVector:
    """Redistribution stage: weighted average of the serving bridges' outputs."""
    if m not in w.gamma:
        raise DiffusionError(f"node {m!r} has no redistribution weight row")
    return _combine(w.gamma[m], bridge_estimates, renormalize, f"redistribution at node {m!r}")


# ---------------------------------------------------------------------------
# per-node runtime and the synchronous tick


@dataclass
class NodeRuntime:
    """Mutable per-node simulation state.

    ``shared`` is the 2-dim phase-increment filter whose estimate the network
    exchanges; ``aux`` is the local sequence-voltage tracker that supplies the
    shared filter's observation matrix.  In full-state mode only ``aux``
    exists and the whole posterior is diffused.
    """

    node_id: Hashable
    aux: FilterState
    aux_model: StateSpaceModel
    shared: FilterState | None = None
    shared_model: StateSpaceModel | None = None
    scenario: Scenario | None = None
    diffused_x: AugmentedVector | None = None
    innovation_power: float | np.ndarray = 0.0


@dataclass(frozen=True)
class TickRecord:
    """Shared-filter internals captured for the error recursions."""

    k: int
    M_prior: np.ndarray
    M_post: np.ndarray
    A: np.ndarray
    gain: np.ndarray
    H: np.ndarray


@dataclass(frozen=True)
class Message:
    k: int
    phase: str  # "to_bridge" | "from_bridge" | "to_neighbor"
    src: Hashable
    dst: Hashable
    payload: complex


def _as_observation(obs) -> np.ndarray:
    v = obs.v if isinstance(obs, ClarkeSample) else obs
    arr = np.asarray(v, dtype=complex)
    return arr.reshape(arr.shape + (1,))  # one observed voltage per node


def _log_share(messages, k, phase, src, dst, vec: AugmentedVector):
    if messages is None:
        return
    top = np.asarray(vec.top)
    if top.ndim != 1:
        raise ValueError("message logging requires an unbatched run")
    for entry in top:
        messages.append(Message(k=k, phase=phase, src=src, dst=dst, payload=complex(entry)))


def _diffuse_all(
    estimates: Mapping,
    k: int,
    topology: Topology,
    assignment: BridgeAssignment | None,
    weights: DiffusionWeights,
    diffusion: str,
    messages,
) -> Mapping:
    """Run one diffusion round and return the node→combined-estimate map."""
    if diffusion == "none":
        return estimates
    if diffusion == "conventional":
        out = {}
        for i in topology.node_ids:
            for nb in topology.neighbors(i):
                _log_share(messages, k, "to_neighbor", nb, i, estimates[nb])
            out[i] = bridge_diffuse(i, estimates, weights)
        return out
    if diffusion != "bridge":
        raise DistributedConfigError(f"unknown diffusion mode {diffusion!r}")

    psi = {}
    for l in sorted(assignment.bridges, key=str):
        for nb in topology.neighbors(l):
            _log_share(messages, k, "to_bridge", nb, l, estimates[nb])
        psi[l] = bridge_diffuse(l, estimates, weights)
        for nb in topology.neighbors(l):
            _log_share(messages, k, "from_bridge", l, nb, psi[l])
    out = {}
    for i in topology.node_ids:
        out[i] = psi[i] if i in assignment.bridges else nonbridge_diffuse(i, psi, weights)
    return out


def dfe_tick(
    nodes: Sequence[NodeRuntime],
    topology: Topology,
    assignment: BridgeAssignment | None,
    weights: DiffusionWeights,
    observations: Mapping,
    diffusion: str = "bridge",
    messages: list | None = None,
    records: Mapping | None = None,
    cond_limit: float = DEFAULT_COND_LIMIT,
    reseed_aux: bool = False,
) -> Sequence[NodeRuntime]:
    """One synchronous round of the distributed frequency estimator.

    Per node: the sequence-voltage estimates standing *before* this tick are
    captured, the auxiliary tracker advances on the new observation, and the
    2-dim shared filter is corrected using an observation matrix built from
    the captured values.  The captured (previous-tick) values are the ones
    consistent with the observation pairing v_k = v+_{k-1} x + v-_{k-1}
    conj(x); using the refreshed posteriors instead would make the observation
    explain itself and collapse the increment estimate toward 1.  Afterwards
    the posteriors run through the two-stage diffusion and every node restarts
    its shared filter from the combined value.  Nodes are mutated in place and
    returned.

    The auxiliary tracker stays fully local by default: its own increment
    estimate evolves only through its own corrections.  ``reseed_aux``
    additionally overwrites the tracker's increment entry with the diffused
    value; that couples the two filters into a feedback loop which is unstable
    at noiseless gain levels (a slowly growing oscillation near 75 Hz), so it
    is off unless explicitly requested.
    """
    estimates = {}
    k_now = None
    for node in nodes:
        y = _as_observation(observations[node.node_id])
        top = node.aux.x_hat.top
        v_plus, v_minus = top[..., 1], top[..., 2]
        try:
            node.aux, _ = _step(node.aux_model, node.aux, augment(y), cond_limit)
            model_k = with_sequence_observation(node.shared_model, v_plus, v_minus)
            node.shared, diag = _step(model_k, node.shared, augment(y), cond_limit)
        except FilterDegenerateError as exc:
            raise FilterDegenerateError(f"node {node.node_id!r}: {exc}") from exc
        node.innovation_power = np.abs(diag.innovation[..., 0]) ** 2
        estimates[node.node_id] = node.shared.x_hat
        k_now = node.shared.k
        if records is not None:
            records[node.node_id].append(
                TickRecord(
                    k=k_now, M_prior=diag.M_prior, M_post=diag.M_post,
                    A=diag.A, gain=diag.gain, H=diag.H,
                )
            )

    combined = _diffuse_all(estimates, k_now, topology, assignment, weights, diffusion, messages)

    for node in nodes:
        d = combined[node.node_id]
        node.diffused_x = d
        node.shared = FilterState(AugmentedVector(d.top.copy()), node.shared.M, node.shared.k)
        if reseed_aux:
            aux_top = node.aux.x_hat.top.copy()
            aux_top[..., 0] = d.top[..., 0]
            node.aux = FilterState(AugmentedVector(aux_top), node.aux.M, node.aux.k)
    return nodes


def _full_state_tick(
    nodes: Sequence[NodeRuntime],
    topology: Topology,
    assignment: BridgeAssignment | None,
    weights: DiffusionWeights,
    observations: Mapping,
    diffusion: str,
    messages: list | None,
    records: Mapping | None,
    cond_limit: float,
) -> Sequence[NodeRuntime]:
    """One round of the full-state variant: local filters, then whole-vector diffusion."""
    estimates = {}
    k_now = None
    for node in nodes:
        y = _as_observation(observations[node.node_id])
        try:
            node.aux, diag = _step(node.aux_model, node.aux, augment(y), cond_limit)
        except FilterDegenerateError as exc:
            raise FilterDegenerateError(f"node {node.node_id!r}: {exc}") from exc
        node.innovation_power = np.abs(diag.innovation[..., 0]) ** 2
        estimates[node.node_id] = node.aux.x_hat
        k_now = node.aux.k
        if records is not None:
            records[node.node_id].append(
                TickRecord(
                    k=k_now, M_prior=diag.M_prior, M_post=diag.M_post,
                    A=diag.A, gain=diag.gain, H=diag.H,
                )
            )

    combined = _diffuse_all(estimates, k_now, topology, assignment, weights, diffusion, messages)

    for node in nodes:
        d = combined[node.node_id]
        node.diffused_x = d
        node.aux = FilterState(AugmentedVector(d.top.copy()), node.aux.M, node.aux.k)
    return nodes


# ---------------------------------------------------------------------------
# simulation drivers


@dataclass
class DistributedRun:
    """Everything a single seeded multi-node run produced."""

    topology: Topology
    assignment: BridgeAssignment | None
    weights: DiffusionWeights
    mode: str
    diffusion: str
    seed: int
    traces: Mapping  # node -> FreqTrace of the diffused estimate
    records: Mapping | None = None  # node -> list[TickRecord]
    messages: list | None = None


@dataclass
class DistributedMcRun:
    """Batched Monte-Carlo outputs, first axis = seed."""

    node_ids: tuple
    seeds: np.ndarray
    f_hat_hz: np.ndarray  # (n_seeds, n_nodes, n_ticks)
    flags: np.ndarray
    x_hat: np.ndarray | None = None  # diffused increments, same shape, complex


def _resolve_scenarios(topology: Topology, scenarios) -> dict:
    if isinstance(scenarios, Scenario):
        per_node = {n: scenarios for n in topology.node_ids}
    else:
        per_node = dict(scenarios)
        missing = [n for n in topology.node_ids if n not in per_node]
        if missing:
            raise DistributedConfigError(f"no scenario for nodes {missing!r}")
    ref = per_node[topology.node_ids[0]]
    for n, scn in per_node.items():
        if scn.sample_rate_hz != ref.sample_rate_hz or scn.n_samples != ref.n_samples:
            raise DistributedConfigError(
                f"scenario for node {n!r} disagrees on sample rate or duration"
            )
    return per_node


def _resolve_weights(
    topology: Topology,
    assignment: BridgeAssignment | None,
    weights: DiffusionWeights | None,
    diffusion: str,
):
    if diffusion == "none":
        return assignment, weights
    if diffusion == "conventional":
        if weights is None:
            weights = conventional_weights(topology)
        missing = [n for n in topology.node_ids if n not in weights.beta]
        if missing:
            raise DistributedConfigError(
                f"conventional diffusion needs an aggregation row per node; missing {missing!r}"
            )
        return assignment, weights
    if diffusion != "bridge":
        raise DistributedConfigError(f"unknown diffusion mode {diffusion!r}")
    if assignment is None:
        assignment = select_bridges(topology)
    if weights is None:
        weights = uniform_weights(topology, assignment)
    missing_b = [b for b in assignment.bridges if b not in weights.beta]
    missing_g = [
        n for n in topology.node_ids if n not in assignment.bridges and n not in weights.gamma
    ]
    if missing_b or missing_g:
        raise DistributedConfigError(
            f"weights incomplete: aggregation rows missing {missing_b!r},"
            f" redistribution rows missing {missing_g!r}"
        )
    return assignment, weights


def _node_voltage(scenario: Scenario, seed, node_index: int, snr_db) -> np.ndarray:
    rng_seed = None if snr_db is None else [int(seed), int(node_index)]
    vabc = generate_arrays(scenario, seed=rng_seed, snr_db=snr_db)
    _, v = clarke_arrays(vabc)
    return v


def _make_nodes(
    topology: Topology,
    per_node: Mapping,
    first_obs: Mapping,
    mode: str,
    sample_rate_hz: float,
    snr_db,
    f_init_hz: float,
) -> list[NodeRuntime]:
    nodes = []
    for n in topology.node_ids:
        aux_model = nss_model(sample_rate_hz, snr_db=snr_db)
        aux = aux_model.initial_state(first_obs[n], f_init_hz=f_init_hz)
        if mode == "dfe":
            shared_model = shared_increment_model(sample_rate_hz, snr_db=snr_db)
            shared = shared_model.initial_state(first_obs[n], f_init_hz=f_init_hz)
        elif mode == "distributed-acekf":
            shared_model = None
            shared = None
        else:
            raise DistributedConfigError(f"unknown estimator mode {mode!r}")
        nodes.append(
            NodeRuntime(
                node_id=n, aux=aux, aux_model=aux_model,
                shared=shared, shared_model=shared_model, scenario=per_node[n],
            )
        )
    return nodes


def _output_state(node: NodeRuntime, mode: str) -> tuple[FilterState, StateSpaceModel]:
    if mode == "dfe":
        return node.shared, node.shared_model
    return node.aux, node.aux_model


def run_distributed(
    topology: Topology,
    scenarios,
    seed: int = 0,
    snr_db: float | None = None,
    mode: str = "dfe",
    diffusion: str = "bridge",
    assignment: BridgeAssignment | None = None,
    weights: DiffusionWeights | None = None,
    f_init_hz: float = 50.0,
    reseed_aux: bool = False,
    collect_messages: bool = False,
    record_matrices: bool = False,
    cond_limit: float = DEFAULT_COND_LIMIT,
) -> DistributedRun:
    """Simulate the network once and collect per-node traces.

    ``scenarios`` is either a single Scenario shared by every node or a map
    node→Scenario (same sampling grid everywhere).  Per-node observation noise
    comes from independent streams derived from (seed, node position), so a
    node's stream does not depend on which other nodes exist.
    """
    per_node = _resolve_scenarios(topology, scenarios)
    assignment, weights = _resolve_weights(topology, assignment, weights, diffusion)

    fs = per_node[topology.node_ids[0]].sample_rate_hz
    n_ticks = per_node[topology.node_ids[0]].n_samples
    volts = {
        n: _node_voltage(per_node[n], seed, idx, snr_db)
        for idx, n in enumerate(topology.node_ids)
    }

    nodes = _make_nodes(
        topology, per_node, {n: volts[n][0] for n in volts}, mode, fs, snr_db, f_init_hz
    )
    messages: list | None = [] if collect_messages else None
    records = {n: [] for n in topology.node_ids} if record_matrices else None

    f_hat = {n: np.empty(n_ticks) for n in topology.node_ids}
    innov = {n: np.zeros(n_ticks) for n in topology.node_ids}
    flags = {n: np.zeros(n_ticks, dtype=int) for n in topology.node_ids}
    n_top = 1 if mode == "dfe" else 3
    states = {n: np.empty((n_ticks, n_top), dtype=complex) for n in topology.node_ids}

    for node in nodes:
        state, model = _output_state(node, mode)
        f0, fl0 = model.extract_freq(state.x_hat.materialize())
        f_hat[node.node_id][0] = float(f0)
        flags[node.node_id][0] = int(fl0)
        states[node.node_id][0] = state.x_hat.top

    for k in range(1, n_ticks):
        obs = {n: volts[n][k] for n in topology.node_ids}
        try:
            if mode == "dfe":
                dfe_tick(
                    nodes, topology, assignment, weights, obs,
                    diffusion=diffusion, messages=messages, records=records,
                    cond_limit=cond_limit, reseed_aux=reseed_aux,
                )
            else:
                _full_state_tick(
                    nodes, topology, assignment, weights, obs,
                    diffusion, messages, records, cond_limit,
                )
        except FilterDegenerateError as exc:
            raise FilterDegenerateError(f"tick {k}: {exc}") from exc
        for node in nodes:
            state, model = _output_state(node, mode)
            fk, flk = model.extract_freq(state.x_hat.materialize())
            f_hat[node.node_id][k] = float(fk)
            flags[node.node_id][k] = int(flk)
            states[node.node_id][k] = state.x_hat.top
            innov[node.node_id][k] = float(node.innovation_power)

    k_idx = np.arange(n_ticks)
    traces = {
        n: FreqTrace(
            k=k_idx,
            t_s=k_idx / fs,
            f_hat_hz=f_hat[n],
            innovation_power=innov[n],
            states=states[n],
            flags=flags[n],
            f_true_hz=per_node[n].true_freq(),
        )
        for n in topology.node_ids
    }
    return DistributedRun(
        topology=topology, assignment=assignment, weights=weights, mode=mode,
        diffusion=diffusion, seed=seed, traces=traces, records=records, messages=messages,
    )


def run_distributed_mc(
    topology: Topology,
    scenarios,
    seeds: Sequence[int],
    snr_db: float | None = None,
    mode: str = "dfe",
    diffusion: str = "bridge",
    assignment: BridgeAssignment | None = None,
    weights: DiffusionWeights | None = None,
    f_init_hz: float = 50.0,
    reseed_aux: bool = False,
    record_x: bool = False,
    cond_limit: float = DEFAULT_COND_LIMIT,
) -> DistributedMcRun:
    """Monte-Carlo sweep over seeds, vectorized across the seed axis.

    Each seed reproduces exactly what :func:`run_distributed` would produce
    for it (same per-node noise streams), so paired comparisons across modes
    can rely on common random numbers.
    """
    per_node = _resolve_scenarios(topology, scenarios)
    assignment, weights = _resolve_weights(topology, assignment, weights, diffusion)
    seeds = np.asarray(list(seeds), dtype=int)
    if seeds.size == 0:
        raise DistributedConfigError("empty seed list")

    fs = per_node[topology.node_ids[0]].sample_rate_hz
    n_ticks = per_node[topology.node_ids[0]].n_samples
    n_nodes = len(topology.node_ids)

    volts = {}
    for idx, n in enumerate(topology.node_ids):
        rows = [_node_voltage(per_node[n], s, idx, snr_db) for s in seeds]
        volts[n] = np.stack(rows, axis=0)  # (n_seeds, n_ticks)

    nodes = _make_nodes(
        topology, per_node, {n: volts[n][:, 0] for n in volts}, mode, fs, snr_db, f_init_hz
    )

    f_hat = np.empty((seeds.size, n_nodes, n_ticks))
    flags = np.zeros((seeds.size, n_nodes, n_ticks), dtype=int)
    x_hat = np.empty((seeds.size, n_nodes, n_ticks), dtype=complex) if record_x else None

    for j, node in enumerate(nodes):
        state, model = _output_state(node, mode)
        f0, fl0 = model.extract_freq(state.x_hat.materialize())
        f_hat[:, j, 0], flags[:, j, 0] = f0, fl0
        if x_hat is not None:
            x_hat[:, j, 0] = state.x_hat.top[..., 0]

    for k in range(1, n_ticks):
        obs = {n: volts[n][:, k] for n in topology.node_ids}
        try:
            if mode == "dfe":
                dfe_tick(
                    nodes, topology, assignment, weights, obs,
                    diffusion=diffusion, cond_limit=cond_limit, reseed_aux=reseed_aux,
                )
            else:
                _full_state_tick(
                    nodes, topology, assignment, weights, obs,
                    diffusion, None, None, cond_limit,
                )
        except FilterDegenerateError as exc:
            raise FilterDegenerateError(f"tick {k}: {exc}") from exc
        for j, node in enumerate(nodes):
            state, model = _output_state(node, mode)
            fk, flk = model.extract_freq(state.x_hat.materialize())
            f_hat[:, j, k], flags[:, j, k] = fk, flk
            if x_hat is not None:
                x_hat[:, j, k] = state.x_hat.top[..., 0]

    return DistributedMcRun(
        node_ids=topology.node_ids, seeds=seeds, f_hat_hz=f_hat, flags=flags, x_hat=x_hat
    )


def write_messages_csv(path, messages: Sequence[Message]) -> None:
    """Dump a message log; one row per shared complex entry."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "phase", "src", "dst", "payload_re", "payload_im"])
        for m in messages:
            w.writerow(
                [m.k, m.phase, m.src, m.dst, _fmt(m.payload.real), _fmt(m.payload.imag)]
            )


def _fmt(x: float) -> str:
    return format(float(x), ".15g")
