"""Pareto dominance, front maintenance, and the discretized strategy search.

The search space is the grid of relay rate matrices (at most ``n_max``
relays active) crossed with forwarding matrices sampled from each rate
matrix's feasible family. Candidates stream through feasibility gates,
an exact prune, and the steady-state evaluation; survivors enter a
non-dominated archive.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import islice

import numpy as np

from .channel import ChannelConfig, ChannelMatrix, channel_matrix
from .errors import ClosedFormNotApplicableError, InfeasibleError, SchemaError
from .forwarding import (
    ForwardingMatrix,
    sample_feasible_forwarding,
    solve_chain_closed_form,
)
from .rates import (
    DEFAULT_TOLERANCE,
    RateGrid,
    RateMatrix,
    check_flow_conservation,
    check_half_duplex,
    enumerate_rate_matrices,
)
from .steady_state import CriteriaVector, evaluate, relay_transmission_index
from .topology import NetworkSpec


class Sense(enum.Enum):
    MAXIMIZE = "max"
    MINIMIZE = "min"


_OBJECTIVE_TOKENS = {
    "f": ("f", Sense.MAXIMIZE),
    "fc": ("f_c", Sense.MAXIMIZE),
    "fd": ("f_d", Sense.MINIMIZE),
    "fe": ("f_e", Sense.MINIMIZE),
}


@dataclass(frozen=True)
class ObjectiveSense:
    """Which criteria the search optimizes, and in which direction.

    The default compares the capped capacity reading f_C (maximized)
    against delay and energy (minimized). Substituting raw f switches to
    the robustness reading; both appear in the criteria vector either way.
    """

    names: tuple[str, ...]
    senses: tuple[Sense, ...]

    def __post_init__(self):
        if len(self.names) != len(self.senses) or not self.names:
            raise SchemaError("objective names and senses must align")
        if len(set(self.names)) != len(self.names):
            raise SchemaError("duplicate objective")

    @classmethod
    def default(cls) -> "ObjectiveSense":
        return cls(
            names=("f_c", "f_d", "f_e"),
            senses=(Sense.MAXIMIZE, Sense.MINIMIZE, Sense.MINIMIZE),
        )

    @classmethod
    def parse(cls, text: str) -> "ObjectiveSense":
        names, senses = [], []
        for token in text.split(","):
            token = token.strip().lower().replace("_", "")
            if token not in _OBJECTIVE_TOKENS:
                raise SchemaError(
                    f"unknown objective {token!r}; choose from f, fc, fd, fe"
                )
            name, sense = _OBJECTIVE_TOKENS[token]
            names.append(name)
            senses.append(sense)
        return cls(names=tuple(names), senses=tuple(senses))

    def values(self, criteria: CriteriaVector) -> tuple[float, ...]:
        return tuple(getattr(criteria, name) for name in self.names)


def dominates(a: CriteriaVector, b: CriteriaVector, senses: ObjectiveSense) -> bool:
    """True iff ``a`` is at least as good as ``b`` on every objective and
    strictly better on at least one. Equal vectors dominate neither way."""
    strict = False
    for va, vb, sense in zip(senses.values(a), senses.values(b), senses.senses):
        if sense is Sense.MAXIMIZE:
            if va < vb:
                return False
            strict = strict or va > vb
        else:
            if va > vb:
                return False
            strict = strict or va < vb
    return strict


@dataclass(frozen=True)
class ParetoSolution:
    """One evaluated strategy: identifier, criteria, and the strategy itself."""

    solution_id: str
    criteria: CriteriaVector
    tau: RateMatrix
    forwarding: ForwardingMatrix


class ParetoArchive:
    """Set of mutually non-dominated solutions."""

    def __init__(self, senses: ObjectiveSense | None = None):
        self.senses = senses or ObjectiveSense.default()
        self._members: list[ParetoSolution] = []

    def insert(self, solution: ParetoSolution) -> bool:
        """Insert unless dominated; evict members the newcomer dominates.
        Returns whether the solution was accepted."""
        for member in self._members:
            if dominates(member.criteria, solution.criteria, self.senses):
                return False
        self._members = [
            m
            for m in self._members
            if not dominates(solution.criteria, m.criteria, self.senses)
        ]
        self._members.append(solution)
        assert self._pairwise_non_dominated()
        return True

    def _pairwise_non_dominated(self) -> bool:
        return not any(
            dominates(a.criteria, b.criteria, self.senses)
            for a in self._members
            for b in self._members
            if a is not b
        )

    @property
    def members(self) -> tuple[ParetoSolution, ...]:
        return tuple(sorted(self._members, key=lambda s: s.solution_id))

    def criteria_values(self) -> set[tuple[float, ...]]:
        return {self.senses.values(m.criteria) for m in self._members}

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self):
        return iter(self.members)


@dataclass(frozen=True)
class PruneThresholds:
    """Optional performance floors applied before evaluating any forwarding
    matrix. Unset fields never prune."""

    min_robustness: float | None = None
    max_energy: float | None = None


@dataclass(frozen=True)
class PruneDecision:
    keep: bool
    reason: str | None
    flow: float
    energy: float


def tau_flow_rate(tau: RateMatrix, P: ChannelMatrix) -> float:
    """Delivered flow shared by every forwarding matrix feasible for tau.

    The coupling constraints make each active relay transmission carry flow
    exactly tau_j^v, so deliveries reduce to direct source arrivals plus
    tau-weighted relay arrivals regardless of how X splits the feeders.
    """
    n = P.n_nodes
    transmitters = set(tau.transmitter_ids)
    destinations = [d for d in range(1, n + 1) if d not in transmitters]
    total = 0.0
    for s in tau.source_ids:
        row = tau.row(s)
        for u in range(1, tau.slot_count + 1):
            if row[u - 1] > 0.0:
                total += row[u - 1] * sum(P.p(s, d, u) for d in destinations)
    for j in tau.relay_ids:
        row = tau.row(j)
        for v in range(1, tau.slot_count + 1):
            if row[v - 1] > 0.0:
                total += row[v - 1] * sum(P.p(j, d, v) for d in destinations)
    return total


def tau_energy_rate(tau: RateMatrix) -> float:
    """Relay transmissions per epoch: the sum of active relay rates. Like
    the flow rate, identical across the whole feasible forwarding family."""
    return float(np.sum(tau.relay_rates))


def prune_tau(
    tau: RateMatrix, P: ChannelMatrix, thresholds: PruneThresholds | None
) -> PruneDecision:
    """Decide whether any forwarding matrix for ``tau`` can meet the
    thresholds. Exact, not heuristic: flow and energy are tau-determined,
    so a dropped tau has no qualifying solution at all."""
    flow = tau_flow_rate(tau, P)
    energy = tau_energy_rate(tau)
    if thresholds is not None:
        if (
            thresholds.min_robustness is not None
            and flow < thresholds.min_robustness - 1e-12
        ):
            return PruneDecision(
                False,
                f"delivered flow {flow:.6g} below minimum "
                f"{thresholds.min_robustness:.6g}",
                flow,
                energy,
            )
        if (
            thresholds.max_energy is not None
            and energy > thresholds.max_energy + 1e-12
        ):
            return PruneDecision(
                False,
                f"energy rate {energy:.6g} above maximum "
                f"{thresholds.max_energy:.6g}",
                flow,
                energy,
            )
    return PruneDecision(True, None, flow, energy)


@dataclass
class SearchResult:
    archive: ParetoArchive
    n_tau: int = 0
    n_infeasible: int = 0
    n_pruned: int = 0
    n_evaluated: int = 0
    evaluated: list[ParetoSolution] = field(default_factory=list)


def _tau_seed(seed: int, tau_idx: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(tau_idx,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _candidates_for_tau(
    tau_idx: int,
    tau: RateMatrix,
    spec: NetworkSpec,
    x_samples: int,
    seed: int,
    thresholds: PruneThresholds | None,
    channel_config: ChannelConfig | None,
    tolerance: float,
) -> tuple[str, list[ParetoSolution]]:
    """Evaluate one rate matrix: returns a status tag and its solutions."""
    P = channel_matrix(tau, spec, channel_config)
    if not check_flow_conservation(tau, P, tolerance).all_ok:
        return "infeasible", []
    if not check_half_duplex(tau, P, tolerance).all_ok:
        return "infeasible", []
    if not prune_tau(tau, P, thresholds).keep:
        return "pruned", []

    if not relay_transmission_index(tau):
        forwardings = [ForwardingMatrix.zeros(spec.n_nodes, spec.slot_count)]
    else:
        try:
            forwardings = [solve_chain_closed_form(tau, P, spec, tolerance)]
        except ClosedFormNotApplicableError:
            try:
                forwardings = sample_feasible_forwarding(
                    tau, P, spec, x_samples, _tau_seed(seed, tau_idx), tolerance
                )
            except InfeasibleError:
                return "infeasible", []
        except InfeasibleError:
            return "infeasible", []

    solutions = []
    for x_idx, X in enumerate(forwardings):
        try:
            criteria = evaluate(
                tau, X, spec, channel=P, tolerance=tolerance, check_feasibility=True
            )
        except InfeasibleError:
            continue
        solutions.append(
            ParetoSolution(
                solution_id=f"{tau_idx:06d}-{x_idx:04d}",
                criteria=criteria,
                tau=tau,
                forwarding=X,
            )
        )
    if not solutions:
        return "infeasible", []
    return "ok", solutions


def exhaustive_search(
    spec: NetworkSpec,
    grid: RateGrid,
    n_max: int,
    x_samples_per_tau: int,
    seed: int,
    senses: ObjectiveSense | None = None,
    thresholds: PruneThresholds | None = None,
    source_rates: np.ndarray | None = None,
    channel_config: ChannelConfig | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    threads: int = 1,
    collect_evaluated: bool = False,
) -> SearchResult:
    """Stream every rate matrix on the grid through feasibility, pruning,
    forwarding generation, and evaluation; maintain the Pareto archive.

    Deterministic for a fixed seed: candidate tau_idx fixes the forwarding
    sampler's seed, evaluation is pure, and archive insertion happens in
    enumeration order, so the result does not depend on ``threads``.
    """
    result = SearchResult(archive=ParetoArchive(senses))
    stream = enumerate(
        enumerate_rate_matrices(grid, spec, n_max, source_rates=source_rates)
    )

    def work(item):
        tau_idx, tau = item
        return tau_idx, _candidates_for_tau(
            tau_idx, tau, spec, x_samples_per_tau, seed,
            thresholds, channel_config, tolerance,
        )

    chunk_size = max(32, threads * 8)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while True:
            chunk = list(islice(stream, chunk_size))
            if not chunk:
                break
            if pool is not None:
                outputs = list(pool.map(work, chunk))
            else:
                outputs = [work(item) for item in chunk]
            outputs.sort(key=lambda pair: pair[0])
            for _, (status, solutions) in outputs:
                result.n_tau += 1
                if status == "infeasible":
                    result.n_infeasible += 1
                    continue
                if status == "pruned":
                    result.n_pruned += 1
                    continue
                for sol in solutions:
                    result.n_evaluated += 1
                    result.archive.insert(sol)
                    if collect_evaluated:
                        result.evaluated.append(sol)
    finally:
        if pool is not None:
            pool.shutdown()
    return result
