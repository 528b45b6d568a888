"""Steady-state packet-flow analysis and the four performance criteria.

Active relay transmissions form the transient states of a linear flow
recursion: Q moves expected flow between relay transmissions epoch by
epoch, D absorbs it at the destinations, and the sources induce the
initial flow F(1). The fundamental matrix M_F = (I - Q)^{-1} sums the
whole cascade, giving

    f   = F1_relay . M_F . D . 1  +  F1_direct . 1   (delivered flow)
    f_C = min(1, f)                                   (capacity reading)
    f_D = F1_relay . M_F^2 . D . 1                    (relay-hop delay mass)
    f_E = F1_relay . M_F . 1                          (relay transmissions)

Multiple sources superpose: each contributes its own F(1) row against the
same Q and D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .channel import ChannelConfig, ChannelMatrix, channel_matrix
from .errors import (
    DivergentSystemError,
    FlowConservationError,
    HalfDuplexError,
    ModelViolationError,
    NumericalError,
    SchemaError,
)
from .forwarding import ForwardingMatrix, check_forwarder_roles, consistency_residuals
from .rates import (
    DEFAULT_TOLERANCE,
    ActiveSet,
    RateMatrix,
    active_set,
    check_flow_conservation,
    check_half_duplex,
)
from .topology import NetworkSpec

SPECTRAL_MARGIN = 1e-6


@dataclass(frozen=True)
class CriteriaVector:
    """The four steady-state criteria for one (tau, X) strategy."""

    f: float
    f_c: float
    f_d: float
    f_e: float

    @property
    def delay_per_delivery(self) -> float:
        """Mean relay hops per delivered packet, f_D / f (0 when f = 0)."""
        return self.f_d / self.f if self.f > 0.0 else 0.0

    def to_json_dict(self) -> dict:
        return {"f": self.f, "f_c": self.f_c, "f_d": self.f_d, "f_e": self.f_e}

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.f, self.f_c, self.f_d, self.f_e)


def relay_transmission_index(tau: RateMatrix) -> tuple[tuple[int, int], ...]:
    """Active relay transmissions (node, slot), sorted; rows/columns of Q."""
    relays = set(tau.relay_ids)
    return tuple(
        (j, v) for j, v in sorted(active_set(tau).transmissions) if j in relays
    )


def destination_slot_index(spec: NetworkSpec) -> tuple[tuple[int, int], ...]:
    """Absorbing coordinates (destination, slot); columns of D."""
    return tuple(
        (d, u) for d in spec.destination_ids for u in range(1, spec.slot_count + 1)
    )


@dataclass(frozen=True)
class TransitionSystem:
    """Q, D and per-source initial flows over a fixed transmission index.

    ``relay_index`` lists the active relay transmissions backing the l rows
    and columns of Q (sources inject through F1, so they carry no row);
    ``arrival_index`` lists the m destination-slot columns of D. Each F1 row
    is the concatenation (l relay components, m direct-arrival components)
    for one source.
    """

    relay_index: tuple[tuple[int, int], ...]
    arrival_index: tuple[tuple[int, int], ...]
    Q: np.ndarray
    D: np.ndarray
    F1: np.ndarray

    @property
    def n_transient(self) -> int:
        return len(self.relay_index)


def build_relaying_matrix(
    X: ForwardingMatrix,
    tau: RateMatrix,
    P: ChannelMatrix,
    active: ActiveSet | None = None,
) -> np.ndarray:
    """Q[(i,u),(j,v)] = p_ij^u * (1 - tau_j^v) * x_ij^{uv} over the active
    relay transmissions; zero on same-node pairs. Entries must stay < 1."""
    if active is None:
        active = active_set(tau)
    index = relay_transmission_index(tau)
    l = len(index)
    Q = np.zeros((l, l))
    for a, (i, u) in enumerate(index):
        for b, (j, v) in enumerate(index):
            if i == j:
                continue
            Q[a, b] = P.p(i, j, u) * (1.0 - tau.rate(j, v)) * X.x(i, j, u, v)
    if l and np.max(Q) >= 1.0:
        a, b = np.unravel_index(int(np.argmax(Q)), Q.shape)
        raise ModelViolationError(
            f"relaying probability from {index[a]} to {index[b]} reaches "
            f"{Q[a, b]:.6g}; the flow recursion needs every entry < 1"
        )
    return Q


def build_arrival_matrix(
    tau: RateMatrix,
    P: ChannelMatrix,
    active: ActiveSet | None,
    spec: NetworkSpec,
) -> np.ndarray:
    """D[(i,u),(d,w)] = p_id^u when w = u, else 0: a transmission reaches a
    destination only in its own slot."""
    index = relay_transmission_index(tau)
    arrivals = destination_slot_index(spec)
    D = np.zeros((len(index), len(arrivals)))
    for a, (i, u) in enumerate(index):
        for b, (d, w) in enumerate(arrivals):
            if w == u:
                D[a, b] = P.p(i, d, u)
    return D


def build_initial_flow(
    source_rates: np.ndarray,
    X: ForwardingMatrix,
    tau: RateMatrix,
    P: ChannelMatrix,
    spec: NetworkSpec,
) -> np.ndarray:
    """Per-source initial flow rows (one per source, length l + m).

    Relay component (j,v): sum_u tau_S^u * p_Sj^u * (1 - tau_j^v) * x_Sj^{uv};
    direct component (d,u): tau_S^u * p_Sd^u.
    """
    source_rates = np.asarray(source_rates, dtype=float)
    index = relay_transmission_index(tau)
    arrivals = destination_slot_index(spec)
    sources = spec.source_ids
    if source_rates.shape != (len(sources), spec.slot_count):
        raise SchemaError(
            f"source rates must have shape ({len(sources)}, {spec.slot_count})"
        )
    F1 = np.zeros((len(sources), len(index) + len(arrivals)))
    for s_row, S in enumerate(sources):
        for u in range(1, spec.slot_count + 1):
            t_src = source_rates[s_row, u - 1]
            if t_src == 0.0:
                continue
            for b, (j, v) in enumerate(index):
                F1[s_row, b] += (
                    t_src * P.p(S, j, u) * (1.0 - tau.rate(j, v)) * X.x(S, j, u, v)
                )
            for b, (d, w) in enumerate(arrivals):
                if w == u:
                    F1[s_row, len(index) + b] = t_src * P.p(S, d, u)
    return F1


def spectral_radius(Q: np.ndarray, tol: float = 1e-12, max_iter: int = 5000) -> float:
    """Largest eigenvalue magnitude of a non-negative matrix, by power
    iteration on the shifted matrix (Q + I)/2 so alternating structures
    still converge (the shift maps the leading eigenvalue monotonically)."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if n == 0:
        return 0.0
    if np.min(Q) < 0.0:
        raise ValueError("spectral_radius expects a non-negative matrix")
    x = np.full(n, 1.0 / n)
    est = 0.0
    for _ in range(max_iter):
        y = 0.5 * (Q @ x + x)
        norm = float(np.linalg.norm(y, 1))
        if norm == 0.0:
            return 0.0
        new_est = norm / float(np.linalg.norm(x, 1))
        x = y / norm
        if abs(new_est - est) <= tol * max(1.0, new_est):
            est = new_est
            break
        est = new_est
    return max(0.0, 2.0 * est - 1.0)


def fundamental_matrix(Q: np.ndarray, margin: float = SPECTRAL_MARGIN) -> np.ndarray:
    """M_F = (I - Q)^{-1} via LU factorization with an explicit convergence
    guard: the series behind M_F only makes sense when rho(Q) < 1.

    Entries < 1 alone do not guarantee convergence (row sums may exceed 1),
    so the spectral radius is always checked.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    rho_bound = float(np.max(np.abs(Q).sum(axis=1))) if n else 0.0
    if rho_bound >= 1.0 - margin:
        rho = spectral_radius(Q)
        if rho >= 1.0 - margin:
            raise DivergentSystemError(
                f"spectral radius {rho:.6g} of the relaying matrix is not "
                f"safely below 1; the flow cascade does not die out"
            )
    try:
        lu, piv = lu_factor(np.eye(n) - Q)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"I - Q could not be factorized: {exc}") from exc
    if np.min(np.abs(np.diag(lu))) < 1e-14:
        raise NumericalError("I - Q is numerically singular")
    return lu_solve((lu, piv), np.eye(n))


def delay_identity_gap(Q: np.ndarray, M_F: np.ndarray) -> float:
    """Max-norm gap of M_F^2 = M_F + Q @ M_F^2, the identity behind using
    M_F^2 as the expected-visits-weighted accumulator."""
    if Q.shape[0] == 0:
        return 0.0
    M2 = M_F @ M_F
    return float(np.max(np.abs(M2 - (M_F + Q @ M2))))


def _split_rows(F1: np.ndarray, l: int) -> tuple[np.ndarray, np.ndarray]:
    F1 = np.atleast_2d(np.asarray(F1, dtype=float))
    return F1[:, :l], F1[:, l:]


def criterion_flow(
    F1: np.ndarray, M_F: np.ndarray, D: np.ndarray
) -> tuple[float, float]:
    """Expected deliveries per injected packet (copies counted) and its
    capped capacity reading. Rows of F1 (one per source) superpose."""
    relay, direct = _split_rows(F1, M_F.shape[0])
    f = float(np.sum(relay @ M_F @ D) + np.sum(direct))
    return f, min(1.0, f)


def criterion_delay(F1: np.ndarray, M_F: np.ndarray, D: np.ndarray) -> float:
    """Delay mass: each delivery weighted by the relay transmissions on its
    path. Direct source-to-destination deliveries contribute zero."""
    relay, _ = _split_rows(F1, M_F.shape[0])
    return float(np.sum(relay @ M_F @ M_F @ D))


def criterion_energy(F1: np.ndarray, M_F: np.ndarray) -> float:
    """Expected relay transmissions per injected packet."""
    relay, _ = _split_rows(F1, M_F.shape[0])
    return float(np.sum(relay @ M_F))


def build_transition_system(
    tau: RateMatrix,
    X: ForwardingMatrix,
    P: ChannelMatrix,
    spec: NetworkSpec,
) -> TransitionSystem:
    act = active_set(tau)
    return TransitionSystem(
        relay_index=relay_transmission_index(tau),
        arrival_index=destination_slot_index(spec),
        Q=build_relaying_matrix(X, tau, P, act),
        D=build_arrival_matrix(tau, P, act, spec),
        F1=build_initial_flow(tau.source_rates, X, tau, P, spec),
    )


def _cut_set_guard(
    tau: RateMatrix, P: ChannelMatrix, spec: NetworkSpec, f: float, tol: float
) -> None:
    # Internal sanity: in a single-source/single-relay/single-destination
    # network with disjoint slots and p_SD + p_RD <= 1, the delivered flow
    # can be proven to stay under the source-side cut 1-(1-p_SD)(1-p_SR).
    # Outside that regime duplicate copies can push f above the cut, so no
    # check applies.
    if (
        len(spec.source_ids) != 1
        or len(spec.relay_ids) != 1
        or len(spec.destination_ids) != 1
    ):
        return
    S, R, D_id = spec.source_ids[0], spec.relay_ids[0], spec.destination_ids[0]
    src_slots = [u + 1 for u, t in enumerate(tau.row(S)) if t > 0.0]
    rel_slots = [v + 1 for v, t in enumerate(tau.row(R)) if t > 0.0]
    if len(src_slots) != 1 or len(rel_slots) > 1 or rel_slots == src_slots:
        return
    u0 = src_slots[0]
    p_sd = P.p(S, D_id, u0)
    p_sr = P.p(S, R, u0)
    p_rd = P.p(R, D_id, rel_slots[0]) if rel_slots else 0.0
    if p_sd + p_rd > 1.0 + tol:
        return
    bound = 1.0 - (1.0 - p_sd) * (1.0 - p_sr)
    if f > bound + 1e-9:
        raise NumericalError(
            f"delivered flow {f:.12g} exceeds the source cut {bound:.12g} in a "
            f"regime where that is impossible; flow accounting is broken"
        )


def evaluate(
    tau: RateMatrix,
    X: ForwardingMatrix,
    spec: NetworkSpec,
    channel: ChannelMatrix | None = None,
    channel_config: ChannelConfig | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    check_feasibility: bool = True,
) -> CriteriaVector:
    """Full pipeline: channel, feasibility gates, transition system, criteria.

    ``channel`` overrides the computed interference-aware probabilities,
    which lets callers evaluate a prescribed link model.
    """
    if X.n_nodes != spec.n_nodes or X.slot_count != spec.slot_count:
        raise SchemaError("forwarding matrix shape does not match the network")
    if tau.slot_count != spec.slot_count or tau.relay_ids != spec.relay_ids:
        raise SchemaError("rate matrix layout does not match the network")
    if channel is None:
        channel = channel_matrix(tau, spec, channel_config)

    if check_feasibility:
        check_forwarder_roles(X, tau)
        flow_report = check_flow_conservation(tau, channel, tolerance)
        if not flow_report.all_ok:
            raise FlowConservationError(
                f"flow conservation fails: relays {flow_report.failures()} "
                f"transmit more than they receive"
            )
        duplex_report = check_half_duplex(tau, channel, tolerance)
        if not duplex_report.all_ok:
            raise HalfDuplexError(
                f"half-duplex constraint fails at (node, slot) "
                f"{duplex_report.failures()}"
            )
        consistency_residuals(X, tau, channel, tolerance).raise_if_inconsistent()

    ts = build_transition_system(tau, X, channel, spec)
    M_F = fundamental_matrix(ts.Q)
    gap = delay_identity_gap(ts.Q, M_F)
    if gap > 1e-8:
        raise NumericalError(
            f"fundamental-matrix identity violated by {gap:.3e}; "
            f"the linear solve is unreliable"
        )

    f, f_c = criterion_flow(ts.F1, M_F, ts.D)
    f_d = criterion_delay(ts.F1, M_F, ts.D)
    f_e = criterion_energy(ts.F1, M_F)
    if check_feasibility:
        _cut_set_guard(tau, channel, spec, f, tolerance)
    return CriteriaVector(f=f, f_c=f_c, f_d=f_d, f_e=f_e)
