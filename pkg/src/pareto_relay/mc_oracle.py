"""Packet-level Monte Carlo estimates of the steady-state criteria.

Each trial injects one frame of source packets and follows every copy
through the relay cascade as a branching process: a copy transmitted at
(i, u) is received and re-forwarded at (j, v) with the same per-copy
probabilities that drive the analytic flow recursion. Deliveries count
multiplicities, a delivery made by the s-th transmission wave carries
s - 1 relay hops of delay, and every relay transmission costs one unit
of energy, so the sample means estimate f, f_D and f_E directly.

Interference is already folded into the channel probabilities through
tau, so copies never contend with each other; that premise is exactly
the analytic model's, which is what makes the oracle a fair referee.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .channel import ChannelConfig, ChannelMatrix, channel_matrix
from .errors import FlowConservationError, HalfDuplexError
from .forwarding import ForwardingMatrix, check_forwarder_roles, consistency_residuals
from .rates import (
    DEFAULT_TOLERANCE,
    RateMatrix,
    check_flow_conservation,
    check_half_duplex,
)
from .steady_state import (
    build_arrival_matrix,
    build_relaying_matrix,
    relay_transmission_index,
)
from .topology import NetworkSpec

DEFAULT_BLOCK_SIZE = 65_536


@dataclass(frozen=True)
class SimConfig:
    """Simulation budget and reproducibility knobs.

    ``block_size`` fixes the random-draw granularity: every block owns an
    independent generator derived from (seed, block index), so results are
    identical no matter how blocks are scheduled across threads.
    """

    n_packets: int
    seed: int
    max_epochs: int = 10_000
    confidence: float = 0.99
    block_size: int = DEFAULT_BLOCK_SIZE
    threads: int = 1

    def __post_init__(self):
        if self.n_packets < 1:
            raise ValueError("n_packets must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie strictly between 0 and 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")


@dataclass(frozen=True)
class CriterionEstimate:
    mean: float
    se: float
    ci_low: float
    ci_high: float

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def to_json_dict(self) -> dict:
        return {
            "mean": self.mean,
            "se": self.se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


def _estimate(total: int, total_sq: int, n: int, z: float) -> CriterionEstimate:
    mean = total / n
    if n > 1:
        var = max(0.0, (total_sq - n * mean * mean) / (n - 1))
        se = (var / n) ** 0.5
    else:
        se = float("inf")
    return CriterionEstimate(mean, se, mean - z * se, mean + z * se)


@dataclass(frozen=True)
class SimEstimate:
    """Sample means with standard errors and confidence intervals."""

    flow: CriterionEstimate
    delay: CriterionEstimate
    energy: CriterionEstimate
    n_packets: int
    confidence: float
    truncated: int
    truncation_warning: bool

    def to_json_dict(self) -> dict:
        return {
            "f": self.flow.to_json_dict(),
            "f_d": self.delay.to_json_dict(),
            "f_e": self.energy.to_json_dict(),
            "n_packets": self.n_packets,
            "confidence": self.confidence,
            "truncated": self.truncated,
            "truncation_warning": self.truncation_warning,
        }


def _injections(
    tau: RateMatrix,
    X: ForwardingMatrix,
    P: ChannelMatrix,
    spec: NetworkSpec,
    relay_index: tuple[tuple[int, int], ...],
):
    """Per (source, slot): transmission rate, per-(relay,slot) spawn
    probabilities, and per-destination direct-delivery probabilities."""
    out = []
    for s_row, S in enumerate(spec.source_ids):
        for u in range(1, spec.slot_count + 1):
            t_src = float(tau.source_rates[s_row, u - 1])
            if t_src == 0.0:
                continue
            spawn = np.array(
                [
                    P.p(S, j, u) * (1.0 - tau.rate(j, v)) * X.x(S, j, u, v)
                    for (j, v) in relay_index
                ]
            )
            direct = np.array([P.p(S, d, u) for d in spec.destination_ids])
            out.append((t_src, spawn, direct))
    return out


def _simulate_block(
    block_idx: int,
    block_n: int,
    seed: int,
    injections,
    Q: np.ndarray,
    D: np.ndarray,
    max_epochs: int,
) -> tuple[np.ndarray, int]:
    """One block of independent trials; returns the moment vector
    (sum f, sum f^2, sum delay, sum delay^2, sum energy, sum energy^2)
    and the number of truncated trials."""
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(block_idx,)))
    )
    l = Q.shape[0]
    f_cnt = np.zeros(block_n, dtype=np.int64)
    delay_cnt = np.zeros(block_n, dtype=np.int64)
    energy_cnt = np.zeros(block_n, dtype=np.int64)
    counts = np.zeros((block_n, l), dtype=np.int64)

    for t_src, spawn, direct in injections:
        tx = (rng.random(block_n) < t_src).astype(np.int64)
        for p in direct:
            if p > 0.0:
                f_cnt += rng.binomial(tx, p)
        for b in range(l):
            if spawn[b] > 0.0:
                counts[:, b] += rng.binomial(tx, spawn[b])

    truncated = 0
    epoch = 2
    while counts.any():
        if epoch > max_epochs:
            truncated = int(np.count_nonzero(counts.sum(axis=1)))
            break
        energy_cnt += counts.sum(axis=1)
        new_counts = np.zeros_like(counts)
        for a in range(l):
            n_a = counts[:, a]
            if not n_a.any():
                continue
            for col in range(D.shape[1]):
                if D[a, col] > 0.0:
                    delivered = rng.binomial(n_a, D[a, col])
                    f_cnt += delivered
                    delay_cnt += delivered * (epoch - 1)
            for b in range(l):
                if Q[a, b] > 0.0:
                    new_counts[:, b] += rng.binomial(n_a, Q[a, b])
        counts = new_counts
        epoch += 1

    moments = np.array(
        [
            f_cnt.sum(),
            (f_cnt**2).sum(),
            delay_cnt.sum(),
            (delay_cnt**2).sum(),
            energy_cnt.sum(),
            (energy_cnt**2).sum(),
        ],
        dtype=np.int64,
    )
    return moments, truncated


def simulate(
    tau: RateMatrix,
    X: ForwardingMatrix,
    spec: NetworkSpec,
    config: SimConfig,
    channel: ChannelMatrix | None = None,
    channel_config: ChannelConfig | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> SimEstimate:
    """Estimate f, f_D and f_E from ``config.n_packets`` independent trials.

    Applies the same feasibility gates as the analytic evaluation, then
    runs the branching process in fixed-size blocks. Deterministic per
    seed and independent of ``config.threads``.
    """
    if channel is None:
        channel = channel_matrix(tau, spec, channel_config)
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
            f"half-duplex constraint fails at {duplex_report.failures()}"
        )
    consistency_residuals(X, tau, channel, tolerance).raise_if_inconsistent()

    relay_index = relay_transmission_index(tau)
    Q = build_relaying_matrix(X, tau, channel)
    D = build_arrival_matrix(tau, channel, None, spec)
    injections = _injections(tau, X, channel, spec, relay_index)

    n = config.n_packets
    n_blocks = (n + config.block_size - 1) // config.block_size
    block_args = [
        (b, min(config.block_size, n - b * config.block_size))
        for b in range(n_blocks)
    ]

    def run(arg):
        b, size = arg
        return _simulate_block(
            b, size, config.seed, injections, Q, D, config.max_epochs
        )

    if config.threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(run, block_args))
    else:
        results = [run(arg) for arg in block_args]

    moments = np.zeros(6, dtype=np.int64)
    truncated = 0
    for m, t in results:
        moments += m
        truncated += t

    z = NormalDist().inv_cdf(0.5 + config.confidence / 2.0)
    return SimEstimate(
        flow=_estimate(int(moments[0]), int(moments[1]), n, z),
        delay=_estimate(int(moments[2]), int(moments[3]), n, z),
        energy=_estimate(int(moments[4]), int(moments[5]), n, z),
        n_packets=n,
        confidence=config.confidence,
        truncated=truncated,
        truncation_warning=truncated > 0.01 * n,
    )
