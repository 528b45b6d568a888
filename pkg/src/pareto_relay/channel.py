"""Interference-aware channel success probabilities.

The probability p_ij^u that a packet sent by i in slot u is received at j
is the average of the packet success rate over every subset of the other
transmitters active in that slot, weighted by the probability that exactly
that subset transmits concurrently. Interference is additive noise; the
packet success rate comes from an uncoded BPSK/AWGN bit error rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.special import erfc

from .errors import EnumerationCapError, SchemaError
from .rates import RateMatrix, active_set
from .topology import NetworkSpec, gain_matrix

DEFAULT_EXACT_CAP = 20


@dataclass(frozen=True)
class ChannelConfig:
    """Controls the exact/sampled switchover for the interfering-set average."""

    exact_cap: int = DEFAULT_EXACT_CAP
    samples: int = 100_000
    seed: int = 0


@dataclass(frozen=True)
class InterferingSet:
    """A concrete subset of concurrent transmitters on a link and slot."""

    sender: int
    receiver: int
    slot: int
    members: tuple[int, ...]


def ber_bpsk_awgn(gamma):
    """Bit error rate for uncoded BPSK on AWGN: 0.5 * erfc(sqrt(gamma))."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("SINR must be >= 0")
    out = 0.5 * erfc(np.sqrt(g))
    return float(out) if np.isscalar(gamma) else out


def per(gamma, packet_bits: int, ber: Callable = ber_bpsk_awgn):
    """Packet error rate 1 - (1 - BER)^N_b for an N_b-bit packet."""
    if packet_bits < 1:
        raise ValueError("packet_bits must be >= 1")
    out = 1.0 - np.power(1.0 - ber(gamma), packet_bits)
    return float(out) if np.isscalar(gamma) else out


def packet_success(gamma, packet_bits: int, ber: Callable = ber_bpsk_awgn):
    """(1 - BER)^N_b, the complement of :func:`per`."""
    out = np.power(1.0 - ber(gamma), packet_bits)
    return float(out) if np.isscalar(gamma) else out


def interference_candidates(
    tau: RateMatrix, sender: int, receiver: int, slot: int
) -> tuple[int, ...]:
    """Nodes that can interfere on link (sender, receiver) in ``slot``:
    every transmitter active in the slot except the two link endpoints.

    The receiver is excluded because its own transmit activity blocks
    reception outright (handled by the listening factor in the forwarding
    model), and a node has no propagation distance to itself.
    """
    act = active_set(tau)
    return tuple(k for k in act.in_slot(slot) if k not in (sender, receiver))


def interference_power(
    spec: NetworkSpec, sender: int, receiver: int, members: Iterable[int]
) -> float:
    """Total interference power in watts at ``receiver``: sum of P_T * a_kj."""
    members = tuple(members)
    if sender in members or receiver in members:
        raise ValueError("interfering set must exclude both link endpoints")
    gains = gain_matrix(spec)
    return float(
        sum(spec.radio.tx_power * gains[k - 1, receiver - 1] for k in members)
    )


def sinr(spec: NetworkSpec, sender: int, receiver: int, interference: float) -> float:
    """SINR of the link: P_T * a_ij / (N_0 + I)."""
    gains = gain_matrix(spec)
    signal = spec.radio.tx_power * gains[sender - 1, receiver - 1]
    return signal / (spec.radio.noise_power + interference)


def interfering_set_probability(
    members: Iterable[int], candidates: Iterable[int], slot: int, tau: RateMatrix
) -> float:
    """Probability that exactly ``members`` out of ``candidates`` transmit.

    Product of tau_k over the members times (1 - tau_m) over the remaining
    candidates, so the probabilities of all subsets of a fixed candidate
    pool partition the space and sum to 1.
    """
    members = set(members)
    candidates = tuple(candidates)
    if not members <= set(candidates):
        raise ValueError("interfering set must be a subset of the candidate pool")
    p = 1.0
    for k in candidates:
        t = tau.rate(k, slot)
        p *= t if k in members else (1.0 - t)
    return p


def _subset_average(
    signal: float,
    noise: float,
    gains: np.ndarray,
    taus: np.ndarray,
    packet_bits: int,
    ber: Callable,
) -> float:
    # Enumerates all 2^m interferer subsets by iterative doubling; the
    # subset probabilities telescope to exactly 1.
    interf = np.zeros(1)
    prob = np.ones(1)
    for g, t in zip(gains, taus):
        interf = np.concatenate([interf, interf + g])
        prob = np.concatenate([prob * (1.0 - t), prob * t])
    gamma = signal / (noise + interf)
    return float(np.dot(prob, packet_success(gamma, packet_bits, ber)))


def channel_probability_exact(
    spec: NetworkSpec,
    tau: RateMatrix,
    sender: int,
    receiver: int,
    slot: int,
    cap: int = DEFAULT_EXACT_CAP,
    ber: Callable = ber_bpsk_awgn,
) -> float:
    """p_ij^u by exact enumeration of every interfering set.

    Raises :class:`EnumerationCapError` when the candidate pool exceeds
    ``cap``; use :func:`channel_probability_sampled` then.
    """
    candidates = interference_candidates(tau, sender, receiver, slot)
    if len(candidates) > cap:
        raise EnumerationCapError(
            f"{len(candidates)} candidate interferers on link ({sender},{receiver})"
            f" slot {slot} exceed the exact-enumeration cap {cap}"
        )
    gains = gain_matrix(spec)
    p_t = spec.radio.tx_power
    signal = p_t * gains[sender - 1, receiver - 1]
    int_gains = np.array([p_t * gains[k - 1, receiver - 1] for k in candidates])
    int_taus = np.array([tau.rate(k, slot) for k in candidates])
    return _subset_average(
        signal, spec.radio.noise_power, int_gains, int_taus, spec.radio.packet_bits, ber
    )


def channel_probability_sampled(
    spec: NetworkSpec,
    tau: RateMatrix,
    sender: int,
    receiver: int,
    slot: int,
    samples: int,
    seed: int,
    ber: Callable = ber_bpsk_awgn,
) -> tuple[float, float]:
    """Unbiased Monte Carlo estimate of p_ij^u with its standard error.

    Each candidate interferer is drawn active with its own transmission
    rate; the packet success rate is averaged over the draws. Deterministic
    for a fixed seed.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    candidates = interference_candidates(tau, sender, receiver, slot)
    gains = gain_matrix(spec)
    p_t = spec.radio.tx_power
    signal = p_t * gains[sender - 1, receiver - 1]
    int_gains = np.array([p_t * gains[k - 1, receiver - 1] for k in candidates])
    int_taus = np.array([tau.rate(k, slot) for k in candidates])
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

    total = 0.0
    total_sq = 0.0
    remaining = samples
    chunk = 131_072
    while remaining > 0:
        n = min(chunk, remaining)
        if len(candidates):
            masks = rng.random((n, len(candidates))) < int_taus
            interf = masks @ int_gains
        else:
            interf = np.zeros(n)
        succ = packet_success(signal / (spec.radio.noise_power + interf),
                              spec.radio.packet_bits, ber)
        succ = np.atleast_1d(succ)
        total += float(succ.sum())
        total_sq += float(np.dot(succ, succ))
        remaining -= n
    mean = total / samples
    if samples > 1:
        var = max(0.0, (total_sq - samples * mean * mean) / (samples - 1))
        se = (var / samples) ** 0.5
    else:
        se = float("inf")
    return mean, se


class ChannelMatrix:
    """Per-edge, per-slot success probabilities; diagonal entries are absent."""

    def __init__(self, n_nodes: int, slot_count: int, probs: np.ndarray):
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (n_nodes, n_nodes, slot_count):
            raise SchemaError(
                f"channel matrix must have shape ({n_nodes}, {n_nodes}, {slot_count})"
            )
        if np.min(probs) < 0.0 or np.max(probs) > 1.0:
            raise SchemaError("channel probabilities must lie in [0, 1]")
        self.n_nodes = n_nodes
        self.slot_count = slot_count
        self.probs = probs
        self.probs.setflags(write=False)

    def p(self, sender: int, receiver: int, slot: int) -> float:
        if sender == receiver:
            raise ValueError(f"channel probability is undefined on ({sender},{sender})")
        return float(self.probs[sender - 1, receiver - 1, slot - 1])

    def to_json_dict(self) -> dict:
        links = []
        for i in range(self.n_nodes):
            for j in range(self.n_nodes):
                if i == j:
                    continue
                for u in range(self.slot_count):
                    links.append(
                        {"i": i + 1, "j": j + 1, "u": u + 1, "p": float(self.probs[i, j, u])}
                    )
        return {"links": links}

    @classmethod
    def from_dense(cls, probs) -> "ChannelMatrix":
        probs = np.asarray(probs, dtype=float)
        return cls(probs.shape[0], probs.shape[2], probs)

    @classmethod
    def from_json(cls, document, n_nodes: int, slot_count: int) -> "ChannelMatrix":
        if isinstance(document, (str, bytes)):
            try:
                document = json.loads(document)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"channel document is not valid JSON: {exc}") from exc
        probs = np.zeros((n_nodes, n_nodes, slot_count))
        for entry in document.get("links", []):
            probs[entry["i"] - 1, entry["j"] - 1, entry["u"] - 1] = entry["p"]
        return cls(n_nodes, slot_count, probs)


def channel_matrix(
    tau: RateMatrix,
    spec: NetworkSpec,
    config: ChannelConfig | None = None,
    ber: Callable = ber_bpsk_awgn,
) -> ChannelMatrix:
    """Assemble p_ij^u for every ordered node pair and slot.

    Uses exact enumeration while the candidate pool stays within the cap and
    falls back to the seeded sampled estimate beyond it.
    """
    if config is None:
        config = ChannelConfig()
    n = spec.n_nodes
    slots = spec.slot_count
    probs = np.zeros((n, n, slots))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            for u in range(1, slots + 1):
                try:
                    p = channel_probability_exact(spec, tau, i, j, u, config.exact_cap, ber)
                except EnumerationCapError:
                    p, _ = channel_probability_sampled(
                        spec, tau, i, j, u, config.samples,
                        seed=_link_seed(config.seed, i, j, u), ber=ber,
                    )
                probs[i - 1, j - 1, u - 1] = p
    return ChannelMatrix(n, slots, probs)


def _link_seed(seed: int, i: int, j: int, u: int) -> int:
    # Stable per-link seed so the sampled fallback is reproducible and
    # independent of evaluation order.
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(i, j, u))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
