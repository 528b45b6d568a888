"""Static network description: nodes, roles, geometry, radio constants, slot frame.

The network is an implicitly complete graph: every ordered pair of nodes is
a potential link. Sources and destinations never relay; that is enforced by
role, not by convention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import SchemaError, TopologyError

ROLE_SOURCE = "source"
ROLE_RELAY = "relay"
ROLE_DESTINATION = "destination"


class Role(str, Enum):
    SOURCE = ROLE_SOURCE
    RELAY = ROLE_RELAY
    DESTINATION = ROLE_DESTINATION


@dataclass(frozen=True)
class NodeSpec:
    """One node: integer id (1-based), role and planar position in meters."""

    id: int
    role: Role
    position: tuple[float, float]


@dataclass(frozen=True)
class RadioSpec:
    """Radio constants shared by all nodes.

    Attributes
    ----------
    tx_power : float
        Transmission power P_T in watts, identical for every node.
    noise_power : float
        Noise power N_0 in watts.
    packet_bits : int
        Number of bits per data packet.
    pathloss_exponent : float
        Isotropic pathloss exponent alpha.
    reference_distance : float
        Distance d_0 in meters at which the gain equals ``reference_gain``.
    reference_gain : float
        Dimensionless gain of a link of length d_0.
    """

    tx_power: float
    noise_power: float
    packet_bits: int
    pathloss_exponent: float = 2.0
    reference_distance: float = 1.0
    reference_gain: float = 1.0

    def __post_init__(self):
        if self.tx_power <= 0:
            raise SchemaError("tx_power_w must be > 0")
        if self.noise_power <= 0:
            raise SchemaError("noise_power_w must be > 0")
        if int(self.packet_bits) != self.packet_bits or self.packet_bits < 1:
            raise SchemaError("packet_bits must be an integer >= 1")
        if self.pathloss_exponent < 0:
            raise SchemaError("pathloss_exponent must be >= 0")
        if self.reference_distance <= 0:
            raise SchemaError("reference_distance_m must be > 0")
        if self.reference_gain <= 0:
            raise SchemaError("reference_gain must be > 0")


@dataclass(frozen=True)
class SlotFrame:
    """The repeated frame of time slots; slots are numbered 1..slot_count."""

    slot_count: int

    def __post_init__(self):
        if int(self.slot_count) != self.slot_count or self.slot_count < 1:
            raise SchemaError("frame.slots must be an integer >= 1")

    @property
    def slots(self) -> range:
        return range(1, self.slot_count + 1)


@dataclass(frozen=True)
class NetworkSpec:
    """Validated network: node list, radio constants and slot frame."""

    nodes: tuple[NodeSpec, ...]
    radio: RadioSpec
    frame: SlotFrame

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise TopologyError(f"duplicate node id(s): {dup}")
        if sorted(ids) != list(range(1, len(ids) + 1)):
            raise TopologyError("node ids must form a contiguous range starting at 1")
        roles = [n.role for n in self.nodes]
        if Role.SOURCE not in roles:
            raise TopologyError("network needs at least one source node")
        if Role.DESTINATION not in roles:
            raise TopologyError("network needs at least one destination node")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def slot_count(self) -> int:
        return self.frame.slot_count

    def node(self, node_id: int) -> NodeSpec:
        return self.nodes[node_id - 1] if self.nodes[node_id - 1].id == node_id else (
            next(n for n in self.nodes if n.id == node_id)
        )

    def ids_with_role(self, role: Role) -> tuple[int, ...]:
        return tuple(n.id for n in sorted(self.nodes, key=lambda n: n.id) if n.role == role)

    @property
    def source_ids(self) -> tuple[int, ...]:
        return self.ids_with_role(Role.SOURCE)

    @property
    def relay_ids(self) -> tuple[int, ...]:
        return self.ids_with_role(Role.RELAY)

    @property
    def destination_ids(self) -> tuple[int, ...]:
        return self.ids_with_role(Role.DESTINATION)


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise SchemaError(f"missing key '{key}' in {where}")
    value = doc[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{where}.{key} must be a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(f"{where}.{key} must be an integer")
        return value
    if not isinstance(value, kind):
        raise SchemaError(f"{where}.{key} has the wrong type")
    return value


def load_network(document) -> NetworkSpec:
    """Parse and validate a topology document.

    ``document`` may be a JSON string or an already-parsed dict with the
    top-level keys ``nodes``, ``radio`` and ``frame``.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"topology document is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaError("topology document must be a JSON object")

    raw_nodes = _require(document, "nodes", list, "document")
    nodes = []
    for k, entry in enumerate(raw_nodes):
        if not isinstance(entry, dict):
            raise SchemaError(f"nodes[{k}] must be an object")
        node_id = _require(entry, "id", int, f"nodes[{k}]")
        role = _require(entry, "role", str, f"nodes[{k}]")
        try:
            role = Role(role)
        except ValueError:
            raise SchemaError(
                f"nodes[{k}].role must be one of source/relay/destination, got {role!r}"
            ) from None
        x = _require(entry, "x", float, f"nodes[{k}]")
        y = _require(entry, "y", float, f"nodes[{k}]")
        nodes.append(NodeSpec(id=node_id, role=role, position=(x, y)))

    raw_radio = _require(document, "radio", dict, "document")
    radio = RadioSpec(
        tx_power=_require(raw_radio, "tx_power_w", float, "radio"),
        noise_power=_require(raw_radio, "noise_power_w", float, "radio"),
        packet_bits=_require(raw_radio, "packet_bits", int, "radio"),
        pathloss_exponent=_require(raw_radio, "pathloss_exponent", float, "radio"),
        reference_distance=_require(raw_radio, "reference_distance_m", float, "radio"),
        reference_gain=_require(raw_radio, "reference_gain", float, "radio"),
    )

    raw_frame = _require(document, "frame", dict, "document")
    frame = SlotFrame(slot_count=_require(raw_frame, "slots", int, "frame"))

    nodes.sort(key=lambda n: n.id)
    return NetworkSpec(nodes=tuple(nodes), radio=radio, frame=frame)


def serialize_network(spec: NetworkSpec) -> dict:
    """Inverse of :func:`load_network`: a dict that reloads to an equal spec."""
    return {
        "nodes": [
            {"id": n.id, "role": n.role.value, "x": n.position[0], "y": n.position[1]}
            for n in spec.nodes
        ],
        "radio": {
            "tx_power_w": spec.radio.tx_power,
            "noise_power_w": spec.radio.noise_power,
            "packet_bits": spec.radio.packet_bits,
            "pathloss_exponent": spec.radio.pathloss_exponent,
            "reference_distance_m": spec.radio.reference_distance,
            "reference_gain": spec.radio.reference_gain,
        },
        "frame": {"slots": spec.frame.slot_count},
    }


def distance(i: NodeSpec, j: NodeSpec) -> float:
    return math.dist(i.position, j.position)


def pathloss_gain(i: NodeSpec, j: NodeSpec, radio: RadioSpec) -> float:
    """Isotropic pathloss gain a_ij = g_ref * (d_0 / d)^alpha, clamped at g_ref.

    The clamp keeps the gain from exceeding its reference value for links
    shorter than d_0, which would otherwise produce unbounded SINR.
    """
    d = distance(i, j)
    if d <= 0.0:
        raise TopologyError(f"nodes {i.id} and {j.id} are coincident (distance 0)")
    gain = radio.reference_gain * (radio.reference_distance / d) ** radio.pathloss_exponent
    return min(gain, radio.reference_gain)


def gain_matrix(spec: NetworkSpec) -> np.ndarray:
    """(n, n) matrix of pairwise gains; the diagonal is 0 and never used."""
    n = spec.n_nodes
    g = np.zeros((n, n))
    for i in spec.nodes:
        for j in spec.nodes:
            if i.id != j.id:
                g[i.id - 1, j.id - 1] = pathloss_gain(i, j, spec.radio)
    return g
