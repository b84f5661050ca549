"""Multilayer multimodal transport network model.

A city is modeled as a set of transport modes (walk, cycle, car, CAV/taxi,
bus, tram, metro, train) operating over a set of infrastructure networks
(pedestrian, cycling, road, tram rail, metro rail, train rail).  A mode may
only use a network when the (mode, network) pair appears in the usage
matrix.  Segments carry per-mode usage entries because shared infrastructure
behaves differently per mode: a reserved bus lane on a road segment has its
own capacity, a one-way street may allow two-way cycling, and so on.
Multimodal nodes are the only places where a traveler can change modes.

Networks are built once from a plain-dict description and are immutable
afterwards; disturbance effects live in a separate overlay (see
:mod:`mitsim.state`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

from .errors import ValidationError

MODE_CATEGORIES = frozenset(
    {"walk", "cycle", "private-car", "cav-taxi", "bus", "tram", "metro", "train"}
)
AGILE_CATEGORIES = frozenset({"walk", "cycle"})
SEGMENT_CLASSES = ("critical", "major", "inferior", "minor")
DIRECTIONS = frozenset({"forward", "backward", "both"})
NODE_SERVICES = frozenset({"pt-stop", "bike-nest", "cav-pickup", "rail-station"})


@dataclass(frozen=True)
class ModeSpec:
    """One transport mode (a category may stand for several similar modes)."""

    mode_id: str
    name: str
    category: str
    agile: bool
    maas_member: bool


@dataclass(frozen=True)
class NetworkSpec:
    network_id: str
    name: str


@dataclass(frozen=True)
class UsageEntry:
    """How one mode uses one segment.

    ``reserved`` marks a dedicated lane or track (e.g. a bus lane) that is
    spared by blockages unless the disturbance explicitly hits it.
    ``accessible`` flags usability for travelers with reduced mobility.
    """

    mode_id: str
    direction: str = "both"
    base_capacity: float = 1000.0
    free_flow_time: float = 60.0
    reserved: bool = False
    accessible: bool = True


@dataclass(frozen=True)
class Segment:
    segment_id: str
    network_id: str
    from_node: str
    to_node: str
    length: float
    usage: tuple[UsageEntry, ...]
    seg_class: str = "minor"
    shared_group: Optional[str] = None

    def usage_for(self, mode_id: str) -> Optional[UsageEntry]:
        for entry in self.usage:
            if entry.mode_id == mode_id:
                return entry
        return None


@dataclass(frozen=True)
class MultimodalNode:
    """A node where mode transitions are possible.

    ``transfer_time`` must cover every ordered pair of distinct attached
    modes; same-mode transfer time is implicitly zero.
    """

    node_id: str
    attachments: frozenset[tuple[str, str]]  # (mode_id, network_id)
    transfer_time: Mapping[tuple[str, str], float]
    services: frozenset[str] = frozenset()

    def attached_modes(self) -> set[str]:
        return {m for m, _ in self.attachments}

    def transfer(self, from_mode: str, to_mode: str) -> float:
        if from_mode == to_mode:
            return 0.0
        return self.transfer_time[(from_mode, to_mode)]


@dataclass(frozen=True)
class Arc:
    """Directed traversable arc derived from a segment for one mode."""

    from_node: str
    to_node: str
    segment_id: str
    free_flow_time: float
    capacity: float
    length: float


@dataclass(frozen=True)
class GraphView:
    """Per-mode view of the network: nodes plus directed arcs."""

    mode_id: str
    nodes: frozenset[str]
    arcs: tuple[Arc, ...]

    def out_arcs(self, node: str) -> list[Arc]:
        return [a for a in self.arcs if a.from_node == node]


class MultiLayerNetwork:
    """Validated, immutable container for modes, networks, nodes and segments."""

    def __init__(
        self,
        modes: Iterable[ModeSpec],
        networks: Iterable[NetworkSpec],
        usage_matrix: Iterable[tuple[str, str]],
        nodes: Iterable[str],
        segments: Iterable[Segment],
        multimodal_nodes: Iterable[MultimodalNode],
    ):
        self.modes = {m.mode_id: m for m in modes}
        self.networks = {n.network_id: n for n in networks}
        self.usage_matrix = frozenset(tuple(p) for p in usage_matrix)
        self.nodes = frozenset(nodes)
        self.segments = {s.segment_id: s for s in segments}
        self.multimodal_nodes = {mn.node_id: mn for mn in multimodal_nodes}
        self._validate()
        self._shared_groups = self._index_shared_groups()
        self._views: dict[str, GraphView] = {}

    # -- validation ---------------------------------------------------------

    def _validate(self) -> None:
        for mode in self.modes.values():
            if mode.category not in MODE_CATEGORIES:
                raise ValidationError(
                    f"mode {mode.mode_id}: unknown category {mode.category!r}"
                )
            if mode.category in AGILE_CATEGORIES and not mode.agile:
                raise ValidationError(
                    f"mode {mode.mode_id}: category {mode.category} must be agile"
                )
        for mode_id, network_id in self.usage_matrix:
            if mode_id not in self.modes:
                raise ValidationError(f"usage matrix names unknown mode {mode_id}")
            if network_id not in self.networks:
                raise ValidationError(
                    f"usage matrix names unknown network {network_id}"
                )
        for seg in self.segments.values():
            if seg.network_id not in self.networks:
                raise ValidationError(
                    f"segment {seg.segment_id}: unknown network {seg.network_id}"
                )
            for endpoint in (seg.from_node, seg.to_node):
                if endpoint not in self.nodes:
                    raise ValidationError(
                        f"segment {seg.segment_id}: dangling node reference {endpoint}"
                    )
            if seg.length <= 0:
                raise ValidationError(f"segment {seg.segment_id}: length must be > 0")
            if not seg.usage:
                raise ValidationError(f"segment {seg.segment_id}: empty usage list")
            if seg.seg_class not in SEGMENT_CLASSES:
                raise ValidationError(
                    f"segment {seg.segment_id}: unknown class {seg.seg_class!r}"
                )
            seen_modes = set()
            for entry in seg.usage:
                if entry.mode_id in seen_modes:
                    raise ValidationError(
                        f"segment {seg.segment_id}: duplicate usage for mode {entry.mode_id}"
                    )
                seen_modes.add(entry.mode_id)
                if entry.mode_id not in self.modes:
                    raise ValidationError(
                        f"segment {seg.segment_id}: unknown mode {entry.mode_id}"
                    )
                if entry.direction not in DIRECTIONS:
                    raise ValidationError(
                        f"segment {seg.segment_id}: bad direction {entry.direction!r}"
                    )
                if entry.base_capacity <= 0 or entry.free_flow_time <= 0:
                    raise ValidationError(
                        f"segment {seg.segment_id}: capacity and free-flow time must "
                        f"be > 0 for mode {entry.mode_id}"
                    )
                if (entry.mode_id, seg.network_id) not in self.usage_matrix:
                    raise ValidationError(
                        f"segment {seg.segment_id}: pair ({entry.mode_id}, "
                        f"{seg.network_id}) not in the usage matrix"
                    )
        for mn in self.multimodal_nodes.values():
            if mn.node_id not in self.nodes:
                raise ValidationError(
                    f"multimodal node {mn.node_id}: not in the node registry"
                )
            for mode_id, network_id in mn.attachments:
                if (mode_id, network_id) not in self.usage_matrix:
                    raise ValidationError(
                        f"multimodal node {mn.node_id}: attachment ({mode_id}, "
                        f"{network_id}) not in the usage matrix"
                    )
            attached = sorted(mn.attached_modes())
            for a in attached:
                for b in attached:
                    if a != b and (a, b) not in mn.transfer_time:
                        raise ValidationError(
                            f"multimodal node {mn.node_id}: missing transfer time "
                            f"({a} -> {b})"
                        )
            for service in mn.services:
                if service not in NODE_SERVICES:
                    raise ValidationError(
                        f"multimodal node {mn.node_id}: unknown service {service!r}"
                    )
        self._check_maas_connectivity()

    def _check_maas_connectivity(self) -> None:
        # Every MaaS mode must be reachable as a service: some connected
        # component of its usable subgraph must contain >= 2 multimodal nodes.
        for mode in self.modes.values():
            if not mode.maas_member:
                continue
            view = self._build_view(mode.mode_id)
            adj: dict[str, set[str]] = {}
            for arc in view.arcs:
                adj.setdefault(arc.from_node, set()).add(arc.to_node)
                adj.setdefault(arc.to_node, set()).add(arc.from_node)
            seen: set[str] = set()
            ok = False
            for start in sorted(adj):
                if start in seen:
                    continue
                stack, comp = [start], set()
                while stack:
                    n = stack.pop()
                    if n in comp:
                        continue
                    comp.add(n)
                    stack.extend(adj.get(n, ()))
                seen |= comp
                if len(comp & set(self.multimodal_nodes)) >= 2:
                    ok = True
                    break
            if not ok:
                raise ValidationError(
                    f"mode {mode.mode_id}: MaaS member has no usable component "
                    f"containing 2 multimodal nodes"
                )

    def _index_shared_groups(self) -> dict[str, frozenset[str]]:
        groups: dict[str, set[str]] = {}
        for seg in self.segments.values():
            if seg.shared_group is not None:
                groups.setdefault(seg.shared_group, set()).add(seg.segment_id)
        return {k: frozenset(v) for k, v in groups.items()}

    # -- queries ------------------------------------------------------------

    def _build_view(self, mode_id: str) -> GraphView:
        arcs = []
        for seg_id in sorted(self.segments):
            seg = self.segments[seg_id]
            entry = seg.usage_for(mode_id)
            if entry is None:
                continue
            fwd = Arc(seg.from_node, seg.to_node, seg.segment_id,
                      entry.free_flow_time, entry.base_capacity, seg.length)
            bwd = Arc(seg.to_node, seg.from_node, seg.segment_id,
                      entry.free_flow_time, entry.base_capacity, seg.length)
            if entry.direction in ("forward", "both"):
                arcs.append(fwd)
            if entry.direction in ("backward", "both"):
                arcs.append(bwd)
        return GraphView(mode_id=mode_id, nodes=self.nodes, arcs=tuple(arcs))

    def usable_subgraph(self, mode_id: str) -> GraphView:
        """Directed arcs usable by ``mode_id``, respecting segment direction."""
        if mode_id not in self.modes:
            raise ValidationError(f"unknown mode {mode_id}")
        if mode_id not in self._views:
            self._views[mode_id] = self._build_view(mode_id)
        return self._views[mode_id]

    def shared_group_members(self, segment_id: str) -> set[str]:
        """All segments on the same physical infrastructure, input included."""
        if segment_id not in self.segments:
            raise ValidationError(f"unknown segment {segment_id}")
        group = self.segments[segment_id].shared_group
        if group is None:
            return {segment_id}
        return set(self._shared_groups[group])

    def expand_shared(self, segment_ids: Iterable[str]) -> set[str]:
        """Close a segment set under shared physical infrastructure."""
        out: set[str] = set()
        for seg_id in segment_ids:
            out |= self.shared_group_members(seg_id)
        return out


# -- construction from plain data -------------------------------------------


def _require(mapping: Mapping, key: str, context: str):
    if key not in mapping:
        raise ValidationError(f"{context}: missing field {key!r}")
    return mapping[key]


def build_network(spec: Mapping) -> MultiLayerNetwork:
    """Build and validate a network from a scenario ``network`` section.

    Raises :class:`ValidationError` naming the offending identifier when the
    description is inconsistent (dangling nodes, duplicate ids, usage outside
    the matrix, empty usage lists, ...).
    """
    modes = []
    seen_modes: set[str] = set()
    for raw in _require(spec, "modes", "network"):
        mode_id = _require(raw, "mode_id", "mode")
        if mode_id in seen_modes:
            raise ValidationError(f"duplicate mode identifier {mode_id}")
        seen_modes.add(mode_id)
        modes.append(ModeSpec(
            mode_id=mode_id,
            name=raw.get("name", mode_id),
            category=_require(raw, "category", f"mode {mode_id}"),
            agile=bool(raw.get("agile", raw.get("category") in AGILE_CATEGORIES)),
            maas_member=bool(raw.get("maas_member", False)),
        ))
    networks = []
    seen_nets: set[str] = set()
    for raw in _require(spec, "networks", "network"):
        network_id = _require(raw, "network_id", "network entry")
        if network_id in seen_nets:
            raise ValidationError(f"duplicate network identifier {network_id}")
        seen_nets.add(network_id)
        networks.append(NetworkSpec(network_id=network_id, name=raw.get("name", network_id)))
    usage_matrix = [tuple(pair) for pair in _require(spec, "usage_matrix", "network")]
    nodes = list(_require(spec, "nodes", "network"))
    if len(nodes) != len(set(nodes)):
        dupes = sorted({n for n in nodes if nodes.count(n) > 1})
        raise ValidationError(f"duplicate node identifier {dupes[0]}")
    segments = []
    seen_segs: set[str] = set()
    for raw in _require(spec, "segments", "network"):
        seg_id = _require(raw, "segment_id", "segment")
        if seg_id in seen_segs:
            raise ValidationError(f"duplicate segment identifier {seg_id}")
        seen_segs.add(seg_id)
        usage = tuple(
            UsageEntry(
                mode_id=_require(u, "mode_id", f"segment {seg_id} usage"),
                direction=u.get("direction", "both"),
                base_capacity=float(u.get("base_capacity", 1000.0)),
                free_flow_time=float(u.get("free_flow_time", 60.0)),
                reserved=bool(u.get("reserved", False)),
                accessible=bool(u.get("accessible", True)),
            )
            for u in _require(raw, "usage", f"segment {seg_id}")
        )
        segments.append(Segment(
            segment_id=seg_id,
            network_id=_require(raw, "network_id", f"segment {seg_id}"),
            from_node=_require(raw, "from_node", f"segment {seg_id}"),
            to_node=_require(raw, "to_node", f"segment {seg_id}"),
            length=float(_require(raw, "length", f"segment {seg_id}")),
            usage=usage,
            seg_class=raw.get("class", "minor"),
            shared_group=raw.get("shared_group"),
        ))
    multimodal_nodes = []
    default_transfer = float(spec.get("transfer_time_default", 120.0))
    for raw in spec.get("multimodal_nodes", []):
        node_id = _require(raw, "node_id", "multimodal node")
        attachments = frozenset(tuple(a) for a in _require(raw, "attachments", f"node {node_id}"))
        attached_modes = sorted({m for m, _ in attachments})
        transfer: dict[tuple[str, str], float] = {}
        raw_transfer = raw.get("transfer_time", {})
        for a in attached_modes:
            for b in attached_modes:
                if a == b:
                    continue
                transfer[(a, b)] = float(raw_transfer.get(f"{a},{b}", default_transfer))
        multimodal_nodes.append(MultimodalNode(
            node_id=node_id,
            attachments=attachments,
            transfer_time=transfer,
            services=frozenset(raw.get("services", [])),
        ))
    return MultiLayerNetwork(
        modes=modes,
        networks=networks,
        usage_matrix=usage_matrix,
        nodes=nodes,
        segments=segments,
        multimodal_nodes=multimodal_nodes,
    )


def node_distances(
    net: MultiLayerNetwork,
    sources: Union[Iterable[str], Mapping[str, float]],
) -> dict[str, float]:
    """Shortest along-segment distance (meters) from a source set to all nodes.

    Distances are over the undirected union of all segments regardless of
    mode, matching how warning areas are scoped.  ``sources`` may carry
    initial distances (for positions in a segment's interior).
    """
    import heapq

    if isinstance(sources, Mapping):
        initial = dict(sources)
    else:
        initial = {s: 0.0 for s in sources}
    adj: dict[str, list[tuple[str, float]]] = {n: [] for n in net.nodes}
    for seg_id in sorted(net.segments):
        seg = net.segments[seg_id]
        adj[seg.from_node].append((seg.to_node, seg.length))
        adj[seg.to_node].append((seg.from_node, seg.length))
    dist: dict[str, float] = {}
    heap: list[tuple[float, str]] = []
    for s in sorted(initial):
        dist[s] = initial[s]
        heapq.heappush(heap, (initial[s], s))
    while heap:
        d, node = heapq.heappop(heap)
        if d > dist.get(node, float("inf")):
            continue
        for nxt, w in adj[node]:
            nd = d + w
            if nd < dist.get(nxt, float("inf")):
                dist[nxt] = nd
                heapq.heappush(heap, (nd, nxt))
    return dist
