"""Seeded random generators for networks, devices, warnings and scenarios.

Everything is driven by a caller-owned ``random.Random`` so test cases are
reproducible from their seed alone.
"""

from __future__ import annotations

import random

from mitsim.dissemination import DevicePosition, EdgeDevice, RsuTopology
from mitsim.messages import AffectedEntry, WarningMessage
from mitsim.disturbance import SeverityMeasure
from mitsim.network import MultiLayerNetwork, build_network
from mitsim.state import Contribution, NetworkState

CATEGORY_POOL = ["private-car", "cav-taxi", "bus", "metro", "tram", "train"]
CLASSES = ["critical", "major", "inferior", "minor"]


def random_network_spec(rng: random.Random, max_nodes: int = 10,
                        max_modes: int = 3, max_extra_segments: int = 6) -> dict:
    """A valid multilayer network: each mode spans a random connected subgraph."""
    n_nodes = rng.randint(4, max_nodes)
    nodes = [f"v{i}" for i in range(n_nodes)]
    n_modes = rng.randint(1, max_modes)
    modes = []
    networks = []
    usage_matrix = []
    for mi in range(n_modes):
        mode_id = f"m{mi}"
        modes.append({
            "mode_id": mode_id,
            "name": mode_id,
            "category": rng.choice(CATEGORY_POOL),
            "agile": False,
            "maas_member": False,
        })
        networks.append({"network_id": f"n{mi}", "name": f"n{mi}"})
        usage_matrix.append([mode_id, f"n{mi}"])

    segments = []
    seg_count = 0
    incident: dict[str, set[str]] = {}  # node -> modes with a segment there

    def add_segment(mode_idx: int, a: str, b: str):
        nonlocal seg_count
        seg_id = f"s{seg_count}"
        seg_count += 1
        segments.append({
            "segment_id": seg_id,
            "network_id": f"n{mode_idx}",
            "from_node": a,
            "to_node": b,
            "length": float(rng.randint(2, 40) * 100),
            "class": rng.choice(CLASSES),
            "usage": [{
                "mode_id": f"m{mode_idx}",
                "direction": rng.choice(["both", "both", "forward"]),
                "base_capacity": float(rng.randint(2, 20) * 100),
                "free_flow_time": float(rng.randint(1, 30) * 10),
            }],
        })
        for n in (a, b):
            incident.setdefault(n, set()).add(f"m{mode_idx}")

    for mi in range(n_modes):
        size = rng.randint(2, n_nodes)
        sub = rng.sample(nodes, size)
        for i in range(1, len(sub)):
            add_segment(mi, sub[rng.randrange(i)], sub[i])
    for _ in range(rng.randint(0, max_extra_segments)):
        mi = rng.randrange(n_modes)
        a, b = rng.sample(nodes, 2)
        add_segment(mi, a, b)

    multimodal = []
    for node in nodes:
        present = sorted(incident.get(node, ()))
        if len(present) >= 2 and rng.random() < 0.8:
            multimodal.append({
                "node_id": node,
                "attachments": [[m, f"n{m[1:]}"] for m in present],
                "transfer_time": {
                    f"{a},{b}": float(rng.randint(0, 6) * 30)
                    for a in present for b in present if a != b
                },
                "services": ["pt-stop"] if rng.random() < 0.5 else [],
            })
    return {
        "modes": modes,
        "networks": networks,
        "usage_matrix": usage_matrix,
        "nodes": nodes,
        "segments": segments,
        "multimodal_nodes": multimodal,
    }


def random_network(rng: random.Random, **kw) -> MultiLayerNetwork:
    return build_network(random_network_spec(rng, **kw))


def random_state(rng: random.Random, net: MultiLayerNetwork,
                 block_prob: float = 0.25) -> NetworkState:
    """Overlay with random blockages and degradations, plus boarding waits."""
    waits = {m: rng.choice([0.0, 0.0, 150.0, 300.0]) for m in net.modes}
    state = NetworkState(net, boarding_wait=waits, clock=0.0)
    i = 0
    for seg_id in sorted(net.segments):
        for entry in net.segments[seg_id].usage:
            if rng.random() < block_prob:
                value = rng.choice([0.0, 0.0, 0.3, 0.5, 0.8])
                state.add_contribution(Contribution(
                    contrib_id=f"blk{i}", kind="factor",
                    targets=frozenset({(seg_id, entry.mode_id)}),
                    value=value, start=0.0, end=float("inf"),
                ))
                i += 1
    return state


def random_position(rng: random.Random, net: MultiLayerNetwork) -> DevicePosition:
    if rng.random() < 0.6:
        return DevicePosition(node=rng.choice(sorted(net.nodes)))
    seg_id = rng.choice(sorted(net.segments))
    seg = net.segments[seg_id]
    return DevicePosition(segment=seg_id, offset=rng.uniform(0, seg.length))


def random_devices(rng: random.Random, net: MultiLayerNetwork,
                   max_devices: int = 10) -> list[EdgeDevice]:
    modes = sorted(net.modes)
    segments = sorted(net.segments)
    devices = []
    n = rng.randint(1, max_devices)
    n_rsu = rng.randint(0, min(3, n))
    for i in range(n):
        if i < n_rsu:
            devices.append(EdgeDevice(
                device_id=f"rsu{i}", role="roadside-unit",
                position=random_position(rng, net),
                comm_range=float(rng.randint(0, 60) * 100),
            ))
            continue
        role = rng.choice(["vehicle-obu", "traveler-app", "stop-display",
                           "signal-controller", "nest-controller"])
        mode = rng.choice(modes) if rng.random() < 0.7 else None
        planned = None
        if role in ("vehicle-obu", "traveler-app") and rng.random() < 0.6:
            k = rng.randint(1, 4)
            t = float(rng.randint(0, 600))
            legs = []
            for _ in range(k):
                t += float(rng.randint(30, 400))
                legs.append((rng.choice(segments), t))
            planned = tuple(legs)
        devices.append(EdgeDevice(
            device_id=f"d{i}", role=role,
            position=random_position(rng, net),
            comm_range=float(rng.randint(0, 30) * 100),
            planned_route=planned,
            mode=mode,
            destination=rng.choice(sorted(net.nodes)) if rng.random() < 0.3 else None,
        ))
    return devices


def random_topology(rng: random.Random, devices: list[EdgeDevice]) -> RsuTopology:
    rsus = sorted(d.device_id for d in devices if d.role == "roadside-unit")
    adjacency: dict[str, set[str]] = {}
    for i in range(1, len(rsus)):
        j = rng.randrange(i)
        adjacency.setdefault(rsus[i], set()).add(rsus[j])
        adjacency.setdefault(rsus[j], set()).add(rsus[i])
    if rsus and rng.random() < 0.3:
        a, b = rng.sample(rsus, 2) if len(rsus) >= 2 else (rsus[0], rsus[0])
        if a != b:
            adjacency.setdefault(a, set()).add(b)
            adjacency.setdefault(b, set()).add(a)
    return RsuTopology(
        adjacency={k: frozenset(v) for k, v in adjacency.items()},
        max_hops=rng.randint(1, 8),
    )


def random_warning(rng: random.Random, net: MultiLayerNetwork) -> WarningMessage:
    segs = rng.sample(sorted(net.segments), rng.randint(1, min(3, len(net.segments))))
    entries = []
    for seg_id in sorted(segs):
        seg = net.segments[seg_id]
        all_modes = sorted(e.mode_id for e in seg.usage)
        k = rng.randint(1, len(all_modes))
        entries.append(AffectedEntry(
            network_id=seg.network_id,
            segment_id=seg_id,
            seg_class=seg.seg_class,
            modes=tuple(sorted(rng.sample(all_modes, k))),
        ))
    issue = rng.randint(0, 1000)
    return WarningMessage(
        warning_id=f"w{rng.randint(0, 999)}",
        event_id=f"e{rng.randint(0, 999)}",
        kind=rng.choice(["D1", "D2", "D4", "D8", "D9"]),
        revision=0,
        detail="basic",
        issue_time=issue,
        estimated_end=issue + rng.randint(60, 7200),
        severity=SeverityMeasure(capacity_reduction=round(rng.uniform(0, 1), 4)),
        affected=tuple(entries),
        case_specific={},
    )


DISTURBANCE_KIND_POOL = ["D1", "D2", "D3", "D4", "D5", "D6", "D7", "D8", "D9", "EV"]
SOURCE_KIND_POOL = ["user-app", "cits-v2i", "traffic-info-center", "rescue-dispatch",
                    "video-ai", "tf-sensors", "wz-registry", "pt-dispatch"]


def random_scenario_dict(rng: random.Random, max_nodes: int = 8,
                         max_events: int = 2, max_travelers: int = 6) -> dict:
    """A valid random scenario exercising the full pipeline."""
    netspec = random_network_spec(rng, max_nodes=max_nodes, max_modes=2,
                                  max_extra_segments=4)
    nodes = netspec["nodes"]
    segments = [s["segment_id"] for s in netspec["segments"]]
    end_time = 4 * 3600.0

    events = []
    for i in range(rng.randint(0, max_events)):
        kind = rng.choice(DISTURBANCE_KIND_POOL)
        start = float(rng.randint(0, 1800))
        estimated = float(rng.randint(300, 3600))
        true = estimated if rng.random() < 0.5 else float(rng.randint(300, 3600))
        segs = rng.sample(segments, rng.randint(1, min(2, len(segments))))
        severity = {}
        roll = rng.random()
        if roll < 0.7:
            severity["capacity_reduction"] = rng.choice([0.3, 0.5, 1.0, 1.0])
        elif roll < 0.85:
            severity["severity_index"] = rng.randint(1, 5)
        else:
            severity["displaced_volume"] = float(rng.randint(10, 500))
        specifics = {}
        if kind == "D3" and rng.random() < 0.7:
            specifics["details_at"] = start + float(rng.randint(60, 1200))
            specifics["registered_duration"] = min(true, estimated)
        if rng.random() < 0.3:
            specifics["reserved_lane_hit"] = True
        events.append({
            "event_id": f"ev{i}", "kind": kind, "segments": segs,
            "nodes": rng.sample(nodes, rng.randint(0, 1)),
            "start": start, "estimated_duration": estimated,
            "true_duration": true, "severity": severity,
            "specifics": specifics,
        })

    sources = []
    for _ in range(rng.randint(0, 3)):
        kinds = rng.sample(DISTURBANCE_KIND_POOL, rng.randint(1, 6))
        lo = float(rng.randint(0, 120))
        sources.append({
            "source_kind": rng.choice(SOURCE_KIND_POOL),
            "applicable_kinds": kinds,
            "detect_probability": rng.choice([0.0, 0.5, 0.9, 1.0]),
            "latency_min": lo,
            "latency_max": lo + float(rng.randint(0, 300)),
        })

    devices = []
    n_rsu = rng.randint(0, 2)
    for i in range(n_rsu):
        devices.append({
            "device_id": f"rsu{i}", "role": "roadside-unit",
            "position": {"node": rng.choice(nodes)},
            "comm_range": 100000.0,
        })
    rsu_links = []
    if n_rsu == 2:
        rsu_links.append(["rsu0", "rsu1"])
    modes = [m["mode_id"] for m in netspec["modes"]]
    for i in range(rng.randint(1, max_travelers)):
        origin, dest = rng.sample(nodes, 2)
        devices.append({
            "device_id": f"tv{i}", "role": "traveler-app",
            "position": {"node": origin}, "comm_range": 1000.0,
            "trip": {"origin": origin, "dest": dest,
                     "depart": float(rng.randint(0, 2400)),
                     "prefs": {"allowed_modes": modes}},
        })
    if rng.random() < 0.4:
        devices.append({"device_id": "sd0", "role": "stop-display",
                        "position": {"node": rng.choice(nodes)}})

    demand = {"trips": [], "arrivals": [], "ev_modifiers": []}
    if rng.random() < 0.4:
        origin, dest = rng.sample(nodes, 2)
        demand["trips"].append({
            "origin": origin, "dest": dest,
            "depart": float(rng.randint(0, 2400)),
            "count": rng.randint(1, 2),
            "prefs": {"allowed_modes": modes},
        })
    ev_ids = [e["event_id"] for e in events if e["kind"] == "EV"]
    if ev_ids and rng.random() < 0.7:
        origin, dest = rng.sample(nodes, 2)
        demand["arrivals"].append({
            "origin": origin, "dest": dest, "rate_per_hour": 8.0,
            "start": 0.0, "end": 3600.0, "prefs": {"allowed_modes": modes},
        })
        demand["ev_modifiers"].append({
            "event_id": ev_ids[0], "multiplier": rng.choice([0.5, 2.0]),
            "nodes": [origin],
        })

    return {
        "seed": rng.randint(0, 2**31),
        "end_time": end_time,
        "network": netspec,
        "demand": demand,
        "disturbances": events,
        "detection_sources": sources,
        "devices": devices,
        "policies": {"rsu_links": rsu_links, "pt_routes": [], "defaults": {}},
    }
