"""Bundled demo scenario: a two-zone toy city.

Zones A (west) and B (east) are linked by a single road bridge and a
parallel metro line between the hubs h1 and h2.  A full road blockage on
the bridge forces road traffic onto the southern corridor and the metro.
Travelers warned in time reroute before wasting the trip to the bridge;
unwarned ones discover the blockage at the bridge approach and backtrack.

Geometry::

    a1 ----R1---- n1 ====R2==== n2 ----R3---- b1        (road, R2 blocked)
     \\                                        /
      R4/T1/C1/P1 -- h1 ~~~~MS1~~~~ h2 -- R5         (south: road+tram+cycle,
                        (metro)       \\- TR1 - b1     metro between hubs)

The default network covers all eight mode categories over six
infrastructure networks and doubles as the bundled network description.
"""

from __future__ import annotations

import json

ROAD_MODES = ["M3", "M4", "M5"]


def _road_usage(fft: float) -> list[dict]:
    caps = {"M3": 1200.0, "M4": 800.0, "M5": 300.0}
    return [
        {"mode_id": m, "direction": "both", "base_capacity": caps[m],
         "free_flow_time": fft}
        for m in ROAD_MODES
    ]


def default_network_spec() -> dict:
    """Eight modes over six networks with shared southern street corridor."""
    return {
        "modes": [
            {"mode_id": "M1", "name": "walk", "category": "walk",
             "agile": True, "maas_member": False},
            {"mode_id": "M2", "name": "cycle incl. bike share", "category": "cycle",
             "agile": True, "maas_member": True},
            {"mode_id": "M3", "name": "private car", "category": "private-car",
             "agile": False, "maas_member": False},
            {"mode_id": "M4", "name": "CAV / taxi", "category": "cav-taxi",
             "agile": False, "maas_member": True},
            {"mode_id": "M5", "name": "bus", "category": "bus",
             "agile": False, "maas_member": True},
            {"mode_id": "M6", "name": "tram", "category": "tram",
             "agile": False, "maas_member": True},
            {"mode_id": "M7", "name": "metro", "category": "metro",
             "agile": False, "maas_member": True},
            {"mode_id": "M8", "name": "train", "category": "train",
             "agile": False, "maas_member": True},
        ],
        "networks": [
            {"network_id": "N1", "name": "pedestrian"},
            {"network_id": "N2", "name": "cycling"},
            {"network_id": "N3", "name": "road"},
            {"network_id": "N4", "name": "tram rail"},
            {"network_id": "N5", "name": "metro rail"},
            {"network_id": "N6", "name": "train rail"},
        ],
        "usage_matrix": [
            ["M1", "N1"], ["M1", "N3"],
            ["M2", "N2"], ["M2", "N3"],
            ["M3", "N3"], ["M4", "N3"], ["M5", "N3"],
            ["M6", "N4"], ["M7", "N5"], ["M8", "N6"],
        ],
        "nodes": ["a1", "n1", "n2", "b1", "h1", "h2"],
        "segments": [
            {"segment_id": "R1", "network_id": "N3", "from_node": "a1",
             "to_node": "n1", "length": 2000, "class": "major",
             "usage": _road_usage(200)},
            {"segment_id": "R2", "network_id": "N3", "from_node": "n1",
             "to_node": "n2", "length": 3000, "class": "critical",
             "usage": _road_usage(300)},
            {"segment_id": "R3", "network_id": "N3", "from_node": "n2",
             "to_node": "b1", "length": 2000, "class": "major",
             "usage": _road_usage(200)},
            {"segment_id": "R4", "network_id": "N3", "from_node": "a1",
             "to_node": "h1", "length": 2500, "class": "inferior",
             "shared_group": "south-street", "usage": _road_usage(250)},
            {"segment_id": "R5", "network_id": "N3", "from_node": "h2",
             "to_node": "b1", "length": 2500, "class": "inferior",
             "usage": _road_usage(250)},
            {"segment_id": "C1", "network_id": "N2", "from_node": "a1",
             "to_node": "h1", "length": 2500, "class": "minor",
             "shared_group": "south-street",
             "usage": [{"mode_id": "M2", "direction": "both",
                        "base_capacity": 400, "free_flow_time": 600}]},
            {"segment_id": "T1", "network_id": "N4", "from_node": "a1",
             "to_node": "h1", "length": 2500, "class": "inferior",
             "shared_group": "south-street",
             "usage": [{"mode_id": "M6", "direction": "both",
                        "base_capacity": 200, "free_flow_time": 300}]},
            {"segment_id": "MS1", "network_id": "N5", "from_node": "h1",
             "to_node": "h2", "length": 4000, "class": "major",
             "usage": [{"mode_id": "M7", "direction": "both",
                        "base_capacity": 600, "free_flow_time": 480}]},
            {"segment_id": "TR1", "network_id": "N6", "from_node": "h2",
             "to_node": "b1", "length": 2600, "class": "inferior",
             "usage": [{"mode_id": "M8", "direction": "both",
                        "base_capacity": 400, "free_flow_time": 180}]},
            {"segment_id": "P1", "network_id": "N1", "from_node": "a1",
             "to_node": "h1", "length": 2500, "class": "minor",
             "usage": [{"mode_id": "M1", "direction": "both",
                        "base_capacity": 2000, "free_flow_time": 1800}]},
        ],
        "multimodal_nodes": [
            {"node_id": "a1",
             "attachments": [["M1", "N1"], ["M2", "N2"], ["M3", "N3"],
                             ["M4", "N3"], ["M5", "N3"], ["M6", "N4"]],
             "services": ["pt-stop", "bike-nest", "cav-pickup"]},
            {"node_id": "n1",
             "attachments": [["M3", "N3"], ["M4", "N3"], ["M5", "N3"]],
             "services": ["pt-stop"]},
            {"node_id": "n2",
             "attachments": [["M3", "N3"], ["M4", "N3"], ["M5", "N3"]],
             "services": ["pt-stop"]},
            {"node_id": "b1",
             "attachments": [["M3", "N3"], ["M4", "N3"], ["M5", "N3"],
                             ["M8", "N6"]],
             "services": ["pt-stop", "rail-station", "cav-pickup"]},
            {"node_id": "h1",
             "attachments": [["M1", "N1"], ["M2", "N2"], ["M3", "N3"],
                             ["M4", "N3"], ["M5", "N3"], ["M6", "N4"],
                             ["M7", "N5"]],
             "services": ["pt-stop", "rail-station", "bike-nest", "cav-pickup"]},
            {"node_id": "h2",
             "attachments": [["M3", "N3"], ["M4", "N3"], ["M5", "N3"],
                             ["M7", "N5"], ["M8", "N6"]],
             "services": ["pt-stop", "rail-station", "cav-pickup"]},
        ],
    }


def demo_scenario() -> dict:
    """Bridge-blockage demo used by the comparison runs and the test suite."""
    maas_prefs = {"allowed_modes": ["M4", "M7"], "transfer_penalty": 60,
                  "max_walk": 1000}
    metro_prefs = {"allowed_modes": ["M7"]}
    devices = []
    rsu_positions = {"rsu_a": "a1", "rsu_n1": "n1", "rsu_h1": "h1",
                     "rsu_h2": "h2", "rsu_b": "b1"}
    for rsu_id, node in rsu_positions.items():
        devices.append({"device_id": rsu_id, "role": "roadside-unit",
                        "position": {"node": node}, "comm_range": 4000})
    for i, depart in enumerate([300, 480, 660, 900, 1140, 1380], start=1):
        devices.append({
            "device_id": f"veh{i}", "role": "traveler-app",
            "position": {"node": "a1"}, "comm_range": 500,
            "trip": {"origin": "a1", "dest": "b1", "depart": depart,
                     "prefs": maas_prefs},
        })
    for i, depart in enumerate([700, 1000], start=1):
        devices.append({
            "device_id": f"met{i}", "role": "traveler-app",
            "position": {"node": "h1"}, "comm_range": 500,
            "trip": {"origin": "h1", "dest": "h2", "depart": depart,
                     "prefs": metro_prefs},
        })
    devices += [
        {"device_id": "sd_n1", "role": "stop-display", "position": {"node": "n1"}},
        {"device_id": "sd_n2", "role": "stop-display", "position": {"node": "n2"}},
        {"device_id": "sd_h1", "role": "stop-display", "position": {"node": "h1"}},
        {"device_id": "sc_n1", "role": "signal-controller", "position": {"node": "n1"}},
        {"device_id": "nc_a", "role": "nest-controller", "position": {"node": "a1"}},
        {"device_id": "cav1", "role": "vehicle-obu", "position": {"node": "h1"},
         "comm_range": 500, "mode": "M4"},
        {"device_id": "cav2", "role": "vehicle-obu", "position": {"node": "h2"},
         "comm_range": 500, "mode": "M4"},
        {"device_id": "cav3", "role": "vehicle-obu", "position": {"node": "a1"},
         "comm_range": 500, "mode": "M4"},
    ]
    return {
        "seed": 42,
        "end_time": 14400,
        "network": default_network_spec(),
        "demand": {
            "trips": [],
            "arrivals": [
                {"origin": "a1", "dest": "b1", "rate_per_hour": 6,
                 "start": 0, "end": 3600, "prefs": maas_prefs},
            ],
            "ev_modifiers": [],
        },
        "disturbances": [
            {"event_id": "bridge-crash", "kind": "D1", "segments": ["R2"],
             "nodes": [], "start": 600, "estimated_duration": 5400,
             "true_duration": 5400,
             "severity": {"capacity_reduction": 1.0, "lanes_affected": 2},
             "specifics": {"partial_blockage": False}},
        ],
        "detection_sources": [
            {"source_kind": "cits-v2i",
             "applicable_kinds": ["D1", "D3", "D4", "D5", "D6", "D9"],
             "detect_probability": 1.0, "latency_min": 30, "latency_max": 90},
            {"source_kind": "traffic-info-center",
             "applicable_kinds": ["D1", "D2", "D3", "D4", "D8"],
             "detect_probability": 1.0, "latency_min": 120, "latency_max": 300},
        ],
        "devices": devices,
        "policies": {
            "relevance": {
                "horizon": 1800,
                "area_radius": {"critical": 5000, "major": 2000,
                                "inferior": 800, "minor": 300},
                "include_adaptation_actors": True,
            },
            "rsu_links": [
                ["rsu_a", "rsu_n1"], ["rsu_n1", "rsu_b"],
                ["rsu_a", "rsu_h1"], ["rsu_h1", "rsu_h2"], ["rsu_h2", "rsu_b"],
            ],
            "max_hops": 8,
            "pt_routes": [
                {"route_id": "Met1", "mode_id": "M7", "stops": ["h1", "h2"],
                 "segments": ["MS1"], "headway": 600},
                {"route_id": "Tram1", "mode_id": "M6", "stops": ["a1", "h1"],
                 "segments": ["T1"], "headway": 900},
                {"route_id": "Bus1", "mode_id": "M5",
                 "stops": ["a1", "n1", "n2", "b1"],
                 "segments": ["R1", "R2", "R3"], "headway": 900},
                {"route_id": "Rail1", "mode_id": "M8", "stops": ["h2", "b1"],
                 "segments": ["TR1"], "headway": 1200},
            ],
            "defaults": {},
        },
    }


def write_demo_scenario(path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(demo_scenario(), fh, indent=2, sort_keys=False)
        fh.write("\n")
