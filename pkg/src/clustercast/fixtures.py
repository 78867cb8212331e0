"""Built-in example configurations.

Each fixture is a complete experiment config (JSON-compatible dict) that the
CLI can emit and the test suite replays:

    fig2        six-region tree x 3 clusters, topology only
    fig3        alias of fig2 (the same product overlay)
    fig6        fig3 plus four subscribers and three publishers whose
                interest sets exercise static routing and crossing dedup
    fig7-case1  3x3 overlay, one overloaded crossing (divert via a carrier)
    fig7-case2  3x3 overlay, all crossings overloaded (carrier on a tree link)
    fig7-case3  3x3 overlay, every target link overloaded (forced crossing)
    fig8        fifteen-region tree x 5 clusters (evaluation-scale topology)
    stability-desk   fig8 with a high-rate burst publisher and slow links,
                     sized for desk runs
    scalability-desk fig8 sweep over subscriber counts
"""

from __future__ import annotations

import copy

_TREE6 = {
    "vertices": ["a", "b", "c", "d", "e", "f"],
    "edges": [["a", "b"], ["b", "c"], ["d", "e"], ["e", "f"], ["b", "e"]],
}

_PATH3 = {"vertices": ["a", "b", "c"], "edges": [["a", "b"], ["b", "c"]]}

_TREE15 = {
    "vertices": ["i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x",
                 "xi", "xii", "xiii", "xiv", "xv"],
    "edges": [["i", "vi"], ["ii", "vii"], ["iii", "viii"], ["iv", "ix"], ["v", "x"],
              ["vi", "vii"], ["vii", "viii"], ["viii", "ix"], ["ix", "x"],
              ["vi", "xi"], ["vii", "xii"], ["viii", "xiii"], ["ix", "xiv"],
              ["x", "xv"]],
}

_FIG2 = {
    "version": 1,
    "topology": {"af": _TREE6, "cf_size": 3},
}

# Interest sets: P1 -> {S1,S2,S3,S4}, P2 -> {S1,S2,S4}, P3 -> {S3}.
_FIG6 = {
    "version": 1,
    "topology": {"af": _TREE6, "cf_size": 3},
    "mode": "snr",
    "explicit": {
        "subscribers": [
            {"client": "S1", "broker": "(a,0)", "filters": "src le 2", "tick": 0},
            {"client": "S2", "broker": "(f,0)", "filters": "src le 2", "tick": 2},
            {"client": "S3", "broker": "(f,1)", "filters": "src neq 2", "tick": 4},
            {"client": "S4", "broker": "(a,2)", "filters": "src le 2", "tick": 6},
        ],
        "publishers": [
            {"client": "P1", "broker": "(f,2)", "messages": [{"tick": 100, "attributes": "src=1"}]},
            {"client": "P2", "broker": "(f,1)", "messages": [{"tick": 200, "attributes": "src=2"}]},
            {"client": "P3", "broker": "(a,1)", "messages": [{"tick": 300, "attributes": "src=3"}]},
        ],
    },
}


def _case_base(subscribers, overrides):
    return {
        "version": 1,
        "topology": {"af": _PATH3, "cf_size": 3},
        "mode": "dnr",
        "explicit": {
            "subscribers": [
                {"client": client, "broker": broker, "filters": "feed eq hot", "tick": t * 2}
                for t, (client, broker) in enumerate(subscribers)
            ],
            "publishers": [
                {"client": "P1", "broker": "(b,2)",
                 "messages": [{"tick": 100, "attributes": "feed=hot"}]},
            ],
        },
        "congestion": {"threshold": 10, "window": 50, "overrides": overrides},
    }


_SPREAD = [("S1", "(c,0)"), ("S2", "(c,1)"), ("S3", "(a,2)"), ("S4", "(c,2)")]

_FIG7_CASE1 = _case_base(_SPREAD, [
    {"link": "(b,2)->(b,0)", "force_overloaded": True, "q_len": 20},
])

# the queue bias on (b,2)->(a,2) steers the carrier onto (b,2)->(c,2)
_FIG7_CASE2 = _case_base(_SPREAD, [
    {"link": "(b,2)->(b,0)", "force_overloaded": True, "q_len": 20},
    {"link": "(b,2)->(b,1)", "force_overloaded": True, "q_len": 18},
    {"link": "(b,2)->(a,2)", "q_len": 1},
])

_FIG7_CASE3 = _case_base(
    [("S1", "(a,0)"), ("S2", "(c,1)"), ("S3", "(c,2)"), ("S4", "(c,2)")], [
        {"link": "(b,2)->(c,2)", "force_overloaded": True, "q_len": 3},
        {"link": "(b,2)->(b,0)", "force_overloaded": True, "q_len": 20},
        {"link": "(b,2)->(b,1)", "force_overloaded": True, "q_len": 5},
        {"link": "(b,1)->(b,0)", "force_overloaded": True, "q_len": 7},
        {"link": "(c,1)->(c,0)", "force_overloaded": True, "q_len": 9},
    ])

_FIG8 = {
    "version": 1,
    "topology": {"af": _TREE15, "cf_size": 5},
}

_STABILITY_DESK = {
    "version": 1,
    "topology": {"af": _TREE15, "cf_size": 5},
    "mode": "dnr",
    "seed": 7,
    "workload": {
        "subscribers": 50,
        "publishers": 10,
        "notifications_per_publisher": 20,
        "rate_npm": 60,
        "selectivity": 0.02,
        "sub_spacing": 100,
        "barrier_margin": 1000,
        "burst": {"rate_npm": 1000, "count": 1000, "fraction": 0.1},
    },
    "links": {"latency": 1, "service_rate": 0.0125},
    "scenario": {"kind": "stability", "modes": ["snr", "dnr"], "burst_rates": [1000]},
}

_SCALABILITY_DESK = {
    "version": 1,
    "topology": {"af": _TREE15, "cf_size": 5},
    "mode": "snr",
    "seed": 7,
    "workload": {
        "subscribers": 100,
        "publishers": 5,
        "notifications_per_publisher": 10,
        "rate_npm": 60,
        "selectivity": 0.02,
    },
    "scenario": {"kind": "subscriber-scalability", "modes": ["bid", "snr"],
                 "subscribers": [50, 100, 200]},
}

_FIXTURES = {
    "fig2": _FIG2,
    "fig3": _FIG2,
    "fig6": _FIG6,
    "fig7-case1": _FIG7_CASE1,
    "fig7-case2": _FIG7_CASE2,
    "fig7-case3": _FIG7_CASE3,
    "fig8": _FIG8,
    "stability-desk": _STABILITY_DESK,
    "scalability-desk": _SCALABILITY_DESK,
}


def fixture_names() -> list[str]:
    return list(_FIXTURES)


def fixture_dict(name: str) -> dict:
    """Deep copy of the named fixture configuration."""
    try:
        return copy.deepcopy(_FIXTURES[name])
    except KeyError:
        known = ", ".join(_FIXTURES)
        raise KeyError(f"unknown fixture {name!r} (known: {known})") from None


def fixture_config(name: str):
    from .config import config_from_dict
    return config_from_dict(fixture_dict(name), source=f"fixture:{name}")
