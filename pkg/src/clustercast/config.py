"""Experiment configuration: a versioned JSON document.

Top-level keys:

    version    schema version, currently 1 (required)
    topology   {"af": <graph spec>, "cf_size": <int>}  (required)
    mode       "bid" | "snr" | "dnr"
    seed       integer fed to the workload generator
    workload   generated-workload parameters (see WorkloadSpec)
    explicit   hand-written subscribers/publishers for fixture scenarios
    congestion {"threshold", "window", "overrides": [{"link", "force_overloaded", "q_len"}]}
    links      {"latency", "service_rate"}
    costs      {"handling_delay", "match_cost"}
    limits     {"max_events"}
    scenario   sweep grid description (used by the sweep command only)

A graph spec is {"generator": "path|star|complete|tree", ...},
{"vertices": [...], "edges": [...]}, or {"file": "relative/path"} pointing
at a graph text file.  Broker and link references use the printed forms
"(region,cluster)" and "(src)->(dst)".
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

from .content import parse_attributes, parse_filters
from .graphs import Graph, GraphError, graph_from_dict, parse_graph_text
from .overlay import ClusteredOverlay, LinkRef, OverlayError, build_overlay_from_size, parse_broker, parse_link
from .simulator import CongestionParams, CostParams, LinkParams, RoutingMode, RunResult, run_simulation
from .workload import BurstSpec, PublishEvent, SubscribeEvent, WorkloadError, WorkloadSpec, generate_workload


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending key."""


@dataclass(frozen=True)
class LoadOverride:
    link_text: str
    force_overloaded: bool = False
    q_len: int = 0


@dataclass
class ExperimentConfig:
    acyclic_factor: Graph
    cluster_count: int
    mode: RoutingMode = RoutingMode.STATIC
    seed: int = 0
    workload: WorkloadSpec | None = None
    explicit: dict | None = None
    congestion: CongestionParams = CongestionParams()
    overrides: tuple[LoadOverride, ...] = ()
    links: LinkParams = LinkParams()
    costs: CostParams = CostParams()
    max_events: int = 10 ** 8
    scenario: dict | None = None
    source: str = "<inline>"

    def build_overlay(self) -> ClusteredOverlay:
        try:
            return build_overlay_from_size(self.acyclic_factor, self.cluster_count)
        except (GraphError, OverlayError) as exc:
            raise ConfigError(f"{self.source}: topology: {exc}") from exc

    def build_events(self, overlay: ClusteredOverlay) -> list:
        if self.explicit is not None:
            return _explicit_events(self.explicit, overlay, self.source)
        if self.workload is not None:
            try:
                return generate_workload(self.workload, overlay, self.seed)
            except WorkloadError as exc:
                raise ConfigError(f"{self.source}: workload: {exc}") from exc
        return []

    def resolve_overrides(self, overlay: ClusteredOverlay):
        forced = set()
        bias: dict[LinkRef, int] = {}
        for ov in self.overrides:
            try:
                link = parse_link(ov.link_text, overlay)
            except OverlayError as exc:
                raise ConfigError(f"{self.source}: congestion.overrides: {exc}") from exc
            if ov.force_overloaded:
                forced.add(link)
            if ov.q_len:
                bias[link] = bias.get(link, 0) + ov.q_len
        return frozenset(forced), bias


def execute(config: ExperimentConfig, *, mode: RoutingMode | None = None,
            seed: int | None = None, trace: bool = False) -> RunResult:
    """Build the overlay and run the configured experiment once."""
    cfg = config
    if mode is not None or seed is not None:
        cfg = dataclasses.replace(config,
                                  mode=mode if mode is not None else config.mode,
                                  seed=seed if seed is not None else config.seed)
    overlay = cfg.build_overlay()
    events = cfg.build_events(overlay)
    forced, bias = cfg.resolve_overrides(overlay)
    return run_simulation(
        overlay, cfg.mode, events,
        link_params=cfg.links, congestion=cfg.congestion, costs=cfg.costs,
        forced_overloaded=forced, queue_bias=bias,
        max_events=cfg.max_events, trace=trace, seed=cfg.seed)


# ---- parsing ----

def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw, source=path, base_dir=os.path.dirname(os.path.abspath(path)))


def _expect_mapping(value, path: str, source: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{source}: {path}: expected an object")
    return value


def _check_keys(mapping: dict, allowed: set[str], path: str, source: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{source}: {path}: unknown key {key!r} "
                              f"(allowed: {', '.join(sorted(allowed))})")


def _get_int(mapping: dict, key: str, default, path: str, source: str, *, minimum=None):
    value = mapping.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{source}: {path}.{key}: expected an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{source}: {path}.{key}: must be >= {minimum}")
    return value


def _get_number(mapping: dict, key: str, default, path: str, source: str):
    value = mapping.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{source}: {path}.{key}: expected a number")
    return value


def config_from_dict(raw: dict, *, source: str = "<inline>",
                     base_dir: str = ".") -> ExperimentConfig:
    raw = _expect_mapping(raw, "config", source)
    _check_keys(raw, {"version", "topology", "mode", "seed", "workload", "explicit",
                      "congestion", "links", "costs", "limits", "scenario"},
                "config", source)
    if raw.get("version") != 1:
        raise ConfigError(f"{source}: version: expected 1, got {raw.get('version')!r}")

    topo = _expect_mapping(raw.get("topology"), "topology", source)
    _check_keys(topo, {"af", "cf_size"}, "topology", source)
    af_spec = _expect_mapping(topo.get("af"), "topology.af", source)
    try:
        if "file" in af_spec:
            file_path = os.path.join(base_dir, af_spec["file"])
            with open(file_path) as fh:
                af = parse_graph_text(fh.read())
        else:
            af = graph_from_dict(af_spec)
    except (GraphError, OSError) as exc:
        raise ConfigError(f"{source}: topology.af: {exc}") from exc
    if "cf_size" not in topo:
        raise ConfigError(f"{source}: topology.cf_size: required")
    cluster_count = _get_int(topo, "cf_size", None, "topology", source, minimum=1)

    mode_token = raw.get("mode", "snr")
    try:
        mode = RoutingMode(mode_token)
    except ValueError:
        raise ConfigError(f"{source}: mode: expected one of bid, snr, dnr; "
                          f"got {mode_token!r}") from None

    seed = _get_int(raw, "seed", 0, "config", source)

    workload = None
    if "workload" in raw:
        workload = _workload_from_dict(_expect_mapping(raw["workload"], "workload", source),
                                       source)
    explicit = None
    if "explicit" in raw:
        explicit = _expect_mapping(raw["explicit"], "explicit", source)
        _check_keys(explicit, {"subscribers", "publishers"}, "explicit", source)
        if workload is not None:
            raise ConfigError(f"{source}: config: 'workload' and 'explicit' are exclusive")

    cong_raw = _expect_mapping(raw.get("congestion", {}), "congestion", source)
    _check_keys(cong_raw, {"threshold", "window", "overrides"}, "congestion", source)
    congestion = CongestionParams(
        threshold=_get_number(cong_raw, "threshold", 10.0, "congestion", source),
        window=_get_int(cong_raw, "window", 50, "congestion", source, minimum=1))
    overrides = []
    for i, entry in enumerate(cong_raw.get("overrides", [])):
        entry = _expect_mapping(entry, f"congestion.overrides[{i}]", source)
        _check_keys(entry, {"link", "force_overloaded", "q_len"},
                    f"congestion.overrides[{i}]", source)
        if "link" not in entry or not isinstance(entry["link"], str):
            raise ConfigError(f"{source}: congestion.overrides[{i}].link: required string")
        overrides.append(LoadOverride(
            link_text=entry["link"],
            force_overloaded=bool(entry.get("force_overloaded", False)),
            q_len=_get_int(entry, "q_len", 0, f"congestion.overrides[{i}]", source, minimum=0)))

    links_raw = _expect_mapping(raw.get("links", {}), "links", source)
    _check_keys(links_raw, {"latency", "service_rate"}, "links", source)
    links = LinkParams(
        latency=_get_int(links_raw, "latency", 1, "links", source, minimum=0),
        service_rate=_get_number(links_raw, "service_rate", 1.0, "links", source))
    try:
        links.slots()
    except ValueError as exc:
        raise ConfigError(f"{source}: links.service_rate: {exc}") from exc

    costs_raw = _expect_mapping(raw.get("costs", {}), "costs", source)
    _check_keys(costs_raw, {"handling_delay", "match_cost"}, "costs", source)
    costs = CostParams(
        handling_delay=_get_int(costs_raw, "handling_delay", 0, "costs", source, minimum=0),
        match_cost=_get_int(costs_raw, "match_cost", 0, "costs", source, minimum=0))

    limits_raw = _expect_mapping(raw.get("limits", {}), "limits", source)
    _check_keys(limits_raw, {"max_events"}, "limits", source)
    max_events = _get_int(limits_raw, "max_events", 10 ** 8, "limits", source, minimum=1)

    scenario = raw.get("scenario")
    if scenario is not None:
        scenario = _expect_mapping(scenario, "scenario", source)

    return ExperimentConfig(
        acyclic_factor=af, cluster_count=cluster_count, mode=mode, seed=seed,
        workload=workload, explicit=explicit, congestion=congestion,
        overrides=tuple(overrides), links=links, costs=costs,
        max_events=max_events, scenario=scenario, source=source)


def _workload_from_dict(raw: dict, source: str) -> WorkloadSpec:
    _check_keys(raw, {"subscribers", "publishers", "notifications_per_publisher",
                      "rate_npm", "selectivity", "symbol_universe", "sub_spacing",
                      "publish_start", "barrier_margin", "burst"}, "workload", source)
    burst = None
    if "burst" in raw and raw["burst"] is not None:
        braw = _expect_mapping(raw["burst"], "workload.burst", source)
        _check_keys(braw, {"rate_npm", "count", "fraction", "start_offset"},
                    "workload.burst", source)
        burst = BurstSpec(
            rate_npm=_get_int(braw, "rate_npm", 1000, "workload.burst", source, minimum=1),
            count=_get_int(braw, "count", 1000, "workload.burst", source, minimum=1),
            fraction=_get_number(braw, "fraction", 0.1, "workload.burst", source),
            start_offset=_get_int(braw, "start_offset", 0, "workload.burst", source, minimum=0))
    publish_start = raw.get("publish_start")
    if publish_start is not None and (isinstance(publish_start, bool)
                                      or not isinstance(publish_start, int)):
        raise ConfigError(f"{source}: workload.publish_start: expected an integer")
    spec = WorkloadSpec(
        subscribers=_get_int(raw, "subscribers", 0, "workload", source, minimum=0),
        publishers=_get_int(raw, "publishers", 0, "workload", source, minimum=0),
        notifications_per_publisher=_get_int(raw, "notifications_per_publisher", 0,
                                             "workload", source, minimum=0),
        rate_npm=_get_int(raw, "rate_npm", 60, "workload", source, minimum=1),
        selectivity=_get_number(raw, "selectivity", 0.02, "workload", source),
        symbol_universe=_get_int(raw, "symbol_universe", 500, "workload", source, minimum=1),
        sub_spacing=_get_int(raw, "sub_spacing", 2, "workload", source, minimum=0),
        publish_start=publish_start,
        barrier_margin=_get_int(raw, "barrier_margin", 100, "workload", source, minimum=0),
        burst=burst)
    try:
        spec.pool_size()
    except WorkloadError as exc:
        raise ConfigError(f"{source}: workload.selectivity: {exc}") from exc
    return spec


def _explicit_events(raw: dict, overlay: ClusteredOverlay, source: str) -> list:
    events = []
    for i, entry in enumerate(raw.get("subscribers", [])):
        entry = _expect_mapping(entry, f"explicit.subscribers[{i}]", source)
        _check_keys(entry, {"client", "broker", "filters", "tick"},
                    f"explicit.subscribers[{i}]", source)
        try:
            broker = parse_broker(entry["broker"], overlay)
            predicates = parse_filters(entry["filters"])
        except (KeyError, ValueError, OverlayError) as exc:
            raise ConfigError(f"{source}: explicit.subscribers[{i}]: {exc}") from exc
        events.append(SubscribeEvent(int(entry.get("tick", 0)),
                                     str(entry.get("client", f"S{i + 1}")),
                                     broker, predicates))
    for i, entry in enumerate(raw.get("publishers", [])):
        entry = _expect_mapping(entry, f"explicit.publishers[{i}]", source)
        _check_keys(entry, {"client", "broker", "messages"},
                    f"explicit.publishers[{i}]", source)
        client = str(entry.get("client", f"P{i + 1}"))
        try:
            broker = parse_broker(entry["broker"], overlay)
        except (KeyError, OverlayError) as exc:
            raise ConfigError(f"{source}: explicit.publishers[{i}]: {exc}") from exc
        for j, msg in enumerate(entry.get("messages", [])):
            msg = _expect_mapping(msg, f"explicit.publishers[{i}].messages[{j}]", source)
            _check_keys(msg, {"tick", "attributes"},
                        f"explicit.publishers[{i}].messages[{j}]", source)
            try:
                attrs = parse_attributes(msg["attributes"])
            except (KeyError, ValueError) as exc:
                raise ConfigError(
                    f"{source}: explicit.publishers[{i}].messages[{j}]: {exc}") from exc
            events.append(PublishEvent(int(msg.get("tick", 0)), client, broker,
                                       f"{client}#{j + 1}", attrs))
    events.sort(key=lambda ev: ev.tick)
    return events


# ---- sweep scenarios ----

def expand_scenario(config: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    """Expand the scenario grid into named single-run configurations."""
    if config.scenario is None:
        raise ConfigError(f"{config.source}: scenario: required for sweeps")
    sc = dict(config.scenario)
    kind = sc.pop("kind", None)
    modes = sc.pop("modes", [config.mode.value])
    if not isinstance(modes, list) or not modes:
        raise ConfigError(f"{config.source}: scenario.modes: expected a non-empty list")
    try:
        modes = [RoutingMode(m) for m in modes]
    except ValueError as exc:
        raise ConfigError(f"{config.source}: scenario.modes: {exc}") from exc

    if config.workload is None:
        raise ConfigError(f"{config.source}: scenario: needs a generated workload")
    points: list[tuple[str, ExperimentConfig]] = []

    def variant(name: str, mode: RoutingMode, **workload_changes):
        wl = dataclasses.replace(config.workload, **workload_changes)
        cfg = dataclasses.replace(config, workload=wl, mode=mode, scenario=None)
        points.append((f"{name}-{mode.value}", cfg))

    if kind == "subscriber-scalability":
        counts = sc.pop("subscribers", None)
        if not isinstance(counts, list) or not counts:
            raise ConfigError(f"{config.source}: scenario.subscribers: expected a non-empty list")
        for n in counts:
            for mode in modes:
                variant(f"subs{n}", mode, subscribers=int(n))
    elif kind == "publisher-scalability":
        counts = sc.pop("publishers", None)
        if not isinstance(counts, list) or not counts:
            raise ConfigError(f"{config.source}: scenario.publishers: expected a non-empty list")
        for n in counts:
            for mode in modes:
                variant(f"pubs{n}", mode, publishers=int(n))
    elif kind == "stability":
        rates = sc.pop("burst_rates", None)
        if not isinstance(rates, list) or not rates:
            raise ConfigError(f"{config.source}: scenario.burst_rates: expected a non-empty list")
        if config.workload.burst is None:
            raise ConfigError(f"{config.source}: scenario: stability needs workload.burst")
        for rate in rates:
            for mode in modes:
                burst = dataclasses.replace(config.workload.burst, rate_npm=int(rate))
                variant(f"burst{rate}", mode, burst=burst)
    else:
        raise ConfigError(f"{config.source}: scenario.kind: expected subscriber-scalability, "
                          f"publisher-scalability or stability; got {kind!r}")
    if sc:
        raise ConfigError(f"{config.source}: scenario: unknown key {sorted(sc)[0]!r}")
    return points
