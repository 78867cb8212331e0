"""Seeded workload generation: client placement, subscriptions, publications.

Subscribers and publishers are placed uniformly over the brokers.  Each
subscriber asks for one symbol drawn from an active pool sized so that a
uniformly published notification matches with the requested selectivity.
Publications start only after every subscription has been issued (the
registration barrier) and are paced by a per-publisher rate given in
notifications per minute (one tick is one millisecond).

An optional high-rate publisher emits a burst on a reserved symbol that only
a chosen fraction of subscribers asks for; those subscribers are spread
round-robin across clusters so every cluster is a target of the burst.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import NamedTuple

from .content import Operator, Predicate
from .overlay import BrokerId, ClusteredOverlay


class WorkloadError(ValueError):
    """Unsatisfiable or inconsistent workload parameters."""


class SubscribeEvent(NamedTuple):
    tick: int
    client: str
    broker: BrokerId
    predicates: tuple[Predicate, ...]


class PublishEvent(NamedTuple):
    tick: int
    client: str
    broker: BrokerId
    notif_id: str
    attributes: dict


# ten stock-feed attributes per notification
_NUMERIC_ATTRIBUTES = ("price", "volume", "open", "close", "high",
                       "low", "change", "bid_size", "ask_size")
BURST_SYMBOL = "HOT"


@dataclass(frozen=True)
class BurstSpec:
    """High-rate publisher burst on the reserved symbol."""
    rate_npm: int = 1000        # notifications per minute
    count: int = 1000
    fraction: float = 0.1       # fraction of subscribers asking for the burst
    start_offset: int = 0       # ticks after the registration barrier


@dataclass(frozen=True)
class WorkloadSpec:
    subscribers: int = 0
    publishers: int = 0
    notifications_per_publisher: int = 0
    rate_npm: int = 60
    selectivity: float = 0.02
    symbol_universe: int = 500
    sub_spacing: int = 2        # ticks between subscription issues
    publish_start: int | None = None   # absolute tick; default: after barrier
    barrier_margin: int = 100   # gap between last subscription and publishing
    burst: BurstSpec | None = None

    def pool_size(self) -> int:
        if not 0 < self.selectivity <= 1:
            raise WorkloadError(f"selectivity must be in (0, 1], got {self.selectivity}")
        pool = math.ceil(1.0 / self.selectivity)
        if pool > self.symbol_universe:
            raise WorkloadError(
                f"selectivity {self.selectivity} needs {pool} symbols but the universe "
                f"has {self.symbol_universe}; achievable range is "
                f"[{1.0 / self.symbol_universe:.6f}, 1.0]")
        return pool


def _rate_gap(rate_npm: int) -> int:
    if rate_npm < 1:
        raise WorkloadError(f"rate must be at least 1 notification per minute, got {rate_npm}")
    return max(1, round(60000.0 / rate_npm))


def _attributes(rng: random.Random, symbol: str) -> dict:
    attrs = {"symbol": symbol}
    for name in _NUMERIC_ATTRIBUTES:
        attrs[name] = rng.randint(1, 1000)
    return attrs


def generate_workload(spec: WorkloadSpec, overlay: ClusteredOverlay,
                      seed: int) -> list:
    """Deterministic event list for the given spec, topology and seed."""
    pool = spec.pool_size()
    symbols = [f"SYM{i:03d}" for i in range(pool)]
    place_rng = random.Random(f"{seed}/placement")
    content_rng = random.Random(f"{seed}/content")
    brokers = list(overlay.brokers)
    events: list = []

    burst_subscribers = 0
    if spec.burst is not None:
        if not 0 < spec.burst.fraction <= 1:
            raise WorkloadError(f"burst fraction must be in (0, 1], got {spec.burst.fraction}")
        if spec.subscribers < 1:
            raise WorkloadError("a burst publisher needs at least one subscriber")
        burst_subscribers = max(1, math.ceil(spec.burst.fraction * spec.subscribers))

    last_sub_tick = 0
    for i in range(spec.subscribers):
        tick = i * spec.sub_spacing
        last_sub_tick = tick
        client = f"S{i + 1:04d}"
        if i < burst_subscribers:
            # burst audience: one subscriber per cluster, round-robin, so the
            # burst targets every cluster
            cluster = i % overlay.cluster_count
            region = place_rng.choice(overlay.acyclic_factor.vertices)
            broker = BrokerId(region, cluster)
            predicates = (Predicate("symbol", Operator.EQ, BURST_SYMBOL),)
        else:
            broker = place_rng.choice(brokers)
            predicates = (
                Predicate("symbol", Operator.EQ, content_rng.choice(symbols)),
                Predicate("price", Operator.GT, 0),
            )
        events.append(SubscribeEvent(tick, client, broker, predicates))

    if spec.publish_start is not None:
        publish_start = spec.publish_start
        if spec.subscribers and publish_start <= last_sub_tick:
            raise WorkloadError(
                f"publish_start {publish_start} breaks the registration barrier "
                f"(last subscription at tick {last_sub_tick})")
    else:
        publish_start = last_sub_tick + spec.barrier_margin

    gap = _rate_gap(spec.rate_npm)
    for p in range(spec.publishers):
        client = f"P{p + 1:03d}"
        broker = place_rng.choice(brokers)
        for j in range(spec.notifications_per_publisher):
            tick = publish_start + j * gap
            attrs = _attributes(content_rng, content_rng.choice(symbols))
            events.append(PublishEvent(tick, client, broker, f"{client}#{j + 1}", attrs))

    if spec.burst is not None:
        burst_gap = _rate_gap(spec.burst.rate_npm)
        broker = place_rng.choice(brokers)
        start = publish_start + spec.burst.start_offset
        for j in range(spec.burst.count):
            attrs = _attributes(content_rng, BURST_SYMBOL)
            events.append(PublishEvent(start + j * burst_gap, "HRP", broker,
                                       f"HRP#{j + 1}", attrs))

    events.sort(key=lambda ev: ev.tick)   # stable: ties keep issue order
    return events


def burst_publisher_broker(events) -> BrokerId | None:
    for ev in events:
        if isinstance(ev, PublishEvent) and ev.client == "HRP":
            return ev.broker
    return None
