"""Deterministic discrete-event overlay simulator.

Time advances in integer millisecond ticks.  Every directed link owns a FIFO
output queue with a service rate (messages per tick) and a propagation
latency (ticks).  Events are ordered by (tick, priority, sequence) so that a
given configuration and seed always replays the exact same schedule; window
rollovers carry priority 0 and run before any message work at the same tick.

Congestion follows a windowed estimate: each link tracks enqueues (q_in) and
service completions (q_out) per window; at the rollover the congestion
estimate becomes (1 + q_in) / (1 + q_out), and a routing decision taken
during the next window treats the link as overloaded when

    current_queue_length * last_estimate > threshold

Client-to-broker and broker-to-client hops are charged latency but never
counted as inter-broker messages and never queue.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from .content import Notification, ProtocolViolation, RoutingTable, Subscription
from .overlay import BrokerId, ClusteredOverlay, LinkRef, OverlayError
from .routing import (
    BrokerContext,
    LinkLoadView,
    RouteResult,
    broadcast_subscription,
    flood_subscription,
    route_dynamic,
    route_flood_notification,
    route_static,
)
from .workload import PublishEvent, SubscribeEvent


class RoutingMode(Enum):
    FLOOD = "bid"     # flooding broadcast + id-list notification routing
    STATIC = "snr"    # clustered broadcast + static notification routing
    DYNAMIC = "dnr"   # clustered broadcast + load-adaptive notification routing

    def __str__(self) -> str:
        return self.value

    @property
    def clustered(self) -> bool:
        return self is not RoutingMode.FLOOD


class SimulationTimeout(RuntimeError):
    """Event budget exhausted before quiescence."""

    def __init__(self, message: str, snapshot: list[tuple[str, int]]):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass(frozen=True)
class LinkParams:
    latency: int = 1            # ticks per hop
    service_rate: float = 1.0   # messages per tick; values < 1 mean one
                                # message every round(1/rate) ticks

    def slots(self) -> tuple[int, int]:
        rate = self.service_rate
        if rate <= 0:
            raise ValueError("service_rate must be positive")
        if rate >= 1:
            if rate != int(rate):
                raise ValueError("service_rate above 1 must be an integer")
            return int(rate), 1
        return 1, max(1, round(1.0 / rate))


@dataclass(frozen=True)
class CongestionParams:
    threshold: float = 10.0     # overload threshold on queue * estimate
    window: int = 50            # ticks per estimation window


@dataclass(frozen=True)
class CostParams:
    handling_delay: int = 0     # ticks per routed message
    match_cost: int = 0         # extra ticks per table entry scanned


class Copy(NamedTuple):
    """An in-flight message instance with its hop bookkeeping."""
    payload: object
    root: str
    hops: int
    path: tuple[LinkRef, ...]


class DeliveryRecord(NamedTuple):
    message_id: str
    subscriber: str
    issue_tick: int
    delivery_tick: int
    hops: int
    path: tuple[LinkRef, ...]


class LinkWindowRow(NamedTuple):
    window_start: int
    link: LinkRef
    q_in: int
    q_out: int
    q_len: int
    estimate: float
    congested: bool


@dataclass
class SubscriptionStats:
    sub_id: str
    client: str
    broker: BrokerId
    issue_tick: int
    completion_tick: int = 0
    stores: int = 0
    duplicates: int = 0
    depth: int = 0


@dataclass
class _LinkState:
    capacity: int
    interval: int
    fifo: list = field(default_factory=list)
    q_len: int = 0
    q_in: int = 0
    q_out: int = 0
    last_estimate: float = 1.0
    congested: bool = False
    head_tick: int = 0
    head_used: int = 0
    fifo_head: int = 0

    def next_departure(self, now: int) -> int:
        if self.head_tick < now:
            self.head_tick = now
            self.head_used = 0
        dep = self.head_tick
        self.head_used += 1
        if self.head_used >= self.capacity:
            self.head_tick = dep + self.interval
            self.head_used = 0
        return dep

    def pop(self) -> Copy:
        item = self.fifo[self.fifo_head]
        self.fifo_head += 1
        if self.fifo_head > 64 and self.fifo_head * 2 > len(self.fifo):
            del self.fifo[: self.fifo_head]
            self.fifo_head = 0
        return item


class _LiveLoadView(LinkLoadView):
    """Routing-decision view over simulated queues, with test overrides."""

    def __init__(self, states, threshold, forced, bias):
        self._states = states
        self._threshold = threshold
        self._forced = forced
        self._bias = bias

    def queue_len(self, link: LinkRef) -> int:
        return self._states[link].q_len + self._bias.get(link, 0)

    def is_overloaded(self, link: LinkRef) -> bool:
        if link in self._forced:
            return True
        state = self._states[link]
        return self.queue_len(link) * state.last_estimate > self._threshold


@dataclass
class RunResult:
    mode: RoutingMode
    seed: int
    overlay: ClusteredOverlay
    deliveries: list[DeliveryRecord]
    sub_stats: dict[str, SubscriptionStats]
    tables: dict[BrokerId, RoutingTable]
    im_total: int
    im_by_root: dict[str, int]
    link_rows: list[LinkWindowRow]
    trace_lines: list[str]
    notification_count: int
    matching_invocations: int
    duplicate_receptions: int
    congested_windows: int
    max_queue_len: int
    quiescence_tick: int
    event_count: int

    @property
    def subscription_ims(self) -> int:
        return sum(self.im_by_root.get(s, 0) for s in self.sub_stats)

    @property
    def notification_ims(self) -> int:
        return self.im_total - self.subscription_ims


# event codes; rolls run first within a tick
_ROLL, _CLIENT, _ARRIVE, _DEPART, _ENQUEUE = range(5)


class Simulation:
    def __init__(self, overlay: ClusteredOverlay, mode: RoutingMode, events,
                 *, link_params: LinkParams = LinkParams(),
                 congestion: CongestionParams = CongestionParams(),
                 costs: CostParams = CostParams(),
                 forced_overloaded: frozenset[LinkRef] = frozenset(),
                 queue_bias: dict[LinkRef, int] | None = None,
                 max_events: int = 10 ** 8,
                 trace: bool = False,
                 seed: int = 0):
        self.overlay = overlay
        self.mode = mode
        self.events = list(events)
        self.latency = link_params.latency
        if self.latency < 0:
            raise ValueError("latency must be non-negative")
        capacity, interval = link_params.slots()
        self.congestion = congestion
        if congestion.window < 1:
            raise ValueError("congestion window must be at least one tick")
        self.costs = costs
        self.max_events = max_events
        self.trace = trace
        self.seed = seed

        self.states = {l: _LinkState(capacity, interval) for l in overlay.directed_links}
        self.loads = _LiveLoadView(self.states, congestion.threshold,
                                   frozenset(forced_overloaded), dict(queue_bias or {}))
        self.tables: dict[BrokerId, RoutingTable] = {}
        self.contexts: dict[BrokerId, BrokerContext] = {}
        for b in overlay.brokers:
            table = RoutingTable(b, mode.clustered)
            self.tables[b] = table
            self.contexts[b] = BrokerContext(
                broker=b,
                kind=overlay.classify_broker(b),
                cluster_count=overlay.cluster_count,
                primary=overlay.primary_neighbours(b),
                secondary=overlay.secondary_neighbours(b),
                table=table,
                loads=self.loads,
                sort_key=overlay.broker_key,
            )

        self._heap: list = []
        self._seq = 0
        self._pending = 0          # non-roll events still scheduled
        self._roll_scheduled = False
        self._link_order = {l: i for i, l in enumerate(overlay.directed_links)}
        self._sub_seq: dict[BrokerId, int] = {}
        self._active_links: set[LinkRef] = set()

        self.deliveries: list[DeliveryRecord] = []
        self.sub_stats: dict[str, SubscriptionStats] = {}
        self.im_by_root: dict[str, int] = {}
        self.im_total = 0
        self.link_rows: list[LinkWindowRow] = []
        self.trace_lines: list[str] = []
        self.notification_count = 0
        self.duplicate_receptions = 0
        self.congested_windows = 0
        self.max_queue_len = 0
        self.quiescence_tick = 0
        self.processed = 0

    # ---- scheduling ----

    def _schedule(self, tick: int, code: int, data) -> None:
        prio = 0 if code == _ROLL else 1
        self._seq += 1
        heapq.heappush(self._heap, (tick, prio, self._seq, code, data))
        if code != _ROLL:
            self._pending += 1

    def _ensure_roll(self, now: int) -> None:
        if not self._roll_scheduled:
            window = self.congestion.window
            nxt = (now // window + 1) * window
            self._schedule(nxt, _ROLL, None)
            self._roll_scheduled = True

    # ---- run loop ----

    def run(self) -> RunResult:
        for ev in self.events:
            if not isinstance(ev, (SubscribeEvent, PublishEvent)):
                raise TypeError(f"unknown workload event {ev!r}")
            if ev.broker not in self.overlay.broker_set:
                raise OverlayError(f"workload references unknown broker {ev.broker}")
            self._schedule(ev.tick, _CLIENT, ev)

        while self._heap:
            tick, prio, _seq, code, data = heapq.heappop(self._heap)
            self.processed += 1
            if self.processed > self.max_events:
                raise SimulationTimeout(
                    f"no quiescence within {self.max_events} events "
                    f"(stopped at tick {tick})", self._queue_snapshot())
            if code == _ROLL:
                self._roll(tick)
                continue
            self._pending -= 1
            self.quiescence_tick = max(self.quiescence_tick, tick)
            if code == _CLIENT:
                self._ensure_roll(tick)
                self._client(tick, data)
            elif code == _ARRIVE:
                broker, copy, via = data
                self._arrive(tick, broker, copy, via)
            elif code == _DEPART:
                self._depart(tick, data)
            else:
                link, copy = data
                self._enqueue(tick, link, copy)
        return self._result()

    def _queue_snapshot(self) -> list[tuple[str, int]]:
        busiest = sorted(self.states.items(),
                         key=lambda kv: (-kv[1].q_len, self._link_order[kv[0]]))
        return [(str(l), s.q_len) for l, s in busiest[:10] if s.q_len > 0]

    # ---- handlers ----

    def _client(self, tick: int, ev) -> None:
        if isinstance(ev, SubscribeEvent):
            seq = self._sub_seq.get(ev.broker, 0) + 1
            self._sub_seq[ev.broker] = seq
            sub_id = f"{ev.broker}#{seq}"
            sub = Subscription(sub_id, ev.client, ev.predicates, host_flag=True)
            self.sub_stats[sub_id] = SubscriptionStats(sub_id, ev.client, ev.broker, tick)
            copy = Copy(sub, sub_id, 0, ())
        else:
            self.notification_count += 1
            notif = Notification(ev.notif_id, ev.client, ev.attributes,
                                 issue_tick=tick, host_flag=True)
            copy = Copy(notif, ev.notif_id, 0, ())
        # client-to-broker hop: latency only, no queue, no message count
        self._schedule(tick + self.latency, _ARRIVE, (ev.broker, copy, None))

    def _arrive(self, tick: int, broker: BrokerId, copy: Copy, via) -> None:
        ctx = self.contexts[broker]
        payload = copy.payload
        before = ctx.table.match_calls
        if isinstance(payload, Subscription):
            if self.mode.clustered:
                result = broadcast_subscription(ctx, payload, via)
            else:
                result = flood_subscription(ctx, payload, via)
            stats = self.sub_stats[copy.root]
            if result.note == "duplicate-discarded":
                stats.duplicates += 1
                self.duplicate_receptions += 1
            else:
                stats.stores += 1
                stats.completion_tick = max(stats.completion_tick, tick)
                stats.depth = max(stats.depth, copy.hops)
        elif self.mode is RoutingMode.FLOOD:
            result = route_flood_notification(ctx, payload, via)
        elif self.mode is RoutingMode.STATIC:
            result = route_static(ctx, payload, via)
        else:
            result = route_dynamic(ctx, payload, via)

        if self.trace:
            self.trace_lines.append(_trace_line(tick, broker, payload, result))

        delay = self.costs.handling_delay
        if ctx.table.match_calls > before:
            delay += self.costs.match_cost * len(ctx.table)
        for send in result.sends:
            if send.client is not None:
                # broker-to-client hop mirrors the client hop: latency only
                self.deliveries.append(DeliveryRecord(
                    payload.id, send.client, payload.issue_tick,
                    tick + delay + self.latency, copy.hops, copy.path))
                continue
            if send.link in copy.path:
                raise ProtocolViolation(
                    f"{broker} would traverse {send.link} twice for {payload.id!r}")
            nxt = Copy(send.message, copy.root, copy.hops + 1, copy.path + (send.link,))
            if delay == 0:
                self._enqueue(tick, send.link, nxt)
            else:
                self._schedule(tick + delay, _ENQUEUE, (send.link, nxt))

    def _enqueue(self, tick: int, link: LinkRef, copy: Copy) -> None:
        state = self.states.get(link)
        if state is None:
            raise OverlayError(f"enqueue onto unknown link {link}")
        state.fifo.append(copy)
        state.q_len += 1
        state.q_in += 1
        if state.q_len > self.max_queue_len:
            self.max_queue_len = state.q_len
        self._active_links.add(link)
        self.im_total += 1
        self.im_by_root[copy.root] = self.im_by_root.get(copy.root, 0) + 1
        self._schedule(state.next_departure(tick), _DEPART, link)

    def _depart(self, tick: int, link: LinkRef) -> None:
        state = self.states[link]
        copy = state.pop()
        state.q_len -= 1
        state.q_out += 1
        self._active_links.add(link)
        self._schedule(tick + self.latency, _ARRIVE, (link.destination, copy, link))

    def _roll(self, tick: int) -> None:
        self._roll_scheduled = False
        window_start = tick - self.congestion.window
        keep: set[LinkRef] = set()
        for link in sorted(self._active_links, key=self._link_order.__getitem__):
            state = self.states[link]
            estimate = (1 + state.q_in) / (1 + state.q_out)
            state.congested = state.q_len * estimate > self.congestion.threshold
            if state.q_in or state.q_out or state.q_len:
                self.link_rows.append(LinkWindowRow(
                    window_start, link, state.q_in, state.q_out,
                    state.q_len, estimate, state.congested))
                if state.congested:
                    self.congested_windows += 1
            state.last_estimate = estimate
            state.q_in = 0
            state.q_out = 0
            if state.q_len > 0 or state.last_estimate != 1.0:
                keep.add(link)
        self._active_links = keep
        if self._pending > 0 or keep:
            self._schedule(tick + self.congestion.window, _ROLL, None)
            self._roll_scheduled = True

    def _result(self) -> RunResult:
        return RunResult(
            mode=self.mode,
            seed=self.seed,
            overlay=self.overlay,
            deliveries=self.deliveries,
            sub_stats=self.sub_stats,
            tables=self.tables,
            im_total=self.im_total,
            im_by_root=self.im_by_root,
            link_rows=self.link_rows,
            trace_lines=self.trace_lines,
            notification_count=self.notification_count,
            matching_invocations=sum(t.match_calls for t in self.tables.values()),
            duplicate_receptions=self.duplicate_receptions,
            congested_windows=self.congested_windows,
            max_queue_len=self.max_queue_len,
            quiescence_tick=self.quiescence_tick,
            event_count=self.processed,
        )


def _trace_line(tick: int, broker: BrokerId, payload, result: RouteResult) -> str:
    targets = []
    for send in result.sends:
        if send.client is not None:
            targets.append(f"local:{send.client}")
        else:
            bits = getattr(send.message, "cluster_bits", None)
            suffix = f"+bits:{bits}" if bits is not None else ""
            targets.append(f"{send.link}{suffix}")
    return f"{tick} {broker} {payload.id} {result.note} targets=[{', '.join(targets)}]"


def run_simulation(overlay: ClusteredOverlay, mode: RoutingMode, events,
                   **kwargs) -> RunResult:
    return Simulation(overlay, mode, events, **kwargs).run()


# ---- output files ----

def write_outputs(result: RunResult, out_dir, *, trace: bool = False) -> None:
    """Write messages.csv, links.csv and summary.txt (plus optional trace.txt)."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    mode = result.mode.value

    with open(os.path.join(out_dir, "messages.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["message_id", "kind", "client", "issue_tick",
                         "delivery_tick", "hops", "im_count", "mode"])
        for stats in result.sub_stats.values():
            writer.writerow([stats.sub_id, "sub", stats.client, stats.issue_tick,
                             stats.completion_tick, stats.depth,
                             result.im_by_root.get(stats.sub_id, 0), mode])
        for rec in result.deliveries:
            writer.writerow([rec.message_id, "pub", rec.subscriber, rec.issue_tick,
                             rec.delivery_tick, rec.hops,
                             result.im_by_root.get(rec.message_id, 0), mode])

    with open(os.path.join(out_dir, "links.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_start", "link", "q_in", "q_out",
                         "q_len", "ce", "congested"])
        for row in result.link_rows:
            writer.writerow([row.window_start, str(row.link), row.q_in, row.q_out,
                             row.q_len, f"{row.estimate:.6f}", int(row.congested)])

    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        for line in summary_lines(result):
            fh.write(line + "\n")

    if trace:
        with open(os.path.join(out_dir, "trace.txt"), "w") as fh:
            for line in result.trace_lines:
                fh.write(line + "\n")


def summary_lines(result: RunResult) -> list[str]:
    overlay = result.overlay
    subs = list(result.sub_stats.values())
    delays = [d.delivery_tick - d.issue_tick for d in result.deliveries]

    def mean(values) -> str:
        return f"{sum(values) / len(values):.3f}" if values else "0.000"

    return [
        f"mode={result.mode.value}",
        f"seed={result.seed}",
        f"brokers={len(overlay.brokers)}",
        f"clusters={overlay.cluster_count}",
        f"regions={overlay.region_count}",
        f"links={overlay.undirected_link_count}",
        f"subscriptions={len(subs)}",
        f"notifications={result.notification_count}",
        f"deliveries={len(result.deliveries)}",
        f"duplicate_receptions={result.duplicate_receptions}",
        f"total_ims={result.im_total}",
        f"subscription_ims={result.subscription_ims}",
        f"notification_ims={result.notification_ims}",
        f"matching_invocations={result.matching_invocations}",
        f"mean_subscription_depth={mean([s.depth for s in subs])}",
        f"max_subscription_depth={max((s.depth for s in subs), default=0)}",
        f"mean_subscription_completion={mean([s.completion_tick - s.issue_tick for s in subs])}",
        f"mean_notification_delay={mean(delays)}",
        f"max_notification_delay={max(delays, default=0)}",
        f"congested_windows={result.congested_windows}",
        f"max_queue_len={result.max_queue_len}",
        f"quiescence_tick={result.quiescence_tick}",
        f"event_count={result.event_count}",
    ]
