"""Routing decision engines.

Four pure decision functions, one per protocol step:

* broadcast_subscription: clustered subscription broadcast.  The host broker
  fans out to its cluster (primary copies) and to its region (secondary
  copies); primary receivers keep spreading inside the cluster and seed their
  own regions; secondary receivers store and stop.
* flood_subscription: baseline broadcast that floods every neighbour and
  discards duplicate arrivals.
* route_flood_notification: baseline notification forwarding driven by the
  identification tokens stamped on stored subscriptions.
* route_static / route_dynamic: clustered notification routing along stored
  reverse paths; the dynamic variant diverts around overloaded inter-cluster
  links by flagging the owed clusters in a bit vector that rides on exactly
  one copy.

Each function may only touch the local routing table and the link-load view
passed in the context; no global topology knowledge is consulted.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

from .content import (
    LOCAL,
    ClusterBitVector,
    Notification,
    ProtocolViolation,
    RoutingTable,
    Subscription,
    SubscriptionState,
    TableEntry,
    distinct_next_hops,
)
from .overlay import BrokerId, BrokerKind, LinkKind, LinkRef


class LinkLoadView:
    """Decision-time view of outgoing link load; the null view sees no load."""

    def queue_len(self, link: LinkRef) -> int:
        return 0

    def is_overloaded(self, link: LinkRef) -> bool:
        return False


@dataclass
class PinnedLoadView(LinkLoadView):
    """Test affordance: pin overload flags and bias queue lengths per link."""

    overloaded: frozenset = frozenset()
    queue_bias: dict = field(default_factory=dict)
    base: LinkLoadView | None = None

    def queue_len(self, link: LinkRef) -> int:
        q = self.base.queue_len(link) if self.base else 0
        return q + self.queue_bias.get(link, 0)

    def is_overloaded(self, link: LinkRef) -> bool:
        if link in self.overloaded:
            return True
        return self.base.is_overloaded(link) if self.base else False


class Send(NamedTuple):
    """One element of a decision list: a copy on a link or a local delivery."""
    message: object
    link: LinkRef | None
    client: str | None


@dataclass
class RouteResult:
    sends: list[Send]
    note: str = ""


@dataclass
class BrokerContext:
    """Local knowledge a broker routes with: own id, neighbours, table, loads."""

    broker: BrokerId
    kind: BrokerKind
    cluster_count: int
    primary: tuple[BrokerId, ...]
    secondary: tuple[BrokerId, ...]
    table: RoutingTable
    loads: LinkLoadView = field(default_factory=LinkLoadView)
    # canonical broker order for deterministic tie-breaks
    sort_key: Callable[[BrokerId], tuple] = field(default=lambda b: (str(b.region), b.cluster))

    @property
    def cluster(self) -> int:
        return self.broker.cluster

    def neighbours(self) -> tuple[BrokerId, ...]:
        return tuple(sorted(self.primary + self.secondary, key=self.sort_key))

    def link_to(self, neighbour: BrokerId) -> LinkRef:
        kind = LinkKind.INTRA if neighbour.cluster == self.broker.cluster else LinkKind.INTER
        return LinkRef(self.broker, neighbour, kind)

    def icol_toward(self, cluster: int) -> LinkRef:
        if cluster == self.broker.cluster:
            raise ProtocolViolation(f"{self.broker} cannot cross into its own cluster")
        return LinkRef(self.broker, BrokerId(self.broker.region, cluster), LinkKind.INTER)


def _sender_broker(sender: LinkRef | None) -> BrokerId | None:
    return sender.source if sender is not None else None


# ---- subscription broadcast ----

def broadcast_subscription(ctx: BrokerContext, sub: Subscription,
                           sender: LinkRef | None) -> RouteResult:
    """Clustered broadcast step for one arriving subscription copy."""
    if sub.host_flag:
        bits = ClusterBitVector.from_indexes(ctx.cluster_count, [ctx.cluster])
        stored = replace(sub, host_flag=False, state=SubscriptionState.PRIMARY, cbv_s=bits)
        ctx.table.insert(TableEntry(stored, LOCAL, cbv_s=bits))
        exclude = None
    elif sub.state is SubscriptionState.SECONDARY:
        # stored hop points back toward the sender: the notification path
        ctx.table.insert(TableEntry(sub, ctx.link_to(sender.source), cbv_s=sub.cbv_s))
        return RouteResult([], "stored-secondary")
    elif sub.state is SubscriptionState.PRIMARY:
        ctx.table.insert(TableEntry(sub, ctx.link_to(sender.source), cbv_s=sub.cbv_s))
        stored = sub
        exclude = _sender_broker(sender)
    else:
        raise ProtocolViolation(f"subscription {sub.id!r} arrived with no copy state")

    sends = []
    primary_copy = replace(stored, state=SubscriptionState.PRIMARY)
    secondary_copy = replace(stored, state=SubscriptionState.SECONDARY)
    for n in ctx.primary:
        if n != exclude:
            sends.append(Send(primary_copy, ctx.link_to(n), None))
    for n in ctx.secondary:
        sends.append(Send(secondary_copy, ctx.link_to(n), None))
    return RouteResult(sends, "spread")


def flood_subscription(ctx: BrokerContext, sub: Subscription,
                       sender: LinkRef | None) -> RouteResult:
    """Baseline broadcast: flood everywhere, drop duplicate arrivals."""
    if sub.host_flag:
        stored = replace(sub, host_flag=False)
        ctx.table.insert(TableEntry(stored, LOCAL, bid=stored.id))
        exclude = None
    else:
        if ctx.table.has(sub.id):
            return RouteResult([], "duplicate-discarded")
        stored = sub
        ctx.table.insert(TableEntry(stored, ctx.link_to(sender.source), bid=stored.id))
        exclude = _sender_broker(sender)

    sends = [Send(stored, ctx.link_to(n), None)
             for n in ctx.neighbours() if n != exclude]
    return RouteResult(sends, "flood")


# ---- notification routing ----

def route_flood_notification(ctx: BrokerContext, n: Notification,
                             sender: LinkRef | None) -> RouteResult:
    """Baseline forwarding: split the carried id list by stored last hop.

    Content matching happens only at the publisher's host broker; afterwards
    the id list alone drives the route and shrinks as subscribers are served.
    """
    if n.host_flag:
        matched = ctx.table.match(n)
        bids = tuple(e.bid for e in matched)
        n = replace(n, host_flag=False, bid_list=bids)
    if n.bid_list is None:
        raise ProtocolViolation(f"notification {n.id!r} reached {ctx.broker} without an id list")

    groups: dict[LinkRef, list[str]] = {}
    sends = []
    for bid in n.bid_list:
        entry = ctx.table.get(bid)
        if entry.is_local():
            sends.append(Send(n.bare(), None, entry.subscription.subscriber))
        else:
            groups.setdefault(entry.last_hop, []).append(bid)
    for link, bids in groups.items():
        sends.append(Send(replace(n, bid_list=tuple(bids)), link, None))
    return RouteResult(sends, "split")


def route_static(ctx: BrokerContext, n: Notification,
                 sender: LinkRef | None) -> RouteResult:
    """Clustered routing without load awareness.

    The host broker emits one copy per distinct stored last hop; any other
    broker forwards only along intra-cluster last hops, never crossing
    between clusters again.
    """
    matched = ctx.table.match(n)
    if n.host_flag:
        links, local = distinct_next_hops(matched)
        n = replace(n, host_flag=False)
    else:
        links, local = distinct_next_hops(matched, intra_only=True)
        back = _sender_broker(sender)
        links = [l for l in links if l.destination != back]

    sends = [Send(n.bare(), None, e.subscription.subscriber) for e in local]
    sends.extend(Send(n, link, None) for link in links)
    return RouteResult(sends, "static")


def _resolve_targets(ctx: BrokerContext, n: Notification, matched,
                     sender: LinkRef | None):
    """Candidate forward links for dynamic routing, plus unresolved flag bits."""
    if n.host_flag:
        links, local = distinct_next_hops(matched)
        return links, local, [], True

    links, local = distinct_next_hops(matched, intra_only=True)
    back = _sender_broker(sender)
    links = [l for l in links if l.destination != back]

    unresolved: list[int] = []
    if n.cluster_bits is not None:
        secondary_clusters = set()
        for e in matched:
            if e.cbv_s is not None and not e.cbv_s.test_bit(ctx.cluster):
                secondary_clusters.update(e.cbv_s.set_indexes())
        for i in n.cluster_bits.set_indexes():
            if i == ctx.cluster:
                raise ProtocolViolation(
                    f"{ctx.broker} received a bit vector flagging its own cluster")
            if i in secondary_clusters:
                crossing = ctx.icol_toward(i)
                if crossing not in links:
                    links.append(crossing)
            else:
                # nothing here can serve that cluster; the bit rides onward
                unresolved.append(i)
    return links, local, unresolved, False


def _pick(links, ctx: BrokerContext) -> LinkRef:
    """Least queue length first, then canonical destination order."""
    return min(links, key=lambda l: (ctx.loads.queue_len(l), ctx.sort_key(l.destination)))


def route_dynamic(ctx: BrokerContext, n: Notification,
                  sender: LinkRef | None) -> RouteResult:
    """Clustered routing that diverts around overloaded inter-cluster links.

    Copies for overloaded crossings are withheld; the owed cluster indexes
    are flagged in a bit vector attached to exactly one emitted copy, and a
    downstream broker performs the withheld crossing from its own region.
    With no overload the decision list is identical to route_static.
    """
    matched = ctx.table.match(n)
    links, local, unresolved, at_host = _resolve_targets(ctx, n, matched, sender)

    icols = [l for l in links if l.kind is LinkKind.INTER]
    acols = [l for l in links if l.kind is LinkKind.INTRA]
    held = [l for l in icols if ctx.loads.is_overloaded(l)]
    open_icols = [l for l in icols if l not in held]

    flagged = sorted({l.destination.cluster for l in held} | set(unresolved))
    out_bits = (ClusterBitVector.from_indexes(ctx.cluster_count, flagged)
                if flagged else None)

    outgoing = (replace(n, host_flag=False) if at_host
                else replace(n, cluster_bits=None))
    sends = [Send(outgoing.bare(), None, e.subscription.subscriber) for e in local]
    emitted: dict[LinkRef, int] = {}
    for link in acols + open_icols:
        emitted[link] = len(sends)
        sends.append(Send(outgoing, link, None))

    if out_bits is None:
        return RouteResult(sends, "dynamic")

    def attach(link: LinkRef, bits: ClusterBitVector, note: str) -> RouteResult:
        i = emitted[link]
        sends[i] = Send(replace(outgoing, cluster_bits=bits), link, None)
        return RouteResult(sends, note)

    if open_icols:
        return attach(_pick(open_icols, ctx), out_bits, "carrier=inter")
    open_acols = [l for l in acols if not ctx.loads.is_overloaded(l)]
    if open_acols:
        return attach(_pick(open_acols, ctx), out_bits, "carrier=intra")
    if icols:
        # every target link is overloaded: force the crossing on the least
        # loaded inter-cluster link and clear the bit it serves
        forced = _pick(icols, ctx)
        bits = out_bits.clear_bit(forced.destination.cluster)
        extra = replace(outgoing, cluster_bits=None if bits.is_empty() else bits)
        sends.append(Send(extra, forced, None))
        return RouteResult(sends, "carrier=forced-inter")
    if acols:
        return attach(_pick(acols, ctx), out_bits, "carrier=intra-overloaded")
    return RouteResult(sends, "bits-dropped")
