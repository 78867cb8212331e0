"""Decision-function tests: broadcast, flood, and notification routing."""

from collections import deque

import pytest

from clustercast import (
    LOCAL,
    BrokerContext,
    ClusterBitVector,
    LinkKind,
    LinkLoadView,
    Notification,
    PinnedLoadView,
    ProtocolViolation,
    RoutingTable,
    Subscription,
    SubscriptionState,
    TableEntry,
    broadcast_subscription,
    build_overlay,
    flood_subscription,
    make_complete,
    make_tree,
    parse_filters,
    route_dynamic,
    route_flood_notification,
    route_static,
)
from clustercast.overlay import BrokerId, BrokerKind, LinkRef

TREE6 = make_tree([("a", "b"), ("b", "c"), ("d", "e"), ("e", "f"), ("b", "e")])
OVERLAY = build_overlay(TREE6, make_complete(3))


def overlay_contexts(overlay, *, clustered=True, loads=None):
    contexts = {}
    for b in overlay.brokers:
        contexts[b] = BrokerContext(
            broker=b,
            kind=overlay.classify_broker(b),
            cluster_count=overlay.cluster_count,
            primary=overlay.primary_neighbours(b),
            secondary=overlay.secondary_neighbours(b),
            table=RoutingTable(b, clustered),
            loads=loads or LinkLoadView(),
            sort_key=overlay.broker_key,
        )
    return contexts


def drive(contexts, host, message, fn):
    """Run one decision function to quiescence from the host broker."""
    queue = deque([(message, None, host, 0)])
    ims = 0
    notes = []
    deliveries = []
    used_links = []
    max_depth = 0
    while queue:
        msg, sender, dest, depth = queue.popleft()
        max_depth = max(max_depth, depth)
        result = fn(contexts[dest], msg, sender)
        notes.append(result.note)
        for send in result.sends:
            if send.client is not None:
                deliveries.append((send.message.id, send.client))
                continue
            ims += 1
            used_links.append(send.link)
            queue.append((send.message, send.link, send.link.destination, depth + 1))
    return ims, notes, deliveries, used_links, max_depth


def new_sub(sub_id, subscriber, *, host_flag=True):
    return Subscription(sub_id, subscriber, parse_filters("price gt 0"),
                        host_flag=host_flag)


# ---- clustered subscription broadcast ----

def test_host_broadcast_decision():
    ctx = overlay_contexts(OVERLAY)[BrokerId("a", 0)]
    result = broadcast_subscription(ctx, new_sub("(a,0)#1", "S1"), None)

    entry = ctx.table.get("(a,0)#1")
    assert entry.is_local()
    assert entry.cbv_s.set_indexes() == (0,)
    assert entry.subscription.state is SubscriptionState.PRIMARY

    by_dest = {s.link.destination: s.message for s in result.sends}
    assert set(by_dest) == {BrokerId("b", 0), BrokerId("a", 1), BrokerId("a", 2)}
    assert by_dest[BrokerId("b", 0)].state is SubscriptionState.PRIMARY
    assert by_dest[BrokerId("a", 1)].state is SubscriptionState.SECONDARY
    assert by_dest[BrokerId("a", 2)].state is SubscriptionState.SECONDARY
    for msg in by_dest.values():
        assert not msg.host_flag
        assert msg.cbv_s.set_indexes() == (0,)


def test_primary_receiver_spreads_and_seeds_region():
    contexts = overlay_contexts(OVERLAY)
    host = BrokerId("a", 0)
    res = broadcast_subscription(contexts[host], new_sub("(a,0)#1", "S1"), None)
    (to_b,) = [s for s in res.sends if s.link.destination == BrokerId("b", 0)]

    ctx_b = contexts[BrokerId("b", 0)]
    result = broadcast_subscription(ctx_b, to_b.message, to_b.link)
    # stored hop points back along b's own outgoing link toward the sender
    assert ctx_b.table.get("(a,0)#1").last_hop == LinkRef(
        BrokerId("b", 0), BrokerId("a", 0), LinkKind.INTRA)

    dests = {s.link.destination for s in result.sends}
    assert dests == {BrokerId("c", 0), BrokerId("e", 0),
                     BrokerId("b", 1), BrokerId("b", 2)}


def test_secondary_receiver_stores_and_stops():
    contexts = overlay_contexts(OVERLAY)
    host = BrokerId("a", 0)
    res = broadcast_subscription(contexts[host], new_sub("(a,0)#1", "S1"), None)
    (to_a1,) = [s for s in res.sends if s.link.destination == BrokerId("a", 1)]

    ctx = contexts[BrokerId("a", 1)]
    result = broadcast_subscription(ctx, to_a1.message, to_a1.link)
    assert result.sends == [] and result.note == "stored-secondary"
    entry = ctx.table.get("(a,0)#1")
    assert entry.last_hop == LinkRef(BrokerId("a", 1), BrokerId("a", 0), LinkKind.INTER)
    assert entry.subscription.state is SubscriptionState.SECONDARY


def test_subscription_without_state_is_violation():
    ctx = overlay_contexts(OVERLAY)[BrokerId("b", 0)]
    bare = new_sub("(a,0)#1", "S1", host_flag=False)
    sender = LinkRef(BrokerId("a", 0), BrokerId("b", 0), LinkKind.INTRA)
    with pytest.raises(ProtocolViolation, match="no copy state"):
        broadcast_subscription(ctx, bare, sender)


def test_full_broadcast_counts_and_states():
    contexts = overlay_contexts(OVERLAY)
    ims, _, _, links, depth = drive(
        contexts, BrokerId("a", 0), new_sub("(a,0)#1", "S1"), broadcast_subscription)

    af, cf = TREE6.order, 3
    assert ims == (af - 1) + af * (cf - 1) == 17
    assert len(set(links)) == len(links)                  # no duplicate arrivals at all
    assert depth <= OVERLAY.acyclic_diameter + 1
    for b, ctx in contexts.items():
        entry = ctx.table.get("(a,0)#1")
        assert len(ctx.table) == 1
        assert entry.cbv_s.set_indexes() == (0,)
        want = SubscriptionState.PRIMARY if b.cluster == 0 else SubscriptionState.SECONDARY
        assert entry.subscription.state is want


def test_broadcast_ignores_link_load():
    all_links = frozenset(OVERLAY.directed_links)
    calm = drive(overlay_contexts(OVERLAY), BrokerId("c", 1),
                 new_sub("(c,1)#1", "S1"), broadcast_subscription)
    jammed = drive(overlay_contexts(OVERLAY, loads=PinnedLoadView(overloaded=all_links)),
                   BrokerId("c", 1), new_sub("(c,1)#1", "S1"), broadcast_subscription)
    assert calm == jammed


# ---- flood baseline ----

def test_flood_host_floods_every_neighbour():
    ctx = overlay_contexts(OVERLAY, clustered=False)[BrokerId("a", 0)]
    result = flood_subscription(ctx, new_sub("(a,0)#1", "S1"), None)
    assert {s.link.destination for s in result.sends} == {
        BrokerId("b", 0), BrokerId("a", 1), BrokerId("a", 2)}
    assert ctx.table.get("(a,0)#1").bid == "(a,0)#1"


def test_flood_counts_match_edge_formula():
    contexts = overlay_contexts(OVERLAY, clustered=False)
    ims, notes, _, _, _ = drive(
        contexts, BrokerId("a", 0), new_sub("(a,0)#1", "S1"), flood_subscription)

    v, e = len(OVERLAY.brokers), OVERLAY.undirected_link_count
    assert ims == 2 * e - v + 1 == 49
    assert notes.count("duplicate-discarded") == ims - (v - 1) == 32
    assert all(len(ctx.table) == 1 for ctx in contexts.values())


# ---- flood notification routing ----

def _flooded_contexts(subs):
    contexts = overlay_contexts(OVERLAY, clustered=False)
    for host, sub in subs:
        drive(contexts, host, sub, flood_subscription)
    return contexts


def test_flood_notification_walk():
    contexts = _flooded_contexts([
        (BrokerId("a", 0), new_sub("(a,0)#1", "S1")),
        (BrokerId("f", 2), new_sub("(f,2)#1", "S2")),
    ])
    n = Notification("P1#1", "P1", {"price": 5}, host_flag=True)
    ims, _, deliveries, links, _ = drive(
        contexts, BrokerId("d", 1), n, route_flood_notification)
    assert sorted(deliveries) == [("P1#1", "S1"), ("P1#1", "S2")]
    assert len(set(links)) == len(links)
    assert ims >= 2


def test_flood_notification_id_lists_shrink():
    contexts = _flooded_contexts([
        (BrokerId("a", 0), new_sub("(a,0)#1", "S1")),
        (BrokerId("f", 2), new_sub("(f,2)#1", "S2")),
    ])
    queue = deque([(Notification("P1#1", "P1", {"price": 5}, host_flag=True),
                    None, BrokerId("d", 1))])
    while queue:
        msg, sender, dest = queue.popleft()
        result = route_flood_notification(contexts[dest], msg, sender)
        for send in result.sends:
            if send.link is None:
                assert send.message.bid_list is None      # local copies are bare
                continue
            assert len(send.message.bid_list) >= 1
            if msg.bid_list is not None:
                assert len(send.message.bid_list) <= len(msg.bid_list)
            queue.append((send.message, send.link, send.link.destination))


def test_flood_notification_without_matches_stops_at_host():
    contexts = _flooded_contexts([(BrokerId("a", 0), new_sub("(a,0)#1", "S1"))])
    n = Notification("P1#1", "P1", {"price": -3}, host_flag=True)
    result = route_flood_notification(contexts[BrokerId("d", 1)], n, None)
    assert result.sends == []


def test_flood_notification_requires_id_list():
    contexts = _flooded_contexts([(BrokerId("a", 0), new_sub("(a,0)#1", "S1"))])
    n = Notification("P1#1", "P1", {"price": 5})
    with pytest.raises(ProtocolViolation, match="without an id list"):
        route_flood_notification(contexts[BrokerId("d", 1)], n, None)


# ---- clustered notification routing: shared fixtures ----

def _entry(sub_id, subscriber, last_hop, bit, width=3):
    sub = Subscription(sub_id, subscriber, parse_filters("price gt 0"))
    return TableEntry(sub, last_hop, cbv_s=ClusterBitVector.from_indexes(width, [bit]))


def make_ctx(broker, primary, secondary, entries, *, cluster_count=3, loads=None):
    table = RoutingTable(broker, clustered=True)
    for e in entries:
        table.insert(e)
    return BrokerContext(
        broker=broker, kind=BrokerKind.INNER, cluster_count=cluster_count,
        primary=tuple(primary), secondary=tuple(secondary), table=table,
        loads=loads or LinkLoadView())


B0 = BrokerId("b", 0)
INTRA_A0 = LinkRef(B0, BrokerId("a", 0), LinkKind.INTRA)
INTER_B1 = LinkRef(B0, BrokerId("b", 1), LinkKind.INTER)
INTER_B2 = LinkRef(B0, BrokerId("b", 2), LinkKind.INTER)


def host_ctx(loads=None, cluster_count=3):
    secondary = [BrokerId("b", i) for i in range(1, cluster_count)]
    entries = [
        _entry("(b,0)#1", "S0", LOCAL, 0, cluster_count),
        _entry("(a,0)#1", "S1", INTRA_A0, 0, cluster_count),
    ]
    for i in range(1, cluster_count):
        hop = LinkRef(B0, BrokerId("b", i), LinkKind.INTER)
        entries.append(_entry(f"(x,{i})#1", f"S{i + 1}", hop, i, cluster_count))
    return make_ctx(B0, [BrokerId("a", 0), BrokerId("c", 0), BrokerId("e", 0)],
                    secondary, entries, cluster_count=cluster_count, loads=loads)


HOSTED = Notification("P1#1", "P1", {"price": 5}, host_flag=True)
PLAIN = Notification("P1#1", "P1", {"price": 5})


# ---- static routing ----

def test_static_host_uses_every_distinct_last_hop():
    result = route_static(host_ctx(), HOSTED, None)
    local = [s for s in result.sends if s.client is not None]
    links = [s.link for s in result.sends if s.link is not None]
    assert [(s.client, s.message.bid_list, s.message.cluster_bits)
            for s in local] == [("S0", None, None)]
    assert set(links) == {INTRA_A0, INTER_B1, INTER_B2}
    assert all(not s.message.host_flag for s in result.sends)


def test_static_non_host_keeps_intra_hops_only():
    sender = LinkRef(BrokerId("c", 0), B0, LinkKind.INTRA)
    result = route_static(host_ctx(), PLAIN, sender)
    assert [s.link for s in result.sends if s.link] == [INTRA_A0]


def test_static_non_host_excludes_link_back_to_sender():
    sender = LinkRef(BrokerId("a", 0), B0, LinkKind.INTRA)
    result = route_static(host_ctx(), PLAIN, sender)
    assert [s.link for s in result.sends if s.link] == []
    assert [s.client for s in result.sends] == ["S0"]


def test_static_walk_delivers_once_within_bound():
    contexts = overlay_contexts(OVERLAY)
    for host, sub in ((BrokerId("a", 0), new_sub("(a,0)#1", "S1")),
                      (BrokerId("f", 2), new_sub("(f,2)#1", "S2"))):
        drive(contexts, host, sub, broadcast_subscription)
    n = Notification("P1#1", "P1", {"price": 5}, host_flag=True)
    _, _, deliveries, links, depth = drive(contexts, BrokerId("d", 1), n, route_static)
    assert sorted(deliveries) == [("P1#1", "S1"), ("P1#1", "S2")]
    assert len(set(links)) == len(links)
    assert depth <= OVERLAY.acyclic_diameter + 1


# ---- dynamic routing ----

def test_dynamic_equals_static_without_overload():
    static = route_static(host_ctx(), HOSTED, None)
    dynamic = route_dynamic(host_ctx(), HOSTED, None)
    assert dynamic.note == "dynamic"
    key = lambda s: (str(s.link), str(s.client))
    assert sorted(static.sends, key=key) == sorted(dynamic.sends, key=key)


def test_dynamic_host_copies_drop_host_flag():
    result = route_dynamic(host_ctx(), HOSTED, None)
    assert all(not s.message.host_flag for s in result.sends)


def test_dynamic_withholds_overloaded_crossing_and_flags_cluster():
    loads = PinnedLoadView(overloaded=frozenset({INTER_B1}))
    result = route_dynamic(host_ctx(loads), HOSTED, None)
    assert result.note == "carrier=inter"
    links = {s.link: s.message for s in result.sends if s.link}
    assert INTER_B1 not in links
    assert links[INTRA_A0].cluster_bits is None          # intra copies always go
    assert str(links[INTER_B2].cluster_bits) == "010"    # owed cluster 1 flagged


def test_dynamic_carrier_prefers_least_loaded_crossing():
    ctx = host_ctx(PinnedLoadView(overloaded=frozenset({INTER_B1}),
                                  queue_bias={INTER_B2: 7,
                                              LinkRef(B0, BrokerId("b", 3),
                                                      LinkKind.INTER): 1}),
                   cluster_count=4)
    result = route_dynamic(ctx, HOSTED, None)
    assert result.note == "carrier=inter"
    carrier = [s for s in result.sends if s.link and s.message.cluster_bits]
    assert [s.link.destination for s in carrier] == [BrokerId("b", 3)]
    assert str(carrier[0].message.cluster_bits) == "0010"


def test_dynamic_carrier_tie_break_is_canonical_order():
    loads = PinnedLoadView(overloaded=frozenset({INTER_B1}), queue_bias={})
    ctx = host_ctx(loads, cluster_count=4)
    result = route_dynamic(ctx, HOSTED, None)
    carrier = [s for s in result.sends if s.link and s.message.cluster_bits]
    assert [s.link.destination for s in carrier] == [BrokerId("b", 2)]


def test_dynamic_falls_back_to_intra_carrier():
    loads = PinnedLoadView(overloaded=frozenset({INTER_B1, INTER_B2}))
    result = route_dynamic(host_ctx(loads), HOSTED, None)
    assert result.note == "carrier=intra"
    links = {s.link: s.message for s in result.sends if s.link}
    assert set(links) == {INTRA_A0}
    assert str(links[INTRA_A0].cluster_bits) == "110"    # clusters 1 and 2 owed


def test_dynamic_forces_crossing_when_everything_is_overloaded():
    loads = PinnedLoadView(overloaded=frozenset({INTER_B1, INTER_B2, INTRA_A0}))
    result = route_dynamic(host_ctx(loads), HOSTED, None)
    assert result.note == "carrier=forced-inter"
    links = {s.link: s.message for s in result.sends if s.link}
    # intra copy still emitted, forced crossing carries the remaining bit
    assert set(links) == {INTRA_A0, INTER_B1}
    assert links[INTRA_A0].cluster_bits is None
    assert str(links[INTER_B1].cluster_bits) == "100"    # own bit cleared, 2 rides


def test_dynamic_forced_crossing_single_bit_clears_header():
    entries = [
        _entry("(b,0)#1", "S0", LOCAL, 0),
        _entry("(x,1)#1", "S2", INTER_B1, 1),
    ]
    ctx = make_ctx(B0, [BrokerId("a", 0)], [BrokerId("b", 1), BrokerId("b", 2)],
                   entries, loads=PinnedLoadView(overloaded=frozenset({INTER_B1})))
    result = route_dynamic(ctx, HOSTED, None)
    assert result.note == "carrier=forced-inter"
    (send,) = [s for s in result.sends if s.link]
    assert send.link == INTER_B1 and send.message.cluster_bits is None


def _relay_ctx(*, with_secondary=True, loads=None):
    """Non-host broker (b,2) holding an intra hop and maybe a crossing entry."""
    b2 = BrokerId("b", 2)
    intra = LinkRef(b2, BrokerId("a", 2), LinkKind.INTRA)
    entries = [_entry("(a,2)#1", "S9", intra, 2)]
    if with_secondary:
        entries.append(_entry("(x,1)#1", "S8",
                              LinkRef(b2, BrokerId("b", 1), LinkKind.INTER), 1))
    return make_ctx(b2, [BrokerId("a", 2), BrokerId("c", 2), BrokerId("e", 2)],
                    [BrokerId("b", 0), BrokerId("b", 1)], entries, loads=loads), intra


RELAY_SENDER = LinkRef(BrokerId("c", 2), BrokerId("b", 2), LinkKind.INTRA)


def _flagged(bits):
    return Notification("P1#1", "P1", {"price": 5},
                        cluster_bits=ClusterBitVector.from_indexes(3, bits))


def test_dynamic_relay_resolves_flagged_bit_into_crossing():
    ctx, intra = _relay_ctx()
    result = route_dynamic(ctx, _flagged([1]), RELAY_SENDER)
    assert result.note == "dynamic"
    links = {s.link: s.message for s in result.sends if s.link}
    crossing = LinkRef(BrokerId("b", 2), BrokerId("b", 1), LinkKind.INTER)
    assert set(links) == {intra, crossing}
    # the incoming header is consumed, not echoed onward
    assert all(m.cluster_bits is None for m in links.values())


def test_dynamic_relay_holds_crossing_under_load():
    crossing = LinkRef(BrokerId("b", 2), BrokerId("b", 1), LinkKind.INTER)
    ctx, intra = _relay_ctx(loads=PinnedLoadView(overloaded=frozenset({crossing})))
    result = route_dynamic(ctx, _flagged([1]), RELAY_SENDER)
    assert result.note == "carrier=intra"
    links = {s.link: s.message for s in result.sends if s.link}
    assert set(links) == {intra}
    assert str(links[intra].cluster_bits) == "010"


def test_dynamic_unresolved_bit_rides_onward():
    ctx, intra = _relay_ctx(with_secondary=False)
    result = route_dynamic(ctx, _flagged([1]), RELAY_SENDER)
    assert result.note == "carrier=intra"
    (send,) = [s for s in result.sends if s.link]
    assert send.link == intra and str(send.message.cluster_bits) == "010"


def test_dynamic_own_cluster_bit_is_violation():
    ctx, _ = _relay_ctx()
    with pytest.raises(ProtocolViolation, match="its own cluster"):
        route_dynamic(ctx, _flagged([2]), RELAY_SENDER)


def test_dynamic_drops_bits_with_no_links_at_all():
    ctx = make_ctx(BrokerId("b", 2), [BrokerId("a", 2)],
                   [BrokerId("b", 0), BrokerId("b", 1)], [])
    result = route_dynamic(ctx, _flagged([1]), RELAY_SENDER)
    assert result.sends == [] and result.note == "bits-dropped"


def test_dynamic_walk_matches_static_deliveries():
    def deliveries(fn):
        contexts = overlay_contexts(OVERLAY)
        for host, sub in ((BrokerId("a", 0), new_sub("(a,0)#1", "S1")),
                          (BrokerId("c", 1), new_sub("(c,1)#1", "S2")),
                          (BrokerId("f", 2), new_sub("(f,2)#1", "S3"))):
            drive(contexts, host, sub, broadcast_subscription)
        n = Notification("P1#1", "P1", {"price": 5}, host_flag=True)
        got = drive(contexts, BrokerId("d", 1), n, fn)
        return sorted(got[2]), got[3], got[4]

    static_set, _, _ = deliveries(route_static)
    dynamic_set, links, depth = deliveries(route_dynamic)
    assert static_set == dynamic_set == [
        ("P1#1", "S1"), ("P1#1", "S2"), ("P1#1", "S3")]
    assert len(set(links)) == len(links)
    assert depth <= OVERLAY.acyclic_diameter + 1
