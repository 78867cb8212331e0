"""Clustered broker overlays built as a product of two factor graphs.

The overlay is the Cartesian product of an acyclic connected factor with a
complete factor.  Each complete-factor vertex induces a cluster (a copy of
the acyclic factor); each acyclic-factor vertex induces a region (a copy of
the complete factor).  Links within a cluster are intra-cluster links, links
within a region are inter-cluster links, and every physical link is modeled
as a pair of directed link references with independent queues.
"""

from __future__ import annotations

import re
from enum import Enum
from typing import NamedTuple

from .graphs import Graph, GraphError, cartesian_product, diameter, is_acyclic, is_complete


class OverlayError(ValueError):
    """Invalid overlay construction or query."""


class AcyclicPropertyViolation(OverlayError):
    """The factor that must be acyclic contains a cycle."""


class ConnectivityPropertyViolation(OverlayError):
    """The factor that must be complete is missing edges."""


class IndexPropertyViolation(OverlayError):
    """Complete-factor labels are not the integers 0..k-1."""


class DisconnectedFactorViolation(OverlayError):
    """The acyclic factor is not connected."""


class LinkKind(Enum):
    INTRA = "intra"   # joins two brokers of the same cluster
    INTER = "inter"   # joins two brokers of the same region

    def __str__(self) -> str:
        return self.value


class BrokerKind(Enum):
    EDGE = "edge"     # at most one intra-cluster neighbour
    INNER = "inner"   # two or more intra-cluster neighbours

    def __str__(self) -> str:
        return self.value


class BrokerId(NamedTuple):
    region: object    # acyclic-factor vertex label
    cluster: int      # complete-factor index

    def __str__(self) -> str:
        return f"({self.region},{self.cluster})"


class LinkRef(NamedTuple):
    """One direction of a physical link."""
    source: BrokerId
    destination: BrokerId
    kind: LinkKind

    def __str__(self) -> str:
        return f"{self.source}->{self.destination}"


_BROKER_RE = re.compile(r"^\(([A-Za-z0-9_.]+),(\d+)\)$")


def parse_broker(text: str, overlay: "ClusteredOverlay | None" = None) -> BrokerId:
    """Parse "(a,0)" into a BrokerId, resolving the region label type."""
    m = _BROKER_RE.match(text.strip())
    if not m:
        raise OverlayError(f"malformed broker id {text!r} (expected '(region,cluster)')")
    region: object = m.group(1)
    cluster = int(m.group(2))
    if overlay is not None:
        if region not in overlay.acyclic_factor._pos and region.isdigit():
            region = int(region)
        broker = BrokerId(region, cluster)
        if broker not in overlay.broker_set:
            raise OverlayError(f"unknown broker {text!r}")
        return broker
    if isinstance(region, str) and region.isdigit():
        region = int(region)
    return BrokerId(region, cluster)


def parse_link(text: str, overlay: "ClusteredOverlay") -> LinkRef:
    """Parse "(a,0)->(b,0)" into a directed LinkRef of the overlay."""
    parts = text.split("->")
    if len(parts) != 2:
        raise OverlayError(f"malformed link {text!r} (expected 'src->dst')")
    src = parse_broker(parts[0], overlay)
    dst = parse_broker(parts[1], overlay)
    return overlay.link(src, dst)


class ClusteredOverlay:
    """Product overlay with cluster/region structure and directed link views."""

    def __init__(self, acyclic_factor: Graph, complete_factor: Graph):
        self.acyclic_factor = acyclic_factor
        self.complete_factor = complete_factor
        self.cluster_count = complete_factor.order
        self.region_count = acyclic_factor.order
        self.acyclic_diameter = diameter(acyclic_factor)

        self.graph = cartesian_product(acyclic_factor, complete_factor)
        self.brokers = tuple(BrokerId(g, h) for g, h in self.graph.vertices)
        self.broker_set = frozenset(self.brokers)

        primary: dict[BrokerId, list[BrokerId]] = {b: [] for b in self.brokers}
        secondary: dict[BrokerId, list[BrokerId]] = {b: [] for b in self.brokers}
        directed: list[LinkRef] = []
        acols = icols = 0
        for (g1, h1), (g2, h2) in self.graph.edges:
            u, v = BrokerId(g1, h1), BrokerId(g2, h2)
            if h1 == h2:
                kind = LinkKind.INTRA
                acols += 1
                primary[u].append(v)
                primary[v].append(u)
            else:
                kind = LinkKind.INTER
                icols += 1
                secondary[u].append(v)
                secondary[v].append(u)
            directed.append(LinkRef(u, v, kind))
            directed.append(LinkRef(v, u, kind))

        key = self.broker_key
        self._primary = {b: tuple(sorted(ns, key=key)) for b, ns in primary.items()}
        self._secondary = {b: tuple(sorted(ns, key=key)) for b, ns in secondary.items()}
        self.directed_links = tuple(sorted(directed, key=lambda l: (key(l.source), key(l.destination))))
        self._link_index = {(l.source, l.destination): l for l in self.directed_links}
        self.intra_link_count = acols      # undirected counts
        self.inter_link_count = icols
        self._kind = {b: (BrokerKind.INNER if len(self._primary[b]) >= 2 else BrokerKind.EDGE)
                      for b in self.brokers}

    # ---- identity and ordering ----

    def broker_key(self, b: BrokerId) -> tuple[int, int]:
        """Canonical total order: factor declaration order, then cluster index."""
        return (self.acyclic_factor.position(b.region), b.cluster)

    def _require(self, b: BrokerId) -> None:
        if b not in self.broker_set:
            raise OverlayError(f"unknown broker {b}")

    # ---- structure queries ----

    @property
    def undirected_link_count(self) -> int:
        return self.intra_link_count + self.inter_link_count

    def cluster_of(self, b: BrokerId) -> int:
        self._require(b)
        return b.cluster

    def region_of(self, b: BrokerId):
        self._require(b)
        return b.region

    def cluster_brokers(self, cluster: int) -> tuple[BrokerId, ...]:
        if not 0 <= cluster < self.cluster_count:
            raise OverlayError(f"cluster index {cluster} out of range")
        return tuple(b for b in self.brokers if b.cluster == cluster)

    def region_brokers(self, region) -> tuple[BrokerId, ...]:
        if region not in self.acyclic_factor._pos:
            raise OverlayError(f"unknown region {region!r}")
        return tuple(b for b in self.brokers if b.region == region)

    def primary_neighbours(self, b: BrokerId) -> tuple[BrokerId, ...]:
        self._require(b)
        return self._primary[b]

    def secondary_neighbours(self, b: BrokerId) -> tuple[BrokerId, ...]:
        self._require(b)
        return self._secondary[b]

    def neighbours(self, b: BrokerId) -> tuple[BrokerId, ...]:
        self._require(b)
        return tuple(sorted(self._primary[b] + self._secondary[b], key=self.broker_key))

    def classify_broker(self, b: BrokerId) -> BrokerKind:
        self._require(b)
        return self._kind[b]

    def link(self, src: BrokerId, dst: BrokerId) -> LinkRef:
        try:
            return self._link_index[(src, dst)]
        except KeyError:
            raise OverlayError(f"no link {src}->{dst} in overlay") from None

    def icol_toward(self, b: BrokerId, cluster: int) -> LinkRef:
        """The inter-cluster link from b to its region-mate in `cluster`."""
        self._require(b)
        if cluster == b.cluster:
            raise OverlayError(f"broker {b} is already in cluster {cluster}")
        if not 0 <= cluster < self.cluster_count:
            raise OverlayError(f"cluster index {cluster} out of range")
        return self._link_index[(b, BrokerId(b.region, cluster))]

    # ---- reporting ----

    def stats_line(self) -> str:
        return (f"{len(self.brokers)} brokers, {self.undirected_link_count} links, "
                f"{self.cluster_count} clusters, {self.region_count} regions")

    def describe(self) -> str:
        inner = sum(1 for b in self.brokers if self._kind[b] is BrokerKind.INNER)
        lines = [
            self.stats_line(),
            f"link kinds: {self.intra_link_count} intra-cluster, "
            f"{self.inter_link_count} inter-cluster "
            f"({2 * self.undirected_link_count} directed views)",
            f"broker kinds: {inner} inner, {len(self.brokers) - inner} edge",
            f"acyclic-factor diameter: {self.acyclic_diameter}",
        ]
        for b in self.brokers:
            prim = " ".join(str(n) for n in self._primary[b])
            sec = " ".join(str(n) for n in self._secondary[b])
            lines.append(f"broker {b} kind={self._kind[b]} cluster={b.cluster} "
                         f"region={b.region} primary=[{prim}] secondary=[{sec}]")
        for link in self.directed_links:
            lines.append(f"link {link} kind={link.kind}")
        return "\n".join(lines) + "\n"


def build_overlay(acyclic_factor: Graph, complete_factor: Graph,
                  *, strict_labels: bool = False) -> ClusteredOverlay:
    """Validate the factors and build the clustered overlay.

    The complete factor is relabeled to indexes 0..k-1 unless strict_labels
    is set, in which case labels must already be exactly those integers.
    """
    if not is_acyclic(acyclic_factor):
        raise AcyclicPropertyViolation("first factor must be acyclic")
    if not acyclic_factor.is_connected():
        u, v = acyclic_factor._unreachable
        raise DisconnectedFactorViolation(
            f"first factor must be connected: no path between {u!r} and {v!r}")
    if not is_complete(complete_factor):
        raise ConnectivityPropertyViolation("second factor must be complete")

    k = complete_factor.order
    expected = list(range(k))
    if list(complete_factor.vertices) == expected:
        indexed = complete_factor
    elif strict_labels:
        raise IndexPropertyViolation(
            f"complete-factor labels must be 0..{k - 1}, got {list(complete_factor.vertices)}")
    else:
        # canonical relabel in deterministic sorted order
        order = sorted(complete_factor.vertices,
                       key=lambda v: (0, v) if isinstance(v, int) else (1, str(v)))
        pos = {v: i for i, v in enumerate(order)}
        indexed = Graph(range(k), [(pos[u], pos[v]) for u, v in complete_factor.edges])

    return ClusteredOverlay(acyclic_factor, indexed)


def build_overlay_from_size(acyclic_factor: Graph, cluster_count: int) -> ClusteredOverlay:
    from .graphs import make_complete
    if cluster_count < 1:
        raise OverlayError("cluster count must be at least 1")
    return build_overlay(acyclic_factor, make_complete(cluster_count))
