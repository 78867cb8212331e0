"""Content model: predicates, subscriptions, notifications, routing tables.

Subscriptions are conjunctions of attribute filters.  Notifications carry a
flat attribute map plus at most one routing header: either a list of
subscription identifiers (flood mode) or a cluster bit vector (dynamic
routing).  Every broker keeps a routing table mapping subscription id to the
stored subscription, the link it arrived on, and the mode-specific metadata.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Union

from .overlay import LinkRef

log = logging.getLogger("clustercast.content")


class ProtocolViolation(RuntimeError):
    """Routing state that the protocols guarantee can never arise."""


# ---- predicates ----

class Operator(Enum):
    EQ = "eq"
    NEQ = "neq"
    LT = "lt"
    LE = "le"
    GT = "gt"
    GE = "ge"

    def __str__(self) -> str:
        return self.value


_ORDERING = {Operator.LT, Operator.LE, Operator.GT, Operator.GE}
Value = Union[str, int, float]


@dataclass(frozen=True)
class Predicate:
    attribute: str
    op: Operator
    value: Value

    def __post_init__(self):
        if not self.attribute:
            raise ValueError("predicate needs an attribute name")
        if self.op in _ORDERING and isinstance(self.value, str):
            raise ValueError(f"operator {self.op} needs a numeric value, got {self.value!r}")

    def evaluate(self, attributes: Mapping[str, Value]) -> bool:
        if self.attribute not in attributes:
            return False
        actual = attributes[self.attribute]
        if isinstance(actual, str) != isinstance(self.value, str):
            log.debug("type mismatch on %r: %r vs %r", self.attribute, actual, self.value)
            return False
        if self.op is Operator.EQ:
            return actual == self.value
        if self.op is Operator.NEQ:
            return actual != self.value
        if self.op is Operator.LT:
            return actual < self.value
        if self.op is Operator.LE:
            return actual <= self.value
        if self.op is Operator.GT:
            return actual > self.value
        return actual >= self.value

    def __str__(self) -> str:
        return f"{self.attribute} {self.op} {self.value}"


def _parse_value(token: str) -> Value:
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


def parse_filters(text: str) -> tuple[Predicate, ...]:
    """Parse "symbol eq IBM, price gt 50" into predicates."""
    preds = []
    for clause in text.split(","):
        clause = clause.strip()
        if not clause:
            raise ValueError(f"empty filter clause in {text!r}")
        parts = clause.split()
        if len(parts) != 3:
            raise ValueError(f"filter clause {clause!r} must be 'attr op value'")
        attr, op_token, value = parts
        try:
            op = Operator(op_token)
        except ValueError:
            raise ValueError(f"unknown operator {op_token!r} in {clause!r}") from None
        preds.append(Predicate(attr, op, _parse_value(value)))
    return tuple(preds)


def parse_attributes(text: str) -> dict[str, Value]:
    """Parse "symbol=IBM, price=55" into an attribute map."""
    attrs: dict[str, Value] = {}
    for clause in text.split(","):
        clause = clause.strip()
        if not clause:
            raise ValueError(f"empty attribute clause in {text!r}")
        name, sep, value = clause.partition("=")
        if not sep or not name.strip() or not value.strip():
            raise ValueError(f"attribute clause {clause!r} must be 'name=value'")
        attrs[name.strip()] = _parse_value(value.strip())
    return attrs


def format_filters(preds: tuple[Predicate, ...]) -> str:
    return ", ".join(str(p) for p in preds)


def format_attributes(attrs: Mapping[str, Value]) -> str:
    return ", ".join(f"{k}={v}" for k, v in attrs.items())


# ---- cluster bit vector ----

@dataclass(frozen=True)
class ClusterBitVector:
    """Fixed-width bit vector, one bit per cluster, bit i for cluster i."""

    width: int
    bits: int = 0

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("bit vector width must be positive")
        if not 0 <= self.bits < (1 << self.width):
            raise ValueError(f"bits 0x{self.bits:x} out of range for width {self.width}")

    @classmethod
    def from_indexes(cls, width: int, indexes) -> "ClusterBitVector":
        bits = 0
        for i in indexes:
            if not 0 <= i < width:
                raise ValueError(f"bit index {i} out of range for width {width}")
            bits |= 1 << i
        return cls(width, bits)

    def set_bit(self, i: int) -> "ClusterBitVector":
        if not 0 <= i < self.width:
            raise ValueError(f"bit index {i} out of range for width {self.width}")
        return ClusterBitVector(self.width, self.bits | (1 << i))

    def clear_bit(self, i: int) -> "ClusterBitVector":
        if not 0 <= i < self.width:
            raise ValueError(f"bit index {i} out of range for width {self.width}")
        return ClusterBitVector(self.width, self.bits & ~(1 << i))

    def test_bit(self, i: int) -> bool:
        return bool(self.bits >> i & 1)

    def is_empty(self) -> bool:
        return self.bits == 0

    def set_indexes(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.width) if self.bits >> i & 1)

    def __str__(self) -> str:
        # rendered most-significant bit first; bit 0 is the rightmost digit
        return format(self.bits, f"0{self.width}b")


# ---- messages ----

class SubscriptionState(Enum):
    PRIMARY = "primary"       # stored inside the subscriber's host cluster
    SECONDARY = "secondary"   # stored outside it

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Subscription:
    id: str                       # assigned by the host broker: "<broker>#<seq>"
    subscriber: str               # client the subscription belongs to
    predicates: tuple[Predicate, ...]
    state: SubscriptionState | None = None
    host_flag: bool = False       # true only on the client-to-broker hop
    cbv_s: ClusterBitVector | None = None

    def __post_init__(self):
        if not self.predicates:
            raise ValueError("subscription needs at least one predicate")
        seen = set()
        for p in self.predicates:
            key = (p.attribute, p.op)
            if key in seen:
                raise ValueError(f"duplicate predicate on {p.attribute!r} with {p.op}")
            seen.add(key)

    def matches(self, attributes: Mapping[str, Value]) -> bool:
        return all(p.evaluate(attributes) for p in self.predicates)


@dataclass(frozen=True)
class Notification:
    id: str
    publisher: str
    attributes: Mapping[str, Value]
    issue_tick: int = 0
    host_flag: bool = False
    bid_list: tuple[str, ...] | None = None
    cluster_bits: ClusterBitVector | None = None

    def __post_init__(self):
        if self.bid_list is not None and self.cluster_bits is not None:
            raise ValueError("notification may carry at most one routing header")
        if self.cluster_bits is not None and self.cluster_bits.is_empty():
            raise ValueError("an all-zero cluster bit vector must not be attached")

    def bare(self) -> "Notification":
        """Copy without routing headers, for local client delivery."""
        if self.bid_list is None and self.cluster_bits is None:
            return self
        return replace(self, bid_list=None, cluster_bits=None)


# ---- routing table ----

class Local:
    """Sentinel last-hop for subscriptions hosted at this broker."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "LOCAL"


LOCAL = Local()
LastHop = Union[LinkRef, Local]


@dataclass(frozen=True)
class TableEntry:
    subscription: Subscription
    last_hop: LastHop
    cbv_s: ClusterBitVector | None = None   # clustered modes
    bid: str | None = None                  # flood mode

    def is_local(self) -> bool:
        return self.last_hop is LOCAL


class RoutingTable:
    """Per-broker subscription store, iterated in insertion order."""

    def __init__(self, broker, clustered: bool):
        self.broker = broker
        self.clustered = clustered
        self._entries: dict[str, TableEntry] = {}
        self.match_calls = 0

    def __len__(self) -> int:
        return len(self._entries)

    def has(self, sub_id: str) -> bool:
        return sub_id in self._entries

    def get(self, sub_id: str) -> TableEntry:
        try:
            return self._entries[sub_id]
        except KeyError:
            raise ProtocolViolation(
                f"routing state corruption at {self.broker}: no entry for {sub_id!r}") from None

    def insert(self, entry: TableEntry) -> None:
        sub_id = entry.subscription.id
        if sub_id in self._entries:
            raise ProtocolViolation(
                f"duplicate subscription {sub_id!r} stored at {self.broker}")
        if self.clustered:
            if entry.cbv_s is None:
                raise ProtocolViolation(f"clustered entry for {sub_id!r} lacks a bit vector")
        elif entry.bid is None:
            raise ProtocolViolation(f"flood entry for {sub_id!r} lacks an identification token")
        self._entries[sub_id] = entry

    def entries(self) -> list[TableEntry]:
        return list(self._entries.values())

    def match(self, notification: Notification) -> list[TableEntry]:
        """All stored subscriptions whose predicates accept the notification."""
        self.match_calls += 1
        attrs = notification.attributes
        return [e for e in self._entries.values() if e.subscription.matches(attrs)]


def distinct_next_hops(entries, *, intra_only: bool = False):
    """Split matched entries into deduplicated forward links and local entries.

    Link order follows first appearance in the entry list.  Local entries are
    kept one per hosted subscriber, never deduplicated.
    """
    links: list[LinkRef] = []
    seen: set[LinkRef] = set()
    local: list[TableEntry] = []
    from .overlay import LinkKind
    for e in entries:
        hop = e.last_hop
        if hop is LOCAL:
            local.append(e)
            continue
        if intra_only and hop.kind is not LinkKind.INTRA:
            continue
        if hop not in seen:
            seen.add(hop)
            links.append(hop)
    return links, local
