"""Content-based publish/subscribe routing over clustered product-graph
overlays, plus a deterministic discrete-event simulator and experiment CLI."""

from .config import (
    ConfigError,
    ExperimentConfig,
    LoadOverride,
    config_from_dict,
    execute,
    expand_scenario,
    load_config,
)
from .content import (
    LOCAL,
    ClusterBitVector,
    Local,
    Notification,
    Operator,
    Predicate,
    ProtocolViolation,
    RoutingTable,
    Subscription,
    SubscriptionState,
    TableEntry,
    distinct_next_hops,
    format_attributes,
    format_filters,
    parse_attributes,
    parse_filters,
)
from .fixtures import fixture_config, fixture_dict, fixture_names
from .graphs import (
    Graph,
    GraphError,
    cartesian_product,
    diameter,
    format_graph_text,
    graph_from_dict,
    graph_to_dict,
    is_acyclic,
    is_complete,
    make_complete,
    make_path,
    make_star,
    make_tree,
    parse_graph_text,
)
from .overlay import (
    AcyclicPropertyViolation,
    BrokerId,
    BrokerKind,
    ClusteredOverlay,
    ConnectivityPropertyViolation,
    DisconnectedFactorViolation,
    IndexPropertyViolation,
    LinkKind,
    LinkRef,
    OverlayError,
    build_overlay,
    build_overlay_from_size,
    parse_broker,
    parse_link,
)
from .routing import (
    BrokerContext,
    LinkLoadView,
    PinnedLoadView,
    RouteResult,
    Send,
    broadcast_subscription,
    flood_subscription,
    route_dynamic,
    route_flood_notification,
    route_static,
)
from .simulator import (
    CongestionParams,
    CostParams,
    DeliveryRecord,
    LinkParams,
    LinkWindowRow,
    RoutingMode,
    RunResult,
    Simulation,
    SimulationTimeout,
    SubscriptionStats,
    run_simulation,
    summary_lines,
    write_outputs,
)
from .workload import (
    BURST_SYMBOL,
    BurstSpec,
    PublishEvent,
    SubscribeEvent,
    WorkloadError,
    WorkloadSpec,
    burst_publisher_broker,
    generate_workload,
)

__version__ = "0.1.0"
