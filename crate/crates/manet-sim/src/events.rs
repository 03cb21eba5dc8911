//! Event vocabulary dispatched by the simulation loop.

use crate::NodeId;

/// Protocol-owned timers, dispatched back into the owning node's routing
/// state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutingTimer {
    AodvDiscoveryTimeout { dest: NodeId },
    AodvEntryExpiry { dest: NodeId },
    DsrDiscoveryTimeout { dest: NodeId },
    ZrpIarpTick,
    ZrpQueryTimeout { dest: NodeId },
}

/// A moving entity: a node, or a group-mobility reference point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mover {
    Node(NodeId),
    Group(u32),
}

#[derive(Debug)]
pub enum EventKind {
    /// A mover reached its waypoint; pick the next leg.
    WaypointArrival { mover: Mover },
    /// A CBR flow offers its next packet to the routing layer.
    TrafficTick { flow: u32 },
    /// Backoff countdown hit zero; the node commits to transmit.
    MacBackoffDone { node: NodeId },
    /// Committed transmission actually starts (same tick as the commit, a
    /// separate event so same-slot commits collide instead of deferring).
    MacTxStart { node: NodeId },
    /// A transmission leaves the air; receivers resolve their receptions.
    MacTxEnd { tx_id: u64 },
    /// SIFS elapsed after a clean unicast reception; the ACK goes out.
    MacAckStart { node: NodeId, peer: NodeId },
    /// No ACK arrived in time for the frame in service.
    MacAckTimeout { node: NodeId },
    RoutingTimer { node: NodeId, timer: RoutingTimer },
    /// Battery check: definitive checks mark the node dead on the spot,
    /// projected ones revalidate the ledger first.
    DeathCheck { node: NodeId, definitive: bool },
    SimEnd,
}

impl EventKind {
    /// Compact fingerprint folded into the run's event-trace hash.
    pub fn trace_tag(&self) -> (u8, u64) {
        match *self {
            EventKind::WaypointArrival { mover: Mover::Node(n) } => (1, n.0 as u64),
            EventKind::WaypointArrival { mover: Mover::Group(g) } => (2, g as u64),
            EventKind::TrafficTick { flow } => (3, flow as u64),
            EventKind::MacBackoffDone { node } => (4, node.0 as u64),
            EventKind::MacTxStart { node } => (5, node.0 as u64),
            EventKind::MacTxEnd { tx_id } => (6, tx_id),
            EventKind::MacAckStart { node, .. } => (7, node.0 as u64),
            EventKind::MacAckTimeout { node } => (8, node.0 as u64),
            EventKind::RoutingTimer { node, .. } => (9, node.0 as u64),
            EventKind::DeathCheck { node, definitive } => {
                (if definitive { 10 } else { 11 }, node.0 as u64)
            }
            EventKind::SimEnd => (12, 0),
        }
    }
}
