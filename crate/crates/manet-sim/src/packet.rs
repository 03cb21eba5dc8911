//! Frames and routing payloads.
//!
//! A frame is what the MAC puts on the air: a fixed per-frame header
//! overhead plus either an ACK or a routing payload. Payload sizes follow
//! simple wire laws so control overhead and source-route growth show up in
//! the energy accounting.

use std::collections::BTreeSet;

use crate::NodeId;

/// Link-layer destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacDest {
    Node(NodeId),
    Broadcast,
}

impl MacDest {
    pub fn is_broadcast(&self) -> bool {
        matches!(self, MacDest::Broadcast)
    }
}

/// One application packet of a CBR flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataPacket {
    pub flow: u32,
    pub seq: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub payload_bytes: u32,
}

/// An ordered, duplicate-free node path. The first entry is the source,
/// the last the destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRoute {
    hops: Vec<NodeId>,
}

impl SourceRoute {
    /// Builds a route, rejecting paths with repeated nodes or fewer than
    /// two entries.
    pub fn new(hops: Vec<NodeId>) -> Option<SourceRoute> {
        if hops.len() < 2 {
            return None;
        }
        let unique: BTreeSet<NodeId> = hops.iter().copied().collect();
        if unique.len() != hops.len() {
            return None;
        }
        Some(SourceRoute { hops })
    }

    /// Collapses a walk into a simple path by splicing out revisits: on a
    /// repeat, the segment between the two occurrences is cut. Consecutive
    /// pairs in the result were consecutive in the walk, so every remaining
    /// hop is a real link.
    pub fn from_walk(walk: &[NodeId]) -> Option<SourceRoute> {
        let mut path: Vec<NodeId> = Vec::with_capacity(walk.len());
        for &n in walk {
            if let Some(i) = path.iter().position(|&m| m == n) {
                path.truncate(i);
            }
            path.push(n);
        }
        SourceRoute::new(path)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.hops
    }

    pub fn source(&self) -> NodeId {
        self.hops[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.hops.last().unwrap()
    }

    /// Number of links along the path.
    pub fn hop_count(&self) -> u32 {
        (self.hops.len() - 1) as u32
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.hops.contains(&n)
    }

    /// Next hop after `n`, or `None` if `n` is absent or the final hop.
    pub fn successor_of(&self, n: NodeId) -> Option<NodeId> {
        let i = self.hops.iter().position(|&m| m == n)?;
        self.hops.get(i + 1).copied()
    }

    /// True if the undirected link `{a, b}` appears consecutively.
    pub fn contains_link(&self, a: NodeId, b: NodeId) -> bool {
        self.hops
            .windows(2)
            .any(|w| (w[0] == a && w[1] == b) || (w[0] == b && w[1] == a))
    }

    /// Path from the source up to and including `n`, reversed — the return
    /// path for error reports.
    pub fn reverse_prefix_from(&self, n: NodeId) -> Option<SourceRoute> {
        let i = self.hops.iter().position(|&m| m == n)?;
        let mut back: Vec<NodeId> = self.hops[..=i].to_vec();
        back.reverse();
        SourceRoute::new(back)
    }

    pub fn reversed(&self) -> SourceRoute {
        let mut hops = self.hops.clone();
        hops.reverse();
        SourceRoute { hops }
    }
}

/// AODV route request, flooded network-wide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AodvRreq {
    pub origin: NodeId,
    pub origin_seq: u32,
    pub broadcast_id: u32,
    pub dest: NodeId,
    /// Last destination sequence number known at the origin; `None` when
    /// the origin has never held a route.
    pub dest_seq_known: Option<u32>,
    pub hop_count: u32,
}

/// AODV route reply, unicast along the reverse path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AodvRrep {
    pub dest: NodeId,
    pub dest_seq: u32,
    pub hop_count: u32,
    pub origin: NodeId,
    pub lifetime_us: u64,
}

/// AODV route error listing newly unreachable destinations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AodvRerr {
    pub unreachable: Vec<(NodeId, u32)>,
}

/// DSR route request accumulating the traversed path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsrRreq {
    pub initiator: NodeId,
    pub target: NodeId,
    pub request_id: u32,
    pub record: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsrRrep {
    pub route: SourceRoute,
    /// Remaining hops for the reply's own travel back to the initiator.
    pub return_route: SourceRoute,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsrRerr {
    pub broken_from: NodeId,
    pub broken_to: NodeId,
    pub return_route: SourceRoute,
}

/// Periodic intra-zone link-state advertisement, flooded with a hop limit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IarpAdvert {
    pub origin: NodeId,
    pub advert_seq: u32,
    pub neighbors: Vec<NodeId>,
    pub ttl: u32,
}

/// Inter-zone route query relayed border node to border node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IerpQuery {
    pub origin: NodeId,
    pub target: NodeId,
    pub query_id: u32,
    /// Chain of border nodes the query has passed through, origin first.
    pub chain: Vec<NodeId>,
    /// Nodes whose zones are already covered; relays skip these.
    pub covered: BTreeSet<NodeId>,
    /// Intra-zone path carrying this copy to its next border node.
    pub relay_route: SourceRoute,
}

/// Inter-zone route reply retracing the query's border-node chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IerpReply {
    pub origin: NodeId,
    pub target: NodeId,
    pub query_id: u32,
    pub chain: Vec<NodeId>,
    /// Index into `chain` of the border node currently holding the reply.
    pub chain_pos: usize,
    /// Full path accumulated so far, from `chain[chain_pos]` to the target.
    pub route_tail: Vec<NodeId>,
    pub relay_route: SourceRoute,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZrpRerr {
    pub broken_from: NodeId,
    pub broken_to: NodeId,
    pub return_route: SourceRoute,
}

/// Everything the routing layer can put in a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoutingMsg {
    AodvRreq(AodvRreq),
    AodvRrep(AodvRrep),
    AodvRerr(AodvRerr),
    AodvData(DataPacket),
    DsrRreq(DsrRreq),
    DsrRrep(DsrRrep),
    DsrRerr(DsrRerr),
    DsrData {
        route: SourceRoute,
        pkt: DataPacket,
    },
    IarpAdvert(IarpAdvert),
    IerpQuery(IerpQuery),
    IerpReply(IerpReply),
    ZrpRerr(ZrpRerr),
    /// Intra-zone data, forwarded hop by hop from the zone tables.
    ZrpDataIntra {
        dst: NodeId,
        pkt: DataPacket,
    },
    /// Extra-zone data carrying a full source route.
    ZrpDataRouted {
        route: SourceRoute,
        pkt: DataPacket,
    },
}

impl RoutingMsg {
    /// Wire size of the routing payload, before MAC/PHY overhead.
    pub fn payload_bytes(&self) -> u32 {
        match self {
            RoutingMsg::AodvRreq(_) => 24,
            RoutingMsg::AodvRrep(_) => 20,
            RoutingMsg::AodvRerr(_) => 20,
            RoutingMsg::AodvData(pkt) => pkt.payload_bytes,
            RoutingMsg::DsrRreq(r) => 8 + 4 * r.record.len() as u32,
            RoutingMsg::DsrRrep(r) => 8 + 4 * r.route.nodes().len() as u32,
            RoutingMsg::DsrRerr(_) => 20,
            // Source-route header: 4 bytes fixed plus 4 per hop.
            RoutingMsg::DsrData { route, pkt } => pkt.payload_bytes + 4 + 4 * route.hop_count(),
            RoutingMsg::IarpAdvert(a) => 8 + 4 * a.neighbors.len() as u32,
            RoutingMsg::IerpQuery(q) => {
                16 + 4 * (q.chain.len() + q.covered.len() + q.relay_route.nodes().len()) as u32
            }
            RoutingMsg::IerpReply(r) => {
                16 + 4 * (r.chain.len() + r.route_tail.len() + r.relay_route.nodes().len()) as u32
            }
            RoutingMsg::ZrpRerr(_) => 20,
            RoutingMsg::ZrpDataIntra { pkt, .. } => pkt.payload_bytes,
            RoutingMsg::ZrpDataRouted { route, pkt } => {
                pkt.payload_bytes + 4 + 4 * route.hop_count()
            }
        }
    }

    pub fn is_control(&self) -> bool {
        !matches!(
            self,
            RoutingMsg::AodvData(_)
                | RoutingMsg::DsrData { .. }
                | RoutingMsg::ZrpDataIntra { .. }
                | RoutingMsg::ZrpDataRouted { .. }
        )
    }

    /// The data packet inside, if this is a data-bearing message.
    pub fn data(&self) -> Option<&DataPacket> {
        match self {
            RoutingMsg::AodvData(pkt)
            | RoutingMsg::DsrData { pkt, .. }
            | RoutingMsg::ZrpDataIntra { pkt, .. }
            | RoutingMsg::ZrpDataRouted { pkt, .. } => Some(pkt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameBody {
    Msg(RoutingMsg),
    Ack,
}

/// A link-layer frame as transmitted. `src` is the transmitter of this hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub src: NodeId,
    pub dst: MacDest,
    pub body: FrameBody,
    /// Per-transmitter sequence number used for duplicate suppression at
    /// receivers; retransmissions reuse it.
    pub mac_seq: u32,
    pub size_bytes: u32,
    /// Resubmission count at the routing layer (link maintenance), not MAC
    /// retries.
    pub resubmits: u32,
}

impl Frame {
    pub fn msg(src: NodeId, dst: MacDest, msg: RoutingMsg, overhead_bytes: u32) -> Frame {
        let size_bytes = overhead_bytes + msg.payload_bytes();
        Frame {
            src,
            dst,
            body: FrameBody::Msg(msg),
            mac_seq: 0,
            size_bytes,
            resubmits: 0,
        }
    }

    pub fn ack(src: NodeId, dst: NodeId, overhead_bytes: u32) -> Frame {
        Frame {
            src,
            dst: MacDest::Node(dst),
            body: FrameBody::Ack,
            mac_seq: 0,
            size_bytes: overhead_bytes,
            resubmits: 0,
        }
    }

    pub fn is_ack(&self) -> bool {
        matches!(self.body, FrameBody::Ack)
    }

    pub fn routing_msg(&self) -> Option<&RoutingMsg> {
        match &self.body {
            FrameBody::Msg(m) => Some(m),
            FrameBody::Ack => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    #[test]
    fn source_route_rejects_duplicates_and_short_paths() {
        assert!(SourceRoute::new(vec![n(1)]).is_none());
        assert!(SourceRoute::new(vec![n(1), n(2), n(1)]).is_none());
        let r = SourceRoute::new(vec![n(1), n(2), n(3)]).unwrap();
        assert_eq!(r.source(), n(1));
        assert_eq!(r.destination(), n(3));
        assert_eq!(r.hop_count(), 2);
    }

    #[test]
    fn successor_lookup() {
        let r = SourceRoute::new(vec![n(1), n(2), n(3)]).unwrap();
        assert_eq!(r.successor_of(n(2)), Some(n(3)));
        assert_eq!(r.successor_of(n(3)), None);
        assert_eq!(r.successor_of(n(9)), None);
    }

    #[test]
    fn walk_compression_splices_out_cycles() {
        let walk = [n(1), n(2), n(3), n(2), n(4)];
        let r = SourceRoute::from_walk(&walk).unwrap();
        assert_eq!(r.nodes(), &[n(1), n(2), n(4)]);
        // Already-simple walks pass through unchanged.
        let simple = [n(5), n(6), n(7)];
        assert_eq!(SourceRoute::from_walk(&simple).unwrap().nodes(), &simple);
    }

    #[test]
    fn link_membership_is_undirected() {
        let r = SourceRoute::new(vec![n(1), n(2), n(3)]).unwrap();
        assert!(r.contains_link(n(2), n(1)));
        assert!(r.contains_link(n(2), n(3)));
        assert!(!r.contains_link(n(1), n(3)));
    }

    #[test]
    fn reverse_prefix_builds_return_path() {
        let r = SourceRoute::new(vec![n(1), n(2), n(3), n(4)]).unwrap();
        let back = r.reverse_prefix_from(n(3)).unwrap();
        assert_eq!(back.nodes(), &[n(3), n(2), n(1)]);
    }

    #[test]
    fn dsr_header_grows_with_route_length() {
        let pkt = DataPacket {
            flow: 0,
            seq: 0,
            src: n(1),
            dst: n(4),
            payload_bytes: 512,
        };
        let short = RoutingMsg::DsrData {
            route: SourceRoute::new(vec![n(1), n(4)]).unwrap(),
            pkt,
        };
        let long = RoutingMsg::DsrData {
            route: SourceRoute::new(vec![n(1), n(2), n(3), n(4)]).unwrap(),
            pkt,
        };
        assert_eq!(short.payload_bytes(), 512 + 4 + 4);
        assert_eq!(long.payload_bytes(), 512 + 4 + 12);
        assert!(long.payload_bytes() > short.payload_bytes());
    }

    #[test]
    fn control_sizes() {
        let rreq = RoutingMsg::AodvRreq(AodvRreq {
            origin: n(1),
            origin_seq: 1,
            broadcast_id: 1,
            dest: n(2),
            dest_seq_known: None,
            hop_count: 0,
        });
        assert_eq!(rreq.payload_bytes(), 24);
        assert!(rreq.is_control());
        let pkt = DataPacket {
            flow: 0,
            seq: 0,
            src: n(1),
            dst: n(2),
            payload_bytes: 512,
        };
        assert!(!RoutingMsg::AodvData(pkt).is_control());
        // Frame size includes the fixed overhead.
        let f = Frame::msg(n(1), MacDest::Broadcast, rreq, 32);
        assert_eq!(f.size_bytes, 56);
        assert_eq!(Frame::ack(n(1), n(2), 32).size_bytes, 32);
    }
}
