//! Routing-layer plumbing shared by the three protocols: the context
//! handed into every handler, and the enum that dispatches per-node
//! protocol state.

use rand_chacha::ChaCha12Rng;

use crate::aodv::AodvState;
use crate::dsr::DsrState;
use crate::engine::{EventHandle, EventQueue};
use crate::events::{EventKind, RoutingTimer};
use crate::packet::{DataPacket, Frame, MacDest, RoutingMsg};
use crate::stats::{Counters, DropReason};
use crate::time::SimTime;
use crate::traffic::FlowBook;
use crate::zrp::ZrpState;
use crate::NodeId;

/// Engine services available to a routing handler. Outgoing frames are
/// collected in `outbox` and submitted to the MAC after the handler
/// returns.
pub(crate) struct RoutingCtx<'a> {
    pub now: SimTime,
    pub me: NodeId,
    pub queue: &'a mut EventQueue<EventKind>,
    pub rng: &'a mut ChaCha12Rng,
    pub counters: &'a mut Counters,
    pub flows: &'a mut FlowBook,
    pub outbox: &'a mut Vec<Frame>,
    pub mac_overhead: u32,
}

impl RoutingCtx<'_> {
    pub fn send(&mut self, dst: MacDest, msg: RoutingMsg) {
        if msg.is_control() {
            self.counters.ctrl_packets += 1;
            self.counters.ctrl_bytes += msg.payload_bytes() as u64;
        }
        self.outbox
            .push(Frame::msg(self.me, dst, msg, self.mac_overhead));
    }

    /// Resubmits a frame that came back from the MAC, preserving its
    /// sequence number so receivers still recognize duplicates.
    pub fn resubmit(&mut self, mut frame: Frame) {
        frame.resubmits += 1;
        if let Some(msg) = frame.routing_msg() {
            if msg.is_control() {
                self.counters.ctrl_packets += 1;
                self.counters.ctrl_bytes += msg.payload_bytes() as u64;
            }
        }
        self.outbox.push(frame);
    }

    pub fn schedule_timer(&mut self, at: SimTime, timer: RoutingTimer) -> EventHandle {
        self.queue.schedule(
            at,
            EventKind::RoutingTimer {
                node: self.me,
                timer,
            },
        )
    }

    pub fn cancel_timer(&mut self, handle: EventHandle) -> bool {
        self.queue.cancel(handle)
    }

    pub fn deliver(&mut self, pkt: DataPacket) {
        if self.flows.record_delivered(pkt.flow, pkt.seq) {
            self.counters.data_delivered += 1;
        }
    }

    pub fn drop_pkt(&mut self, pkt: DataPacket, reason: DropReason) {
        self.flows.record_dropped(pkt.flow, pkt.seq);
        self.counters.count_drop(reason);
    }
}

/// Per-node routing state, one variant per protocol.
#[derive(Debug)]
pub(crate) enum ProtocolState {
    Aodv(AodvState),
    Dsr(DsrState),
    Zrp(ZrpState),
}

impl ProtocolState {
    pub fn init(&mut self, ctx: &mut RoutingCtx) {
        match self {
            ProtocolState::Aodv(s) => s.init(ctx),
            ProtocolState::Dsr(s) => s.init(ctx),
            ProtocolState::Zrp(s) => s.init(ctx),
        }
    }

    pub fn send_data(&mut self, pkt: DataPacket, ctx: &mut RoutingCtx) {
        match self {
            ProtocolState::Aodv(s) => s.send_data(pkt, ctx),
            ProtocolState::Dsr(s) => s.send_data(pkt, ctx),
            ProtocolState::Zrp(s) => s.send_data(pkt, ctx),
        }
    }

    /// A frame addressed to this node (or broadcast) arrived cleanly;
    /// `transmitter` is the node that put it on the air.
    pub fn handle_msg(&mut self, msg: RoutingMsg, transmitter: NodeId, ctx: &mut RoutingCtx) {
        match self {
            ProtocolState::Aodv(s) => s.handle_msg(msg, transmitter, ctx),
            ProtocolState::Dsr(s) => s.handle_msg(msg, transmitter, ctx),
            ProtocolState::Zrp(s) => s.handle_msg(msg, transmitter, ctx),
        }
    }

    /// A clean unicast reception addressed to somebody else.
    pub fn overheard(&mut self, msg: &RoutingMsg, ctx: &mut RoutingCtx) {
        match self {
            ProtocolState::Aodv(_) => {}
            ProtocolState::Dsr(s) => s.overheard(msg, ctx),
            ProtocolState::Zrp(_) => {}
        }
    }

    /// The MAC exhausted retransmissions for this frame.
    pub fn link_failure(&mut self, frame: Frame, ctx: &mut RoutingCtx) {
        match self {
            ProtocolState::Aodv(s) => s.link_failure(frame, ctx),
            ProtocolState::Dsr(s) => s.link_failure(frame, ctx),
            ProtocolState::Zrp(s) => s.link_failure(frame, ctx),
        }
    }

    pub fn timer(&mut self, timer: RoutingTimer, ctx: &mut RoutingCtx) {
        match self {
            ProtocolState::Aodv(s) => s.timer(timer, ctx),
            ProtocolState::Dsr(s) => s.timer(timer, ctx),
            ProtocolState::Zrp(s) => s.timer(timer, ctx),
        }
    }

    /// Data packets currently buffered awaiting route discovery. Used by
    /// the end-of-run packet-conservation walk.
    pub fn buffered_packets(&self) -> Vec<DataPacket> {
        match self {
            ProtocolState::Aodv(s) => s.buffered_packets(),
            ProtocolState::Dsr(s) => s.buffered_packets(),
            ProtocolState::Zrp(s) => s.buffered_packets(),
        }
    }
}
