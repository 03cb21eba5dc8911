//! Simplified 802.11 DCF: carrier sense, slotted binary-exponential
//! backoff, ACKed unicast with retransmission, and a shared medium that
//! applies the binary interference rule — a frame survives at a receiver
//! only if no other in-range transmission overlaps its airtime and the
//! receiver itself stayed quiet.
//!
//! No RTS/CTS, no capture effect, single rate.

use std::collections::{BTreeMap, VecDeque};

use crate::config::MacSection;
use crate::engine::EventHandle;
use crate::packet::Frame;
use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy)]
pub struct MacParams {
    pub header_overhead_bytes: u32,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub slot: SimTime,
    pub sifs: SimTime,
}

impl MacParams {
    pub fn from_config(mac: &MacSection) -> MacParams {
        MacParams {
            header_overhead_bytes: mac.header_overhead_bytes,
            cw_min: mac.cw_min,
            cw_max: mac.cw_max,
            retry_limit: mac.retry_limit,
            slot: SimTime::from_micros(mac.slot_us),
            sifs: SimTime::from_micros(mac.sifs_us),
        }
    }

    pub fn difs(&self) -> SimTime {
        self.sifs + self.slot + self.slot
    }
}

/// Per-node MAC service state for the frame at the head of the queue.
#[derive(Debug)]
pub enum MacPhase {
    Idle,
    /// Head frame pending, medium sensed busy. `pending_slots` carries a
    /// frozen countdown; `None` means a fresh draw happens at resume.
    WaitIdle {
        pending_slots: Option<u32>,
    },
    Backoff {
        slots_left: u32,
        /// When this countdown (re)started; consumed slots are derived
        /// from it on a freeze.
        started: SimTime,
        expiry: EventHandle,
    },
    /// Backoff expired; the transmission starts this tick and ignores
    /// carrier state in between — two stations whose countdowns end in the
    /// same slot both transmit and collide.
    Committed,
    Transmitting {
        tx_id: u64,
    },
    AwaitAck {
        peer: NodeId,
        timeout: EventHandle,
    },
}

#[derive(Debug)]
pub struct Mac {
    pub phase: MacPhase,
    pub queue: VecDeque<Frame>,
    pub cw: u32,
    pub retries: u32,
    /// In-range transmissions currently on the air, as sensed here.
    pub busy_count: u32,
    pub next_mac_seq: u32,
    /// Last accepted sequence per transmitter, for duplicate suppression
    /// when a delivered frame's ACK is lost and the frame is retried.
    pub last_rx_seq: BTreeMap<NodeId, u32>,
}

impl Mac {
    pub fn new(params: &MacParams) -> Mac {
        Mac {
            phase: MacPhase::Idle,
            queue: VecDeque::new(),
            cw: params.cw_min,
            retries: 0,
            busy_count: 0,
            next_mac_seq: 0,
            last_rx_seq: BTreeMap::new(),
        }
    }

    pub fn sensed_busy(&self) -> bool {
        self.busy_count > 0
    }

    pub fn head(&self) -> Option<&Frame> {
        self.queue.front()
    }

    pub fn bump_cw(&mut self, params: &MacParams) {
        self.cw = ((self.cw << 1) | 1).min(params.cw_max);
    }

    pub fn reset_after_service(&mut self, params: &MacParams) {
        self.cw = params.cw_min;
        self.retries = 0;
    }

    /// Whole slots consumed by a countdown running since `started` when the
    /// medium turns busy at `now`.
    pub fn consumed_slots(params: &MacParams, started: SimTime, now: SimTime, slots_left: u32) -> u32 {
        let elapsed = now.saturating_sub(started + params.difs());
        let consumed = (elapsed.as_micros() / params.slot.as_micros()) as u32;
        consumed.min(slots_left)
    }

    /// Countdown expiry for `slots` remaining, starting at `now`.
    pub fn backoff_expiry(params: &MacParams, now: SimTime, slots: u32) -> SimTime {
        now + params.difs() + SimTime::from_micros(slots as u64 * params.slot.as_micros())
    }
}

/// One receiver's view of one transmission.
#[derive(Debug, Clone)]
pub struct Reception {
    pub node: NodeId,
    pub corrupted: bool,
    /// Whether receive energy was charged (not while the node was itself
    /// transmitting at the frame's start).
    pub charged: bool,
}

/// A transmission currently on the air.
#[derive(Debug)]
pub struct ActiveTx {
    pub id: u64,
    pub sender: NodeId,
    pub frame: Frame,
    pub start: SimTime,
    pub end: SimTime,
    pub receivers: Vec<Reception>,
}

/// The shared radio medium: the set of in-flight transmissions and the
/// interference bookkeeping between them.
#[derive(Debug, Default)]
pub struct Medium {
    active: BTreeMap<u64, ActiveTx>,
    next_id: u64,
}

impl Medium {
    pub fn new() -> Medium {
        Medium::default()
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn is_transmitting(&self, node: NodeId) -> bool {
        self.active.values().any(|tx| tx.sender == node)
    }

    /// Puts a transmission on the air. Any receiver already covered by
    /// another in-flight transmission loses both frames; a receiver that is
    /// itself mid-transmission never hears the new one.
    pub fn begin(
        &mut self,
        sender: NodeId,
        frame: Frame,
        start: SimTime,
        end: SimTime,
        receiver_nodes: &[NodeId],
    ) -> u64 {
        let mut receivers: Vec<Reception> = Vec::with_capacity(receiver_nodes.len());
        for &node in receiver_nodes {
            let transmitting = self.is_transmitting(node);
            let mut corrupted = transmitting;
            for tx in self.active.values_mut() {
                // The new transmitter stops listening to anything in flight.
                for rec in tx.receivers.iter_mut() {
                    if rec.node == sender {
                        rec.corrupted = true;
                    }
                }
                for rec in tx.receivers.iter_mut() {
                    if rec.node == node {
                        rec.corrupted = true;
                        corrupted = true;
                    }
                }
            }
            receivers.push(Reception {
                node,
                corrupted,
                charged: !transmitting,
            });
        }
        // A begin with no receivers still silences the sender's inbound
        // receptions.
        if receiver_nodes.is_empty() {
            for tx in self.active.values_mut() {
                for rec in tx.receivers.iter_mut() {
                    if rec.node == sender {
                        rec.corrupted = true;
                    }
                }
            }
        }
        let id = self.next_id;
        self.next_id += 1;
        self.active.insert(
            id,
            ActiveTx {
                id,
                sender,
                frame,
                start,
                end,
                receivers,
            },
        );
        id
    }

    /// Takes a completed transmission off the air.
    pub fn finish(&mut self, id: u64) -> ActiveTx {
        self.active.remove(&id).expect("transmission not on the air")
    }

    pub fn receptions(&self, id: u64) -> &[Reception] {
        &self.active[&id].receivers
    }

    pub fn frames_on_air(&self) -> impl Iterator<Item = &Frame> {
        self.active.values().map(|tx| &tx.frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::MacDest;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn frame(src: u32, dst: u32) -> Frame {
        Frame::ack(n(src), n(dst), 32)
    }

    fn params() -> MacParams {
        MacParams::from_config(&MacSection::default())
    }

    #[test]
    fn difs_is_sifs_plus_two_slots() {
        assert_eq!(params().difs(), SimTime::from_micros(50));
    }

    #[test]
    fn single_transmitter_is_delivered() {
        let mut m = Medium::new();
        let id = m.begin(
            n(0),
            frame(0, 1),
            SimTime::ZERO,
            SimTime::from_micros(2176),
            &[n(1)],
        );
        let tx = m.finish(id);
        assert!(!tx.receivers[0].corrupted);
        assert!(tx.receivers[0].charged);
    }

    #[test]
    fn overlapping_transmissions_corrupt_the_common_receiver() {
        // Hand trace: A covers B over [0, 2176], C covers B over
        // [1000, 3176]; the intervals overlap, so B gets neither.
        let mut m = Medium::new();
        let a = m.begin(n(0), frame(0, 1), SimTime::ZERO, SimTime::from_micros(2176), &[n(1)]);
        let c = m.begin(
            n(2),
            frame(2, 1),
            SimTime::from_micros(1000),
            SimTime::from_micros(3176),
            &[n(1)],
        );
        let tx_a = m.finish(a);
        let tx_c = m.finish(c);
        assert!(tx_a.receivers[0].corrupted);
        assert!(tx_c.receivers[0].corrupted);
    }

    #[test]
    fn per_receiver_corruption_is_local() {
        // D hears only C, so C's frame survives at D even though it
        // collided at B.
        let mut m = Medium::new();
        let a = m.begin(n(0), frame(0, 1), SimTime::ZERO, SimTime::from_micros(2176), &[n(1)]);
        let c = m.begin(
            n(2),
            frame(2, 3),
            SimTime::from_micros(1000),
            SimTime::from_micros(3176),
            &[n(1), n(3)],
        );
        let tx_a = m.finish(a);
        let tx_c = m.finish(c);
        assert!(tx_a.receivers[0].corrupted);
        assert!(tx_c.receivers.iter().any(|r| r.node == n(1) && r.corrupted));
        assert!(tx_c.receivers.iter().any(|r| r.node == n(3) && !r.corrupted));
    }

    #[test]
    fn back_to_back_transmissions_do_not_collide() {
        let mut m = Medium::new();
        let a = m.begin(n(0), frame(0, 1), SimTime::ZERO, SimTime::from_micros(1000), &[n(1)]);
        let tx_a = m.finish(a);
        assert!(!tx_a.receivers[0].corrupted);
        let c = m.begin(
            n(2),
            frame(2, 1),
            SimTime::from_micros(1000),
            SimTime::from_micros(2000),
            &[n(1)],
        );
        let tx_c = m.finish(c);
        assert!(!tx_c.receivers[0].corrupted);
    }

    #[test]
    fn transmitting_receiver_hears_nothing() {
        let mut m = Medium::new();
        let own = m.begin(n(1), frame(1, 5), SimTime::ZERO, SimTime::from_micros(2000), &[n(5)]);
        let other = m.begin(
            n(0),
            frame(0, 1),
            SimTime::from_micros(100),
            SimTime::from_micros(2100),
            &[n(1)],
        );
        let tx = m.finish(other);
        assert!(tx.receivers[0].corrupted);
        assert!(!tx.receivers[0].charged);
        // The half-duplex rule is one-way here: n(5) still hears n(1).
        let own_tx = m.finish(own);
        assert!(!own_tx.receivers[0].corrupted);
    }

    #[test]
    fn new_transmitter_abandons_its_receptions() {
        let mut m = Medium::new();
        let inbound = m.begin(n(0), frame(0, 1), SimTime::ZERO, SimTime::from_micros(2000), &[n(1)]);
        // Node 1 starts transmitting mid-reception.
        m.begin(
            n(1),
            frame(1, 2),
            SimTime::from_micros(500),
            SimTime::from_micros(2500),
            &[n(2)],
        );
        let tx = m.finish(inbound);
        assert!(tx.receivers[0].corrupted);
    }

    #[test]
    fn backoff_slot_accounting() {
        let p = params();
        // 5 slots starting at t=0: expiry at DIFS + 100us.
        assert_eq!(
            Mac::backoff_expiry(&p, SimTime::ZERO, 5),
            SimTime::from_micros(150)
        );
        // Frozen 2.5 slots into the countdown: 2 slots consumed.
        let consumed = Mac::consumed_slots(&p, SimTime::ZERO, SimTime::from_micros(100), 5);
        assert_eq!(consumed, 2);
        // Frozen before DIFS elapsed: nothing consumed.
        assert_eq!(Mac::consumed_slots(&p, SimTime::ZERO, SimTime::from_micros(30), 5), 0);
        // Never consumes more than remain.
        assert_eq!(Mac::consumed_slots(&p, SimTime::ZERO, SimTime::from_secs(1), 5), 5);
    }

    #[test]
    fn cw_doubles_to_the_cap() {
        let p = params();
        let mut mac = Mac::new(&p);
        assert_eq!(mac.cw, 31);
        mac.bump_cw(&p);
        assert_eq!(mac.cw, 63);
        for _ in 0..10 {
            mac.bump_cw(&p);
        }
        assert_eq!(mac.cw, 1023);
        mac.reset_after_service(&p);
        assert_eq!(mac.cw, 31);
        assert_eq!(mac.retries, 0);
    }

    #[test]
    fn broadcast_frames_are_flagged() {
        let f = Frame::msg(
            n(0),
            MacDest::Broadcast,
            crate::packet::RoutingMsg::AodvRerr(crate::packet::AodvRerr { unreachable: vec![] }),
            32,
        );
        assert!(f.dst.is_broadcast());
    }
}
