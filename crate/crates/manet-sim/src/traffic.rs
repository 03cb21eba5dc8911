//! Constant-bit-rate traffic and per-flow packet accounting.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::stats::FlowReport;
use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug)]
pub struct FlowState {
    pub src: NodeId,
    pub dst: NodeId,
    pub packet_bytes: u32,
    pub interval: SimTime,
    pub start: SimTime,
    pub next_seq: u64,
    /// Distinct sequence numbers that reached the destination.
    pub delivered: BTreeSet<u64>,
    /// Distinct sequence numbers observed dropped somewhere.
    pub dropped: BTreeSet<u64>,
}

impl FlowState {
    pub fn offered(&self) -> u64 {
        self.next_seq
    }
}

/// All flows of a run. Delivery and drop records are keyed by sequence
/// number so duplicate copies of one packet cannot distort the totals.
#[derive(Debug, Default)]
pub struct FlowBook {
    pub flows: Vec<FlowState>,
}

impl FlowBook {
    /// Records a delivery; `true` if this sequence number is new.
    pub fn record_delivered(&mut self, flow: u32, seq: u64) -> bool {
        self.flows[flow as usize].delivered.insert(seq)
    }

    pub fn record_dropped(&mut self, flow: u32, seq: u64) {
        self.flows[flow as usize].dropped.insert(seq);
    }

    /// Per-flow report with delivered-beats-dropped precedence, so the
    /// three fates partition the offered packets.
    pub fn reports(&self) -> Vec<FlowReport> {
        self.flows
            .iter()
            .map(|f| {
                let delivered = f.delivered.len() as u64;
                let dropped_only = f.dropped.difference(&f.delivered).count() as u64;
                let offered = f.offered();
                FlowReport {
                    src: f.src.0,
                    dst: f.dst.0,
                    offered,
                    delivered,
                    dropped: dropped_only,
                    in_flight: offered - delivered - dropped_only,
                }
            })
            .collect()
    }
}

/// Draws `n` distinct ordered (src, dst) pairs uniformly, deterministic in
/// the stream's state.
pub fn spawn_pairs(n: u32, n_nodes: u32, rng: &mut ChaCha12Rng) -> Vec<(NodeId, NodeId)> {
    assert!(
        (n as u64) <= n_nodes as u64 * (n_nodes as u64 - 1),
        "more connections than distinct pairs"
    );
    let mut used: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut out = Vec::with_capacity(n as usize);
    while out.len() < n as usize {
        let src = rng.gen_range(0..n_nodes);
        let dst = rng.gen_range(0..n_nodes);
        if src != dst && used.insert((src, dst)) {
            out.push((NodeId(src), NodeId(dst)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn pairs_are_distinct_and_deterministic() {
        let a = spawn_pairs(6, 30, &mut substream(5, 0));
        let b = spawn_pairs(6, 30, &mut substream(5, 0));
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        let set: BTreeSet<_> = a.iter().collect();
        assert_eq!(set.len(), 6);
        for (s, d) in &a {
            assert_ne!(s, d);
        }
    }

    #[test]
    fn sweep_sizes_cover_the_connection_axis() {
        for n in [6u32, 8, 10, 12, 14] {
            let pairs = spawn_pairs(n, 30, &mut substream(9, 0));
            assert_eq!(pairs.len(), n as usize);
        }
    }

    #[test]
    fn full_pair_space_is_reachable() {
        let pairs = spawn_pairs(6, 3, &mut substream(1, 0));
        assert_eq!(pairs.len(), 6);
    }

    #[test]
    #[should_panic(expected = "more connections")]
    fn too_many_connections_panics() {
        spawn_pairs(7, 3, &mut substream(1, 0));
    }

    #[test]
    fn fates_partition_offered() {
        let mut book = FlowBook::default();
        book.flows.push(FlowState {
            src: NodeId(0),
            dst: NodeId(1),
            packet_bytes: 512,
            interval: SimTime::from_secs(1),
            start: SimTime::ZERO,
            next_seq: 5,
            delivered: BTreeSet::new(),
            dropped: BTreeSet::new(),
        });
        assert!(book.record_delivered(0, 0));
        assert!(!book.record_delivered(0, 0)); // duplicate copy ignored
        book.record_dropped(0, 1);
        book.record_dropped(0, 0); // a dropped copy of a delivered packet
        let r = book.reports()[0];
        assert_eq!(r.offered, 5);
        assert_eq!(r.delivered, 1);
        assert_eq!(r.dropped, 1);
        assert_eq!(r.in_flight, 3);
    }
}
