//! Ad hoc On-demand Distance Vector routing.
//!
//! On-demand RREQ flooding with destination sequence numbers, reverse-path
//! setup while the request spreads, unicast RREP along the reverse path
//! (intermediate nodes answer when they hold a route at least as fresh as
//! the request asks for), per-entry lifetime timers, and RERR propagation
//! to precursors on link failure. Routes never step backwards in sequence
//! number, and an entry's sequence number is bumped whenever the entry
//! expires or breaks — that is what keeps snapshots loop-free.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::AodvSection;
use crate::engine::EventHandle;
use crate::events::RoutingTimer;
use crate::packet::{AodvRerr, AodvRreq, AodvRrep, DataPacket, MacDest, RoutingMsg};
use crate::routing::RoutingCtx;
use crate::stats::DropReason;
use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy)]
pub struct AodvParams {
    pub active_route_timeout: SimTime,
    pub net_traversal_time: SimTime,
    pub path_discovery_time: SimTime,
    pub my_route_timeout: SimTime,
    pub rreq_retries: u32,
}

impl AodvParams {
    pub fn from_config(cfg: &AodvSection) -> AodvParams {
        let net_traversal = SimTime::from_secs_f64(cfg.net_traversal_time_s);
        AodvParams {
            active_route_timeout: SimTime::from_secs_f64(cfg.active_route_timeout_s),
            net_traversal_time: net_traversal,
            path_discovery_time: net_traversal + net_traversal,
            my_route_timeout: SimTime::from_secs_f64(cfg.my_route_timeout_s),
            rreq_retries: cfg.rreq_retries,
        }
    }
}

#[derive(Debug)]
struct RouteEntry {
    next_hop: NodeId,
    hop_count: u32,
    seq: u32,
    seq_valid: bool,
    valid: bool,
    expiry: SimTime,
    expiry_timer: Option<EventHandle>,
    precursors: BTreeSet<NodeId>,
}

impl RouteEntry {
    fn usable(&self, now: SimTime) -> bool {
        self.valid && self.expiry > now
    }
}

#[derive(Debug)]
struct Discovery {
    attempts: u32,
    buffered: Vec<DataPacket>,
    timer: EventHandle,
}

/// Read-only view of one table entry, for invariant checks and tooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AodvRouteView {
    pub dest: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub seq: u32,
    pub seq_valid: bool,
    pub usable: bool,
}

#[derive(Debug)]
pub struct AodvState {
    me: NodeId,
    params: AodvParams,
    own_seq: u32,
    broadcast_id: u32,
    routes: BTreeMap<NodeId, RouteEntry>,
    /// Recently seen (origin, broadcast_id) pairs; later copies of the same
    /// request are discarded.
    seen: BTreeMap<(NodeId, u32), SimTime>,
    pending: BTreeMap<NodeId, Discovery>,
}

impl AodvState {
    pub fn new(me: NodeId, params: AodvParams) -> AodvState {
        AodvState {
            me,
            params,
            own_seq: 0,
            broadcast_id: 0,
            routes: BTreeMap::new(),
            seen: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    pub fn init(&mut self, _ctx: &mut RoutingCtx) {}

    pub fn broadcast_id(&self) -> u32 {
        self.broadcast_id
    }

    pub fn route_snapshot(&self, now: SimTime) -> Vec<AodvRouteView> {
        self.routes
            .iter()
            .map(|(&dest, e)| AodvRouteView {
                dest,
                next_hop: e.next_hop,
                hop_count: e.hop_count,
                seq: e.seq,
                seq_valid: e.seq_valid,
                usable: e.usable(now),
            })
            .collect()
    }

    pub fn buffered_packets(&self) -> Vec<DataPacket> {
        self.pending
            .values()
            .flat_map(|d| d.buffered.iter().copied())
            .collect()
    }

    fn last_known_seq(&self, dest: NodeId) -> Option<u32> {
        self.routes
            .get(&dest)
            .filter(|e| e.seq_valid)
            .map(|e| e.seq)
    }

    /// Route-table update rule: accept a fresher sequence number, or an
    /// equal one that shortens the path or revives an unusable entry.
    fn update_route(
        &mut self,
        dest: NodeId,
        next_hop: NodeId,
        hop_count: u32,
        seq: u32,
        lifetime: SimTime,
        ctx: &mut RoutingCtx,
    ) {
        if dest == self.me {
            return;
        }
        let now = ctx.now;
        let accept = match self.routes.get(&dest) {
            None => true,
            Some(e) => {
                !e.seq_valid
                    || seq_newer(seq, e.seq)
                    || (seq == e.seq && (!e.usable(now) || hop_count < e.hop_count))
            }
        };
        if !accept {
            return;
        }
        let expiry = now + lifetime;
        let timer = ctx.schedule_timer(expiry, RoutingTimer::AodvEntryExpiry { dest });
        let old = self.routes.insert(
            dest,
            RouteEntry {
                next_hop,
                hop_count,
                seq,
                seq_valid: true,
                valid: true,
                expiry,
                expiry_timer: Some(timer),
                precursors: BTreeSet::new(),
            },
        );
        if let Some(mut old) = old {
            if let Some(h) = old.expiry_timer.take() {
                ctx.cancel_timer(h);
            }
            // Upstream users of the old entry still depend on this hop.
            self.routes.get_mut(&dest).unwrap().precursors = old.precursors;
        }
    }

    /// Hearing any frame from a neighbor refreshes (or creates) the 1-hop
    /// route to it. The sequence number is left untouched.
    fn refresh_neighbor(&mut self, neighbor: NodeId, ctx: &mut RoutingCtx) {
        if neighbor == self.me {
            return;
        }
        let now = ctx.now;
        let lifetime = self.params.active_route_timeout;
        match self.routes.get_mut(&neighbor) {
            Some(e) if e.usable(now) && e.hop_count == 1 => {
                Self::extend_expiry(e, now + lifetime, neighbor, ctx);
            }
            Some(e) if !e.usable(now) => {
                e.next_hop = neighbor;
                e.hop_count = 1;
                e.valid = true;
                Self::extend_expiry(e, now + lifetime, neighbor, ctx);
            }
            Some(_) => {} // usable multi-hop entry with a valid seq wins
            None => {
                let timer =
                    ctx.schedule_timer(now + lifetime, RoutingTimer::AodvEntryExpiry { dest: neighbor });
                self.routes.insert(
                    neighbor,
                    RouteEntry {
                        next_hop: neighbor,
                        hop_count: 1,
                        seq: 0,
                        seq_valid: false,
                        valid: true,
                        expiry: now + lifetime,
                        expiry_timer: Some(timer),
                        precursors: BTreeSet::new(),
                    },
                );
            }
        }
    }

    fn extend_expiry(e: &mut RouteEntry, to: SimTime, dest: NodeId, ctx: &mut RoutingCtx) {
        if to <= e.expiry {
            return;
        }
        if let Some(h) = e.expiry_timer.take() {
            ctx.cancel_timer(h);
        }
        e.expiry = to;
        e.expiry_timer = Some(ctx.schedule_timer(to, RoutingTimer::AodvEntryExpiry { dest }));
    }

    fn refresh_route(&mut self, dest: NodeId, ctx: &mut RoutingCtx) {
        let to = ctx.now + self.params.active_route_timeout;
        if let Some(e) = self.routes.get_mut(&dest) {
            if e.valid {
                Self::extend_expiry(e, to, dest, ctx);
            }
        }
    }

    pub fn send_data(&mut self, pkt: DataPacket, ctx: &mut RoutingCtx) {
        if pkt.dst == self.me {
            ctx.deliver(pkt);
            return;
        }
        let now = ctx.now;
        if let Some(e) = self.routes.get(&pkt.dst) {
            if e.usable(now) {
                let next = e.next_hop;
                self.refresh_route(pkt.dst, ctx);
                self.refresh_route(next, ctx);
                ctx.send(MacDest::Node(next), RoutingMsg::AodvData(pkt));
                return;
            }
        }
        if let Some(d) = self.pending.get_mut(&pkt.dst) {
            d.buffered.push(pkt);
            return;
        }
        self.originate_rreq(pkt.dst, vec![pkt], ctx);
    }

    fn originate_rreq(&mut self, dest: NodeId, buffered: Vec<DataPacket>, ctx: &mut RoutingCtx) {
        self.own_seq = self.own_seq.wrapping_add(1);
        self.broadcast_id += 1;
        let rreq = AodvRreq {
            origin: self.me,
            origin_seq: self.own_seq,
            broadcast_id: self.broadcast_id,
            dest,
            dest_seq_known: self.last_known_seq(dest),
            hop_count: 0,
        };
        self.seen.insert(
            (self.me, self.broadcast_id),
            ctx.now + self.params.path_discovery_time,
        );
        ctx.counters.aodv_rreq_originated += 1;
        ctx.send(MacDest::Broadcast, RoutingMsg::AodvRreq(rreq));
        let timer = ctx.schedule_timer(
            ctx.now + self.params.net_traversal_time,
            RoutingTimer::AodvDiscoveryTimeout { dest },
        );
        self.pending.insert(
            dest,
            Discovery {
                attempts: 1,
                buffered,
                timer,
            },
        );
    }

    pub fn handle_msg(&mut self, msg: RoutingMsg, transmitter: NodeId, ctx: &mut RoutingCtx) {
        self.refresh_neighbor(transmitter, ctx);
        match msg {
            RoutingMsg::AodvRreq(rreq) => self.handle_rreq(rreq, transmitter, ctx),
            RoutingMsg::AodvRrep(rrep) => self.handle_rrep(rrep, transmitter, ctx),
            RoutingMsg::AodvRerr(rerr) => self.handle_rerr(rerr, transmitter, ctx),
            RoutingMsg::AodvData(pkt) => self.handle_data(pkt, transmitter, ctx),
            other => debug_assert!(false, "aodv got foreign message {other:?}"),
        }
    }

    fn handle_rreq(&mut self, rreq: AodvRreq, prev: NodeId, ctx: &mut RoutingCtx) {
        if rreq.origin == self.me {
            return;
        }
        let key = (rreq.origin, rreq.broadcast_id);
        self.prune_seen(ctx.now);
        if self.seen.contains_key(&key) {
            return;
        }
        self.seen
            .insert(key, ctx.now + self.params.path_discovery_time);

        // Reverse path toward the origin.
        self.update_route(
            rreq.origin,
            prev,
            rreq.hop_count + 1,
            rreq.origin_seq,
            self.params.path_discovery_time,
            ctx,
        );

        if rreq.dest == self.me {
            // Answer with a sequence number at least as fresh as requested.
            if let Some(asked) = rreq.dest_seq_known {
                if seq_newer(asked, self.own_seq) {
                    self.own_seq = asked;
                }
            }
            let rrep = AodvRrep {
                dest: self.me,
                dest_seq: self.own_seq,
                hop_count: 0,
                origin: rreq.origin,
                lifetime_us: self.params.my_route_timeout.as_micros(),
            };
            ctx.counters.aodv_rrep_sent += 1;
            self.unicast_toward(rreq.origin, RoutingMsg::AodvRrep(rrep), ctx);
            return;
        }

        let reply = self.routes.get(&rreq.dest).and_then(|e| {
            let fresh_enough = match rreq.dest_seq_known {
                Some(asked) => !seq_newer(asked, e.seq),
                None => true,
            };
            if e.usable(ctx.now) && e.seq_valid && fresh_enough {
                Some((e.seq, e.hop_count, e.expiry, e.next_hop))
            } else {
                None
            }
        });
        if let Some((seq, hops, expiry, fwd_next)) = reply {
            let rrep = AodvRrep {
                dest: rreq.dest,
                dest_seq: seq,
                hop_count: hops,
                origin: rreq.origin,
                lifetime_us: (expiry - ctx.now).as_micros(),
            };
            ctx.counters.aodv_rrep_sent += 1;
            // The reverse next hop will use us toward the destination, and
            // the forward next hop will see traffic back toward the origin.
            if let Some(rev_next) = self.next_hop_toward(rreq.origin, ctx.now) {
                if let Some(e) = self.routes.get_mut(&rreq.dest) {
                    e.precursors.insert(rev_next);
                }
                if let Some(e) = self.routes.get_mut(&rreq.origin) {
                    e.precursors.insert(fwd_next);
                }
            }
            self.unicast_toward(rreq.origin, RoutingMsg::AodvRrep(rrep), ctx);
        } else {
            ctx.counters.aodv_rreq_forwarded += 1;
            ctx.send(
                MacDest::Broadcast,
                RoutingMsg::AodvRreq(AodvRreq {
                    hop_count: rreq.hop_count + 1,
                    ..rreq
                }),
            );
        }
    }

    fn handle_rrep(&mut self, rrep: AodvRrep, prev: NodeId, ctx: &mut RoutingCtx) {
        self.update_route(
            rrep.dest,
            prev,
            rrep.hop_count + 1,
            rrep.dest_seq,
            SimTime::from_micros(rrep.lifetime_us),
            ctx,
        );

        if rrep.origin == self.me {
            if let Some(d) = self.pending.remove(&rrep.dest) {
                ctx.cancel_timer(d.timer);
                for pkt in d.buffered {
                    self.send_data(pkt, ctx);
                }
            }
            return;
        }

        match self.next_hop_toward(rrep.origin, ctx.now) {
            Some(rev_next) => {
                if let Some(e) = self.routes.get_mut(&rrep.dest) {
                    e.precursors.insert(rev_next);
                }
                if let Some(e) = self.routes.get_mut(&rrep.origin) {
                    e.precursors.insert(prev);
                }
                ctx.counters.aodv_rrep_forwarded += 1;
                ctx.send(
                    MacDest::Node(rev_next),
                    RoutingMsg::AodvRrep(AodvRrep {
                        hop_count: rrep.hop_count + 1,
                        ..rrep
                    }),
                );
            }
            None => {
                // Reverse path already gone; the discovery at the origin
                // will time out and retry.
                ctx.counters.aodv_rrep_dropped += 1;
            }
        }
    }

    fn handle_data(&mut self, pkt: DataPacket, prev: NodeId, ctx: &mut RoutingCtx) {
        if pkt.dst == self.me {
            ctx.deliver(pkt);
            return;
        }
        let now = ctx.now;
        let forward = self
            .routes
            .get(&pkt.dst)
            .filter(|e| e.usable(now))
            .map(|e| e.next_hop);
        match forward {
            Some(next) => {
                if let Some(e) = self.routes.get_mut(&pkt.dst) {
                    e.precursors.insert(prev);
                }
                self.refresh_route(pkt.dst, ctx);
                self.refresh_route(next, ctx);
                self.refresh_route(prev, ctx);
                ctx.send(MacDest::Node(next), RoutingMsg::AodvData(pkt));
            }
            None => {
                // No usable route mid-path: report back and count the loss.
                let seq = self.routes.get(&pkt.dst).map(|e| e.seq + 1).unwrap_or(0);
                ctx.drop_pkt(pkt, DropReason::NoRoute);
                ctx.counters.aodv_rerr_sent += 1;
                ctx.send(
                    MacDest::Node(prev),
                    RoutingMsg::AodvRerr(AodvRerr {
                        unreachable: vec![(pkt.dst, seq)],
                    }),
                );
            }
        }
    }

    fn handle_rerr(&mut self, rerr: AodvRerr, prev: NodeId, ctx: &mut RoutingCtx) {
        let mut propagate: Vec<(NodeId, u32)> = Vec::new();
        let mut upstream: BTreeSet<NodeId> = BTreeSet::new();
        for &(dest, seq) in &rerr.unreachable {
            if let Some(e) = self.routes.get_mut(&dest) {
                if e.valid && e.next_hop == prev {
                    e.valid = false;
                    if seq_newer(seq, e.seq) {
                        e.seq = seq;
                    }
                    e.seq_valid = true;
                    if let Some(h) = e.expiry_timer.take() {
                        ctx.cancel_timer(h);
                    }
                    if !e.precursors.is_empty() {
                        propagate.push((dest, e.seq));
                        upstream.extend(e.precursors.iter().copied());
                    }
                    e.precursors.clear();
                }
            }
        }
        self.send_rerr(propagate, upstream, ctx);
    }

    pub fn link_failure(&mut self, frame: crate::packet::Frame, ctx: &mut RoutingCtx) {
        let next_hop = match frame.dst {
            MacDest::Node(n) => n,
            MacDest::Broadcast => return,
        };
        let mut unreachable: Vec<(NodeId, u32)> = Vec::new();
        let mut upstream: BTreeSet<NodeId> = BTreeSet::new();
        let dests: Vec<NodeId> = self.routes.keys().copied().collect();
        for dest in dests {
            let e = self.routes.get_mut(&dest).unwrap();
            if e.valid && e.next_hop == next_hop {
                e.valid = false;
                e.seq = e.seq.wrapping_add(1);
                if let Some(h) = e.expiry_timer.take() {
                    ctx.cancel_timer(h);
                }
                if !e.precursors.is_empty() {
                    unreachable.push((dest, e.seq));
                    upstream.extend(e.precursors.iter().copied());
                }
                e.precursors.clear();
            }
        }
        self.send_rerr(unreachable, upstream, ctx);

        if let Some(RoutingMsg::AodvData(pkt)) = frame.routing_msg() {
            // The source rediscovers on demand at its next send.
            ctx.drop_pkt(*pkt, DropReason::LinkFailure);
        }
    }

    fn send_rerr(
        &mut self,
        unreachable: Vec<(NodeId, u32)>,
        upstream: BTreeSet<NodeId>,
        ctx: &mut RoutingCtx,
    ) {
        if unreachable.is_empty() || upstream.is_empty() {
            return;
        }
        ctx.counters.aodv_rerr_sent += 1;
        let rerr = RoutingMsg::AodvRerr(AodvRerr { unreachable });
        if upstream.len() == 1 {
            let to = *upstream.iter().next().unwrap();
            ctx.send(MacDest::Node(to), rerr);
        } else {
            ctx.send(MacDest::Broadcast, rerr);
        }
    }

    pub fn timer(&mut self, timer: RoutingTimer, ctx: &mut RoutingCtx) {
        match timer {
            RoutingTimer::AodvDiscoveryTimeout { dest } => self.discovery_timeout(dest, ctx),
            RoutingTimer::AodvEntryExpiry { dest } => self.entry_expired(dest, ctx),
            other => debug_assert!(false, "aodv got foreign timer {other:?}"),
        }
    }

    fn discovery_timeout(&mut self, dest: NodeId, ctx: &mut RoutingCtx) {
        let Some(d) = self.pending.get_mut(&dest) else {
            return;
        };
        if d.attempts <= self.params.rreq_retries {
            d.attempts += 1;
            let attempts = d.attempts;
            self.own_seq = self.own_seq.wrapping_add(1);
            self.broadcast_id += 1;
            let rreq = AodvRreq {
                origin: self.me,
                origin_seq: self.own_seq,
                broadcast_id: self.broadcast_id,
                dest,
                dest_seq_known: self.last_known_seq(dest),
                hop_count: 0,
            };
            self.seen.insert(
                (self.me, self.broadcast_id),
                ctx.now + self.params.path_discovery_time,
            );
            ctx.counters.aodv_rreq_originated += 1;
            ctx.send(MacDest::Broadcast, RoutingMsg::AodvRreq(rreq));
            // Binary exponential wait per attempt.
            let wait = SimTime::from_micros(
                self.params.net_traversal_time.as_micros() << (attempts - 1).min(16),
            );
            let timer =
                ctx.schedule_timer(ctx.now + wait, RoutingTimer::AodvDiscoveryTimeout { dest });
            self.pending.get_mut(&dest).unwrap().timer = timer;
        } else {
            let d = self.pending.remove(&dest).unwrap();
            for pkt in d.buffered {
                ctx.drop_pkt(pkt, DropReason::DiscoveryTimeout);
            }
        }
    }

    fn entry_expired(&mut self, dest: NodeId, ctx: &mut RoutingCtx) {
        let Some(e) = self.routes.get_mut(&dest) else {
            return;
        };
        if e.expiry > ctx.now {
            // Refreshed since this timer was armed.
            if e.expiry_timer.is_none() {
                e.expiry_timer =
                    Some(ctx.schedule_timer(e.expiry, RoutingTimer::AodvEntryExpiry { dest }));
            }
            return;
        }
        e.expiry_timer = None;
        if e.valid {
            e.valid = false;
            // An expired route's next advertisement must be strictly
            // fresher than anything built on the old entry.
            e.seq = e.seq.wrapping_add(1);
            e.precursors.clear();
        }
    }

    fn next_hop_toward(&self, dest: NodeId, now: SimTime) -> Option<NodeId> {
        self.routes
            .get(&dest)
            .filter(|e| e.usable(now))
            .map(|e| e.next_hop)
    }

    fn unicast_toward(&mut self, dest: NodeId, msg: RoutingMsg, ctx: &mut RoutingCtx) {
        match self.next_hop_toward(dest, ctx.now) {
            Some(next) => ctx.send(MacDest::Node(next), msg),
            None => {
                ctx.counters.aodv_rrep_dropped += 1;
            }
        }
    }

    fn prune_seen(&mut self, now: SimTime) {
        if self.seen.len() > 256 {
            self.seen.retain(|_, &mut exp| exp > now);
        }
    }
}

/// Sequence-number comparison with wraparound, signed-distance style.
fn seq_newer(a: u32, b: u32) -> bool {
    (a.wrapping_sub(b) as i32) > 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seq_comparison_handles_wraparound() {
        assert!(seq_newer(2, 1));
        assert!(!seq_newer(1, 1));
        assert!(!seq_newer(1, 2));
        assert!(seq_newer(1, u32::MAX));
    }
}
