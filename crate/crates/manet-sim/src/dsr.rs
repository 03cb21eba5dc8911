//! Dynamic Source Routing.
//!
//! Discovery floods a request that accumulates the traversed node list;
//! the target answers with the completed route, returned over the reversed
//! path (links are symmetric here). Data carries the full hop list in its
//! header, so per-packet overhead grows with path length. Maintenance
//! rides on MAC acknowledgements: after the MAC gives up, the frame is
//! retransmitted a configurable number of times, then a route error walks
//! back to the packet's sender and every node that sees it purges cached
//! routes containing the broken link.

use std::collections::BTreeMap;

use crate::config::DsrSection;
use crate::engine::EventHandle;
use crate::events::RoutingTimer;
use crate::packet::{DataPacket, DsrRerr, DsrRreq, DsrRrep, Frame, MacDest, RoutingMsg, SourceRoute};
use crate::routing::RoutingCtx;
use crate::stats::DropReason;
use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy)]
pub struct DsrParams {
    pub maintenance_retry: u32,
    pub cache_expiry: SimTime,
    pub duplicate_window: SimTime,
    pub discovery_timeout: SimTime,
    pub discovery_retries: u32,
    pub cache_replies: bool,
}

impl DsrParams {
    pub fn from_config(cfg: &DsrSection) -> DsrParams {
        DsrParams {
            maintenance_retry: cfg.maintenance_retry,
            cache_expiry: SimTime::from_secs_f64(cfg.cache_expiry_s),
            duplicate_window: SimTime::from_secs_f64(cfg.duplicate_window_s),
            discovery_timeout: SimTime::from_secs_f64(cfg.discovery_timeout_s),
            discovery_retries: cfg.discovery_retries,
            cache_replies: cfg.cache_replies,
        }
    }
}

#[derive(Debug, Clone)]
struct CacheEntry {
    route: SourceRoute,
    added: SimTime,
}

#[derive(Debug)]
struct Discovery {
    attempts: u32,
    buffered: Vec<DataPacket>,
    timer: EventHandle,
}

#[derive(Debug)]
pub struct DsrState {
    me: NodeId,
    params: DsrParams,
    request_id: u32,
    cache: BTreeMap<NodeId, Vec<CacheEntry>>,
    /// Recently seen (initiator, request id) pairs.
    seen: BTreeMap<(NodeId, u32), SimTime>,
    pending: BTreeMap<NodeId, Discovery>,
}

impl DsrState {
    pub fn new(me: NodeId, params: DsrParams) -> DsrState {
        DsrState {
            me,
            params,
            request_id: 0,
            cache: BTreeMap::new(),
            seen: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    pub fn init(&mut self, _ctx: &mut RoutingCtx) {}

    pub fn buffered_packets(&self) -> Vec<DataPacket> {
        self.pending
            .values()
            .flat_map(|d| d.buffered.iter().copied())
            .collect()
    }

    /// Cached routes to `dest`, freshest view (expired entries pruned).
    pub fn cached_routes(&self, dest: NodeId, now: SimTime) -> Vec<SourceRoute> {
        let expiry = self.params.cache_expiry;
        self.cache
            .get(&dest)
            .map(|v| {
                v.iter()
                    .filter(|e| now.saturating_sub(e.added) < expiry)
                    .map(|e| e.route.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn all_cached_routes(&self) -> Vec<SourceRoute> {
        self.cache
            .values()
            .flat_map(|v| v.iter().map(|e| e.route.clone()))
            .collect()
    }

    fn best_route(&mut self, dest: NodeId, now: SimTime) -> Option<SourceRoute> {
        let expiry = self.params.cache_expiry;
        let entries = self.cache.get_mut(&dest)?;
        entries.retain(|e| now.saturating_sub(e.added) < expiry);
        entries
            .iter()
            .min_by_key(|e| e.route.hop_count())
            .map(|e| e.route.clone())
    }

    fn insert_route(&mut self, route: SourceRoute, now: SimTime) {
        debug_assert_eq!(route.source(), self.me);
        let dest = route.destination();
        let entries = self.cache.entry(dest).or_default();
        if let Some(e) = entries.iter_mut().find(|e| e.route == route) {
            e.added = now;
        } else {
            entries.push(CacheEntry { route, added: now });
        }
    }

    fn purge_link(&mut self, a: NodeId, b: NodeId) {
        for entries in self.cache.values_mut() {
            entries.retain(|e| !e.route.contains_link(a, b));
        }
    }

    pub fn send_data(&mut self, pkt: DataPacket, ctx: &mut RoutingCtx) {
        if pkt.dst == self.me {
            ctx.deliver(pkt);
            return;
        }
        if let Some(route) = self.best_route(pkt.dst, ctx.now) {
            ctx.counters.dsr_cache_hits += 1;
            self.send_along(route, pkt, ctx);
            return;
        }
        ctx.counters.dsr_cache_misses += 1;
        if let Some(d) = self.pending.get_mut(&pkt.dst) {
            d.buffered.push(pkt);
            return;
        }
        self.start_discovery(pkt.dst, vec![pkt], ctx);
    }

    fn send_along(&mut self, route: SourceRoute, pkt: DataPacket, ctx: &mut RoutingCtx) {
        let next = route.successor_of(self.me).expect("own route starts here");
        ctx.counters.dsr_header_bytes += (4 + 4 * route.hop_count()) as u64;
        ctx.counters.dsr_route_len_sum += route.hop_count() as u64;
        ctx.counters.dsr_route_len_count += 1;
        ctx.send(MacDest::Node(next), RoutingMsg::DsrData { route, pkt });
    }

    fn start_discovery(&mut self, target: NodeId, buffered: Vec<DataPacket>, ctx: &mut RoutingCtx) {
        self.request_id += 1;
        ctx.counters.dsr_discoveries += 1;
        self.seen
            .insert((self.me, self.request_id), ctx.now + self.params.duplicate_window);
        ctx.send(
            MacDest::Broadcast,
            RoutingMsg::DsrRreq(DsrRreq {
                initiator: self.me,
                target,
                request_id: self.request_id,
                record: vec![self.me],
            }),
        );
        let timer = ctx.schedule_timer(
            ctx.now + self.params.discovery_timeout,
            RoutingTimer::DsrDiscoveryTimeout { dest: target },
        );
        self.pending.insert(
            target,
            Discovery {
                attempts: 1,
                buffered,
                timer,
            },
        );
    }

    pub fn handle_msg(&mut self, msg: RoutingMsg, transmitter: NodeId, ctx: &mut RoutingCtx) {
        match msg {
            RoutingMsg::DsrRreq(rreq) => self.handle_rreq(rreq, ctx),
            RoutingMsg::DsrRrep(rrep) => self.handle_rrep(rrep, ctx),
            RoutingMsg::DsrRerr(rerr) => self.handle_rerr(rerr, ctx),
            RoutingMsg::DsrData { route, pkt } => self.handle_data(route, pkt, ctx),
            other => debug_assert!(false, "dsr got foreign message from {transmitter:?}: {other:?}"),
        }
    }

    fn handle_rreq(&mut self, rreq: DsrRreq, ctx: &mut RoutingCtx) {
        if rreq.initiator == self.me {
            return;
        }
        if rreq.target == self.me {
            // Answer every arriving copy: each one carries a distinct path.
            let mut full = rreq.record.clone();
            full.push(self.me);
            let Some(route) = SourceRoute::new(full) else {
                return;
            };
            // The accumulated route reversed is our path back.
            let return_route = route.reversed();
            self.insert_route(return_route.clone(), ctx.now);
            let next = return_route.successor_of(self.me).unwrap();
            ctx.counters.dsr_rrep_sent += 1;
            ctx.send(
                MacDest::Node(next),
                RoutingMsg::DsrRrep(DsrRrep {
                    route,
                    return_route,
                }),
            );
            return;
        }
        self.prune_seen(ctx.now);
        if self.seen.contains_key(&(rreq.initiator, rreq.request_id))
            || rreq.record.contains(&self.me)
        {
            return;
        }
        self.seen.insert(
            (rreq.initiator, rreq.request_id),
            ctx.now + self.params.duplicate_window,
        );

        if self.params.cache_replies {
            if let Some(cached) = self.best_route(rreq.target, ctx.now) {
                let mut walk = rreq.record.clone();
                walk.push(self.me);
                walk.extend(cached.nodes().iter().skip(1).copied());
                if let Some(route) = SourceRoute::from_walk(&walk) {
                    if route.source() == rreq.initiator && route.destination() == rreq.target {
                        if let Some(return_route) = route.reverse_prefix_from(self.me) {
                            let next = return_route.successor_of(self.me).unwrap();
                            ctx.counters.dsr_rrep_sent += 1;
                            ctx.send(
                                MacDest::Node(next),
                                RoutingMsg::DsrRrep(DsrRrep {
                                    route,
                                    return_route,
                                }),
                            );
                            return;
                        }
                    }
                }
            }
        }

        let mut record = rreq.record;
        record.push(self.me);
        ctx.send(
            MacDest::Broadcast,
            RoutingMsg::DsrRreq(DsrRreq { record, ..rreq }),
        );
    }

    fn handle_rrep(&mut self, rrep: DsrRrep, ctx: &mut RoutingCtx) {
        if rrep.return_route.destination() == self.me {
            if rrep.route.source() != self.me {
                return;
            }
            self.insert_route(rrep.route.clone(), ctx.now);
            if let Some(d) = self.pending.remove(&rrep.route.destination()) {
                ctx.cancel_timer(d.timer);
                for pkt in d.buffered {
                    self.send_data(pkt, ctx);
                }
            }
            return;
        }
        match rrep.return_route.successor_of(self.me) {
            Some(next) => ctx.send(MacDest::Node(next), RoutingMsg::DsrRrep(rrep)),
            None => {} // not on the return path; stray copy
        }
    }

    fn handle_data(&mut self, route: SourceRoute, pkt: DataPacket, ctx: &mut RoutingCtx) {
        if route.destination() == self.me {
            ctx.deliver(pkt);
            return;
        }
        match route.successor_of(self.me) {
            Some(next) => {
                ctx.counters.dsr_header_bytes += (4 + 4 * route.hop_count()) as u64;
                ctx.send(MacDest::Node(next), RoutingMsg::DsrData { route, pkt });
            }
            None => {
                // We are not on this packet's route: a corrupt-route signal.
                ctx.drop_pkt(pkt, DropReason::CorruptRoute);
            }
        }
    }

    fn handle_rerr(&mut self, rerr: DsrRerr, ctx: &mut RoutingCtx) {
        self.purge_link(rerr.broken_from, rerr.broken_to);
        if rerr.return_route.destination() == self.me {
            return;
        }
        if let Some(next) = rerr.return_route.successor_of(self.me) {
            ctx.counters.dsr_rerr_sent += 1;
            ctx.send(MacDest::Node(next), RoutingMsg::DsrRerr(rerr));
        }
    }

    /// Promiscuous tap: nodes that merely overhear a route error still
    /// purge the broken link from their caches.
    pub fn overheard(&mut self, msg: &RoutingMsg, _ctx: &mut RoutingCtx) {
        if let RoutingMsg::DsrRerr(rerr) = msg {
            self.purge_link(rerr.broken_from, rerr.broken_to);
        }
    }

    pub fn link_failure(&mut self, frame: Frame, ctx: &mut RoutingCtx) {
        let next_hop = match frame.dst {
            MacDest::Node(n) => n,
            MacDest::Broadcast => return,
        };
        let resubmits = frame.resubmits;
        match frame.routing_msg().cloned() {
            Some(RoutingMsg::DsrData { route, pkt }) => {
                if resubmits < self.params.maintenance_retry {
                    ctx.resubmit(frame);
                    return;
                }
                self.purge_link(self.me, next_hop);
                if pkt.src == self.me {
                    // First hop broke; nothing upstream to notify.
                    ctx.drop_pkt(pkt, DropReason::LinkFailure);
                    return;
                }
                ctx.drop_pkt(pkt, DropReason::LinkFailure);
                if let Some(return_route) = route.reverse_prefix_from(self.me) {
                    if let Some(next) = return_route.successor_of(self.me) {
                        ctx.counters.dsr_rerr_sent += 1;
                        ctx.send(
                            MacDest::Node(next),
                            RoutingMsg::DsrRerr(DsrRerr {
                                broken_from: self.me,
                                broken_to: next_hop,
                                return_route,
                            }),
                        );
                    }
                }
            }
            Some(RoutingMsg::DsrRrep(_)) => {
                if resubmits < self.params.maintenance_retry {
                    ctx.resubmit(frame);
                } else {
                    // Reply lost; the initiator's discovery timer retries.
                    self.purge_link(self.me, next_hop);
                }
            }
            Some(RoutingMsg::DsrRerr(_)) => {
                // An undeliverable error report is dropped silently.
                self.purge_link(self.me, next_hop);
            }
            _ => {}
        }
    }

    pub fn timer(&mut self, timer: RoutingTimer, ctx: &mut RoutingCtx) {
        match timer {
            RoutingTimer::DsrDiscoveryTimeout { dest } => self.discovery_timeout(dest, ctx),
            other => debug_assert!(false, "dsr got foreign timer {other:?}"),
        }
    }

    fn discovery_timeout(&mut self, target: NodeId, ctx: &mut RoutingCtx) {
        let Some(d) = self.pending.get_mut(&target) else {
            return;
        };
        if d.attempts <= self.params.discovery_retries {
            d.attempts += 1;
            let attempts = d.attempts;
            self.request_id += 1;
            ctx.counters.dsr_discoveries += 1;
            self.seen
                .insert((self.me, self.request_id), ctx.now + self.params.duplicate_window);
            ctx.send(
                MacDest::Broadcast,
                RoutingMsg::DsrRreq(DsrRreq {
                    initiator: self.me,
                    target,
                    request_id: self.request_id,
                    record: vec![self.me],
                }),
            );
            let wait = SimTime::from_micros(
                self.params.discovery_timeout.as_micros() << (attempts - 1).min(16),
            );
            let timer =
                ctx.schedule_timer(ctx.now + wait, RoutingTimer::DsrDiscoveryTimeout { dest: target });
            self.pending.get_mut(&target).unwrap().timer = timer;
        } else {
            let d = self.pending.remove(&target).unwrap();
            for pkt in d.buffered {
                ctx.drop_pkt(pkt, DropReason::DiscoveryTimeout);
            }
        }
    }

    fn prune_seen(&mut self, now: SimTime) {
        if self.seen.len() > 256 {
            self.seen.retain(|_, &mut exp| exp > now);
        }
    }
}
