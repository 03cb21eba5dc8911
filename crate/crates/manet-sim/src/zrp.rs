//! Zone Routing Protocol.
//!
//! Proactive side: every node periodically floods its direct-neighbor list
//! with a hop limit of `radius - 1`, so the advertisement covers exactly
//! the zone. Receivers merge the links with freshness timestamps and age
//! them out after a few missed periods. Zone membership, next hops and
//! peripheral nodes all fall out of a bounded-depth breadth-first search
//! over that link state.
//!
//! Reactive side: a destination outside the zone triggers a bordercast
//! query relayed border node to border node, each relay skipping zones
//! already marked covered. The border node whose zone contains the target
//! assembles the reply; it retraces the border-node chain, each chain
//! member prepending its intra-zone segment, until the origin holds a full
//! source route. Data then travels source-routed outside the zone and
//! table-routed inside.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::config::ZrpSection;
use crate::engine::EventHandle;
use crate::events::RoutingTimer;
use crate::packet::{
    DataPacket, Frame, IarpAdvert, IerpQuery, IerpReply, MacDest, RoutingMsg, SourceRoute, ZrpRerr,
};
use crate::routing::RoutingCtx;
use crate::stats::DropReason;
use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy)]
pub struct ZrpParams {
    pub radius: u32,
    pub iarp_period: SimTime,
    pub staleness: SimTime,
    pub query_timeout: SimTime,
    pub query_retries: u32,
    pub route_expiry: SimTime,
}

impl ZrpParams {
    pub fn from_config(cfg: &ZrpSection) -> ZrpParams {
        let period = SimTime::from_secs_f64(cfg.iarp_period_s);
        ZrpParams {
            radius: cfg.radius,
            iarp_period: period,
            staleness: SimTime::from_micros(period.as_micros() * cfg.staleness_periods as u64),
            query_timeout: SimTime::from_secs_f64(cfg.query_timeout_s),
            query_retries: cfg.query_retries,
            route_expiry: SimTime::from_secs_f64(cfg.route_expiry_s),
        }
    }
}

/// Zone structure derived from the current link state: BFS depths, first
/// hops and parents out to the zone radius.
#[derive(Debug, Clone)]
pub struct ZoneView {
    pub depth: BTreeMap<NodeId, u32>,
    pub next_hop: BTreeMap<NodeId, NodeId>,
    parent: BTreeMap<NodeId, NodeId>,
    pub radius: u32,
}

impl ZoneView {
    pub fn members(&self) -> BTreeSet<NodeId> {
        self.depth.keys().copied().collect()
    }

    pub fn peripheral(&self) -> BTreeSet<NodeId> {
        self.depth
            .iter()
            .filter(|&(_, &d)| d == self.radius)
            .map(|(&n, _)| n)
            .collect()
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.depth.contains_key(&n)
    }

    /// Shortest intra-zone path from the owner to `to`, owner first.
    pub fn path_to(&self, me: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        if !self.contains(to) {
            return None;
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != me {
            cur = *self.parent.get(&cur)?;
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }
}

#[derive(Debug)]
struct Discovery {
    attempts: u32,
    buffered: Vec<DataPacket>,
    timer: EventHandle,
}

#[derive(Debug)]
pub struct ZrpState {
    me: NodeId,
    params: ZrpParams,
    /// Direct neighbors and when each was last heard advertising.
    neighbors: BTreeMap<NodeId, SimTime>,
    /// Advertised directed links from other nodes' neighbor lists.
    links: BTreeMap<(NodeId, NodeId), SimTime>,
    advert_seq: u32,
    advert_seen: BTreeMap<(NodeId, u32), SimTime>,
    query_id: u32,
    query_seen: BTreeSet<(NodeId, u32)>,
    route_cache: BTreeMap<NodeId, (SourceRoute, SimTime)>,
    pending: BTreeMap<NodeId, Discovery>,
}

impl ZrpState {
    pub fn new(me: NodeId, params: ZrpParams) -> ZrpState {
        ZrpState {
            me,
            params,
            neighbors: BTreeMap::new(),
            links: BTreeMap::new(),
            advert_seq: 0,
            advert_seen: BTreeMap::new(),
            query_id: 0,
            query_seen: BTreeSet::new(),
            route_cache: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    pub fn init(&mut self, ctx: &mut RoutingCtx) {
        // Stagger first advertisements across the period so a whole
        // network does not flood in the same slot.
        use rand::Rng;
        let offset = ctx.rng.gen_range(0..self.params.iarp_period.as_micros());
        ctx.schedule_timer(
            ctx.now + SimTime::from_micros(offset),
            RoutingTimer::ZrpIarpTick,
        );
    }

    pub fn buffered_packets(&self) -> Vec<DataPacket> {
        self.pending
            .values()
            .flat_map(|d| d.buffered.iter().copied())
            .collect()
    }

    fn fresh(&self, stamp: SimTime, now: SimTime) -> bool {
        now.saturating_sub(stamp) < self.params.staleness
    }

    /// Bounded-depth BFS over the current link state. Fan-out follows the
    /// ordered maps, so the result is deterministic.
    pub fn zone(&self, now: SimTime) -> ZoneView {
        let mut depth = BTreeMap::new();
        let mut next_hop = BTreeMap::new();
        let mut parent = BTreeMap::new();
        depth.insert(self.me, 0);
        let mut frontier = VecDeque::new();
        frontier.push_back(self.me);
        while let Some(u) = frontier.pop_front() {
            let d = depth[&u];
            if d == self.params.radius {
                continue;
            }
            let mut out: Vec<NodeId> = Vec::new();
            if u == self.me {
                out.extend(
                    self.neighbors
                        .iter()
                        .filter(|&(_, &t)| self.fresh(t, now))
                        .map(|(&n, _)| n),
                );
            } else {
                out.extend(
                    self.links
                        .range((u, NodeId(0))..=(u, NodeId(u32::MAX)))
                        .filter(|&(_, &t)| self.fresh(t, now))
                        .map(|(&(_, to), _)| to),
                );
            }
            for v in out {
                if depth.contains_key(&v) {
                    continue;
                }
                depth.insert(v, d + 1);
                parent.insert(v, u);
                let hop = if u == self.me { v } else { next_hop[&u] };
                next_hop.insert(v, hop);
                frontier.push_back(v);
            }
        }
        ZoneView {
            depth,
            next_hop,
            parent,
            radius: self.params.radius,
        }
    }

    pub fn send_data(&mut self, pkt: DataPacket, ctx: &mut RoutingCtx) {
        if pkt.dst == self.me {
            ctx.deliver(pkt);
            return;
        }
        let zone = self.zone(ctx.now);
        if zone.contains(pkt.dst) {
            let next = zone.next_hop[&pkt.dst];
            ctx.send(MacDest::Node(next), RoutingMsg::ZrpDataIntra { dst: pkt.dst, pkt });
            return;
        }
        if let Some(route) = self.cached_route(pkt.dst, ctx.now) {
            let next = route.successor_of(self.me).unwrap();
            ctx.send(MacDest::Node(next), RoutingMsg::ZrpDataRouted { route, pkt });
            return;
        }
        if let Some(d) = self.pending.get_mut(&pkt.dst) {
            d.buffered.push(pkt);
            return;
        }
        self.start_query(pkt.dst, vec![pkt], ctx);
    }

    pub fn cached_route(&mut self, dest: NodeId, now: SimTime) -> Option<SourceRoute> {
        let expiry = self.params.route_expiry;
        if let Some((_, added)) = self.route_cache.get(&dest) {
            if now.saturating_sub(*added) >= expiry {
                self.route_cache.remove(&dest);
            }
        }
        self.route_cache.get(&dest).map(|(r, _)| r.clone())
    }

    fn start_query(&mut self, target: NodeId, buffered: Vec<DataPacket>, ctx: &mut RoutingCtx) {
        self.query_id += 1;
        ctx.counters.zrp_queries += 1;
        self.query_seen.insert((self.me, self.query_id));
        let zone = self.zone(ctx.now);
        let covered: BTreeSet<NodeId> = zone.members();
        let chain = vec![self.me];
        self.relay_to_peripherals(&zone, target, self.query_id, chain, covered, &BTreeSet::new(), ctx);
        let timer = ctx.schedule_timer(
            ctx.now + self.params.query_timeout,
            RoutingTimer::ZrpQueryTimeout { dest: target },
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

    /// Unicasts one query copy to every peripheral node not yet covered.
    fn relay_to_peripherals(
        &mut self,
        zone: &ZoneView,
        target: NodeId,
        query_id: u32,
        chain: Vec<NodeId>,
        covered: BTreeSet<NodeId>,
        skip: &BTreeSet<NodeId>,
        ctx: &mut RoutingCtx,
    ) {
        let origin = chain[0];
        for p in zone.peripheral() {
            // `skip` is the covered set as received; our own peripherals are
            // members of the outgoing covered set by construction, so the
            // test must use the incoming one.
            if skip.contains(&p) || chain.contains(&p) {
                continue;
            }
            let Some(path) = zone.path_to(self.me, p) else {
                continue;
            };
            let Some(relay_route) = SourceRoute::new(path) else {
                continue;
            };
            let next = relay_route.successor_of(self.me).unwrap();
            ctx.counters.zrp_relays += 1;
            ctx.send(
                MacDest::Node(next),
                RoutingMsg::IerpQuery(IerpQuery {
                    origin,
                    target,
                    query_id,
                    chain: chain.clone(),
                    covered: covered.clone(),
                    relay_route,
                }),
            );
        }
    }

    pub fn handle_msg(&mut self, msg: RoutingMsg, transmitter: NodeId, ctx: &mut RoutingCtx) {
        match msg {
            RoutingMsg::IarpAdvert(adv) => self.handle_advert(adv, transmitter, ctx),
            RoutingMsg::IerpQuery(q) => self.handle_query(q, ctx),
            RoutingMsg::IerpReply(r) => self.handle_reply(r, ctx),
            RoutingMsg::ZrpRerr(rerr) => self.handle_rerr(rerr, ctx),
            RoutingMsg::ZrpDataIntra { dst, pkt } => self.handle_data_intra(dst, pkt, ctx),
            RoutingMsg::ZrpDataRouted { route, pkt } => self.handle_data_routed(route, pkt, ctx),
            other => debug_assert!(false, "zrp got foreign message {other:?}"),
        }
    }

    fn handle_advert(&mut self, adv: IarpAdvert, transmitter: NodeId, ctx: &mut RoutingCtx) {
        // Hearing the advertisement at all proves adjacency to whoever
        // transmitted this copy.
        self.neighbors.insert(transmitter, ctx.now);
        if adv.origin == self.me {
            return;
        }
        self.prune_advert_seen(ctx.now);
        if self
            .advert_seen
            .insert((adv.origin, adv.advert_seq), ctx.now + self.params.staleness)
            .is_some()
        {
            return;
        }
        for &x in &adv.neighbors {
            self.links.insert((adv.origin, x), ctx.now);
        }
        if adv.ttl > 0 {
            ctx.counters.zrp_iarp_bytes +=
                RoutingMsg::IarpAdvert(adv.clone()).payload_bytes() as u64;
            ctx.send(
                MacDest::Broadcast,
                RoutingMsg::IarpAdvert(IarpAdvert {
                    ttl: adv.ttl - 1,
                    ..adv
                }),
            );
        }
    }

    fn handle_query(&mut self, q: IerpQuery, ctx: &mut RoutingCtx) {
        if q.relay_route.destination() != self.me {
            // Intra-zone relay hop.
            match q.relay_route.successor_of(self.me) {
                Some(next) => ctx.send(MacDest::Node(next), RoutingMsg::IerpQuery(q)),
                None => {}
            }
            return;
        }
        if !self.query_seen.insert((q.origin, q.query_id)) {
            // This zone already handled the query; it dies here.
            return;
        }
        let zone = self.zone(ctx.now);
        if q.target == self.me || zone.contains(q.target) {
            let mut chain = q.chain.clone();
            chain.push(self.me);
            let route_tail = if q.target == self.me {
                vec![self.me]
            } else {
                match zone.path_to(self.me, q.target) {
                    Some(p) => p,
                    None => return,
                }
            };
            ctx.counters.zrp_replies += 1;
            self.send_reply_step(chain, q.query_id, q.target, route_tail, &zone, ctx);
            return;
        }
        let mut chain = q.chain;
        chain.push(self.me);
        let covered: BTreeSet<NodeId> = q.covered.union(&zone.members()).copied().collect();
        let skip = q.covered;
        self.relay_to_peripherals(&zone, q.target, q.query_id, chain, covered, &skip, ctx);
    }

    /// Sends the reply one chain step back toward the origin, or installs
    /// the finished route when this node is the origin.
    fn send_reply_step(
        &mut self,
        chain: Vec<NodeId>,
        query_id: u32,
        target: NodeId,
        route_tail: Vec<NodeId>,
        zone: &ZoneView,
        ctx: &mut RoutingCtx,
    ) {
        let pos = chain.len() - 1;
        debug_assert_eq!(chain[pos], self.me);
        if pos == 0 {
            self.install_route(target, route_tail, ctx);
            return;
        }
        let prev = chain[pos - 1];
        let Some(path_back) = zone.path_to(self.me, prev) else {
            return; // chain predecessor no longer reachable
        };
        let Some(relay_route) = SourceRoute::new(path_back) else {
            return;
        };
        let next = relay_route.successor_of(self.me).unwrap();
        ctx.send(
            MacDest::Node(next),
            RoutingMsg::IerpReply(IerpReply {
                origin: chain[0],
                target,
                query_id,
                chain,
                chain_pos: pos - 1,
                route_tail,
                relay_route,
            }),
        );
    }

    fn handle_reply(&mut self, r: IerpReply, ctx: &mut RoutingCtx) {
        if r.relay_route.destination() != self.me {
            match r.relay_route.successor_of(self.me) {
                Some(next) => ctx.send(MacDest::Node(next), RoutingMsg::IerpReply(r)),
                None => {}
            }
            return;
        }
        debug_assert_eq!(r.chain.get(r.chain_pos), Some(&self.me));
        let zone = self.zone(ctx.now);
        // Prepend our segment toward the tail's head.
        let tail_head = r.route_tail[0];
        let Some(mut segment) = zone.path_to(self.me, tail_head) else {
            return;
        };
        segment.extend(r.route_tail.iter().skip(1).copied());
        let chain: Vec<NodeId> = r.chain[..=r.chain_pos].to_vec();
        self.send_reply_step(chain, r.query_id, r.target, segment, &zone, ctx);
    }

    fn install_route(&mut self, target: NodeId, walk: Vec<NodeId>, ctx: &mut RoutingCtx) {
        let Some(route) = SourceRoute::from_walk(&walk) else {
            return;
        };
        if route.source() != self.me || route.destination() != target {
            return;
        }
        self.route_cache.insert(target, (route, ctx.now));
        if let Some(d) = self.pending.remove(&target) {
            ctx.cancel_timer(d.timer);
            for pkt in d.buffered {
                self.send_data(pkt, ctx);
            }
        }
    }

    fn handle_data_intra(&mut self, dst: NodeId, pkt: DataPacket, ctx: &mut RoutingCtx) {
        if dst == self.me {
            ctx.deliver(pkt);
            return;
        }
        let zone = self.zone(ctx.now);
        if let Some(&next) = zone.next_hop.get(&dst) {
            ctx.send(MacDest::Node(next), RoutingMsg::ZrpDataIntra { dst, pkt });
        } else {
            ctx.drop_pkt(pkt, DropReason::NoRoute);
        }
    }

    fn handle_data_routed(&mut self, route: SourceRoute, pkt: DataPacket, ctx: &mut RoutingCtx) {
        if route.destination() == self.me {
            ctx.deliver(pkt);
            return;
        }
        match route.successor_of(self.me) {
            Some(next) => ctx.send(MacDest::Node(next), RoutingMsg::ZrpDataRouted { route, pkt }),
            None => ctx.drop_pkt(pkt, DropReason::CorruptRoute),
        }
    }

    fn handle_rerr(&mut self, rerr: ZrpRerr, ctx: &mut RoutingCtx) {
        self.purge_cached_link(rerr.broken_from, rerr.broken_to);
        if rerr.return_route.destination() == self.me {
            return;
        }
        if let Some(next) = rerr.return_route.successor_of(self.me) {
            ctx.send(MacDest::Node(next), RoutingMsg::ZrpRerr(rerr));
        }
    }

    fn purge_cached_link(&mut self, a: NodeId, b: NodeId) {
        self.route_cache.retain(|_, (r, _)| !r.contains_link(a, b));
    }

    pub fn link_failure(&mut self, frame: Frame, ctx: &mut RoutingCtx) {
        let next_hop = match frame.dst {
            MacDest::Node(n) => n,
            MacDest::Broadcast => return,
        };
        // MAC feedback beats the ageing timer: drop the link now.
        self.neighbors.remove(&next_hop);
        self.links.remove(&(self.me, next_hop));
        self.links.remove(&(next_hop, self.me));
        let resubmits = frame.resubmits;
        match frame.routing_msg().cloned() {
            Some(RoutingMsg::ZrpDataIntra { dst, pkt }) => {
                if resubmits == 0 {
                    let zone = self.zone(ctx.now);
                    if zone.contains(dst) {
                        let next = zone.next_hop[&dst];
                        let mut f = frame;
                        f.dst = MacDest::Node(next);
                        ctx.resubmit(f);
                        return;
                    }
                }
                ctx.drop_pkt(pkt, DropReason::LinkFailure);
            }
            Some(RoutingMsg::ZrpDataRouted { route, pkt }) => {
                self.purge_cached_link(self.me, next_hop);
                ctx.drop_pkt(pkt, DropReason::LinkFailure);
                if pkt.src == self.me {
                    return;
                }
                if let Some(return_route) = route.reverse_prefix_from(self.me) {
                    if let Some(next) = return_route.successor_of(self.me) {
                        ctx.counters.zrp_rerr_sent += 1;
                        ctx.send(
                            MacDest::Node(next),
                            RoutingMsg::ZrpRerr(ZrpRerr {
                                broken_from: self.me,
                                broken_to: next_hop,
                                return_route,
                            }),
                        );
                    }
                }
            }
            // Query and reply copies are redundant or retried by timeout.
            _ => {}
        }
    }

    pub fn timer(&mut self, timer: RoutingTimer, ctx: &mut RoutingCtx) {
        match timer {
            RoutingTimer::ZrpIarpTick => self.iarp_tick(ctx),
            RoutingTimer::ZrpQueryTimeout { dest } => self.query_timeout(dest, ctx),
            other => debug_assert!(false, "zrp got foreign timer {other:?}"),
        }
    }

    fn iarp_tick(&mut self, ctx: &mut RoutingCtx) {
        let now = ctx.now;
        let staleness = self.params.staleness;
        self.neighbors
            .retain(|_, &mut t| now.saturating_sub(t) < staleness);
        self.links.retain(|_, &mut t| now.saturating_sub(t) < staleness);
        self.advert_seq += 1;
        let adv = IarpAdvert {
            origin: self.me,
            advert_seq: self.advert_seq,
            neighbors: self.neighbors.keys().copied().collect(),
            ttl: self.params.radius - 1,
        };
        ctx.counters.zrp_iarp_adverts += 1;
        ctx.counters.zrp_iarp_bytes += RoutingMsg::IarpAdvert(adv.clone()).payload_bytes() as u64;
        ctx.send(MacDest::Broadcast, RoutingMsg::IarpAdvert(adv));
        ctx.schedule_timer(now + self.params.iarp_period, RoutingTimer::ZrpIarpTick);
    }

    fn query_timeout(&mut self, target: NodeId, ctx: &mut RoutingCtx) {
        let Some(d) = self.pending.get_mut(&target) else {
            return;
        };
        if d.attempts <= self.params.query_retries {
            d.attempts += 1;
            let attempts = d.attempts;
            self.query_id += 1;
            ctx.counters.zrp_queries += 1;
            self.query_seen.insert((self.me, self.query_id));
            let zone = self.zone(ctx.now);
            let covered = zone.members();
            self.relay_to_peripherals(
                &zone,
                target,
                self.query_id,
                vec![self.me],
                covered,
                &BTreeSet::new(),
                ctx,
            );
            let wait = SimTime::from_micros(
                self.params.query_timeout.as_micros() << (attempts - 1).min(16),
            );
            let timer =
                ctx.schedule_timer(ctx.now + wait, RoutingTimer::ZrpQueryTimeout { dest: target });
            self.pending.get_mut(&target).unwrap().timer = timer;
        } else {
            let d = self.pending.remove(&target).unwrap();
            for pkt in d.buffered {
                ctx.drop_pkt(pkt, DropReason::DiscoveryTimeout);
            }
        }
    }

    fn prune_advert_seen(&mut self, now: SimTime) {
        if self.advert_seen.len() > 512 {
            self.advert_seen.retain(|_, &mut exp| exp > now);
        }
    }
}
