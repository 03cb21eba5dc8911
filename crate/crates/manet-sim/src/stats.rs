//! Run statistics, protocol counters and the results CSV schema.

use crate::config::Protocol;
use crate::mobility::MobilityModel;

/// Why a data packet was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// Route discovery gave up after its retries.
    DiscoveryTimeout,
    /// The MAC exhausted retransmissions toward the next hop.
    LinkFailure,
    /// An intermediate node had no usable route.
    NoRoute,
    /// A forwarder was handed a packet whose source route does not
    /// contain it.
    CorruptRoute,
}

/// Per-run protocol and MAC counters.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Counters {
    pub data_offered: u64,
    pub data_delivered: u64,
    pub data_dropped: u64,
    /// Routing control frames submitted for transmission (originals,
    /// forwards and rebroadcasts; MAC retries not included).
    pub ctrl_packets: u64,
    /// Control bytes submitted, before MAC overhead.
    pub ctrl_bytes: u64,

    pub aodv_rreq_originated: u64,
    pub aodv_rreq_forwarded: u64,
    pub aodv_rrep_sent: u64,
    pub aodv_rrep_forwarded: u64,
    /// Replies discarded for want of a reverse path.
    pub aodv_rrep_dropped: u64,
    pub aodv_rerr_sent: u64,

    pub dsr_discoveries: u64,
    pub dsr_cache_hits: u64,
    pub dsr_cache_misses: u64,
    pub dsr_rrep_sent: u64,
    pub dsr_rerr_sent: u64,
    /// Source-route header bytes carried by delivered-or-not data frames.
    pub dsr_header_bytes: u64,
    pub dsr_route_len_sum: u64,
    pub dsr_route_len_count: u64,

    pub zrp_iarp_adverts: u64,
    pub zrp_iarp_bytes: u64,
    pub zrp_queries: u64,
    pub zrp_relays: u64,
    pub zrp_replies: u64,
    pub zrp_rerr_sent: u64,

    pub mac_data_tx: u64,
    pub mac_ack_tx: u64,
    pub mac_retries: u64,
    pub mac_drops: u64,
    /// Corrupted receptions observed at frame end.
    pub collisions: u64,

    pub drop_discovery_timeout: u64,
    pub drop_link_failure: u64,
    pub drop_no_route: u64,
    pub drop_corrupt_route: u64,
}

impl Counters {
    pub fn count_drop(&mut self, reason: DropReason) {
        self.data_dropped += 1;
        match reason {
            DropReason::DiscoveryTimeout => self.drop_discovery_timeout += 1,
            DropReason::LinkFailure => self.drop_link_failure += 1,
            DropReason::NoRoute => self.drop_no_route += 1,
            DropReason::CorruptRoute => self.drop_corrupt_route += 1,
        }
    }

    pub fn mean_dsr_route_len(&self) -> f64 {
        if self.dsr_route_len_count == 0 {
            f64::NAN
        } else {
            self.dsr_route_len_sum as f64 / self.dsr_route_len_count as f64
        }
    }
}

/// Per-node outcome of a run.
#[derive(Debug, Clone)]
pub struct NodeReport {
    pub death_time_s: Option<f64>,
    pub initial_j: f64,
    pub remaining_j: f64,
    pub tx_j: f64,
    pub rx_j: f64,
    pub idle_j: f64,
    /// `(initial - remaining) - (tx + rx + idle)`; the two sides are
    /// accumulated independently.
    pub conservation_error_j: f64,
}

/// Per-flow packet accounting.
#[derive(Debug, Clone, Copy)]
pub struct FlowReport {
    pub src: u32,
    pub dst: u32,
    pub offered: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Packets still buffered, queued or on the air when the run ended.
    pub in_flight: u64,
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunStatistics {
    pub config_hash: u64,
    pub seed: u64,
    pub protocol: Protocol,
    pub n_nodes: u32,
    pub mobility: MobilityModel,
    pub pause_s: f64,
    pub max_speed_mps: f64,
    pub n_connections: u32,
    pub zone_radius: u32,
    pub horizon_s: f64,
    /// Time of the first battery death; `None` when every node outlived
    /// the horizon.
    pub network_lifetime_s: Option<f64>,
    pub first_dead_node: Option<u32>,
    pub end_time_s: f64,
    pub counters: Counters,
    pub nodes: Vec<NodeReport>,
    pub flows: Vec<FlowReport>,
    pub trace_hash: u64,
    pub events_dispatched: u64,
    /// The queue drained before the end event — only reachable through a
    /// scheduling bug, but reported rather than hidden.
    pub queue_exhausted: bool,
    pub tx_j_total: f64,
    pub rx_j_total: f64,
    pub idle_j_total: f64,
}

pub fn mobility_name(m: MobilityModel) -> &'static str {
    match m {
        MobilityModel::Rwp => "rwp",
        MobilityModel::Group => "group",
        MobilityModel::None => "none",
    }
}

impl RunStatistics {
    pub const CSV_HEADER: &'static str = "config_hash,seed,protocol,n_nodes,mobility,pause_s,\
max_speed,n_connections,zone_radius,network_lifetime_s,first_dead_node,delivered,dropped,\
ctrl_packets,tx_J_total,rx_J_total,idle_J_total,status";

    pub fn status(&self) -> String {
        if self.queue_exhausted {
            "empty_queue".to_string()
        } else if self.network_lifetime_s.is_none() {
            "no_death".to_string()
        } else {
            "ok".to_string()
        }
    }

    /// One results row in the fixed column order of [`Self::CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{:016x},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.9},{:.9},{:.9},{}",
            self.config_hash,
            self.seed,
            self.protocol.name(),
            self.n_nodes,
            mobility_name(self.mobility),
            self.pause_s,
            self.max_speed_mps,
            self.n_connections,
            self.zone_radius,
            match self.network_lifetime_s {
                Some(t) => format!("{t:.6}"),
                None => "inf".to_string(),
            },
            match self.first_dead_node {
                Some(n) => n.to_string(),
                None => "-1".to_string(),
            },
            self.counters.data_delivered,
            self.counters.data_dropped,
            self.counters.ctrl_packets,
            self.tx_j_total,
            self.rx_j_total,
            self.idle_j_total,
            self.status()
        )
    }

    /// Extended counters row for the side-by-side diagnostics file.
    pub const COUNTERS_HEADER: &'static str = "config_hash,seed,protocol,offered,delivered,\
dropped,ctrl_packets,ctrl_bytes,rreq_originated,rreq_forwarded,rrep_sent,rrep_forwarded,\
rrep_dropped,rerr_sent,dsr_discoveries,dsr_cache_hits,dsr_cache_misses,dsr_rrep_sent,\
dsr_rerr_sent,dsr_header_bytes,dsr_mean_route_len,iarp_adverts,iarp_bytes,zrp_queries,\
zrp_relays,zrp_replies,zrp_rerr_sent,mac_data_tx,mac_ack_tx,mac_retries,mac_drops,collisions,\
drop_discovery_timeout,drop_link_failure,drop_no_route,drop_corrupt_route";

    pub fn counters_row(&self) -> String {
        let c = &self.counters;
        format!(
            "{:016x},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.config_hash,
            self.seed,
            self.protocol.name(),
            c.data_offered,
            c.data_delivered,
            c.data_dropped,
            c.ctrl_packets,
            c.ctrl_bytes,
            c.aodv_rreq_originated,
            c.aodv_rreq_forwarded,
            c.aodv_rrep_sent,
            c.aodv_rrep_forwarded,
            c.aodv_rrep_dropped,
            c.aodv_rerr_sent,
            c.dsr_discoveries,
            c.dsr_cache_hits,
            c.dsr_cache_misses,
            c.dsr_rrep_sent,
            c.dsr_rerr_sent,
            c.dsr_header_bytes,
            c.mean_dsr_route_len(),
            c.zrp_iarp_adverts,
            c.zrp_iarp_bytes,
            c.zrp_queries,
            c.zrp_relays,
            c.zrp_replies,
            c.zrp_rerr_sent,
            c.mac_data_tx,
            c.mac_ack_tx,
            c.mac_retries,
            c.mac_drops,
            c.collisions,
            c.drop_discovery_timeout,
            c.drop_link_failure,
            c.drop_no_route,
            c.drop_corrupt_route,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunStatistics {
        RunStatistics {
            config_hash: 0xabc,
            seed: 7,
            protocol: Protocol::Aodv,
            n_nodes: 30,
            mobility: MobilityModel::Rwp,
            pause_s: 0.0,
            max_speed_mps: 10.0,
            n_connections: 6,
            zone_radius: 2,
            horizon_s: 3600.0,
            network_lifetime_s: Some(95.25),
            first_dead_node: Some(4),
            end_time_s: 95.25,
            counters: Counters::default(),
            nodes: vec![],
            flows: vec![],
            trace_hash: 1,
            events_dispatched: 10,
            queue_exhausted: false,
            tx_j_total: 1.0,
            rx_j_total: 2.0,
            idle_j_total: 3.0,
        }
    }

    #[test]
    fn csv_row_matches_header_arity() {
        let s = sample();
        let row = s.csv_row();
        assert_eq!(
            row.split(',').count(),
            RunStatistics::CSV_HEADER.split(',').count()
        );
        assert!(row.starts_with("0000000000000abc,7,aodv,30,rwp,0,10,6,2,95.250000,4,"));
        assert!(row.ends_with(",ok"));
    }

    #[test]
    fn no_death_reports_sentinel_and_flag() {
        let mut s = sample();
        s.network_lifetime_s = None;
        s.first_dead_node = None;
        let row = s.csv_row();
        assert!(row.contains(",inf,-1,"));
        assert!(row.ends_with(",no_death"));
    }

    #[test]
    fn counters_row_matches_header_arity() {
        let s = sample();
        assert_eq!(
            s.counters_row().split(',').count(),
            RunStatistics::COUNTERS_HEADER.split(',').count()
        );
    }

    #[test]
    fn drop_reasons_are_tallied() {
        let mut c = Counters::default();
        c.count_drop(DropReason::LinkFailure);
        c.count_drop(DropReason::NoRoute);
        c.count_drop(DropReason::NoRoute);
        assert_eq!(c.data_dropped, 3);
        assert_eq!(c.drop_link_failure, 1);
        assert_eq!(c.drop_no_route, 2);
    }
}
