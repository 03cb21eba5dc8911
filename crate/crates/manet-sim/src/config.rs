//! Scenario configuration.
//!
//! A scenario file is TOML with one table per subsystem. Every field has a
//! default matching the base experiment setup (1500 m x 1500 m terrain,
//! two-ray radio calibrated to 250 m at 2 Mbps, 802.11b-style DCF, linear
//! battery, uniform placement, 512-byte CBR at 1 s intervals), so an empty
//! file is a complete, runnable scenario.

use serde::{Deserialize, Serialize};

use crate::energy::EnergyParams;
use crate::hash::fnv1a64;
use crate::mobility::{MobilityModel, Terrain};
use crate::radio::RadioParams;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Aodv,
    Dsr,
    Zrp,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Aodv => "aodv",
            Protocol::Dsr => "dsr",
            Protocol::Zrp => "zrp",
        }
    }

    pub const ALL: [Protocol; 3] = [Protocol::Aodv, Protocol::Dsr, Protocol::Zrp];
}

impl std::str::FromStr for Protocol {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aodv" => Ok(Protocol::Aodv),
            "dsr" => Ok(Protocol::Dsr),
            "zrp" => Ok(Protocol::Zrp),
            other => Err(ConfigError::Invalid(format!("unknown protocol: {other}"))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSection {
    pub protocol: Protocol,
    pub n_nodes: u32,
    pub n_connections: u32,
    pub seed: u64,
    pub horizon_s: f64,
    /// Stop the run at the first battery death; the lifetime metric needs
    /// nothing past it.
    pub stop_at_first_death: bool,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            protocol: Protocol::Aodv,
            n_nodes: 30,
            n_connections: 6,
            seed: 1,
            horizon_s: 3600.0,
            stop_at_first_death: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilitySection {
    pub model: MobilityModel,
    pub pause_s: f64,
    pub max_speed_mps: f64,
    /// Group mobility: member offset radius around the reference point.
    pub group_offset_m: f64,
    pub n_groups: u32,
}

impl Default for MobilitySection {
    fn default() -> Self {
        MobilitySection {
            model: MobilityModel::Rwp,
            pause_s: 0.0,
            max_speed_mps: 10.0,
            group_offset_m: 100.0,
            n_groups: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioSection {
    pub frequency_hz: f64,
    pub bit_rate_bps: u64,
    pub range_m: f64,
    pub rx_threshold_dbm: f64,
    pub antenna_height_m: f64,
    pub antenna_gain: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        RadioSection {
            frequency_hz: 2.4e9,
            bit_rate_bps: 2_000_000,
            range_m: 250.0,
            rx_threshold_dbm: -81.0,
            antenna_height_m: 1.5,
            antenna_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MacSection {
    pub header_overhead_bytes: u32,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub slot_us: u64,
    pub sifs_us: u64,
}

impl Default for MacSection {
    fn default() -> Self {
        MacSection {
            header_overhead_bytes: 32,
            cw_min: 31,
            cw_max: 1023,
            retry_limit: 7,
            slot_us: 20,
            sifs_us: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowSpec {
    pub src: u32,
    pub dst: u32,
    /// Explicit start time; random stagger in [0, interval) when absent.
    pub start_s: Option<f64>,
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec {
            src: 0,
            dst: 1,
            start_s: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficSection {
    pub packet_bytes: u32,
    pub interval_s: f64,
    /// Explicit flow list; when present it replaces the seeded draw of
    /// `n_connections` random pairs.
    pub flows: Option<Vec<FlowSpec>>,
}

impl Default for TrafficSection {
    fn default() -> Self {
        TrafficSection {
            packet_bytes: 512,
            interval_s: 1.0,
            flows: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AodvSection {
    pub active_route_timeout_s: f64,
    pub net_traversal_time_s: f64,
    pub rreq_retries: u32,
    pub my_route_timeout_s: f64,
}

impl Default for AodvSection {
    fn default() -> Self {
        AodvSection {
            active_route_timeout_s: 3.0,
            net_traversal_time_s: 2.8,
            rreq_retries: 2,
            my_route_timeout_s: 6.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DsrSection {
    pub maintenance_retry: u32,
    pub cache_expiry_s: f64,
    pub duplicate_window_s: f64,
    pub discovery_timeout_s: f64,
    pub discovery_retries: u32,
    /// Allow intermediate nodes to answer discoveries from their caches.
    pub cache_replies: bool,
}

impl Default for DsrSection {
    fn default() -> Self {
        DsrSection {
            maintenance_retry: 2,
            cache_expiry_s: 300.0,
            duplicate_window_s: 30.0,
            discovery_timeout_s: 2.8,
            discovery_retries: 2,
            cache_replies: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ZrpSection {
    pub radius: u32,
    pub iarp_period_s: f64,
    pub staleness_periods: u32,
    pub query_timeout_s: f64,
    pub query_retries: u32,
    pub route_expiry_s: f64,
}

impl Default for ZrpSection {
    fn default() -> Self {
        ZrpSection {
            radius: 2,
            iarp_period_s: 10.0,
            staleness_periods: 3,
            query_timeout_s: 2.8,
            query_retries: 2,
            route_expiry_s: 300.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PlacementSection {
    /// Explicit positions (scripted topologies); seeded uniform placement
    /// when absent.
    pub positions: Option<Vec<[f64; 2]>>,
}

/// Complete description of one run.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub terrain: Terrain,
    pub mobility: MobilitySection,
    pub radio: RadioSection,
    pub mac: MacSection,
    pub energy: EnergyParams,
    pub traffic: TrafficSection,
    pub aodv: AodvSection,
    pub dsr: DsrSection,
    pub zrp: ZrpSection,
    pub placement: PlacementSection,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<ScenarioConfig, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        let fail = |m: String| Err(ConfigError::Invalid(m));
        if s.n_nodes < 2 {
            return fail(format!("n_nodes must be >= 2, got {}", s.n_nodes));
        }
        let max_pairs = s.n_nodes as u64 * (s.n_nodes as u64 - 1);
        if self.traffic.flows.is_none() && s.n_connections as u64 > max_pairs {
            return fail(format!(
                "n_connections {} exceeds {} distinct pairs",
                s.n_connections, max_pairs
            ));
        }
        if !(s.horizon_s > 0.0) {
            return fail("horizon_s must be positive".into());
        }
        if self.mobility.pause_s < 0.0 {
            return fail("pause_s must be nonnegative".into());
        }
        if self.mobility.model != MobilityModel::None && !(self.mobility.max_speed_mps > 0.0) {
            return fail("max_speed_mps must be positive".into());
        }
        if self.mobility.model == MobilityModel::Group && self.mobility.n_groups == 0 {
            return fail("n_groups must be >= 1".into());
        }
        if self.zrp.radius == 0 {
            return fail("zrp radius must be >= 1".into());
        }
        if self.terrain.width_m <= 0.0 || self.terrain.height_m <= 0.0 {
            return fail("terrain dimensions must be positive".into());
        }
        if let Some(pos) = &self.placement.positions {
            if pos.len() != s.n_nodes as usize {
                return fail(format!(
                    "placement lists {} positions for {} nodes",
                    pos.len(),
                    s.n_nodes
                ));
            }
            for &[x, y] in pos {
                if x < 0.0 || x > self.terrain.width_m || y < 0.0 || y > self.terrain.height_m {
                    return fail(format!("position ({x}, {y}) outside terrain"));
                }
            }
        }
        if let Some(flows) = &self.traffic.flows {
            for f in flows {
                if f.src == f.dst {
                    return fail(format!("flow {} -> {} has equal endpoints", f.src, f.dst));
                }
                if f.src >= s.n_nodes || f.dst >= s.n_nodes {
                    return fail(format!("flow {} -> {} references missing node", f.src, f.dst));
                }
            }
        }
        if !(self.traffic.interval_s > 0.0) {
            return fail("traffic interval_s must be positive".into());
        }
        if self.mac.cw_min == 0 || self.mac.cw_max < self.mac.cw_min {
            return fail("contention window must satisfy 0 < cw_min <= cw_max".into());
        }
        if !(self.energy.initial_j > 0.0) {
            return fail("initial_j must be positive".into());
        }
        if self.energy.amp_efficiency < 1.0 {
            return fail("amp_efficiency must be >= 1".into());
        }
        Ok(())
    }

    /// Calibrated radio parameters for this configuration.
    pub fn radio_params(&self) -> RadioParams {
        RadioParams::calibrated(
            self.radio.frequency_hz,
            self.radio.bit_rate_bps,
            self.radio.antenna_height_m,
            self.radio.antenna_gain,
            self.radio.rx_threshold_dbm,
            self.radio.range_m,
        )
    }

    pub fn horizon(&self) -> SimTime {
        SimTime::from_secs_f64(self.scenario.horizon_s)
    }

    pub fn pause(&self) -> SimTime {
        SimTime::from_secs_f64(self.mobility.pause_s)
    }

    pub fn cbr_interval(&self) -> SimTime {
        SimTime::from_secs_f64(self.traffic.interval_s)
    }

    /// Stable fingerprint of the effective configuration with the seed
    /// zeroed out, so `(config_hash, seed)` identifies a run.
    pub fn config_hash(&self) -> u64 {
        let mut c = self.clone();
        c.scenario.seed = 0;
        fnv1a64(c.to_toml().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_base_setup() {
        let cfg = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(cfg.scenario.protocol, Protocol::Aodv);
        assert_eq!(cfg.scenario.n_nodes, 30);
        assert_eq!(cfg.terrain.width_m, 1500.0);
        assert_eq!(cfg.radio.range_m, 250.0);
        assert_eq!(cfg.radio.bit_rate_bps, 2_000_000);
        assert_eq!(cfg.energy.p_tx_circuit_w, 0.220);
        assert_eq!(cfg.energy.p_rx_w, 0.200);
        assert_eq!(cfg.energy.p_idle_w, 0.150);
        assert_eq!(cfg.energy.amp_efficiency, 6.5);
        assert_eq!(cfg.energy.supply_voltage_v, 3.0);
        assert_eq!(cfg.traffic.packet_bytes, 512);
        assert_eq!(cfg.traffic.interval_s, 1.0);
        assert_eq!(cfg.mobility.max_speed_mps, 10.0);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = ScenarioConfig::from_toml(
            "[scenario]\nprotocol = \"zrp\"\nn_nodes = 40\n\n[zrp]\nradius = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.protocol, Protocol::Zrp);
        assert_eq!(cfg.scenario.n_nodes, 40);
        assert_eq!(cfg.zrp.radius, 3);
        assert_eq!(cfg.zrp.iarp_period_s, 10.0);
        assert_eq!(cfg.traffic.packet_bytes, 512);
    }

    #[test]
    fn hash_is_stable_and_seed_free() {
        let a = ScenarioConfig::from_toml("").unwrap();
        let mut b = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        b.scenario.seed = 99;
        assert_eq!(a.config_hash(), b.config_hash());
        b.scenario.n_nodes = 31;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.n_nodes = 1;
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.scenario.n_nodes = 3;
        cfg.scenario.n_connections = 7;
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.traffic.flows = Some(vec![FlowSpec {
            src: 2,
            dst: 2,
            start_s: None,
        }]);
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.placement.positions = Some(vec![[0.0, 0.0]; 3]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_toml("[scenario]\nnodes = 5\n").is_err());
    }
}
