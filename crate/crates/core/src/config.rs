//! Network, geometry and file-level configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::cooperation::PricingParams;
use crate::dual::DualOptions;
use crate::error::{HetNetError, Result};
use crate::power::PowerParams;

/// Access regime of the femtocell tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Macro plus small cells, no FAPs.
    Ms,
    /// FAPs serve only their registered indoor users and act as interferers.
    MsfClosed,
    /// FAPs additionally lend their residual carriers and power to outdoor users.
    MsfHybrid,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [Self::Ms, Self::MsfClosed, Self::MsfHybrid];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ms => "ms",
            Self::MsfClosed => "msf-closed",
            Self::MsfHybrid => "msf-hybrid",
        }
    }

    pub fn has_faps(self) -> bool {
        !matches!(self, Self::Ms)
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = HetNetError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ms" => Ok(Self::Ms),
            "msf-closed" | "closed" => Ok(Self::MsfClosed),
            "msf-hybrid" | "hybrid" => Ok(Self::MsfHybrid),
            other => Err(HetNetError::InvalidArgument(format!("unknown scenario kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How carriers and power of each FAP are committed to its registered users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FapLoadPolicy {
    /// Each registered user gets one carrier at `P_F^max / N_C^(S)`.
    #[default]
    UniformPower,
    /// Minimum-power carrier assignment per FAP, users at exactly the rate threshold.
    PerFapSolve,
}

/// Per-tier linear power model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerTable {
    pub macro_cell: PowerParams,
    pub small_cell: PowerParams,
    pub fap: PowerParams,
}

impl Default for PowerTable {
    fn default() -> Self {
        Self {
            macro_cell: PowerParams::linear(4.7, 130.0, 75.0, 20.0),
            small_cell: PowerParams::linear(4.0, 6.8, 4.3, 2.0),
            // FAPs never sleep in this model; their sleep figure is unused.
            fap: PowerParams::linear(8.0, 4.8, 0.0, 1.0),
        }
    }
}

/// Gaussian renewable harvest per small cell, in joules per operating interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenewableParams {
    pub mean: f64,
    pub std_dev: f64,
}

impl Default for RenewableParams {
    fn default() -> Self {
        Self { mean: 50.0, std_dev: 15.0 }
    }
}

/// Thermal noise power over `bandwidth_hz` at -174 dBm/Hz plus a receiver noise figure.
pub fn thermal_noise_watts(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    10f64.powf((-174.0 + noise_figure_db - 30.0) / 10.0) * bandwidth_hz
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Macro cell radius in meters.
    pub cell_radius: f64,
    pub num_small_cells: usize,
    pub num_faps_per_cell: usize,
    pub num_outdoor_users: usize,
    pub indoor_users_per_fap: usize,
    /// Total bandwidth in Hz.
    pub total_bandwidth: f64,
    pub total_carriers: usize,
    pub macro_carriers: usize,
    pub smallcell_carriers: usize,
    /// Per-user rate threshold in bit/s.
    pub rate_threshold: f64,
    /// Noise power per carrier in watts.
    pub noise_power: f64,
    /// Average interference from neighboring small cells, in watts.
    pub neighbor_interference: f64,
    pub scenario_kind: ScenarioKind,
    pub rng_seed: u64,
    pub power: PowerTable,
    pub renewable: RenewableParams,
    pub fap_policy: FapLoadPolicy,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let total_bandwidth = 9.0e6;
        let total_carriers = 45;
        Self {
            // hexagonal cell of a 500 m inter-site grid
            cell_radius: 500.0 / 3f64.sqrt(),
            num_small_cells: 4,
            num_faps_per_cell: 3,
            num_outdoor_users: 40,
            indoor_users_per_fap: 3,
            total_bandwidth,
            total_carriers,
            macro_carriers: 30,
            smallcell_carriers: 15,
            rate_threshold: 1.0e6,
            noise_power: thermal_noise_watts(total_bandwidth / total_carriers as f64, 9.0),
            neighbor_interference: 0.0,
            scenario_kind: ScenarioKind::Ms,
            rng_seed: 1,
            power: PowerTable::default(),
            renewable: RenewableParams::default(),
            fap_policy: FapLoadPolicy::default(),
        }
    }
}

impl NetworkConfig {
    /// Bandwidth of a single carrier in Hz.
    pub fn carrier_bandwidth(&self) -> f64 {
        self.total_bandwidth / self.total_carriers as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(HetNetError::InvalidConfig(msg.to_string()));
        if self.macro_carriers + self.smallcell_carriers != self.total_carriers {
            return bad("macro_carriers + smallcell_carriers must equal total_carriers");
        }
        if self.num_small_cells == 0 {
            return bad("num_small_cells must be at least 1");
        }
        if self.num_outdoor_users == 0 {
            return bad("num_outdoor_users must be at least 1");
        }
        if self.macro_carriers == 0 || self.smallcell_carriers == 0 {
            return bad("each tier needs at least one carrier");
        }
        if !(self.total_bandwidth > 0.0) {
            return bad("total_bandwidth must be positive");
        }
        if !(self.rate_threshold > 0.0) {
            return bad("rate_threshold must be positive");
        }
        if !(self.noise_power > 0.0) {
            return bad("noise_power must be positive");
        }
        if !(self.neighbor_interference >= 0.0) {
            return bad("neighbor_interference must be nonnegative");
        }
        if !(self.renewable.std_dev >= 0.0) || !self.renewable.mean.is_finite() {
            return bad("renewable std_dev must be nonnegative and the mean finite");
        }
        for (name, p) in [
            ("macro_cell", &self.power.macro_cell),
            ("small_cell", &self.power.small_cell),
            ("fap", &self.power.fap),
        ] {
            p.validate().map_err(|e| HetNetError::InvalidConfig(format!("{name}: {e}")))?;
        }
        Ok(())
    }
}

/// Placement rules for the generator. Distances in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySpec {
    pub small_cell_radius: f64,
    /// Small cells sit on a ring of radius `ring_fraction * cell_radius`.
    pub ring_fraction: f64,
    /// FAPs are uniform within `fap_spread * small_cell_radius` of their small cell.
    pub fap_spread: f64,
    /// Distance between a FAP and its building's outer wall.
    pub indoor_depth: f64,
    /// Links shorter than this are evaluated at this distance.
    pub min_link_distance: f64,
    /// Same floor for links inside a building.
    pub min_indoor_distance: f64,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self {
            small_cell_radius: 100.0,
            ring_fraction: 0.6,
            fap_spread: 0.5,
            indoor_depth: 5.0,
            min_link_distance: 10.0,
            min_indoor_distance: 1.0,
        }
    }
}

impl GeometrySpec {
    pub fn validate(&self, cell_radius: f64) -> Result<()> {
        let err = |msg: String| Err(HetNetError::Geometry(msg));
        if !(cell_radius > 0.0) {
            return err(format!("users in a macro cell of radius {cell_radius} m"));
        }
        if !(self.small_cell_radius > 0.0) {
            return err(format!("FAPs in a small cell of radius {} m", self.small_cell_radius));
        }
        if !(self.ring_fraction > 0.0 && self.ring_fraction < 1.0) {
            return err(format!("small cells on a ring at fraction {}", self.ring_fraction));
        }
        if !(self.fap_spread > 0.0 && self.fap_spread <= 1.0) {
            return err(format!("FAPs with spread {}", self.fap_spread));
        }
        if !(self.indoor_depth > 0.0) {
            return err(format!("indoor users within {} m of a FAP", self.indoor_depth));
        }
        if !(self.min_link_distance > 0.0 && self.min_indoor_distance > 0.0) {
            return err(format!(
                "links with minimum distance {} m outdoors and {} m indoors",
                self.min_link_distance, self.min_indoor_distance
            ));
        }
        Ok(())
    }
}

/// Everything a run needs, as stored in a TOML configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SimConfig {
    pub network: NetworkConfig,
    pub geometry: GeometrySpec,
    pub channel: ChannelParams,
    pub dual: DualOptions,
    pub pricing: PricingParams,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.geometry.validate(self.network.cell_radius)?;
        self.channel.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
        let net = NetworkConfig::default();
        assert_eq!(net.macro_carriers + net.smallcell_carriers, net.total_carriers);
        assert!((net.carrier_bandwidth() - 200e3).abs() < 1e-9);
    }

    #[test]
    fn carrier_partition_must_add_up() {
        let net = NetworkConfig { macro_carriers: 29, ..Default::default() };
        assert!(matches!(net.validate(), Err(HetNetError::InvalidConfig(_))));
    }

    #[test]
    fn rejects_nonpositive_noise_and_rate() {
        assert!(NetworkConfig { noise_power: 0.0, ..Default::default() }.validate().is_err());
        assert!(NetworkConfig { rate_threshold: 0.0, ..Default::default() }.validate().is_err());
        assert!(NetworkConfig { neighbor_interference: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn thermal_noise_matches_hand_value() {
        // -174 dBm/Hz + 53.01 dB(200 kHz) + 9 dB = -111.99 dBm
        let n = thermal_noise_watts(200e3, 9.0);
        let dbm = 10.0 * (n * 1e3).log10();
        assert!((dbm + 111.99).abs() < 0.01, "{dbm}");
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SimConfig::default();
        let text = cfg.to_toml_string();
        let back = SimConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = SimConfig::from_toml_str("[geometry]\nsmall_cell_radius = 300.0\n").unwrap();
        assert_eq!(cfg.geometry.small_cell_radius, 300.0);
        assert_eq!(cfg.network, NetworkConfig::default());
    }

    #[test]
    fn scenario_kind_parses() {
        assert_eq!("msf-hybrid".parse::<ScenarioKind>().unwrap(), ScenarioKind::MsfHybrid);
        assert_eq!("MSF_CLOSED".parse::<ScenarioKind>().unwrap(), ScenarioKind::MsfClosed);
        assert!("x".parse::<ScenarioKind>().is_err());
    }
}
