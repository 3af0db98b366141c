//! Network snapshots: station and user placement, carrier partition, renewable draws
//! and the carriers FAPs commit to their registered users.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_assignment, CostMatrix};
use crate::channel::{build_channel, ChannelMatrix};
use crate::config::{FapLoadPolicy, GeometrySpec, NetworkConfig, ScenarioKind, SimConfig};
use crate::error::{HetNetError, Result};
use crate::power::PowerParams;
use crate::radio::{required_power, LinkBudget};

/// RNG streams derived from the scenario seed.
pub(crate) mod streams {
    pub const PLACEMENT: u64 = 0;
    pub const CHANNEL: u64 = 1;
    pub const FAP_LOAD: u64 = 2;
}

pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn offset(&self, radius: f64, angle: f64) -> Point {
        Point::new(self.x + radius * angle.cos(), self.y + radius * angle.sin())
    }
}

/// Uniform point in a disk of the given radius.
fn uniform_in_disk(rng: &mut impl Rng, center: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = rng.random::<f64>() * 2.0 * PI;
    center.offset(r, theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum StationKind {
    Macro,
    SmallCell { cell: usize },
    Fap { cell: usize, index: usize },
}

impl StationKind {
    pub fn symbol(&self) -> char {
        match self {
            Self::Macro => 'M',
            Self::SmallCell { .. } => 'S',
            Self::Fap { .. } => 'F',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: usize,
    pub kind: StationKind,
    pub position: Point,
    /// Global carrier indices this station may transmit on, ascending.
    pub carriers: Vec<usize>,
    pub power: PowerParams,
    /// Distance to the building wall; zero for outdoor stations.
    pub indoor_depth: f64,
}

impl Station {
    pub fn is_outdoor(&self) -> bool {
        !matches!(self.kind, StationKind::Fap { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Placement {
    Outdoor,
    Indoor { fap: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: usize,
    pub position: Point,
    pub placement: Placement,
    pub registered_to: Option<usize>,
}

impl User {
    pub fn is_indoor(&self) -> bool {
        matches!(self.placement, Placement::Indoor { .. })
    }
}

/// A carrier of a FAP committed to one registered user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FapOccupancy {
    pub fap: usize,
    pub carrier: usize,
    pub user: usize,
    pub power: f64,
}

/// Immutable network snapshot.
///
/// Station ids: 0 is the macro, `1..=L_s` the small cells, then the FAPs of cell 0,
/// cell 1, and so on. User ids: outdoor users first, then indoor users grouped by FAP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: NetworkConfig,
    pub geometry: GeometrySpec,
    pub stations: Vec<Station>,
    pub users: Vec<User>,
    /// Harvested renewable energy per small cell, joules.
    pub renewable: Vec<f64>,
    /// Sorted by (fap, carrier); at most one entry per pair.
    pub fap_occupancy: Vec<FapOccupancy>,
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        self.config.scenario_kind
    }

    /// Same network under another FAP access regime.
    pub fn with_kind(&self, kind: ScenarioKind) -> Scenario {
        let mut s = self.clone();
        s.config.scenario_kind = kind;
        s
    }

    pub fn macro_station(&self) -> usize {
        0
    }

    pub fn num_small_cells(&self) -> usize {
        self.config.num_small_cells
    }

    pub fn small_cell_station(&self, cell: usize) -> usize {
        1 + cell
    }

    /// Small-cell index of an operator station, `None` for the macro or a FAP.
    pub fn small_cell_of(&self, station: usize) -> Option<usize> {
        match self.stations[station].kind {
            StationKind::SmallCell { cell } => Some(cell),
            _ => None,
        }
    }

    pub fn fap_stations(&self) -> impl Iterator<Item = &Station> {
        self.stations.iter().filter(|s| matches!(s.kind, StationKind::Fap { .. }))
    }

    pub fn faps_of_cell(&self, cell: usize) -> impl Iterator<Item = &Station> {
        self.stations
            .iter()
            .filter(move |s| matches!(s.kind, StationKind::Fap { cell: c, .. } if c == cell))
    }

    pub fn num_outdoor_users(&self) -> usize {
        self.users.iter().filter(|u| !u.is_indoor()).count()
    }

    pub fn outdoor_users(&self) -> impl Iterator<Item = &User> {
        self.users.iter().filter(|u| !u.is_indoor())
    }

    pub fn indoor_users(&self) -> impl Iterator<Item = &User> {
        self.users.iter().filter(|u| u.is_indoor())
    }

    /// Transmit power already committed by a FAP to its registered users.
    pub fn fap_committed_power(&self, fap: usize) -> f64 {
        self.fap_occupancy.iter().filter(|o| o.fap == fap).map(|o| o.power).sum()
    }

    pub fn is_occupied(&self, fap: usize, carrier: usize) -> bool {
        self.fap_occupancy
            .binary_search_by(|o| (o.fap, o.carrier).cmp(&(fap, carrier)))
            .is_ok()
    }

    /// Carriers of a FAP still free for outdoor users.
    pub fn fap_free_carriers(&self, fap: usize) -> Vec<usize> {
        self.stations[fap]
            .carriers
            .iter()
            .copied()
            .filter(|&r| !self.is_occupied(fap, r))
            .collect()
    }

    /// Transmit budget available to the operator's outdoor users at a station.
    ///
    /// For FAPs this is what is left after the registered users, and only in the
    /// hybrid regime; closed FAPs give nothing.
    pub fn station_budget(&self, station: usize) -> f64 {
        let st = &self.stations[station];
        match st.kind {
            StationKind::Macro | StationKind::SmallCell { .. } => st.power.p_max,
            StationKind::Fap { .. } => match self.kind() {
                ScenarioKind::MsfHybrid => (st.power.p_max - self.fap_committed_power(station)).max(0.0),
                _ => 0.0,
            },
        }
    }

    /// Checks the structural invariants of a snapshot.
    pub fn validate(&self) -> Result<()> {
        let cfg = &self.config;
        cfg.validate()?;
        let err = |m: String| Err(HetNetError::InvalidConfig(m));
        let expected_stations = 1 + cfg.num_small_cells * (1 + cfg.num_faps_per_cell);
        if self.stations.len() != expected_stations {
            return err(format!("{} stations, expected {expected_stations}", self.stations.len()));
        }
        if self.num_outdoor_users() != cfg.num_outdoor_users {
            return err("outdoor user count does not match config".into());
        }
        let indoor = self.indoor_users().count();
        if indoor != cfg.num_small_cells * cfg.num_faps_per_cell * cfg.indoor_users_per_fap {
            return err("indoor user count does not match config".into());
        }
        if self.renewable.len() != cfg.num_small_cells || self.renewable.iter().any(|q| !(*q >= 0.0)) {
            return err("renewable energy must be a nonnegative value per small cell".into());
        }
        let macro_set: BTreeSet<usize> = self.stations[0].carriers.iter().copied().collect();
        for st in &self.stations {
            match st.kind {
                StationKind::SmallCell { .. } => {
                    if st.carriers.iter().any(|c| macro_set.contains(c)) {
                        return err(format!("small cell {} shares carriers with the macro", st.id));
                    }
                }
                StationKind::Fap { cell, .. } => {
                    if st.carriers != self.stations[self.small_cell_station(cell)].carriers {
                        return err(format!("FAP {} carriers differ from its small cell", st.id));
                    }
                }
                StationKind::Macro => {}
            }
        }
        for pair in self.fap_occupancy.windows(2) {
            if (pair[0].fap, pair[0].carrier) >= (pair[1].fap, pair[1].carrier) {
                return err("FAP carrier occupied more than once or unsorted".into());
            }
        }
        for o in &self.fap_occupancy {
            if !self.stations[o.fap].carriers.contains(&o.carrier) {
                return err(format!("FAP {} occupies foreign carrier {}", o.fap, o.carrier));
            }
            if self.users[o.user].registered_to != Some(o.fap) {
                return err(format!("user {} is not registered to FAP {}", o.user, o.fap));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Builds a seeded network snapshot. FAP carrier occupancy is left empty; see
/// [`assign_fap_load`].
pub fn generate(config: &NetworkConfig, geometry: &GeometrySpec) -> Result<Scenario> {
    config.validate()?;
    geometry.validate(config.cell_radius)?;
    if geometry.ring_fraction * config.cell_radius + geometry.small_cell_radius > config.cell_radius * 1.5 {
        return Err(HetNetError::Geometry("small cells that far outside the macro cell".into()));
    }

    let mut rng = seeded_rng(config.rng_seed, streams::PLACEMENT);
    let macro_carriers: Vec<usize> = (0..config.macro_carriers).collect();
    let small_carriers: Vec<usize> = (config.macro_carriers..config.total_carriers).collect();

    let mut stations = vec![Station {
        id: 0,
        kind: StationKind::Macro,
        position: Point::ORIGIN,
        carriers: macro_carriers,
        power: config.power.macro_cell.clone(),
        indoor_depth: 0.0,
    }];

    let ring = geometry.ring_fraction * config.cell_radius;
    let small_positions: Vec<Point> = (0..config.num_small_cells)
        .map(|i| Point::ORIGIN.offset(ring, 2.0 * PI * i as f64 / config.num_small_cells as f64))
        .collect();
    for (cell, pos) in small_positions.iter().enumerate() {
        stations.push(Station {
            id: stations.len(),
            kind: StationKind::SmallCell { cell },
            position: *pos,
            carriers: small_carriers.clone(),
            power: config.power.small_cell.clone(),
            indoor_depth: 0.0,
        });
    }
    for (cell, pos) in small_positions.iter().enumerate() {
        for index in 0..config.num_faps_per_cell {
            let position = uniform_in_disk(&mut rng, *pos, geometry.fap_spread * geometry.small_cell_radius);
            stations.push(Station {
                id: stations.len(),
                kind: StationKind::Fap { cell, index },
                position,
                carriers: small_carriers.clone(),
                power: config.power.fap.clone(),
                indoor_depth: geometry.indoor_depth,
            });
        }
    }

    let mut users = Vec::with_capacity(config.num_outdoor_users);
    for _ in 0..config.num_outdoor_users {
        let position = uniform_in_disk(&mut rng, Point::ORIGIN, config.cell_radius);
        users.push(User { id: users.len(), position, placement: Placement::Outdoor, registered_to: None });
    }
    let fap_ids: Vec<(usize, Point)> = stations
        .iter()
        .filter(|s| !s.is_outdoor())
        .map(|s| (s.id, s.position))
        .collect();
    for (fap, pos) in fap_ids {
        for _ in 0..config.indoor_users_per_fap {
            let position = uniform_in_disk(&mut rng, pos, geometry.indoor_depth);
            users.push(User {
                id: users.len(),
                position,
                placement: Placement::Indoor { fap },
                registered_to: Some(fap),
            });
        }
    }

    let renewable = if config.renewable.std_dev > 0.0 {
        let normal = Normal::new(config.renewable.mean, config.renewable.std_dev)
            .map_err(|e| HetNetError::InvalidConfig(e.to_string()))?;
        (0..config.num_small_cells).map(|_| normal.sample(&mut rng).max(0.0)).collect()
    } else {
        vec![config.renewable.mean.max(0.0); config.num_small_cells]
    };

    let scenario = Scenario {
        config: config.clone(),
        geometry: geometry.clone(),
        stations,
        users,
        renewable,
        fap_occupancy: Vec::new(),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Commits one carrier of its FAP to every registered indoor user.
///
/// `UniformPower` picks distinct carriers at random (seeded) and loads each with
/// `P_F^max / N_C^(S)`. `PerFapSolve` assigns carriers by minimum total power with each
/// user at exactly the rate threshold.
pub fn assign_fap_load(scenario: &Scenario, channel: &ChannelMatrix, policy: FapLoadPolicy) -> Result<Scenario> {
    let cfg = &scenario.config;
    let mut out = scenario.clone();
    out.fap_occupancy.clear();
    let mut rng = seeded_rng(cfg.rng_seed, streams::FAP_LOAD);
    let noise = cfg.noise_power + cfg.neighbor_interference;
    for fap in scenario.fap_stations() {
        let registered: Vec<usize> =
            scenario.users.iter().filter(|u| u.registered_to == Some(fap.id)).map(|u| u.id).collect();
        let n_carriers = fap.carriers.len();
        if registered.len() > n_carriers {
            return Err(HetNetError::Infeasible(format!(
                "FAP {} has {} registered users but only {n_carriers} carriers",
                fap.id,
                registered.len()
            )));
        }
        if registered.is_empty() {
            continue;
        }
        match policy {
            FapLoadPolicy::UniformPower => {
                let per_carrier = fap.power.p_max / n_carriers as f64;
                let picks = sample(&mut rng, n_carriers, registered.len());
                for (user, idx) in registered.iter().zip(picks.iter()) {
                    out.fap_occupancy.push(FapOccupancy {
                        fap: fap.id,
                        carrier: fap.carriers[idx],
                        user: *user,
                        power: per_carrier,
                    });
                }
            }
            FapLoadPolicy::PerFapSolve => {
                let mut costs = CostMatrix::new(registered.len(), n_carriers, f64::INFINITY);
                for (row, &user) in registered.iter().enumerate() {
                    for (col, &carrier) in fap.carriers.iter().enumerate() {
                        let link = LinkBudget {
                            gain: channel.gain(user, fap.id, carrier),
                            interference: 0.0,
                            noise,
                            carrier_bandwidth: cfg.carrier_bandwidth(),
                        };
                        let p = required_power(cfg.rate_threshold, &link)?;
                        if p <= fap.power.p_max {
                            costs.set(row, col, p);
                        }
                    }
                }
                let matching = solve_assignment(&costs)?;
                if matching.total_cost > fap.power.p_max * (1.0 + 1e-9) {
                    return Err(HetNetError::Infeasible(format!(
                        "FAP {} needs {:.4} W for its registered users",
                        fap.id, matching.total_cost
                    )));
                }
                for (row, col) in matching.row_to_col.iter().enumerate() {
                    let col = col.expect("strict assignment matches every row");
                    out.fap_occupancy.push(FapOccupancy {
                        fap: fap.id,
                        carrier: fap.carriers[col],
                        user: registered[row],
                        power: costs.get(row, col),
                    });
                }
            }
        }
    }
    out.fap_occupancy.sort_by_key(|o| (o.fap, o.carrier));
    out.validate()?;
    Ok(out)
}

/// Scenario plus channel, with FAP load committed when FAPs are present.
pub fn build_instance(cfg: &SimConfig) -> Result<(Scenario, ChannelMatrix)> {
    let scenario = generate(&cfg.network, &cfg.geometry)?;
    let channel = build_channel(&scenario, &cfg.channel)?;
    let scenario = if scenario.config.num_faps_per_cell > 0 && scenario.config.indoor_users_per_fap > 0 {
        assign_fap_load(&scenario, &channel, cfg.network.fap_policy)?
    } else {
        scenario
    };
    Ok((scenario, channel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;

    fn fig1_config() -> NetworkConfig {
        NetworkConfig { num_small_cells: 4, num_faps_per_cell: 3, num_outdoor_users: 20, ..Default::default() }
    }

    #[test]
    fn station_counts_follow_config() {
        let s = generate(&fig1_config(), &GeometrySpec::default()).unwrap();
        let count = |sym| s.stations.iter().filter(|st| st.kind.symbol() == sym).count();
        assert_eq!((count('M'), count('S'), count('F')), (1, 4, 12));
        assert_eq!(s.stations[0].position, Point::ORIGIN);
        assert_eq!(s.indoor_users().count(), 36);
    }

    #[test]
    fn seeded_generation_is_bit_identical() {
        let a = generate(&fig1_config(), &GeometrySpec::default()).unwrap();
        let b = generate(&fig1_config(), &GeometrySpec::default()).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = generate(&NetworkConfig { rng_seed: 2, ..fig1_config() }, &GeometrySpec::default()).unwrap();
        assert_ne!(a.users[0].position, c.users[0].position);
    }

    #[test]
    fn degenerate_renewable_draw() {
        let mut cfg = fig1_config();
        cfg.renewable.mean = 50.0;
        cfg.renewable.std_dev = 0.0;
        let s = generate(&cfg, &GeometrySpec::default()).unwrap();
        assert!(s.renewable.iter().all(|&q| q == 50.0));
    }

    #[test]
    fn renewable_is_truncated_at_zero() {
        let mut cfg = fig1_config();
        cfg.renewable.mean = -100.0;
        cfg.renewable.std_dev = 1.0;
        let s = generate(&cfg, &GeometrySpec::default()).unwrap();
        assert!(s.renewable.iter().all(|&q| q == 0.0));
    }

    #[test]
    fn zero_radius_is_rejected() {
        let cfg = NetworkConfig { cell_radius: 0.0, ..fig1_config() };
        assert!(matches!(generate(&cfg, &GeometrySpec::default()), Err(HetNetError::Geometry(_))));
        let geo = GeometrySpec { small_cell_radius: 0.0, ..Default::default() };
        assert!(generate(&fig1_config(), &geo).is_err());
    }

    #[test]
    fn placement_respects_geometry() {
        let geo = GeometrySpec::default();
        let s = generate(&fig1_config(), &geo).unwrap();
        for u in s.outdoor_users() {
            assert!(u.position.distance(&Point::ORIGIN) <= s.config.cell_radius + 1e-9);
        }
        for st in s.fap_stations() {
            let StationKind::Fap { cell, .. } = st.kind else { unreachable!() };
            let parent = &s.stations[s.small_cell_station(cell)];
            assert!(st.position.distance(&parent.position) <= geo.fap_spread * geo.small_cell_radius + 1e-9);
        }
        for u in s.indoor_users() {
            let fap = &s.stations[u.registered_to.unwrap()];
            assert!(u.position.distance(&fap.position) <= geo.indoor_depth + 1e-9);
        }
    }

    fn loaded(cfg: NetworkConfig, policy: FapLoadPolicy) -> Result<Scenario> {
        let s = generate(&cfg, &GeometrySpec::default())?;
        let ch = build_channel(&s, &ChannelParams::default())?;
        assign_fap_load(&s, &ch, policy)
    }

    #[test]
    fn uniform_fap_load() {
        let s = loaded(fig1_config(), FapLoadPolicy::UniformPower).unwrap();
        for fap in s.fap_stations() {
            let occ: Vec<_> = s.fap_occupancy.iter().filter(|o| o.fap == fap.id).collect();
            assert_eq!(occ.len(), 3);
            for o in occ {
                assert!((o.power - 1.0 / 15.0).abs() < 1e-15);
            }
            assert!((s.fap_committed_power(fap.id) - 0.2).abs() < 1e-12);
            assert_eq!(s.fap_free_carriers(fap.id).len(), 12);
        }
    }

    #[test]
    fn per_fap_solve_load() {
        let s = loaded(fig1_config(), FapLoadPolicy::PerFapSolve).unwrap();
        assert_eq!(s.fap_occupancy.len(), 36);
        for fap in s.fap_stations() {
            assert!(s.fap_committed_power(fap.id) <= fap.power.p_max);
        }
    }

    #[test]
    fn no_indoor_users_means_no_occupancy() {
        let cfg = NetworkConfig { indoor_users_per_fap: 0, ..fig1_config() };
        let s = loaded(cfg, FapLoadPolicy::UniformPower).unwrap();
        assert!(s.fap_occupancy.is_empty());
    }

    #[test]
    fn too_many_registered_users_is_infeasible() {
        let cfg = NetworkConfig { indoor_users_per_fap: 16, ..fig1_config() };
        assert!(matches!(loaded(cfg, FapLoadPolicy::UniformPower), Err(HetNetError::Infeasible(_))));
    }

    #[test]
    fn json_round_trip() {
        let s = loaded(fig1_config(), FapLoadPolicy::UniformPower).unwrap();
        let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn hybrid_budget_is_residual() {
        let s = loaded(fig1_config(), FapLoadPolicy::UniformPower).unwrap();
        let fap = s.fap_stations().next().unwrap().id;
        assert_eq!(s.with_kind(ScenarioKind::MsfClosed).station_budget(fap), 0.0);
        let hybrid = s.with_kind(ScenarioKind::MsfHybrid);
        assert!((hybrid.station_budget(fap) - 0.8).abs() < 1e-12);
        assert_eq!(hybrid.station_budget(0), 20.0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(100))]
        #[test]
        fn carrier_partition_and_occupancy_invariants(
            seed in 0u64..10_000,
            cells in 1usize..7,
            faps in 0usize..5,
            indoor in 0usize..6,
            macro_carriers in 1usize..40,
            small_carriers in 6usize..20,
        ) {
            let cfg = NetworkConfig {
                rng_seed: seed,
                num_small_cells: cells,
                num_faps_per_cell: faps,
                indoor_users_per_fap: indoor,
                num_outdoor_users: 5,
                macro_carriers,
                smallcell_carriers: small_carriers,
                total_carriers: macro_carriers + small_carriers,
                ..Default::default()
            };
            let s = loaded(cfg, FapLoadPolicy::UniformPower).unwrap();
            let macro_set: BTreeSet<usize> = s.stations[0].carriers.iter().copied().collect();
            for st in &s.stations[1..] {
                match st.kind {
                    StationKind::SmallCell { .. } => {
                        proptest::prop_assert!(st.carriers.iter().all(|c| !macro_set.contains(c)));
                    }
                    StationKind::Fap { cell, .. } => {
                        proptest::prop_assert_eq!(&st.carriers, &s.stations[1 + cell].carriers);
                    }
                    StationKind::Macro => unreachable!(),
                }
            }
            let mut seen = BTreeSet::new();
            for o in &s.fap_occupancy {
                proptest::prop_assert!(seen.insert((o.fap, o.carrier)));
            }
            proptest::prop_assert_eq!(seen.len(), cells * faps * indoor);
        }
    }
}
