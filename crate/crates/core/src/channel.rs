//! Path loss, shadowing and fading for every (user, station, carrier) link.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HetNetError, Result};
use crate::scenario::{seeded_rng, streams, Placement, Scenario, Station, StationKind, User};

fn check_distance(d: f64, what: &str) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(HetNetError::InvalidArgument(format!("{what} must be positive, got {d}")))
    }
}

/// Loss between a FAP and a user inside the same building, `d` in meters.
pub fn pathloss_indoor_indoor(d: f64) -> Result<f64> {
    check_distance(d, "indoor distance")?;
    Ok(38.46 + 20.0 * d.log10() + 0.3 * d)
}

/// Loss of a link crossing one outer wall. Distances in meters.
pub fn pathloss_outdoor_indoor(d_out: f64, d_in: f64, wall_loss_db: f64) -> Result<f64> {
    check_distance(d_out, "outdoor distance")?;
    if !(d_in >= 0.0) {
        return Err(HetNetError::InvalidArgument(format!("indoor distance {d_in} is negative")));
    }
    Ok(15.3 + 37.6 * d_out.log10() + 0.3 * d_in + wall_loss_db)
}

/// Outdoor loss `kappa + 10 nu log10(d)` with `d` in kilometers.
pub fn pathloss_outdoor_outdoor(d_km: f64, kappa: f64, nu: f64) -> Result<f64> {
    check_distance(d_km, "outdoor distance")?;
    Ok(kappa + 10.0 * nu * d_km.log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Fading {
    /// Exponential power gain with unit mean.
    #[default]
    Rayleigh,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub kappa: f64,
    pub nu: f64,
    pub penetration_loss: f64,
    pub shadow_sigma: f64,
    pub fading: Fading,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self { kappa: 128.1, nu: 3.76, penetration_loss: 6.0, shadow_sigma: 8.0, fading: Fading::Rayleigh }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.shadow_sigma >= 0.0) || !(self.penetration_loss >= 0.0) {
            return Err(HetNetError::InvalidConfig(
                "shadow_sigma and penetration_loss must be nonnegative".into(),
            ));
        }
        if !self.kappa.is_finite() || !(self.nu > 0.0) {
            return Err(HetNetError::InvalidConfig("kappa must be finite and nu positive".into()));
        }
        Ok(())
    }

    /// Shadowing term in dB.
    pub fn draw_shadow_db(&self, rng: &mut impl Rng) -> f64 {
        if self.shadow_sigma == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, self.shadow_sigma).expect("validated sigma").sample(rng)
    }

    /// Linear fading power gain of one carrier.
    pub fn draw_fading(&self, rng: &mut impl Rng) -> f64 {
        match self.fading {
            Fading::Rayleigh => {
                let x: f64 = Exp1.sample(rng);
                x.max(f64::MIN_POSITIVE)
            }
            Fading::None => 1.0,
        }
    }
}

/// Which path-loss formula applies to a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkBranch {
    IndoorIndoor,
    OutdoorIndoor,
    OutdoorOutdoor,
}

pub fn link_branch(user: &User, station: &Station) -> LinkBranch {
    match (user.placement, station.kind) {
        (Placement::Indoor { fap }, StationKind::Fap { .. }) if fap == station.id => LinkBranch::IndoorIndoor,
        (Placement::Outdoor, StationKind::Macro | StationKind::SmallCell { .. }) => LinkBranch::OutdoorOutdoor,
        _ => LinkBranch::OutdoorIndoor,
    }
}

/// Deterministic path loss of a link in dB.
pub fn link_pathloss(scenario: &Scenario, params: &ChannelParams, user: &User, station: &Station) -> Result<f64> {
    let geo = &scenario.geometry;
    let d = user.position.distance(&station.position);
    match link_branch(user, station) {
        LinkBranch::IndoorIndoor => pathloss_indoor_indoor(d.max(geo.min_indoor_distance)),
        LinkBranch::OutdoorOutdoor => {
            pathloss_outdoor_outdoor(d.max(geo.min_link_distance) / 1000.0, params.kappa, params.nu)
        }
        LinkBranch::OutdoorIndoor => {
            // The wall sits `indoor_depth` from whichever end is inside.
            let depth = geo.indoor_depth;
            let d_out = (d - depth).max(geo.min_link_distance);
            pathloss_outdoor_indoor(d_out, depth, params.penetration_loss)
        }
    }
}

/// Linear gains for all users, stations and global carriers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMatrix {
    pub users: usize,
    pub stations: usize,
    pub carriers: usize,
    /// Indexed `(user * stations + station) * carriers + carrier`.
    pub gains: Vec<f64>,
}

impl ChannelMatrix {
    /// Gain table with the same value everywhere, for hand-built instances.
    pub fn constant(users: usize, stations: usize, carriers: usize, gain: f64) -> Self {
        Self { users, stations, carriers, gains: vec![gain; users * stations * carriers] }
    }

    #[inline]
    pub fn gain(&self, user: usize, station: usize, carrier: usize) -> f64 {
        self.gains[(user * self.stations + station) * self.carriers + carrier]
    }

    pub fn set_gain(&mut self, user: usize, station: usize, carrier: usize, gain: f64) {
        self.gains[(user * self.stations + station) * self.carriers + carrier] = gain;
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ch: ChannelMatrix = serde_json::from_str(text)?;
        if ch.gains.len() != ch.users * ch.stations * ch.carriers {
            return Err(HetNetError::InvalidConfig("channel dimensions do not match gain count".into()));
        }
        Ok(ch)
    }
}

/// Draws the full channel from the scenario seed. Shadowing is per (user, station),
/// fading per (user, station, carrier).
pub fn build_channel(scenario: &Scenario, params: &ChannelParams) -> Result<ChannelMatrix> {
    params.validate()?;
    let n_users = scenario.users.len();
    let n_stations = scenario.stations.len();
    let n_carriers = scenario.config.total_carriers;
    let mut rng = seeded_rng(scenario.config.rng_seed, streams::CHANNEL);
    let mut gains = Vec::with_capacity(n_users * n_stations * n_carriers);
    for user in &scenario.users {
        for station in &scenario.stations {
            let pl = link_pathloss(scenario, params, user, station)?;
            let shadow = params.draw_shadow_db(&mut rng);
            let mean_gain = 10f64.powf((shadow - pl) / 10.0);
            for _ in 0..n_carriers {
                gains.push(mean_gain * params.draw_fading(&mut rng));
            }
        }
    }
    Ok(ChannelMatrix { users: n_users, stations: n_stations, carriers: n_carriers, gains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{GeometrySpec, NetworkConfig};
    use crate::scenario::generate;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn indoor_indoor_examples() {
        assert!(close(pathloss_indoor_indoor(1.0).unwrap(), 38.76, 1e-12));
        assert!(close(pathloss_indoor_indoor(10.0).unwrap(), 61.46, 1e-12));
        assert!(close(pathloss_indoor_indoor(100.0).unwrap(), 108.46, 1e-12));
        assert!(pathloss_indoor_indoor(0.0).is_err());
        assert!(pathloss_indoor_indoor(-3.0).is_err());
    }

    #[test]
    fn outdoor_indoor_examples() {
        assert!(close(pathloss_outdoor_indoor(1.0, 0.0, 6.0).unwrap(), 21.3, 1e-12));
        assert!(close(pathloss_outdoor_indoor(100.0, 10.0, 6.0).unwrap(), 99.5, 1e-12));
        let step = pathloss_outdoor_indoor(40.0, 15.0, 6.0).unwrap() - pathloss_outdoor_indoor(40.0, 5.0, 6.0).unwrap();
        assert!(close(step, 3.0, 1e-12));
        assert!(pathloss_outdoor_indoor(0.0, 1.0, 6.0).is_err());
    }

    #[test]
    fn outdoor_outdoor_examples() {
        assert!(close(pathloss_outdoor_outdoor(1.0, 128.1, 3.76).unwrap(), 128.1, 1e-12));
        assert!(close(pathloss_outdoor_outdoor(0.1, 128.1, 3.76).unwrap(), 90.5, 1e-12));
        let slope = pathloss_outdoor_outdoor(0.4, 128.1, 3.76).unwrap() - pathloss_outdoor_outdoor(0.2, 128.1, 3.76).unwrap();
        assert!(close(slope, 37.6 * 2f64.log10(), 1e-12));
        assert!(close(slope, 11.32, 5e-3));
        assert!(pathloss_outdoor_outdoor(0.0, 128.1, 3.76).is_err());
    }

    fn scenario() -> Scenario {
        let cfg = NetworkConfig { num_outdoor_users: 12, ..Default::default() };
        generate(&cfg, &GeometrySpec::default()).unwrap()
    }

    #[test]
    fn deterministic_channel_is_pure_pathloss() {
        let s = scenario();
        let params = ChannelParams { shadow_sigma: 0.0, fading: Fading::None, ..Default::default() };
        let ch = build_channel(&s, &params).unwrap();
        for user in &s.users {
            for st in &s.stations {
                let expected = 10f64.powf(-link_pathloss(&s, &params, user, st).unwrap() / 10.0);
                for r in 0..ch.carriers {
                    assert_eq!(ch.gain(user.id, st.id, r), expected);
                }
            }
        }
    }

    #[test]
    fn channel_is_seeded_and_positive() {
        let s = scenario();
        let a = build_channel(&s, &ChannelParams::default()).unwrap();
        let b = build_channel(&s, &ChannelParams::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.gains.iter().all(|g| g.is_finite() && *g > 0.0));
        assert_eq!(a.gains.len(), s.users.len() * s.stations.len() * 45);
    }

    #[test]
    fn fading_has_unit_mean() {
        let params = ChannelParams::default();
        let mut rng = seeded_rng(7, 0);
        let n = 100_000;
        let mean = (0..n).map(|_| params.draw_fading(&mut rng)).sum::<f64>() / n as f64;
        assert!((0.99..=1.01).contains(&mean), "{mean}");
    }

    #[test]
    fn shadowing_has_configured_spread() {
        let params = ChannelParams::default();
        let mut rng = seeded_rng(11, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| params.draw_shadow_db(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - 8.0).abs() <= 0.02 * 8.0, "{}", var.sqrt());
    }

    #[test]
    fn branch_selection_covers_all_pairs() {
        let s = scenario();
        for u in &s.users {
            for st in &s.stations {
                let branch = link_branch(u, st);
                match (u.is_indoor(), st.is_outdoor()) {
                    (false, true) => assert_eq!(branch, LinkBranch::OutdoorOutdoor),
                    (true, false) if u.registered_to == Some(st.id) => assert_eq!(branch, LinkBranch::IndoorIndoor),
                    _ => assert_eq!(branch, LinkBranch::OutdoorIndoor),
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn gain_decreases_with_distance(d in 1.0f64..2000.0, extra in 0.01f64..500.0) {
            let g = |pl: f64| 10f64.powf(-pl / 10.0);
            proptest::prop_assert!(g(pathloss_indoor_indoor(d + extra).unwrap()) < g(pathloss_indoor_indoor(d).unwrap()));
            proptest::prop_assert!(
                g(pathloss_outdoor_indoor(d + extra, 5.0, 6.0).unwrap()) < g(pathloss_outdoor_indoor(d, 5.0, 6.0).unwrap())
            );
            proptest::prop_assert!(
                g(pathloss_outdoor_outdoor((d + extra) / 1e3, 128.1, 3.76).unwrap())
                    < g(pathloss_outdoor_outdoor(d / 1e3, 128.1, 3.76).unwrap())
            );
        }
    }
}
