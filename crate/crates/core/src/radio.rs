//! Per-carrier rates, the power needed to reach a rate, and cross-tier interference.

use serde::{Deserialize, Serialize};

use crate::alloc::AllocationState;
use crate::channel::ChannelMatrix;
use crate::config::ScenarioKind;
use crate::error::{HetNetError, Result};
use crate::scenario::{Scenario, StationKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub gain: f64,
    /// Interference power in watts.
    pub interference: f64,
    pub noise: f64,
    /// Hz.
    pub carrier_bandwidth: f64,
}

impl LinkBudget {
    /// Interference plus noise.
    pub fn impairment(&self) -> f64 {
        self.interference + self.noise
    }
}

/// Achievable rate in bit/s at transmit power `p`.
pub fn rate(p: f64, link: &LinkBudget) -> f64 {
    link.carrier_bandwidth * (p * link.gain / link.impairment()).ln_1p() / std::f64::consts::LN_2
}

/// Received-power target `(2^(R/W) - 1)(I + N0)` for rate `target` bit/s.
pub fn rate_floor_power(target: f64, link: &LinkBudget) -> f64 {
    (target / link.carrier_bandwidth * std::f64::consts::LN_2).exp_m1() * link.impairment()
}

/// Smallest transmit power reaching `target` bit/s on this link.
pub fn required_power(target: f64, link: &LinkBudget) -> Result<f64> {
    if !(link.gain > 0.0) {
        return Err(HetNetError::InvalidArgument("link gain must be positive".into()));
    }
    Ok(rate_floor_power(target, link) / link.gain)
}

/// Interference from FAPs on an outdoor user's carrier. Zero without FAPs.
pub fn cross_tier_interference(scenario: &Scenario, channel: &ChannelMatrix, user: usize, carrier: usize) -> f64 {
    if scenario.kind() == ScenarioKind::Ms {
        return 0.0;
    }
    scenario
        .fap_occupancy
        .iter()
        .filter(|o| o.carrier == carrier)
        .map(|o| o.power * channel.gain(user, o.fap, carrier))
        .sum()
}

/// Link of an outdoor user served by `station` on `carrier`.
pub fn outdoor_link(
    scenario: &Scenario,
    channel: &ChannelMatrix,
    user: usize,
    station: usize,
    carrier: usize,
) -> LinkBudget {
    let cfg = &scenario.config;
    LinkBudget {
        gain: channel.gain(user, station, carrier),
        interference: cfg.neighbor_interference + cross_tier_interference(scenario, channel, user, carrier),
        noise: cfg.noise_power,
        carrier_bandwidth: cfg.carrier_bandwidth(),
    }
}

/// Interference received by an indoor user from small cells transmitting on its carrier.
pub fn indoor_interference(
    scenario: &Scenario,
    channel: &ChannelMatrix,
    alloc: &AllocationState,
    user: usize,
    carrier: usize,
) -> f64 {
    alloc
        .assignments
        .iter()
        .flatten()
        .filter(|a| a.carrier == carrier && matches!(scenario.stations[a.station].kind, StationKind::SmallCell { .. }))
        .map(|a| a.power * channel.gain(user, a.station, carrier))
        .sum()
}

/// Rates of the registered indoor users given the operator's allocation, in user order.
pub fn indoor_rates(scenario: &Scenario, channel: &ChannelMatrix, alloc: &AllocationState) -> Vec<(usize, f64)> {
    let cfg = &scenario.config;
    scenario
        .fap_occupancy
        .iter()
        .map(|o| {
            let link = LinkBudget {
                gain: channel.gain(o.user, o.fap, o.carrier),
                interference: cfg.neighbor_interference
                    + indoor_interference(scenario, channel, alloc, o.user, o.carrier),
                noise: cfg.noise_power,
                carrier_bandwidth: cfg.carrier_bandwidth(),
            };
            (o.user, rate(o.power, &link))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_channel, ChannelParams};
    use crate::config::{FapLoadPolicy, GeometrySpec, NetworkConfig};
    use crate::scenario::{assign_fap_load, generate, FapOccupancy};

    fn link(gain: f64, impairment: f64) -> LinkBudget {
        LinkBudget { gain, interference: 0.0, noise: impairment, carrier_bandwidth: 200e3 }
    }

    #[test]
    fn rate_examples() {
        let l = link(1e-10, 1e-13);
        assert_eq!(rate(0.0, &l), 0.0);
        // SINR of 3
        assert!((rate(3e-3, &l) - 0.4e6).abs() < 1e-6);
        assert!(rate(2e-3, &l) < rate(3e-3, &l));
    }

    #[test]
    fn required_power_examples() {
        let l = link(1e-10, 1e-13);
        let p = required_power(0.4e6, &l).unwrap();
        assert!((p - 3e-3).abs() < 1e-15);
        assert!(required_power(1e-9, &l).unwrap() < 1e-15);
        assert!(required_power(1.0, &link(0.0, 1e-13)).is_err());
    }

    fn loaded() -> (Scenario, ChannelMatrix) {
        let cfg = NetworkConfig { num_outdoor_users: 8, ..Default::default() };
        let s = generate(&cfg, &GeometrySpec::default()).unwrap();
        let ch = build_channel(&s, &ChannelParams::default()).unwrap();
        (assign_fap_load(&s, &ch, FapLoadPolicy::UniformPower).unwrap(), ch)
    }

    #[test]
    fn no_cross_tier_interference_without_faps() {
        let (s, ch) = loaded();
        let ms = s.with_kind(ScenarioKind::Ms);
        for u in 0..ms.num_outdoor_users() {
            for r in 0..ch.carriers {
                assert_eq!(cross_tier_interference(&ms, &ch, u, r), 0.0);
            }
        }
    }

    #[test]
    fn single_interferer_term() {
        let (mut s, mut ch) = loaded();
        s = s.with_kind(ScenarioKind::MsfClosed);
        let fap = s.fap_stations().next().unwrap().id;
        let user_of_fap = s.users.iter().find(|u| u.registered_to == Some(fap)).unwrap().id;
        s.fap_occupancy = vec![FapOccupancy { fap, carrier: 31, user: user_of_fap, power: 1.0 / 15.0 }];
        ch.set_gain(0, fap, 31, 1e-10);
        let i = cross_tier_interference(&s, &ch, 0, 31);
        assert!((i - 6.666_666_666_666_667e-12).abs() < 1e-24);
        // macro-only carrier never carries FAP power
        assert_eq!(cross_tier_interference(&s, &ch, 0, 3), 0.0);
    }

    #[test]
    fn closed_rates_equal_ms_rates_without_occupancy() {
        let (mut s, ch) = loaded();
        s.fap_occupancy.clear();
        let closed = s.with_kind(ScenarioKind::MsfClosed);
        let ms = s.with_kind(ScenarioKind::Ms);
        for st in 0..5 {
            for r in [0, 10, 30, 44] {
                let a = outdoor_link(&closed, &ch, 2, st, r);
                let b = outdoor_link(&ms, &ch, 2, st, r);
                assert_eq!(rate(0.01, &a), rate(0.01, &b));
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(256))]
        #[test]
        fn required_power_inverts_rate(
            log_gain in -14.0f64..-6.0,
            log_imp in -16.0f64..-10.0,
            target in 1e3f64..3e6,
        ) {
            let l = LinkBudget { gain: 10f64.powf(log_gain), interference: 0.0, noise: 10f64.powf(log_imp), carrier_bandwidth: 200e3 };
            let p = required_power(target, &l).unwrap();
            let back = rate(p, &l);
            proptest::prop_assert!((back - target).abs() <= 1e-9 * target);
        }
    }
}
