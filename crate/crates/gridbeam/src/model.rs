//! Domain types for the cluster scheduling problem: dimensions, prices,
//! batteries, channels, and the assembled problem instance.
//!
//! All types are immutable after construction and validate their invariants
//! eagerly, so downstream numerics never re-checks them.

use crate::linalg::HermitianMatrix;
use crate::uncertainty::UncertaintySet;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension must be at least 1: {0}")]
    ZeroDimension(&'static str),
    #[error("buy price must exceed sell price: alpha[{slot}]={alpha} <= beta[{slot}]={beta}")]
    PriceOrder { slot: usize, alpha: f64, beta: f64 },
    #[error("sell price must be nonnegative: beta[{slot}]={beta}")]
    NegativeSellPrice { slot: usize, beta: f64 },
    #[error("price curve length {got} does not match horizon {want}")]
    PriceLength { got: usize, want: usize },
    #[error("battery: initial energy {c0} outside [0, {cmax}]")]
    InitialEnergy { c0: f64, cmax: f64 },
    #[error("battery: charge limits must satisfy min < 0 < max, got [{min}, {max}]")]
    ChargeLimits { min: f64, max: f64 },
    #[error("battery: efficiency {0} outside (0, 1]")]
    Efficiency(f64),
    #[error("station {station}: fixed power {pc} outside (0, {pg_max}]")]
    FixedPower {
        station: usize,
        pc: f64,
        pg_max: f64,
    },
    #[error("amplifier efficiency must be positive, got {0}")]
    AmplifierEfficiency(f64),
    #[error("channel ({user},{slot}): uncertainty radius {0} is negative", .epsilon)]
    NegativeRadius {
        user: usize,
        slot: usize,
        epsilon: f64,
    },
    #[error("channel ({user},{slot}): noise variance {sigma2} must be positive")]
    NoisePower {
        user: usize,
        slot: usize,
        sigma2: f64,
    },
    #[error("channel ({user},{slot}): SINR target {gamma} must be positive")]
    SinrTarget {
        user: usize,
        slot: usize,
        gamma: f64,
    },
    #[error("channel ({user},{slot}): estimate length {got}, expected {want}")]
    ChannelLength {
        user: usize,
        slot: usize,
        got: usize,
        want: usize,
    },
    #[error("missing channel estimate for user {user}, slot {slot}")]
    MissingChannel { user: usize, slot: usize },
    #[error("station {station}: renewable set horizon {got} does not match T={want}")]
    ResHorizon {
        station: usize,
        got: usize,
        want: usize,
    },
    #[error("station index {index} out of range (I={count})")]
    StationIndex { index: usize, count: usize },
    #[error("expected {want} stations, got {got}")]
    StationCount { got: usize, want: usize },
    #[error("invalid uncertainty set for station {station}: {source}")]
    Uncertainty {
        station: usize,
        source: crate::uncertainty::UncertaintyError,
    },
}

/// Problem dimensions: T slots, I stations, K users, M antennas per station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub slots: usize,
    pub stations: usize,
    pub users: usize,
    pub antennas: usize,
}

impl Dimensions {
    pub fn new(
        slots: usize,
        stations: usize,
        users: usize,
        antennas: usize,
    ) -> Result<Self, ModelError> {
        if slots == 0 {
            return Err(ModelError::ZeroDimension("slots"));
        }
        if stations == 0 {
            return Err(ModelError::ZeroDimension("stations"));
        }
        if users == 0 {
            return Err(ModelError::ZeroDimension("users"));
        }
        if antennas == 0 {
            return Err(ModelError::ZeroDimension("antennas"));
        }
        Ok(Self {
            slots,
            stations,
            users,
            antennas,
        })
    }

    /// Stacked beamformer length M*I.
    pub fn beam_len(&self) -> usize {
        self.antennas * self.stations
    }
}

/// Per-slot buy/sell prices together with the derived half-sum and
/// half-difference curves psi = (alpha-beta)/2, phi = (alpha+beta)/2.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceCurve {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
}

impl PriceCurve {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self, ModelError> {
        if alpha.len() != beta.len() {
            return Err(ModelError::PriceLength {
                got: beta.len(),
                want: alpha.len(),
            });
        }
        for (t, (&a, &b)) in alpha.iter().zip(beta.iter()).enumerate() {
            if b < 0.0 {
                return Err(ModelError::NegativeSellPrice { slot: t, beta: b });
            }
            if a <= b {
                return Err(ModelError::PriceOrder {
                    slot: t,
                    alpha: a,
                    beta: b,
                });
            }
        }
        let psi = alpha
            .iter()
            .zip(beta.iter())
            .map(|(a, b)| 0.5 * (a - b))
            .collect();
        let phi = alpha
            .iter()
            .zip(beta.iter())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Ok(Self {
            alpha,
            beta,
            psi,
            phi,
        })
    }

    /// Convenience constructor with beta = ratio * alpha.
    pub fn with_sell_ratio(alpha: Vec<f64>, ratio: f64) -> Result<Self, ModelError> {
        let beta = alpha.iter().map(|a| a * ratio).collect();
        Self::new(alpha, beta)
    }

    pub fn horizon(&self) -> usize {
        self.alpha.len()
    }
}

/// Battery parameters of one station.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryParams {
    /// Initial stored energy C^0.
    pub initial: f64,
    /// Capacity C^max.
    pub capacity: f64,
    /// Most negative charging power (discharge limit), < 0.
    pub charge_min: f64,
    /// Largest charging power, > 0.
    pub charge_max: f64,
    /// Fraction of stored energy available for discharge, in (0, 1].
    pub efficiency: f64,
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=self.capacity).contains(&self.initial) || self.capacity < 0.0 {
            return Err(ModelError::InitialEnergy {
                c0: self.initial,
                cmax: self.capacity,
            });
        }
        if !(self.charge_min < 0.0 && self.charge_max > 0.0) {
            return Err(ModelError::ChargeLimits {
                min: self.charge_min,
                max: self.charge_max,
            });
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(ModelError::Efficiency(self.efficiency));
        }
        Ok(())
    }
}

/// Per-station parameters: battery, fixed consumption, consumption cap,
/// renewable uncertainty set, and an optional price override.
#[derive(Debug, Clone)]
pub struct BsParams {
    pub battery: BatteryParams,
    /// Fixed (non-transmission) consumption P_c > 0.
    pub fixed_power: f64,
    /// Cap on total consumption P_g^max.
    pub total_power_max: f64,
    /// Renewable-energy uncertainty set for this station.
    pub res: UncertaintySet,
    /// Station-local prices; cluster-wide prices apply when absent.
    pub prices: Option<PriceCurve>,
}

/// Channel data for one (user, slot) pair.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// Estimated stacked channel, length M*I.
    pub h_hat: Vec<Complex64>,
    /// Radius of the spherical uncertainty region, >= 0.
    pub epsilon: f64,
    /// Receiver noise variance sigma^2 > 0.
    pub noise_var: f64,
    /// SINR target gamma > 0.
    pub sinr_target: f64,
}

/// Validated problem instance. Construction precomputes the derived price
/// curves and the amplifier-scaled selection matrices.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub dims: Dimensions,
    pub prices: PriceCurve,
    pub stations: Vec<BsParams>,
    /// Channel estimates indexed user-major: channels[k * T + t].
    pub channels: Vec<ChannelEstimate>,
    /// Amplifier efficiency (already absorbed into the selection matrices).
    pub amplifier_efficiency: f64,
    /// Diagonal of B_i / xi per station, each of length M*I.
    selection: Vec<Vec<f64>>,
}

impl ProblemInstance {
    pub fn new(
        dims: Dimensions,
        prices: PriceCurve,
        stations: Vec<BsParams>,
        channels: Vec<ChannelEstimate>,
        amplifier_efficiency: f64,
    ) -> Result<Self, ModelError> {
        if amplifier_efficiency <= 0.0 {
            return Err(ModelError::AmplifierEfficiency(amplifier_efficiency));
        }
        if prices.horizon() != dims.slots {
            return Err(ModelError::PriceLength {
                got: prices.horizon(),
                want: dims.slots,
            });
        }
        if stations.len() != dims.stations {
            return Err(ModelError::StationCount {
                got: stations.len(),
                want: dims.stations,
            });
        }
        for (i, bs) in stations.iter().enumerate() {
            bs.battery.validate()?;
            if !(bs.fixed_power > 0.0 && bs.fixed_power <= bs.total_power_max) {
                return Err(ModelError::FixedPower {
                    station: i,
                    pc: bs.fixed_power,
                    pg_max: bs.total_power_max,
                });
            }
            if bs.res.horizon() != dims.slots {
                return Err(ModelError::ResHorizon {
                    station: i,
                    got: bs.res.horizon(),
                    want: dims.slots,
                });
            }
            if let Some(p) = &bs.prices {
                if p.horizon() != dims.slots {
                    return Err(ModelError::PriceLength {
                        got: p.horizon(),
                        want: dims.slots,
                    });
                }
            }
        }
        if channels.len() != dims.users * dims.slots {
            return Err(ModelError::MissingChannel {
                user: channels.len() / dims.slots.max(1),
                slot: channels.len() % dims.slots.max(1),
            });
        }
        for (idx, ch) in channels.iter().enumerate() {
            let (user, slot) = (idx / dims.slots, idx % dims.slots);
            if ch.h_hat.len() != dims.beam_len() {
                return Err(ModelError::ChannelLength {
                    user,
                    slot,
                    got: ch.h_hat.len(),
                    want: dims.beam_len(),
                });
            }
            if ch.epsilon < 0.0 {
                return Err(ModelError::NegativeRadius {
                    user,
                    slot,
                    epsilon: ch.epsilon,
                });
            }
            if ch.noise_var <= 0.0 {
                return Err(ModelError::NoisePower {
                    user,
                    slot,
                    sigma2: ch.noise_var,
                });
            }
            if ch.sinr_target <= 0.0 {
                return Err(ModelError::SinrTarget {
                    user,
                    slot,
                    gamma: ch.sinr_target,
                });
            }
        }
        let selection = (0..dims.stations)
            .map(|i| selection_matrix(i, &dims, amplifier_efficiency).expect("index in range"))
            .collect();
        Ok(Self {
            dims,
            prices,
            stations,
            channels,
            amplifier_efficiency,
            selection,
        })
    }

    pub fn channel(&self, user: usize, slot: usize) -> &ChannelEstimate {
        &self.channels[user * self.dims.slots + slot]
    }

    /// Diagonal of the amplifier-scaled selection matrix B_i / xi.
    pub fn selection_diag(&self, station: usize) -> &[f64] {
        &self.selection[station]
    }

    /// Effective price curve for a station (local override or cluster-wide).
    pub fn prices_for(&self, station: usize) -> &PriceCurve {
        self.stations[station]
            .prices
            .as_ref()
            .unwrap_or(&self.prices)
    }

    /// tr(B_i X) for a lifted beamformer (B_i diagonal, so only the real
    /// diagonal of X contributes).
    pub fn station_power(&self, station: usize, x: &HermitianMatrix) -> f64 {
        let diag = &self.selection[station];
        (0..x.order()).map(|d| diag[d] * x.get(d, d).re).sum()
    }
}

/// Diagonal of the selection matrix for station `i` (0-based), scaled by
/// 1/xi: ones on entries i*M .. (i+1)*M - 1, zero elsewhere.
pub fn selection_matrix(
    i: usize,
    dims: &Dimensions,
    xi: f64,
) -> Result<Vec<f64>, ModelError> {
    if i >= dims.stations {
        return Err(ModelError::StationIndex {
            index: i,
            count: dims.stations,
        });
    }
    if xi <= 0.0 {
        return Err(ModelError::AmplifierEfficiency(xi));
    }
    let n = dims.beam_len();
    let mut d = vec![0.0; n];
    for a in (i * dims.antennas)..((i + 1) * dims.antennas) {
        d[a] = 1.0 / xi;
    }
    Ok(d)
}

/// Realized SINR of user `k` under beamformers `ws` and channel `h`:
/// |h^H w_k|^2 / (sum_{l != k} |h^H w_l|^2 + sigma^2).
pub fn evaluate_sinr(ws: &[Vec<Complex64>], k: usize, h: &[Complex64], sigma2: f64) -> f64 {
    let inner = |w: &[Complex64]| -> f64 {
        let z: Complex64 = h.iter().zip(w.iter()).map(|(hi, wi)| hi.conj() * wi).sum();
        z.norm_sqr()
    };
    let signal = inner(&ws[k]);
    let interference: f64 = ws
        .iter()
        .enumerate()
        .filter(|(l, _)| *l != k)
        .map(|(_, w)| inner(w))
        .sum();
    signal / (interference + sigma2)
}

/// Per-slot, per-station decisions plus lifted and extracted beamformers.
#[derive(Debug, Clone)]
pub struct Schedule {
    /// Auxiliary power P_i^t (station-major: p[i][t]).
    pub p: Vec<Vec<f64>>,
    /// Battery charge/discharge P_{b,i}^t.
    pub pb: Vec<Vec<f64>>,
    /// Stored energy C_i^t.
    pub c: Vec<Vec<f64>>,
    /// Lifted beamformers x[k][t], each of order M*I.
    pub x: Vec<Vec<HermitianMatrix>>,
    /// S-procedure certificates tau[k][t] (zero in non-robust mode).
    pub tau: Vec<Vec<f64>>,
    /// Extracted beamforming vectors w[k][t]; absent until extraction.
    pub w: Option<Vec<Vec<Vec<Complex64>>>>,
}

impl Schedule {
    /// Total transmit-side consumption sum_k tr(B_i X_k^t).
    pub fn transmit_power(&self, instance: &ProblemInstance, station: usize, slot: usize) -> f64 {
        (0..instance.dims.users)
            .map(|k| instance.station_power(station, &self.x[k][slot]))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::PolyhedralSet;

    fn unit_battery() -> BatteryParams {
        BatteryParams {
            initial: 5.0,
            capacity: 30.0,
            charge_min: -10.0,
            charge_max: 10.0,
            efficiency: 0.95,
        }
    }

    fn tiny_instance(alpha: Vec<f64>, beta: Vec<f64>) -> Result<ProblemInstance, ModelError> {
        let t = alpha.len();
        let dims = Dimensions::new(t, 1, 1, 1)?;
        let prices = PriceCurve::new(alpha, beta)?;
        let res = UncertaintySet::Polyhedral(
            PolyhedralSet::from_box(vec![0.0; t], vec![1.0; t]).unwrap(),
        );
        let stations = vec![BsParams {
            battery: unit_battery(),
            fixed_power: 1.0,
            total_power_max: 10.0,
            res,
            prices: None,
        }];
        let channels = (0..t)
            .map(|_| ChannelEstimate {
                h_hat: vec![Complex64::new(1.0, 0.0)],
                epsilon: 0.1,
                noise_var: 1.0,
                sinr_target: 0.1,
            })
            .collect();
        ProblemInstance::new(dims, prices, stations, channels, 1.0)
    }

    #[test]
    fn battery_from_reference_table_accepted() {
        // C0=5, Cmax=30, PbMin=-10, PbMax=10, efficiency=0.95
        assert!(unit_battery().validate().is_ok());
    }

    #[test]
    fn equal_prices_rejected() {
        let r = tiny_instance(vec![0.4], vec![0.4]);
        assert!(matches!(r, Err(ModelError::PriceOrder { .. })));
    }

    #[test]
    fn negative_radius_rejected() {
        let mut inst = tiny_instance(vec![0.5], vec![0.1]).unwrap();
        inst.channels[0].epsilon = -0.1;
        let r = ProblemInstance::new(
            inst.dims,
            inst.prices.clone(),
            inst.stations.clone(),
            inst.channels.clone(),
            1.0,
        );
        assert!(matches!(r, Err(ModelError::NegativeRadius { .. })));
    }

    #[test]
    fn derived_price_curves() {
        let pr = PriceCurve::new(vec![1.0, 0.8], vec![0.5, 0.2]).unwrap();
        for (got, want) in pr.psi.iter().zip([0.25, 0.3]) {
            assert!((got - want).abs() < 1e-15);
        }
        for (got, want) in pr.phi.iter().zip([0.75, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        // phi > psi > 0
        for t in 0..2 {
            assert!(pr.phi[t] > pr.psi[t] && pr.psi[t] > 0.0);
        }
    }

    #[test]
    fn selection_matrix_examples() {
        let d2 = Dimensions::new(1, 2, 1, 2).unwrap();
        assert_eq!(
            selection_matrix(1, &d2, 1.0).unwrap(),
            vec![0.0, 0.0, 1.0, 1.0]
        );
        let d1 = Dimensions::new(1, 1, 1, 3).unwrap();
        assert_eq!(selection_matrix(0, &d1, 1.0).unwrap(), vec![1.0, 1.0, 1.0]);
        // amplifier efficiency folds in as 1/xi
        assert_eq!(
            selection_matrix(0, &d2, 2.0).unwrap(),
            vec![0.5, 0.5, 0.0, 0.0]
        );
        assert!(selection_matrix(2, &d2, 1.0).is_err());
    }

    #[test]
    fn selection_matrices_sum_to_identity() {
        for (i_count, m) in [(2usize, 2usize), (3, 1), (4, 3)] {
            let dims = Dimensions::new(1, i_count, 1, m).unwrap();
            let xi = 1.7;
            let mut acc = vec![0.0; dims.beam_len()];
            for i in 0..i_count {
                for (a, v) in acc
                    .iter_mut()
                    .zip(selection_matrix(i, &dims, xi).unwrap().iter())
                {
                    *a += xi * v;
                }
            }
            for v in acc {
                assert!((v - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sinr_examples() {
        // Single user, w = h, ||h||^2 = 2, sigma^2 = 1 -> SINR 4.
        let h = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let ws = vec![h.clone()];
        let s = evaluate_sinr(&ws, 0, &h, 1.0);
        assert!((s - 4.0).abs() < 1e-12);
        // Zero beamformer: SINR 0.
        let ws0 = vec![vec![Complex64::new(0.0, 0.0); 2]];
        assert_eq!(evaluate_sinr(&ws0, 0, &h, 1.0), 0.0);
        // Orthogonal interferer contributes nothing.
        let w_orth = vec![Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)];
        // h^H w_orth = conj(1)*i*...: check it is orthogonal first
        let dot: Complex64 = h
            .iter()
            .zip(w_orth.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!(dot.norm() < 1e-15);
        let ws2 = vec![h.clone(), w_orth];
        assert!((evaluate_sinr(&ws2, 0, &h, 1.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sinr_phase_invariance() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(1..5);
            let k_count = rng.gen_range(1..4);
            let randc = |rng: &mut StdRng| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            };
            let h: Vec<Complex64> = (0..n).map(|_| randc(&mut rng)).collect();
            let ws: Vec<Vec<Complex64>> = (0..k_count)
                .map(|_| (0..n).map(|_| randc(&mut rng)).collect())
                .collect();
            let k = rng.gen_range(0..k_count);
            let base = evaluate_sinr(&ws, k, &h, 0.7);
            // Apply a unit-modulus phase to one beamformer.
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let phase = Complex64::new(theta.cos(), theta.sin());
            let l = rng.gen_range(0..k_count);
            let mut ws2 = ws.clone();
            for v in ws2[l].iter_mut() {
                *v *= phase;
            }
            let rotated = evaluate_sinr(&ws2, k, &h, 0.7);
            assert!((base - rotated).abs() < 1e-12 * (1.0 + base));
        }
    }

    #[test]
    fn instance_index_consistency_enforced() {
        // Wrong channel count
        let dims = Dimensions::new(2, 1, 1, 1).unwrap();
        let prices = PriceCurve::new(vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let res = UncertaintySet::Singleton(vec![1.0, 1.0]);
        let stations = vec![BsParams {
            battery: unit_battery(),
            fixed_power: 1.0,
            total_power_max: 5.0,
            res,
            prices: None,
        }];
        let channels = vec![ChannelEstimate {
            h_hat: vec![Complex64::new(1.0, 0.0)],
            epsilon: 0.0,
            noise_var: 1.0,
            sinr_target: 0.1,
        }];
        let r = ProblemInstance::new(dims, prices, stations, channels, 1.0);
        assert!(r.is_err());
    }

    #[test]
    fn random_single_invariant_breakage_is_caught() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..60 {
            let mut inst = tiny_instance(vec![0.5, 0.9], vec![0.1, 0.3]).unwrap();
            let which = rng.gen_range(0..6);
            let expect_station_err = match which {
                0 => {
                    inst.stations[0].battery.efficiency = rng.gen_range(1.0001..2.0);
                    true
                }
                1 => {
                    inst.stations[0].battery.initial = inst.stations[0].battery.capacity + 1.0;
                    true
                }
                2 => {
                    inst.stations[0].battery.charge_min = 0.5;
                    true
                }
                3 => {
                    inst.stations[0].fixed_power = 0.0;
                    true
                }
                4 => {
                    inst.channels[0].noise_var = 0.0;
                    false
                }
                _ => {
                    inst.channels[1].sinr_target = -1.0;
                    false
                }
            };
            let r = ProblemInstance::new(
                inst.dims,
                inst.prices.clone(),
                inst.stations.clone(),
                inst.channels.clone(),
                inst.amplifier_efficiency,
            );
            match (which, &r) {
                (0, Err(ModelError::Efficiency(_)))
                | (1, Err(ModelError::InitialEnergy { .. }))
                | (2, Err(ModelError::ChargeLimits { .. }))
                | (3, Err(ModelError::FixedPower { .. }))
                | (4, Err(ModelError::NoisePower { .. }))
                | (5, Err(ModelError::SinrTarget { .. })) => {}
                _ => panic!(
                    "mutation {which} (station_err={expect_station_err}) gave {r:?}"
                ),
            }
        }
    }
}
