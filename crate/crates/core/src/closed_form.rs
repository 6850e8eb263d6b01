//! Closed-form estimation statistics and achievable SINR/SE under MRT.
//!
//! Unicast user `m` is estimated from its own pilot; the members of a
//! multicast group share one pilot, so their MMSE estimates are all scalar
//! multiples of the estimate of the group's composite channel
//! `g_g = sum_t sqrt(tau q_gt) g_gt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{LargeScaleProfile, SystemConfig};

/// Relative slack allowed on `P_un + P_mu <= P` to absorb rounding in sums
/// that are meant to hit the budget exactly.
pub const POWER_SLACK: f64 = 1e-12;

/// Full decision variable: downlink powers, pilot powers and pilot length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p_dl: Vec<f64>,
    pub q_dl: Vec<f64>,
    pub p_up: Vec<f64>,
    pub q_up: Vec<Vec<f64>>,
    pub tau: usize,
}

impl PowerAllocation {
    /// All-zero allocation with pilot length `U + G`.
    pub fn zeros(config: &SystemConfig) -> Self {
        PowerAllocation {
            p_dl: vec![0.0; config.n_unicast],
            q_dl: vec![0.0; config.n_groups],
            p_up: vec![0.0; config.n_unicast],
            q_up: config.group_sizes.iter().map(|&k| vec![0.0; k]).collect(),
            tau: config.min_pilot_length(),
        }
    }

    /// `P_un`, the total unicast precoding power.
    pub fn p_un(&self) -> f64 {
        self.p_dl.iter().sum()
    }

    /// `P_mu`, the total multicast precoding power.
    pub fn p_mu(&self) -> f64 {
        self.q_dl.iter().sum()
    }

    pub fn total_dl_power(&self) -> f64 {
        self.p_un() + self.p_mu()
    }

    pub fn check_shape(&self, config: &SystemConfig) -> Result<()> {
        let ok = self.p_dl.len() == config.n_unicast
            && self.p_up.len() == config.n_unicast
            && self.q_dl.len() == config.n_groups
            && self.q_up.len() == config.n_groups
            && self.q_up.iter().zip(&config.group_sizes).all(|(q, &k)| q.len() == k);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(
                "allocation shape does not match the system config".to_string(),
            ))
        }
    }

    /// Checks the downlink budget only.
    pub fn check_power(&self, config: &SystemConfig) -> Result<()> {
        let total = self.total_dl_power();
        let negative = self
            .p_dl
            .iter()
            .chain(&self.q_dl)
            .any(|v| !(v.is_finite() && *v >= 0.0));
        if negative {
            return Err(Error::config(
                "allocation",
                "downlink powers must be finite and nonnegative",
            ));
        }
        if total > config.total_dl_power * (1.0 + POWER_SLACK) {
            return Err(Error::InfeasiblePower {
                total,
                budget: config.total_dl_power,
            });
        }
        Ok(())
    }

    /// Every constraint of the joint problem: shape, downlink budget, pilot
    /// energy budgets and the pilot-length range.
    pub fn check_feasible(&self, config: &SystemConfig) -> Result<()> {
        self.check_shape(config)?;
        self.check_power(config)?;
        let tau = self.tau as f64;
        if self.tau < config.min_pilot_length() || self.tau > config.coherence_symbols {
            return Err(Error::config(
                "tau",
                format!(
                    "pilot length {} outside {{{}, ..., {}}}",
                    self.tau,
                    config.min_pilot_length(),
                    config.coherence_symbols
                ),
            ));
        }
        for (m, (&p, &e)) in self.p_up.iter().zip(&config.unicast_energy_budgets).enumerate() {
            if !(p >= 0.0) || tau * p > e * (1.0 + POWER_SLACK) {
                return Err(Error::InfeasiblePilot {
                    user: format!("unicast user {m}"),
                    energy: tau * p,
                    budget: e,
                });
            }
        }
        for (g, (qs, es)) in self.q_up.iter().zip(&config.multicast_energy_budgets).enumerate() {
            for (k, (&q, &e)) in qs.iter().zip(es).enumerate() {
                if !(q >= 0.0) || tau * q > e * (1.0 + POWER_SLACK) {
                    return Err(Error::InfeasiblePilot {
                        user: format!("multicast user {k} of group {g}"),
                        energy: tau * q,
                        budget: e,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Per-antenna variances of the MMSE channel estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationStats {
    /// Unicast estimate variance per user.
    pub vartheta: Vec<f64>,
    /// Per-user multicast estimate variance.
    pub xi: Vec<Vec<f64>>,
    /// Composite-channel estimate variance per group.
    pub gamma: Vec<f64>,
}

impl EstimationStats {
    pub fn from_allocation(alloc: &PowerAllocation, profile: &LargeScaleProfile) -> Self {
        let tau = alloc.tau as f64;
        let vartheta = alloc
            .p_up
            .iter()
            .zip(&profile.beta)
            .map(|(&p, &b)| estimation_variance_unicast(tau, p, b))
            .collect();
        let (xi, gamma) = alloc
            .q_up
            .iter()
            .zip(&profile.eta)
            .map(|(q, eta)| estimation_variance_multicast(tau, q, eta))
            .unzip();
        EstimationStats { vartheta, xi, gamma }
    }
}

/// `vartheta = tau p beta^2 / (1 + tau p beta)`.
pub fn estimation_variance_unicast(tau: f64, p_up: f64, beta: f64) -> f64 {
    let snr = tau * p_up * beta;
    snr * beta / (1.0 + snr)
}

/// Returns the per-member variances `xi_gk` and the composite variance
/// `gamma_g` for one group.
pub fn estimation_variance_multicast(tau: f64, q_up: &[f64], eta: &[f64]) -> (Vec<f64>, f64) {
    let received = pilot_snr_sum(tau, q_up, eta);
    let xi = q_up
        .iter()
        .zip(eta)
        .map(|(&q, &e)| tau * q * e * e / (1.0 + received))
        .collect();
    (xi, received * received / (1.0 + received))
}

/// `sum_t tau q_t eta_t`, the received pilot SNR of a group's shared pilot.
pub fn pilot_snr_sum(tau: f64, q_up: &[f64], eta: &[f64]) -> f64 {
    q_up.iter().zip(eta).map(|(&q, &e)| tau * q * e).sum()
}

/// Scalars `c_gk` with `g_hat_gk = c_gk * g_hat_g`. Zero when the group
/// sends no pilot energy.
pub fn composite_coefficients(tau: f64, q_up: &[f64], eta: &[f64]) -> Vec<f64> {
    let received = pilot_snr_sum(tau, q_up, eta);
    q_up.iter()
        .zip(eta)
        .map(|(&q, &e)| {
            if received > 0.0 {
                (tau * q).sqrt() * e / received
            } else {
                0.0
            }
        })
        .collect()
}

/// SINR and SE of a single user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkQuality {
    pub sinr: f64,
    pub se: f64,
}

/// `SE = (1 - tau/T) log2(1 + SINR)`.
pub fn spectral_efficiency(prelog: f64, sinr: f64) -> f64 {
    prelog * sinr.ln_1p() / std::f64::consts::LN_2
}

/// `SINR_m = N p_m vartheta_m / (1 + beta_m (P_un + P_mu))`.
pub fn sinr_se_unicast(
    config: &SystemConfig,
    stats: &EstimationStats,
    alloc: &PowerAllocation,
    profile: &LargeScaleProfile,
) -> Result<Vec<LinkQuality>> {
    alloc.check_shape(config)?;
    alloc.check_power(config)?;
    let n = config.n_antennas as f64;
    let total = alloc.total_dl_power();
    let prelog = config.prelog(alloc.tau);
    Ok(alloc
        .p_dl
        .iter()
        .zip(&stats.vartheta)
        .zip(&profile.beta)
        .map(|((&p, &v), &b)| {
            let sinr = n * p * v / (1.0 + b * total);
            LinkQuality {
                sinr,
                se: spectral_efficiency(prelog, sinr),
            }
        })
        .collect())
}

/// `SINR_jk = N q_j xi_jk / (1 + eta_jk (P_mu + P_un))`, grouped per multicast group.
pub fn sinr_se_multicast(
    config: &SystemConfig,
    stats: &EstimationStats,
    alloc: &PowerAllocation,
    profile: &LargeScaleProfile,
) -> Result<Vec<Vec<LinkQuality>>> {
    alloc.check_shape(config)?;
    alloc.check_power(config)?;
    let n = config.n_antennas as f64;
    let total = alloc.total_dl_power();
    let prelog = config.prelog(alloc.tau);
    Ok(alloc
        .q_dl
        .iter()
        .zip(&stats.xi)
        .zip(&profile.eta)
        .map(|((&q, xi), eta)| {
            xi.iter()
                .zip(eta)
                .map(|(&x, &e)| {
                    let sinr = n * q * x / (1.0 + e * total);
                    LinkQuality {
                        sinr,
                        se: spectral_efficiency(prelog, sinr),
                    }
                })
                .collect()
        })
        .collect())
}

/// SINRs and SEs of every user for one allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEfficiencies {
    pub se_unicast: Vec<f64>,
    pub se_multicast: Vec<Vec<f64>>,
    pub sinr_unicast: Vec<f64>,
    pub sinr_multicast: Vec<Vec<f64>>,
}

impl SpectralEfficiencies {
    /// Evaluates every user of `alloc`, estimating the statistics from its pilots.
    pub fn evaluate(config: &SystemConfig, alloc: &PowerAllocation, profile: &LargeScaleProfile) -> Result<Self> {
        profile.validate(config)?;
        let stats = EstimationStats::from_allocation(alloc, profile);
        let uni = sinr_se_unicast(config, &stats, alloc, profile)?;
        let multi = sinr_se_multicast(config, &stats, alloc, profile)?;
        Ok(SpectralEfficiencies {
            se_unicast: uni.iter().map(|l| l.se).collect(),
            sinr_unicast: uni.iter().map(|l| l.sinr).collect(),
            se_multicast: multi.iter().map(|g| g.iter().map(|l| l.se).collect()).collect(),
            sinr_multicast: multi.iter().map(|g| g.iter().map(|l| l.sinr).collect()).collect(),
        })
    }

    /// Weighted unicast sum SE.
    pub fn weighted_sum_se(&self, weights: &[f64]) -> f64 {
        self.se_unicast.iter().zip(weights).map(|(s, w)| s * w).sum()
    }

    /// Smallest multicast SE.
    pub fn min_multicast_se(&self) -> f64 {
        self.se_multicast
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setup() -> (SystemConfig, LargeScaleProfile, PowerAllocation) {
        let cfg = SystemConfig::uniform(64, 2, vec![2, 3], 100, 100.0, 50.0);
        let profile = LargeScaleProfile {
            beta: vec![0.5, 0.1],
            eta: vec![vec![0.3, 0.3], vec![0.2, 0.05, 1.0]],
        };
        let tau = 4;
        let alloc = PowerAllocation {
            p_dl: vec![20.0, 30.0],
            q_dl: vec![25.0, 25.0],
            p_up: vec![10.0, 12.5],
            q_up: vec![vec![12.5, 12.5], vec![3.0, 12.5, 1.0]],
            tau,
        };
        (cfg, profile, alloc)
    }

    #[test]
    fn unicast_variance_edge_cases() {
        assert_eq!(estimation_variance_unicast(30.0, 0.0, 0.7), 0.0);
        let beta = 0.7;
        let v = estimation_variance_unicast(30.0, 1.0 / (30.0 * beta), beta);
        assert_relative_eq!(v, beta / 2.0, max_relative = 1e-15);
        let v = estimation_variance_unicast(1.0, 1e3 / beta, beta);
        assert!((beta - v) / beta < 1e-3);
        assert!(v < beta);
    }

    #[test]
    fn multicast_variance_edge_cases() {
        let (xi, gamma) = estimation_variance_multicast(5.0, &[0.0, 0.0], &[0.2, 0.4]);
        assert_eq!(xi, vec![0.0, 0.0]);
        assert_eq!(gamma, 0.0);
        // single-member group reduces to the unicast formula
        let (xi, _) = estimation_variance_multicast(7.0, &[3.0], &[0.25]);
        assert_relative_eq!(xi[0], estimation_variance_unicast(7.0, 3.0, 0.25), max_relative = 1e-15);
    }

    #[test]
    fn zero_power_gives_zero_sinr() {
        let (cfg, profile, mut alloc) = setup();
        alloc.p_dl[0] = 0.0;
        alloc.q_dl[1] = 0.0;
        let se = SpectralEfficiencies::evaluate(&cfg, &alloc, &profile).unwrap();
        assert_eq!(se.sinr_unicast[0], 0.0);
        assert_eq!(se.se_unicast[0], 0.0);
        assert!(se.sinr_multicast[1].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn full_pilot_interval_gives_zero_se() {
        let (mut cfg, profile, mut alloc) = setup();
        cfg.coherence_symbols = 8;
        alloc.tau = 8;
        alloc.p_up = vec![1.0, 1.0];
        alloc.q_up = vec![vec![1.0, 1.0], vec![1.0, 1.0, 1.0]];
        let se = SpectralEfficiencies::evaluate(&cfg, &alloc, &profile).unwrap();
        assert!(se.sinr_unicast.iter().all(|&s| s > 0.0));
        assert!(se
            .se_unicast
            .iter()
            .chain(se.se_multicast.iter().flatten())
            .all(|&s| s == 0.0));
    }

    #[test]
    fn sinr_linear_in_antennas() {
        let (mut cfg, profile, alloc) = setup();
        let a = SpectralEfficiencies::evaluate(&cfg, &alloc, &profile).unwrap();
        cfg.n_antennas *= 2;
        let b = SpectralEfficiencies::evaluate(&cfg, &alloc, &profile).unwrap();
        for (x, y) in a.sinr_unicast.iter().zip(&b.sinr_unicast) {
            assert_relative_eq!(2.0 * x, *y, max_relative = 1e-15);
        }
        for (x, y) in a.sinr_multicast.iter().flatten().zip(b.sinr_multicast.iter().flatten()) {
            assert_relative_eq!(2.0 * x, *y, max_relative = 1e-15);
        }
    }

    #[test]
    fn symmetric_group_members_get_equal_sinr() {
        let (cfg, profile, alloc) = setup();
        let se = SpectralEfficiencies::evaluate(&cfg, &alloc, &profile).unwrap();
        assert_eq!(se.sinr_multicast[0][0], se.sinr_multicast[0][1]);
    }

    #[test]
    fn single_member_group_matches_unicast() {
        let cfg = SystemConfig::uniform(32, 1, vec![1], 50, 10.0, 5.0);
        let profile = LargeScaleProfile {
            beta: vec![0.4],
            eta: vec![vec![0.4]],
        };
        let alloc = PowerAllocation {
            p_dl: vec![3.0],
            q_dl: vec![3.0],
            p_up: vec![2.0],
            q_up: vec![vec![2.0]],
            tau: 2,
        };
        let se = SpectralEfficiencies::evaluate(&cfg, &alloc, &profile).unwrap();
        assert_relative_eq!(se.sinr_unicast[0], se.sinr_multicast[0][0], max_relative = 1e-15);
    }

    #[test]
    fn overspent_budget_is_rejected() {
        let (cfg, profile, mut alloc) = setup();
        alloc.p_dl[0] = 60.0;
        let err = SpectralEfficiencies::evaluate(&cfg, &alloc, &profile).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePower { .. }));
    }

    #[test]
    fn pilot_budget_is_enforced() {
        let (cfg, _, mut alloc) = setup();
        alloc.check_feasible(&cfg).unwrap();
        alloc.q_up[1][2] = 13.0;
        assert!(matches!(alloc.check_feasible(&cfg), Err(Error::InfeasiblePilot { .. })));
    }

    fn group_strategy() -> impl Strategy<Value = (f64, Vec<(f64, f64)>)> {
        (1.0f64..200.0, prop::collection::vec((0.0f64..1e3, 1e-6f64..10.0), 1..8))
    }

    proptest! {
        #[test]
        fn composite_proportionality((tau, members) in group_strategy()) {
            let (q, eta): (Vec<f64>, Vec<f64>) = members.into_iter().unzip();
            let (xi, gamma) = estimation_variance_multicast(tau, &q, &eta);
            let c = composite_coefficients(tau, &q, &eta);
            for (x, ck) in xi.iter().zip(&c) {
                let via_composite = ck * ck * gamma;
                let scale = x.abs().max(f64::MIN_POSITIVE);
                prop_assert!((via_composite - x).abs() / scale < 1e-12 || (*x == 0.0 && via_composite == 0.0));
            }
        }

        #[test]
        fn estimate_variance_below_prior((tau, members) in group_strategy(), p in 0.0f64..1e3, beta in 1e-6f64..10.0) {
            let v = estimation_variance_unicast(tau, p, beta);
            prop_assert!(v >= 0.0 && v < beta);
            let (q, eta): (Vec<f64>, Vec<f64>) = members.into_iter().unzip();
            let (xi, _) = estimation_variance_multicast(tau, &q, &eta);
            for (x, e) in xi.iter().zip(&eta) {
                prop_assert!(*x >= 0.0 && x < e);
            }
        }

        #[test]
        fn sinr_monotone_in_own_and_total_power(own in 0.1f64..40.0, bump in 0.01f64..5.0, other in 0.0f64..40.0) {
            let (cfg, profile, mut alloc) = setup();
            alloc.p_dl = vec![own, 0.0];
            alloc.q_dl = vec![other, 0.0];
            let base = SpectralEfficiencies::evaluate(&cfg, &alloc, &profile).unwrap();
            let mut up = alloc.clone();
            up.p_dl[0] += bump;
            let raised = SpectralEfficiencies::evaluate(&cfg, &up, &profile).unwrap();
            prop_assert!(raised.sinr_unicast[0] > base.sinr_unicast[0]);
            let mut noisy = alloc.clone();
            noisy.q_dl[1] += bump;
            let interfered = SpectralEfficiencies::evaluate(&cfg, &noisy, &profile).unwrap();
            prop_assert!(interfered.sinr_unicast[0] < base.sinr_unicast[0]);
            let se = base.se_unicast[0];
            prop_assert!((se - cfg.prelog(alloc.tau) * (1.0 + base.sinr_unicast[0]).log2()).abs() <= 1e-14 * se.max(1.0));
        }
    }
}
