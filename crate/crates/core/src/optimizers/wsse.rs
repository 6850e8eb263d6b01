use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::{check_inputs, check_power_arg};
use crate::closed_form::{estimation_variance_unicast, spectral_efficiency};
use crate::error::{Error, Result};
use crate::scenario::{LargeScaleProfile, SystemConfig};

const MAX_BISECTION_ITERATIONS: usize = 200;
const POWER_SUM_TOLERANCE: f64 = 1e-12;

/// Optimal weighted sum-SE allocation for a given multicast power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsseSolution {
    pub objective: f64,
    pub p_dl: Vec<f64>,
    pub p_up: Vec<f64>,
    pub tau: usize,
    /// Lagrange multiplier of the power constraint. `None` when there is no
    /// unicast power to distribute.
    pub water_level_nu: Option<f64>,
    pub vartheta_star: Vec<f64>,
}

/// Solution of `max sum_m alpha_m ln(1 + p_m / floor_m)` s.t. `sum p = budget`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    pub powers: Vec<f64>,
    /// `nu` such that `p_m = max(0, alpha_m / (nu ln 2) - floor_m)`.
    pub nu: Option<f64>,
    pub iterations: usize,
}

fn power_sum(weights: &[f64], floors: &[f64], nu: f64) -> f64 {
    weights
        .iter()
        .zip(floors)
        .map(|(a, f)| (a / (nu * LN_2) - f).max(0.0))
        .sum()
}

/// Water-filling by bisection on `nu`.
///
/// The bracket starts at the largest marginal utility at full power (power
/// sum >= budget) and the largest marginal at zero power (power sum = 0),
/// widened geometrically if rounding puts either end on the wrong side. Once
/// the power sum is within tolerance the active set is fixed and the level
/// is solved exactly on it.
pub fn water_fill(weights: &[f64], floors: &[f64], budget: f64) -> Result<WaterFill> {
    let n = weights.len();
    if floors.len() != n {
        return Err(Error::Dimension("weights and floors differ in length".to_string()));
    }
    if n == 0 || !(budget > 0.0) {
        return Ok(WaterFill {
            powers: vec![0.0; n],
            nu: None,
            iterations: 0,
        });
    }
    let marginal = |a: f64, f: f64, p: f64| a / (LN_2 * (f + p));
    let mut hi = weights
        .iter()
        .zip(floors)
        .map(|(&a, &f)| marginal(a, f, 0.0))
        .fold(0.0, f64::max);
    let mut lo = weights
        .iter()
        .zip(floors)
        .map(|(&a, &f)| marginal(a, f, budget))
        .fold(0.0, f64::max);
    while power_sum(weights, floors, lo) < budget {
        lo *= 0.5;
    }
    while power_sum(weights, floors, hi) > budget {
        hi *= 2.0;
    }

    let mut nu = lo;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < MAX_BISECTION_ITERATIONS {
        iterations += 1;
        nu = 0.5 * (lo + hi);
        let sum = power_sum(weights, floors, nu);
        residual = (sum - budget).abs() / budget;
        if residual <= POWER_SUM_TOLERANCE {
            break;
        }
        if sum > budget {
            lo = nu;
        } else {
            hi = nu;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }

    // Exact level on the active set found by bisection.
    let active: Vec<bool> = weights.iter().zip(floors).map(|(a, f)| a / (nu * LN_2) > *f).collect();
    let (sum_floor, sum_weight) = active
        .iter()
        .zip(weights.iter().zip(floors))
        .filter(|(on, _)| **on)
        .fold((0.0, 0.0), |(sf, sa), (_, (a, f))| (sf + f, sa + a));
    if sum_weight > 0.0 {
        let level = (budget + sum_floor) / sum_weight;
        let consistent =
            active
                .iter()
                .zip(weights.iter().zip(floors))
                .all(|(on, (a, f))| if *on { a * level > *f } else { a * level <= *f });
        if consistent {
            let powers: Vec<f64> = weights
                .iter()
                .zip(floors)
                .map(|(a, f)| (a * level - f).max(0.0))
                .collect();
            return Ok(WaterFill {
                powers,
                nu: Some(1.0 / (level * LN_2)),
                iterations,
            });
        }
    }
    if residual > POWER_SUM_TOLERANCE {
        return Err(Error::BisectionFailed { iterations, residual });
    }
    Ok(WaterFill {
        powers: weights
            .iter()
            .zip(floors)
            .map(|(a, f)| (a / (nu * LN_2) - f).max(0.0))
            .collect(),
        nu: Some(nu),
        iterations,
    })
}

/// Optimal weighted sum-SE allocation with `P_un = P - p_mu`.
///
/// Every unicast user spends its full pilot budget over the shortest pilot
/// (`tau = U + G`), which fixes `vartheta*_m`; the downlink powers then
/// follow from water-filling over the floors `(1 + beta_m P) / (N vartheta*_m)`.
pub fn solve_wsse(config: &SystemConfig, profile: &LargeScaleProfile, p_mu: f64) -> Result<WsseSolution> {
    check_inputs(config, profile)?;
    let p_total = config.total_dl_power;
    check_power_arg("p_mu", p_mu, p_total)?;
    let budget = (p_total - p_mu).max(0.0);
    let n = config.n_antennas as f64;
    let tau = config.min_pilot_length();

    let p_up: Vec<f64> = config.unicast_energy_budgets.iter().map(|e| e / tau as f64).collect();
    let vartheta_star: Vec<f64> = config
        .unicast_energy_budgets
        .iter()
        .zip(&profile.beta)
        .map(|(&e, &b)| estimation_variance_unicast(1.0, e, b))
        .collect();
    let floors: Vec<f64> = profile
        .beta
        .iter()
        .zip(&vartheta_star)
        .map(|(b, v)| (1.0 + b * p_total) / (n * v))
        .collect();

    let fill = water_fill(&config.unicast_weights, &floors, budget)?;
    let prelog = config.prelog(tau);
    let objective = config
        .unicast_weights
        .iter()
        .zip(fill.powers.iter().zip(&floors))
        .map(|(a, (p, f))| a * spectral_efficiency(prelog, p / f))
        .sum();

    Ok(WsseSolution {
        objective,
        p_dl: fill.powers,
        p_up,
        tau,
        water_level_nu: fill.nu,
        vartheta_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{PowerAllocation, SpectralEfficiencies};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scenario() -> (SystemConfig, LargeScaleProfile) {
        let mut cfg = SystemConfig::uniform(64, 4, vec![2], 100, 100.0, 30.0);
        cfg.unicast_weights = vec![1.0, 2.0, 0.5, 1.0];
        let profile = LargeScaleProfile {
            beta: vec![0.5, 0.01, 0.2, 0.003],
            eta: vec![vec![0.1, 0.1]],
        };
        (cfg, profile)
    }

    fn marginal(sol: &WsseSolution, cfg: &SystemConfig, profile: &LargeScaleProfile, m: usize) -> f64 {
        let n = cfg.n_antennas as f64;
        let v = sol.vartheta_star[m];
        cfg.unicast_weights[m] * n * v / (LN_2 * (1.0 + profile.beta[m] * cfg.total_dl_power + n * v * sol.p_dl[m]))
    }

    #[test]
    fn single_user_takes_everything() {
        let cfg = SystemConfig::uniform(16, 1, vec![1], 50, 7.0, 3.0);
        let profile = LargeScaleProfile {
            beta: vec![0.1],
            eta: vec![vec![0.1]],
        };
        let sol = solve_wsse(&cfg, &profile, 0.0).unwrap();
        assert_relative_eq!(sol.p_dl[0], 7.0, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_users_split_evenly() {
        let cfg = SystemConfig::uniform(16, 2, vec![1], 50, 7.0, 3.0);
        let profile = LargeScaleProfile {
            beta: vec![0.1, 0.1],
            eta: vec![vec![0.1]],
        };
        let sol = solve_wsse(&cfg, &profile, 1.0).unwrap();
        assert_relative_eq!(sol.p_dl[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(sol.p_dl[1], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn full_multicast_power_leaves_nothing() {
        let (cfg, profile) = scenario();
        let sol = solve_wsse(&cfg, &profile, cfg.total_dl_power).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert!(sol.p_dl.iter().all(|&p| p == 0.0));
        assert_eq!(sol.water_level_nu, None);
    }

    #[test]
    fn kkt_conditions_hold() {
        let (cfg, profile) = scenario();
        for p_mu in [0.0, 50.0, 99.0, 99.999] {
            let sol = solve_wsse(&cfg, &profile, p_mu).unwrap();
            let nu = sol.water_level_nu.unwrap();
            let mut active = 0;
            for m in 0..cfg.n_unicast {
                let mk = marginal(&sol, &cfg, &profile, m);
                if sol.p_dl[m] > 0.0 {
                    active += 1;
                    assert_relative_eq!(mk, nu, max_relative = 1e-8);
                } else {
                    assert!(mk <= nu * (1.0 + 1e-12));
                }
            }
            assert!(active >= 1);
            let used: f64 = sol.p_dl.iter().sum();
            assert_relative_eq!(used, cfg.total_dl_power - p_mu, max_relative = 1e-10);
        }
    }

    #[test]
    fn weak_users_can_be_switched_off() {
        let (cfg, profile) = scenario();
        let sol = solve_wsse(&cfg, &profile, 99.999).unwrap();
        assert!(sol.p_dl.contains(&0.0), "{:?}", sol.p_dl);
    }

    #[test]
    fn objective_matches_closed_form_chain() {
        let (cfg, profile) = scenario();
        let sol = solve_wsse(&cfg, &profile, 30.0).unwrap();
        let mut alloc = PowerAllocation::zeros(&cfg);
        alloc.p_dl = sol.p_dl.clone();
        alloc.p_up = sol.p_up.clone();
        alloc.q_dl = vec![30.0];
        alloc.check_feasible(&cfg).unwrap();
        let se = SpectralEfficiencies::evaluate(&cfg, &alloc, &profile).unwrap();
        assert_relative_eq!(
            se.weighted_sum_se(&cfg.unicast_weights),
            sol.objective,
            max_relative = 1e-13
        );
    }

    #[test]
    fn zero_budget_config() {
        let (mut cfg, profile) = scenario();
        cfg.total_dl_power = 0.0;
        let sol = solve_wsse(&cfg, &profile, 0.0).unwrap();
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn water_fill_rejects_mismatched_lengths() {
        assert!(water_fill(&[1.0, 2.0], &[1.0], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn power_sum_decreasing_in_level(
            users in prop::collection::vec((0.1f64..5.0, 1e-3f64..10.0), 1..10),
            nu in 0.01f64..10.0,
            step in 1e-3f64..1.0,
        ) {
            let (w, f): (Vec<f64>, Vec<f64>) = users.into_iter().unzip();
            let a = power_sum(&w, &f, nu);
            let b = power_sum(&w, &f, nu * (1.0 + step));
            if a > 0.0 {
                prop_assert!(b < a);
            } else {
                prop_assert_eq!(b, 0.0);
            }
        }

        #[test]
        fn water_fill_meets_budget(
            users in prop::collection::vec((0.1f64..5.0, 1e-6f64..1e3), 1..30),
            budget in 1e-6f64..1e4,
        ) {
            let (w, f): (Vec<f64>, Vec<f64>) = users.into_iter().unzip();
            let fill = water_fill(&w, &f, budget).unwrap();
            let used: f64 = fill.powers.iter().sum();
            prop_assert!((used - budget).abs() <= 1e-10 * budget);
            let nu = fill.nu.unwrap();
            for ((p, a), fl) in fill.powers.iter().zip(&w).zip(&f) {
                let target = (a / (nu * LN_2) - fl).max(0.0);
                prop_assert!((p - target).abs() <= 1e-9 * (a / (nu * LN_2)));
            }
        }
    }
}
