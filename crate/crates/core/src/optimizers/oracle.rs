//! Exhaustive grid search over the joint problem, for tiny instances only.
//!
//! The oracle knows nothing about the closed-form solvers: it enumerates
//! pilot lengths, pilot energies on a grid over each user's box
//! `[0, E]` and downlink powers on a grid over the power simplex, and
//! scores each candidate with the SINR expressions from
//! [`crate::closed_form`].

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_inputs, check_power_arg};
use crate::closed_form::{
    estimation_variance_multicast, estimation_variance_unicast, PowerAllocation, SpectralEfficiencies,
};
use crate::error::{Error, Result};
use crate::scenario::{LargeScaleProfile, SystemConfig};

/// Pilot energies are tried at `E * i / ORACLE_PILOT_LEVELS`, `i = 0..=levels`.
pub const ORACLE_PILOT_LEVELS: usize = 10;
const MAX_EXTRA_PILOT_SYMBOLS: usize = 4;
const MAX_GRID_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "objective", rename_all = "lowercase")]
pub enum OracleObjective {
    /// Max-min multicast SE with the unicast power fixed at `p_un`.
    Mmf { p_un: f64 },
    /// Weighted unicast sum SE with the multicast power fixed at `p_mu`.
    Wsse { p_mu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub objective: f64,
    pub allocation: PowerAllocation,
    /// Objective change that one downlink grid step can cause; the closed
    /// form may not be beaten by more than this.
    pub resolution: f64,
    pub candidates: u64,
}

fn check_size(config: &SystemConfig, grid_steps: usize) -> Result<()> {
    if config.n_unicast > 3 {
        return Err(Error::InstanceTooLarge(format!("U = {} > 3", config.n_unicast)));
    }
    if config.n_groups > 2 {
        return Err(Error::InstanceTooLarge(format!("G = {} > 2", config.n_groups)));
    }
    if let Some(k) = config.group_sizes.iter().find(|&&k| k > 2) {
        return Err(Error::InstanceTooLarge(format!("group of {k} members > 2")));
    }
    if grid_steps == 0 || grid_steps > MAX_GRID_STEPS {
        return Err(Error::InstanceTooLarge(format!(
            "grid_steps = {grid_steps} outside 1..={MAX_GRID_STEPS}"
        )));
    }
    Ok(())
}

fn pilot_lengths(config: &SystemConfig) -> std::ops::RangeInclusive<usize> {
    let lo = config.min_pilot_length();
    lo..=config.coherence_symbols.min(lo + MAX_EXTRA_PILOT_SYMBOLS)
}

fn best_prelog(config: &SystemConfig) -> (usize, f64) {
    pilot_lengths(config)
        .map(|tau| (tau, config.prelog(tau)))
        .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
}

/// Calls `f` with every composition of `steps` into `parts` nonnegative
/// integers.
fn for_each_composition(parts: usize, steps: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, parts: usize, left: usize, f: &mut impl FnMut(&[usize])) {
        if buf.len() + 1 == parts {
            buf.push(left);
            f(buf);
            buf.pop();
            return;
        }
        for i in 0..=left {
            buf.push(i);
            rec(buf, parts, left - i, f);
            buf.pop();
        }
    }
    if parts == 0 {
        return;
    }
    rec(&mut Vec::with_capacity(parts), parts, steps, f);
}

/// Calls `f` with every combination of pilot-level indices for `users` users.
fn for_each_level_combo(users: usize, f: &mut impl FnMut(&[usize])) {
    let mut idx = vec![0usize; users];
    loop {
        f(&idx);
        let mut pos = 0;
        loop {
            if pos == users {
                return;
            }
            idx[pos] += 1;
            if idx[pos] <= ORACLE_PILOT_LEVELS {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn level(budget: f64, i: usize) -> f64 {
    if i == ORACLE_PILOT_LEVELS {
        budget
    } else {
        budget * i as f64 / ORACLE_PILOT_LEVELS as f64
    }
}

/// Best feasible objective found by exhaustive grid search.
pub fn brute_force_oracle(
    config: &SystemConfig,
    profile: &LargeScaleProfile,
    objective: OracleObjective,
    grid_steps: usize,
) -> Result<OracleResult> {
    check_inputs(config, profile)?;
    check_size(config, grid_steps)?;
    match objective {
        OracleObjective::Mmf { p_un } => mmf_search(config, profile, p_un, grid_steps),
        OracleObjective::Wsse { p_mu } => wsse_search(config, profile, p_mu, grid_steps),
    }
}

fn mmf_search(config: &SystemConfig, profile: &LargeScaleProfile, p_un: f64, steps: usize) -> Result<OracleResult> {
    let p_total = config.total_dl_power;
    check_power_arg("p_un", p_un, p_total)?;
    let budget = (p_total - p_un).max(0.0);
    let n = config.n_antennas as f64;
    let flat_budgets: Vec<f64> = config.multicast_energy_budgets.iter().flatten().copied().collect();

    let mut best_min_sinr = -1.0;
    let mut best_levels = vec![0usize; flat_budgets.len()];
    let mut best_split = vec![0usize; config.n_groups];
    let mut candidates = 0u64;
    let mut energies = config.multicast_energy_budgets.clone();
    for_each_level_combo(flat_budgets.len(), &mut |levels| {
        let mut it = levels.iter();
        for (g, budgets) in config.multicast_energy_budgets.iter().enumerate() {
            for (k, &e) in budgets.iter().enumerate() {
                energies[g][k] = level(e, *it.next().unwrap());
            }
        }
        // per-group min over members of N xi / (1 + eta P_total); the
        // downlink split below always spends p_un + budget
        let gains: Vec<f64> = energies
            .iter()
            .zip(&profile.eta)
            .map(|(x, eta)| {
                let (xi, _) = estimation_variance_multicast(1.0, x, eta);
                xi.iter()
                    .zip(eta)
                    .map(|(v, h)| n * v / (1.0 + h * (p_un + budget)))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        for_each_composition(config.n_groups, steps, &mut |split| {
            candidates += 1;
            let min_sinr = split
                .iter()
                .zip(&gains)
                .map(|(&s, c)| c * budget * s as f64 / steps as f64)
                .fold(f64::INFINITY, f64::min);
            if min_sinr > best_min_sinr {
                best_min_sinr = min_sinr;
                best_levels.copy_from_slice(levels);
                best_split.copy_from_slice(split);
            }
        });
    });

    let (tau, _) = best_prelog(config);
    let mut alloc = PowerAllocation::zeros(config);
    alloc.tau = tau;
    alloc.p_dl = vec![p_un / config.n_unicast as f64; config.n_unicast];
    alloc.p_up = config.unicast_energy_budgets.iter().map(|e| e / tau as f64).collect();
    alloc.q_dl = best_split.iter().map(|&s| budget * s as f64 / steps as f64).collect();
    let mut it = best_levels.iter();
    for (g, budgets) in config.multicast_energy_budgets.iter().enumerate() {
        for (k, &e) in budgets.iter().enumerate() {
            alloc.q_up[g][k] = level(e, *it.next().unwrap()) / tau as f64;
        }
    }
    let se = SpectralEfficiencies::evaluate(config, &alloc, profile)?;

    let max_gain = profile
        .eta
        .iter()
        .zip(&config.multicast_energy_budgets)
        .flat_map(|(eta, es)| eta.iter().zip(es))
        .map(|(&h, &e)| n * estimation_variance_unicast(1.0, e, h) / (1.0 + h * p_total))
        .fold(0.0, f64::max);
    Ok(OracleResult {
        objective: se.min_multicast_se(),
        allocation: alloc,
        resolution: config.prelog(tau) * max_gain * budget / steps as f64 / LN_2,
        candidates: candidates * pilot_lengths(config).count() as u64,
    })
}

fn wsse_search(config: &SystemConfig, profile: &LargeScaleProfile, p_mu: f64, steps: usize) -> Result<OracleResult> {
    let p_total = config.total_dl_power;
    check_power_arg("p_mu", p_mu, p_total)?;
    let budget = (p_total - p_mu).max(0.0);
    let n = config.n_antennas as f64;
    let step = budget / steps as f64;
    let total = p_mu + budget;

    // Best (utility, pilot level) per user and downlink grid index.
    let mut table = vec![vec![(0.0f64, 0usize); steps + 1]; config.n_unicast];
    for (m, row) in table.iter_mut().enumerate() {
        let (a, b, e) = (
            config.unicast_weights[m],
            profile.beta[m],
            config.unicast_energy_budgets[m],
        );
        for (i, cell) in row.iter_mut().enumerate() {
            for l in 0..=ORACLE_PILOT_LEVELS {
                let v = estimation_variance_unicast(1.0, level(e, l), b);
                let u = a * (n * step * i as f64 * v / (1.0 + b * total)).ln_1p();
                if u > cell.0 {
                    *cell = (u, l);
                }
            }
        }
    }
    let mut best = -1.0;
    let mut best_split = vec![0usize; config.n_unicast];
    let mut candidates = 0u64;
    for_each_composition(config.n_unicast, steps, &mut |split| {
        candidates += 1;
        let u: f64 = split.iter().enumerate().map(|(m, &i)| table[m][i].0).sum();
        if u > best {
            best = u;
            best_split.copy_from_slice(split);
        }
    });

    let (tau, prelog) = best_prelog(config);
    let mut alloc = PowerAllocation::zeros(config);
    alloc.tau = tau;
    alloc.p_dl = best_split.iter().map(|&i| step * i as f64).collect();
    alloc.p_up = best_split
        .iter()
        .enumerate()
        .map(|(m, &i)| level(config.unicast_energy_budgets[m], table[m][i].1) / tau as f64)
        .collect();
    alloc.q_dl = vec![p_mu / config.n_groups as f64; config.n_groups];
    alloc.q_up = config
        .multicast_energy_budgets
        .iter()
        .map(|es| es.iter().map(|e| e / tau as f64).collect())
        .collect();
    let se = SpectralEfficiencies::evaluate(config, &alloc, profile)?;

    let max_slope = (0..config.n_unicast)
        .map(|m| {
            let b = profile.beta[m];
            let v = estimation_variance_unicast(1.0, config.unicast_energy_budgets[m], b);
            config.unicast_weights[m] * n * v / (1.0 + b * total)
        })
        .fold(0.0, f64::max);
    Ok(OracleResult {
        objective: se.weighted_sum_se(&config.unicast_weights),
        allocation: alloc,
        resolution: prelog * config.n_unicast as f64 * max_slope * step / LN_2,
        candidates: candidates * pilot_lengths(config).count() as u64 * (ORACLE_PILOT_LEVELS as u64 + 1),
    })
}

/// Best max-min multicast SE over the downlink simplex for fixed pilot
/// energies `tau * q_up` and `tau = U + G`.
pub fn mmf_downlink_oracle(
    config: &SystemConfig,
    profile: &LargeScaleProfile,
    p_un: f64,
    pilot_energies: &[Vec<f64>],
    grid_steps: usize,
) -> Result<f64> {
    check_inputs(config, profile)?;
    check_size(config, grid_steps)?;
    check_power_arg("p_un", p_un, config.total_dl_power)?;
    let tau = config.min_pilot_length();
    let budget = (config.total_dl_power - p_un).max(0.0);
    let mut alloc = PowerAllocation::zeros(config);
    alloc.p_dl = vec![p_un / config.n_unicast as f64; config.n_unicast];
    alloc.q_up = pilot_energies
        .iter()
        .map(|xs| xs.iter().map(|x| x / tau as f64).collect())
        .collect();
    alloc.check_feasible(config)?;
    let mut best = f64::NEG_INFINITY;
    let mut failure = None;
    for_each_composition(config.n_groups, grid_steps, &mut |split| {
        alloc.q_dl = split.iter().map(|&s| budget * s as f64 / grid_steps as f64).collect();
        match SpectralEfficiencies::evaluate(config, &alloc, profile) {
            Ok(se) => best = best.max(se.min_multicast_se()),
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// A random instance within the oracle's size limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyInstance {
    pub seed: u64,
    pub config: SystemConfig,
    pub profile: LargeScaleProfile,
    /// `P_un / P` at which the instance is solved.
    pub split: f64,
}

/// Deterministic tiny instance: `U <= 3`, `G <= 2`, `K_g <= 2`, gains
/// log-uniform in `[0.01, 1]`, weights in `[0.5, 2]`, budgets of a few tens in noise units.
pub fn tiny_instance(seed: u64) -> TinyInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = rng.gen_range(1..=3);
    let g = rng.gen_range(1..=2);
    let sizes: Vec<usize> = (0..g).map(|_| rng.gen_range(1..=2)).collect();
    let n = rng.gen_range(8..=64);
    let t = rng.gen_range(u + g + 1..=u + g + 40);
    let p = 10f64.powf(rng.gen_range(0.0..2.0));
    let e = 10f64.powf(rng.gen_range(0.0..2.0));
    let mut gain = || 10f64.powf(rng.gen_range(-2.0..0.0));
    let beta = (0..u).map(|_| gain()).collect();
    let eta = sizes.iter().map(|&k| (0..k).map(|_| gain()).collect()).collect();
    let weights = (0..u).map(|_| rng.gen_range(0.5..2.0)).collect();
    let split = rng.gen_range(0.05..0.95);
    let mut config = SystemConfig::uniform(n, u, sizes, t, p, e);
    config.unicast_weights = weights;
    TinyInstance {
        seed,
        config,
        profile: LargeScaleProfile { beta, eta },
        split,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{solve_mmf, solve_wsse};

    #[test]
    fn compositions_enumerate_simplex() {
        let mut count = 0;
        for_each_composition(3, 4, &mut |s| {
            assert_eq!(s.iter().sum::<usize>(), 4);
            count += 1;
        });
        assert_eq!(count, 15);
        let mut count = 0;
        for_each_level_combo(2, &mut |_| count += 1);
        assert_eq!(count, 121);
    }

    #[test]
    fn single_member_group_matches_closed_form() {
        let cfg = SystemConfig::uniform(32, 1, vec![1], 40, 10.0, 20.0);
        let profile = LargeScaleProfile {
            beta: vec![0.3],
            eta: vec![vec![1.0]],
        };
        let closed = solve_mmf(&cfg, &profile, 2.0).unwrap();
        let oracle = brute_force_oracle(&cfg, &profile, OracleObjective::Mmf { p_un: 2.0 }, 100).unwrap();
        assert!(oracle.objective <= closed.objective + oracle.resolution);
        assert!(closed.objective - oracle.objective < oracle.resolution);
    }

    #[test]
    fn symmetric_unicast_split_is_even() {
        let cfg = SystemConfig::uniform(32, 2, vec![1], 40, 10.0, 20.0);
        let profile = LargeScaleProfile {
            beta: vec![0.3, 0.3],
            eta: vec![vec![0.1]],
        };
        let steps = 200;
        let oracle = brute_force_oracle(&cfg, &profile, OracleObjective::Wsse { p_mu: 4.0 }, steps).unwrap();
        let step = 6.0 / steps as f64;
        assert!((oracle.allocation.p_dl[0] - 3.0).abs() <= step + 1e-12);
        let closed = solve_wsse(&cfg, &profile, 4.0).unwrap();
        assert!(oracle.objective <= closed.objective + oracle.resolution);
    }

    #[test]
    fn oracle_prefers_shortest_pilot() {
        let cfg = SystemConfig::uniform(16, 2, vec![2], 20, 5.0, 5.0);
        let profile = LargeScaleProfile {
            beta: vec![0.3, 0.1],
            eta: vec![vec![0.2, 0.5]],
        };
        let r = brute_force_oracle(&cfg, &profile, OracleObjective::Mmf { p_un: 1.0 }, 50).unwrap();
        assert_eq!(r.allocation.tau, 3);
        r.allocation.check_feasible(&cfg).unwrap();
    }

    #[test]
    fn tiny_instances_are_valid_and_reproducible() {
        for seed in 0..50 {
            let inst = tiny_instance(seed);
            inst.config.validate().unwrap();
            inst.profile.validate(&inst.config).unwrap();
            check_size(&inst.config, MAX_GRID_STEPS).unwrap();
            assert_eq!(inst, tiny_instance(seed));
        }
    }

    #[test]
    fn rejects_large_instances() {
        let cfg = SystemConfig::uniform(16, 4, vec![1], 20, 5.0, 5.0);
        let profile = LargeScaleProfile {
            beta: vec![0.1; 4],
            eta: vec![vec![0.1]],
        };
        let err = brute_force_oracle(&cfg, &profile, OracleObjective::Wsse { p_mu: 0.0 }, 10).unwrap_err();
        assert!(matches!(err, Error::InstanceTooLarge(_)));
        let cfg = SystemConfig::uniform(16, 1, vec![3], 20, 5.0, 5.0);
        let profile = LargeScaleProfile {
            beta: vec![0.1],
            eta: vec![vec![0.1; 3]],
        };
        assert!(brute_force_oracle(&cfg, &profile, OracleObjective::Mmf { p_un: 0.0 }, 10).is_err());
        let cfg = SystemConfig::uniform(16, 1, vec![1], 20, 5.0, 5.0);
        let profile = LargeScaleProfile {
            beta: vec![0.1],
            eta: vec![vec![0.1]],
        };
        assert!(brute_force_oracle(&cfg, &profile, OracleObjective::Mmf { p_un: 0.0 }, 1001).is_err());
    }
}
