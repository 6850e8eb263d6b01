use serde::{Deserialize, Serialize};

use super::{check_inputs, check_power_arg};
use crate::closed_form::spectral_efficiency;
use crate::error::Result;
use crate::scenario::{LargeScaleProfile, SystemConfig};

/// Optimal max-min-fair multicast allocation for a given unicast power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmfSolution {
    /// Common SE of every multicast user, bit/s/Hz.
    pub objective: f64,
    /// Common SINR of every multicast user.
    pub common_sinr: f64,
    pub q_dl: Vec<f64>,
    pub q_up: Vec<Vec<f64>>,
    pub tau: usize,
    /// Per-group bottleneck `min_k E_jk eta_jk^2 / (1 + eta_jk P)`.
    pub upsilon: Vec<f64>,
    /// Optimal pilot energies `tau * q_up`.
    pub x_star: Vec<Vec<f64>>,
}

/// Closed-form max-min-fair allocation with `P_mu = P - p_un`.
///
/// Each member's pilot energy is set so that `x_jk eta_jk^2 / (1 + eta_jk P)`
/// equals the group bottleneck `Upsilon_j`; this equalizes the SINRs inside
/// a group, and the downlink powers then equalize them across groups at the
/// common value
/// `Gamma = N P_mu / (P sum_j K_j + sum_j 1/Upsilon_j + sum_jt 1/eta_jt)`.
pub fn solve_mmf(config: &SystemConfig, profile: &LargeScaleProfile, p_un: f64) -> Result<MmfSolution> {
    check_inputs(config, profile)?;
    let p_total = config.total_dl_power;
    check_power_arg("p_un", p_un, p_total)?;
    let p_mu = (p_total - p_un).max(0.0);
    let n = config.n_antennas as f64;
    let tau = config.min_pilot_length();

    let upsilon: Vec<f64> = config
        .multicast_energy_budgets
        .iter()
        .zip(&profile.eta)
        .map(|(budgets, eta)| {
            budgets
                .iter()
                .zip(eta)
                .map(|(&e, &h)| e * h * h / (1.0 + h * p_total))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let x_star: Vec<Vec<f64>> = profile
        .eta
        .iter()
        .zip(&upsilon)
        .zip(&config.multicast_energy_budgets)
        .map(|((eta, &ups), budgets)| {
            eta.iter()
                .zip(budgets)
                // the bottleneck member lands exactly on its budget
                .map(|(&h, &e)| ((1.0 + h * p_total) / (h * h) * ups).min(e))
                .collect()
        })
        .collect();
    let q_up = x_star
        .iter()
        .map(|xs| xs.iter().map(|x| x / tau as f64).collect())
        .collect();

    let total_members = config.total_multicast_users() as f64;
    let inv_upsilon: f64 = upsilon.iter().map(|u| 1.0 / u).sum();
    let inv_eta: f64 = profile.eta.iter().flatten().map(|h| 1.0 / h).sum();
    let common_sinr = n * p_mu / (p_total * total_members + inv_upsilon + inv_eta);

    let q_dl = x_star
        .iter()
        .zip(&profile.eta)
        .zip(&upsilon)
        .map(|((xs, eta), &ups)| {
            let received: f64 = xs.iter().zip(eta).map(|(x, h)| x * h).sum();
            common_sinr / (n * ups) * (1.0 + received)
        })
        .collect();

    Ok(MmfSolution {
        objective: spectral_efficiency(config.prelog(tau), common_sinr),
        common_sinr,
        q_dl,
        q_up,
        tau,
        upsilon,
        x_star,
    })
}
