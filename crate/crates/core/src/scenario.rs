//! Cell scenario: system constants, user drops, large-scale fading and unit
//! normalization.
//!
//! Power convention used throughout the crate: a noise-normalized transmit
//! power `q` corresponds to `q * W * sigma2` watts, where `W` is the signal
//! bandwidth and `sigma2` the noise power spectral density. One symbol lasts
//! `1/W` seconds, so a pilot energy budget of `E_bar` joules allows
//! `tau * q <= E_bar / sigma2` over a `tau`-symbol pilot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default path-loss exponent.
pub const DEFAULT_PATHLOSS_EXPONENT: f64 = 3.76;
/// Default attenuation constant `d_bar = 10^(-3.5)` (reference loss at 1 m).
pub const DEFAULT_ATTENUATION: f64 = 3.162_277_660_168_379_5e-4;
pub const DEFAULT_CELL_RADIUS_M: f64 = 500.0;
pub const DEFAULT_EXCLUSION_RADIUS_M: f64 = 35.0;

/// Static parameters of the cell. Powers and energies are noise-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Base-station antennas `N`.
    pub n_antennas: usize,
    /// Unicast users `U`.
    pub n_unicast: usize,
    /// Multicast groups `G`.
    pub n_groups: usize,
    /// Members per group `K_g`.
    pub group_sizes: Vec<usize>,
    /// Coherence interval `T` in symbols.
    pub coherence_symbols: usize,
    /// Total downlink power `P`.
    pub total_dl_power: f64,
    /// Pilot energy budget `E_m` per unicast user.
    pub unicast_energy_budgets: Vec<f64>,
    /// Pilot energy budget `E_jk` per multicast user.
    pub multicast_energy_budgets: Vec<Vec<f64>>,
    /// Sum-SE weights `alpha_m`.
    pub unicast_weights: Vec<f64>,
    /// Pilot length `tau`, `U + G <= tau <= T`.
    pub pilot_length: usize,
}

impl SystemConfig {
    /// Config with equal pilot budgets for every user, unit weights and the
    /// minimum pilot length `U + G`.
    pub fn uniform(
        n_antennas: usize,
        n_unicast: usize,
        group_sizes: Vec<usize>,
        coherence_symbols: usize,
        total_dl_power: f64,
        energy_budget: f64,
    ) -> Self {
        let n_groups = group_sizes.len();
        SystemConfig {
            n_antennas,
            n_unicast,
            n_groups,
            multicast_energy_budgets: group_sizes.iter().map(|&k| vec![energy_budget; k]).collect(),
            group_sizes,
            coherence_symbols,
            total_dl_power,
            unicast_energy_budgets: vec![energy_budget; n_unicast],
            unicast_weights: vec![1.0; n_unicast],
            pilot_length: n_unicast + n_groups,
        }
    }

    /// Smallest feasible pilot length, `U + G`.
    pub fn min_pilot_length(&self) -> usize {
        self.n_unicast + self.n_groups
    }

    pub fn total_multicast_users(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    /// Pre-log factor `1 - tau / T`.
    pub fn prelog(&self, tau: usize) -> f64 {
        1.0 - tau as f64 / self.coherence_symbols as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 {
            return Err(Error::config("n_antennas", "must be a positive integer"));
        }
        if self.n_unicast == 0 {
            return Err(Error::config("n_unicast", "must be a positive integer"));
        }
        if self.n_groups == 0 {
            return Err(Error::config("n_groups", "must be a positive integer"));
        }
        if self.group_sizes.len() != self.n_groups {
            return Err(Error::config(
                "group_sizes",
                format!(
                    "expected {} entries (one per group), got {}",
                    self.n_groups,
                    self.group_sizes.len()
                ),
            ));
        }
        if let Some(g) = self.group_sizes.iter().position(|&k| k == 0) {
            return Err(Error::config(
                format!("group_sizes[{g}]"),
                "every group needs at least one member",
            ));
        }
        if !(self.total_dl_power.is_finite() && self.total_dl_power >= 0.0) {
            return Err(Error::config(
                "total_dl_power",
                format!("must be finite and nonnegative, got {}", self.total_dl_power),
            ));
        }
        check_positive_list("unicast_energy_budgets", &self.unicast_energy_budgets, self.n_unicast)?;
        check_positive_list("unicast_weights", &self.unicast_weights, self.n_unicast)?;
        if self.multicast_energy_budgets.len() != self.n_groups {
            return Err(Error::config(
                "multicast_energy_budgets",
                format!(
                    "expected {} groups, got {}",
                    self.n_groups,
                    self.multicast_energy_budgets.len()
                ),
            ));
        }
        for (g, (budgets, &k)) in self.multicast_energy_budgets.iter().zip(&self.group_sizes).enumerate() {
            check_positive_list(&format!("multicast_energy_budgets[{g}]"), budgets, k)?;
        }
        let min_tau = self.min_pilot_length();
        if min_tau > self.coherence_symbols {
            return Err(Error::config(
                "coherence_symbols",
                format!("T = {} is shorter than U + G = {min_tau}", self.coherence_symbols),
            ));
        }
        if self.pilot_length < min_tau || self.pilot_length > self.coherence_symbols {
            return Err(Error::config(
                "pilot_length",
                format!(
                    "tau = {} must lie in {{U+G, ..., T}} = {{{min_tau}, ..., {}}}",
                    self.pilot_length, self.coherence_symbols
                ),
            ));
        }
        Ok(())
    }
}

fn check_positive_list(field: &str, values: &[f64], expected: usize) -> Result<()> {
    if values.len() != expected {
        return Err(Error::config(
            field,
            format!("expected {expected} entries, got {}", values.len()),
        ));
    }
    if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::config(
            format!("{field}[{i}]"),
            format!("must be finite and strictly positive, got {}", values[i]),
        ));
    }
    Ok(())
}

/// User distances from the base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub unicast_distances: Vec<f64>,
    pub multicast_distances: Vec<Vec<f64>>,
    pub cell_radius: f64,
    pub exclusion_radius: f64,
}

impl CellGeometry {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.exclusion_radius, self.cell_radius);
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::config(
                "exclusion_radius",
                format!("need 0 < exclusion_radius ({lo}) <= cell_radius ({hi})"),
            ));
        }
        let all = self
            .unicast_distances
            .iter()
            .chain(self.multicast_distances.iter().flatten());
        for &d in all {
            if !(d >= lo && d <= hi) {
                return Err(Error::config(
                    "distances",
                    format!("distance {d} m outside the annulus [{lo}, {hi}] m"),
                ));
            }
        }
        Ok(())
    }
}

/// Large-scale fading per user: `beta` for unicast, `eta` per group member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleProfile {
    pub beta: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
}

impl LargeScaleProfile {
    pub fn from_geometry(geometry: &CellGeometry, pathloss: &PathLoss) -> Result<Self> {
        let fade = |d: &f64| large_scale_fading(*d, pathloss.exponent, pathloss.attenuation);
        Ok(LargeScaleProfile {
            beta: geometry.unicast_distances.iter().map(fade).collect::<Result<_>>()?,
            eta: geometry
                .multicast_distances
                .iter()
                .map(|group| group.iter().map(fade).collect::<Result<_>>())
                .collect::<Result<_>>()?,
        })
    }

    /// Checks shape against `config` and that every coefficient is positive
    /// and finite.
    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        if self.beta.len() != config.n_unicast {
            return Err(Error::Dimension(format!(
                "beta has {} entries, config has U = {}",
                self.beta.len(),
                config.n_unicast
            )));
        }
        if self.eta.len() != config.n_groups || self.eta.iter().zip(&config.group_sizes).any(|(e, &k)| e.len() != k) {
            return Err(Error::Dimension("eta shape does not match group_sizes".to_string()));
        }
        let bad = self
            .beta
            .iter()
            .chain(self.eta.iter().flatten())
            .any(|v| !(v.is_finite() && *v > 0.0));
        if bad {
            return Err(Error::config(
                "large_scale_profile",
                "coefficients must be finite and strictly positive",
            ));
        }
        Ok(())
    }
}

/// Distance-based path-loss model `d_bar / x^nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub exponent: f64,
    pub attenuation: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        PathLoss {
            exponent: DEFAULT_PATHLOSS_EXPONENT,
            attenuation: DEFAULT_ATTENUATION,
        }
    }
}

/// Physical link budget. Noise density is in dBm/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalUnits {
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub dl_power_watts: f64,
    pub pilot_energy_joules: f64,
}

impl PhysicalUnits {
    pub fn noise_psd_watts_per_hz(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_per_hz)
    }

    /// Noise power over the full bandwidth, in watts.
    pub fn noise_power_watts(&self) -> f64 {
        self.bandwidth_hz * self.noise_psd_watts_per_hz()
    }
}

/// Noise-normalized counterparts of [`PhysicalUnits`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBudget {
    pub total_dl_power: f64,
    pub energy_budget: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Draws user distances uniformly over the area of the annulus
/// `[exclusion_radius, cell_radius]`.
pub fn place_users(config: &SystemConfig, cell_radius: f64, exclusion_radius: f64, seed: u64) -> Result<CellGeometry> {
    if !(exclusion_radius >= 0.0 && exclusion_radius < cell_radius && cell_radius.is_finite()) {
        return Err(Error::config(
            "exclusion_radius",
            format!("need 0 <= exclusion_radius ({exclusion_radius}) < cell_radius ({cell_radius})"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r0_sq = exclusion_radius * exclusion_radius;
    let span = cell_radius * cell_radius - r0_sq;
    let draw = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.gen();
        (u * span + r0_sq).sqrt().clamp(exclusion_radius, cell_radius)
    };
    let unicast_distances = (0..config.n_unicast).map(|_| draw(&mut rng)).collect();
    let multicast_distances = config
        .group_sizes
        .iter()
        .map(|&k| (0..k).map(|_| draw(&mut rng)).collect())
        .collect();
    Ok(CellGeometry {
        unicast_distances,
        multicast_distances,
        cell_radius,
        exclusion_radius,
    })
}

/// `attenuation / distance^exponent`.
pub fn large_scale_fading(distance: f64, pathloss_exponent: f64, attenuation_const: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(attenuation_const / distance.powf(pathloss_exponent))
}

/// Converts physical powers to noise-normalized ones:
/// `P = P_bar / (W sigma2)` and `E = E_bar / sigma2`.
pub fn normalize_units(phys: &PhysicalUnits) -> Result<NormalizedBudget> {
    let checks = [
        ("bandwidth_hz", phys.bandwidth_hz),
        ("dl_power_watts", phys.dl_power_watts),
        ("pilot_energy_joules", phys.pilot_energy_joules),
    ];
    for (field, v) in checks {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::config(field, format!("must be finite and positive, got {v}")));
        }
    }
    if !phys.noise_psd_dbm_per_hz.is_finite() {
        return Err(Error::config("noise_psd_dbm_per_hz", "must be finite"));
    }
    let psd = phys.noise_psd_watts_per_hz();
    Ok(NormalizedBudget {
        total_dl_power: phys.dl_power_watts / (phys.bandwidth_hz * psd),
        energy_budget: phys.pilot_energy_joules / psd,
    })
}
