//! JSON experiment configuration.
//!
//! Powers and energies are either bare numbers (already noise-normalized) or
//! strings with a physical unit (`"10 W"`, `"40 dBm"`, `"2 uJ"`). Unit-carrying
//! values are normalized with the scenario's bandwidth and noise density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{
    dbm_to_watts, large_scale_fading, normalize_units, place_users, CellGeometry, LargeScaleProfile, NormalizedBudget,
    PathLoss, PhysicalUnits, SystemConfig, DEFAULT_ATTENUATION, DEFAULT_CELL_RADIUS_M, DEFAULT_EXCLUSION_RADIUS_M,
    DEFAULT_PATHLOSS_EXPONENT,
};

/// The configuration used when no `--config` is given.
pub const DEFAULT_CONFIG: &str = include_str!("default_config.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub montecarlo: MonteCarloBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// A power or energy: a bare number is noise-normalized, a string carries a
/// unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Normalized(f64),
    Physical(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    pub n_antennas: usize,
    pub n_unicast: usize,
    pub n_groups: usize,
    pub group_sizes: Vec<usize>,
    pub coherence_symbols: usize,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub total_dl_power: Quantity,
    pub pilot_energy: Quantity,
    #[serde(default)]
    pub unicast_energy_budgets: Option<Vec<Quantity>>,
    #[serde(default)]
    pub multicast_energy_budgets: Option<Vec<Vec<Quantity>>>,
    #[serde(default)]
    pub unicast_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub pilot_length: Option<usize>,
    #[serde(default = "default_exponent")]
    pub pathloss_exponent: f64,
    #[serde(default = "default_attenuation")]
    pub attenuation: f64,
    pub geometry: GeometryBlock,
}

/// Either a seeded random drop or explicit distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_cell_radius")]
    pub cell_radius_m: f64,
    #[serde(default = "default_exclusion_radius")]
    pub exclusion_radius_m: f64,
    #[serde(default)]
    pub unicast_distances_m: Option<Vec<f64>>,
    #[serde(default)]
    pub multicast_distances_m: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default = "default_points")]
    pub n_points: usize,
    #[serde(default = "default_antennas")]
    pub antennas: Vec<usize>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock {
            n_points: default_points(),
            antennas: default_antennas(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloBlock {
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default = "default_estimation_draws")]
    pub estimation_draws: usize,
    #[serde(default)]
    pub seed: u64,
    /// Scenario to simulate; the main scenario when absent.
    #[serde(default)]
    pub scenario: Option<Box<ScenarioBlock>>,
}

impl Default for MonteCarloBlock {
    fn default() -> Self {
        MonteCarloBlock {
            n_realizations: default_realizations(),
            estimation_draws: default_estimation_draws(),
            seed: 0,
            scenario: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: default_directory(),
        }
    }
}

fn default_exponent() -> f64 {
    DEFAULT_PATHLOSS_EXPONENT
}
fn default_attenuation() -> f64 {
    DEFAULT_ATTENUATION
}
fn default_cell_radius() -> f64 {
    DEFAULT_CELL_RADIUS_M
}
fn default_exclusion_radius() -> f64 {
    DEFAULT_EXCLUSION_RADIUS_M
}
fn default_points() -> usize {
    21
}
fn default_antennas() -> Vec<usize> {
    vec![50, 100, 200]
}
fn default_realizations() -> usize {
    20_000
}
fn default_estimation_draws() -> usize {
    10_000
}
fn default_directory() -> String {
    "out".to_string()
}

/// Noise-normalization constants and the values derived from them, echoed in
/// every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub convention: String,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub noise_power_watts: f64,
    pub total_dl_power: f64,
    pub total_dl_power_watts: f64,
    /// Normalized default pilot energy, when given with a unit.
    pub pilot_energy: f64,
}

pub const NORMALIZATION_CONVENTION: &str =
    "power q is normalized as q_watts / (W * sigma2); one symbol lasts 1/W s, so a pilot budget of E_bar joules is E = E_bar / sigma2 and tau * q_up <= E";

/// A scenario block with units, geometry and path loss resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScenario {
    pub system: SystemConfig,
    pub geometry: CellGeometry,
    pub pathloss: PathLoss,
    pub profile: LargeScaleProfile,
    pub normalization: Normalization,
}

fn parse_number(field: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::config(field, format!("cannot parse number from {s:?}")))
}

/// Power in watts from `"<value> <unit>"`; unit one of W, mW, kW, dBm, dBW.
/// `None` for a bare number (already normalized).
pub fn parse_power_watts(field: &str, text: &str) -> Result<Option<f64>> {
    let t = text.trim();
    type Conversion = (&'static str, fn(f64) -> f64);
    let units: [Conversion; 5] = [
        ("dBm", dbm_to_watts),
        ("dBW", |v| 10f64.powf(v / 10.0)),
        ("mW", |v| v * 1e-3),
        ("kW", |v| v * 1e3),
        ("W", |v| v),
    ];
    for (suffix, conv) in units {
        if let Some(num) = t.strip_suffix(suffix) {
            return Ok(Some(conv(parse_number(field, num)?)));
        }
    }
    if t.chars().last().is_some_and(|c| c.is_ascii_alphabetic()) {
        return Err(Error::config(
            field,
            format!("unknown power unit in {t:?} (use W, mW, kW, dBm or dBW)"),
        ));
    }
    parse_number(field, t).map(|_| None)
}

/// Energy in joules from `"<value> <unit>"`; unit one of J, mJ, uJ, μJ, nJ.
pub fn parse_energy_joules(field: &str, text: &str) -> Result<Option<f64>> {
    let t = text.trim();
    let units: [(&str, f64); 5] = [("mJ", 1e-3), ("uJ", 1e-6), ("μJ", 1e-6), ("nJ", 1e-9), ("J", 1.0)];
    for (suffix, scale) in units {
        if let Some(num) = t.strip_suffix(suffix) {
            return Ok(Some(parse_number(field, num)? * scale));
        }
    }
    if t.chars().last().is_some_and(|c| c.is_alphabetic()) {
        return Err(Error::config(
            field,
            format!("unknown energy unit in {t:?} (use J, mJ, uJ or nJ)"),
        ));
    }
    parse_number(field, t).map(|_| None)
}

impl ScenarioBlock {
    fn physical(&self, watts: f64, joules: f64) -> PhysicalUnits {
        PhysicalUnits {
            bandwidth_hz: self.bandwidth_hz,
            noise_psd_dbm_per_hz: self.noise_psd_dbm_per_hz,
            dl_power_watts: watts,
            pilot_energy_joules: joules,
        }
    }

    fn noise_power_watts(&self) -> f64 {
        self.physical(1.0, 1.0).noise_power_watts()
    }

    /// Normalized downlink power from a quantity.
    pub fn normalize_power(&self, field: &str, q: &Quantity) -> Result<f64> {
        let v = match q {
            Quantity::Normalized(v) => *v,
            Quantity::Physical(text) => match parse_power_watts(field, text)? {
                Some(watts) => {
                    normalize_units(&self.physical(watts, 1.0))
                        .map_err(|e| Error::config(field, e.to_string()))?
                        .total_dl_power
                }
                None => parse_number(field, text)?,
            },
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::config(field, format!("must be finite and nonnegative, got {v}")));
        }
        Ok(v)
    }

    /// Normalized pilot energy from a quantity.
    pub fn normalize_energy(&self, field: &str, q: &Quantity) -> Result<f64> {
        let v = match q {
            Quantity::Normalized(v) => *v,
            Quantity::Physical(text) => match parse_energy_joules(field, text)? {
                Some(joules) => {
                    normalize_units(&self.physical(1.0, joules))
                        .map_err(|e| Error::config(field, e.to_string()))?
                        .energy_budget
                }
                None => parse_number(field, text)?,
            },
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::config(field, format!("must be finite and positive, got {v}")));
        }
        Ok(v)
    }

    pub fn resolve(&self, prefix: &str) -> Result<ResolvedScenario> {
        let f = |name: &str| format!("{prefix}.{name}");
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::config(f("bandwidth_hz"), "must be positive"));
        }
        if !self.noise_psd_dbm_per_hz.is_finite() {
            return Err(Error::config(f("noise_psd_dbm_per_hz"), "must be finite"));
        }
        if !(self.pathloss_exponent.is_finite() && self.pathloss_exponent > 0.0) {
            return Err(Error::config(f("pathloss_exponent"), "must be positive"));
        }
        if !(self.attenuation.is_finite() && self.attenuation > 0.0) {
            return Err(Error::config(f("attenuation"), "must be positive"));
        }
        let total_dl_power = self.normalize_power(&f("total_dl_power"), &self.total_dl_power)?;
        let pilot_energy = self.normalize_energy(&f("pilot_energy"), &self.pilot_energy)?;

        let unicast_energy_budgets = match &self.unicast_energy_budgets {
            Some(list) => list
                .iter()
                .enumerate()
                .map(|(i, q)| self.normalize_energy(&f(&format!("unicast_energy_budgets[{i}]")), q))
                .collect::<Result<Vec<_>>>()?,
            None => vec![pilot_energy; self.n_unicast],
        };
        let multicast_energy_budgets = match &self.multicast_energy_budgets {
            Some(groups) => groups
                .iter()
                .enumerate()
                .map(|(g, list)| {
                    list.iter()
                        .enumerate()
                        .map(|(k, q)| self.normalize_energy(&f(&format!("multicast_energy_budgets[{g}][{k}]")), q))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
            None => self.group_sizes.iter().map(|&k| vec![pilot_energy; k]).collect(),
        };

        let system = SystemConfig {
            n_antennas: self.n_antennas,
            n_unicast: self.n_unicast,
            n_groups: self.n_groups,
            group_sizes: self.group_sizes.clone(),
            coherence_symbols: self.coherence_symbols,
            total_dl_power,
            unicast_energy_budgets,
            multicast_energy_budgets,
            unicast_weights: self
                .unicast_weights
                .clone()
                .unwrap_or_else(|| vec![1.0; self.n_unicast]),
            pilot_length: self.pilot_length.unwrap_or(self.n_unicast + self.n_groups),
        };
        system.validate().map_err(|e| prefix_field(e, prefix))?;

        let geometry = self.geometry.resolve(&system, &f("geometry"))?;
        let pathloss = PathLoss {
            exponent: self.pathloss_exponent,
            attenuation: self.attenuation,
        };
        let profile = LargeScaleProfile::from_geometry(&geometry, &pathloss)?;
        profile.validate(&system)?;

        let noise = self.noise_power_watts();
        Ok(ResolvedScenario {
            normalization: Normalization {
                convention: NORMALIZATION_CONVENTION.to_string(),
                bandwidth_hz: self.bandwidth_hz,
                noise_psd_dbm_per_hz: self.noise_psd_dbm_per_hz,
                noise_power_watts: noise,
                total_dl_power,
                total_dl_power_watts: total_dl_power * noise,
                pilot_energy,
            },
            system,
            geometry,
            pathloss,
            profile,
        })
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::InvalidConfig { field, reason } => Error::InvalidConfig {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    }
}

impl GeometryBlock {
    fn resolve(&self, system: &SystemConfig, field: &str) -> Result<CellGeometry> {
        let geometry = match (&self.unicast_distances_m, &self.multicast_distances_m, self.seed) {
            (Some(u), Some(m), None) => {
                if u.len() != system.n_unicast {
                    return Err(Error::config(
                        format!("{field}.unicast_distances_m"),
                        format!("expected {} distances, got {}", system.n_unicast, u.len()),
                    ));
                }
                if m.len() != system.n_groups || m.iter().zip(&system.group_sizes).any(|(g, &k)| g.len() != k) {
                    return Err(Error::config(
                        format!("{field}.multicast_distances_m"),
                        "shape must match group_sizes",
                    ));
                }
                CellGeometry {
                    unicast_distances: u.clone(),
                    multicast_distances: m.clone(),
                    cell_radius: self.cell_radius_m,
                    exclusion_radius: self.exclusion_radius_m,
                }
            }
            (None, None, Some(seed)) => place_users(system, self.cell_radius_m, self.exclusion_radius_m, seed)
                .map_err(|e| prefix_field(e, field))?,
            _ => {
                return Err(Error::config(
                    field,
                    "give either `seed` or both `unicast_distances_m` and `multicast_distances_m`",
                ))
            }
        };
        geometry.validate().map_err(|e| prefix_field(e, field))?;
        for d in geometry
            .unicast_distances
            .iter()
            .chain(geometry.multicast_distances.iter().flatten())
        {
            large_scale_fading(*d, 1.0, 1.0)?;
        }
        Ok(geometry)
    }
}

impl ExperimentConfig {
    /// Parses and validates a config; every type invariant is checked before
    /// anything is computed.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(parse_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn embedded_default() -> Self {
        ExperimentConfig::from_json(DEFAULT_CONFIG).expect("embedded default config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.resolve("scenario")?;
        if let Some(s) = &self.montecarlo.scenario {
            s.resolve("montecarlo.scenario")?;
        }
        if self.sweep.n_points < 3 {
            return Err(Error::config(
                "sweep.n_points",
                "need at least 3 points for the convexity check",
            ));
        }
        if self.sweep.antennas.is_empty() {
            return Err(Error::config("sweep.antennas", "list of antenna counts is empty"));
        }
        if self.sweep.antennas.contains(&0) {
            return Err(Error::config("sweep.antennas", "antenna counts must be positive"));
        }
        if self.montecarlo.n_realizations < crate::montecarlo::MIN_REALIZATIONS {
            return Err(Error::config(
                "montecarlo.n_realizations",
                format!("need at least {}", crate::montecarlo::MIN_REALIZATIONS),
            ));
        }
        if self.montecarlo.estimation_draws < crate::montecarlo::MIN_REALIZATIONS {
            return Err(Error::config(
                "montecarlo.estimation_draws",
                format!("need at least {}", crate::montecarlo::MIN_REALIZATIONS),
            ));
        }
        Ok(())
    }

    /// Scenario used by `validate`.
    pub fn montecarlo_scenario(&self) -> Result<ResolvedScenario> {
        match &self.montecarlo.scenario {
            Some(s) => s.resolve("montecarlo.scenario"),
            None => self.scenario.resolve("scenario"),
        }
    }
}

/// Turns serde's "missing field `x`" / "unknown field `x`" into a field-named
/// config error.
fn parse_error(e: serde_json::Error) -> Error {
    let msg = e.to_string();
    let field = msg
        .split('`')
        .nth(1)
        .filter(|_| msg.contains("missing field") || msg.contains("unknown field"));
    match field {
        Some(f) => Error::config(f, msg.clone()),
        None => Error::Parse(e),
    }
}

/// Default normalized budget of a physical link, for the docs and examples.
pub fn reference_budget() -> NormalizedBudget {
    normalize_units(&PhysicalUnits {
        bandwidth_hz: 20e6,
        noise_psd_dbm_per_hz: -174.0,
        dl_power_watts: 10.0,
        pilot_energy_joules: 2e-6,
    })
    .expect("constants are positive")
}
