//! Command-line orchestration: config loading, the five commands and their
//! output files.
//!
//! | command        | files                                                    |
//! |----------------|----------------------------------------------------------|
//! | `pareto`       | `pareto.csv`, `pareto_convexity.json`, `pareto_plot.tsv` |
//! | `mmf`          | `mmf.json`                                               |
//! | `wsse`         | `wsse.json`                                              |
//! | `validate`     | `validate.json`                                          |
//! | `oracle-check` | `oracle_check.json`                                      |
//!
//! JSON reports are pretty-printed and carry a `provenance` object holding the
//! resolved config (minus the `output` block), the seed and the
//! normalization constants. Nothing time- or host-dependent is written, so
//! identical inputs give byte-identical files.

pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::closed_form::POWER_SLACK;
use crate::error::{Error, Result};
use crate::montecarlo::{empirical_sinr, estimation_check, Check, Thresholds};
use crate::optimizers::{
    brute_force_oracle, check_convexity, pareto_point, pareto_sweep, solve_mmf, solve_wsse, tiny_instance,
    ConvexityReport, OracleObjective, CONVEXITY_TOLERANCE,
};
use config::{ExperimentConfig, Quantity, ResolvedScenario};
use output::{emit_plotdata, pareto_csv, Sweep};

/// Downlink grid steps of the oracle suite, i.e. resolution `P / 1000`.
pub const ORACLE_GRID_STEPS: usize = 1000;
/// Instances in the embedded oracle suite.
pub const ORACLE_SUITE_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Pareto,
    Mmf,
    Wsse,
    Validate,
    OracleCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pareto => "pareto",
            Command::Mmf => "mmf",
            Command::Wsse => "wsse",
            Command::Validate => "validate",
            Command::OracleCheck => "oracle-check",
        }
    }
}

/// Command-line overrides, applied on top of the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Unicast power: a bare number is noise-normalized, otherwise a unit
    /// string such as `"4 W"`.
    pub p_un: Option<String>,
    pub p_mu: Option<String>,
    /// Antenna count of the scenario, the Monte Carlo scenario and the sweep.
    pub n_antennas: Option<usize>,
    pub points: Option<usize>,
    /// Monte Carlo seed, oracle-suite seed and, for seeded drops, the
    /// geometry seed.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(n) = self.n_antennas {
            cfg.scenario.n_antennas = n;
            cfg.sweep.antennas = vec![n];
            if let Some(s) = cfg.montecarlo.scenario.as_mut() {
                s.n_antennas = n;
            }
        }
        if let Some(points) = self.points {
            cfg.sweep.n_points = points;
        }
        if let Some(seed) = self.seed {
            cfg.montecarlo.seed = seed;
            for s in std::iter::once(&mut cfg.scenario).chain(cfg.montecarlo.scenario.as_deref_mut()) {
                if s.geometry.seed.is_some() {
                    s.geometry.seed = Some(seed);
                }
            }
        }
        if let Some(out) = &self.out {
            cfg.output.directory = out.to_string_lossy().into_owned();
        }
        cfg.validate()
    }
}

/// Reads and validates a config; the embedded default when `path` is `None`.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_json(&fs::read_to_string(p)?),
        None => Ok(ExperimentConfig::embedded_default()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub command: &'static str,
    pub files: Vec<PathBuf>,
    /// False when a check of `pareto`, `validate` or `oracle-check` failed.
    pub passed: bool,
    pub headline: String,
}

/// Applies `overrides`, runs `command` and writes its files.
pub fn run(command: Command, config: &ExperimentConfig, overrides: &Overrides) -> Result<RunSummary> {
    let mut cfg = config.clone();
    overrides.apply(&mut cfg)?;
    let out = PathBuf::from(&cfg.output.directory);
    let (passed, headline, files) = match command {
        Command::Pareto => run_pareto(&cfg)?,
        Command::Mmf => run_mmf(&cfg, overrides)?,
        Command::Wsse => run_wsse(&cfg, overrides)?,
        Command::Validate => run_validate(&cfg, overrides)?,
        Command::OracleCheck => run_oracle_check(&cfg)?,
    };
    fs::create_dir_all(&out)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = out.join(name);
        fs::write(&path, contents)?;
        written.push(path);
    }
    Ok(RunSummary {
        command: command.name(),
        files: written,
        passed,
        headline,
    })
}

type Outcome = (bool, String, Vec<(&'static str, String)>);

/// Config with the `output` block removed, so the output location does not
/// change file contents.
fn provenance(cfg: &ExperimentConfig, scenario: &ResolvedScenario) -> Value {
    let mut config = serde_json::to_value(cfg).expect("config serializes");
    if let Value::Object(map) = &mut config {
        map.remove("output");
    }
    json!({
        "generator": "mimo-pareto",
        "config": config,
        "seed": cfg.montecarlo.seed,
        "normalization": scenario.normalization,
    })
}

fn provenance_text(prov: &Value) -> String {
    ["config", "seed", "normalization"]
        .iter()
        .map(|k| format!("{k}: {}", prov[k]))
        .collect::<Vec<_>>()
        .join("\n")
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Pointwise antenna monotonicity over sweeps of equal length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntennaMonotonicity {
    pub passed: bool,
    /// Largest decrease of either objective when going to more antennas at
    /// the same power split, relative to the objective's scale.
    pub max_relative_decrease: f64,
}

pub fn antenna_monotonicity(sweeps: &[Sweep]) -> AntennaMonotonicity {
    let mut sorted: Vec<&Sweep> = sweeps.iter().collect();
    sorted.sort_by_key(|s| s.n_antennas);
    let mut worst = 0.0f64;
    for pair in sorted.windows(2) {
        for (a, b) in pair[0].points.iter().zip(&pair[1].points) {
            for (x, y) in [(a.o_mu, b.o_mu), (a.o_un, b.o_un)] {
                if y < x {
                    worst = worst.max((x - y) / x.abs().max(f64::MIN_POSITIVE));
                }
            }
        }
    }
    AntennaMonotonicity {
        passed: worst == 0.0,
        max_relative_decrease: worst,
    }
}

/// Boundary sweeps for every antenna count of the config.
pub fn sweeps(cfg: &ExperimentConfig) -> Result<Vec<Sweep>> {
    let scenario = cfg.scenario.resolve("scenario")?;
    cfg.sweep
        .antennas
        .iter()
        .map(|&n| {
            let mut system = scenario.system.clone();
            system.n_antennas = n;
            Ok(Sweep {
                n_antennas: n,
                total_dl_power: system.total_dl_power,
                points: pareto_sweep(&system, &scenario.profile, cfg.sweep.n_points)?,
            })
        })
        .collect()
}

fn run_pareto(cfg: &ExperimentConfig) -> Result<Outcome> {
    let scenario = cfg.scenario.resolve("scenario")?;
    let prov = provenance(cfg, &scenario);
    let text = provenance_text(&prov);
    let sweeps = sweeps(cfg)?;
    let plot = emit_plotdata(&sweeps, &text)?;
    let csv = pareto_csv(&sweeps, &text);

    let reports: Vec<(usize, ConvexityReport)> = sweeps
        .iter()
        .map(|s| Ok((s.n_antennas, check_convexity(&s.points)?)))
        .collect::<Result<_>>()?;
    let monotone = antenna_monotonicity(&sweeps);
    let convex = reports.iter().all(|(_, r)| r.is_consistent);
    let passed = convex && monotone.passed;
    let report = json!({
        "provenance": prov,
        "passed": passed,
        "tolerance": CONVEXITY_TOLERANCE,
        "convexity": reports
            .iter()
            .map(|(n, r)| json!({ "n_antennas": n, "report": r }))
            .collect::<Vec<_>>(),
        "antenna_monotonicity": monotone,
    });
    let headline = format!(
        "{} sweeps x {} points, convexity {}, antenna monotonicity {}",
        sweeps.len(),
        cfg.sweep.n_points,
        if convex { "pass" } else { "FAIL" },
        if monotone.passed { "pass" } else { "FAIL" },
    );
    Ok((
        passed,
        headline,
        vec![
            ("pareto.csv", csv),
            ("pareto_convexity.json", pretty(&report)),
            ("pareto_plot.tsv", plot),
        ],
    ))
}

fn parse_override(scenario: &config::ScenarioBlock, field: &str, text: &str) -> Result<f64> {
    scenario.normalize_power(field, &Quantity::Physical(text.to_string()))
}

/// `(P_un, P_mu)` from the `--p-un` / `--p-mu` overrides. With only one given
/// the other takes the remaining budget.
fn power_split_from(cfg: &ExperimentConfig, overrides: &Overrides, total: f64) -> Result<Option<(f64, f64)>> {
    let p_un = overrides
        .p_un
        .as_deref()
        .map(|t| parse_override(&cfg.scenario, "p_un", t))
        .transpose()?;
    let p_mu = overrides
        .p_mu
        .as_deref()
        .map(|t| parse_override(&cfg.scenario, "p_mu", t))
        .transpose()?;
    let split = match (p_un, p_mu) {
        (None, None) => return Ok(None),
        (Some(u), None) => (u, total - u),
        (None, Some(m)) => (total - m, m),
        (Some(u), Some(m)) => (u, m),
    };
    let requested = split.0.max(0.0) + split.1.max(0.0);
    if split.0 < 0.0 || split.1 < 0.0 || requested > total * (1.0 + POWER_SLACK) {
        return Err(Error::InfeasiblePower {
            total: p_un.unwrap_or(0.0) + p_mu.unwrap_or(0.0),
            budget: total,
        });
    }
    Ok(Some((split.0.min(total), split.1.min(total))))
}

fn required_split(cfg: &ExperimentConfig, overrides: &Overrides, total: f64) -> Result<(f64, f64)> {
    power_split_from(cfg, overrides, total)?
        .ok_or_else(|| Error::config("p_un", "give --p-un or --p-mu to fix the power split"))
}

fn run_mmf(cfg: &ExperimentConfig, overrides: &Overrides) -> Result<Outcome> {
    let scenario = cfg.scenario.resolve("scenario")?;
    let (p_un, p_mu) = required_split(cfg, overrides, scenario.system.total_dl_power)?;
    let solution = solve_mmf(&scenario.system, &scenario.profile, p_un)?;
    let report = json!({
        "provenance": provenance(cfg, &scenario),
        "p_un": p_un,
        "p_mu": p_mu,
        "objective": solution.objective,
        "solution": solution,
    });
    let headline = format!(
        "max-min multicast SE {:.6} bit/s/Hz at P_un = {p_un:e}",
        solution.objective
    );
    Ok((true, headline, vec![("mmf.json", pretty(&report))]))
}

fn run_wsse(cfg: &ExperimentConfig, overrides: &Overrides) -> Result<Outcome> {
    let scenario = cfg.scenario.resolve("scenario")?;
    let (p_un, p_mu) = required_split(cfg, overrides, scenario.system.total_dl_power)?;
    let solution = solve_wsse(&scenario.system, &scenario.profile, p_mu)?;
    let report = json!({
        "provenance": provenance(cfg, &scenario),
        "p_un": p_un,
        "p_mu": p_mu,
        "objective": solution.objective,
        "solution": solution,
    });
    let headline = format!(
        "weighted unicast sum SE {:.6} bit/s/Hz at P_mu = {p_mu:e}",
        solution.objective
    );
    Ok((true, headline, vec![("wsse.json", pretty(&report))]))
}

fn run_validate(cfg: &ExperimentConfig, overrides: &Overrides) -> Result<Outcome> {
    let scenario = cfg.montecarlo_scenario()?;
    let total = scenario.system.total_dl_power;
    let (p_un, p_mu) = power_split_from(cfg, overrides, total)?.unwrap_or((total / 2.0, total / 2.0));
    let point = pareto_point(&scenario.system, &scenario.profile, p_un)?;
    let alloc = point.allocation();
    let seed = cfg.montecarlo.seed;
    let mc = empirical_sinr(
        &scenario.system,
        &scenario.profile,
        &alloc,
        cfg.montecarlo.n_realizations,
        seed,
    )?;
    let est = estimation_check(
        &scenario.system,
        &scenario.profile,
        &alloc,
        cfg.montecarlo.estimation_draws,
        seed,
    )?;
    let thresholds = Thresholds::default();
    let mut checks: Vec<Check> = mc.checks(&thresholds);
    checks.extend(est.checks(&thresholds));
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    let passed = failed.is_empty();
    let report = json!({
        "provenance": provenance(cfg, &scenario),
        "p_un": p_un,
        "p_mu": p_mu,
        "allocation": alloc,
        "thresholds": thresholds,
        "passed": passed,
        "n_checks": checks.len(),
        "failed": failed,
        "checks": checks,
        "montecarlo": mc,
        "estimation": est,
    });
    let headline = format!("{} of {} checks passed", checks.len() - failed.len(), checks.len());
    Ok((passed, headline, vec![("validate.json", pretty(&report))]))
}

/// One closed-form solve compared with the grid search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub objective: OracleObjective,
    pub closed_form: f64,
    pub oracle: f64,
    pub resolution: f64,
    /// `oracle - closed_form`; must not exceed `resolution`.
    pub excess: f64,
    pub passed: bool,
}

/// Solves one tiny instance both ways, for both objectives.
pub fn oracle_compare(
    seed: u64,
    grid_steps: usize,
) -> Result<(crate::optimizers::TinyInstance, [OracleComparison; 2])> {
    let inst = tiny_instance(seed);
    let (cfg, prof) = (&inst.config, &inst.profile);
    let p_un = cfg.total_dl_power * inst.split;
    let p_mu = cfg.total_dl_power - p_un;
    let compare = |objective: OracleObjective, closed_form: f64| -> Result<OracleComparison> {
        let r = brute_force_oracle(cfg, prof, objective, grid_steps)?;
        let excess = r.objective - closed_form;
        Ok(OracleComparison {
            objective,
            closed_form,
            oracle: r.objective,
            resolution: r.resolution,
            excess,
            passed: excess <= r.resolution,
        })
    };
    let mmf = compare(OracleObjective::Mmf { p_un }, solve_mmf(cfg, prof, p_un)?.objective)?;
    let wsse = compare(OracleObjective::Wsse { p_mu }, solve_wsse(cfg, prof, p_mu)?.objective)?;
    Ok((inst, [mmf, wsse]))
}

fn run_oracle_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let scenario = cfg.scenario.resolve("scenario")?;
    let base = cfg.montecarlo.seed;
    let mut cases = Vec::with_capacity(ORACLE_SUITE_SIZE);
    let mut passed = 0;
    for i in 0..ORACLE_SUITE_SIZE as u64 {
        let (inst, results) = oracle_compare(base.wrapping_add(i), ORACLE_GRID_STEPS)?;
        passed += results.iter().filter(|r| r.passed).count();
        cases.push(json!({ "instance": inst, "comparisons": results }));
    }
    let total = 2 * ORACLE_SUITE_SIZE;
    let report = json!({
        "provenance": provenance(cfg, &scenario),
        "grid_steps": ORACLE_GRID_STEPS,
        "passed": passed == total,
        "cases": cases,
    });
    let headline = format!("{passed} of {total} oracle comparisons within grid resolution");
    Ok((passed == total, headline, vec![("oracle_check.json", pretty(&report))]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::embedded_default();
        cfg.scenario = *cfg.montecarlo.scenario.clone().unwrap();
        cfg.sweep.antennas = vec![16, 32];
        cfg.sweep.n_points = 5;
        cfg.montecarlo.n_realizations = 200;
        cfg.montecarlo.estimation_draws = 200;
        cfg
    }

    fn out(dir: &Path) -> Overrides {
        Overrides {
            out: Some(dir.to_path_buf()),
            ..Overrides::default()
        }
    }

    #[test]
    fn split_overrides() {
        let cfg = small_config();
        let total = cfg.scenario.resolve("scenario").unwrap().system.total_dl_power;
        let o = Overrides {
            p_un: Some("0".into()),
            ..Overrides::default()
        };
        assert_eq!(power_split_from(&cfg, &o, total).unwrap(), Some((0.0, total)));
        let o = Overrides {
            p_mu: Some("10 W".into()),
            ..Overrides::default()
        };
        let (u, m) = power_split_from(&cfg, &o, total).unwrap().unwrap();
        assert_eq!((u, m), (0.0, total));
        let o = Overrides {
            p_un: Some("6 W".into()),
            p_mu: Some("6 W".into()),
            ..Overrides::default()
        };
        let err = power_split_from(&cfg, &o, total).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePower { .. }));
        assert!(err.to_string().contains("P_un + P_mu <= P"));
        let o = Overrides {
            p_un: Some("11 W".into()),
            ..Overrides::default()
        };
        assert!(matches!(
            power_split_from(&cfg, &o, total),
            Err(Error::InfeasiblePower { .. })
        ));
    }

    #[test]
    fn mmf_needs_a_split() {
        let dir = tempfile::tempdir().unwrap();
        let err = run(Command::Mmf, &small_config(), &out(dir.path())).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { .. }));
    }

    #[test]
    fn pareto_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = run(Command::Pareto, &small_config(), &out(dir.path())).unwrap();
        assert!(s.passed);
        assert_eq!(s.files.len(), 3);
        let csv = fs::read_to_string(dir.path().join("pareto.csv")).unwrap();
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 10);
        let report: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("pareto_convexity.json")).unwrap()).unwrap();
        assert_eq!(report["provenance"]["config"]["sweep"]["n_points"], 5);
        assert!(report["provenance"]["config"].get("output").is_none());
    }

    #[test]
    fn n_override_reaches_every_scenario() {
        let mut cfg = ExperimentConfig::embedded_default();
        Overrides {
            n_antennas: Some(12),
            seed: Some(9),
            ..Overrides::default()
        }
        .apply(&mut cfg)
        .unwrap();
        assert_eq!(cfg.scenario.n_antennas, 12);
        assert_eq!(cfg.sweep.antennas, vec![12]);
        assert_eq!(cfg.montecarlo.scenario.as_ref().unwrap().n_antennas, 12);
        assert_eq!(cfg.montecarlo.seed, 9);
        assert_eq!(cfg.scenario.geometry.seed, Some(9));
    }

    #[test]
    fn bad_override_is_rejected() {
        let mut cfg = ExperimentConfig::embedded_default();
        let err = Overrides {
            points: Some(2),
            ..Overrides::default()
        }
        .apply(&mut cfg)
        .unwrap_err();
        assert!(err.to_string().contains("sweep.n_points"));
    }
}
