use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mimo-pareto"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn default_config() -> Value {
    serde_json::from_str(mimo_pareto::cli::config::DEFAULT_CONFIG).unwrap()
}

#[test]
fn pareto_writes_63_rows_and_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["pareto", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("pareto.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "N,p_un,p_mu,o_mu,o_un");
    assert_eq!(rows.len() - 1, 63);
    let ns: Vec<u32> = rows[1..]
        .iter()
        .map(|r| r.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(ns.windows(2).all(|w| w[0] <= w[1]));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("pareto_convexity.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["convexity"].as_array().unwrap().len(), 3);
    let plot = fs::read_to_string(dir.path().join("pareto_plot.tsv")).unwrap();
    assert_eq!(plot.lines().filter(|l| l.starts_with("series\t100\t")).count(), 21);
}

#[test]
fn mmf_at_zero_unicast_power_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["mmf", "--p-un", "0", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("mmf.json")).unwrap()).unwrap();

    let cfg = mimo_pareto::cli::config::ExperimentConfig::embedded_default();
    let s = cfg.scenario.resolve("scenario").unwrap();
    let (sys, prof) = (&s.system, &s.profile);
    let p = sys.total_dl_power;
    let upsilon: Vec<f64> = prof
        .eta
        .iter()
        .zip(&sys.multicast_energy_budgets)
        .map(|(g, e)| {
            g.iter()
                .zip(e)
                .map(|(h, e)| e * h * h / (1.0 + h * p))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let members: f64 = sys.group_sizes.iter().sum::<usize>() as f64;
    let inv_eta: f64 = prof.eta.iter().flatten().map(|h| 1.0 / h).sum();
    let gamma = sys.n_antennas as f64 * p / (p * members + upsilon.iter().map(|u| 1.0 / u).sum::<f64>() + inv_eta);
    let tau = sys.n_unicast + sys.n_groups;
    let expected = (1.0 - tau as f64 / sys.coherence_symbols as f64) * (1.0 + gamma).log2();

    let got = report["objective"].as_f64().unwrap();
    assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
    assert_eq!(report["p_un"], 0.0);
    assert_eq!(report["p_mu"].as_f64().unwrap(), p);
}

#[test]
fn missing_total_dl_power_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = default_config();
    cfg["scenario"].as_object_mut().unwrap().remove("total_dl_power");
    let path = dir.path().join("cfg.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let o = bin(&[
        "pareto",
        "--config",
        path.to_str().unwrap(),
        "--out",
        &out_arg(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "invalid_config");
    assert_eq!(err["error"]["field"], "total_dl_power");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = default_config();
    cfg["sweep"]["n_point"] = 5.into();
    let path = dir.path().join("cfg.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let o = bin(&[
        "pareto",
        "--config",
        path.to_str().unwrap(),
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["field"], "n_point");
}

#[test]
fn infeasible_split_cites_the_power_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["wsse", "--p-un", "6 W", "--p-mu", "6 W", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "infeasible_power");
    assert!(err["error"]["message"].as_str().unwrap().contains("P_un + P_mu <= P"));
}

#[test]
fn outputs_are_deterministic_and_independent_of_out_dir() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        for cmd in [
            &["pareto"][..],
            &["wsse", "--p-mu", "2 W"],
            &["validate", "--seed", "3"],
        ] {
            let mut args = cmd.to_vec();
            let out = out_arg(dir);
            args.extend(["--out", &out]);
            assert!(bin(&args).status.success());
        }
    }
    for name in [
        "pareto.csv",
        "pareto_convexity.json",
        "pareto_plot.tsv",
        "wsse.json",
        "validate.json",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let v: Value = serde_json::from_str(&fs::read_to_string(a.path().join("validate.json")).unwrap()).unwrap();
    assert_eq!(v["provenance"]["seed"], 3);
    assert_eq!(v["passed"], true);
}
