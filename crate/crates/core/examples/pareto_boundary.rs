//! Pareto boundary of the default scenario for three antenna counts, with the
//! convexity check.

use mimo_pareto::cli::config::ExperimentConfig;
use mimo_pareto::optimizers::{check_convexity, pareto_sweep};

fn main() -> mimo_pareto::Result<()> {
    let cfg = ExperimentConfig::embedded_default();
    let scenario = cfg.scenario.resolve("scenario")?;
    for n in [50, 100, 200] {
        let mut system = scenario.system.clone();
        system.n_antennas = n;
        let points = pareto_sweep(&system, &scenario.profile, 11)?;
        let report = check_convexity(&points)?;
        println!(
            "N = {n}: convex {} (max violation {:.1e})",
            report.is_consistent, report.max_violation
        );
        for p in &points {
            println!(
                "  P_un/P = {:.1}  o_mu = {:.4}  o_un = {:.3}",
                p.p_un / system.total_dl_power,
                p.o_mu,
                p.o_un
            );
        }
    }
    Ok(())
}
