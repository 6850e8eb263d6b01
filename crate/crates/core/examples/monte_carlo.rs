//! Simulates the small default validation scenario and compares every
//! empirical SINR with its closed form.

use mimo_pareto::cli::config::ExperimentConfig;
use mimo_pareto::montecarlo::{empirical_sinr, estimation_check, Thresholds};
use mimo_pareto::optimizers::pareto_point;

fn main() -> mimo_pareto::Result<()> {
    let cfg = ExperimentConfig::embedded_default();
    let s = cfg.montecarlo_scenario()?;
    let point = pareto_point(&s.system, &s.profile, s.system.total_dl_power / 2.0)?;
    let alloc = point.allocation();

    let report = empirical_sinr(&s.system, &s.profile, &alloc, 5000, 7)?;
    for u in report.users() {
        println!(
            "{:?} {:?}/{}: SINR empirical {:.4} analytic {:.4} ({:+.2}%)",
            u.service,
            u.group,
            u.index,
            u.empirical_sinr,
            u.analytic_sinr,
            100.0 * (u.empirical_sinr / u.analytic_sinr - 1.0)
        );
    }
    let t = Thresholds::default();
    let failed = report.checks(&t).into_iter().filter(|c| !c.passed).count();
    println!("{failed} failed link checks");

    let est = estimation_check(&s.system, &s.profile, &alloc, 2000, 7)?;
    println!(
        "member/composite proportionality error {:.1e}",
        est.max_proportionality_error
    );
    Ok(())
}
