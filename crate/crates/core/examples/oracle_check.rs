//! Compares both closed-form solvers with exhaustive grid search on a few
//! tiny instances.

use mimo_pareto::cli::oracle_compare;

fn main() -> mimo_pareto::Result<()> {
    for seed in 0..5 {
        let (inst, results) = oracle_compare(seed, 200)?;
        println!(
            "seed {seed}: N = {}, U = {}, groups {:?}",
            inst.config.n_antennas, inst.config.n_unicast, inst.config.group_sizes
        );
        for r in &results {
            println!(
                "  {:?}: closed form {:.6}, oracle {:.6}, resolution {:.1e}, {}",
                r.objective,
                r.closed_form,
                r.oracle,
                r.resolution,
                if r.passed { "ok" } else { "BEATEN" }
            );
        }
    }
    Ok(())
}
