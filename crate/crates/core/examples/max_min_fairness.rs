//! Closed-form max-min-fair multicast allocation: every multicast user ends
//! up with the same SE.

use mimo_pareto::closed_form::{PowerAllocation, SpectralEfficiencies};
use mimo_pareto::optimizers::solve_mmf;
use mimo_pareto::scenario::{LargeScaleProfile, SystemConfig};

fn main() -> mimo_pareto::Result<()> {
    let cfg = SystemConfig::uniform(100, 2, vec![3, 2], 200, 1e3, 50.0);
    let profile = LargeScaleProfile {
        beta: vec![0.3, 0.1],
        eta: vec![vec![0.4, 0.05, 0.1], vec![0.01, 0.2]],
    };
    let p_un = 200.0;
    let sol = solve_mmf(&cfg, &profile, p_un)?;
    println!("common SE {:.6} bit/s/Hz (SINR {:.4})", sol.objective, sol.common_sinr);
    println!("q_dl = {:?}", sol.q_dl);
    println!("pilot energies = {:?}", sol.x_star);

    let mut alloc = PowerAllocation::zeros(&cfg);
    alloc.p_dl = vec![p_un / 2.0; 2];
    alloc.q_dl = sol.q_dl.clone();
    alloc.q_up = sol.q_up.clone();
    alloc.tau = sol.tau;
    let se = SpectralEfficiencies::evaluate(&cfg, &alloc, &profile)?;
    println!("per-user multicast SE = {:?}", se.se_multicast);
    Ok(())
}
