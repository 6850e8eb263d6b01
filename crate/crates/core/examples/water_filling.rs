//! Weighted sum-SE allocation by water-filling; weak users can be left dry.

use mimo_pareto::optimizers::{solve_wsse, water_fill};
use mimo_pareto::scenario::{LargeScaleProfile, SystemConfig};

fn main() -> mimo_pareto::Result<()> {
    let fill = water_fill(&[1.0, 1.0, 1.0], &[1.0, 2.0, 10.0], 4.0)?;
    println!(
        "powers {:?}, nu {:?}, {} iterations",
        fill.powers, fill.nu, fill.iterations
    );

    let mut cfg = SystemConfig::uniform(64, 4, vec![2], 200, 1e3, 100.0);
    cfg.unicast_weights = vec![1.0, 2.0, 1.0, 0.5];
    let profile = LargeScaleProfile {
        beta: vec![0.5, 0.1, 0.01, 0.002],
        eta: vec![vec![0.1, 0.1]],
    };
    let sol = solve_wsse(&cfg, &profile, 400.0)?;
    println!("weighted sum SE {:.4} bit/s/Hz", sol.objective);
    for (m, p) in sol.p_dl.iter().enumerate() {
        println!("user {m}: weight {}, p_dl = {p:.3}", cfg.unicast_weights[m]);
    }
    println!("sum = {:.6} (budget 600)", sol.p_dl.iter().sum::<f64>());
    Ok(())
}
