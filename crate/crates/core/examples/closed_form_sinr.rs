//! Evaluates the estimation variances, SINRs and SEs of a hand-made
//! allocation.

use mimo_pareto::closed_form::{EstimationStats, PowerAllocation, SpectralEfficiencies};
use mimo_pareto::scenario::{LargeScaleProfile, SystemConfig};

fn main() -> mimo_pareto::Result<()> {
    let cfg = SystemConfig::uniform(64, 2, vec![2], 200, 1e3, 100.0);
    let profile = LargeScaleProfile {
        beta: vec![0.5, 0.05],
        eta: vec![vec![0.2, 0.02]],
    };
    let alloc = PowerAllocation {
        p_dl: vec![300.0, 300.0],
        q_dl: vec![400.0],
        p_up: vec![33.0, 33.0],
        q_up: vec![vec![33.0, 33.0]],
        tau: 3,
    };
    alloc.check_feasible(&cfg)?;

    let stats = EstimationStats::from_allocation(&alloc, &profile);
    println!("vartheta = {:?}", stats.vartheta);
    println!("xi       = {:?}", stats.xi);
    println!("gamma    = {:?}", stats.gamma);

    let se = SpectralEfficiencies::evaluate(&cfg, &alloc, &profile)?;
    for (m, (s, r)) in se.se_unicast.iter().zip(&se.sinr_unicast).enumerate() {
        println!("unicast {m}: SINR {r:.3}, SE {s:.4} bit/s/Hz");
    }
    for (k, (s, r)) in se.se_multicast[0].iter().zip(&se.sinr_multicast[0]).enumerate() {
        println!("multicast member {k}: SINR {r:.3}, SE {s:.4} bit/s/Hz");
    }
    println!(
        "weighted sum SE {:.4}, min multicast SE {:.4}",
        se.weighted_sum_se(&cfg.unicast_weights),
        se.min_multicast_se()
    );
    Ok(())
}
