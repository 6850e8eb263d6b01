//! Drops users in the default cell and prints their path loss and the
//! noise-normalized budgets.

use mimo_pareto::scenario::{
    normalize_units, place_users, LargeScaleProfile, PathLoss, PhysicalUnits, SystemConfig, DEFAULT_CELL_RADIUS_M,
    DEFAULT_EXCLUSION_RADIUS_M,
};

fn main() -> mimo_pareto::Result<()> {
    let budget = normalize_units(&PhysicalUnits {
        bandwidth_hz: 20e6,
        noise_psd_dbm_per_hz: -174.0,
        dl_power_watts: 10.0,
        pilot_energy_joules: 2e-6,
    })?;
    println!(
        "P = {:.4e}, E = {:.4e} (noise units)",
        budget.total_dl_power, budget.energy_budget
    );

    let cfg = SystemConfig::uniform(100, 4, vec![3, 2], 200, budget.total_dl_power, budget.energy_budget);
    let geo = place_users(&cfg, DEFAULT_CELL_RADIUS_M, DEFAULT_EXCLUSION_RADIUS_M, 1)?;
    let profile = LargeScaleProfile::from_geometry(&geo, &PathLoss::default())?;
    for (m, (d, b)) in geo.unicast_distances.iter().zip(&profile.beta).enumerate() {
        println!(
            "unicast {m}: {d:6.1} m  beta = {b:.3e}  beta*P = {:.1} dB",
            10.0 * (b * budget.total_dl_power).log10()
        );
    }
    for (j, (ds, es)) in geo.multicast_distances.iter().zip(&profile.eta).enumerate() {
        for (k, (d, e)) in ds.iter().zip(es).enumerate() {
            println!("group {j} member {k}: {d:6.1} m  eta = {e:.3e}");
        }
    }
    Ok(())
}
