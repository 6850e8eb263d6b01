//! Optimal power allocation for the two competing objectives.
//!
//! - [`solve_mmf`]: max-min-fair multicast SE for a fixed unicast power.
//! - [`solve_wsse`]: weighted unicast sum SE for a fixed multicast power
//!   (water-filling).
//! - [`pareto_sweep`] / [`check_convexity`]: the boundary traced by splitting
//!   the full budget between the two services, and a numerical check that
//!   the attainable region it encloses is convex.
//! - [`brute_force_oracle`]: exhaustive grid search used to cross-check the
//!   closed forms on tiny instances.

mod mmf;
mod oracle;
mod pareto;
mod wsse;

pub use mmf::{solve_mmf, MmfSolution};
pub use oracle::{
    brute_force_oracle, mmf_downlink_oracle, tiny_instance, OracleObjective, OracleResult, TinyInstance,
    ORACLE_PILOT_LEVELS,
};
pub use pareto::{
    check_boundary_convexity, check_convexity, pareto_point, pareto_sweep, power_split, BoundarySample,
    ConvexityReport, ParetoPoint, CONVEXITY_TOLERANCE,
};
pub use wsse::{solve_wsse, water_fill, WaterFill, WsseSolution};

use crate::error::{Error, Result};
use crate::scenario::{LargeScaleProfile, SystemConfig};

fn check_inputs(config: &SystemConfig, profile: &LargeScaleProfile) -> Result<()> {
    config.validate()?;
    profile.validate(config)
}

fn check_power_arg(name: &'static str, value: f64, budget: f64) -> Result<()> {
    if !(value >= 0.0 && value <= budget) {
        return Err(Error::OutOfRange {
            name,
            value,
            min: 0.0,
            max: budget,
        });
    }
    Ok(())
}
