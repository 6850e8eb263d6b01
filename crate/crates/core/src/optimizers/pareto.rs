use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mmf::{solve_mmf, MmfSolution};
use super::wsse::{solve_wsse, WsseSolution};
use crate::closed_form::PowerAllocation;
use crate::error::{Error, Result};
use crate::scenario::{LargeScaleProfile, SystemConfig};

/// Largest tolerated turn/dominance violation for a boundary to count as
/// convex.
pub const CONVEXITY_TOLERANCE: f64 = 1e-9;

/// One point on the Pareto boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub p_un: f64,
    pub p_mu: f64,
    /// Max-min multicast SE.
    pub o_mu: f64,
    /// Weighted unicast sum SE.
    pub o_un: f64,
    pub mmf: MmfSolution,
    pub wsse: WsseSolution,
}

impl ParetoPoint {
    /// Joint allocation realizing both objectives at once.
    pub fn allocation(&self) -> PowerAllocation {
        PowerAllocation {
            p_dl: self.wsse.p_dl.clone(),
            q_dl: self.mmf.q_dl.clone(),
            p_up: self.wsse.p_up.clone(),
            q_up: self.mmf.q_up.clone(),
            tau: self.mmf.tau,
        }
    }

    pub fn sample(&self) -> BoundarySample {
        BoundarySample {
            p_un: self.p_un,
            o_mu: self.o_mu,
            o_un: self.o_un,
        }
    }
}

/// `(P_un, P_mu)` for sweep index `i` of `n_points`; the last index gives
/// exactly `(P, 0)`.
pub fn power_split(total: f64, index: usize, n_points: usize) -> (f64, f64) {
    let last = n_points.saturating_sub(1).max(1);
    let p_un = if index >= last {
        total
    } else {
        total * index as f64 / last as f64
    };
    (p_un, total - p_un)
}

/// Boundary point for the split `P_un = p_un`, `P_mu = P - p_un`.
pub fn pareto_point(config: &SystemConfig, profile: &LargeScaleProfile, p_un: f64) -> Result<ParetoPoint> {
    let p_mu = config.total_dl_power - p_un;
    let mmf = solve_mmf(config, profile, p_un)?;
    let wsse = solve_wsse(config, profile, p_mu.max(0.0))?;
    Ok(ParetoPoint {
        p_un,
        p_mu,
        o_mu: mmf.objective,
        o_un: wsse.objective,
        mmf,
        wsse,
    })
}

/// Sweeps `P_un / P` over `n_points` evenly spaced values in `[0, 1]`.
/// Points are evaluated in parallel and returned in sweep order.
pub fn pareto_sweep(config: &SystemConfig, profile: &LargeScaleProfile, n_points: usize) -> Result<Vec<ParetoPoint>> {
    if n_points < 2 {
        return Err(Error::InvalidPoints(format!(
            "need at least 2 sweep points, got {n_points}"
        )));
    }
    config.validate()?;
    profile.validate(config)?;
    (0..n_points)
        .into_par_iter()
        .map(|i| {
            let (p_un, _) = power_split(config.total_dl_power, i, n_points);
            pareto_point(config, profile, p_un)
        })
        .collect()
}

/// Objective pair of a boundary point, tagged with its unicast power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    pub p_un: f64,
    pub o_mu: f64,
    pub o_un: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub is_consistent: bool,
    pub max_violation: f64,
    /// Worst clockwise turn (sine of the turning angle) between consecutive
    /// boundary segments.
    pub max_turn_violation: f64,
    /// Worst amount by which a pairwise midpoint rises above the piecewise
    /// linear boundary.
    pub max_dominance_violation: f64,
    pub tolerance: f64,
    pub n_points: usize,
}

pub fn check_convexity(points: &[ParetoPoint]) -> Result<ConvexityReport> {
    let samples: Vec<BoundarySample> = points.iter().map(ParetoPoint::sample).collect();
    check_boundary_convexity(&samples)
}

/// Checks that the boundary bounds a convex region.
///
/// Objectives are rescaled by their maxima. Walking the boundary in order of
/// increasing `P_un` (from the multicast-only corner to the unicast-only
/// corner) every turn must be counter-clockwise, i.e. `o_un` is concave in
/// `o_mu`. In addition the midpoint of every pair of samples must lie on or
/// below the piecewise linear boundary.
pub fn check_boundary_convexity(samples: &[BoundarySample]) -> Result<ConvexityReport> {
    if samples.len() < 3 {
        return Err(Error::InvalidPoints(format!(
            "need at least 3 points, got {}",
            samples.len()
        )));
    }
    if samples.windows(2).any(|w| !(w[0].p_un < w[1].p_un)) {
        return Err(Error::InvalidPoints(
            "points must be sorted by strictly increasing p_un".to_string(),
        ));
    }
    let scale = |v: f64| if v > 0.0 { v } else { 1.0 };
    let sx = scale(samples.iter().map(|s| s.o_mu).fold(0.0, f64::max));
    let sy = scale(samples.iter().map(|s| s.o_un).fold(0.0, f64::max));
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.o_mu / sx, s.o_un / sy)).collect();

    let mut max_turn = 0.0f64;
    for w in pts.windows(3) {
        let (d1x, d1y) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        let (d2x, d2y) = (w[2].0 - w[1].0, w[2].1 - w[1].1);
        let norm = d1x.hypot(d1y) * d2x.hypot(d2y);
        if norm == 0.0 {
            continue;
        }
        let cross = d1x * d2y - d1y * d2x;
        max_turn = max_turn.max(-cross / norm);
    }

    let mut by_x = pts.clone();
    by_x.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut max_dom = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let mx = 0.5 * (pts[i].0 + pts[j].0);
            let my = 0.5 * (pts[i].1 + pts[j].1);
            max_dom = max_dom.max(my - interpolate(&by_x, mx));
        }
    }

    let max_violation = max_turn.max(max_dom);
    Ok(ConvexityReport {
        is_consistent: max_violation <= CONVEXITY_TOLERANCE,
        max_violation,
        max_turn_violation: max_turn,
        max_dominance_violation: max_dom,
        tolerance: CONVEXITY_TOLERANCE,
        n_points: samples.len(),
    })
}

/// Highest value of the piecewise linear curve through `by_x` at `x`.
fn interpolate(by_x: &[(f64, f64)], x: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for w in by_x.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x < x0 || x > x1 {
            continue;
        }
        let y = if x1 == x0 {
            y0.max(y1)
        } else {
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        };
        best = best.max(y);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario() -> (SystemConfig, LargeScaleProfile) {
        let cfg = SystemConfig::uniform(100, 3, vec![2, 3], 200, 1e4, 500.0);
        let profile = LargeScaleProfile {
            beta: vec![0.01, 0.002, 0.05],
            eta: vec![vec![0.02, 0.004], vec![0.03, 0.01, 0.001]],
        };
        (cfg, profile)
    }

    #[test]
    fn power_split_hits_endpoints_exactly() {
        assert_eq!(power_split(3.7, 0, 21), (0.0, 3.7));
        assert_eq!(power_split(3.7, 20, 21), (3.7, 0.0));
        let (a, b) = power_split(10.0, 5, 21);
        assert_eq!(a, 2.5);
        assert_eq!(b, 7.5);
    }

    #[test]
    fn sweep_endpoints_and_monotonicity() {
        let (cfg, profile) = scenario();
        let pts = pareto_sweep(&cfg, &profile, 21).unwrap();
        assert_eq!(pts.len(), 21);
        assert_eq!(pts[0].o_un, 0.0);
        assert_eq!(pts[20].o_mu, 0.0);
        for w in pts.windows(2) {
            assert!(w[1].o_mu < w[0].o_mu);
            assert!(w[1].o_un > w[0].o_un);
        }
        for p in &pts {
            assert!((p.p_un + p.p_mu - cfg.total_dl_power).abs() <= f64::EPSILON * cfg.total_dl_power);
        }
    }

    #[test]
    fn sweep_is_convex() {
        let (cfg, profile) = scenario();
        let pts = pareto_sweep(&cfg, &profile, 21).unwrap();
        let report = check_convexity(&pts).unwrap();
        assert!(report.is_consistent, "{report:?}");
    }

    #[test]
    fn joint_allocation_is_feasible() {
        let (cfg, profile) = scenario();
        for p in pareto_sweep(&cfg, &profile, 5).unwrap() {
            p.allocation().check_feasible(&cfg).unwrap();
        }
    }

    #[test]
    fn collinear_points_pass_with_zero_violation() {
        let s = [
            BoundarySample {
                p_un: 0.0,
                o_mu: 2.0,
                o_un: 0.0,
            },
            BoundarySample {
                p_un: 1.0,
                o_mu: 1.0,
                o_un: 1.0,
            },
            BoundarySample {
                p_un: 2.0,
                o_mu: 0.0,
                o_un: 2.0,
            },
        ];
        let r = check_boundary_convexity(&s).unwrap();
        assert!(r.is_consistent);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn inflated_point_is_detected() {
        let (cfg, profile) = scenario();
        let mut samples: Vec<BoundarySample> = pareto_sweep(&cfg, &profile, 21)
            .unwrap()
            .iter()
            .map(ParetoPoint::sample)
            .collect();
        samples[10].o_un *= 1.1;
        let r = check_boundary_convexity(&samples).unwrap();
        assert!(!r.is_consistent);
        assert!(r.max_violation > 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = BoundarySample {
            p_un: 0.0,
            o_mu: 1.0,
            o_un: 0.0,
        };
        assert!(check_boundary_convexity(&[s, s]).is_err());
        let t = BoundarySample { p_un: 1.0, ..s };
        assert!(check_boundary_convexity(&[t, s, t]).is_err());
        let (cfg, profile) = scenario();
        assert!(pareto_sweep(&cfg, &profile, 1).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let (cfg, profile) = scenario();
        let par = pareto_sweep(&cfg, &profile, 21).unwrap();
        let seq: Vec<ParetoPoint> = (0..21)
            .map(|i| pareto_point(&cfg, &profile, power_split(cfg.total_dl_power, i, 21).0).unwrap())
            .collect();
        assert_eq!(par, seq);
    }
}
