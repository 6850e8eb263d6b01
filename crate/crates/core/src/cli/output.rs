//! Text output formats.
//!
//! Every file starts with provenance: `#`-prefixed lines in the CSV and
//! plot-data files, a `provenance` object in the JSON reports.
//!
//! `pareto.csv`
//!
//! ```text
//! # mimo-pareto pareto sweep
//! # config: {...compact JSON...}
//! N,p_un,p_mu,o_mu,o_un
//! 50,0e0,1.2559432157547898e14,2.6e0,0e0
//! ```
//!
//! One row per boundary point per antenna count, sorted by `(N, p_un)`.
//! Reals use Rust's shortest round-trip scientific notation.
//!
//! `pareto_plot.tsv`
//!
//! Tab-separated, columns `kind N p_un_fraction o_mu o_un`. `kind` is
//! `series` for the boundary of one antenna count (one row per sweep point)
//! or `radial` for the points of all antenna counts at one fixed
//! `P_un / P` fraction, which trace the radial lines of the plot.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::optimizers::ParetoPoint;

/// `P_un / P` fractions annotated as radial lines.
pub const RADIAL_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];

/// One antenna count and its boundary sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub n_antennas: usize,
    pub total_dl_power: f64,
    pub points: Vec<ParetoPoint>,
}

fn provenance_lines(title: &str, provenance: &str) -> String {
    let mut s = format!("# mimo-pareto {title}\n");
    for line in provenance.lines() {
        let _ = writeln!(s, "# {line}");
    }
    s
}

/// Pareto CSV, rows sorted by `(N, p_un)`.
pub fn pareto_csv(sweeps: &[Sweep], provenance: &str) -> String {
    let mut sorted: Vec<&Sweep> = sweeps.iter().collect();
    sorted.sort_by_key(|s| s.n_antennas);
    let mut out = provenance_lines("pareto sweep", provenance);
    out.push_str("N,p_un,p_mu,o_mu,o_un\n");
    for sweep in sorted {
        let mut pts: Vec<&ParetoPoint> = sweep.points.iter().collect();
        pts.sort_by(|a, b| a.p_un.total_cmp(&b.p_un));
        for p in pts {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e}",
                sweep.n_antennas, p.p_un, p.p_mu, p.o_mu, p.o_un
            );
        }
    }
    out
}

/// Plot-ready series per antenna count plus radial-line annotations.
pub fn emit_plotdata(sweeps: &[Sweep], provenance: &str) -> Result<String> {
    if sweeps.is_empty() {
        return Err(Error::config("sweep.antennas", "no antenna counts to plot"));
    }
    if let Some(s) = sweeps.iter().find(|s| s.points.is_empty()) {
        return Err(Error::InvalidPoints(format!("sweep for N = {} is empty", s.n_antennas)));
    }
    let mut sorted: Vec<&Sweep> = sweeps.iter().collect();
    sorted.sort_by_key(|s| s.n_antennas);
    let mut out = provenance_lines("plot data", provenance);
    out.push_str("kind\tN\tp_un_fraction\to_mu\to_un\n");
    let fraction = |s: &Sweep, p: &ParetoPoint| {
        if s.total_dl_power > 0.0 {
            p.p_un / s.total_dl_power
        } else {
            0.0
        }
    };
    for s in &sorted {
        for p in &s.points {
            let _ = writeln!(
                out,
                "series\t{}\t{:e}\t{:e}\t{:e}",
                s.n_antennas,
                fraction(s, p),
                p.o_mu,
                p.o_un
            );
        }
    }
    for target in RADIAL_FRACTIONS {
        for s in &sorted {
            let p = s
                .points
                .iter()
                .min_by(|a, b| {
                    (fraction(s, a) - target)
                        .abs()
                        .total_cmp(&(fraction(s, b) - target).abs())
                })
                .expect("nonempty");
            let _ = writeln!(
                out,
                "radial\t{}\t{:e}\t{:e}\t{:e}",
                s.n_antennas,
                fraction(s, p),
                p.o_mu,
                p.o_un
            );
        }
    }
    Ok(out)
}
