//! Monte Carlo validation of the closed-form SINR chain.
//!
//! Each realization draws Rayleigh channels, sends the uplink pilots through
//! unit-variance noise, forms the MMSE estimates and the MRT precoders, and
//! records every term of the achievable-rate bound: the mean of the
//! desired-signal coefficient (the deterministic part), its fluctuation, and
//! the interference from the other precoders of the same and of the other
//! service.
//!
//! Realization `i` draws all of its randomness from a ChaCha8 stream selected
//! by `(seed, i)`. Realizations are processed in fixed-size batches whose
//! partial sums are combined in batch order, so reports are bit-identical
//! whatever the number of worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{
    composite_coefficients, pilot_snr_sum, EstimationStats, PowerAllocation, SpectralEfficiencies,
};
use crate::error::{Error, Result};
use crate::scenario::{LargeScaleProfile, SystemConfig};

pub const MIN_REALIZATIONS: usize = 100;
const BATCH: usize = 256;

pub type CVector = Vec<Complex64>;

/// Small-scale channels of one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub f: Vec<CVector>,
    pub g: Vec<Vec<CVector>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimates {
    pub f_hat: Vec<CVector>,
    pub g_hat_composite: Vec<CVector>,
    pub g_hat_user: Vec<Vec<CVector>>,
}

/// MRT precoders, one column per unicast user (`v`) and per group (`w`).
#[derive(Debug, Clone, PartialEq)]
pub struct Precoders {
    pub v: Vec<CVector>,
    pub w: Vec<CVector>,
}

/// RNG stream for realization `index` under master seed `seed`.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `CN(0, variance I_n)` vector.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> CVector {
    let sd = (variance / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sd * re, sd * im)
        })
        .collect()
}

/// `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

fn scaled(a: &[Complex64], s: f64) -> CVector {
    a.iter().map(|x| x * s).collect()
}

/// Independent Rayleigh channels with per-antenna variances `beta` / `eta`.
pub fn draw_channels<R: Rng + ?Sized>(
    profile: &LargeScaleProfile,
    config: &SystemConfig,
    rng: &mut R,
) -> ChannelRealization {
    let n = config.n_antennas;
    ChannelRealization {
        f: profile.beta.iter().map(|&b| complex_gaussian(rng, n, b)).collect(),
        g: profile
            .eta
            .iter()
            .map(|group| group.iter().map(|&e| complex_gaussian(rng, n, e)).collect())
            .collect(),
    }
}

/// Uplink training and MMSE estimation.
///
/// Unicast user `u` sees `y_u = sqrt(tau p_u) f_u + n_u`; group `g` shares one
/// pilot, so `y_g = sum_t sqrt(tau q_gt) g_gt + n_g`. Member estimates are
/// formed directly from `y_g`; they equal `c_gk * g_hat_g` by construction of
/// the MMSE scalars.
pub fn estimate_channels<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    alloc: &PowerAllocation,
    profile: &LargeScaleProfile,
    rng: &mut R,
) -> ChannelEstimates {
    let tau = alloc.tau as f64;
    let n = realization
        .f
        .first()
        .or_else(|| realization.g.first().and_then(|g| g.first()))
        .map_or(0, Vec::len);

    let f_hat = realization
        .f
        .iter()
        .zip(&alloc.p_up)
        .zip(&profile.beta)
        .map(|((f, &p), &b)| {
            let noise = complex_gaussian(rng, n, 1.0);
            let amp = (tau * p).sqrt();
            let gain = amp * b / (1.0 + tau * p * b);
            f.iter().zip(&noise).map(|(h, z)| (h * amp + z) * gain).collect()
        })
        .collect();

    let mut g_hat_composite = Vec::with_capacity(realization.g.len());
    let mut g_hat_user = Vec::with_capacity(realization.g.len());
    for ((channels, q), eta) in realization.g.iter().zip(&alloc.q_up).zip(&profile.eta) {
        let noise = complex_gaussian(rng, n, 1.0);
        let mut received = noise;
        for (g, &qk) in channels.iter().zip(q) {
            let amp = (tau * qk).sqrt();
            for (r, h) in received.iter_mut().zip(g) {
                *r += h * amp;
            }
        }
        let snr = pilot_snr_sum(tau, q, eta);
        g_hat_composite.push(scaled(&received, snr / (1.0 + snr)));
        g_hat_user.push(
            q.iter()
                .zip(eta)
                .map(|(&qk, &e)| scaled(&received, (tau * qk).sqrt() * e / (1.0 + snr)))
                .collect(),
        );
    }

    ChannelEstimates {
        f_hat,
        g_hat_composite,
        g_hat_user,
    }
}

/// `v_m = sqrt(p_m / (N vartheta_m)) f_hat_m`, `w_j = sqrt(q_j / (N gamma_j)) g_hat_j`.
/// A precoder is zero when its estimate variance is zero.
pub fn mrt_precoders(estimates: &ChannelEstimates, alloc: &PowerAllocation, profile: &LargeScaleProfile) -> Precoders {
    let stats = EstimationStats::from_allocation(alloc, profile);
    let n = estimates
        .f_hat
        .first()
        .or_else(|| estimates.g_hat_composite.first())
        .map_or(0, Vec::len) as f64;
    let column = |est: &CVector, power: f64, variance: f64| {
        if variance > 0.0 && power > 0.0 {
            scaled(est, (power / (n * variance)).sqrt())
        } else {
            vec![Complex64::new(0.0, 0.0); est.len()]
        }
    };
    Precoders {
        v: estimates
            .f_hat
            .iter()
            .zip(&alloc.p_dl)
            .zip(&stats.vartheta)
            .map(|((f, &p), &v)| column(f, p, v))
            .collect(),
        w: estimates
            .g_hat_composite
            .iter()
            .zip(&alloc.q_dl)
            .zip(&stats.gamma)
            .map(|((g, &q), &gm)| column(g, q, gm))
            .collect(),
    }
}

/// Running sums of a scalar sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    sum: f64,
    sum_sq: f64,
    n: usize,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.n += 1;
    }

    fn merge(&mut self, other: &Moments) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.n += other.n;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// A sample-averaged quantity and its closed-form counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub empirical: f64,
    pub std_error: f64,
    pub analytic: f64,
}

impl TermEstimate {
    fn from_moments(m: &Moments, analytic: f64) -> Self {
        TermEstimate {
            empirical: m.mean(),
            std_error: m.std_error(),
            analytic,
        }
    }

    /// `|empirical - analytic|` in units of the standard error.
    pub fn z_score(&self) -> f64 {
        let diff = (self.empirical - self.analytic).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }

    pub fn within_sigmas(&self, k: f64) -> bool {
        self.z_score() <= k
    }

    pub fn relative_error(&self) -> f64 {
        if self.analytic == 0.0 {
            self.empirical.abs()
        } else {
            (self.empirical / self.analytic - 1.0).abs()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Service {
    Unicast,
    Multicast,
}

/// Bound decomposition for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserReport {
    pub service: Service,
    /// Group index for multicast users.
    pub group: Option<usize>,
    /// User index (unicast) or member index within the group (multicast).
    pub index: usize,
    /// Real part of `E[h^H precoder]`; the closed form is real and positive.
    pub desired_coefficient: TermEstimate,
    /// Imaginary part of the mean coefficient, expected 0.
    pub desired_coefficient_imag: TermEstimate,
    /// `|E[h^H precoder]|^2`.
    pub desired_power: TermEstimate,
    /// Variance of `h^H precoder` around its mean.
    pub self_variance: TermEstimate,
    /// Interference from the other precoders of the same service.
    pub same_service_interference: TermEstimate,
    /// Self variance plus same-service interference, the `h P_own` term.
    pub same_service_total: TermEstimate,
    /// Interference from every precoder of the other service.
    pub cross_service_interference: TermEstimate,
    pub empirical_sinr: f64,
    pub analytic_sinr: f64,
}

impl UserReport {
    pub fn sinr_relative_error(&self) -> f64 {
        if self.analytic_sinr == 0.0 {
            self.empirical_sinr.abs()
        } else {
            (self.empirical_sinr / self.analytic_sinr - 1.0).abs()
        }
    }

    /// Decomposition terms checked against their closed forms.
    pub fn terms(&self) -> [(&'static str, &TermEstimate); 6] {
        [
            ("desired_coefficient", &self.desired_coefficient),
            ("desired_coefficient_imag", &self.desired_coefficient_imag),
            ("self_variance", &self.self_variance),
            ("same_service_interference", &self.same_service_interference),
            ("same_service_total", &self.same_service_total),
            ("cross_service_interference", &self.cross_service_interference),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub seed: u64,
    pub n_realizations: usize,
    pub n_antennas: usize,
    pub unicast: Vec<UserReport>,
    pub multicast: Vec<Vec<UserReport>>,
    /// `E[||v_m||^2]` against `p_m`.
    pub unicast_precoder_power: Vec<TermEstimate>,
    /// `E[||w_j||^2]` against `q_j`.
    pub multicast_precoder_power: Vec<TermEstimate>,
}

impl MonteCarloReport {
    pub fn users(&self) -> impl Iterator<Item = &UserReport> {
        self.unicast.iter().chain(self.multicast.iter().flatten())
    }
}

/// Per-user raw quantities of one realization.
struct UserSample {
    coefficient: Complex64,
    same: f64,
    cross: f64,
}

struct RealizationSample {
    users: Vec<UserSample>,
    v_power: Vec<f64>,
    w_power: Vec<f64>,
}

fn simulate(
    config: &SystemConfig,
    profile: &LargeScaleProfile,
    alloc: &PowerAllocation,
    seed: u64,
    index: u64,
) -> RealizationSample {
    let mut rng = realization_rng(seed, index);
    let channels = draw_channels(profile, config, &mut rng);
    let estimates = estimate_channels(&channels, alloc, profile, &mut rng);
    let pre = mrt_precoders(&estimates, alloc, profile);
    let mut users = Vec::with_capacity(config.n_unicast + config.total_multicast_users());
    for (m, f) in channels.f.iter().enumerate() {
        let mut same = 0.0;
        let mut coefficient = Complex64::new(0.0, 0.0);
        for (u, v) in pre.v.iter().enumerate() {
            let c = inner(f, v);
            if u == m {
                coefficient = c;
            } else {
                same += c.norm_sqr();
            }
        }
        let cross = pre.w.iter().map(|w| inner(f, w).norm_sqr()).sum();
        users.push(UserSample {
            coefficient,
            same,
            cross,
        });
    }
    for (j, group) in channels.g.iter().enumerate() {
        for g in group {
            let mut same = 0.0;
            let mut coefficient = Complex64::new(0.0, 0.0);
            for (t, w) in pre.w.iter().enumerate() {
                let c = inner(g, w);
                if t == j {
                    coefficient = c;
                } else {
                    same += c.norm_sqr();
                }
            }
            let cross = pre.v.iter().map(|v| inner(g, v).norm_sqr()).sum();
            users.push(UserSample {
                coefficient,
                same,
                cross,
            });
        }
    }
    RealizationSample {
        users,
        v_power: pre.v.iter().map(|v| norm_sqr(v)).collect(),
        w_power: pre.w.iter().map(|w| norm_sqr(w)).collect(),
    }
}

/// Runs `n` realizations in fixed batches and folds their samples into an
/// accumulator; batch results are merged in index order.
fn accumulate<A, F, M>(n: usize, init: impl Fn() -> A + Sync, fold: F, merge: M) -> A
where
    A: Send,
    F: Fn(&mut A, u64) + Sync,
    M: Fn(&mut A, A),
{
    let batches: Vec<A> = (0..n.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            for i in b * BATCH..((b + 1) * BATCH).min(n) {
                fold(&mut acc, i as u64);
            }
            acc
        })
        .collect();
    let mut total = init();
    for b in batches {
        merge(&mut total, b);
    }
    total
}

#[derive(Clone, Default)]
struct FirstPass {
    re: Vec<Moments>,
    im: Vec<Moments>,
}

#[derive(Clone, Default)]
struct SecondPass {
    deviation: Vec<Moments>,
    same: Vec<Moments>,
    same_total: Vec<Moments>,
    cross: Vec<Moments>,
    v_power: Vec<Moments>,
    w_power: Vec<Moments>,
}

fn merge_all(into: &mut [Moments], from: &[Moments]) {
    for (a, b) in into.iter_mut().zip(from) {
        a.merge(b);
    }
}

/// Sample-averages every term of the achievable-rate bound and pairs it with
/// the closed form.
pub fn empirical_sinr(
    config: &SystemConfig,
    profile: &LargeScaleProfile,
    alloc: &PowerAllocation,
    n_realizations: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if n_realizations < MIN_REALIZATIONS {
        return Err(Error::TooFewRealizations {
            min: MIN_REALIZATIONS,
            got: n_realizations,
        });
    }
    config.validate()?;
    profile.validate(config)?;
    alloc.check_feasible(config)?;
    let n_users = config.n_unicast + config.total_multicast_users();

    let first = accumulate(
        n_realizations,
        || FirstPass {
            re: vec![Moments::default(); n_users],
            im: vec![Moments::default(); n_users],
        },
        |acc, i| {
            let s = simulate(config, profile, alloc, seed, i);
            for (k, u) in s.users.iter().enumerate() {
                acc.re[k].push(u.coefficient.re);
                acc.im[k].push(u.coefficient.im);
            }
        },
        |acc, b| {
            merge_all(&mut acc.re, &b.re);
            merge_all(&mut acc.im, &b.im);
        },
    );
    let means: Vec<Complex64> = first
        .re
        .iter()
        .zip(&first.im)
        .map(|(r, i)| Complex64::new(r.mean(), i.mean()))
        .collect();

    let second = accumulate(
        n_realizations,
        || SecondPass {
            deviation: vec![Moments::default(); n_users],
            same: vec![Moments::default(); n_users],
            same_total: vec![Moments::default(); n_users],
            cross: vec![Moments::default(); n_users],
            v_power: vec![Moments::default(); config.n_unicast],
            w_power: vec![Moments::default(); config.n_groups],
        },
        |acc, i| {
            let s = simulate(config, profile, alloc, seed, i);
            for (k, u) in s.users.iter().enumerate() {
                let dev = (u.coefficient - means[k]).norm_sqr();
                acc.deviation[k].push(dev);
                acc.same[k].push(u.same);
                acc.same_total[k].push(dev + u.same);
                acc.cross[k].push(u.cross);
            }
            for (m, p) in acc.v_power.iter_mut().zip(&s.v_power) {
                m.push(*p);
            }
            for (m, p) in acc.w_power.iter_mut().zip(&s.w_power) {
                m.push(*p);
            }
        },
        |acc, b| {
            merge_all(&mut acc.deviation, &b.deviation);
            merge_all(&mut acc.same, &b.same);
            merge_all(&mut acc.same_total, &b.same_total);
            merge_all(&mut acc.cross, &b.cross);
            merge_all(&mut acc.v_power, &b.v_power);
            merge_all(&mut acc.w_power, &b.w_power);
        },
    );

    let stats = EstimationStats::from_allocation(alloc, profile);
    let analytic = SpectralEfficiencies::evaluate(config, alloc, profile)?;
    let n = config.n_antennas as f64;
    let (p_un, p_mu) = (alloc.p_un(), alloc.p_mu());

    // unbiased variance: n/(n-1) correction for the estimated mean
    let bessel = n_realizations as f64 / (n_realizations as f64 - 1.0);
    let build = |k: usize,
                 service: Service,
                 group: Option<usize>,
                 index: usize,
                 own: f64,
                 gain: f64,
                 desired: f64,
                 own_total: f64,
                 other_total: f64,
                 sinr: f64| {
        let mut self_variance = TermEstimate::from_moments(&second.deviation[k], own * gain);
        self_variance.empirical *= bessel;
        let mut same_total = TermEstimate::from_moments(&second.same_total[k], own_total * gain);
        same_total.empirical += (bessel - 1.0) * second.deviation[k].mean();
        let re = TermEstimate::from_moments(&first.re[k], desired.sqrt());
        let power = means[k].norm_sqr();
        let desired_power = TermEstimate {
            empirical: power,
            std_error: 2.0 * power.sqrt() * re.std_error,
            analytic: desired,
        };
        let same = TermEstimate::from_moments(&second.same[k], (own_total - own) * gain);
        let cross = TermEstimate::from_moments(&second.cross[k], other_total * gain);
        let empirical_sinr = power / (1.0 + self_variance.empirical + same.empirical + cross.empirical);
        UserReport {
            service,
            group,
            index,
            desired_coefficient: re,
            desired_coefficient_imag: TermEstimate::from_moments(&first.im[k], 0.0),
            desired_power,
            self_variance,
            same_service_interference: same,
            same_service_total: same_total,
            cross_service_interference: cross,
            empirical_sinr,
            analytic_sinr: sinr,
        }
    };

    let mut k = 0;
    let mut unicast = Vec::with_capacity(config.n_unicast);
    for m in 0..config.n_unicast {
        let p = alloc.p_dl[m];
        let desired = n * p * stats.vartheta[m];
        unicast.push(build(
            k,
            Service::Unicast,
            None,
            m,
            p,
            profile.beta[m],
            desired,
            p_un,
            p_mu,
            analytic.sinr_unicast[m],
        ));
        k += 1;
    }
    let mut multicast = Vec::with_capacity(config.n_groups);
    for j in 0..config.n_groups {
        let q = alloc.q_dl[j];
        let mut members = Vec::with_capacity(config.group_sizes[j]);
        for t in 0..config.group_sizes[j] {
            let desired = n * q * stats.xi[j][t];
            members.push(build(
                k,
                Service::Multicast,
                Some(j),
                t,
                q,
                profile.eta[j][t],
                desired,
                p_mu,
                p_un,
                analytic.sinr_multicast[j][t],
            ));
            k += 1;
        }
        multicast.push(members);
    }

    Ok(MonteCarloReport {
        seed,
        n_realizations,
        n_antennas: config.n_antennas,
        unicast,
        multicast,
        unicast_precoder_power: second
            .v_power
            .iter()
            .zip(&alloc.p_dl)
            .map(|(m, &p)| TermEstimate::from_moments(m, p))
            .collect(),
        multicast_precoder_power: second
            .w_power
            .iter()
            .zip(&alloc.q_dl)
            .map(|(m, &q)| TermEstimate::from_moments(m, q))
            .collect(),
    })
}

/// Empirical estimation statistics against their closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub seed: u64,
    pub n_draws: usize,
    /// Per-antenna variance of the unicast channel `f` against `beta`.
    pub channel_variance: Vec<TermEstimate>,
    /// Per-antenna mean of `f` (real and imaginary parts pooled), expected 0.
    pub channel_mean: Vec<TermEstimate>,
    /// Per-antenna variance of `f_hat` against `vartheta`.
    pub unicast_estimate_variance: Vec<TermEstimate>,
    /// Per-antenna variance of `f - f_hat` against `beta - vartheta`.
    pub unicast_error_variance: Vec<TermEstimate>,
    /// Real part of `f_hat^H (f - f_hat) / N`, expected 0.
    pub orthogonality: Vec<TermEstimate>,
    /// `(||f||^2 - ||f_hat||^2 - ||f - f_hat||^2) / N`, expected 0.
    pub decomposition_residual: Vec<TermEstimate>,
    /// Per-antenna variance of the composite estimate against `gamma`.
    pub composite_variance: Vec<TermEstimate>,
    /// Per-antenna variance of each member estimate against `xi`.
    pub member_variance: Vec<Vec<TermEstimate>>,
    /// Largest relative deviation of `g_hat_gk` from `c_gk * g_hat_g`.
    pub max_proportionality_error: f64,
}

impl EstimationReport {
    pub fn terms(&self) -> impl Iterator<Item = &TermEstimate> {
        self.channel_variance
            .iter()
            .chain(&self.channel_mean)
            .chain(&self.unicast_estimate_variance)
            .chain(&self.unicast_error_variance)
            .chain(&self.orthogonality)
            .chain(&self.decomposition_residual)
            .chain(&self.composite_variance)
            .chain(self.member_variance.iter().flatten())
    }
}

#[derive(Clone, Default)]
struct EstimationAcc {
    f_var: Vec<Moments>,
    f_mean: Vec<Moments>,
    f_hat: Vec<Moments>,
    err: Vec<Moments>,
    orth: Vec<Moments>,
    resid: Vec<Moments>,
    composite: Vec<Moments>,
    member: Vec<Moments>,
    prop_err: f64,
}

/// Draws channels and estimates `n_draws` times and compares the empirical
/// per-antenna statistics with the MMSE variances.
pub fn estimation_check(
    config: &SystemConfig,
    profile: &LargeScaleProfile,
    alloc: &PowerAllocation,
    n_draws: usize,
    seed: u64,
) -> Result<EstimationReport> {
    if n_draws < MIN_REALIZATIONS {
        return Err(Error::TooFewRealizations {
            min: MIN_REALIZATIONS,
            got: n_draws,
        });
    }
    config.validate()?;
    profile.validate(config)?;
    alloc.check_feasible(config)?;
    let u = config.n_unicast;
    let g = config.n_groups;
    let members = config.total_multicast_users();
    let n = config.n_antennas as f64;
    let tau = alloc.tau as f64;
    let coefficients: Vec<Vec<f64>> = alloc
        .q_up
        .iter()
        .zip(&profile.eta)
        .map(|(q, e)| composite_coefficients(tau, q, e))
        .collect();

    let acc = accumulate(
        n_draws,
        || EstimationAcc {
            f_var: vec![Moments::default(); u],
            f_mean: vec![Moments::default(); u],
            f_hat: vec![Moments::default(); u],
            err: vec![Moments::default(); u],
            orth: vec![Moments::default(); u],
            resid: vec![Moments::default(); u],
            composite: vec![Moments::default(); g],
            member: vec![Moments::default(); members],
            prop_err: 0.0,
        },
        |acc, i| {
            let mut rng = realization_rng(seed, i);
            let ch = draw_channels(profile, config, &mut rng);
            let est = estimate_channels(&ch, alloc, profile, &mut rng);
            for m in 0..u {
                let f = &ch.f[m];
                let fh = &est.f_hat[m];
                let e: CVector = f.iter().zip(fh).map(|(a, b)| a - b).collect();
                let (nf, nfh, ne) = (norm_sqr(f), norm_sqr(fh), norm_sqr(&e));
                acc.f_var[m].push(nf / n);
                acc.f_mean[m].push(f.iter().map(|x| x.re + x.im).sum::<f64>() / (2.0 * n));
                acc.f_hat[m].push(nfh / n);
                acc.err[m].push(ne / n);
                acc.orth[m].push(inner(fh, &e).re / n);
                acc.resid[m].push((nf - nfh - ne) / n);
            }
            let mut k = 0;
            for (j, gh) in est.g_hat_composite.iter().enumerate().take(g) {
                acc.composite[j].push(norm_sqr(gh) / n);
                let scale = norm_sqr(gh).sqrt();
                for (t, ghk) in est.g_hat_user[j].iter().enumerate() {
                    acc.member[k].push(norm_sqr(ghk) / n);
                    if scale > 0.0 {
                        let c = coefficients[j][t];
                        let dev: f64 = ghk
                            .iter()
                            .zip(gh)
                            .map(|(a, b)| (a - b * c).norm_sqr())
                            .sum::<f64>()
                            .sqrt();
                        let reference = (c * scale).max(norm_sqr(ghk).sqrt());
                        if reference > 0.0 {
                            acc.prop_err = acc.prop_err.max(dev / reference);
                        }
                    }
                    k += 1;
                }
            }
        },
        |acc, b| {
            merge_all(&mut acc.f_var, &b.f_var);
            merge_all(&mut acc.f_mean, &b.f_mean);
            merge_all(&mut acc.f_hat, &b.f_hat);
            merge_all(&mut acc.err, &b.err);
            merge_all(&mut acc.orth, &b.orth);
            merge_all(&mut acc.resid, &b.resid);
            merge_all(&mut acc.composite, &b.composite);
            merge_all(&mut acc.member, &b.member);
            acc.prop_err = acc.prop_err.max(b.prop_err);
        },
    );

    let stats = EstimationStats::from_allocation(alloc, profile);
    let te = TermEstimate::from_moments;
    let mut member_variance = Vec::with_capacity(g);
    let mut k = 0;
    for j in 0..g {
        let mut row = Vec::with_capacity(config.group_sizes[j]);
        for t in 0..config.group_sizes[j] {
            row.push(te(&acc.member[k], stats.xi[j][t]));
            k += 1;
        }
        member_variance.push(row);
    }
    Ok(EstimationReport {
        seed,
        n_draws,
        channel_variance: (0..u).map(|m| te(&acc.f_var[m], profile.beta[m])).collect(),
        channel_mean: (0..u).map(|m| te(&acc.f_mean[m], 0.0)).collect(),
        unicast_estimate_variance: (0..u).map(|m| te(&acc.f_hat[m], stats.vartheta[m])).collect(),
        unicast_error_variance: (0..u)
            .map(|m| te(&acc.err[m], profile.beta[m] - stats.vartheta[m]))
            .collect(),
        orthogonality: (0..u).map(|m| te(&acc.orth[m], 0.0)).collect(),
        decomposition_residual: (0..u).map(|m| te(&acc.resid[m], 0.0)).collect(),
        composite_variance: (0..g).map(|j| te(&acc.composite[j], stats.gamma[j])).collect(),
        member_variance,
        max_proportionality_error: acc.prop_err,
    })
}

/// Acceptance bands for comparing sample averages with closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Relative SINR error.
    pub sinr_relative: f64,
    /// Standard errors allowed for each decomposition term.
    pub sigmas: f64,
    /// Relative error of the mean precoder power.
    pub precoder_relative: f64,
    /// Relative error of the member/composite estimate proportionality.
    pub proportionality: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            sinr_relative: 0.05,
            sigmas: 3.0,
            precoder_relative: 0.02,
            proportionality: 1e-12,
        }
    }
}

/// Outcome of one comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: String, value: f64, threshold: f64) -> Self {
        Check {
            passed: value <= threshold,
            name,
            value,
            threshold,
        }
    }
}

fn user_label(u: &UserReport) -> String {
    match u.group {
        Some(g) => format!("multicast[{g}][{}]", u.index),
        None => format!("unicast[{}]", u.index),
    }
}

impl MonteCarloReport {
    /// SINR, per-term and precoder-power comparisons.
    pub fn checks(&self, t: &Thresholds) -> Vec<Check> {
        let mut out = Vec::new();
        for u in self.users() {
            let label = user_label(u);
            out.push(Check::at_most(
                format!("{label}.sinr_relative_error"),
                u.sinr_relative_error(),
                t.sinr_relative,
            ));
            for (name, term) in u.terms() {
                out.push(Check::at_most(format!("{label}.{name}.z"), term.z_score(), t.sigmas));
            }
        }
        for (m, p) in self.unicast_precoder_power.iter().enumerate() {
            out.push(Check::at_most(
                format!("v[{m}].power_relative_error"),
                p.relative_error(),
                t.precoder_relative,
            ));
        }
        for (j, p) in self.multicast_precoder_power.iter().enumerate() {
            out.push(Check::at_most(
                format!("w[{j}].power_relative_error"),
                p.relative_error(),
                t.precoder_relative,
            ));
        }
        out
    }
}

impl EstimationReport {
    /// Variance, orthogonality and proportionality comparisons.
    pub fn checks(&self, t: &Thresholds) -> Vec<Check> {
        let mut out = Vec::new();
        let mut push = |name: String, term: &TermEstimate| {
            out.push(Check::at_most(format!("{name}.z"), term.z_score(), t.sigmas));
        };
        for (m, term) in self.channel_variance.iter().enumerate() {
            push(format!("f[{m}].variance"), term);
        }
        for (m, term) in self.channel_mean.iter().enumerate() {
            push(format!("f[{m}].mean"), term);
        }
        for (m, term) in self.unicast_estimate_variance.iter().enumerate() {
            push(format!("f_hat[{m}].variance"), term);
        }
        for (m, term) in self.unicast_error_variance.iter().enumerate() {
            push(format!("f_error[{m}].variance"), term);
        }
        for (m, term) in self.orthogonality.iter().enumerate() {
            push(format!("f_hat[{m}].orthogonality"), term);
        }
        for (m, term) in self.decomposition_residual.iter().enumerate() {
            push(format!("f[{m}].variance_decomposition"), term);
        }
        for (j, term) in self.composite_variance.iter().enumerate() {
            push(format!("g_hat[{j}].variance"), term);
        }
        for (j, row) in self.member_variance.iter().enumerate() {
            for (k, term) in row.iter().enumerate() {
                push(format!("g_hat[{j}][{k}].variance"), term);
            }
        }
        out.push(Check::at_most(
            "member_composite_proportionality".to_string(),
            self.max_proportionality_error,
            t.proportionality,
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SystemConfig, LargeScaleProfile, PowerAllocation) {
        let cfg = SystemConfig::uniform(16, 2, vec![2], 50, 10.0, 6.0);
        let profile = LargeScaleProfile {
            beta: vec![0.8, 0.2],
            eta: vec![vec![0.5, 0.1]],
        };
        let alloc = PowerAllocation {
            p_dl: vec![3.0, 2.0],
            q_dl: vec![5.0],
            p_up: vec![2.0, 1.0],
            q_up: vec![vec![2.0, 1.5]],
            tau: 3,
        };
        (cfg, profile, alloc)
    }

    #[test]
    fn same_index_same_realization() {
        let (cfg, profile, _) = setup();
        let a = draw_channels(&profile, &cfg, &mut realization_rng(5, 17));
        let b = draw_channels(&profile, &cfg, &mut realization_rng(5, 17));
        let c = draw_channels(&profile, &cfg, &mut realization_rng(5, 18));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn channel_moments() {
        let (cfg, profile, alloc) = setup();
        let r = estimation_check(&cfg, &profile, &alloc, 10_000, 1).unwrap();
        for (t, beta) in r.channel_variance.iter().zip(&profile.beta) {
            assert!(t.relative_error() < 0.05, "{t:?} vs {beta}");
        }
        for t in &r.channel_mean {
            assert!(t.within_sigmas(3.0), "{t:?}");
        }
    }

    #[test]
    fn zero_pilot_power_gives_zero_estimates() {
        let (cfg, profile, mut alloc) = setup();
        alloc.p_up = vec![0.0, 0.0];
        alloc.q_up = vec![vec![0.0, 0.0]];
        let mut rng = realization_rng(0, 0);
        let ch = draw_channels(&profile, &cfg, &mut rng);
        let est = estimate_channels(&ch, &alloc, &profile, &mut rng);
        let zero = Complex64::new(0.0, 0.0);
        assert!(est.f_hat.iter().flatten().all(|x| *x == zero));
        assert!(est.g_hat_composite.iter().flatten().all(|x| *x == zero));
        assert!(est.g_hat_user.iter().flatten().flatten().all(|x| *x == zero));
        let pre = mrt_precoders(&est, &alloc, &profile);
        assert!(pre.v.iter().chain(&pre.w).flatten().all(|x| *x == zero));
    }

    #[test]
    fn zero_downlink_power_gives_zero_precoder() {
        let (cfg, profile, mut alloc) = setup();
        alloc.p_dl[1] = 0.0;
        let mut rng = realization_rng(0, 3);
        let ch = draw_channels(&profile, &cfg, &mut rng);
        let est = estimate_channels(&ch, &alloc, &profile, &mut rng);
        let pre = mrt_precoders(&est, &alloc, &profile);
        assert_eq!(norm_sqr(&pre.v[1]), 0.0);
        assert!(norm_sqr(&pre.v[0]) > 0.0);
    }

    #[test]
    fn all_zero_downlink_gives_zero_sinr() {
        let (cfg, profile, mut alloc) = setup();
        alloc.p_dl = vec![0.0, 0.0];
        alloc.q_dl = vec![0.0];
        let r = empirical_sinr(&cfg, &profile, &alloc, 200, 4).unwrap();
        assert!(r.users().all(|u| u.empirical_sinr == 0.0));
    }

    #[test]
    fn rejects_too_few_realizations() {
        let (cfg, profile, alloc) = setup();
        assert!(matches!(
            empirical_sinr(&cfg, &profile, &alloc, 99, 0),
            Err(Error::TooFewRealizations { .. })
        ));
    }

    #[test]
    fn small_run_tracks_closed_form() {
        let (cfg, profile, alloc) = setup();
        let r = empirical_sinr(&cfg, &profile, &alloc, 4000, 9).unwrap();
        for u in r.users() {
            assert!(u.sinr_relative_error() < 0.1, "{u:?}");
        }
        for t in r.unicast_precoder_power.iter().chain(&r.multicast_precoder_power) {
            assert!(t.relative_error() < 0.05);
        }
    }

    #[test]
    fn report_independent_of_thread_count() {
        let (cfg, profile, alloc) = setup();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| empirical_sinr(&cfg, &profile, &alloc, 1000, 3).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
