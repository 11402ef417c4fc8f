//! Bayesian calibration of the drag-free range model.
//!
//! Unknowns are gravity `g` and the observation precision `tau`:
//!
//! ```text
//! 1/g ~ Uniform(0.001, 1)
//! tau ~ Gamma(shape 0.25, rate 2.5)
//! y_i ~ Normal(2 v0_i^2 sin(psi_i) cos(psi_i) / g, 1/tau)
//! ```
//!
//! The posterior is sampled with adaptive random-walk Metropolis in
//! `(logit((1/g - lo) / (hi - lo)), ln tau)` coordinates.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::physics::simple_range_factor;
use crate::rng::{self, StreamRng};

/// Stream-number domain for MCMC chains, kept apart from other seeded uses.
const CHAIN_STREAM_BASE: u64 = 0x4d43_4d43_0000_0000;
const SUBSAMPLE_STREAM: u64 = 0x5355_4253_0000_0000;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplePrior {
    /// s²/m
    pub inv_g_low: f64,
    /// s²/m
    pub inv_g_high: f64,
    pub tau_shape: f64,
    /// 1/m², rate convention (prior mean shape/rate)
    pub tau_rate: f64,
}

impl Default for SimplePrior {
    fn default() -> Self {
        Self {
            inv_g_low: 0.001,
            inv_g_high: 1.0,
            tau_shape: 0.25,
            tau_rate: 2.5,
        }
    }
}

impl SimplePrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.inv_g_low > 0.0 && self.inv_g_low < self.inv_g_high) {
            return Err(Error::InvalidParameter(format!(
                "1/g prior bounds must satisfy 0 < low < high: {self:?}"
            )));
        }
        if !(self.tau_shape > 0.0 && self.tau_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau prior shape and rate must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    fn log_density_inv_g(&self, inv_g: f64) -> f64 {
        if inv_g > self.inv_g_low && inv_g < self.inv_g_high {
            -(self.inv_g_high - self.inv_g_low).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn log_density_tau(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (self.tau_shape, self.tau_rate);
        a * b.ln() - ln_gamma(a) + (a - 1.0) * tau.ln() - b * tau
    }
}

/// Log prior plus Gaussian log likelihood of the drag-free model.
pub fn log_posterior_simple(ds: &Dataset, g: f64, tau: f64, prior: &SimplePrior) -> f64 {
    if !(g > 0.0 && tau > 0.0) {
        return f64::NEG_INFINITY;
    }
    let lp = prior.log_density_inv_g(1.0 / g) + prior.log_density_tau(tau);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    let sse: f64 = ds
        .experiments()
        .iter()
        .map(|e| {
            let eta = simple_range_factor(&e.input()) / g;
            (e.y_obs - eta).powi(2)
        })
        .sum();
    let n = ds.len() as f64;
    lp + 0.5 * n * (tau.ln() - LN_2PI) - 0.5 * tau * sse
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub chains: usize,
    pub burn_in: usize,
    /// Retained draws per chain.
    pub keep: usize,
    pub seed: u64,
    pub target_accept: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            burn_in: 2000,
            keep: 1200,
            seed: 0,
            target_accept: 0.35,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.keep == 0 {
            return Err(Error::InvalidParameter(
                "MCMC needs at least one chain and one retained draw".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target acceptance must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: Vec<Vec<f64>>,
    /// Acceptance rate over the retained steps.
    pub acceptance: f64,
}

/// One adaptive random-walk Metropolis chain.
///
/// During burn-in the proposal scale follows a Robbins–Monro recursion toward
/// `target_accept` and the proposal covariance is re-estimated from the second
/// half of the burn-in history every 50 steps. Both are frozen afterwards.
pub fn run_chain(
    log_density: &(impl Fn(&[f64]) -> f64 + ?Sized),
    init: &[f64],
    burn_in: usize,
    keep: usize,
    target_accept: f64,
    rng: &mut StreamRng,
) -> ChainOutput {
    let d = init.len();
    let mut x = DVector::from_column_slice(init);
    let mut lp = log_density(x.as_slice());
    let mut log_scale = (2.38 / (d as f64).sqrt()).ln();
    let mut chol = DMatrix::<f64>::identity(d, d) * 0.1;
    let mut history: Vec<DVector<f64>> = Vec::with_capacity(burn_in);
    let mut draws = Vec::with_capacity(keep);
    let mut accepted = 0usize;

    for step in 0..burn_in + keep {
        let z = DVector::from_fn(d, |_, _| rng::standard_normal(rng));
        let proposal = &x + (&chol * z) * log_scale.exp();
        let lp_prop = log_density(proposal.as_slice());
        let log_alpha = if lp_prop.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp_prop - lp
        };
        let alpha = log_alpha.min(0.0).exp();
        if rng::uniform(rng) < alpha {
            x = proposal;
            lp = lp_prop;
            if step >= burn_in {
                accepted += 1;
            }
        }

        if step < burn_in {
            log_scale += (alpha - target_accept) / ((step + 1) as f64).powf(0.6);
            history.push(x.clone());
            if step >= 200 && step % 50 == 0 {
                let tail = &history[history.len() / 2..];
                if let Some(c) = empirical_cov_chol(tail) {
                    chol = c;
                }
            }
        } else {
            draws.push(x.as_slice().to_vec());
        }
    }
    ChainOutput {
        draws,
        acceptance: if keep == 0 {
            0.0
        } else {
            accepted as f64 / keep as f64
        },
    }
}

fn empirical_cov_chol(xs: &[DVector<f64>]) -> Option<DMatrix<f64>> {
    let n = xs.len();
    let d = xs.first()?.len();
    if n <= d + 1 {
        return None;
    }
    let mean = xs.iter().fold(DVector::zeros(d), |acc, x| acc + x) / n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for x in xs {
        let c = x - &mean;
        cov += &c * c.transpose();
    }
    cov /= (n - 1) as f64;
    let scale = cov.diagonal().max().max(1e-300);
    for i in 0..d {
        cov[(i, i)] += 1e-10 * scale;
    }
    Cholesky::new(cov).map(|c| c.l())
}

/// Runs `cfg.chains` independent chains in parallel and pools their retained
/// draws in chain-major order. `init(chain, rng)` supplies each start point.
pub fn sample_pooled(
    log_density: &(impl Fn(&[f64]) -> f64 + Sync),
    init: impl Fn(usize, &mut StreamRng) -> Vec<f64> + Sync,
    cfg: &McmcConfig,
) -> Result<(Vec<Vec<f64>>, f64)> {
    cfg.validate()?;
    let outputs: Vec<ChainOutput> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(cfg.seed, CHAIN_STREAM_BASE + c as u64);
            let start = init(c, &mut r);
            run_chain(
                log_density,
                &start,
                cfg.burn_in,
                cfg.keep,
                cfg.target_accept,
                &mut r,
            )
        })
        .collect();
    let acceptance = outputs.iter().map(|o| o.acceptance).sum::<f64>() / outputs.len() as f64;
    let draws = outputs.into_iter().flat_map(|o| o.draws).collect();
    Ok((draws, acceptance))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMeta {
    pub chains: usize,
    pub burn_in: usize,
    pub kept_per_chain: usize,
    pub acceptance_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    g_draws: Vec<f64>,
    tau_draws: Vec<f64>,
    pub meta: PosteriorMeta,
}

impl PosteriorSamples {
    pub fn new(g_draws: Vec<f64>, tau_draws: Vec<f64>, meta: PosteriorMeta) -> Result<Self> {
        if g_draws.is_empty() {
            return Err(Error::Empty("posterior has no draws"));
        }
        if g_draws.len() != tau_draws.len() {
            return Err(Error::InvalidParameter(format!(
                "{} g draws but {} tau draws",
                g_draws.len(),
                tau_draws.len()
            )));
        }
        if let Some(g) = g_draws.iter().find(|g| !(**g > 1.0 && **g < 1000.0)) {
            return Err(Error::InvalidParameter(format!(
                "g draw {g} outside (1, 1000)"
            )));
        }
        if let Some(t) = tau_draws.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "tau draw {t} not positive"
            )));
        }
        Ok(Self {
            g_draws,
            tau_draws,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.g_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g_draws.is_empty()
    }

    pub fn g_draws(&self) -> &[f64] {
        &self.g_draws
    }

    pub fn tau_draws(&self) -> &[f64] {
        &self.tau_draws
    }

    pub fn g_mean(&self) -> f64 {
        mean(&self.g_draws)
    }

    /// `n` draws chosen uniformly without replacement, in their original order.
    /// Returns a copy of everything when `n >= len`.
    pub fn subsample(&self, n: usize, seed: u64) -> Self {
        if n >= self.len() {
            return self.clone();
        }
        let mut r = rng::stream(seed, SUBSAMPLE_STREAM);
        let mut picked = index::sample(&mut r, self.len(), n).into_vec();
        picked.sort_unstable();
        Self {
            g_draws: picked.iter().map(|&i| self.g_draws[i]).collect(),
            tau_draws: picked.iter().map(|&i| self.tau_draws[i]).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Writes `g_mps2,tau_per_m2` rows to `path` and the metadata to the
    /// sidecar returned by [`meta_path`].
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["g_mps2", "tau_per_m2"])?;
        for (g, t) in self.g_draws.iter().zip(&self.tau_draws) {
            w.write_record([g.to_string(), t.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        let meta = meta_path(path);
        let text = serde_json::to_string_pretty(&self.meta).map_err(|e| Error::json(&meta, e))?;
        fs::write(&meta, text).map_err(|e| Error::io(&meta, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header != ["g_mps2", "tau_per_m2"] {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: 0,
                message: format!("unexpected header {}", header.join(",")),
            });
        }
        let mut g = Vec::new();
        let mut tau = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        row: i + 1,
                        message: format!("field {} is not a number", c + 1),
                    })
            };
            g.push(field(0)?);
            tau.push(field(1)?);
        }
        let meta_file = meta_path(path);
        let text = fs::read_to_string(&meta_file).map_err(|e| Error::io(&meta_file, e))?;
        let meta = serde_json::from_str(&text).map_err(|e| Error::json(&meta_file, e))?;
        Self::new(g, tau, meta)
    }
}

/// JSON sidecar next to a posterior CSV.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Least-squares 1/g for the drag-free model, clamped into the prior support.
fn least_squares_inv_g(ds: &Dataset, prior: &SimplePrior) -> f64 {
    let (num, den) = ds.experiments().iter().fold((0.0, 0.0), |(n, d), e| {
        let b = simple_range_factor(&e.input());
        (n + e.y_obs * b, d + b * b)
    });
    let width = prior.inv_g_high - prior.inv_g_low;
    let u = if den > 0.0 {
        num / den
    } else {
        prior.inv_g_low + 0.5 * width
    };
    u.clamp(
        prior.inv_g_low + 1e-6 * width,
        prior.inv_g_high - 1e-6 * width,
    )
}

/// Samples `(g, tau)` from the calibration posterior.
pub fn sample_posterior(
    ds: &Dataset,
    prior: &SimplePrior,
    cfg: &McmcConfig,
) -> Result<PosteriorSamples> {
    prior.validate()?;
    if ds.is_empty() {
        return Err(Error::Empty("dataset has no experiments"));
    }
    let (lo, hi) = (prior.inv_g_low, prior.inv_g_high);
    let width = hi - lo;
    let decode = |q: &[f64]| {
        let s = 1.0 / (1.0 + (-q[0]).exp());
        (lo + width * s, q[1].exp(), s)
    };
    let log_density = |q: &[f64]| {
        let (u, tau, s) = decode(q);
        if !(u > lo && u < hi) {
            return f64::NEG_INFINITY;
        }
        // Jacobians of u = lo + width expit(q0) and tau = exp(q1)
        log_posterior_simple(ds, 1.0 / u, tau, prior) + (width * s * (1.0 - s)).ln() + q[1]
    };

    let u0 = least_squares_inv_g(ds, prior);
    let sse: f64 = ds
        .experiments()
        .iter()
        .map(|e| (e.y_obs - simple_range_factor(&e.input()) * u0).powi(2))
        .sum();
    let tau0 = (ds.len() as f64 / sse.max(1e-12)).clamp(1e-8, 1e8);
    let p0 = (u0 - lo) / width;
    let q0 = [(p0 / (1.0 - p0)).ln(), tau0.ln()];
    let init = |_c: usize, r: &mut StreamRng| {
        vec![
            q0[0] + 0.1 * rng::standard_normal(r),
            q0[1] + 0.1 * rng::standard_normal(r),
        ]
    };

    let (draws, acceptance) = sample_pooled(&log_density, init, cfg)?;
    if !(0.05..=0.95).contains(&acceptance) {
        log::warn!("MCMC acceptance rate {acceptance:.3} outside [0.05, 0.95]");
    }
    let (g, tau): (Vec<f64>, Vec<f64>) = draws
        .iter()
        .map(|q| {
            let (u, t, _) = decode(q);
            (1.0 / u, t)
        })
        .unzip();
    PosteriorSamples::new(
        g,
        tau,
        PosteriorMeta {
            chains: cfg.chains,
            burn_in: cfg.burn_in,
            kept_per_chain: cfg.keep,
            acceptance_rate: acceptance,
            seed: cfg.seed,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub g: ParamSummary,
    pub tau: ParamSummary,
    pub draws: usize,
    pub acceptance_rate: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Quantile by linear interpolation between order statistics (`p` in [0, 1]).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(xs: &[f64]) -> ParamSummary {
    let m = mean(xs);
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&sorted, p);
    ParamSummary {
        mean: m,
        sd,
        q05: q(0.05),
        q25: q(0.25),
        q50: q(0.5),
        q75: q(0.75),
        q95: q(0.95),
    }
}

pub fn posterior_summary(s: &PosteriorSamples) -> PosteriorSummary {
    PosteriorSummary {
        g: summarize(&s.g_draws),
        tau: summarize(&s.tau_draws),
        draws: s.len(),
        acceptance_rate: s.meta.acceptance_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{builtin_dataset, Experiment};
    use approx::assert_abs_diff_eq;

    fn meta() -> PosteriorMeta {
        PosteriorMeta {
            chains: 1,
            burn_in: 0,
            kept_per_chain: 3,
            acceptance_rate: 0.3,
            seed: 0,
        }
    }

    #[test]
    fn prior_support() {
        let ds = builtin_dataset("A").unwrap();
        let prior = SimplePrior::default();
        assert_eq!(
            log_posterior_simple(&ds, 0.5, 0.01, &prior),
            f64::NEG_INFINITY
        );
        assert_eq!(
            log_posterior_simple(&ds, 1000.5, 0.01, &prior),
            f64::NEG_INFINITY
        );
        assert!(log_posterior_simple(&ds, 30.0, 0.01, &prior).is_finite());
    }

    #[test]
    fn single_observation_at_mean() {
        let e = Experiment {
            id: "1".into(),
            psi: 45.0,
            v0: 10.0,
            y_obs: 100.0 / 9.8,
        };
        let ds = Dataset::new("one", vec![e]).unwrap();
        let prior = SimplePrior::default();
        let tau = 0.37;
        let lp = log_posterior_simple(&ds, 9.8, tau, &prior);
        let prior_terms = prior.log_density_inv_g(1.0 / 9.8) + prior.log_density_tau(tau);
        assert_abs_diff_eq!(
            lp - prior_terms,
            0.5 * (tau / (2.0 * std::f64::consts::PI)).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn brute_force_sum_dataset_a() {
        let ds = builtin_dataset("A").unwrap();
        let (g, tau) = (35.0f64, 0.001f64);
        let mut expected = -(1.0f64 - 0.001).ln();
        // Gamma(0.25, rate 2.5) log density
        expected += 0.25 * 2.5f64.ln() - ln_gamma(0.25) + (0.25 - 1.0) * tau.ln() - 2.5 * tau;
        for e in ds.experiments() {
            let r = e.psi.to_radians();
            let eta = 2.0 * e.v0 * e.v0 / g * r.sin() * r.cos();
            expected += -0.5 * (2.0 * std::f64::consts::PI / tau).ln()
                - 0.5 * tau * (e.y_obs - eta).powi(2);
        }
        let got = log_posterior_simple(&ds, g, tau, &SimplePrior::default());
        assert_abs_diff_eq!(got, expected, epsilon = 1e-10);
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = builtin_dataset("C").unwrap();
        let cfg = McmcConfig {
            seed: 3,
            burn_in: 300,
            keep: 200,
            ..Default::default()
        };
        let a = sample_posterior(&ds, &SimplePrior::default(), &cfg).unwrap();
        let b = sample_posterior(&ds, &SimplePrior::default(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4 * 200);
        assert!(a.g_draws().iter().all(|g| 1.0 / g > 0.001 && 1.0 / g < 1.0));
    }

    #[test]
    fn default_schedule_yields_enough_draws() {
        let ds = builtin_dataset("A").unwrap();
        let s = sample_posterior(&ds, &SimplePrior::default(), &McmcConfig::default()).unwrap();
        assert!(s.len() >= 4500);
        let sub = s.subsample(4500, 1);
        assert_eq!(sub.len(), 4500);
        assert_eq!(sub, s.subsample(4500, 1));
        let acc = s.meta.acceptance_rate;
        assert!((0.05..=0.95).contains(&acc), "acceptance {acc}");
    }

    #[test]
    fn gaussian_target_recovered() {
        // N(mu, S), S = [[1, 0.6], [0.6, 2]]
        let mu = [1.0, -2.0];
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
        let prec = s.clone().try_inverse().unwrap();
        let logp = |x: &[f64]| {
            let d = DVector::from_vec(vec![x[0] - mu[0], x[1] - mu[1]]);
            -0.5 * (d.transpose() * &prec * &d)[(0, 0)]
        };
        let cfg = McmcConfig {
            chains: 4,
            burn_in: 2000,
            keep: 12_500,
            seed: 17,
            target_accept: 0.35,
        };
        let (draws, _) = sample_pooled(&logp, |_, _| vec![0.0, 0.0], &cfg).unwrap();
        assert_eq!(draws.len(), 50_000);
        let n = draws.len() as f64;
        let m0 = draws.iter().map(|d| d[0]).sum::<f64>() / n;
        let m1 = draws.iter().map(|d| d[1]).sum::<f64>() / n;
        assert!(
            (m0 - mu[0]).abs() < 0.05 && (m1 - mu[1]).abs() < 0.05,
            "{m0} {m1}"
        );
        let c = |i: usize, j: usize, mi: f64, mj: f64| {
            draws.iter().map(|d| (d[i] - mi) * (d[j] - mj)).sum::<f64>() / (n - 1.0)
        };
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let (mi, mj) = ([m0, m1][i], [m0, m1][j]);
            let got = c(i, j, mi, mj);
            assert!(
                (got - s[(i, j)]).abs() < 0.1 * s[(i, j)],
                "cov[{i}{j}] {got}"
            );
        }
    }

    #[test]
    fn summary_cases() {
        let s = summarize(&[4.0, 4.0, 4.0]);
        assert_eq!(s.sd, 0.0);
        assert!([s.q05, s.q25, s.q50, s.q75, s.q95]
            .iter()
            .all(|&q| q == 4.0));
        assert_eq!(summarize(&[1.0, 2.0, 3.0]).mean, 2.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);

        let mut r = rng::stream(8, 0);
        let draws: Vec<f64> = (0..10_000).map(|_| rng::standard_normal(&mut r)).collect();
        assert!(summarize(&draws).q50.abs() < 0.05);
    }

    #[test]
    fn samples_validate_and_round_trip() {
        assert!(PosteriorSamples::new(vec![], vec![], meta()).is_err());
        assert!(PosteriorSamples::new(vec![0.5], vec![1.0], meta()).is_err());
        assert!(PosteriorSamples::new(vec![10.0], vec![-1.0], meta()).is_err());

        let s = PosteriorSamples::new(vec![30.0, 35.5, 40.25], vec![0.001, 0.002, 0.0015], meta())
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("posterior.csv");
        s.save(&path).unwrap();
        assert!(meta_path(&path).exists());
        assert_eq!(PosteriorSamples::load(&path).unwrap(), s);
    }
}
