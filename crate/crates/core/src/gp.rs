//! Gaussian-process regression with a squared-exponential ARD kernel.
//!
//! Targets are standardized to zero mean and unit variance before fitting;
//! the hyperparameters therefore live on the standardized scale, while inputs
//! stay in raw units (`[v0 m/s, psi deg]`). Hyperparameters are fitted by MAP
//! under
//!
//! ```text
//! sigma_f ~ Uniform(0.1, 1)
//! l_i     ~ Uniform(1, 50)
//! sigma   ~ HalfNormal(5)
//! ```

use std::fs;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nelder_mead::{self, NelderMeadConfig};
use crate::rng;

pub const INPUT_DIM: usize = 2;

/// A GP input, `[v0, psi]`.
pub type Point = [f64; INPUT_DIM];

pub const SIGNAL_SD_BOUNDS: (f64, f64) = (0.1, 1.0);
pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1.0, 50.0);
pub const NOISE_SD_PRIOR_SCALE: f64 = 5.0;

const JITTER_REL: f64 = 1e-10;
const MAX_JITTER_DOUBLINGS: u32 = 8;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub signal_var: f64,
    pub lengthscales: [f64; INPUT_DIM],
    pub noise_var: f64,
}

impl GpHyperparams {
    pub fn new(signal_var: f64, lengthscales: [f64; INPUT_DIM], noise_var: f64) -> Result<Self> {
        let h = Self {
            signal_var,
            lengthscales,
            noise_var,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.signal_var) && self.lengthscales.iter().all(|&l| ok(l)) && ok(self.noise_var) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "GP hyperparameters must be positive and finite: {self:?}"
            )))
        }
    }

    pub fn signal_sd(&self) -> f64 {
        self.signal_var.sqrt()
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_var.sqrt()
    }
}

/// `sigma_f^2 exp(-1/2 sum_i (a_i - b_i)^2 / l_i^2)`
pub fn kernel_rbf_ard(a: &Point, b: &Point, hyper: &GpHyperparams) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(&hyper.lengthscales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    hyper.signal_var * (-0.5 * r2).exp()
}

fn gram(x: &[Point], hyper: &GpHyperparams) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_rbf_ard(&x[i], &x[j], hyper);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of `K + noise I`, with diagonal jitter starting at `1e-10 mean(diag K)`
/// and doubling on failure.
fn factorize(x: &[Point], hyper: &GpHyperparams) -> Result<Cholesky<f64, Dyn>> {
    let k = gram(x, hyper);
    let mean_diag = k.diagonal().mean();
    let mut jitter = JITTER_REL * mean_diag;
    for _ in 0..=MAX_JITTER_DOUBLINGS {
        let mut c = k.clone();
        for i in 0..c.nrows() {
            c[(i, i)] += hyper.noise_var + jitter;
        }
        if let Some(chol) = Cholesky::new(c) {
            return Ok(chol);
        }
        jitter *= 2.0;
    }
    Err(Error::NotPositiveDefinite(MAX_JITTER_DOUBLINGS))
}

fn check_shapes(x: &[Point], y: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Empty("GP training set"));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "{} inputs but {} targets",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

fn lml_from_chol(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> f64 {
    let alpha = chol.solve(y);
    let half_logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * y.dot(&alpha) - half_logdet - 0.5 * y.len() as f64 * LN_2PI
}

/// `log N(y | 0, K + sigma^2 I)`.
pub fn log_marginal_likelihood(x: &[Point], y: &[f64], hyper: &GpHyperparams) -> Result<f64> {
    check_shapes(x, y)?;
    let chol = factorize(x, hyper)?;
    Ok(lml_from_chol(&chol, &DVector::from_column_slice(y)))
}

fn log_uniform(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if v > lo && v < hi {
        -(hi - lo).ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn log_half_normal(v: f64, scale: f64) -> f64 {
    if v <= 0.0 {
        return f64::NEG_INFINITY;
    }
    std::f64::consts::LN_2 - 0.5 * LN_2PI - scale.ln() - 0.5 * (v / scale).powi(2)
}

/// Log prior density of the hyperparameters, over `(sigma_f, l_1, l_2, sigma)`.
pub fn log_hyper_prior(hyper: &GpHyperparams) -> f64 {
    log_uniform(hyper.signal_sd(), SIGNAL_SD_BOUNDS)
        + hyper
            .lengthscales
            .iter()
            .map(|&l| log_uniform(l, LENGTHSCALE_BOUNDS))
            .sum::<f64>()
        + log_half_normal(hyper.noise_sd(), NOISE_SD_PRIOR_SCALE)
}

/// Unnormalized log posterior of the hyperparameters; `-inf` outside the prior support.
pub fn log_hyper_posterior(x: &[Point], y: &[f64], hyper: &GpHyperparams) -> Result<f64> {
    let prior = log_hyper_prior(hyper);
    if prior == f64::NEG_INFINITY {
        return Ok(prior);
    }
    Ok(log_marginal_likelihood(x, y, hyper)? + prior)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub diameter_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            seed: 0,
            max_iter: 2000,
            diameter_tol: 1e-8,
        }
    }
}

fn logit_in(v: f64, (lo, hi): (f64, f64)) -> f64 {
    let p = (v - lo) / (hi - lo);
    (p / (1.0 - p)).ln()
}

fn expit_in(q: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) / (1.0 + (-q).exp())
}

/// Optimizer coordinates: logit for the bounded sigma_f and l_i, log for sigma.
fn to_unconstrained(h: &GpHyperparams) -> [f64; 4] {
    [
        logit_in(h.signal_sd(), SIGNAL_SD_BOUNDS),
        logit_in(h.lengthscales[0], LENGTHSCALE_BOUNDS),
        logit_in(h.lengthscales[1], LENGTHSCALE_BOUNDS),
        h.noise_sd().ln(),
    ]
}

fn from_unconstrained(q: &[f64]) -> GpHyperparams {
    let sf = expit_in(q[0], SIGNAL_SD_BOUNDS);
    let sn = q[3].exp();
    GpHyperparams {
        signal_var: sf * sf,
        lengthscales: [
            expit_in(q[1], LENGTHSCALE_BOUNDS),
            expit_in(q[2], LENGTHSCALE_BOUNDS),
        ],
        noise_var: sn * sn,
    }
}

fn draw_start(seed: u64, restart: usize) -> GpHyperparams {
    let mut r = rng::stream(seed, restart as u64);
    let mut within = |(lo, hi): (f64, f64)| {
        // keep strictly inside so the logit stays finite
        let u = rng::uniform(&mut r).clamp(1e-6, 1.0 - 1e-6);
        lo + (hi - lo) * u
    };
    let sf = within(SIGNAL_SD_BOUNDS);
    let l1 = within(LENGTHSCALE_BOUNDS);
    let l2 = within(LENGTHSCALE_BOUNDS);
    let sn = (NOISE_SD_PRIOR_SCALE * rng::standard_normal(&mut r))
        .abs()
        .max(1e-6);
    GpHyperparams {
        signal_var: sf * sf,
        lengthscales: [l1, l2],
        noise_var: sn * sn,
    }
}

/// Population mean and standard deviation; a degenerate spread maps to scale 1.
fn standardization(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 1e-12 * mean.abs().max(1.0) {
        (mean, sd)
    } else {
        (mean, 1.0)
    }
}

/// MAP fit by multi-start Nelder–Mead. Rows are put in a canonical order first,
/// so the result does not depend on the order of the training set.
pub fn fit_map(x: &[Point], y_raw: &[f64], cfg: &FitConfig) -> Result<GpModel> {
    check_shapes(x, y_raw)?;
    if cfg.restarts == 0 {
        return Err(Error::InvalidParameter(
            "at least one restart is required".into(),
        ));
    }
    let mut rows: Vec<(Point, f64)> = x.iter().copied().zip(y_raw.iter().copied()).collect();
    rows.sort_by(|a, b| {
        a.0[0]
            .total_cmp(&b.0[0])
            .then(a.0[1].total_cmp(&b.0[1]))
            .then(a.1.total_cmp(&b.1))
    });
    let inputs: Vec<Point> = rows.iter().map(|r| r.0).collect();
    let targets: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (shift, scale) = standardization(&targets);
    let y_std: Vec<f64> = targets.iter().map(|v| (v - shift) / scale).collect();

    let objective = |q: &[f64]| match log_hyper_posterior(&inputs, &y_std, &from_unconstrained(q)) {
        Ok(v) if v.is_finite() => -v,
        _ => f64::INFINITY,
    };
    let nm = NelderMeadConfig {
        initial_step: 0.5,
        diameter_tol: cfg.diameter_tol,
        max_iter: cfg.max_iter,
    };
    let results: Vec<Option<(f64, Vec<f64>)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = to_unconstrained(&draw_start(cfg.seed, r));
            let m = nelder_mead::minimize(objective, &start, &nm);
            m.value.is_finite().then_some((m.value, m.x))
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (value, q) in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| value < b.0) {
            best = Some((value, q));
        }
    }
    let (_, q) = best.ok_or(Error::AllRestartsFailed(cfg.restarts))?;
    GpModel::new(inputs, targets, shift, scale, from_unconstrained(&q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDist {
    /// m
    pub mean: f64,
    /// m², latent-function variance (observation noise excluded)
    pub variance: f64,
}

/// Serialized form of a trained model; the factorization is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModelFile {
    pub inputs: Vec<Point>,
    pub targets_raw: Vec<f64>,
    pub target_shift: f64,
    pub target_scale: f64,
    pub hyper: GpHyperparams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "GpModelFile", try_from = "GpModelFile")]
pub struct GpModel {
    inputs: Vec<Point>,
    targets_raw: Vec<f64>,
    target_shift: f64,
    target_scale: f64,
    hyper: GpHyperparams,
    chol: Cholesky<f64, Dyn>,
    /// `C^-1 y` on the standardized scale.
    alpha: DVector<f64>,
}

/// Kriging weights `C^-1 k` at one input, enough to predict the mean for any
/// target vector over the same training inputs.
#[derive(Debug, Clone)]
pub struct LocalWeights {
    weights: DVector<f64>,
    shift: f64,
    /// Latent variance in raw units, clamped at zero.
    pub latent_variance: f64,
}

impl LocalWeights {
    /// Raw-scale predictive mean had the model been conditioned on `targets_raw`
    /// with the same hyperparameters and standardization.
    pub fn mean_given(&self, targets_raw: &[f64]) -> f64 {
        self.shift
            + self
                .weights
                .iter()
                .zip(targets_raw)
                .map(|(w, t)| w * (t - self.shift))
                .sum::<f64>()
    }

    /// `w . v` for a raw vector without the shift.
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.weights.iter().zip(v).map(|(w, t)| w * t).sum()
    }
}

impl GpModel {
    pub fn new(
        inputs: Vec<Point>,
        targets_raw: Vec<f64>,
        target_shift: f64,
        target_scale: f64,
        hyper: GpHyperparams,
    ) -> Result<Self> {
        check_shapes(&inputs, &targets_raw)?;
        hyper.validate()?;
        if !(target_scale.is_finite() && target_scale > 0.0 && target_shift.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "invalid standardization ({target_shift}, {target_scale})"
            )));
        }
        let chol = factorize(&inputs, &hyper)?;
        let y = DVector::from_iterator(
            targets_raw.len(),
            targets_raw
                .iter()
                .map(|v| (v - target_shift) / target_scale),
        );
        let alpha = chol.solve(&y);
        Ok(Self {
            inputs,
            targets_raw,
            target_shift,
            target_scale,
            hyper,
            chol,
            alpha,
        })
    }

    pub fn inputs(&self) -> &[Point] {
        &self.inputs
    }

    pub fn targets_raw(&self) -> &[f64] {
        &self.targets_raw
    }

    pub fn hyper(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn target_shift(&self) -> f64 {
        self.target_shift
    }

    pub fn target_scale(&self) -> f64 {
        self.target_scale
    }

    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn standardized_targets(&self) -> Vec<f64> {
        self.targets_raw
            .iter()
            .map(|v| (v - self.target_shift) / self.target_scale)
            .collect()
    }

    fn cross_cov(&self, x: &Point) -> DVector<f64> {
        DVector::from_iterator(
            self.inputs.len(),
            self.inputs
                .iter()
                .map(|xi| kernel_rbf_ard(xi, x, &self.hyper)),
        )
    }

    /// Standardized mean and unclamped latent variance.
    pub fn predict_standardized(&self, x: &Point) -> (f64, f64) {
        let k = self.cross_cov(x);
        let mean = k.dot(&self.alpha);
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&k)
            .expect("triangular factor");
        (mean, self.hyper.signal_var - v.dot(&v))
    }

    /// De-standardized predictive mean and latent variance (clamped at 0).
    pub fn predict(&self, x: &Point) -> PredictiveDist {
        let (m, v) = self.predict_standardized(x);
        PredictiveDist {
            mean: self.target_shift + self.target_scale * m,
            variance: v.max(0.0) * self.target_scale * self.target_scale,
        }
    }

    /// Observation-noise variance in raw units.
    pub fn noise_variance_raw(&self) -> f64 {
        self.hyper.noise_var * self.target_scale * self.target_scale
    }

    pub fn local_weights(&self, x: &Point) -> LocalWeights {
        let k = self.cross_cov(x);
        let weights = self.chol.solve(&k);
        let latent = (self.hyper.signal_var - k.dot(&weights)).max(0.0);
        LocalWeights {
            weights,
            shift: self.target_shift,
            latent_variance: latent * self.target_scale * self.target_scale,
        }
    }

    /// Log marginal likelihood of the standardized training targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        lml_from_chol(&self.chol, &DVector::from_vec(self.standardized_targets()))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

impl From<GpModel> for GpModelFile {
    fn from(m: GpModel) -> Self {
        GpModelFile {
            inputs: m.inputs,
            targets_raw: m.targets_raw,
            target_shift: m.target_shift,
            target_scale: m.target_scale,
            hyper: m.hyper,
        }
    }
}

impl TryFrom<GpModelFile> for GpModel {
    type Error = Error;

    fn try_from(f: GpModelFile) -> Result<Self> {
        GpModel::new(
            f.inputs,
            f.targets_raw,
            f.target_shift,
            f.target_scale,
            f.hyper,
        )
    }
}
