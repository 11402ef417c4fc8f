//! The three calibrated predictive models behind one per-sample interface.
//!
//! * `Simple`: drag-free range with posterior draws of `(g, tau)`.
//! * `BlackBoxGp`: a GP fitted directly to the observations.
//! * `Hybrid`: drag-free range plus a GP discrepancy fitted to the residuals.
//!
//! For the hybrid, the GP hyperparameters are fitted once on the residuals at
//! the posterior-mean `g`. At prediction time the discrepancy is conditioned
//! on the residuals of the sample being evaluated, `y - eta(X, g_s)`, with the
//! hyperparameters and standardization held fixed. The GP mean is linear in
//! its targets, so this costs one extra dot product per input.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibrate::{sample_posterior, McmcConfig, PosteriorSamples, SimplePrior};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gp::{fit_map, FitConfig, GpModel, LocalWeights, Point};
use crate::physics::{simple_range_factor, LaunchInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Simple,
    #[serde(rename = "gp")]
    BlackBoxGp,
    Hybrid,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 3] = [
        SurrogateKind::Simple,
        SurrogateKind::BlackBoxGp,
        SurrogateKind::Hybrid,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SurrogateKind::Simple => "simple",
            SurrogateKind::BlackBoxGp => "gp",
            SurrogateKind::Hybrid => "hybrid",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SurrogateKind::Simple => "Simple",
            SurrogateKind::BlackBoxGp => "GP",
            SurrogateKind::Hybrid => "Hybrid",
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(SurrogateKind::Simple),
            "gp" | "blackbox" | "black-box" => Ok(SurrogateKind::BlackBoxGp),
            "hybrid" => Ok(SurrogateKind::Hybrid),
            other => Err(Error::InvalidParameter(format!(
                "unknown model {other:?} (expected simple, gp or hybrid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub prior: SimplePrior,
    pub mcmc: McmcConfig,
    pub gp: FitConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerSamplePrediction {
    /// m
    pub mean: f64,
    /// m², total observation variance
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct CalibratedSurrogate {
    kind: SurrogateKind,
    posterior: Option<PosteriorSamples>,
    gp: Option<GpModel>,
    residual_reference_g: Option<f64>,
    /// `2 v0^2 sin psi cos psi` at the GP training inputs (hybrid only, GP row order).
    train_factors: Vec<f64>,
}

fn point_factor(p: &Point) -> f64 {
    simple_range_factor(&LaunchInput {
        v0: p[0],
        psi: p[1],
    })
}

fn gp_training_set(ds: &Dataset) -> (Vec<Point>, Vec<f64>) {
    let x = ds
        .experiments()
        .iter()
        .map(|e| e.input().as_point())
        .collect();
    (x, ds.observations())
}

pub fn fit_simple(
    ds: &Dataset,
    prior: &SimplePrior,
    mcmc: &McmcConfig,
) -> Result<CalibratedSurrogate> {
    let posterior = sample_posterior(ds, prior, mcmc)?;
    CalibratedSurrogate::simple(posterior)
}

pub fn fit_gp_blackbox(ds: &Dataset, cfg: &FitConfig) -> Result<CalibratedSurrogate> {
    let (x, y) = gp_training_set(ds);
    let gp = fit_map(&x, &y, cfg)?;
    CalibratedSurrogate::black_box(gp)
}

pub fn fit_hybrid(
    ds: &Dataset,
    prior: &SimplePrior,
    mcmc: &McmcConfig,
    fit_cfg: &FitConfig,
) -> Result<CalibratedSurrogate> {
    let posterior = sample_posterior(ds, prior, mcmc)?;
    let g_ref = posterior.g_mean();
    let (x, y) = gp_training_set(ds);
    let residuals: Vec<f64> = x
        .iter()
        .zip(&y)
        .map(|(p, yi)| yi - point_factor(p) / g_ref)
        .collect();
    let gp = fit_map(&x, &residuals, fit_cfg)?;
    CalibratedSurrogate::hybrid(posterior, gp, g_ref)
}

pub fn fit(
    kind: SurrogateKind,
    ds: &Dataset,
    cfg: &SurrogateConfig,
) -> Result<CalibratedSurrogate> {
    match kind {
        SurrogateKind::Simple => fit_simple(ds, &cfg.prior, &cfg.mcmc),
        SurrogateKind::BlackBoxGp => fit_gp_blackbox(ds, &cfg.gp),
        SurrogateKind::Hybrid => fit_hybrid(ds, &cfg.prior, &cfg.mcmc, &cfg.gp),
    }
}

impl CalibratedSurrogate {
    pub fn simple(posterior: PosteriorSamples) -> Result<Self> {
        Ok(Self {
            kind: SurrogateKind::Simple,
            posterior: Some(posterior),
            gp: None,
            residual_reference_g: None,
            train_factors: Vec::new(),
        })
    }

    pub fn black_box(gp: GpModel) -> Result<Self> {
        Ok(Self {
            kind: SurrogateKind::BlackBoxGp,
            posterior: None,
            gp: Some(gp),
            residual_reference_g: None,
            train_factors: Vec::new(),
        })
    }

    /// `gp` must have been trained on `y - eta(x, g_ref)`.
    pub fn hybrid(posterior: PosteriorSamples, gp: GpModel, g_ref: f64) -> Result<Self> {
        if !(g_ref.is_finite() && g_ref > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reference g must be > 0, got {g_ref}"
            )));
        }
        let train_factors = gp.inputs().iter().map(point_factor).collect();
        Ok(Self {
            kind: SurrogateKind::Hybrid,
            posterior: Some(posterior),
            gp: Some(gp),
            residual_reference_g: Some(g_ref),
            train_factors,
        })
    }

    pub fn kind(&self) -> SurrogateKind {
        self.kind
    }

    pub fn posterior(&self) -> Option<&PosteriorSamples> {
        self.posterior.as_ref()
    }

    pub fn gp(&self) -> Option<&GpModel> {
        self.gp.as_ref()
    }

    pub fn residual_reference_g(&self) -> Option<f64> {
        self.residual_reference_g
    }

    /// Number of parameter samples the expectation averages over (1 for the black-box GP).
    pub fn sample_count(&self) -> usize {
        self.posterior.as_ref().map_or(1, PosteriorSamples::len)
    }

    /// Same surrogate with the posterior reduced to `n` draws (uniformly without
    /// replacement, seeded by the posterior's own seed).
    pub fn with_sample_limit(&self, n: usize) -> Self {
        let mut out = self.clone();
        if let Some(p) = &self.posterior {
            out.posterior = Some(p.subsample(n, p.meta.seed));
        }
        out
    }

    /// Observations the hybrid GP would be trained on for gravity `g`.
    pub fn hybrid_residuals(&self, g: f64) -> Result<Vec<f64>> {
        let gp = self.gp.as_ref().ok_or(Error::MissingComponent("GP"))?;
        let g_ref = self
            .residual_reference_g
            .ok_or(Error::MissingComponent("reference g"))?;
        Ok(gp
            .targets_raw()
            .iter()
            .zip(&self.train_factors)
            .map(|(r, b)| r + b / g_ref - b / g)
            .collect())
    }

    /// Input-dependent quantities for `x`, shared by every sample.
    pub fn at(&self, x: &LaunchInput) -> PointPredictor<'_> {
        let factor = simple_range_factor(x);
        let local = self.gp.as_ref().map(|gp| {
            let w = gp.local_weights(&x.as_point());
            let base = w.mean_given(gp.targets_raw());
            let train_dot = w.dot(&self.train_factors);
            (w, base, gp.noise_variance_raw(), train_dot)
        });
        PointPredictor {
            surrogate: self,
            factor,
            local,
        }
    }

    pub fn predict_for_sample(
        &self,
        x: &LaunchInput,
        sample_index: usize,
    ) -> Result<PerSamplePrediction> {
        self.at(x).sample(sample_index)
    }
}

pub struct PointPredictor<'a> {
    surrogate: &'a CalibratedSurrogate,
    factor: f64,
    /// weights, GP mean at the stored targets, noise variance, `w . b_train`
    local: Option<(LocalWeights, f64, f64, f64)>,
}

impl PointPredictor<'_> {
    pub fn sample_count(&self) -> usize {
        self.surrogate.sample_count()
    }

    fn draw(&self, i: usize) -> Result<(f64, f64)> {
        let p = self
            .surrogate
            .posterior
            .as_ref()
            .ok_or(Error::MissingComponent("posterior"))?;
        if i >= p.len() {
            return Err(Error::SampleIndex {
                index: i,
                len: p.len(),
            });
        }
        Ok((p.g_draws()[i], p.tau_draws()[i]))
    }

    /// GP discrepancy mean conditioned on the residuals of sample `i` (hybrid only).
    pub fn residual_mean(&self, i: usize) -> Result<f64> {
        let (_, base, _, train_dot) = self.local.as_ref().ok_or(Error::MissingComponent("GP"))?;
        let g_ref = self
            .surrogate
            .residual_reference_g
            .ok_or(Error::MissingComponent("reference g"))?;
        let (g, _) = self.draw(i)?;
        Ok(base + (1.0 / g_ref - 1.0 / g) * train_dot)
    }

    pub fn sample(&self, i: usize) -> Result<PerSamplePrediction> {
        match self.surrogate.kind {
            SurrogateKind::Simple => {
                let (g, tau) = self.draw(i)?;
                Ok(PerSamplePrediction {
                    mean: self.factor / g,
                    variance: 1.0 / tau,
                })
            }
            SurrogateKind::BlackBoxGp => {
                let (w, base, noise, _) =
                    self.local.as_ref().ok_or(Error::MissingComponent("GP"))?;
                Ok(PerSamplePrediction {
                    mean: *base,
                    variance: w.latent_variance + noise,
                })
            }
            SurrogateKind::Hybrid => {
                let (w, _, noise, _) = self.local.as_ref().ok_or(Error::MissingComponent("GP"))?;
                let (g, _) = self.draw(i)?;
                Ok(PerSamplePrediction {
                    mean: self.factor / g + self.residual_mean(i)?,
                    variance: w.latent_variance + noise,
                })
            }
        }
    }
}

/// On-disk manifest tying a surrogate to its posterior CSV and GP JSON,
/// with paths relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub kind: SurrogateKind,
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gp_json: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_reference_g: Option<f64>,
}

pub const POSTERIOR_FILE: &str = "posterior.csv";
pub const GP_FILE: &str = "gp.json";
pub const MANIFEST_FILE: &str = "surrogate.json";

/// Writes the manifest plus its component files into `dir`; returns the manifest path.
pub fn save_bundle(s: &CalibratedSurrogate, dataset: &str, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = BundleManifest {
        kind: s.kind,
        dataset: dataset.to_string(),
        posterior_csv: None,
        gp_json: None,
        residual_reference_g: s.residual_reference_g,
    };
    if let Some(p) = &s.posterior {
        p.save(&dir.join(POSTERIOR_FILE))?;
        manifest.posterior_csv = Some(POSTERIOR_FILE.to_string());
    }
    if let Some(gp) = &s.gp {
        gp.save_json(&dir.join(GP_FILE))?;
        manifest.gp_json = Some(GP_FILE.to_string());
    }
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn load_bundle(manifest_path: &Path) -> Result<(BundleManifest, CalibratedSurrogate)> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: BundleManifest =
        serde_json::from_str(&text).map_err(|e| Error::json(manifest_path, e))?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let posterior = manifest
        .posterior_csv
        .as_ref()
        .map(|f| PosteriorSamples::load(&dir.join(f)))
        .transpose()?;
    let gp = manifest
        .gp_json
        .as_ref()
        .map(|f| GpModel::load_json(&dir.join(f)))
        .transpose()?;
    let s = match manifest.kind {
        SurrogateKind::Simple => {
            CalibratedSurrogate::simple(posterior.ok_or(Error::MissingComponent("posterior"))?)?
        }
        SurrogateKind::BlackBoxGp => {
            CalibratedSurrogate::black_box(gp.ok_or(Error::MissingComponent("GP"))?)?
        }
        SurrogateKind::Hybrid => CalibratedSurrogate::hybrid(
            posterior.ok_or(Error::MissingComponent("posterior"))?,
            gp.ok_or(Error::MissingComponent("GP"))?,
            manifest
                .residual_reference_g
                .ok_or(Error::MissingComponent("reference g"))?,
        )?,
    };
    Ok((manifest, s))
}
