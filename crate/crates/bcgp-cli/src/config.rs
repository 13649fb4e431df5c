//! Experiment configuration: one TOML file per experiment, validated
//! structurally before any computation. Unknown keys are rejected and
//! errors carry the path to the offending field.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use bcgp::{SmComponent, SplitMode, Stage, Warping};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub split: SplitMode,
    /// Ordered warping stages, applied first-to-last toward the latent
    /// space. Values are training initializations.
    pub warping: Vec<Stage>,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub mean: MeanConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub mcmc: Option<McmcSettings>,
    #[serde(default)]
    pub predict: PredictConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub time_column: String,
    pub value_column: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// Spectral-mixture component count Q.
    #[serde(default)]
    pub components: Option<usize>,
    /// Explicit initial values; omit for data-driven initialization
    /// (periodogram peaks for the spectral mixture).
    #[serde(default)]
    pub init: Option<KernelInit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    SquaredExponential,
    SpectralMixture,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelInit {
    #[serde(default)]
    pub variance: Option<f64>,
    #[serde(default)]
    pub lengthscale: Option<f64>,
    #[serde(default)]
    pub components: Option<Vec<SmComponent>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanConfig {
    #[serde(default = "default_mean_kind")]
    pub kind: MeanKind,
    /// Initial constant value; omit for the sample mean of the warped
    /// training observations.
    #[serde(default)]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanKind {
    Zero,
    Constant,
}

fn default_mean_kind() -> MeanKind {
    MeanKind::Constant
}

impl Default for MeanConfig {
    fn default() -> Self {
        MeanConfig {
            kind: MeanKind::Constant,
            value: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Initial observation-noise variance; omit for `0.1 * var(warped)`.
    #[serde(default)]
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_method")]
    pub method: OptMethod,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// BFGS-Powell alternation count.
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Parameter names held at their initial values during training,
    /// e.g. `"warping[0].scale"` to turn an affine stage into a pure shift.
    #[serde(default)]
    pub freeze: Vec<String>,
    /// Raw parameters optimized as `-exp(theta)`, keeping them strictly
    /// negative. Constraining a shift this way pins the warping's learned
    /// lower bound to the positive axis (data known to be nonnegative).
    /// Initial values must be negative.
    #[serde(default)]
    pub constrain_negative: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptMethod {
    Bfgs,
    Powell,
    BfgsPowell,
    Mcmc,
}

fn default_method() -> OptMethod {
    OptMethod::BfgsPowell
}

fn default_tol() -> f64 {
    1e-9
}

fn default_max_iter() -> usize {
    150
}

fn default_rounds() -> usize {
    2
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: default_method(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            rounds: default_rounds(),
            freeze: Vec::new(),
            constrain_negative: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSettings {
    pub walkers: usize,
    pub steps: usize,
    #[serde(default = "default_stretch")]
    pub stretch: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Per-coordinate standard deviation of the initial walker cloud in
    /// the unconstrained space.
    #[serde(default = "default_init_radius")]
    pub init_radius: f64,
    /// Center the cloud on a BFGS-Powell solution instead of the raw
    /// initialization.
    #[serde(default = "default_warm_start")]
    pub warm_start: bool,
}

fn default_stretch() -> f64 {
    2.0
}

fn default_burn_in() -> f64 {
    0.5
}

fn default_init_radius() -> f64 {
    0.5
}

fn default_warm_start() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    #[serde(default = "default_gh_points")]
    pub gh_points: usize,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
}

fn default_gh_points() -> usize {
    20
}

fn default_percentile() -> f64 {
    0.95
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            gh_points: default_gh_points(),
            percentile: default_percentile(),
        }
    }
}

impl ExperimentConfig {
    /// Reads, parses, and validates a config file. Returns the config with
    /// the SHA-256 hash of the raw file bytes.
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let hash = sha256_hex(text.as_bytes());
        let de = toml::Deserializer::parse(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(format!("{}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok((cfg, hash))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        Warping::compose(self.warping.clone())
            .map_err(|e| CliError::Config(format!("warping: {e}")))?;
        match self.kernel.kind {
            KernelKind::SpectralMixture => {
                let q = self.kernel.components.unwrap_or(2);
                if q == 0 {
                    return Err(CliError::Config("kernel.components must be >= 1".into()));
                }
                if let Some(init) = &self.kernel.init {
                    match &init.components {
                        Some(c) if c.len() == q => {}
                        Some(c) => {
                            return Err(CliError::Config(format!(
                                "kernel.init.components has {} entries but kernel.components = {q}",
                                c.len()
                            )))
                        }
                        None => {
                            return Err(CliError::Config(
                                "kernel.init for a spectral mixture needs init.components".into(),
                            ))
                        }
                    }
                    if init.variance.is_some() || init.lengthscale.is_some() {
                        return Err(CliError::Config(
                            "kernel.init.variance/lengthscale apply to squared-exponential only"
                                .into(),
                        ));
                    }
                }
            }
            KernelKind::SquaredExponential => {
                if let Some(init) = &self.kernel.init {
                    if init.components.is_some() {
                        return Err(CliError::Config(
                            "kernel.init.components applies to spectral-mixture only".into(),
                        ));
                    }
                }
                if self.kernel.components.is_some() {
                    return Err(CliError::Config(
                        "kernel.components applies to spectral-mixture only".into(),
                    ));
                }
            }
        }
        if let MeanKind::Zero = self.mean.kind {
            if self.mean.value.is_some() {
                return Err(CliError::Config(
                    "mean.value set but mean.kind is zero".into(),
                ));
            }
        }
        if let Some(v) = self.noise.variance {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Config(format!(
                    "noise.variance must be finite and >= 0, got {v}"
                )));
            }
        }
        let opt = &self.optimizer;
        if !(opt.tol > 0.0) {
            return Err(CliError::Config(format!(
                "optimizer.tol must be > 0, got {}",
                opt.tol
            )));
        }
        if opt.max_iter == 0 {
            return Err(CliError::Config("optimizer.max_iter must be >= 1".into()));
        }
        if opt.rounds == 0 {
            return Err(CliError::Config("optimizer.rounds must be >= 1".into()));
        }
        if let Some(name) = opt
            .constrain_negative
            .iter()
            .find(|n| opt.freeze.contains(n))
        {
            return Err(CliError::Config(format!(
                "'{name}' cannot be both frozen and sign-constrained"
            )));
        }
        if opt.method == OptMethod::Mcmc && self.mcmc.is_none() {
            return Err(CliError::Config(
                "optimizer.method = \"mcmc\" requires an [mcmc] section".into(),
            ));
        }
        if let Some(mcmc) = &self.mcmc {
            if mcmc.walkers == 0 || mcmc.walkers % 2 != 0 {
                return Err(CliError::Config(format!(
                    "mcmc.walkers must be positive and even, got {}",
                    mcmc.walkers
                )));
            }
            if mcmc.steps == 0 {
                return Err(CliError::Config("mcmc.steps must be >= 1".into()));
            }
            if !(mcmc.stretch > 1.0) {
                return Err(CliError::Config(format!(
                    "mcmc.stretch must exceed 1, got {}",
                    mcmc.stretch
                )));
            }
            if !(0.0..1.0).contains(&mcmc.burn_in) {
                return Err(CliError::Config(format!(
                    "mcmc.burn_in must lie in [0, 1), got {}",
                    mcmc.burn_in
                )));
            }
            if !(mcmc.init_radius > 0.0) {
                return Err(CliError::Config(format!(
                    "mcmc.init_radius must be > 0, got {}",
                    mcmc.init_radius
                )));
            }
        }
        let p = &self.predict;
        if !(p.percentile > 0.0 && p.percentile < 1.0) {
            return Err(CliError::Config(format!(
                "predict.percentile must lie in (0, 1), got {}",
                p.percentile
            )));
        }
        if p.gh_points == 0 {
            return Err(CliError::Config("predict.gh_points must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
