//! Command implementations: fit / predict / evaluate / mcmc / sample.
//!
//! Every command is a pure function of its config and input files; outputs
//! are rewritten byte-identically on re-runs (timings go to stderr only).

use std::fs;
use std::path::Path;

use serde::Serialize;

use bcgp::optimize::DEFAULT_PRIOR_BOUND;
use bcgp::{
    bfgs_minimize, bfgs_powell, chain_summary, ensemble_mcmc, flat_prior_log_prob, powell_minimize,
    score, split, InitBall, McmcChain, McmcConfig, OptResult, Scores, Split, SplitSpec,
    Termination, TimeSeries, TrajectoryPoint, WarpedGpModel, Warping,
};

use crate::config::{ExperimentConfig, OptMethod};
use crate::error::CliError;
use crate::init::build_initial_model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Resolves the dataset path relative to the config file's directory when
/// it is not absolute.
pub fn load_series(cfg: &ExperimentConfig, config_dir: &Path) -> Result<TimeSeries, CliError> {
    let path = if cfg.dataset.path.is_absolute() {
        cfg.dataset.path.clone()
    } else {
        config_dir.join(&cfg.dataset.path)
    };
    Ok(bcgp::load_csv(
        &path,
        &cfg.dataset.time_column,
        &cfg.dataset.value_column,
    )?)
}

pub fn run_split(cfg: &ExperimentConfig, series: &TimeSeries) -> Result<Split, CliError> {
    Ok(split(
        series,
        &SplitSpec {
            mode: cfg.split,
            seed: cfg.seed,
        },
    )?)
}

/// How an optimizer coordinate maps onto its slot in the model's
/// unconstrained parameter vector.
#[derive(Clone, Copy, PartialEq)]
enum CoordMap {
    Direct,
    /// `slot = -exp(theta)`: keeps a raw parameter strictly negative.
    NegExp,
}

/// Embeds a free-coordinate subvector into the full parameter vector.
struct ParamMask {
    template: Vec<f64>,
    free: Vec<usize>,
    maps: Vec<CoordMap>,
    free_names: Vec<String>,
}

impl ParamMask {
    fn new(
        model: &WarpedGpModel,
        train_warping: bool,
        freeze: &[String],
        constrain_negative: &[String],
    ) -> Result<Self, CliError> {
        let space = model.param_space();
        let all_names: Vec<String> = space.names().map(str::to_string).collect();
        for name in freeze.iter().chain(constrain_negative) {
            // warping-prefixed entries may be absent for the baseline
            // model, whose warping differs from the configured one
            if !all_names.iter().any(|n| n == name) && !name.starts_with("warping") {
                return Err(CliError::Config(format!(
                    "unknown parameter '{name}'; available: {}",
                    all_names.join(", ")
                )));
            }
        }
        let template = model.unconstrained_params();
        let mut free = Vec::new();
        let mut maps = Vec::new();
        let mut free_names = Vec::new();
        for (i, name) in all_names.iter().enumerate() {
            let frozen =
                freeze.iter().any(|f| f == name) || (!train_warping && name.starts_with("warping"));
            if frozen {
                continue;
            }
            let map = if constrain_negative.iter().any(|f| f == name) {
                if template[i] >= 0.0 {
                    return Err(CliError::Config(format!(
                        "'{name}' is sign-constrained but its initial value {} is not negative",
                        template[i]
                    )));
                }
                CoordMap::NegExp
            } else {
                CoordMap::Direct
            };
            free.push(i);
            maps.push(map);
            free_names.push(name.clone());
        }
        if free.is_empty() {
            return Err(CliError::Config("every parameter is frozen".into()));
        }
        Ok(ParamMask {
            template,
            free,
            maps,
            free_names,
        })
    }

    fn embed(&self, free_values: &[f64]) -> Vec<f64> {
        let mut full = self.template.clone();
        for ((&slot, &map), &v) in self.free.iter().zip(&self.maps).zip(free_values) {
            full[slot] = match map {
                CoordMap::Direct => v,
                CoordMap::NegExp => -v.exp(),
            };
        }
        full
    }

    fn start(&self) -> Vec<f64> {
        self.free
            .iter()
            .zip(&self.maps)
            .map(|(&i, &map)| match map {
                CoordMap::Direct => self.template[i],
                CoordMap::NegExp => (-self.template[i]).ln(),
            })
            .collect()
    }
}

pub struct FitOutcome {
    pub model: WarpedGpModel,
    pub result: OptResult,
    pub chain: Option<McmcChain>,
    /// Names of the optimized (free) coordinates.
    pub names: Vec<String>,
}

/// Fits `model0`'s free hyperparameters with the configured method.
/// `train_warping = false` freezes the warping parameters (baseline GP).
pub fn fit_with_method(
    cfg: &ExperimentConfig,
    model0: &WarpedGpModel,
    train_warping: bool,
    method: OptMethod,
) -> Result<FitOutcome, CliError> {
    let mask = ParamMask::new(
        model0,
        train_warping,
        &cfg.optimizer.freeze,
        &cfg.optimizer.constrain_negative,
    )?;
    let base = model0.nll_objective();
    let objective = |theta: &[f64]| base(&mask.embed(theta));
    let x0 = mask.start();
    let opt = &cfg.optimizer;

    let (result, chain) = match method {
        OptMethod::Bfgs => (bfgs_minimize(&objective, &x0, opt.tol, opt.max_iter)?, None),
        OptMethod::Powell => (
            powell_minimize(&objective, &x0, opt.tol, opt.max_iter)?,
            None,
        ),
        OptMethod::BfgsPowell => (
            bfgs_powell(&objective, &x0, opt.rounds, opt.tol, opt.max_iter)?,
            None,
        ),
        OptMethod::Mcmc => {
            let settings = cfg
                .mcmc
                .as_ref()
                .ok_or_else(|| CliError::Config("[mcmc] section required".into()))?;
            let (center, warm_evals) = if settings.warm_start {
                let warm = bfgs_powell(&objective, &x0, opt.rounds, opt.tol, opt.max_iter)?;
                (warm.best_params, warm.evals)
            } else {
                (x0.clone(), 0)
            };
            // minimizers may park coordinates outside the flat-prior box;
            // pull the cloud center back inside so walkers can start
            let margin = 2.0 * settings.init_radius;
            let center: Vec<f64> = center
                .iter()
                .map(|&v| {
                    v.clamp(
                        -(DEFAULT_PRIOR_BOUND - margin),
                        DEFAULT_PRIOR_BOUND - margin,
                    )
                })
                .collect();
            let log_prob = flat_prior_log_prob(&objective, DEFAULT_PRIOR_BOUND);
            let chain = ensemble_mcmc(
                log_prob,
                &InitBall {
                    center,
                    radius: vec![settings.init_radius; mask.free.len()],
                },
                &McmcConfig {
                    walkers: settings.walkers,
                    steps: settings.steps,
                    stretch: settings.stretch,
                    seed: cfg.seed,
                },
            )?;
            let (map, map_lp) = chain.map_sample();
            // best negative log-posterior seen up to each sweep
            let mut trajectory = Vec::with_capacity(chain.steps());
            let mut best = f64::INFINITY;
            for step in 0..chain.steps() {
                for walker in 0..chain.walkers() {
                    best = best.min(-chain.log_prob(step, walker));
                }
                trajectory.push(TrajectoryPoint {
                    iteration: step,
                    value: best,
                });
            }
            let result = OptResult {
                best_params: map.to_vec(),
                best_value: -map_lp,
                trajectory,
                termination: Termination::MaxIterations,
                evals: warm_evals + chain.walkers() * (chain.steps() + 1),
            };
            (result, Some(chain))
        }
    };

    let full = mask.embed(&result.best_params);
    let model = model0.with_unconstrained_params(&full)?;
    Ok(FitOutcome {
        model,
        result,
        chain,
        names: mask.free_names,
    })
}

pub fn fit(
    cfg: &ExperimentConfig,
    model0: &WarpedGpModel,
    train_warping: bool,
) -> Result<FitOutcome, CliError> {
    fit_with_method(cfg, model0, train_warping, cfg.optimizer.method)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("create {}: {e}", dir.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn write_trajectory_csv(path: &Path, result: &OptResult) -> Result<(), CliError> {
    let mut out = String::from("iteration,value\n");
    for p in &result.trajectory {
        out.push_str(&format!("{},{}\n", p.iteration, p.value));
    }
    write_bytes(path, out.as_bytes())
}

#[derive(Serialize)]
struct FitReport<'a> {
    method: &'a str,
    seed: u64,
    config_hash: &'a str,
    n_train: usize,
    n_params: usize,
    final_nll: f64,
    evals: usize,
    termination: Termination,
}

fn method_name(method: OptMethod) -> &'static str {
    match method {
        OptMethod::Bfgs => "bfgs",
        OptMethod::Powell => "powell",
        OptMethod::BfgsPowell => "bfgs-powell",
        OptMethod::Mcmc => "mcmc",
    }
}

/// `fit`: trains the configured model and writes `model.json`,
/// `trajectory.csv`, and `fit_report.json` (plus chain artifacts when the
/// method is MCMC) under the output directory.
pub fn cmd_fit(
    cfg: &ExperimentConfig,
    config_dir: &Path,
    config_hash: &str,
) -> Result<FitOutcome, CliError> {
    let started = std::time::Instant::now();
    let series = load_series(cfg, config_dir)?;
    let split = run_split(cfg, &series)?;
    let warping = Warping::compose(cfg.warping.clone())
        .map_err(|e| CliError::Config(format!("warping: {e}")))?;
    let model0 = build_initial_model(cfg, warping, &split.train)?;
    let outcome = fit(cfg, &model0, true)?;

    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    write_json(&dir.join("model.json"), &outcome.model)?;
    write_trajectory_csv(&dir.join("trajectory.csv"), &outcome.result)?;
    let nll = outcome.model.nll()?;
    write_json(
        &dir.join("fit_report.json"),
        &FitReport {
            method: method_name(cfg.optimizer.method),
            seed: cfg.seed,
            config_hash,
            n_train: split.train.len(),
            n_params: outcome.names.len(),
            final_nll: nll,
            evals: outcome.result.evals,
            termination: outcome.result.termination,
        },
    )?;
    if let Some(chain) = &outcome.chain {
        write_chain_artifacts(cfg, config_hash, dir, chain, &outcome)?;
    }
    eprintln!(
        "fit: nll {nll:.4} after {} evaluations in {:.2?}",
        outcome.result.evals,
        started.elapsed()
    );
    Ok(outcome)
}

/// `predict`: loads a fitted model file and writes the predictive summary
/// for the requested inputs.
pub fn cmd_predict(
    model_path: &Path,
    t_test: &[f64],
    percentile: f64,
    gh_points: usize,
    format: OutputFormat,
    out_dir: &Path,
) -> Result<bcgp::PredictiveSummary, CliError> {
    let model = load_model(model_path)?;
    let summary = model.predict(t_test, percentile, gh_points).map_err(|e| {
        // locate the input responsible so the report names it
        for &t in t_test {
            if let Err(pe) = model.predict(&[t], percentile, gh_points) {
                return CliError::Numeric(format!("predict at t = {t}: {pe}"));
            }
        }
        CliError::Numeric(format!("predict: {e}"))
    })?;
    ensure_dir(out_dir)?;
    match format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            summary
                .write_csv(&mut buf)
                .map_err(|e| CliError::Io(format!("encode predictions: {e}")))?;
            write_bytes(&out_dir.join("predictions.csv"), &buf)?;
        }
        OutputFormat::Json => write_json(&out_dir.join("predictions.json"), &summary)?,
    }
    Ok(summary)
}

pub fn load_model(path: &Path) -> Result<WarpedGpModel, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("parse {}: {e}", path.display())))
}

/// One row of the evaluation report.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreBlock {
    pub model: String,
    pub regime: String,
    pub mae: f64,
    pub mse: f64,
    pub nlpd: f64,
    pub nll: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub config_hash: String,
}

fn score_model(
    model: &WarpedGpModel,
    test: &TimeSeries,
    percentile: f64,
    gh_points: usize,
) -> Result<Scores, CliError> {
    let pred = model.predict(test.timestamps(), percentile, gh_points)?;
    let medians: Vec<f64> = pred.points.iter().map(|p| p.median).collect();
    let log_densities = model.predictive_log_densities(test.timestamps(), test.values())?;
    Ok(score(test.values(), &medians, &log_densities)?)
}

/// `evaluate`: split -> fit -> predict -> score for the baseline GP
/// (identity warping, warping parameters frozen) and the configured warped
/// model, over the reconstruction and (when present) forecast sets.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    config_dir: &Path,
    config_hash: &str,
) -> Result<Vec<ScoreBlock>, CliError> {
    let started = std::time::Instant::now();
    let series = load_series(cfg, config_dir)?;
    let split = run_split(cfg, &series)?;
    let configured = Warping::compose(cfg.warping.clone())
        .map_err(|e| CliError::Config(format!("warping: {e}")))?;

    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let mut blocks = Vec::new();
    for (label, warping, train_warping) in [
        ("gp", Warping::identity(), false),
        ("bcgp", configured, true),
    ] {
        let stage = |e: CliError| match e {
            CliError::Numeric(m) => CliError::Numeric(format!("{label}: {m}")),
            other => other,
        };
        let model0 = build_initial_model(cfg, warping, &split.train).map_err(stage)?;
        let outcome = fit(cfg, &model0, train_warping).map_err(stage)?;
        let nll = outcome
            .model
            .nll()
            .map_err(|e| CliError::Numeric(format!("{label}: {e}")))?;

        write_json(&dir.join(format!("{label}_model.json")), &outcome.model)?;
        let bands = outcome
            .model
            .predict(
                series.timestamps(),
                cfg.predict.percentile,
                cfg.predict.gh_points,
            )
            .map_err(|e| CliError::Numeric(format!("{label} bands: {e}")))?;
        let mut buf = Vec::new();
        bands
            .write_csv(&mut buf)
            .map_err(|e| CliError::Io(format!("encode bands: {e}")))?;
        write_bytes(&dir.join(format!("{label}_predictions.csv")), &buf)?;

        for (regime, test) in [
            ("reconstruction", &split.test_reconstruct),
            ("forecast", &split.test_forecast),
        ] {
            if test.is_empty() {
                continue;
            }
            let scores = score_model(
                &outcome.model,
                test,
                cfg.predict.percentile,
                cfg.predict.gh_points,
            )
            .map_err(|e| match e {
                CliError::Numeric(m) => CliError::Numeric(format!("{label}/{regime}: {m}")),
                other => other,
            })?;
            blocks.push(ScoreBlock {
                model: label.to_string(),
                regime: regime.to_string(),
                mae: scores.mae,
                mse: scores.mse,
                nlpd: scores.nlpd,
                nll,
                n_train: split.train.len(),
                n_test: test.len(),
                seed: cfg.seed,
                config_hash: config_hash.to_string(),
            });
        }
    }
    write_json(&dir.join("scores.json"), &blocks)?;
    eprintln!(
        "evaluate: {} score blocks in {:.2?}",
        blocks.len(),
        started.elapsed()
    );
    Ok(blocks)
}

#[derive(Serialize)]
struct ChainMeta<'a> {
    seed: u64,
    walkers: usize,
    steps: usize,
    stretch: f64,
    burn_in: f64,
    init_radius: f64,
    warm_start: bool,
    parameter_names: &'a [String],
    config_hash: &'a str,
}

#[derive(Serialize)]
struct NamedParamSummary<'a> {
    name: &'a str,
    #[serde(flatten)]
    stats: bcgp::ParamSummary,
}

#[derive(Serialize)]
struct NamedValue<'a> {
    name: &'a str,
    unconstrained: f64,
    natural: f64,
}

#[derive(Serialize)]
struct ChainReport<'a> {
    parameters: Vec<NamedParamSummary<'a>>,
    map_log_prob: f64,
    map_parameters: Vec<NamedValue<'a>>,
    mean_acceptance: f64,
    burn_in_fraction: f64,
    pooled_samples: usize,
}

fn write_chain_artifacts(
    cfg: &ExperimentConfig,
    config_hash: &str,
    dir: &Path,
    chain: &McmcChain,
    outcome: &FitOutcome,
) -> Result<(), CliError> {
    let settings = cfg
        .mcmc
        .as_ref()
        .ok_or_else(|| CliError::Config("[mcmc] section required".into()))?;

    let mut buf = Vec::new();
    chain
        .write_csv(&mut buf, &outcome.names)
        .map_err(|e| CliError::Io(format!("encode chain: {e}")))?;
    write_bytes(&dir.join("chain.csv"), &buf)?;

    write_json(
        &dir.join("chain_meta.json"),
        &ChainMeta {
            seed: cfg.seed,
            walkers: settings.walkers,
            steps: settings.steps,
            stretch: settings.stretch,
            burn_in: settings.burn_in,
            init_radius: settings.init_radius,
            warm_start: settings.warm_start,
            parameter_names: &outcome.names,
            config_hash,
        },
    )?;

    let summary = chain_summary(chain, settings.burn_in)?;
    let fitted_natural = outcome.model.natural_params();
    let space = outcome.model.param_space();
    let natural_by_name: std::collections::HashMap<&str, f64> =
        space.names().zip(fitted_natural.iter().copied()).collect();
    let report = ChainReport {
        parameters: outcome
            .names
            .iter()
            .zip(&summary.params)
            .map(|(name, stats)| NamedParamSummary {
                name,
                stats: *stats,
            })
            .collect(),
        map_log_prob: summary.map_log_prob,
        map_parameters: outcome
            .names
            .iter()
            .zip(&summary.map_params)
            .map(|(name, &unconstrained)| NamedValue {
                name,
                unconstrained,
                natural: natural_by_name
                    .get(name.as_str())
                    .copied()
                    .unwrap_or(f64::NAN),
            })
            .collect(),
        mean_acceptance: summary.mean_acceptance,
        burn_in_fraction: summary.burn_in_fraction,
        pooled_samples: summary.pooled_samples,
    };
    write_json(&dir.join("chain_summary.json"), &report)?;

    // scatter data for log-probability against each parameter
    let mut out = String::from("logp");
    for name in &outcome.names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (sample, logp) in chain.pooled(settings.burn_in) {
        out.push_str(&logp.to_string());
        for v in sample {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    write_bytes(&dir.join("scatter.csv"), out.as_bytes())?;
    Ok(())
}

/// `mcmc`: posterior exploration of the configured model's
/// hyperparameters; persists the chain, its summary, scatter data, and the
/// maximum-log-probability model.
pub fn cmd_mcmc(
    cfg: &ExperimentConfig,
    config_dir: &Path,
    config_hash: &str,
) -> Result<FitOutcome, CliError> {
    let started = std::time::Instant::now();
    if cfg.mcmc.is_none() {
        return Err(CliError::Config("[mcmc] section required".into()));
    }
    let series = load_series(cfg, config_dir)?;
    let split = run_split(cfg, &series)?;
    let warping = Warping::compose(cfg.warping.clone())
        .map_err(|e| CliError::Config(format!("warping: {e}")))?;
    let model0 = build_initial_model(cfg, warping, &split.train)?;
    let outcome = fit_with_method(cfg, &model0, true, OptMethod::Mcmc)?;

    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    write_json(&dir.join("map_model.json"), &outcome.model)?;
    let chain = outcome.chain.as_ref().expect("mcmc produces a chain");
    write_chain_artifacts(cfg, config_hash, dir, chain, &outcome)?;
    eprintln!(
        "mcmc: map -logp {:.4}, mean acceptance {:.3}, in {:.2?}",
        outcome.result.best_value,
        chain.acceptance_rates().iter().sum::<f64>() / chain.walkers() as f64,
        started.elapsed()
    );
    Ok(outcome)
}

/// `sample`: posterior path draws from a fitted model file.
pub fn cmd_sample(
    model_path: &Path,
    t_test: &[f64],
    n_paths: usize,
    seed: u64,
    format: OutputFormat,
    out_dir: &Path,
) -> Result<Vec<Vec<f64>>, CliError> {
    if n_paths == 0 {
        return Err(CliError::Config("--paths must be >= 1".into()));
    }
    let model = load_model(model_path)?;
    let paths = model
        .sample_paths(t_test, n_paths, seed)
        .map_err(|e| CliError::Numeric(format!("sample: {e}")))?;
    ensure_dir(out_dir)?;
    match format {
        OutputFormat::Csv => {
            let mut out = String::from("t");
            for i in 0..n_paths {
                out.push_str(&format!(",path_{i}"));
            }
            out.push('\n');
            for (j, &t) in t_test.iter().enumerate() {
                out.push_str(&t.to_string());
                for path in &paths {
                    out.push(',');
                    out.push_str(&path[j].to_string());
                }
                out.push('\n');
            }
            write_bytes(&out_dir.join("samples.csv"), out.as_bytes())?;
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct SampleFile<'a> {
                t: &'a [f64],
                seed: u64,
                paths: &'a [Vec<f64>],
            }
            write_json(
                &out_dir.join("samples.json"),
                &SampleFile {
                    t: t_test,
                    seed,
                    paths: &paths,
                },
            )?;
        }
    }
    Ok(paths)
}

/// Expands `--grid a:b:n` / `--times t1,t2,...` into test inputs.
pub fn parse_inputs(grid: Option<&str>, times: Option<&str>) -> Result<Vec<f64>, CliError> {
    match (grid, times) {
        (Some(spec), None) => {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                return Err(CliError::Config(format!(
                    "--grid expects start:stop:count, got '{spec}'"
                )));
            }
            let start: f64 = parts[0]
                .parse()
                .map_err(|e| CliError::Config(format!("--grid start: {e}")))?;
            let stop: f64 = parts[1]
                .parse()
                .map_err(|e| CliError::Config(format!("--grid stop: {e}")))?;
            let count: usize = parts[2]
                .parse()
                .map_err(|e| CliError::Config(format!("--grid count: {e}")))?;
            if count < 2 || !(stop > start) {
                return Err(CliError::Config(
                    "--grid needs stop > start and count >= 2".into(),
                ));
            }
            Ok((0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect())
        }
        (None, Some(list)) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Config(format!("--times '{s}': {e}")))
            })
            .collect(),
        _ => Err(CliError::Config(
            "provide exactly one of --grid and --times".into(),
        )),
    }
}
