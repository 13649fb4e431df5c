//! Affine-invariant ensemble sampler with the stretch move.
//!
//! K coupled walkers explore the target in two half-ensembles: each walker
//! of one half proposes `x_j + z (x_k - x_j)` toward a partner `x_k` drawn
//! from the frozen other half, with `z ~ g(z) ∝ 1/sqrt(z)` on `[1/a, a]`
//! and acceptance `min(1, z^{n-1} exp(dlogp))`. All randomness is drawn
//! before any evaluation, in a fixed order, so results are bit-identical
//! regardless of evaluation parallelism.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::OptimizeError;

/// Box half-width of the flat prior over unconstrained coordinates; keeps
/// the chain proper without shaping the posterior.
pub const DEFAULT_PRIOR_BOUND: f64 = 30.0;

/// Wraps a negative-log-likelihood as the log-probability of a flat prior
/// restricted to the box `|theta_j| <= bound`; failures map to -inf.
pub fn flat_prior_log_prob<F>(nll: F, bound: f64) -> impl Fn(&[f64]) -> f64 + Sync
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    move |theta: &[f64]| {
        if theta.iter().any(|v| !v.is_finite() || v.abs() > bound) {
            return f64::NEG_INFINITY;
        }
        let v = nll(theta);
        if v.is_finite() {
            -v
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McmcConfig {
    /// Walker count K; even and at least `2 n + 2`.
    pub walkers: usize,
    /// Recorded ensemble sweeps.
    pub steps: usize,
    /// Stretch parameter `a`.
    pub stretch: f64,
    pub seed: u64,
}

/// Initial walker cloud: independent Gaussian perturbations of `center`
/// with per-coordinate standard deviation `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitBall {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
}

/// Ensemble trajectories: `steps x walkers x dim` samples with their
/// log-probabilities and per-walker acceptance rates.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcChain {
    dim: usize,
    walkers: usize,
    steps: usize,
    stretch: f64,
    seed: u64,
    samples: Vec<f64>,
    log_probs: Vec<f64>,
    acceptance: Vec<f64>,
}

impl McmcChain {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn walkers(&self) -> usize {
        self.walkers
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample(&self, step: usize, walker: usize) -> &[f64] {
        let base = (step * self.walkers + walker) * self.dim;
        &self.samples[base..base + self.dim]
    }

    pub fn log_prob(&self, step: usize, walker: usize) -> f64 {
        self.log_probs[step * self.walkers + walker]
    }

    pub fn acceptance_rates(&self) -> &[f64] {
        &self.acceptance
    }

    /// The stored sample with the highest log-probability.
    pub fn map_sample(&self) -> (&[f64], f64) {
        let (idx, &lp) = self
            .log_probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("chain is nonempty");
        let base = idx * self.dim;
        (&self.samples[base..base + self.dim], lp)
    }

    /// Iterates over `(sample, log_prob)` pooled across walkers, skipping
    /// the first `floor(steps * burn_in_fraction)` sweeps.
    pub fn pooled(&self, burn_in_fraction: f64) -> impl Iterator<Item = (&[f64], f64)> {
        let start = (self.steps as f64 * burn_in_fraction).floor() as usize;
        let walkers = self.walkers;
        let dim = self.dim;
        (start * walkers..self.steps * walkers).map(move |idx| {
            let base = idx * dim;
            (&self.samples[base..base + dim], self.log_probs[idx])
        })
    }

    /// Writes the chain as CSV: `step,walker,logp,<name_0>,...`.
    pub fn write_csv<W: std::io::Write>(
        &self,
        writer: W,
        names: &[String],
    ) -> Result<(), csv::Error> {
        assert_eq!(names.len(), self.dim, "one column name per dimension");
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["step".to_string(), "walker".to_string(), "logp".to_string()];
        header.extend_from_slice(names);
        out.write_record(&header)?;
        for step in 0..self.steps {
            for walker in 0..self.walkers {
                let mut record = vec![
                    step.to_string(),
                    walker.to_string(),
                    self.log_prob(step, walker).to_string(),
                ];
                record.extend(self.sample(step, walker).iter().map(|v| v.to_string()));
                out.write_record(&record)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs the sampler. `log_prob` must be pure and reentrant: each
/// half-ensemble's proposals are evaluated concurrently against the frozen
/// other half.
pub fn ensemble_mcmc<F>(
    log_prob: F,
    init: &InitBall,
    config: &McmcConfig,
) -> Result<McmcChain, OptimizeError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = init.center.len();
    if dim == 0 {
        return Err(OptimizeError::InvalidArgument(
            "empty parameter vector".into(),
        ));
    }
    if init.radius.len() != dim {
        return Err(OptimizeError::InvalidArgument(format!(
            "radius has {} entries for dimension {dim}",
            init.radius.len()
        )));
    }
    let k = config.walkers;
    if k % 2 != 0 || k < 2 * dim + 2 {
        return Err(OptimizeError::InvalidArgument(format!(
            "walker count must be even and >= 2n + 2 = {}, got {k}",
            2 * dim + 2
        )));
    }
    if config.steps == 0 {
        return Err(OptimizeError::InvalidArgument("steps must be >= 1".into()));
    }
    if !(config.stretch > 1.0) {
        return Err(OptimizeError::InvalidArgument(format!(
            "stretch parameter must exceed 1, got {}",
            config.stretch
        )));
    }

    let clamp = |v: f64| if v.is_finite() { v } else { f64::NEG_INFINITY };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // initial cloud
    let mut positions: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..dim)
                .map(|j| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    init.center[j] + init.radius[j] * z
                })
                .collect()
        })
        .collect();
    let mut log_probs: Vec<f64> = positions.iter().map(|x| clamp(log_prob(x))).collect();
    if log_probs.iter().all(|lp| *lp == f64::NEG_INFINITY) {
        return Err(OptimizeError::NoFiniteWalker);
    }

    let half = k / 2;
    let a = config.stretch;
    let mut accepted = vec![0usize; k];
    let mut samples = Vec::with_capacity(config.steps * k * dim);
    let mut chain_log_probs = Vec::with_capacity(config.steps * k);

    for _ in 0..config.steps {
        for half_idx in 0..2 {
            let mover_base = half_idx * half;
            let frozen_base = (1 - half_idx) * half;

            // all randomness for this half-sweep, in walker order
            let draws: Vec<(usize, f64, f64)> = (0..half)
                .map(|_| {
                    let partner = rng.random_range(0..half);
                    let u: f64 = rng.random();
                    let z = ((a - 1.0) * u + 1.0).powi(2) / a;
                    let ln_accept = rng.random::<f64>().ln();
                    (partner, z, ln_accept)
                })
                .collect();

            let proposals: Vec<(Vec<f64>, f64)> = (0..half)
                .into_par_iter()
                .map(|i| {
                    let (partner, z, _) = draws[i];
                    let mover = &positions[mover_base + i];
                    let other = &positions[frozen_base + partner];
                    let proposal: Vec<f64> = mover
                        .iter()
                        .zip(other)
                        .map(|(xj, xk)| xk + z * (xj - xk))
                        .collect();
                    let lp = clamp(log_prob(&proposal));
                    (proposal, lp)
                })
                .collect();

            for i in 0..half {
                let (_, z, ln_accept) = draws[i];
                let (proposal, lp_new) = &proposals[i];
                let lp_old = log_probs[mover_base + i];
                let ln_q = (dim as f64 - 1.0) * z.ln() + lp_new - lp_old;
                if ln_q > ln_accept {
                    positions[mover_base + i] = proposal.clone();
                    log_probs[mover_base + i] = *lp_new;
                    accepted[mover_base + i] += 1;
                }
            }
        }
        for walker in 0..k {
            samples.extend_from_slice(&positions[walker]);
            chain_log_probs.push(log_probs[walker]);
        }
    }

    let acceptance: Vec<f64> = accepted
        .iter()
        .map(|&n| n as f64 / config.steps as f64)
        .collect();

    Ok(McmcChain {
        dim,
        walkers: k,
        steps: config.steps,
        stretch: a,
        seed: config.seed,
        samples,
        log_probs: chain_log_probs,
        acceptance,
    })
}

/// Per-parameter posterior statistics over the pooled post-burn-in chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub std: f64,
    pub q025: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q975: f64,
}

/// Chain report: per-parameter statistics, the maximum-log-probability
/// sample, and the mean acceptance rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    pub params: Vec<ParamSummary>,
    pub map_params: Vec<f64>,
    pub map_log_prob: f64,
    pub mean_acceptance: f64,
    pub burn_in_fraction: f64,
    pub pooled_samples: usize,
}

/// Summarizes a chain after discarding the leading `burn_in_fraction` of
/// sweeps. The MAP sample is taken over the whole stored chain.
pub fn chain_summary(
    chain: &McmcChain,
    burn_in_fraction: f64,
) -> Result<ChainSummary, OptimizeError> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(OptimizeError::InvalidArgument(format!(
            "burn-in fraction must lie in [0, 1), got {burn_in_fraction}"
        )));
    }
    let pooled: Vec<(&[f64], f64)> = chain.pooled(burn_in_fraction).collect();
    if pooled.is_empty() {
        return Err(OptimizeError::InvalidArgument(
            "no samples remain after burn-in".into(),
        ));
    }
    let n = pooled.len() as f64;
    let dim = chain.dim();
    let mut params = Vec::with_capacity(dim);
    let mut column = Vec::with_capacity(pooled.len());
    for j in 0..dim {
        column.clear();
        column.extend(pooled.iter().map(|(s, _)| s[j]));
        let mean = column.iter().sum::<f64>() / n;
        let var = column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        params.push(ParamSummary {
            mean,
            std: var.sqrt(),
            q025: quantile_sorted(&column, 0.025),
            q25: quantile_sorted(&column, 0.25),
            median: quantile_sorted(&column, 0.5),
            q75: quantile_sorted(&column, 0.75),
            q975: quantile_sorted(&column, 0.975),
        });
    }
    let (map_params, map_log_prob) = chain.map_sample();
    let mean_acceptance = chain.acceptance_rates().iter().sum::<f64>() / chain.walkers() as f64;
    Ok(ChainSummary {
        params,
        map_params: map_params.to_vec(),
        map_log_prob,
        mean_acceptance,
        burn_in_fraction,
        pooled_samples: pooled.len(),
    })
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}
