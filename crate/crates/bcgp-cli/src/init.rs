//! Data-driven model initialization.
//!
//! Spectral-mixture frequencies are seeded from the top-Q peaks of a
//! periodogram of the (warped) training data, weights from the signal
//! variance, and bandwidths from the frequency resolution of the record.
//! The constant mean starts at the sample mean of the warped observations
//! and the noise variance at a tenth of their variance.

use bcgp::{Kernel, MeanFunction, SmComponent, TimeSeries, WarpedGpModel, Warping};

use crate::config::{ExperimentConfig, KernelKind, MeanKind};
use crate::error::CliError;

const PERIODOGRAM_GRID: usize = 2048;
const MIN_NOISE_INIT: f64 = 1e-6;

/// Schuster periodogram on (possibly irregular) sample times:
/// `P(f) = |sum_j (x_j - mean) exp(-2 pi i f t_j)|^2 / n`.
fn periodogram(t: &[f64], x: &[f64], freqs: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    freqs
        .iter()
        .map(|&f| {
            let omega = 2.0 * std::f64::consts::PI * f;
            let (mut c, mut s) = (0.0, 0.0);
            for (&ti, &xi) in t.iter().zip(x) {
                let centered = xi - mean;
                c += centered * (omega * ti).cos();
                s += centered * (omega * ti).sin();
            }
            (c * c + s * s) / n
        })
        .collect()
}

/// Frequencies of the top-`q` periodogram peaks (local maxima, highest
/// power first). Fills with evenly spaced frequencies when the spectrum
/// has fewer usable peaks.
pub fn spectral_mixture_init(t: &[f64], x: &[f64], q: usize) -> Vec<SmComponent> {
    let span = t.last().unwrap() - t.first().unwrap();
    let mut gaps: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_gap = gaps[gaps.len() / 2].max(1e-12);
    let f_max = 0.5 / median_gap;

    let freqs: Vec<f64> = (1..=PERIODOGRAM_GRID)
        .map(|i| f_max * i as f64 / PERIODOGRAM_GRID as f64)
        .collect();
    let power = periodogram(t, x, &freqs);

    let mut peaks: Vec<(f64, f64)> = (1..freqs.len() - 1)
        .filter(|&i| power[i] > power[i - 1] && power[i] >= power[i + 1])
        .map(|i| (power[i], freqs[i]))
        .collect();
    peaks.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).max(1e-12);
    let bandwidth = (1.0 / span.max(1e-12)).powi(2);

    let mut components = Vec::with_capacity(q);
    for (_, f) in peaks.iter().take(q) {
        components.push(SmComponent {
            weight: var / q as f64,
            frequency: *f,
            variance: bandwidth,
        });
    }
    let mut fill = 1;
    while components.len() < q {
        components.push(SmComponent {
            weight: var / q as f64,
            frequency: f_max * fill as f64 / (q + 1) as f64,
            variance: bandwidth,
        });
        fill += 1;
    }
    components
}

/// Builds the initial model for a training series under the given warping:
/// explicit config values where present, data-driven defaults elsewhere.
pub fn build_initial_model(
    cfg: &ExperimentConfig,
    warping: Warping,
    train: &TimeSeries,
) -> Result<WarpedGpModel, CliError> {
    if train.len() < 2 {
        return Err(CliError::Config(format!(
            "need at least 2 training points, got {}",
            train.len()
        )));
    }
    let warped = warping
        .forward_all(train.values())
        .map_err(|e| CliError::Numeric(format!("warping the training data: {e}")))?;
    let n = warped.len() as f64;
    let warped_mean = warped.iter().sum::<f64>() / n;
    let warped_var = (warped
        .iter()
        .map(|v| (v - warped_mean) * (v - warped_mean))
        .sum::<f64>()
        / n)
        .max(1e-12);

    let kernel = match cfg.kernel.kind {
        KernelKind::SpectralMixture => {
            let q = cfg.kernel.components.unwrap_or(2);
            let components = match cfg.kernel.init.as_ref().and_then(|i| i.components.clone()) {
                Some(c) => c,
                None => spectral_mixture_init(train.timestamps(), &warped, q),
            };
            Kernel::SpectralMixture { components }
        }
        KernelKind::SquaredExponential => {
            let span = train.timestamps().last().unwrap() - train.timestamps().first().unwrap();
            let init = cfg.kernel.init.as_ref();
            Kernel::SquaredExponential {
                variance: init.and_then(|i| i.variance).unwrap_or(warped_var),
                lengthscale: init
                    .and_then(|i| i.lengthscale)
                    .unwrap_or((span / 10.0).max(1e-6)),
            }
        }
    };

    let mean = match cfg.mean.kind {
        MeanKind::Zero => MeanFunction::Zero,
        MeanKind::Constant => MeanFunction::Constant {
            value: cfg.mean.value.unwrap_or(warped_mean),
        },
    };

    let noise_variance = cfg
        .noise
        .variance
        .unwrap_or(0.1 * warped_var)
        .max(MIN_NOISE_INIT);

    WarpedGpModel::new(
        warping,
        mean,
        kernel,
        noise_variance,
        train.timestamps().to_vec(),
        train.values().to_vec(),
    )
    .map_err(CliError::from)
}
