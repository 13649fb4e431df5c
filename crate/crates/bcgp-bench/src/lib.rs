//! Shared fixtures for the benchmark targets.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bcgp::{Kernel, MeanFunction, SmComponent, Stage, WarpedGpModel, Warping};

/// Three-stage composition used by the inversion benchmarks.
pub fn three_stage_warping() -> Warping {
    Warping::compose(vec![
        Stage::BoxCox { lambda: 0.5 },
        Stage::Affine {
            shift: 1.0,
            scale: 2.0,
        },
        Stage::BoxCox { lambda: 2.0 },
    ])
    .unwrap()
}

/// Warped-space query points with known preimages under the three-stage
/// composition.
pub fn inversion_queries(n: usize, seed: u64) -> Vec<f64> {
    let w = three_stage_warping();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| w.forward(rng.random_range(-3.0..3.0)).unwrap())
        .collect()
}

/// A trained-shape model of the size used by the yearly-series experiment:
/// 131 training points under a two-component spectral mixture.
pub fn experiment_sized_model() -> WarpedGpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t: Vec<f64> = (0..131).map(|i| 1700.0 + 2.0 * i as f64).collect();
    let y: Vec<f64> = t
        .iter()
        .map(|&ti| {
            let cycle = (2.0 * std::f64::consts::PI * ti / 11.0).sin();
            (50.0 + 40.0 * cycle + rng.random_range(-5.0..5.0)).max(0.0)
        })
        .collect();
    WarpedGpModel::new(
        Warping::compose(vec![
            Stage::Affine {
                shift: 1.0,
                scale: 1.0,
            },
            Stage::BoxCox { lambda: 0.5 },
        ])
        .unwrap(),
        MeanFunction::Constant { value: 10.0 },
        Kernel::SpectralMixture {
            components: vec![
                SmComponent {
                    weight: 50.0,
                    frequency: 0.09,
                    variance: 1e-5,
                },
                SmComponent {
                    weight: 20.0,
                    frequency: 0.02,
                    variance: 1e-5,
                },
            ],
        },
        4.0,
        t,
        y,
    )
    .unwrap()
}
