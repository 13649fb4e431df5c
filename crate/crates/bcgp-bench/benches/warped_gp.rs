//! Hot-path benchmarks: the closed-form inverse against Newton-Raphson
//! (the prediction-cost argument for analytic warpings), Gauss-Hermite
//! moment evaluation through both inverses, and the training NLL.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use bcgp::{invert_numeric, GaussHermite, Warping};
use bcgp_bench::{experiment_sized_model, inversion_queries, three_stage_warping};

fn bench_inversion(c: &mut Criterion) {
    let w = three_stage_warping();
    let xs = inversion_queries(1000, 42);

    let mut group = c.benchmark_group("inverse_1e3_points");
    group.bench_function("analytic", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for &x in &xs {
                acc += w.inverse(black_box(x)).unwrap();
            }
            black_box(acc)
        })
    });
    group.bench_function("newton_raphson", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for &x in &xs {
                acc += invert_numeric(&w, black_box(x), 1e-10, 200).unwrap();
            }
            black_box(acc)
        })
    });
    group.finish();
}

fn gh_mean_via(w: &Warping, quad: &GaussHermite, m: f64, v: f64, analytic: bool) -> f64 {
    quad.try_expect_gaussian(m, v, |_, x| {
        if analytic {
            w.inverse(x)
        } else {
            invert_numeric(w, x, 1e-10, 200)
        }
    })
    .unwrap()
}

fn bench_gh_moments(c: &mut Criterion) {
    let w = three_stage_warping();
    let quad = GaussHermite::new(20);

    let mut group = c.benchmark_group("gh_mean_20_nodes");
    group.bench_function("analytic_inverse", |b| {
        b.iter(|| black_box(gh_mean_via(&w, &quad, black_box(1.2), 0.4, true)))
    });
    group.bench_function("newton_inverse", |b| {
        b.iter(|| black_box(gh_mean_via(&w, &quad, black_box(1.2), 0.4, false)))
    });
    group.finish();
}

fn bench_nll(c: &mut Criterion) {
    let model = experiment_sized_model();
    c.bench_function("warped_nll_131_points", |b| {
        b.iter(|| black_box(model.nll().unwrap()))
    });
}

criterion_group!(benches, bench_inversion, bench_gh_moments, bench_nll);
criterion_main!(benches);
