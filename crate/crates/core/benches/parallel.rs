//! Parallel against single-threaded execution of the hot kernels.
//!
//! With the default `parallel` feature each kernel runs on the global rayon
//! pool and inside a one-thread pool. Build with `--no-default-features` to
//! measure the plain sequential code path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use std::hint::black_box;
use strongnf::{
    normalize, solve_homological, ExtendedHamiltonian, MultiIndex, NormalizationConfig, PolyXY,
    RegimeConfig, TimeCoeff,
};

fn dense_ly(n: usize, n_trunc: u32) -> PolyXY {
    let mut terms = Vec::new();
    let mut alpha = vec![0u32; n];
    loop {
        let d: u32 = alpha.iter().sum();
        if d >= 2 && d < n_trunc {
            for l in 0..n {
                let mut beta = vec![0; n];
                beta[l] = 1;
                let c = 1.0 / (1.0 + d as f64 + l as f64);
                let coeff = &TimeCoeff::exp(c, -0.5)
                    + &TimeCoeff::monomial(
                        Complex64::new(0.3 * c, 0.0),
                        1,
                        Complex64::new(-0.9, 0.0),
                    );
                terms.push((MultiIndex::new(alpha.clone(), beta).unwrap(), coeff));
            }
        }
        // odometer over alpha in [0, n_trunc)^n
        let mut k = 0;
        while k < n {
            alpha[k] += 1;
            if alpha[k] < n_trunc {
                break;
            }
            alpha[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    PolyXY::from_terms(n, n_trunc, terms).unwrap()
}

fn lambda(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|l| Complex64::new(-1.0 - 0.37 * l as f64, 0.2 * l as f64))
        .collect()
}

fn kernels(c: &mut Criterion, label: &str, run: &dyn Fn(&mut (dyn FnMut() + Send))) {
    let mut group = c.benchmark_group(label);
    group.sample_size(10);
    for (n, n_trunc) in [(2usize, 8u32), (3, 6)] {
        let f = dense_ly(n, n_trunc);
        let lam = lambda(n);
        let regime = RegimeConfig::decay(0.5).unwrap();
        let id = format!("n{n}_N{n_trunc}");
        group.bench_function(BenchmarkId::new("poisson", &id), |b| {
            b.iter(|| {
                run(&mut || {
                    black_box(f.poisson(&f).unwrap());
                })
            })
        });
        group.bench_function(BenchmarkId::new("solve_homological", &id), |b| {
            b.iter(|| {
                run(&mut || {
                    black_box(solve_homological(&f, &lam, &regime).unwrap());
                })
            })
        });
        let h = ExtendedHamiltonian::new(lam.clone(), f.clone()).unwrap();
        let cfg = NormalizationConfig::new(n, n_trunc, 0.1, regime);
        group.bench_function(BenchmarkId::new("normalize", &id), |b| {
            b.iter(|| {
                run(&mut || {
                    black_box(normalize(&h, &cfg).unwrap());
                })
            })
        });
    }
    group.finish();
}

#[cfg(feature = "parallel")]
fn bench(c: &mut Criterion) {
    kernels(c, "rayon_global", &|f| f());
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    kernels(c, "rayon_one_thread", &|f| single.install(f));
}

#[cfg(not(feature = "parallel"))]
fn bench(c: &mut Criterion) {
    kernels(c, "sequential", &|f| f());
}

criterion_group!(benches, bench);
criterion_main!(benches);
