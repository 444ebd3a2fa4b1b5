use cavity_spectra::analysis::{self, SweepConfig};
use cavity_spectra::approx::Method;
use cavity_spectra::eigensolve::{self, ConvergenceOptions};
use cavity_spectra::exec::Execution;
use cavity_spectra::hamiltonian::{Builder, ModelParams};
use cavity_spectra::special_fn::{build_overlap_table_with, DEFAULT_K_MAX};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn overlap_table(c: &mut Criterion) {
    let mut g = c.benchmark_group("overlap_table");
    for size in [128, 512] {
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, size), &size, |b, &size| {
                b.iter(|| build_overlap_table_with(black_box(2.0), size, DEFAULT_K_MAX, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn parity_sectors(c: &mut Criterion) {
    let mut g = c.benchmark_group("parity_sectors");
    let p = ModelParams::new(10, 1.0, 0.5).unwrap();
    let h = Builder::DickeCoulomb.build(&p, 39).unwrap();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, h.dim()), |b| {
            b.iter(|| eigensolve::spectrum_of(black_box(&h), false, exec).unwrap())
        });
    }
    g.finish();
}

fn coupling_sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("coupling_sweep");
    g.sample_size(10);
    let p = ModelParams::new(2, 1.0, 0.0).unwrap();
    let grid = analysis::linspace(0.0, 1.5, 24);
    for (name, exec) in MODES {
        let cfg = SweepConfig {
            methods: vec![Method::Multi0, Method::PairwiseQuad, Method::SecondOrder],
            levels: 6,
            convergence: ConvergenceOptions { n_max_start: 16, ..Default::default() },
            exec,
        };
        g.bench_function(BenchmarkId::new(name, grid.len()), |b| {
            b.iter(|| analysis::sweep(&p, black_box(&grid), &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, overlap_table, parity_sectors, coupling_sweep);
criterion_main!(benches);
