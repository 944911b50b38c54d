use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use evopiezo_core::evolution::{DiscreteSystem, Integrator, SolverOptions};
use evopiezo_core::operators::assemble_a;
use evopiezo_core::quasistatic::build_projector;
use evopiezo_core::solver::BandedLu;
use evopiezo_core::{CoefficientBlock, Grid, LinearOperator, MaterialBlocks, MaterialConfig};

fn grid(n: usize) -> Grid {
    Grid::new([n, n, n], [1.0, 1.0, 1.0]).unwrap()
}

fn system(n: usize) -> DiscreteSystem {
    let g = grid(n);
    let m = MaterialConfig::new(MaterialBlocks::identity(g.cells())).unwrap();
    DiscreteSystem::full(&m, &g).unwrap()
}

fn ramp(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5)
        .collect()
}

fn spatial(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_a");
    for n in [4, 8, 12] {
        let g = grid(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| assemble_a(black_box(g)))
        });
    }
    group.finish();
}

fn banded(c: &mut Criterion) {
    let mut group = c.benchmark_group("banded_lu");
    group.sample_size(10);
    for n in [4, 6] {
        let sys = system(n);
        let lhs = sys
            .m0
            .add(
                &sys.m1
                    .add(&LinearOperator::Sparse(sys.a.clone()))
                    .unwrap()
                    .scale(0.05),
            )
            .unwrap();
        let LinearOperator::Sparse(lhs) = lhs else {
            panic!("identity material gives a sparse operator");
        };
        let order = sys.layout.cell_interleaved_order();
        group.bench_with_input(BenchmarkId::new("factor", n), &lhs, |b, a| {
            b.iter(|| BandedLu::factor(black_box(a), Some(&order)).unwrap())
        });
        let lu = BandedLu::factor(&lhs, Some(&order)).unwrap();
        let rhs = ramp(lu.dim());
        group.bench_with_input(BenchmarkId::new("solve", n), &rhs, |b, r| {
            b.iter(|| lu.solve(black_box(r)))
        });
    }
    group.finish();
}

fn integrator(c: &mut Criterion) {
    let mut group = c.benchmark_group("theta_step");
    for n in [4, 6] {
        let sys = system(n);
        let integ = Integrator::new(&sys, 0.01, 0.5, SolverOptions::default()).unwrap();
        let u = ramp(sys.layout.dim());
        let f = vec![0.0; u.len()];
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| integ.step(black_box(&u), &f).unwrap())
        });
    }
    group.finish();
}

fn projector(c: &mut Criterion) {
    let mut group = c.benchmark_group("projector_apply");
    for n in [3, 5] {
        let g = grid(n);
        let p = build_projector(&g, &CoefficientBlock::scalar_identity(g.cells(), 3, 1.5)).unwrap();
        let x = ramp(3 * g.cells());
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| p.apply(black_box(&x)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, spatial, banded, integrator, projector);
criterion_main!(benches);
