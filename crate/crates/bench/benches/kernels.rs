use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use ymlab::equivariant::curvature_closed_form;
use ymlab::flow::{step, FlowState, SolverCfg};
use ymlab::functionals::f_shrinker;
use ymlab::tensor_core::curvature_at;
use ymlab::{Basepoint, EquivariantConnection, FdScheme, NormalizationConvention, QuadratureSpec};

fn curvature(c: &mut Criterion) {
    let mut g = c.benchmark_group("curvature");
    for n in [5, 9] {
        let conn = EquivariantConnection::gastel(n).unwrap();
        let x: Vec<f64> = (0..n).map(|k| 0.3 + 0.1 * k as f64).collect();
        let s = FdScheme::default();
        g.bench_with_input(BenchmarkId::new("finite_difference", n), &x, |b, x| {
            b.iter(|| curvature_at(&conn, black_box(x), &s).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("closed_form", n), &x, |b, x| {
            b.iter(|| curvature_closed_form(&conn, black_box(x)))
        });
    }
    g.finish();
}

fn shrinker(c: &mut Criterion) {
    let mut g = c.benchmark_group("f_shrinker");
    let conn = EquivariantConnection::gastel(5).unwrap();
    let q = QuadratureSpec::default();
    for (label, bp) in [("origin", Basepoint::origin()), ("moved", Basepoint::new(0.7, 1.3).unwrap())] {
        g.bench_function(label, |b| {
            b.iter(|| f_shrinker(&conn, black_box(&bp), &q, NormalizationConvention::A).unwrap())
        });
    }
    g.finish();
}

fn flow_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("flow_step");
    for dr in [0.04, 0.02] {
        let state = FlowState::gastel(5, dr, 30.0, -1.0).unwrap();
        let cfg = SolverCfg::new(5);
        g.bench_with_input(BenchmarkId::new("rk4", dr), &state, |b, st| b.iter(|| step(black_box(st), &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, curvature, shrinker, flow_step);
criterion_main!(benches);
