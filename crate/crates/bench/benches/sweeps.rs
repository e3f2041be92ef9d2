use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use flowsink::{sweep, BlockProblem, DualState};
use flowsink_bench::{sparse_flow, square_ot};

fn flow_paths(c: &mut Criterion) {
    let mut group = c.benchmark_group("flow_sweep");
    for n in [1_000, 4_000, 16_000] {
        let p = sparse_flow(n, 0.1, 7);
        group.throughput(Throughput::Elements(p.graph().num_arcs() as u64));
        let v = vec![0.0; n];
        group.bench_with_input(BenchmarkId::new("stable", n), &v, |b, v| {
            b.iter(|| p.sweep_stable(black_box(v)).unwrap())
        });
        let sigma = vec![1.0; n];
        group.bench_with_input(BenchmarkId::new("scaling", n), &sigma, |b, s| {
            b.iter(|| p.sweep_scaling(black_box(s)).unwrap())
        });
        let h = p.kernel();
        group.bench_with_input(BenchmarkId::new("matrix", n), &h, |b, h| {
            b.iter(|| p.sweep_matrix(black_box(h)).unwrap())
        });
    }
    group.finish();
}

fn ot_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("ot_sweep");
    for m in [32, 128, 512] {
        let p = square_ot(m, 0.05, 3);
        group.throughput(Throughput::Elements(p.dim_primal() as u64));
        let u = DualState::zeros(&p);
        group.bench_with_input(BenchmarkId::from_parameter(m), &u, |b, u| {
            b.iter(|| sweep(&p, black_box(u)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, flow_paths, ot_sweep);
criterion_main!(benches);
