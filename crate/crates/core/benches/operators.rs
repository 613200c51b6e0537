use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sem_ale::exec::Exec;
use sem_ale::mesh::{build_box_mesh, compute_metrics, sine_deform, SineVariant};
use sem_ale::ops::Operators;

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("operators");
    group.sample_size(20);
    for (el, n) in [(4, 8), (8, 10)] {
        let mesh = build_box_mesh(&[-1.0, -1.0], &[1.0, 1.0], &[el, el], n, 2).unwrap();
        let mesh = sine_deform(&mesh, 0.1, SineVariant::Symmetric).unwrap();
        let metrics = compute_metrics(&mesh, Exec::Serial).unwrap();
        let ng = mesh.nglobal();
        let u: Vec<f64> = (0..2 * ng).map(|i| (0.37 * i as f64).sin()).collect();
        let w: Vec<f64> = (0..2 * ng).map(|i| 0.1 * (0.11 * i as f64).cos()).collect();
        let p: Vec<f64> = (0..mesh.num_elements() * (n - 1) * (n - 1)).map(|i| (0.5 * i as f64).cos()).collect();
        let label = format!("E{}xN{n}", el * el);
        for (name, exec) in [("serial", Exec::Serial), ("parallel", Exec::Parallel)] {
            let ops = Operators::new(&mesh, &metrics, exec).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("stiffness/{name}"), &label), &u, |b, u| {
                b.iter(|| ops.stiffness_apply(black_box(u), 1.0))
            });
            group.bench_with_input(BenchmarkId::new(format!("gradient/{name}"), &label), &p, |b, p| {
                b.iter(|| ops.gradient_apply(black_box(p)))
            });
            group.bench_with_input(BenchmarkId::new(format!("convective/{name}"), &label), &u, |b, u| {
                b.iter(|| ops.convective_apply(black_box(u), Some(&w)))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
