use criterion::{black_box, criterion_group, criterion_main, Criterion};

use neveu_core::{path_rng, run_path, step, ModelParams, SimScheme};

fn bench_simulator(c: &mut Criterion) {
    let params = ModelParams::neveu();
    let scheme = SimScheme::defaults(params.r());

    c.bench_function("step x=1 dt=1e-3", |b| {
        let mut rng = path_rng(1, 0);
        b.iter(|| step(black_box(1.0), 1e-3, &params, &scheme, &mut rng))
    });

    c.bench_function("run_path neveu (0.5, 2)", |b| {
        let mut stream = 0u64;
        b.iter(|| {
            stream = stream.wrapping_add(1);
            run_path(1.0, 0.5, 2.0, &params, &scheme, 42, stream).unwrap()
        })
    });

    let heavy = ModelParams::new(3.0, 0.0, 1.0).unwrap();
    let mut adaptive = SimScheme::defaults(1.0);
    adaptive.eps_state_frac = Some(1e-3);
    adaptive.t_max = 1.0;
    c.bench_function("run_path comedown beta=3 from 1e3", |b| {
        let mut stream = 0u64;
        b.iter(|| {
            stream = stream.wrapping_add(1);
            run_path(1e3, 10.0, f64::INFINITY, &heavy, &adaptive, 7, stream).unwrap()
        })
    });
}

criterion_group!(benches, bench_simulator);
criterion_main!(benches);
