use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use relaxkit::fitting::{
    fit_diffusion, fit_echo, fit_orbach, invert_rate_for_d, EchoModelKind, DEFAULT_D_BRACKET,
};
use relaxkit::mechanisms::{predict_times, spectral_density, DiffusionKernel};
use relaxkit::synth::linspace;
use relaxkit::{NuclearSpecies, RelaxationChannel};
use relaxkit_bench::{diffusion_spec, h_toluene, orbach, stretched_trace, t1_data};

fn spectral(c: &mut Criterion) {
    let zs = linspace(1e-3, 1e3, 1000);
    c.bench_function("spectral_density/1000", |b| {
        b.iter(|| {
            zs.iter()
                .map(|&z| spectral_density(black_box(z)).unwrap())
                .sum::<f64>()
        })
    });
}

fn forward(c: &mut Criterion) {
    let channels = [
        RelaxationChannel::orbach(orbach()),
        RelaxationChannel::TranslationalDiffusion(h_toluene(0.35e-9)),
    ];
    let mut group = c.benchmark_group("predict_times");
    for n in [27usize, 271] {
        let temps = linspace(170.0, 300.0, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &temps, |b, t| {
            b.iter(|| predict_times(black_box(&channels), t).unwrap())
        });
    }
    group.finish();

    let kernel = DiffusionKernel::new(&NuclearSpecies::proton(), 5e28, 0.35e-9, 0.34).unwrap();
    let target = kernel.rates(3e-11).unwrap().r2;
    c.bench_function("invert_rate_for_d", |b| {
        b.iter(|| invert_rate_for_d(black_box(target), &kernel, DEFAULT_D_BRACKET).unwrap())
    });
}

fn fits(c: &mut Criterion) {
    let t1 = t1_data();
    c.bench_function("fit_orbach", |b| {
        b.iter(|| fit_orbach(black_box(&t1), true).unwrap())
    });

    let trace = stretched_trace(0.01);
    let mut group = c.benchmark_group("fit_echo");
    group.bench_function("mono", |b| {
        b.iter(|| fit_echo(&trace, EchoModelKind::Mono).unwrap())
    });
    group.bench_function("stretched", |b| {
        b.iter(|| fit_echo(&trace, EchoModelKind::Stretched { n: None }).unwrap())
    });
    group.finish();

    let spec = diffusion_spec();
    let mut group = c.benchmark_group("fit_diffusion");
    group.sample_size(20);
    group.bench_function("parametric_two_isotopes", |b| {
        b.iter(|| fit_diffusion(black_box(&spec)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, spectral, forward, fits);
criterion_main!(benches);
