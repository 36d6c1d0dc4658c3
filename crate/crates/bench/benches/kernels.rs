use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use geophase::fock::{displacement, squeeze};
use geophase::open_system::{lindblad_rhs, NoiseChannel, NoiseKind, Segment, SegmentMap};
use geophase::phase_space::{wigner, WignerSpec};
use geophase::protocol::build_geometric_loop;
use geophase::C64;
use geophase_bench::{coherent_joint, hilbert, loop_params};
use std::hint::black_box;

fn operators(c: &mut Criterion) {
    let mut g = c.benchmark_group("operators");
    for n in [60, 120] {
        let h = hilbert(n);
        g.bench_with_input(BenchmarkId::new("displacement", n), &h, |b, &h| {
            b.iter(|| displacement(black_box(C64::new(0.8, -0.3)), h))
        });
        g.bench_with_input(BenchmarkId::new("squeeze", n), &h, |b, &h| {
            b.iter(|| squeeze(black_box(C64::new(1.15, 0.0)), h))
        });
    }
    g.finish();
}

fn protocol(c: &mut Criterion) {
    let h = hilbert(60);
    c.bench_function("geometric_loop/60", |b| b.iter(|| build_geometric_loop(black_box(&loop_params()), h)));
}

fn dissipation(c: &mut Criterion) {
    let h = hilbert(60);
    let rho = coherent_joint(h);
    let mut g = c.benchmark_group("dissipation");
    g.sample_size(20);
    for kind in [NoiseKind::BosonLoss, NoiseKind::BosonDephase, NoiseKind::QubitDephase] {
        let ch = NoiseChannel::new(kind, 0.05).expect("valid rate");
        g.bench_function(BenchmarkId::new("rhs", kind.name()), |b| b.iter(|| lindblad_rhs(rho.matrix(), &ch, h.dim())));
        g.bench_function(BenchmarkId::new("segment_build", kind.name()), |b| {
            b.iter(|| Segment::with_default_dt(&ch, black_box(std::f64::consts::PI), h))
        });
        let map = SegmentMap::new(&ch, std::f64::consts::PI, 200, h.dim());
        g.bench_function(BenchmarkId::new("segment_apply", kind.name()), |b| b.iter(|| map.apply(rho.matrix())));
    }
    g.finish();
}

fn phase_space(c: &mut Criterion) {
    let h = hilbert(60);
    let osc = coherent_joint(h).reduced_oscillator();
    let spec = WignerSpec::default();
    c.bench_function("wigner/60/81x81", |b| b.iter(|| wigner(black_box(&osc), &spec)));
}

criterion_group!(benches, operators, protocol, dissipation, phase_space);
criterion_main!(benches);
