use std::hint::black_box;

use autores_core::analysis::{fit_threshold, linspace, SCurve};
use autores_core::model::build_hamiltonian;
use autores_core::quantum::{TrajectoryOptions, TrajectorySolver};
use autores_core::semiclassical::{ar_capture_stream, CaptureOptions, ClassicalModel};
use autores_core::spectrum::{eigenspectrum, effective_params};
use autores_core::{ChirpPulse, QubitState, SystemParams};
use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;

fn classical(c: &mut Criterion) {
    let p = SystemParams::device(-1.0);
    let model = ClassicalModel::new(&p);
    let y = [Complex64::new(3.0, -1.0), Complex64::new(0.2, 0.1)];
    let mut dy = [Complex64::default(); 2];
    c.bench_function("classical_rhs", |b| {
        b.iter(|| {
            model.rhs(black_box(5.3), black_box(0.1), black_box(&y), &mut dy);
            dy[0]
        })
    });

    let pulse = ChirpPulse::readout(0.095);
    let opts = CaptureOptions::default();
    let mut stream = 0u64;
    c.bench_function("capture_run_500ns", |b| {
        b.iter(|| {
            stream += 1;
            ar_capture_stream(&p, &pulse, &opts, 1, stream).unwrap()
        })
    });
}

fn spectral(c: &mut Criterion) {
    let p = SystemParams::device(-1.0);
    let h = build_hamiltonian(&p).unwrap();
    c.bench_function("eigenspectrum_7x8", |b| b.iter(|| eigenspectrum(black_box(&h)).unwrap()));
    c.bench_function("ladder_fit", |b| b.iter(|| effective_params(black_box(&p), 4).unwrap()));
}

fn trajectory(c: &mut Criterion) {
    let p = SystemParams {
        n_levels: 2,
        n_photons: 6,
        ..SystemParams::device(-1.0)
    };
    let pulse = ChirpPulse::fixed(p.cavity_freq, 100.0, 0.005);
    let solver = TrajectorySolver::new(&p, &pulse, TrajectoryOptions::default()).unwrap();
    let mut stream = 0u64;
    c.bench_function("trajectory_2x6_100ns", |b| {
        b.iter(|| {
            stream += 1;
            solver.run(QubitState::Excited, 1, stream, 10.0).unwrap()
        })
    });
}

fn fitting(c: &mut Criterion) {
    let amps = linspace(0.08, 0.11, 31);
    let n = 400;
    let captured: Vec<usize> = amps
        .iter()
        .map(|a| (n as f64 / (1.0 + (-(a - 0.092) / 0.0012).exp())).round() as usize)
        .collect();
    let curve = SCurve::from_counts(
        amps.clone(),
        &captured,
        vec![n; amps.len()],
        vec![Vec::new(); amps.len()],
        QubitState::Ground,
        -1.0,
        8e-4,
        0,
    );
    c.bench_function("logistic_fit", |b| b.iter(|| fit_threshold(black_box(&curve)).unwrap()));
}

criterion_group!(benches, classical, spectral, trajectory, fitting);
criterion_main!(benches);
