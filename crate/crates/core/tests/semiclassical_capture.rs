use autores_core::analysis::{fit_threshold, linspace, scurve, EnsembleSpec};
use autores_core::rng::job_rng;
use autores_core::semiclassical::{
    capture_ensemble, classical_nonlinearity, classical_threshold, deterministic_threshold, locked_photons, sample_initial, CaptureOptions,
    ClassicalOptions, ClassicalState, Sampling,
};
use autores_core::spectrum::effective_params;
use autores_core::{ChirpPulse, QubitState, SystemParams};

fn readout() -> ChirpPulse {
    ChirpPulse::readout(0.1)
}

#[test]
fn vacuum_draws_have_quarter_quadrature_variance() {
    let n = 40_000;
    let draws: Vec<_> = (0..n).map(|i| sample_initial(&mut job_rng(7, i), QubitState::Ground, Sampling::default())).collect();
    for pick in [|s: &ClassicalState| s.alpha_c, |s: &ClassicalState| s.alpha_q] {
        let vals: Vec<_> = draws.iter().map(pick).collect();
        let mean_re = vals.iter().map(|z| z.re).sum::<f64>() / n as f64;
        let mean_im = vals.iter().map(|z| z.im).sum::<f64>() / n as f64;
        let var_re = vals.iter().map(|z| (z.re - mean_re).powi(2)).sum::<f64>() / n as f64;
        let var_im = vals.iter().map(|z| (z.im - mean_im).powi(2)).sum::<f64>() / n as f64;
        let mean_n = vals.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        // Standard errors: 0.5/√n for the means, 0.25·√(2/n) for variances.
        assert!(mean_re.abs() < 0.015 && mean_im.abs() < 0.015, "{mean_re} {mean_im}");
        assert!((var_re - 0.25).abs() < 0.01 && (var_im - 0.25).abs() < 0.01, "{var_re} {var_im}");
        assert!((mean_n - 0.5).abs() < 0.015, "{mean_n}");
    }
}

#[test]
fn excited_proxy_adds_one_quantum_on_average() {
    let n = 20_000;
    let mean = |q| (0..n).map(|i| sample_initial(&mut job_rng(2, i), q, Sampling::default()).alpha_q.norm_sqr()).sum::<f64>() / n as f64;
    let diff = mean(QubitState::Excited) - mean(QubitState::Ground);
    assert!((diff - 1.0).abs() < 0.03, "{diff}");
}

#[test]
fn classical_pull_matches_the_spectral_fit_far_from_crossings() {
    for det in [-2.64, -1.5] {
        let p = SystemParams::device(det);
        let classical = classical_nonlinearity(&p).unwrap();
        let spectral = effective_params(&p, 4).unwrap().lambda;
        assert!((classical / spectral - 1.0).abs() < 0.03, "Δ = {det}: {classical:e} vs {spectral:e}");
    }
}

#[test]
fn threshold_follows_three_quarter_power_of_the_rate() {
    let p = SystemParams::device(-2.64);
    let rates = [1e-3, 2e-3, 4e-3, 1e-2];
    let scan = classical_threshold(&p, &readout(), &rates).unwrap();
    assert!((scan.exponent - 0.75).abs() < 0.05, "exponent {}", scan.exponent);
    assert!(scan.table.windows(2).all(|w| w[1].1 > w[0].1));
}

#[test]
fn stronger_kerr_lowers_the_threshold() {
    let base = SystemParams::device(-2.64);
    let stronger = SystemParams {
        kerr: 2.0 * base.kerr,
        ..base.clone()
    };
    let pulse = readout();
    let opts = ClassicalOptions::default();
    let v1 = deterministic_threshold(&base, &pulse, 1e-3, &opts).unwrap();
    let v2 = deterministic_threshold(&stronger, &pulse, 1e-3, &opts).unwrap();
    assert!(v2 < v1, "{v2} vs {v1}");
}

#[test]
fn threshold_is_insensitive_to_weaker_damping() {
    let base = SystemParams::device(-2.64);
    let quiet = SystemParams {
        kappa: base.kappa / 10.0,
        ..base.clone()
    };
    let pulse = readout();
    let opts = ClassicalOptions::default();
    let v1 = deterministic_threshold(&base, &pulse, 1e-4, &opts).unwrap();
    let v2 = deterministic_threshold(&quiet, &pulse, 1e-4, &opts).unwrap();
    assert!((v2 / v1 - 1.0).abs() < 0.05, "{v2} vs {v1}");
}

#[test]
fn capture_cut_anywhere_between_thirty_and_seventy_percent_agrees() {
    // Near threshold, half the runs lock and half fall out of resonance;
    // the final photon numbers separate cleanly.
    let p = SystemParams::device(-2.64);
    let pulse = readout();
    let vc = deterministic_threshold(&p, &pulse, 1e-3, &ClassicalOptions::default()).unwrap();
    let n_lock = locked_photons(&p, &pulse).unwrap();
    let runs: Vec<_> = capture_ensemble(&p, &pulse.with_amplitude(vc), &CaptureOptions::default(), 200, 4)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let count = |frac: f64| runs.iter().filter(|r| r.final_n > frac * n_lock).count();
    let reference = count(0.5);
    assert!(reference > 0 && reference < runs.len(), "{reference}");
    for frac in [0.3, 0.4, 0.6, 0.7] {
        assert_eq!(count(frac), reference, "cut {frac}");
    }
}

#[test]
fn noiseless_scurve_is_a_step_at_the_deterministic_threshold() {
    let p = SystemParams::device(-2.64);
    let pulse = readout();
    let vc = deterministic_threshold(&p, &pulse, 1e-4, &ClassicalOptions::default()).unwrap();
    let amps = linspace(0.9 * vc, 1.1 * vc, 11);
    let spec = EnsembleSpec {
        sampling: Sampling::NOISELESS,
        ..EnsembleSpec::semiclassical(4, 0)
    };
    let curve = scurve(&p, &pulse, &amps, QubitState::Ground, &spec).unwrap();
    for (a, prob) in amps.iter().zip(&curve.probs) {
        assert_eq!(*prob, if *a > vc { 1.0 } else { 0.0 }, "amplitude {a}");
    }
    let fit = fit_threshold(&curve).unwrap();
    assert!((fit.v_half / vc - 1.0).abs() < 0.02);
}

#[test]
fn ensembles_do_not_depend_on_worker_count() {
    let p = SystemParams::device(-1.0);
    let pulse = readout().with_amplitude(0.09);
    let opts = CaptureOptions::default();
    let run_on = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| capture_ensemble(&p, &pulse, &opts, 24, 9))
            .into_iter()
            .map(Result::unwrap)
            .collect::<Vec<_>>()
    };
    assert_eq!(run_on(1), run_on(3));
}
