use autores_core::analysis::{fidelity, fit_threshold, linspace, qubit_stark_shift, SCurve, LOGISTIC_10_90};
use autores_core::{QubitState, SystemParams};
use proptest::prelude::*;

fn logistic_curve(amps: &[f64], v_half: f64, width: f64, qubit: QubitState) -> SCurve {
    let n = 1000;
    let w = width / LOGISTIC_10_90;
    let captured: Vec<usize> = amps
        .iter()
        .map(|a| (n as f64 / (1.0 + (-(a - v_half) / w).exp())).round() as usize)
        .collect();
    SCurve::from_counts(amps.to_vec(), &captured, vec![n; amps.len()], vec![Vec::new(); amps.len()], qubit, -1.0, 8e-4, 0)
}

fn rescaled(c: &SCurve, k: f64) -> SCurve {
    SCurve {
        amplitudes: c.amplitudes.iter().map(|a| a * k).collect(),
        ..c.clone()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_scales_with_the_amplitude_axis(v_half in 0.05f64..0.3, rel_width in 0.05f64..0.3, k in 0.5f64..4.0) {
        let width = rel_width * v_half;
        let amps = linspace(v_half - 1.5 * width, v_half + 1.5 * width, 25);
        let c = logistic_curve(&amps, v_half, width, QubitState::Ground);
        let a = fit_threshold(&c).unwrap();
        let b = fit_threshold(&rescaled(&c, k)).unwrap();
        prop_assert!((b.v_half / (k * a.v_half) - 1.0).abs() < 1e-7);
        prop_assert!((b.width / (k * a.width) - 1.0).abs() < 1e-6);
        prop_assert!((a.v_half / v_half - 1.0).abs() < 0.01);
        prop_assert!((a.width / width - 1.0).abs() < 0.05);
    }

    #[test]
    fn fidelity_is_symmetric_in_the_two_states(v0 in 0.08f64..0.12, shift in -0.03f64..0.03, width in 0.005f64..0.02) {
        let amps = linspace(0.04, 0.18, 29);
        let s0 = logistic_curve(&amps, v0, width, QubitState::Ground);
        let s1 = logistic_curve(&amps, v0 + shift, width, QubitState::Excited);
        let a = fidelity(&s0, &s1, 1000.0, Some(100.0)).unwrap();
        let b = fidelity(&s1, &s0, 1000.0, Some(100.0)).unwrap();
        prop_assert_eq!(a.f_raw, b.f_raw);
        prop_assert_eq!(a.v_opt, b.v_opt);
        prop_assert!((0.0..=1.0).contains(&a.f_raw));
        prop_assert!(a.f_t1_corrected >= a.f_raw);
    }

    #[test]
    fn stark_shift_grows_with_photon_number(det in -3.0f64..-1.0, n1 in 0.1f64..5.0, extra in 0.1f64..5.0) {
        let p = SystemParams::device(det);
        let a = qubit_stark_shift(&p, n1).unwrap();
        let b = qubit_stark_shift(&p, n1 + extra).unwrap();
        prop_assert!(b.abs() > a.abs());
        prop_assert!(a.signum() == b.signum());
    }
}

#[test]
fn identical_curves_have_zero_fidelity() {
    let amps = linspace(0.04, 0.18, 15);
    let s0 = logistic_curve(&amps, 0.1, 0.01, QubitState::Ground);
    let s1 = SCurve {
        qubit_init: QubitState::Excited,
        ..s0.clone()
    };
    let f = fidelity(&s0, &s1, 1000.0, None).unwrap();
    assert_eq!(f.f_raw, 0.0);
    assert_eq!(f.v_opt, amps[0]);
}

#[test]
fn t1_correction_divides_out_survival() {
    let amps = linspace(0.04, 0.18, 15);
    let s0 = logistic_curve(&amps, 0.09, 0.005, QubitState::Ground);
    let s1 = logistic_curve(&amps, 0.13, 0.005, QubitState::Excited);
    let f = fidelity(&s0, &s1, 1000.0, Some(300.0)).unwrap();
    let survival = (-0.3f64).exp();
    assert!((f.survival - survival).abs() < 1e-15);
    assert!((f.f_t1_corrected - (f.f_raw / survival).min(1.0)).abs() < 1e-15);
}
