use autores_core::analysis::linspace;
use autores_core::model::{build_hamiltonian, Coupling};
use autores_core::spectrum::{dressed_energy, effective_params, find_avoided_crossings, track_branches, Label};
use autores_core::SystemParams;

fn linear_device(detuning: f64) -> SystemParams {
    SystemParams {
        kerr: 0.0,
        ..SystemParams::device(detuning)
    }
}

#[test]
fn device_hamiltonian_is_hermitian_in_both_coupling_forms() {
    for coupling in [Coupling::Rwa, Coupling::Full] {
        let p = SystemParams {
            coupling,
            ..SystemParams::device(-1.0)
        };
        assert!(build_hamiltonian(&p).unwrap().is_hermitian(1e-14));
    }
}

#[test]
fn ground_crossings_of_the_fourth_and_fifth_manifolds() {
    let grid = linspace(0.3, 0.7, 401);
    let set = track_branches(&linear_device(0.0), &grid, 6).unwrap();
    let ground = |m| {
        find_avoided_crossings(&set, m)
            .into_iter()
            .filter(|c| c.pair.0.q == 0 || c.pair.1.q == 0)
            .collect::<Vec<_>>()
    };
    let m4 = ground(4);
    let m5 = ground(5);
    assert_eq!(m4.len(), 1, "{m4:?}");
    assert_eq!(m5.len(), 1, "{m5:?}");
    let mut pair4 = [m4[0].pair.0, m4[0].pair.1];
    pair4.sort();
    assert_eq!(pair4, [Label::new(0, 4), Label::new(1, 3)]);
    assert!((m4[0].detuning_at_min - 0.42).abs() < 0.01, "{}", m4[0].detuning_at_min);
    assert!((m5[0].detuning_at_min - 0.56).abs() < 0.01, "{}", m5[0].detuning_at_min);
    assert!(m4[0].gap > m5[0].gap);
    assert!(m4[0].gap < 0.1 && m5[0].gap > 1e-3);
}

#[test]
fn low_branches_are_converged_in_the_fock_cutoff() {
    let base = SystemParams::device(-1.0);
    let bigger = SystemParams {
        n_photons: 14,
        ..base.clone()
    };
    for n in 0..=4 {
        for q in 0..=1 {
            let l = Label::new(q, n);
            let a = dressed_energy(&base, l).unwrap();
            let b = dressed_energy(&bigger, l).unwrap();
            assert!((a - b).abs() < 1e-9, "{l}: {a} vs {b}");
        }
    }
}

#[test]
fn lambda_swings_through_the_crossings() {
    // λ of the ground ladder changes sign around each ground-state
    // anticrossing and is smooth elsewhere.
    let lam = |d: f64, n_fit| effective_params(&SystemParams::device(d), n_fit).unwrap().lambda;
    assert!(lam(0.40, 4) < 0.0 && lam(0.42, 4) < lam(0.40, 4));
    assert!(lam(0.43, 4) > 0.0);
    assert!(lam(0.556, 5) < 0.5 * lam(0.54, 5));
    assert!(lam(0.56, 5) > 2.0 * lam(0.54, 5));
    let far: Vec<f64> = linspace(-3.0, -1.5, 7).into_iter().map(|d| lam(d, 4)).collect();
    assert!(far.iter().all(|l| *l > 0.0));
    assert!(far.windows(2).all(|w| w[1] > w[0]), "{far:?}");
}

#[test]
fn counter_rotating_terms_barely_move_the_ladder() {
    let rwa = SystemParams::device(-1.0);
    let full = SystemParams {
        coupling: Coupling::Full,
        ..rwa.clone()
    };
    let a = effective_params(&rwa, 4).unwrap();
    let b = effective_params(&full, 4).unwrap();
    assert!((a.omega - b.omega).abs() < 5e-3, "{} vs {}", a.omega, b.omega);
    assert!((a.lambda / b.lambda - 1.0).abs() < 0.1, "{} vs {}", a.lambda, b.lambda);
}
