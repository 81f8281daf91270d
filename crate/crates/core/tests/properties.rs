//! Cross-module properties of the elimination and the full models.

use approx::assert_abs_diff_eq;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use prodiab::dynamics::{linspace, IntegratorConfig};
use prodiab::elimination::{
    a_pdb_general, constant_filtered_drive, g2_effective, jc_a_pdb, jc_g2_exact, AtomOperatorSet, JCParams,
    JcBranch, ModelChoice,
};
use prodiab::pulse::{FilteredDrive, PulseEnvelope};
use prodiab::stirap::{run_atom_model, stirap_pdb_generator, stirap_pdb_lindblad, LambdaParams};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn closed_form_photon_operator_matches_general(
        eps in 0.02f64..0.3,
        gamma in 0.1f64..1.0,
        g in 0.1f64..1.0,
        delta in -0.5f64..0.5,
        omega in -1.0f64..1.0,
        f in 0.0f64..1.0,
    ) {
        let p = JCParams::new(1.0, gamma * eps * eps, g * eps, delta, omega * eps * eps, f * eps).unwrap();
        let general = a_pdb_general(&p, &AtomOperatorSet::jaynes_cummings(), constant_filtered_drive(&p));
        let closed = jc_a_pdb(&p).unwrap();
        prop_assert!(closed.max_diff(&general) < 1e-14 * (1.0 + general.max_abs()));
    }
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::new(1e-9, 1e-12, 0.5).unwrap()
}

#[test]
fn intensity_correlations_decay_to_one() {
    let p = JCParams::fig2(2.5e-4);
    let grid = [0.0, 1000.0];
    let exact = jc_g2_exact(&p, 3, &grid, &cfg()).unwrap();
    assert_abs_diff_eq!(exact.g2[1], 1.0, epsilon = 1e-6);
    for choice in [ModelChoice::Adiabatic, ModelChoice::Prodiabatic(JcBranch::Auto)] {
        let g2 = g2_effective(&p, choice, true, &grid, &cfg()).unwrap();
        assert_abs_diff_eq!(g2[1], 1.0, epsilon = 1e-6);
    }
}

#[test]
fn exact_g2_converges_in_truncation() {
    let p = JCParams::fig2(2.5e-4);
    let grid = linspace(0.0, 10.0, 21);
    let a = jc_g2_exact(&p, 2, &grid, &cfg()).unwrap();
    let b = jc_g2_exact(&p, 3, &grid, &cfg()).unwrap();
    for (x, y) in a.g2.iter().zip(&b.g2) {
        assert!((x - y).abs() <= 1e-4 * y.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn effective_stirap_conserves_population() {
    let p = LambdaParams::fig3();
    let grid = linspace(0.0, 100.0, 201);
    let lme = run_atom_model(&stirap_pdb_lindblad(&p).unwrap().model, 0, &grid, &cfg()).unwrap();
    let gen = stirap_pdb_generator(&p).unwrap().run(0, &grid, &cfg()).unwrap();
    for run in [lme, gen] {
        for k in 0..grid.len() {
            let s: f64 = (0..3).map(|j| run.populations[j][k]).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
        }
    }
}

#[test]
fn filtered_drive_lags_by_two_over_kappa() {
    // a switched-on drive reaches 1 − 1/e of its plateau after 2/κ
    let env = PulseEnvelope::boxcar(500.0, 480.0, 1.0).unwrap();
    let fd = FilteredDrive::new(env, C64::new(1.0, 0.0), 1.0).unwrap();
    let plateau = fd.at(100.0).re;
    assert_abs_diff_eq!(plateau, 2.0, epsilon = 1e-12);
    let lag = 20.0 + 2.0;
    assert_abs_diff_eq!(fd.at(lag).re / plateau, 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
}
