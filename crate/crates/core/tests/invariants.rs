mod common;

use common::{composition_defect, evolve_instance, hamiltonian_defect, unitarity_defect, Instance};
use framesim::fockops::C64;
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = Instance> {
    (0.0..0.5f64, -1.0..1.0f64, 0.0..0.3f64, 0.0..0.05f64, 0.01..0.3f64, 0.01..0.3f64)
        .prop_map(|(drive, detuning, g, g0, kappa, gamma)| Instance { drive, detuning, g, g0, kappa, gamma })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evolution_keeps_density_matrix_valid(inst in instance()) {
        let rep = evolve_instance(&inst, 3);
        prop_assert!(rep.trace_drift < 1e-9, "{rep:?}");
        prop_assert!(rep.hermiticity < 1e-9, "{rep:?}");
        prop_assert!(rep.min_eigenvalue > -1e-7, "{rep:?}");
        prop_assert!(rep.max_offset < 1e-7, "{rep:?}");
    }

    #[test]
    fn hamiltonians_are_hermitian(inst in instance()) {
        prop_assert!(hamiltonian_defect(&inst) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn displacement_and_squeeze_are_unitary(re in -2.0..2.0f64, im in -2.0..2.0f64, r in 0.0..0.5f64, phi in -3.1..3.1f64) {
        prop_assert!(unitarity_defect(C64::new(re, im), C64::from_polar(r, phi), 30) < 1e-9);
    }

    #[test]
    fn squeeze_composition_matches_dense_product(r1 in 0.0..0.3f64, p1 in -3.1..3.1f64, r2 in 0.0..0.3f64, p2 in -3.1..3.1f64) {
        let d = composition_defect(C64::from_polar(r1, p1), C64::from_polar(r2, p2));
        prop_assert!(d < 1e-6, "{d}");
    }
}
