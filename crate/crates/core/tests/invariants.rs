use proptest::prelude::*;
use qbm_core::dynamics::markovian_propagate;
use qbm_core::entropy::pi_closed_markovian;
use qbm_core::gaussian::{
    build_standard_form, d_from_nu, nu_from_d, symplectic_spectrum_closed_form, CovarianceMatrix, StateParams,
};

/// Parameters inside the box constraints whose radicands admit a state.
fn legitimate() -> impl Strategy<Value = (StateParams, CovarianceMatrix)> {
    (1.0..10.0f64, -1.0..=1.0f64, 0.0..=1.0f64, -1.0..=1.0f64)
        .prop_map(|(s, dfrac, gfrac, lambda)| {
            let d = dfrac * (s - 1.0);
            let g_min = 2.0 * d.abs() + 1.0;
            let g_max = (g_min + 10.0).min(s * s - d * d);
            StateParams::new(s, d, g_min + gfrac * (g_max - g_min), lambda)
        })
        .prop_filter_map("negative radicand", |p| build_standard_form(p).ok().map(|sigma| (p, sigma)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn determinant_is_g_squared((p, sigma) in legitimate()) {
        prop_assert!((sigma.determinant() - p.g * p.g).abs() <= 1e-9 * (p.g * p.g).max(1.0));
    }

    #[test]
    fn partial_transpose_is_an_involution((_p, sigma) in legitimate()) {
        prop_assert_eq!(sigma.partial_transpose().partial_transpose(), sigma);
    }

    #[test]
    fn symplectic_product_is_root_determinant((_p, sigma) in legitimate()) {
        let nu = sigma.symplectic_eigenvalues().unwrap();
        let root = sigma.determinant().sqrt();
        prop_assert!((nu.nu_minus * nu.nu_plus - root).abs() <= 1e-9 * root);
        prop_assert!(nu.nu_minus >= 1.0 - 1e-9);
    }

    #[test]
    fn generic_and_closed_form_spectra_agree((_p, sigma) in legitimate()) {
        let generic = sigma.symplectic_eigenvalues().unwrap();
        let closed = symplectic_spectrum_closed_form(&sigma);
        prop_assert!((generic.nu_minus - closed.nu_minus).abs() <= 1e-8 * closed.nu_plus);
        prop_assert!((generic.nu_plus - closed.nu_plus).abs() <= 1e-8 * closed.nu_plus);
        let pt = sigma.partial_transpose();
        let generic = pt.symplectic_eigenvalues().unwrap();
        let closed = symplectic_spectrum_closed_form(&pt);
        prop_assert!((generic.nu_minus - closed.nu_minus).abs() <= 1e-8 * closed.nu_plus);
    }

    #[test]
    fn negativity_is_non_negative((_p, sigma) in legitimate()) {
        prop_assert!(sigma.log_negativity().unwrap() >= 0.0);
    }

    #[test]
    fn slice_relation_round_trips(s in 1.0..20.0f64, frac in 0.0..=1.0f64) {
        let d = frac * (s - 1.0);
        let nu = nu_from_d(s, d).unwrap();
        prop_assert!((d_from_nu(s, nu).unwrap() - d).abs() <= 1e-10 * s * s);
    }

    #[test]
    fn markovian_rate_is_non_negative(
        s in 1.0..10.0f64,
        frac in 0.0..=1.0f64,
        gamma_m in 1e-4..0.1f64,
        beta in 0.01..10.0f64,
        scaled_t in 0.0..30.0f64,
    ) {
        let nu = nu_from_d(s, frac * (s - 1.0)).unwrap();
        let pi = pi_closed_markovian(scaled_t / gamma_m, s, nu, gamma_m, beta, 1.0).unwrap();
        prop_assert!(pi >= -1e-12, "Π = {pi}");
    }

    #[test]
    fn markovian_channel_keeps_states_physical(
        (_p, sigma) in legitimate(),
        n_bar in 0.0..50.0f64,
        t in 0.0..2000.0f64,
    ) {
        let out = markovian_propagate(&sigma, 1e-3, n_bar, t);
        prop_assert!(out.validate().physical, "{:?}", out.validate().failures);
    }
}
