use qbm_core::bath::{
    asymptotic_gamma, build_coefficient_table, coefficients, markovian_coefficients, BathConfig, QuadratureSettings,
    SpectralDensity,
};

fn ld() -> BathConfig {
    BathConfig::new(SpectralDensity::lorentz_drude(0.1), 0.1, 0.1)
}

fn all_spectra() -> Vec<BathConfig> {
    vec![
        ld(),
        BathConfig::new(SpectralDensity::exponential(1.0, 0.1), 0.1, 0.1),
        BathConfig::new(SpectralDensity::exponential(0.5, 0.1), 0.1, 0.1),
        BathConfig::new(SpectralDensity::exponential(3.0, 0.1), 0.1, f64::INFINITY),
    ]
}

#[test]
fn cumulative_integrals_converge_at_second_order() {
    let cfg = ld();
    let last = |n| build_coefficient_table(&cfg, 20.0, n).unwrap().last();
    let (a, b, c) = (last(201), last(401), last(801));
    let ratio_gamma = (a.big_gamma - b.big_gamma) / (b.big_gamma - c.big_gamma);
    let ratio_delta = (a.delta_bar - b.delta_bar) / (b.delta_bar - c.delta_bar);
    assert!((ratio_gamma - 4.0).abs() < 0.1, "{ratio_gamma}");
    assert!((ratio_delta - 4.0).abs() < 0.1, "{ratio_delta}");
}

#[test]
fn doubling_the_frequency_cutoff_changes_nothing() {
    for cfg in all_spectra() {
        let wide = QuadratureSettings { omega_max: Some(2.0 * cfg.omega_max()), ..Default::default() };
        for t in [0.5, 5.0, 30.0] {
            let a = coefficients(&cfg, t, &QuadratureSettings::default()).unwrap();
            let b = coefficients(&cfg, t, &wide).unwrap();
            assert!((a.delta - b.delta).abs() < 1e-8, "{cfg:?} t={t}");
            assert!((a.gamma - b.gamma).abs() < 1e-8, "{cfg:?} t={t}");
        }
    }
}

#[test]
fn lorentz_drude_dissipation_saturates_at_half_the_markovian_rate() {
    let cfg = ld();
    let c = coefficients(&cfg, 400.0, &QuadratureSettings::default()).unwrap();
    let gamma_m = markovian_coefficients(&cfg).unwrap().gamma_m;
    assert!((c.gamma / (0.5 * gamma_m) - 1.0).abs() < 1e-6, "{} vs {}", c.gamma, 0.5 * gamma_m);
    assert!((asymptotic_gamma(&cfg) / (0.5 * gamma_m) - 1.0).abs() < 1e-12);
}

#[test]
fn long_time_ratio_is_thermal() {
    let cfg = ld();
    let c = coefficients(&cfg, 400.0, &QuadratureSettings::default()).unwrap();
    let coth = markovian_coefficients(&cfg).unwrap().coth();
    assert!((c.delta / c.gamma / coth - 1.0).abs() < 1e-6);
}

#[test]
fn table_rows_match_direct_evaluation() {
    let cfg = all_spectra()[2];
    let table = build_coefficient_table(&cfg, 10.0, 101).unwrap();
    for i in [1, 37, 100] {
        let row = table.sample(i);
        let direct = coefficients(&cfg, row.t, &QuadratureSettings::default()).unwrap();
        assert_eq!(row.delta, direct.delta);
        assert_eq!(row.gamma, direct.gamma);
    }
}
