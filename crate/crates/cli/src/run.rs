//! Executes a validated configuration and renders its outputs.

use qbm_core::bath::markovian_coefficients;
use qbm_core::entropy::ThermoTrace;
use qbm_core::error::Result as CoreResult;
use qbm_core::experiments::{
    d_grid, death_time, entanglement_curve_on, fit_curve, integrated_production_markov,
    integrated_production_nonmarkov, run_states, sigma_comparison, slice_state, Mode, Runner, SweepSpec,
    TraceSummary,
};
use qbm_core::gaussian::{build_standard_form, CovarianceMatrix, StateParams};
use rayon::prelude::*;

use crate::config::{
    CurveConfig, Experiment, FamilyConfig, PowerLawConfig, SigmaConfig, SweepConfig, TrajectoryConfig,
};
use crate::error::CliError;
use crate::output::{num, opt, trace_csv, Artifacts, Table};

const SUMMARY_HEADER: [&str; 15] = [
    "label", "s", "d", "g", "lambda", "E_N0", "Pi_max", "t_max", "Pi_min", "t_min", "first_peak",
    "t_first_peak", "Sigma", "death_time", "mode",
];

pub fn execute(experiment: &Experiment) -> Result<Artifacts, CliError> {
    let kind = experiment.kind();
    let wrap = |source| CliError::Compute { experiment: kind, source };
    match experiment {
        Experiment::Trajectory(c) => trajectory(c),
        Experiment::ZeroTemp(c) => zero_temp(c),
        Experiment::Sweep(c) => sweep(c),
        Experiment::EntanglementCurve(c) => curve(c),
        Experiment::PowerLaw(c) => power_law(c),
        Experiment::MarkovCompare(c) => markov_compare(c),
        Experiment::SigmaCompare(c) => sigma_compare(c),
    }
    .map_err(wrap)
}

/// `Σ` for a trace started at `sigma0`, `None` when it cannot be closed.
fn sigma_of(runner: &Runner, sigma0: &CovarianceMatrix) -> Option<f64> {
    match runner.mode() {
        Mode::Markovian => runner.rates().and_then(|r| integrated_production_markov(r, sigma0).ok()),
        _ => integrated_production_nonmarkov(runner, sigma0).ok().map(|(total, _)| total),
    }
}

struct Row<'a> {
    label: String,
    params: StateParams,
    trace: &'a ThermoTrace,
    sigma: Option<f64>,
    mode: Mode,
}

fn summary_row(table: &mut Table, row: Row<'_>) -> CoreResult<()> {
    let s = TraceSummary::of(row.trace, row.sigma)?;
    let p = row.params;
    table.row(&[
        row.label,
        num(p.s),
        num(p.d),
        num(p.g),
        num(p.lambda),
        num(s.e_n0),
        num(s.pi_max),
        num(s.t_max),
        num(s.pi_min),
        num(s.t_min),
        num(s.first_peak),
        num(s.t_first_peak),
        opt(s.sigma),
        opt(death_time(row.trace)),
        row.mode.label().to_string(),
    ]);
    Ok(())
}

fn note_extrapolation(out: &mut Artifacts, trace: &ThermoTrace) {
    if trace.pi_origin_extrapolated && !out.notes.iter().any(|n| n.starts_with("Pi(0)")) {
        out.note("Pi(0) is extrapolated from the first positive grid times because the diffusion vanishes at t = 0");
    }
}

fn trajectory(c: &TrajectoryConfig) -> CoreResult<Artifacts> {
    let mut out = Artifacts::default();
    let runner = Runner::new(&c.bath, c.grid, c.mode)?;
    let sigma0 = build_standard_form(c.state)?;
    let mut runs = vec![("correlated", sigma0.clone())];
    if c.decorrelated {
        runs.push(("decorrelated", sigma0.decorrelate()));
    }
    let mut summary = Table::new(&SUMMARY_HEADER);
    for (label, s0) in runs {
        let trace = runner.trace(&s0)?;
        note_extrapolation(&mut out, &trace);
        let params = if label == "correlated" {
            c.state
        } else {
            StateParams { g: s0.determinant().sqrt(), lambda: f64::NAN, ..c.state }
        };
        summary_row(
            &mut summary,
            Row { label: label.into(), params, trace: &trace, sigma: sigma_of(&runner, &s0), mode: c.mode },
        )?;
        out.add(format!("{label}.csv"), trace_csv(&trace));
    }
    if c.decorrelated {
        out.note("the decorrelated run keeps the local blocks and drops the correlation block; its g is sqrt(det sigma) and its lambda is reported as NaN");
    }
    out.add("summary.csv", summary.finish());
    Ok(out)
}

fn family_states(c: &FamilyConfig) -> Vec<StateParams> {
    c.g_values.iter().map(|&g| StateParams::new(c.s, c.d, g, c.lambda)).collect()
}

fn zero_temp(c: &FamilyConfig) -> CoreResult<Artifacts> {
    let mut out = Artifacts::default();
    let runner = Runner::new(&c.bath, c.grid, Mode::Exact)?;
    let states = family_states(c);
    let traces = run_states(&runner, &states)?;
    let mut summary = Table::new(&SUMMARY_HEADER);
    for (i, (p, trace)) in states.iter().zip(&traces).enumerate() {
        note_extrapolation(&mut out, trace);
        summary_row(&mut summary, Row { label: format!("g{i}"), params: *p, trace, sigma: None, mode: Mode::Exact })?;
        out.add(format!("trace_g{i}.csv"), trace_csv(trace));
    }
    out.add("summary.csv", summary.finish());
    Ok(out)
}

fn sweep(c: &SweepConfig) -> CoreResult<Artifacts> {
    let mut out = Artifacts::default();
    let spec = SweepSpec { s: c.s, n_samples: c.n_samples, seed: c.seed };
    spec.check()?;
    let runner = Runner::new(&c.bath, c.grid, c.mode)?;
    let mut states = vec![StateParams::two_mode_squeezed(c.s)];
    states.extend(spec.samples());
    let traces = run_states(&runner, &states)?;
    let sigmas: Vec<Option<f64>> = states
        .par_iter()
        .map(|p| build_standard_form(*p).ok().and_then(|s0| sigma_of(&runner, &s0)))
        .collect();
    let mut summary = Table::new(&SUMMARY_HEADER);
    for (i, ((p, trace), sigma)) in states.iter().zip(&traces).zip(sigmas).enumerate() {
        let label = if i == 0 { "reference".to_string() } else { format!("realisation_{:05}", i - 1) };
        note_extrapolation(&mut out, trace);
        summary_row(&mut summary, Row { label: label.clone(), params: *p, trace, sigma, mode: c.mode })?;
        if c.write_traces || i == 0 {
            out.add(format!("{label}.csv"), trace_csv(trace));
        }
    }
    out.note(format!(
        "realisation i draws (d, g, lambda) from ChaCha8 seeded with {} on stream i; the reference is the pure state g = 1, d = 0, lambda = 1",
        c.seed
    ));
    out.add("summary.csv", summary.finish());
    Ok(out)
}

const CURVE_HEADER: [&str; 9] =
    ["d", "nu_tilde", "E_N0", "Pi_max", "t_max", "Pi_min", "t_min", "Pi_max_closed", "Pi_min_closed"];

fn curve_table(runner: &Runner, s: f64, ds: &[f64]) -> CoreResult<(String, Vec<qbm_core::experiments::CurvePoint>)> {
    let points = entanglement_curve_on(runner, s, ds)?;
    let mut table = Table::new(&CURVE_HEADER);
    for p in &points {
        table.row(&[
            num(p.d),
            num(p.nu_tilde),
            num(p.e_n0),
            num(p.pi_max),
            num(p.t_max),
            num(p.pi_min),
            num(p.t_min),
            num(p.analytic_max),
            num(p.analytic_min),
        ]);
    }
    Ok((table.finish(), points))
}

fn curve(c: &CurveConfig) -> CoreResult<Artifacts> {
    let mut out = Artifacts::default();
    let runner = Runner::new(&c.bath, c.grid, c.mode)?;
    let ds = d_grid(c.s, c.d_step);
    let (table, _) = curve_table(&runner, c.s, &ds)?;
    let states: Vec<StateParams> = ds.iter().map(|&d| slice_state(c.s, d)).collect();
    let traces = run_states(&runner, &states)?;
    for (i, trace) in traces.iter().enumerate() {
        note_extrapolation(&mut out, trace);
        out.add(format!("trace_d{i:02}.csv"), trace_csv(trace));
    }
    out.add("curve.csv", table);
    Ok(out)
}

fn power_law(c: &PowerLawConfig) -> CoreResult<Artifacts> {
    let mut out = Artifacts::default();
    let ds = d_grid(c.s, c.d_step);
    let mut fits = Table::new(&["bath", "spectral_density", "delta", "intercept", "r_squared"]);
    for (k, bath) in c.baths.iter().enumerate() {
        let runner = Runner::new(bath, c.grid, c.mode)?;
        let (table, points) = curve_table(&runner, c.s, &ds)?;
        let fit = fit_curve(&points)?;
        fits.row(&[k.to_string(), bath.sd.label(), num(fit.delta), num(fit.intercept), num(fit.r_squared)]);
        out.add(format!("curve_{k}.csv"), table);
    }
    out.add("fits.csv", fits.finish());
    Ok(out)
}

fn markov_compare(c: &FamilyConfig) -> CoreResult<Artifacts> {
    let mut out = Artifacts::default();
    let states = family_states(c);
    let mut summary = Table::new(&SUMMARY_HEADER);
    for mode in [Mode::Exact, Mode::Markovian] {
        let runner = Runner::new(&c.bath, c.grid, mode)?;
        let traces = run_states(&runner, &states)?;
        for (i, (p, trace)) in states.iter().zip(&traces).enumerate() {
            let sigma = build_standard_form(*p).ok().and_then(|s0| sigma_of(&runner, &s0));
            let label = format!("{}_g{i}", mode.label());
            note_extrapolation(&mut out, trace);
            summary_row(&mut summary, Row { label: label.clone(), params: *p, trace, sigma, mode })?;
            out.add(format!("{label}.csv"), trace_csv(trace));
        }
    }
    out.add("summary.csv", summary.finish());
    Ok(out)
}

fn sigma_compare(c: &SigmaConfig) -> CoreResult<Artifacts> {
    let mut out = Artifacts::default();
    markovian_coefficients(&c.bath)?;
    let points = sigma_comparison(c.s, c.d, c.lambda, &c.g_values, &c.bath, c.grid)?;
    let mut table = Table::new(&["g", "E_N0", "Sigma_nonmarkov", "Sigma_nonmarkov_tail", "Sigma_markov"]);
    for p in &points {
        table.row(&[num(p.g), num(p.e_n0), num(p.sigma_nonmarkov), num(p.nonmarkov_tail), num(p.sigma_markov)]);
    }
    out.note("Sigma_nonmarkov_tail is the part accumulated after t_max, relaxing with the final coefficients");
    out.add("sigma.csv", table.finish());
    Ok(out)
}
