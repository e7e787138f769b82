//! Experiment protocols: single trajectories, zero-temperature runs,
//! disentangling-time scans, random-state ensembles, entanglement curves,
//! power-law fits and integrated entropy production.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{
    build_coefficient_table, markovian_coefficients, uniform_grid, BathConfig, CoefficientTable, MarkovianRates,
    SpectralDensity,
};
use crate::dynamics::{check_physical, markovian_propagate, ExactPropagator};
use crate::entropy::{
    entropy_production_rate_scalar, find_peaks, first_peak, pi_closed_nonmarkovian, pi_max_markovian, Peaks,
    ThermoTrace,
};
use crate::error::{Error, Result};
use crate::gaussian::{build_standard_form, nu_from_d, CovarianceMatrix, StateParams};
use crate::quadrature::{self, Tolerance};

/// Which propagator drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Weak,
    Markovian,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Weak => "weak",
            Mode::Markovian => "markovian",
        }
    }
}

/// Uniform time grid `[0, t_max]` with `n_points` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_points: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { t_max: 50.0, n_points: 2001 }
    }
}

impl TimeGrid {
    pub fn new(t_max: f64, n_points: usize) -> Self {
        Self { t_max, n_points }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::Grid(format!("t_max = {} must be positive", self.t_max)));
        }
        if self.n_points < crate::bath::MIN_TABLE_POINTS {
            return Err(Error::Grid(format!(
                "n_points = {} below the minimum {}",
                self.n_points,
                crate::bath::MIN_TABLE_POINTS
            )));
        }
        Ok(())
    }
}

/// Propagates covariance matrices on a fixed grid and evaluates the thermodynamics.
#[derive(Debug, Clone)]
pub struct Runner {
    mode: Mode,
    times: Vec<f64>,
    table: Option<CoefficientTable>,
    delta_gamma: Vec<f64>,
    rates: Option<MarkovianRates>,
}

impl Runner {
    pub fn new(cfg: &BathConfig, grid: TimeGrid, mode: Mode) -> Result<Self> {
        grid.check()?;
        match mode {
            Mode::Markovian => {
                let rates = markovian_coefficients(cfg)?;
                Ok(Self {
                    mode,
                    times: uniform_grid(grid.t_max, grid.n_points),
                    table: None,
                    delta_gamma: Vec::new(),
                    rates: Some(rates),
                })
            }
            Mode::Exact | Mode::Weak => {
                let table = build_coefficient_table(cfg, grid.t_max, grid.n_points)?;
                Ok(Self::from_table(table, mode))
            }
        }
    }

    /// Reuses a prebuilt table (exact or weak mode).
    pub fn from_table(table: CoefficientTable, mode: Mode) -> Self {
        assert!(mode != Mode::Markovian, "Markovian runs do not use a coefficient table");
        let delta_gamma = ExactPropagator::new(&table).delta_gamma().to_vec();
        Self { mode, times: table.times.clone(), table: Some(table), delta_gamma, rates: None }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn table(&self) -> Option<&CoefficientTable> {
        self.table.as_ref()
    }

    pub fn rates(&self) -> Option<&MarkovianRates> {
        self.rates.as_ref()
    }

    /// States at every grid time.
    pub fn states(&self, sigma0: &CovarianceMatrix) -> Vec<CovarianceMatrix> {
        match (self.mode, &self.table, &self.rates) {
            (Mode::Exact, Some(table), _) => table
                .big_gamma
                .iter()
                .zip(&self.delta_gamma)
                .map(|(g, dg)| sigma0.affine((-g).exp(), 2.0 * dg))
                .collect(),
            (Mode::Weak, Some(table), _) => crate::dynamics::weak_coupling_trajectory(sigma0, table),
            (Mode::Markovian, _, Some(r)) => {
                self.times.iter().map(|&t| markovian_propagate(sigma0, r.gamma_m, r.n_bar, t)).collect()
            }
            _ => unreachable!("runner built without its coefficients"),
        }
    }

    /// `(γ, Δ)` at every grid time.
    pub fn coefficient_series(&self) -> Vec<(f64, f64)> {
        match (&self.table, &self.rates) {
            (Some(table), _) => table.gamma.iter().copied().zip(table.delta.iter().copied()).collect(),
            (None, Some(r)) => vec![(r.drift(), r.diffusion()); self.times.len()],
            _ => unreachable!("runner built without its coefficients"),
        }
    }

    pub fn trace(&self, sigma0: &CovarianceMatrix) -> Result<ThermoTrace> {
        let states = self.states(sigma0);
        for (t, s) in self.times.iter().zip(&states) {
            check_physical(s, *t)?;
        }
        ThermoTrace::from_states(&self.times, &states, &self.coefficient_series())
    }
}

/// A single run from the standard-form state `state`.
pub fn run_trajectory(state: &StateParams, cfg: &BathConfig, grid: TimeGrid, mode: Mode) -> Result<ThermoTrace> {
    let sigma0 = build_standard_form(*state)?;
    Runner::new(cfg, grid, mode)?.trace(&sigma0)
}

/// Correlated initial state and its product of local states, run side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationComparison {
    pub correlated: ThermoTrace,
    pub decorrelated: ThermoTrace,
}

pub fn correlation_comparison(
    state: &StateParams,
    cfg: &BathConfig,
    grid: TimeGrid,
    mode: Mode,
) -> Result<CorrelationComparison> {
    let sigma0 = build_standard_form(*state)?;
    let runner = Runner::new(cfg, grid, mode)?;
    Ok(CorrelationComparison { correlated: runner.trace(&sigma0)?, decorrelated: runner.trace(&sigma0.decorrelate())? })
}

/// Runs one trace per state on a shared runner, in parallel, keeping input order.
pub fn run_states(runner: &Runner, states: &[StateParams]) -> Result<Vec<ThermoTrace>> {
    states
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            build_standard_form(*p)
                .and_then(|sigma0| runner.trace(&sigma0))
                .map_err(|e| with_context(e, &format!("state #{i} {p:?}")))
        })
        .collect()
}

fn with_context(err: Error, context: &str) -> Error {
    match err {
        Error::ConstraintViolation(m) => Error::ConstraintViolation(format!("{context}: {m}")),
        Error::NonPhysical(m) => Error::NonPhysical(format!("{context}: {m}")),
        Error::NumericalFailure(m) => Error::NumericalFailure(format!("{context}: {m}")),
        Error::Domain(m) => Error::Domain(format!("{context}: {m}")),
        Error::Convergence(m) => Error::Convergence(format!("{context}: {m}")),
        Error::Stability(m) => Error::Stability(format!("{context}: {m}")),
        Error::Degenerate(m) => Error::Degenerate(format!("{context}: {m}")),
        Error::Grid(m) => Error::Grid(format!("{context}: {m}")),
        other => other,
    }
}

/// Zero-temperature runs for several global purities at fixed `s, d, λ`.
pub fn zero_temperature_run(
    s: f64,
    d: f64,
    lambda: f64,
    g_values: &[f64],
    cfg: &BathConfig,
    grid: TimeGrid,
) -> Result<Vec<ThermoTrace>> {
    if !cfg.is_zero_temperature() {
        return Err(Error::Domain("zero-temperature runs need beta = inf".into()));
    }
    if !matches!(cfg.sd, SpectralDensity::Exponential { .. }) {
        return Err(Error::Domain("zero-temperature runs use the exponential spectral density".into()));
    }
    let states: Vec<StateParams> = g_values.iter().map(|&g| StateParams::new(s, d, g, lambda)).collect();
    run_states(&Runner::new(cfg, grid, Mode::Exact)?, &states)
}

/// First sampled time at which the logarithmic negativity vanishes.
pub fn death_time(trace: &ThermoTrace) -> Option<f64> {
    trace.e_n.iter().position(|&e| e == 0.0).map(|i| trace.times[i])
}

/// Disentangling times for each state (`None` when entanglement survives the window).
pub fn sudden_death_scan(
    states: &[StateParams],
    cfg: &BathConfig,
    grid: TimeGrid,
    mode: Mode,
) -> Result<Vec<Option<f64>>> {
    if cfg.is_zero_temperature() {
        return Err(Error::Domain("sudden death needs a finite temperature".into()));
    }
    let traces = run_states(&Runner::new(cfg, grid, mode)?, states)?;
    Ok(traces.iter().map(death_time).collect())
}

/// Random-state ensemble at fixed `s`.
///
/// Realisation `i` draws `(d, g, λ)` from ChaCha8 seeded with `seed` on
/// stream `i`: `d ~ U[0, s−1]`, then `g ~ U[2d+1, min(d+10, s²−d²)]`, then `λ ~ U[−1, 1]`,
/// each from one 64-bit output `x` as `lo + (hi − lo)·(x >> 11)·2⁻⁵³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub s: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Upper end of the `g` window is `d + G_WINDOW`.
pub const G_WINDOW: f64 = 10.0;

impl SweepSpec {
    pub fn check(&self) -> Result<()> {
        if !(self.s >= 1.0) || !self.s.is_finite() {
            return Err(Error::ConstraintViolation(format!("s = {} < 1", self.s)));
        }
        if self.s - 1.0 > G_WINDOW - 1.0 {
            return Err(Error::Domain(format!(
                "s = {} leaves the window [2d+1, d+{G_WINDOW}] empty for large d",
                self.s
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::Domain("n_samples must be positive".into()));
        }
        Ok(())
    }

    pub fn sample(&self, index: usize) -> StateParams {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64));
        let d = uniform(0.0, self.s - 1.0);
        let g = uniform(2.0 * d + 1.0, (d + G_WINDOW).min(self.s * self.s - d * d));
        let lambda = uniform(-1.0, 1.0);
        StateParams::new(self.s, d, g, lambda)
    }

    pub fn samples(&self) -> Vec<StateParams> {
        (0..self.n_samples).map(|i| self.sample(i)).collect()
    }
}

/// Ensemble of traces plus the pure-state reference `(g=1, d=0, λ=1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub reference_state: StateParams,
    pub reference: ThermoTrace,
    pub states: Vec<StateParams>,
    pub traces: Vec<ThermoTrace>,
}

pub fn random_state_sweep(spec: &SweepSpec, cfg: &BathConfig, grid: TimeGrid, mode: Mode) -> Result<Ensemble> {
    spec.check()?;
    let runner = Runner::new(cfg, grid, mode)?;
    let reference_state = StateParams::two_mode_squeezed(spec.s);
    let reference = runner.trace(&build_standard_form(reference_state)?)?;
    let states = spec.samples();
    let traces = run_states(&runner, &states)?;
    Ok(Ensemble { reference_state, reference, states, traces })
}

/// Per-run scalar summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSummary {
    pub e_n0: f64,
    pub pi_max: f64,
    pub t_max: f64,
    pub pi_min: f64,
    pub t_min: f64,
    /// First local maximum of `|Π|`.
    pub first_peak: f64,
    pub t_first_peak: f64,
    pub sigma: Option<f64>,
}

impl TraceSummary {
    pub fn of(trace: &ThermoTrace, sigma: Option<f64>) -> Result<Self> {
        let Peaks { max, t_max, min, t_min } = find_peaks(&trace.times, &trace.pi)?;
        let abs: Vec<f64> = trace.pi.iter().map(|p| p.abs()).collect();
        let (t_first, first) = first_peak(&trace.times, &abs)?;
        Ok(Self {
            e_n0: trace.e_n[0],
            pi_max: max,
            t_max,
            pi_min: min,
            t_min,
            first_peak: first,
            t_first_peak: t_first,
            sigma,
        })
    }
}

/// One point of the entanglement curve on the slice `g = 2d + 1`, `λ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub d: f64,
    pub nu_tilde: f64,
    pub e_n0: f64,
    pub pi_max: f64,
    pub t_max: f64,
    pub pi_min: f64,
    pub t_min: f64,
    /// Maximum of the closed-form rate on the same grid.
    pub analytic_max: f64,
    pub analytic_min: f64,
}

/// Slice state with `g = 2d + 1`, `λ = 1`.
pub fn slice_state(s: f64, d: f64) -> StateParams {
    StateParams::new(s, d, 2.0 * d + 1.0, 1.0)
}

pub fn entanglement_curve(s: f64, d_grid: &[f64], cfg: &BathConfig, grid: TimeGrid, mode: Mode) -> Result<Vec<CurvePoint>> {
    let runner = Runner::new(cfg, grid, mode)?;
    entanglement_curve_on(&runner, s, d_grid)
}

pub fn entanglement_curve_on(runner: &Runner, s: f64, d_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    let states: Vec<StateParams> = d_grid.iter().map(|&d| slice_state(s, d)).collect();
    let traces = run_states(runner, &states)?;
    d_grid
        .iter()
        .zip(&traces)
        .map(|(&d, trace)| {
            let nu_tilde = nu_from_d(s, d)?;
            let peaks = find_peaks(&trace.times, &trace.pi)?;
            let (analytic_max, analytic_min) = match (runner.table(), runner.rates()) {
                (Some(table), _) => {
                    let series = (1..table.len())
                        .map(|i| pi_closed_nonmarkovian(s, nu_tilde, &table.sample(i)))
                        .collect::<Result<Vec<_>>>()?;
                    let p = find_peaks(&table.times[1..], &series)?;
                    (p.max, p.min)
                }
                (None, Some(r)) => {
                    let series = runner
                        .times()
                        .iter()
                        .map(|&t| crate::entropy::pi_closed_markovian(t, s, nu_tilde, r.gamma_m, r.beta, r.omega0))
                        .collect::<Result<Vec<_>>>()?;
                    let p = find_peaks(runner.times(), &series)?;
                    (pi_max_markovian(s, nu_tilde, r.gamma_m, r.beta, r.omega0)?, p.min)
                }
                _ => unreachable!("runner built without its coefficients"),
            };
            Ok(CurvePoint {
                d,
                nu_tilde,
                e_n0: trace.e_n[0],
                pi_max: peaks.max,
                t_max: peaks.t_max,
                pi_min: peaks.min,
                t_min: peaks.t_min,
                analytic_max,
                analytic_min,
            })
        })
        .collect()
}

/// `d ∈ {0, step, …, s−1}`.
pub fn d_grid(s: f64, step: f64) -> Vec<f64> {
    let n = ((s - 1.0) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub delta: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn power_law_fit(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("{} points given, a fit needs at least 3", points.len())));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::Domain(format!("non-positive point {p:?} in power-law fit")));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all abscissae coincide".into()));
    }
    let delta = sxy / sxx;
    let intercept = my - delta * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - delta * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(FitResult { delta, intercept, r_squared })
}

/// Power-law fit of `Π_max` against `ν̃₋` on an entanglement curve.
pub fn fit_curve(points: &[CurvePoint]) -> Result<FitResult> {
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.nu_tilde, p.pi_max)).collect();
    power_law_fit(&pairs)
}

/// Integrated production `Σ = ∫₀^∞ Π dt` for the non-Markovian and the Markovian dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaPoint {
    pub g: f64,
    pub e_n0: f64,
    pub sigma_nonmarkov: f64,
    /// Part of `sigma_nonmarkov` accumulated after the table horizon.
    pub nonmarkov_tail: f64,
    pub sigma_markov: f64,
}

const SIGMA_TOL: Tolerance = Tolerance::new(1e-12, 1e-10);

/// `∫_{t₀}^∞ Π dt` for a relaxation with constant rates `γ`, `Δ` starting from `σ₀`.
///
/// The state moves on the segment `σ(u) = uσ₀ + (1 − u)(Δ/γ) I₄` with
/// `u = e^{−2γ(t − t₀)}`, so the integral is `∫₀¹ Π(u)/(2γu) du`.
pub fn relaxation_production(sigma0: &CovarianceMatrix, gamma: f64, delta: f64) -> Result<f64> {
    if !(gamma > 0.0) || !(delta > 0.0) {
        return Err(Error::Domain(format!("relaxation needs γ > 0 and Δ > 0, got γ = {gamma:e}, Δ = {delta:e}")));
    }
    let fixed = delta / gamma;
    let est = quadrature::integrate(
        |u| {
            if u == 0.0 {
                return [0.0];
            }
            let sigma = sigma0.affine(u, (1.0 - u) * fixed);
            [entropy_production_rate_scalar(&sigma, gamma, delta).unwrap_or(f64::NAN) / (2.0 * gamma * u)]
        },
        &[0.0, 1.0],
        SIGMA_TOL,
        quadrature::DEFAULT_LIMIT,
    )?;
    if !est.value[0].is_finite() {
        return Err(Error::NumericalFailure("non-finite integrand in relaxation production".into()));
    }
    Ok(est.value[0])
}

/// Non-Markovian `Σ`: trapezoid over the table, then constant-rate relaxation
/// with the last table coefficients.
pub fn integrated_production_nonmarkov(runner: &Runner, sigma0: &CovarianceMatrix) -> Result<(f64, f64)> {
    let table = runner.table().ok_or_else(|| Error::Domain("non-Markovian production needs a table".into()))?;
    let trace = runner.trace(sigma0)?;
    let body = crate::bath::cumulative_trapezoid(&trace.times, &trace.pi).pop().unwrap_or(0.0);
    let states = runner.states(sigma0);
    let last = table.last();
    let tail = relaxation_production(&states[states.len() - 1], last.gamma, last.delta)?;
    Ok((body + tail, tail))
}

/// Markovian `Σ`, analytic path from `t = 0`.
pub fn integrated_production_markov(rates: &MarkovianRates, sigma0: &CovarianceMatrix) -> Result<f64> {
    relaxation_production(sigma0, rates.drift(), rates.diffusion())
}

/// Relative drift of `Δ` and `γ` over the last unit of time in the table,
/// a measure of how well the coefficients have saturated.
pub fn saturation_defect(table: &CoefficientTable) -> f64 {
    let n = table.len();
    let back = ((1.0 / table.step()).round() as usize).clamp(1, n - 1);
    let rel = |v: &[f64]| (v[n - 1] - v[n - 1 - back]).abs() / v[n - 1].abs().max(f64::MIN_POSITIVE);
    rel(&table.delta).max(rel(&table.gamma))
}

pub fn sigma_comparison(
    s: f64,
    d: f64,
    lambda: f64,
    g_values: &[f64],
    cfg: &BathConfig,
    grid: TimeGrid,
) -> Result<Vec<SigmaPoint>> {
    let runner = Runner::new(cfg, grid, Mode::Exact)?;
    let rates = markovian_coefficients(cfg)?;
    g_values
        .par_iter()
        .map(|&g| {
            let p = StateParams::new(s, d, g, lambda);
            let sigma0 = build_standard_form(p)?;
            let (sigma_nonmarkov, nonmarkov_tail) = integrated_production_nonmarkov(&runner, &sigma0)?;
            Ok(SigmaPoint {
                g,
                e_n0: sigma0.log_negativity()?,
                sigma_nonmarkov,
                nonmarkov_tail,
                sigma_markov: integrated_production_markov(&rates, &sigma0)?,
            })
        })
        .collect()
}
