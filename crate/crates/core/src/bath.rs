//! Spectral densities, bath kernels and the secular time-dependent
//! coefficients `Δ(t)` (diffusion) and `γ(t)` (dissipation).
//!
//! The coefficients are defined as time integrals of the noise and
//! dissipation kernels, which are themselves frequency integrals of the
//! spectral density. Swapping the two integrations turns the time integral
//! into the closed-form weights
//!
//! ```text
//! C(ω, t) = ½[sin((ω−ω₀)t)/(ω−ω₀) + sin((ω+ω₀)t)/(ω+ω₀)]
//! S(ω, t) = ½[sin((ω−ω₀)t)/(ω−ω₀) − sin((ω+ω₀)t)/(ω+ω₀)]
//! ```
//!
//! so that `Δ(t) = α² ∫ J(ω) coth(βω/2) C(ω, t) dω` and
//! `γ(t) = α² ∫ J(ω) S(ω, t) dω`, each a single absolutely convergent
//! frequency integral. Units are natural (`ħ = k_B = 1`), frequencies are
//! measured in units of the oscillator frequency `ω₀` unless set otherwise.

use std::f64::consts::{FRAC_2_PI, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

/// Kind of bath spectrum together with its cut-off frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralDensity {
    /// Ohmic with Lorentz–Drude cut-off: `(2/π) ω ω_c²/(ω_c² + ω²)`.
    LorentzDrude { omega_c: f64 },
    /// `ω_c^{1−ε} ω^ε e^{−ω/ω_c}`; `ε = 1` Ohmic, `ε > 1` super-, `ε < 1` sub-Ohmic.
    Exponential { epsilon: f64, omega_c: f64 },
}

impl SpectralDensity {
    pub fn lorentz_drude(omega_c: f64) -> Self {
        Self::LorentzDrude { omega_c }
    }

    pub fn exponential(epsilon: f64, omega_c: f64) -> Self {
        Self::Exponential { epsilon, omega_c }
    }

    pub fn omega_c(&self) -> f64 {
        match *self {
            Self::LorentzDrude { omega_c } | Self::Exponential { omega_c, .. } => omega_c,
        }
    }

    /// Short label used in file names and reports.
    pub fn label(&self) -> String {
        match *self {
            Self::LorentzDrude { .. } => "lorentz_drude".to_string(),
            Self::Exponential { epsilon, .. } => format!("exponential_eps{epsilon}"),
        }
    }

    pub fn check(&self) -> Result<()> {
        let omega_c = self.omega_c();
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(Error::Domain(format!("cut-off frequency {omega_c} must be positive")));
        }
        if let Self::Exponential { epsilon, .. } = *self {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::Domain(format!("Ohmicity {epsilon} must be positive")));
            }
            if epsilon < 0.5 {
                return Err(Error::Domain(format!(
                    "Ohmicity {epsilon} below 1/2 is not supported by the quadrature"
                )));
            }
        }
        Ok(())
    }

    /// `J(ω)`.
    pub fn value(&self, omega: f64) -> Result<f64> {
        if !(omega >= 0.0) {
            return Err(Error::Domain(format!("frequency {omega} must be non-negative")));
        }
        Ok(self.eval(omega))
    }

    fn eval(&self, omega: f64) -> f64 {
        match *self {
            Self::LorentzDrude { omega_c } => FRAC_2_PI * omega * omega_c * omega_c / (omega_c * omega_c + omega * omega),
            Self::Exponential { epsilon, omega_c } => {
                if omega == 0.0 {
                    0.0
                } else {
                    omega_c.powf(1.0 - epsilon) * omega.powf(epsilon) * (-omega / omega_c).exp()
                }
            }
        }
    }

    /// Integrals of sub-Ohmic spectra run in `u = √ω`.
    fn needs_sqrt_variable(&self) -> bool {
        matches!(*self, Self::Exponential { epsilon, .. } if epsilon < 1.0)
    }

    /// Algebraic high-frequency decay needs an explicit tail beyond the cut-off.
    fn has_algebraic_tail(&self) -> bool {
        matches!(self, Self::LorentzDrude { .. })
    }
}

/// Bath parameters shared by both oscillators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub sd: SpectralDensity,
    /// Dimensionless system–bath coupling.
    pub alpha: f64,
    /// Inverse temperature in units of `1/ω₀`; `f64::INFINITY` is the vacuum.
    #[serde(with = "inverse_temperature")]
    pub beta: f64,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
}

fn default_omega0() -> f64 {
    1.0
}

/// Coupling above which the weak-coupling treatment is suspect.
pub const WEAK_COUPLING_WARN: f64 = 0.3;

impl BathConfig {
    pub fn new(sd: SpectralDensity, alpha: f64, beta: f64) -> Self {
        Self { sd, alpha, beta, omega0: 1.0 }
    }

    pub fn check(&self) -> Result<()> {
        self.sd.check()?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Domain(format!("coupling alpha = {} must be positive", self.alpha)));
        }
        if !(self.beta > 0.0) || self.beta.is_nan() {
            return Err(Error::Domain(format!("beta = {} must be positive", self.beta)));
        }
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::Domain(format!("omega0 = {} must be positive", self.omega0)));
        }
        Ok(())
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    /// Upper end of the frequency quadrature, `max(50 ω_c, 20 ω₀)`.
    pub fn omega_max(&self) -> f64 {
        (50.0 * self.sd.omega_c()).max(20.0 * self.omega0)
    }

    /// `ω coth(βω/2)`, continuous at `ω = 0` where it equals `2/β`.
    fn omega_coth(&self, omega: f64) -> f64 {
        if self.beta.is_infinite() {
            return omega;
        }
        let x = 0.5 * self.beta * omega;
        let x_coth_x = if x < 1e-8 { 1.0 + x * x / 3.0 } else { x / x.tanh() };
        2.0 / self.beta * x_coth_x
    }

    /// Mean thermal occupation of a mode at frequency `omega`.
    pub fn occupation(&self, omega: f64) -> f64 {
        if self.beta.is_infinite() {
            0.0
        } else {
            1.0 / (self.beta * omega).exp_m1()
        }
    }

    /// Spectral weights in integration variable `x`: returns
    /// `(ω, J(ω)·jac, J(ω) coth(βω/2)·jac)` where `jac = dω/dx`.
    #[inline]
    fn weights(&self, x: f64, sqrt_variable: bool) -> (f64, f64, f64) {
        let omega = if sqrt_variable { x * x } else { x };
        // J(ω)/ω times the Jacobian, finite at ω = 0 in both variables
        let j_over_omega = match self.sd {
            SpectralDensity::LorentzDrude { omega_c } => {
                FRAC_2_PI * omega_c * omega_c / (omega_c * omega_c + omega * omega)
            }
            SpectralDensity::Exponential { epsilon, omega_c } => {
                let decay = (-omega / omega_c).exp();
                if sqrt_variable {
                    2.0 * omega_c.powf(1.0 - epsilon) * x.powf(2.0 * epsilon - 1.0) * decay
                } else if omega == 0.0 {
                    if epsilon == 1.0 { decay } else { 0.0 }
                } else {
                    omega_c.powf(1.0 - epsilon) * omega.powf(epsilon - 1.0) * decay
                }
            }
        };
        (omega, j_over_omega * omega, j_over_omega * self.omega_coth(omega))
    }

    fn variable_range(&self, omega_max: f64) -> (bool, f64) {
        let sqrt_variable = self.sd.needs_sqrt_variable();
        let upper = if sqrt_variable { omega_max.sqrt() } else { omega_max };
        (sqrt_variable, upper)
    }
}

mod inverse_temperature {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(beta: &f64, s: S) -> Result<S::Ok, S::Error> {
        if beta.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*beta)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                other => Err(de::Error::custom(format!(
                    "beta must be a positive number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

/// Numerical settings for kernel and coefficient quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub tol: Tolerance,
    /// Overrides [`BathConfig::omega_max`].
    pub omega_max: Option<f64>,
    /// Adds the analytic-decay tail beyond `omega_max` for spectra that decay
    /// algebraically. Kernels never include it.
    pub include_tail: bool,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { tol: Tolerance::default(), omega_max: None, include_tail: true }
    }
}

impl QuadratureSettings {
    /// Plain truncation at `omega_max`, the setting shared with the kernels.
    pub fn truncated() -> Self {
        Self { include_tail: false, ..Self::default() }
    }

    fn omega_max(&self, cfg: &BathConfig) -> f64 {
        self.omega_max.unwrap_or_else(|| cfg.omega_max())
    }
}

/// Breakpoints on `[0, upper]` (integration variable) spaced so that each
/// panel holds about one oscillation of frequency `freq` in `ω`, with an
/// extra point at `ω₀` where the resonant weight peaks.
fn oscillation_breakpoints(
    upper_omega: f64,
    freq: f64,
    omega0: Option<f64>,
    sqrt_variable: bool,
) -> Vec<f64> {
    let max_panels = 20_000usize;
    let width = if freq > 0.0 { 2.0 * PI / freq } else { upper_omega };
    let n = ((upper_omega / width).ceil() as usize).clamp(4, max_panels);
    let mut points: Vec<f64> = (0..=n).map(|i| upper_omega * i as f64 / n as f64).collect();
    if let Some(w0) = omega0 {
        if w0 > 0.0 && w0 < upper_omega {
            points.push(w0);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    if sqrt_variable {
        for p in &mut points {
            *p = p.sqrt();
        }
    }
    points
}

/// `sin(x·t)/x`, equal to `t` at `x = 0`.
#[inline]
fn sin_ratio(x: f64, t: f64) -> f64 {
    let y = x * t;
    if y.abs() < 1e-6 {
        t * (1.0 - y * y / 6.0)
    } else {
        y.sin() / x
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("kernel time {tau} must be positive")));
    }
    Ok(())
}

/// Noise and dissipation kernels `[κ(τ), μ(τ)]` on `[0, Ω_max]`.
pub fn kernels(cfg: &BathConfig, tau: f64, settings: &QuadratureSettings) -> Result<[f64; 2]> {
    cfg.check()?;
    check_tau(tau)?;
    let omega_max = settings.omega_max(cfg);
    let (sqrt_var, upper) = cfg.variable_range(omega_max);
    let points = oscillation_breakpoints(omega_max, tau, None, sqrt_var);
    debug_assert!((points[points.len() - 1] - upper).abs() <= 1e-12 * upper);
    let scale = 2.0 * cfg.alpha * cfg.alpha;
    let est = quadrature::integrate(
        |x| {
            let (omega, j, j_coth) = cfg.weights(x, sqrt_var);
            let (s, c) = (omega * tau).sin_cos();
            [scale * j_coth * c, scale * j * s]
        },
        &points,
        settings.tol,
        quadrature::DEFAULT_LIMIT,
    )?;
    Ok(est.value)
}

/// Noise kernel `κ(τ) = 2α² ∫ J(ω) coth(βω/2) cos(ωτ) dω`.
pub fn noise_kernel(cfg: &BathConfig, tau: f64) -> Result<f64> {
    Ok(kernels(cfg, tau, &QuadratureSettings::truncated())?[0])
}

/// Dissipation kernel `μ(τ) = 2α² ∫ J(ω) sin(ωτ) dω`.
pub fn dissipation_kernel(cfg: &BathConfig, tau: f64) -> Result<f64> {
    Ok(kernels(cfg, tau, &QuadratureSettings::truncated())?[1])
}

/// Instantaneous secular coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub delta: f64,
    pub gamma: f64,
}

/// `Δ(t)` and `γ(t)` from the swapped-order frequency integrals.
pub fn coefficients(cfg: &BathConfig, t: f64, settings: &QuadratureSettings) -> Result<Coefficients> {
    cfg.check()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time {t} must be non-negative")));
    }
    if t == 0.0 {
        return Ok(Coefficients { delta: 0.0, gamma: 0.0 });
    }
    let w0 = cfg.omega0;
    let a2 = cfg.alpha * cfg.alpha;
    let integrand = |x: f64, sqrt_var: bool| {
        let (omega, j, j_coth) = cfg.weights(x, sqrt_var);
        let near = sin_ratio(omega - w0, t);
        let far = (omega + w0) * t;
        let far = far.sin() / (omega + w0);
        [0.5 * a2 * j_coth * (near + far), 0.5 * a2 * j * (near - far)]
    };

    let omega_max = settings.omega_max(cfg);
    let (sqrt_var, _) = cfg.variable_range(omega_max);
    let points = oscillation_breakpoints(omega_max, t, Some(w0), sqrt_var);
    let body = quadrature::integrate(
        |x| integrand(x, sqrt_var),
        &points,
        settings.tol,
        quadrature::DEFAULT_LIMIT,
    )?;
    let mut value = body.value;

    if settings.include_tail && cfg.sd.has_algebraic_tail() {
        let tail_tol = Tolerance::new(settings.tol.abs * 0.1, settings.tol.rel);
        let tail = quadrature::integrate_oscillatory_tail(
            |x| integrand(x, false),
            omega_max,
            PI / t,
            tail_tol,
            2_000,
        )?;
        value[0] += tail.value[0];
        value[1] += tail.value[1];
    }
    Ok(Coefficients { delta: value[0], gamma: value[1] })
}

/// Diffusion coefficient `Δ(t)`.
pub fn delta_coefficient(cfg: &BathConfig, t: f64) -> Result<f64> {
    Ok(coefficients(cfg, t, &QuadratureSettings::default())?.delta)
}

/// Dissipation coefficient `γ(t)`.
pub fn gamma_coefficient(cfg: &BathConfig, t: f64) -> Result<f64> {
    Ok(coefficients(cfg, t, &QuadratureSettings::default())?.gamma)
}

/// Long-time value of the secular dissipation coefficient,
/// `γ(∞) = (π/2) α² J(ω₀)`.
pub fn asymptotic_gamma(cfg: &BathConfig) -> f64 {
    0.5 * PI * cfg.alpha * cfg.alpha * cfg.sd.eval(cfg.omega0)
}

/// Constant rates of the Markovian (long-time, high-temperature) limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovianRates {
    /// `γ_M = 2α² ω_c² ω₀ / (ω_c² + ω₀²)`.
    pub gamma_m: f64,
    /// Thermal occupation `n̄(ω₀) = 1/(e^{βω₀} − 1)`.
    pub n_bar: f64,
    pub beta: f64,
    pub omega0: f64,
}

impl MarkovianRates {
    /// `coth(βω₀/2) = 2n̄ + 1`.
    pub fn coth(&self) -> f64 {
        2.0 * self.n_bar + 1.0
    }

    /// Drift rate: `A = −γ_M I₄`.
    pub fn drift(&self) -> f64 {
        self.gamma_m
    }

    /// Scalar diffusion `Δ_M = γ_M(2n̄ + 1)`, so that `D = 2Δ_M I₄`.
    pub fn diffusion(&self) -> f64 {
        self.gamma_m * self.coth()
    }
}

/// Markovian-limit rates; only defined for Lorentz–Drude baths at finite temperature.
pub fn markovian_coefficients(cfg: &BathConfig) -> Result<MarkovianRates> {
    cfg.check()?;
    let SpectralDensity::LorentzDrude { omega_c } = cfg.sd else {
        return Err(Error::Domain("the Markovian limit is defined for the Lorentz-Drude spectrum".into()));
    };
    if cfg.is_zero_temperature() {
        return Err(Error::Domain("the Markovian limit requires a finite temperature".into()));
    }
    let w0 = cfg.omega0;
    let a2 = cfg.alpha * cfg.alpha;
    Ok(MarkovianRates {
        gamma_m: 2.0 * a2 * omega_c * omega_c * w0 / (omega_c * omega_c + w0 * w0),
        n_bar: cfg.occupation(w0),
        beta: cfg.beta,
        omega0: w0,
    })
}

/// Coefficients sampled on a uniform time grid together with their
/// cumulative integrals `Γ(t) = 2∫γ` and `Δ̄(t) = 2∫Δ` (composite trapezoid).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub config: BathConfig,
    pub times: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub big_gamma: Vec<f64>,
    pub delta_bar: Vec<f64>,
}

/// One row of a [`CoefficientTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSample {
    pub t: f64,
    pub delta: f64,
    pub gamma: f64,
    pub big_gamma: f64,
    pub delta_bar: f64,
}

/// Cumulative composite trapezoid, starting at zero.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..values.len() {
        acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        out.push(acc);
    }
    out
}

/// Minimum number of grid points accepted by [`build_coefficient_table`].
pub const MIN_TABLE_POINTS: usize = 16;

/// Uniform grid `t_i = i·t_max/(n−1)`, both ends included.
pub fn uniform_grid(t_max: f64, n_points: usize) -> Vec<f64> {
    let last = (n_points - 1) as f64;
    (0..n_points).map(|i| t_max * i as f64 / last).collect()
}

pub fn build_coefficient_table(cfg: &BathConfig, t_max: f64, n_points: usize) -> Result<CoefficientTable> {
    build_coefficient_table_with(cfg, t_max, n_points, &QuadratureSettings::default())
}

pub fn build_coefficient_table_with(
    cfg: &BathConfig,
    t_max: f64,
    n_points: usize,
    settings: &QuadratureSettings,
) -> Result<CoefficientTable> {
    cfg.check()?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::Grid(format!("t_max = {t_max} must be positive")));
    }
    if n_points < MIN_TABLE_POINTS {
        return Err(Error::Grid(format!(
            "{n_points} grid points requested, at least {MIN_TABLE_POINTS} required"
        )));
    }
    let times = uniform_grid(t_max, n_points);
    let samples: Vec<Coefficients> = times
        .par_iter()
        .map(|&t| coefficients(cfg, t, settings))
        .collect::<Result<_>>()?;
    let delta: Vec<f64> = samples.iter().map(|c| c.delta).collect();
    let gamma: Vec<f64> = samples.iter().map(|c| c.gamma).collect();
    let twice = |v: &[f64]| v.iter().map(|x| 2.0 * x).collect::<Vec<_>>();
    let big_gamma = cumulative_trapezoid(&times, &twice(&gamma));
    let delta_bar = cumulative_trapezoid(&times, &twice(&delta));
    Ok(CoefficientTable { config: *cfg, times, delta, gamma, big_gamma, delta_bar })
}

impl CoefficientTable {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn sample(&self, i: usize) -> CoefficientSample {
        CoefficientSample {
            t: self.times[i],
            delta: self.delta[i],
            gamma: self.gamma[i],
            big_gamma: self.big_gamma[i],
            delta_bar: self.delta_bar[i],
        }
    }

    pub fn last(&self) -> CoefficientSample {
        self.sample(self.len() - 1)
    }

    /// Index of the grid point equal to `t` (within rounding), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let h = self.step();
        let i = (t / h).round();
        if i < 0.0 || i as usize >= self.len() {
            return None;
        }
        let i = i as usize;
        ((self.times[i] - t).abs() <= 1e-9 * h).then_some(i)
    }

    /// Locates `t` on the grid: the left node index and the fractional offset.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let t_max = self.t_max();
        if !(t >= 0.0) || t > t_max * (1.0 + 1e-12) {
            return Err(Error::Range { t, t_max });
        }
        if let Some(i) = self.index_of(t) {
            return Ok((i, 0.0));
        }
        let h = self.step();
        let i = ((t / h).floor() as usize).min(self.len() - 2);
        Ok((i, (t - self.times[i]) / h))
    }

    /// Row at time `t`, linearly interpolated between grid points.
    pub fn at(&self, t: f64) -> Result<CoefficientSample> {
        let (i, frac) = self.locate(t)?;
        if frac == 0.0 {
            return Ok(self.sample(i));
        }
        let lerp = |v: &[f64]| v[i] + frac * (v[i + 1] - v[i]);
        Ok(CoefficientSample {
            t,
            delta: lerp(&self.delta),
            gamma: lerp(&self.gamma),
            big_gamma: lerp(&self.big_gamma),
            delta_bar: lerp(&self.delta_bar),
        })
    }
}
