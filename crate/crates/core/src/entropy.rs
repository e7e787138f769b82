//! Entropy production rate, entropy flux and peak extraction.
//!
//! The rate is
//!
//! ```text
//! Π = ½Tr[σ⁻¹D] + 2Tr[A_irr] + 2Tr[A_irrᵀ D⁻¹ A_irr σ],   A_irr = (A + E A Eᵀ)/2
//! ```
//!
//! with `E = diag(1, −1, 1, −1)`. For scalar `A = −γ I₄`, `D = 2Δ I₄` it reduces
//! to `Π = Δ Tr σ⁻¹ − 8γ + (γ²/Δ) Tr σ`.

use nalgebra::Matrix4;
use serde::Serialize;

use crate::bath::CoefficientSample;
use crate::dynamics::DriftDiffusion;
use crate::error::{Error, Result};
use crate::gaussian::{time_reversal, CovarianceMatrix};

/// Diffusion magnitudes at or below this are treated as singular.
pub const TOL_DIFFUSION: f64 = 1e-300;

/// Default bound on `|Π(t_end)|` for integrated production.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

/// Irreversible part of the drift, `(A + E A Eᵀ)/2`.
pub fn irreversible_drift(a: &Matrix4<f64>) -> Matrix4<f64> {
    let e = time_reversal();
    (a + e * a * e.transpose()) * 0.5
}

/// General matrix form of the entropy production rate.
pub fn entropy_production_rate(sigma: &CovarianceMatrix, dd: &DriftDiffusion) -> Result<f64> {
    let sigma_inv = sigma.try_inverse()?;
    let d_inv = dd.d.try_inverse().ok_or(Error::Singularity { t: f64::NAN, delta: dd.d.amax() / 2.0 })?;
    let a_irr = irreversible_drift(&dd.a);
    let s = sigma.matrix();
    Ok(0.5 * (sigma_inv * dd.d).trace()
        + 2.0 * a_irr.trace()
        + 2.0 * (a_irr.transpose() * d_inv * a_irr * s).trace())
}

/// Scalar reduction `Π = Δ Tr σ⁻¹ − 8γ + (γ²/Δ) Tr σ`.
pub fn entropy_production_rate_scalar(sigma: &CovarianceMatrix, gamma: f64, delta: f64) -> Result<f64> {
    if delta.abs() <= TOL_DIFFUSION {
        return Err(Error::Singularity { t: f64::NAN, delta });
    }
    let trace_inv = sigma.try_inverse()?.trace();
    Ok(delta * trace_inv - 8.0 * gamma + gamma * gamma / delta * sigma.trace())
}

fn check_slice(s: f64, nu_tilde: f64) -> Result<()> {
    if !(s >= 1.0) || !s.is_finite() {
        return Err(Error::Domain(format!("s = {s} must be at least 1")));
    }
    if !(nu_tilde > 0.0 && nu_tilde <= s * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("ν̃₋ = {nu_tilde} must lie in (0, s]")));
    }
    Ok(())
}

/// Closed form of the rate on weak-coupling states of the slice
/// `g = 2d + 1`, `λ = 1`, parametrised by `s` and the initial `ν̃₋`.
pub fn pi_closed_nonmarkovian(s: f64, nu_tilde: f64, row: &CoefficientSample) -> Result<f64> {
    check_slice(s, nu_tilde)?;
    let CoefficientSample { t, delta, gamma, big_gamma, delta_bar } = *row;
    if delta.abs() <= TOL_DIFFUSION {
        return Err(Error::Singularity { t, delta });
    }
    let shrink = 1.0 - big_gamma;
    let mean = s * shrink + delta_bar;
    let block_det = nu_tilde * (2.0 * s - nu_tilde) * shrink * shrink + 2.0 * s * delta_bar * shrink + delta_bar * delta_bar;
    Ok(-8.0 * gamma + 4.0 * gamma * gamma * mean / delta + 4.0 * delta * mean / block_det)
}

fn check_markovian(gamma_m: f64, beta: f64, omega0: f64) -> Result<()> {
    if !(gamma_m > 0.0) || !gamma_m.is_finite() {
        return Err(Error::Domain(format!("γ_M = {gamma_m} must be positive")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("β = {beta} must be positive and finite")));
    }
    if !(omega0 > 0.0) || !omega0.is_finite() {
        return Err(Error::Domain(format!("ω₀ = {omega0} must be positive")));
    }
    Ok(())
}

/// Markovian rate at time `t` on the same slice.
pub fn pi_closed_markovian(t: f64, s: f64, nu_tilde: f64, gamma_m: f64, beta: f64, omega0: f64) -> Result<f64> {
    check_slice(s, nu_tilde)?;
    check_markovian(gamma_m, beta, omega0)?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time {t} must be non-negative")));
    }
    let x = 0.5 * beta * omega0;
    let (tanh, coth) = (x.tanh(), 1.0 / x.tanh());
    let decay = (-2.0 * gamma_m * t).exp();
    let filled = -(-2.0 * gamma_m * t).exp_m1();
    let first = 4.0 * gamma_m * (1.0 + decay * (s * tanh - 1.0));
    // last term with numerator and denominator multiplied by e^{−4γt}
    let numer = 4.0 * gamma_m * coth * (s * decay + filled * coth);
    let denom = ((2.0 * s - nu_tilde) * decay + filled * coth) * (nu_tilde * decay + filled * coth);
    Ok(-8.0 * gamma_m + first + numer / denom)
}

/// Markovian rate at `t = 0`, where it is maximal.
pub fn pi_max_markovian(s: f64, nu_tilde: f64, gamma_m: f64, beta: f64, omega0: f64) -> Result<f64> {
    check_slice(s, nu_tilde)?;
    check_markovian(gamma_m, beta, omega0)?;
    let x = 0.5 * beta * omega0;
    let (tanh, coth) = (x.tanh(), 1.0 / x.tanh());
    Ok(-8.0 * gamma_m + 4.0 * s * gamma_m * tanh + 4.0 * s * gamma_m * coth / ((2.0 * s - nu_tilde) * nu_tilde))
}

/// Time series of thermodynamic quantities along one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermoTrace {
    pub times: Vec<f64>,
    pub pi: Vec<f64>,
    pub e_n: Vec<f64>,
    pub s2: Vec<f64>,
    pub phi: Vec<f64>,
    /// `Π(0)` was extrapolated from the first positive times rather than evaluated.
    pub pi_origin_extrapolated: bool,
}

impl ThermoTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Builds a trace from states and the drift/diffusion at each time.
    ///
    /// Where the diffusion vanishes (the origin of non-Markovian runs) `Π`
    /// is filled by linear extrapolation from the next two samples.
    pub fn from_states(times: &[f64], states: &[CovarianceMatrix], rates: &[(f64, f64)]) -> Result<Self> {
        let n = times.len();
        if states.len() != n || rates.len() != n {
            return Err(Error::Grid("times, states and rates differ in length".into()));
        }
        if n < 3 {
            return Err(Error::Grid(format!("{n} samples, at least 3 required")));
        }
        let mut pi = Vec::with_capacity(n);
        let mut singular = Vec::new();
        for (i, (sigma, &(gamma, delta))) in states.iter().zip(rates).enumerate() {
            match entropy_production_rate_scalar(sigma, gamma, delta) {
                Ok(v) => pi.push(v),
                Err(Error::Singularity { .. }) if i == 0 => {
                    singular.push(i);
                    pi.push(f64::NAN);
                }
                Err(Error::Singularity { delta, .. }) => return Err(Error::Singularity { t: times[i], delta }),
                Err(e) => return Err(e),
            }
        }
        let extrapolated = !singular.is_empty();
        if extrapolated {
            let (t1, t2) = (times[1], times[2]);
            pi[0] = pi[1] + (times[0] - t1) * (pi[2] - pi[1]) / (t2 - t1);
        }
        let e_n = states.iter().map(|s| s.log_negativity()).collect::<Result<Vec<_>>>()?;
        let s2: Vec<f64> = states.iter().map(|s| s.renyi2_entropy()).collect();
        let phi = entropy_flux(times, &pi, &s2)?;
        Ok(Self { times: times.to_vec(), pi, e_n, s2, phi, pi_origin_extrapolated: extrapolated })
    }
}

/// Second-order finite-difference derivative (central inside, one-sided at the ends).
pub fn derivative(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 || times.len() != n {
        return Err(Error::Grid(format!("{n} samples, at least 3 required")));
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let (h0, h1) = (times[i] - times[i - 1], times[i + 1] - times[i]);
        out[i] = (h0 * h0 * values[i + 1] - h1 * h1 * values[i - 1] + (h1 * h1 - h0 * h0) * values[i])
            / (h0 * h1 * (h0 + h1));
    }
    let one_sided = |y0: f64, y1: f64, y2: f64, h0: f64, h1: f64| {
        -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * y0 + (h0 + h1) / (h0 * h1) * y1 - h0 / (h1 * (h0 + h1)) * y2
    };
    out[0] = one_sided(values[0], values[1], values[2], times[1] - times[0], times[2] - times[1]);
    out[n - 1] = -one_sided(
        values[n - 1],
        values[n - 2],
        values[n - 3],
        times[n - 1] - times[n - 2],
        times[n - 2] - times[n - 3],
    );
    Ok(out)
}

/// `Φ = Π − dS₂/dt`.
pub fn entropy_flux(times: &[f64], pi: &[f64], s2: &[f64]) -> Result<Vec<f64>> {
    let ds = derivative(times, s2)?;
    Ok(pi.iter().zip(ds).map(|(p, d)| p - d).collect())
}

/// Integrated production with its tail error bound `|Π(t_end)|·t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratedProduction {
    pub sigma: f64,
    pub tail_bound: f64,
}

/// Trapezoidal `Σ = ∫ Π dt` over the trace.
pub fn integrated_entropy_production(trace: &ThermoTrace, tail_tol: f64) -> Result<IntegratedProduction> {
    integrate_samples(&trace.times, &trace.pi, tail_tol)
}

pub fn integrate_samples(times: &[f64], pi: &[f64], tail_tol: f64) -> Result<IntegratedProduction> {
    if times.len() < 2 || times.len() != pi.len() {
        return Err(Error::Grid("at least 2 samples required".into()));
    }
    let last = pi[pi.len() - 1];
    if last.abs() > tail_tol {
        return Err(Error::Tail { last: last.abs(), tol: tail_tol });
    }
    let sigma = crate::bath::cumulative_trapezoid(times, pi).pop().unwrap_or(0.0);
    Ok(IntegratedProduction { sigma, tail_bound: last.abs() * times[times.len() - 1] })
}

/// Extremes of a sampled series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peaks {
    pub max: f64,
    pub t_max: f64,
    pub min: f64,
    pub t_min: f64,
}

/// Global maximum and minimum, each refined by the parabola through the
/// sample and its two neighbours when the vertex falls between them.
pub fn find_peaks(times: &[f64], values: &[f64]) -> Result<Peaks> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::Grid("empty or mismatched series".into()));
    }
    let mut i_max = 0;
    let mut i_min = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[i_max] {
            i_max = i;
        }
        if *v < values[i_min] {
            i_min = i;
        }
    }
    let (t_max, max) = refine(times, values, i_max, true);
    let (t_min, min) = refine(times, values, i_min, false);
    Ok(Peaks { max, t_max, min, t_min })
}

/// First local maximum of a sampled series (the first sample that is not
/// exceeded by its successor), parabolically refined. Returns `(t, value)`.
pub fn first_peak(times: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::Grid("empty or mismatched series".into()));
    }
    let i = (0..values.len() - 1).find(|&i| values[i + 1] < values[i]).unwrap_or(values.len() - 1);
    Ok(refine(times, values, i, true))
}

pub fn trace_peaks(trace: &ThermoTrace) -> Result<Peaks> {
    find_peaks(&trace.times, &trace.pi)
}

fn refine(times: &[f64], values: &[f64], i: usize, maximum: bool) -> (f64, f64) {
    if i == 0 || i + 1 >= values.len() {
        return (times[i], values[i]);
    }
    let (x0, x1, x2) = (times[i - 1], times[i], times[i + 1]);
    let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if curvature == 0.0 || (maximum && curvature > 0.0) || (!maximum && curvature < 0.0) {
        return (x1, y1);
    }
    // vertex of y = y1 + b (x − x1) + c (x − x1)²
    let b = d01 + curvature * (x1 - x0);
    let dx = -b / (2.0 * curvature);
    let xv = x1 + dx;
    if xv <= x0 || xv >= x2 {
        return (x1, y1);
    }
    let yv = y1 + b * dx + curvature * dx * dx;
    let better = if maximum { yv >= y1 } else { yv <= y1 };
    if better && yv.is_finite() {
        (xv, yv)
    } else {
        (x1, y1)
    }
}
