//! Covariance-matrix propagation under the time-local master equation
//! `σ̇ = Aσ + σAᵀ + D` with `A = −γ(t)·I₄` and `D = 2Δ(t)·I₄`.

use nalgebra::Matrix4;

use crate::bath::{CoefficientTable, MarkovianRates};
use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;

/// Largest tolerated violation of `ν₋ ≥ 1` along a propagated trajectory.
pub const TOL_PHYSICALITY_DRIFT: f64 = 1e-6;

/// Entries beyond this magnitude abort the numerical integrator.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Drift and diffusion matrices of the Lyapunov equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDiffusion {
    pub a: Matrix4<f64>,
    pub d: Matrix4<f64>,
}

impl DriftDiffusion {
    /// `A = −γ·I₄`, `D = 2Δ·I₄`.
    pub fn scalar(gamma: f64, delta: f64) -> Self {
        Self { a: Matrix4::identity() * -gamma, d: Matrix4::identity() * (2.0 * delta) }
    }

    /// `A = −γ_M·I₄`, `D = 2γ_M(2n̄ + 1)·I₄`.
    pub fn markovian(rates: &MarkovianRates) -> Self {
        Self::scalar(rates.drift(), rates.diffusion())
    }

    pub fn zero() -> Self {
        Self { a: Matrix4::zeros(), d: Matrix4::zeros() }
    }

    /// Right-hand side of the Lyapunov equation.
    pub fn rhs(&self, sigma: &Matrix4<f64>) -> Matrix4<f64> {
        self.a * sigma + sigma * self.a.transpose() + self.d
    }

    pub fn diffusion_is_positive_semidefinite(&self) -> bool {
        let sym = (self.d + self.d.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min() >= -1e-14 * sym.amax().max(1.0)
    }
}

/// Closed-form propagator `σ(t) = σ₀ e^{−Γ(t)} + 2Δ_Γ(t) I₄` on a coefficient table.
#[derive(Debug, Clone)]
pub struct ExactPropagator<'a> {
    table: &'a CoefficientTable,
    /// `Δ_Γ(t_i) = e^{−Γ(t_i)} ∫₀^{t_i} Δ(τ) e^{Γ(τ)} dτ`, trapezoid on the table grid.
    delta_gamma: Vec<f64>,
}

impl<'a> ExactPropagator<'a> {
    pub fn new(table: &'a CoefficientTable) -> Self {
        let weighted: Vec<f64> = table
            .delta
            .iter()
            .zip(&table.big_gamma)
            .map(|(d, g)| d * g.exp())
            .collect();
        let integral = crate::bath::cumulative_trapezoid(&table.times, &weighted);
        let delta_gamma = integral
            .iter()
            .zip(&table.big_gamma)
            .map(|(i, g)| i * (-g).exp())
            .collect();
        Self { table, delta_gamma }
    }

    pub fn table(&self) -> &CoefficientTable {
        self.table
    }

    /// `Δ_Γ` at every grid point.
    pub fn delta_gamma(&self) -> &[f64] {
        &self.delta_gamma
    }

    /// `(e^{−Γ(t)}, 2Δ_Γ(t))`, linearly interpolated off the grid.
    pub fn factors(&self, t: f64) -> Result<(f64, f64)> {
        let (i, frac) = self.table.locate(t)?;
        let g = &self.table.big_gamma;
        let dg = &self.delta_gamma;
        if frac == 0.0 {
            return Ok(((-g[i]).exp(), 2.0 * dg[i]));
        }
        let big_gamma = g[i] + frac * (g[i + 1] - g[i]);
        let delta_gamma = dg[i] + frac * (dg[i + 1] - dg[i]);
        Ok(((-big_gamma).exp(), 2.0 * delta_gamma))
    }

    pub fn evolve(&self, sigma0: &CovarianceMatrix, t: f64) -> Result<CovarianceMatrix> {
        if t == 0.0 {
            return Ok(*sigma0);
        }
        let (decay, offset) = self.factors(t)?;
        Ok(sigma0.affine(decay, offset))
    }

    /// States at every grid point.
    pub fn trajectory(&self, sigma0: &CovarianceMatrix) -> Vec<CovarianceMatrix> {
        self.table
            .big_gamma
            .iter()
            .zip(&self.delta_gamma)
            .map(|(g, dg)| sigma0.affine((-g).exp(), 2.0 * dg))
            .collect()
    }
}

/// Exact propagation to time `t`.
pub fn evolve_exact(sigma0: &CovarianceMatrix, table: &CoefficientTable, t: f64) -> Result<CovarianceMatrix> {
    ExactPropagator::new(table).evolve(sigma0, t)
}

/// Weak-coupling propagation `σ(t) = [1 − Γ(t)]σ₀ + Δ̄(t)·I₄`.
pub fn evolve_weak_coupling(sigma0: &CovarianceMatrix, table: &CoefficientTable, t: f64) -> Result<CovarianceMatrix> {
    if t == 0.0 {
        return Ok(*sigma0);
    }
    let row = table.at(t)?;
    Ok(sigma0.affine(1.0 - row.big_gamma, row.delta_bar))
}

/// Weak-coupling states at every grid point.
pub fn weak_coupling_trajectory(sigma0: &CovarianceMatrix, table: &CoefficientTable) -> Vec<CovarianceMatrix> {
    table
        .big_gamma
        .iter()
        .zip(&table.delta_bar)
        .map(|(g, db)| sigma0.affine(1.0 - g, *db))
        .collect()
}

/// Whether the weak-coupling expansion is still meaningful at `t` (`Γ(t) < 1`).
pub fn weak_coupling_in_window(table: &CoefficientTable, t: f64) -> Result<bool> {
    Ok(table.at(t)?.big_gamma < 1.0)
}

/// Classic fourth-order Runge–Kutta integration of the Lyapunov equation
/// from 0 to `t` with step at most `h`. The step is shrunk so that an
/// integer number of steps lands exactly on `t`.
pub fn evolve_rk4<F>(sigma0: &CovarianceMatrix, coefficients: F, t: f64, h: f64) -> Result<CovarianceMatrix>
where
    F: FnMut(f64) -> Result<DriftDiffusion>,
{
    let mut last = *sigma0;
    rk4_walk(sigma0, coefficients, t, h, |_, s| last = s)?;
    Ok(last)
}

/// Like [`evolve_rk4`], reporting the state after every step.
pub fn rk4_walk<F, V>(sigma0: &CovarianceMatrix, mut coefficients: F, t: f64, h: f64, mut visit: V) -> Result<()>
where
    F: FnMut(f64) -> Result<DriftDiffusion>,
    V: FnMut(f64, CovarianceMatrix),
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("step {h} must be positive")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("end time {t} must be non-negative")));
    }
    if t == 0.0 {
        return Ok(());
    }
    let n = (t / h).ceil() as usize;
    let h = t / n as f64;
    let mut sigma = *sigma0.matrix();
    let mut prev = coefficients(0.0)?;
    for k in 0..n {
        let t0 = k as f64 * h;
        let mid = coefficients(t0 + 0.5 * h)?;
        let end = coefficients(if k + 1 == n { t } else { t0 + h })?;
        let k1 = prev.rhs(&sigma);
        let k2 = mid.rhs(&(sigma + k1 * (0.5 * h)));
        let k3 = mid.rhs(&(sigma + k2 * (0.5 * h)));
        let k4 = end.rhs(&(sigma + k3 * h));
        sigma += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        sigma = (sigma + sigma.transpose()) * 0.5;
        let t1 = t0 + h;
        if !sigma.iter().all(|x| x.is_finite() && x.abs() <= OVERFLOW_GUARD) {
            return Err(Error::Stability(format!("entries exceeded {OVERFLOW_GUARD:e} at t = {t1}")));
        }
        visit(t1, CovarianceMatrix::new(sigma)?);
        prev = end;
    }
    Ok(())
}

/// Markovian solution `σ(t) = σ₀ e^{−2γ_M t} + (2n̄+1)(1 − e^{−2γ_M t}) I₄`.
pub fn markovian_propagate(sigma0: &CovarianceMatrix, gamma_m: f64, n_bar: f64, t: f64) -> CovarianceMatrix {
    let decay = (-2.0 * gamma_m * t).exp();
    sigma0.affine(decay, (2.0 * n_bar + 1.0) * -(-2.0 * gamma_m * t).exp_m1())
}

/// `σ_∞ = Δ(t_max)/γ(t_max)·I₄`, the last table row standing in for `t → ∞`.
pub fn steady_state(table: &CoefficientTable) -> Result<CovarianceMatrix> {
    let last = table.last();
    steady_state_from(last.delta, last.gamma)
}

/// `(Δ/γ)·I₄`.
pub fn steady_state_from(delta: f64, gamma: f64) -> Result<CovarianceMatrix> {
    if gamma.abs() < 1e-14 {
        return Err(Error::Degenerate(format!("dissipation rate {gamma:e} too small for a steady state")));
    }
    Ok(CovarianceMatrix::scaled_identity(delta / gamma))
}

/// Markovian fixed point `(2n̄ + 1)·I₄`.
pub fn markovian_steady_state(rates: &MarkovianRates) -> CovarianceMatrix {
    CovarianceMatrix::scaled_identity(rates.coth())
}

/// Fails when `σ` violates the uncertainty bound by more than
/// [`TOL_PHYSICALITY_DRIFT`].
pub fn check_physical(sigma: &CovarianceMatrix, t: f64) -> Result<()> {
    let nu = sigma.symplectic_eigenvalues()?.nu_minus;
    if nu < 1.0 - TOL_PHYSICALITY_DRIFT {
        return Err(Error::NonPhysical(format!("ν₋ = {nu} at t = {t}")));
    }
    Ok(())
}
