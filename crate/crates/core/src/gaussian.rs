//! Two-mode Gaussian states in the covariance-matrix picture.
//!
//! Quadratures are ordered `(q1, p1, q2, p2)` and the vacuum has covariance
//! matrix equal to the identity, so a state is physical when every symplectic
//! eigenvalue is at least one.

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the uncertainty bound `ν₋ ≥ 1`.
pub const TOL_PHYS: f64 = 1e-9;

/// Largest asymmetry accepted (and then removed) by [`CovarianceMatrix::new`].
const TOL_SYMMETRY: f64 = 1e-9;

/// Radicands in the standard-form parametrisation that are negative by less
/// than this (relative to their scale) are rounding noise and clamp to zero.
const TOL_RADICAND: f64 = 1e-10;

const SCHUR_MAX_ITER: usize = 1000;

/// Symplectic form for two modes.
pub fn symplectic_form() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    )
}

/// Phase-space time reversal: flips both momenta.
pub fn time_reversal() -> Matrix4<f64> {
    Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, 1.0, -1.0))
}

/// Covariance matrix of a two-mode Gaussian state. Always exactly symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix(Matrix4<f64>);

impl CovarianceMatrix {
    /// Wraps `m`, symmetrising away asymmetries below rounding level.
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        let defect = symmetry_defect(&m);
        let scale = m.amax().max(1.0);
        if defect > TOL_SYMMETRY * scale {
            return Err(Error::NonPhysical(format!(
                "covariance matrix is not symmetric (defect {defect:e})"
            )));
        }
        Ok(Self((m + m.transpose()) * 0.5))
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    /// `scale · I₄`.
    pub fn scaled_identity(scale: f64) -> Self {
        Self(Matrix4::identity() * scale)
    }

    /// Standard form with diagonal entries `a`, `b` and correlations `c₊`, `c₋`.
    pub fn standard_form(a: f64, b: f64, c_plus: f64, c_minus: f64) -> Self {
        Self(Matrix4::new(
            a, 0.0, c_plus, 0.0, //
            0.0, a, 0.0, c_minus, //
            c_plus, 0.0, b, 0.0, //
            0.0, c_minus, 0.0, b,
        ))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Upper-left (mode 1) 2×2 block.
    pub fn local_block_1(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 0).into_owned()
    }

    /// Lower-right (mode 2) 2×2 block.
    pub fn local_block_2(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(2, 2).into_owned()
    }

    /// Off-diagonal correlation block.
    pub fn correlation_block(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 2).into_owned()
    }

    /// `x·σ + y·I₄`, the action of every scalar Gaussian channel in this crate.
    pub fn affine(&self, x: f64, y: f64) -> Self {
        Self(self.0 * x + Matrix4::identity() * y)
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0).amax()
    }

    pub fn validate(&self) -> ValidationReport {
        ValidationReport::of(&self.0)
    }

    pub fn symplectic_eigenvalues(&self) -> Result<SymplecticSpectrum> {
        symplectic_spectrum(&self.0)
    }

    pub fn partial_transpose(&self) -> Self {
        let p = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, -1.0));
        Self(p * self.0 * p)
    }

    /// Smallest symplectic eigenvalue of the partial transpose.
    pub fn ppt_min_eigenvalue(&self) -> Result<f64> {
        Ok(self.partial_transpose().symplectic_eigenvalues()?.nu_minus)
    }

    /// Logarithmic negativity `max(0, −ln ν̃₋)`.
    pub fn log_negativity(&self) -> Result<f64> {
        let nu = self.ppt_min_eigenvalue()?;
        Ok((-nu.ln()).max(0.0))
    }

    pub fn symplectic_data(&self) -> Result<SymplecticData> {
        let spectrum = self.symplectic_eigenvalues()?;
        Ok(SymplecticData {
            nu_minus: spectrum.nu_minus,
            nu_plus: spectrum.nu_plus,
            nu_tilde_minus: self.ppt_min_eigenvalue()?,
        })
    }

    /// Global and local purities `(μ, μ₁, μ₂)`.
    pub fn purities(&self) -> Purities {
        Purities {
            global: 1.0 / self.determinant().sqrt(),
            mode_1: 1.0 / self.local_block_1().determinant().sqrt(),
            mode_2: 1.0 / self.local_block_2().determinant().sqrt(),
        }
    }

    /// Product of the two local states: the correlation blocks are zeroed.
    pub fn decorrelate(&self) -> Self {
        let mut m = self.0;
        m.fixed_view_mut::<2, 2>(0, 2).fill(0.0);
        m.fixed_view_mut::<2, 2>(2, 0).fill(0.0);
        Self(m)
    }

    /// Rényi-2 Wigner entropy up to an additive constant: `½ ln det σ`.
    pub fn renyi2_entropy(&self) -> f64 {
        0.5 * self.determinant().ln()
    }

    pub fn try_inverse(&self) -> Result<Matrix4<f64>> {
        self.0
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("covariance matrix is singular".into()))
    }
}

/// Largest `|m_ij − m_ji|`.
pub fn symmetry_defect(m: &Matrix4<f64>) -> f64 {
    (m - m.transpose()).amax()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Purities {
    pub global: f64,
    pub mode_1: f64,
    pub mode_2: f64,
}

/// Parameters `(s, d, g, λ)` of a two-mode standard-form state.
///
/// `s` is the mean local mixedness, `d` the local asymmetry, `g` the inverse
/// global purity and `λ ∈ [−1, 1]` interpolates between maximally (`+1`) and
/// minimally (`−1`) entangled states at fixed purities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateParams {
    pub s: f64,
    pub d: f64,
    pub g: f64,
    pub lambda: f64,
}

impl StateParams {
    pub fn new(s: f64, d: f64, g: f64, lambda: f64) -> Self {
        Self { s, d, g, lambda }
    }

    /// Pure symmetric two-mode squeezed state with local mixedness `s`.
    pub fn two_mode_squeezed(s: f64) -> Self {
        Self::new(s, 0.0, 1.0, 1.0)
    }

    /// Checks `s ≥ 1`, `|d| ≤ s − 1`, `2|d| + 1 ≤ g ≤ s² − d²` and `λ ∈ [−1, 1]`.
    pub fn check_constraints(&self) -> Result<()> {
        let Self { s, d, g, lambda } = *self;
        if ![s, d, g, lambda].iter().all(|v| v.is_finite()) {
            return Err(Error::ConstraintViolation(format!(
                "non-finite parameter in {self:?}"
            )));
        }
        if s < 1.0 {
            return Err(Error::ConstraintViolation(format!("s = {s} < 1")));
        }
        if d.abs() > s - 1.0 {
            return Err(Error::ConstraintViolation(format!(
                "|d| = {} > s - 1 = {}",
                d.abs(),
                s - 1.0
            )));
        }
        if g < 2.0 * d.abs() + 1.0 {
            return Err(Error::ConstraintViolation(format!(
                "g = {g} < 2|d| + 1 = {}",
                2.0 * d.abs() + 1.0
            )));
        }
        if g > s * s - d * d {
            return Err(Error::ConstraintViolation(format!(
                "g = {g} > s² - d² = {} (det σ cannot exceed det A · det B)",
                s * s - d * d
            )));
        }
        if !(-1.0..=1.0).contains(&lambda) {
            return Err(Error::ConstraintViolation(format!(
                "lambda = {lambda} outside [-1, 1]"
            )));
        }
        Ok(())
    }

    /// The interpolation term `f` entering the correlations.
    pub fn f_term(&self) -> f64 {
        let Self { d, g, lambda, .. } = *self;
        (g * g + 1.0) * (lambda - 1.0) / 2.0 - (2.0 * d * d + g) * (lambda + 1.0)
    }
}

/// Builds the standard-form covariance matrix of `p`.
pub fn build_standard_form(p: StateParams) -> Result<CovarianceMatrix> {
    p.check_constraints()?;
    let StateParams { s, d, g, .. } = p;
    let denom_sq = s * s - d * d;
    if denom_sq <= 0.0 {
        return Err(Error::ConstraintViolation(format!(
            "s² - d² = {denom_sq} must be positive"
        )));
    }
    let f = p.f_term();
    let local = 4.0 * d * d + f;
    let total = 4.0 * s * s + f;
    let rad_local = checked_radicand(local, g, "(4d² + f)² - 4g²")?;
    let rad_total = checked_radicand(total, g, "(4s² + f)² - 4g²")?;
    let denom = 4.0 * denom_sq.sqrt();
    let c_plus = (rad_local.sqrt() + rad_total.sqrt()) / denom;
    let c_minus = (rad_local.sqrt() - rad_total.sqrt()) / denom;

    let sigma = CovarianceMatrix::standard_form(s + d, s - d, c_plus, c_minus);
    let report = sigma.validate();
    if !report.physical {
        return Err(Error::NonPhysical(format!(
            "parameters {p:?} give ν₋ = {} < 1",
            report.min_symplectic_eigenvalue
        )));
    }
    Ok(sigma)
}

fn checked_radicand(x: f64, g: f64, label: &str) -> Result<f64> {
    let value = x * x - 4.0 * g * g;
    let scale = (x * x).max(4.0 * g * g).max(1.0);
    if value >= 0.0 {
        Ok(value)
    } else if value >= -TOL_RADICAND * scale {
        Ok(0.0)
    } else {
        Err(Error::NonPhysical(format!("radicand {label} = {value:e} is negative")))
    }
}

/// Outcome of [`ValidationReport::of`]; failures are reported, never clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub symmetry_defect: f64,
    pub min_symplectic_eigenvalue: f64,
    pub positive_definite: bool,
    pub physical: bool,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn of(m: &Matrix4<f64>) -> Self {
        let mut failures = Vec::new();
        let defect = symmetry_defect(m);
        if defect > TOL_SYMMETRY * m.amax().max(1.0) {
            failures.push(format!("symmetry defect {defect:e}"));
        }
        let sym = (m + m.transpose()) * 0.5;
        let positive_definite = sym.cholesky().is_some();
        if !positive_definite {
            failures.push("not positive definite".to_string());
        }
        let nu_min = match symplectic_spectrum(&sym) {
            Ok(spec) => spec.nu_minus,
            Err(e) => {
                failures.push(e.to_string());
                f64::NAN
            }
        };
        if !(nu_min >= 1.0 - TOL_PHYS) {
            failures.push(format!("uncertainty principle violated: ν₋ = {nu_min}"));
        }
        Self {
            symmetry_defect: defect,
            min_symplectic_eigenvalue: nu_min,
            positive_definite,
            physical: failures.is_empty(),
            failures,
        }
    }
}

/// Symplectic eigenvalues `ν₋ ≤ ν₊` of a two-mode covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticSpectrum {
    pub nu_minus: f64,
    pub nu_plus: f64,
}

/// Symplectic eigenvalues of `σ` and of its partial transpose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticData {
    pub nu_minus: f64,
    pub nu_plus: f64,
    pub nu_tilde_minus: f64,
}

/// Moduli of the eigenvalues of `iΩσ`, which come in equal pairs.
///
/// For positive-definite `σ` these are the singular values of the
/// antisymmetric `M = σ^{1/2} Ω σ^{1/2}`, obtained from the symmetric
/// eigenproblem of `MᵀM`. Other matrices go through a real Schur form of `Ωσ`.
pub fn symplectic_spectrum(m: &Matrix4<f64>) -> Result<SymplecticSpectrum> {
    let eig = m.symmetric_eigen();
    let mut squares: Vec<f64> = if eig.eigenvalues.min() > 0.0 {
        let root = &eig.eigenvectors
            * Matrix4::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        let skew = root * symplectic_form() * root;
        (skew.transpose() * skew).symmetric_eigenvalues().iter().copied().collect()
    } else {
        let schur = (symplectic_form() * m)
            .try_schur(f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or_else(|| Error::NumericalFailure("Schur decomposition of Ωσ did not converge".into()))?;
        schur.complex_eigenvalues().iter().map(|z| z.norm_sqr()).collect()
    };
    if squares.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite symplectic eigenvalue".into()));
    }
    squares.sort_by(f64::total_cmp);
    Ok(SymplecticSpectrum {
        nu_minus: (0.5 * (squares[0] + squares[1])).max(0.0).sqrt(),
        nu_plus: (0.5 * (squares[2] + squares[3])).max(0.0).sqrt(),
    })
}

/// Symplectic invariant `Δ(σ) = det A + det B + 2 det C` of the block form.
pub fn seralian(sigma: &CovarianceMatrix) -> f64 {
    sigma.local_block_1().determinant()
        + sigma.local_block_2().determinant()
        + 2.0 * sigma.correlation_block().determinant()
}

/// Closed-form symplectic eigenvalues from `Δ(σ)` and `det σ`.
pub fn symplectic_spectrum_closed_form(sigma: &CovarianceMatrix) -> SymplecticSpectrum {
    let delta = seralian(sigma);
    let det = sigma.determinant();
    let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
    SymplecticSpectrum {
        nu_minus: (0.5 * (delta - disc)).max(0.0).sqrt(),
        nu_plus: (0.5 * (delta + disc)).sqrt(),
    }
}

/// Local asymmetry `d` on the slice `g = 2d + 1`, `λ = 1` whose partial
/// transpose has smallest symplectic eigenvalue `nu_tilde`.
pub fn d_from_nu(s: f64, nu_tilde: f64) -> Result<f64> {
    if !(nu_tilde > 0.0 && nu_tilde <= s) {
        return Err(Error::Domain(format!(
            "ν̃₋ = {nu_tilde} must lie in (0, s = {s}]"
        )));
    }
    Ok(-0.5 * (nu_tilde * nu_tilde - 2.0 * s * nu_tilde + 1.0))
}

/// Inverse of [`d_from_nu`]: `ν̃₋ = s − √(s² − 2d − 1)`.
pub fn nu_from_d(s: f64, d: f64) -> Result<f64> {
    let rad = s * s - 2.0 * d - 1.0;
    if rad < 0.0 {
        return Err(Error::Domain(format!("s² - 2d - 1 = {rad} < 0")));
    }
    Ok(s - rad.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    #[test]
    fn vacuum_is_identity() {
        for lambda in [-1.0, 0.0, 1.0] {
            let sigma = build_standard_form(StateParams::new(1.0, 0.0, 1.0, lambda)).unwrap();
            assert_eq!(*sigma.matrix(), Matrix4::identity());
        }
    }

    #[test]
    fn two_mode_squeezed_entries() {
        let sigma = build_standard_form(StateParams::two_mode_squeezed(2.0)).unwrap();
        assert!((sigma.get(0, 0) - 2.0).abs() < 1e-14);
        assert!((sigma.get(2, 2) - 2.0).abs() < 1e-14);
        assert!((sigma.get(0, 2) - SQRT3).abs() < 1e-12);
        assert!((sigma.get(1, 3) + SQRT3).abs() < 1e-12);
        assert!((sigma.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn asymmetry_beyond_local_mixedness_is_rejected() {
        let err = build_standard_form(StateParams::new(2.0, 2.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation(_)), "{err}");
    }

    #[test]
    fn global_mixedness_bounded_by_local() {
        let err = build_standard_form(StateParams::new(4.6, -3.0, 13.0, 0.5)).unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation(_)), "{err}");
        assert!(build_standard_form(StateParams::new(4.6, -3.0, 12.0, 1.0)).is_ok());
    }

    #[test]
    fn impossible_purity_reports_radicand() {
        // g beyond 2s - 1 with λ = -1 leaves the total radicand negative.
        let err = build_standard_form(StateParams::new(2.0, 0.0, 3.5, -1.0)).unwrap_err();
        match err {
            Error::NonPhysical(msg) => assert!(msg.contains("4s²"), "{msg}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn validation_flags_uncertainty_violation() {
        let report = CovarianceMatrix::identity().validate();
        assert!(report.physical);
        assert!((report.min_symplectic_eigenvalue - 1.0).abs() < 1e-12);

        let report = CovarianceMatrix::scaled_identity(0.5).validate();
        assert!(!report.physical);
        assert!((report.min_symplectic_eigenvalue - 0.5).abs() < 1e-12);

        let tmsv = build_standard_form(StateParams::two_mode_squeezed(2.0)).unwrap();
        let report = tmsv.validate();
        assert!(report.physical, "{:?}", report.failures);
        assert!((report.min_symplectic_eigenvalue - 1.0).abs() < 1e-9);
    }

    #[test]
    fn validation_reports_asymmetry() {
        let mut m = Matrix4::identity() * 2.0;
        m[(0, 1)] = 0.1;
        let report = ValidationReport::of(&m);
        assert!(!report.physical);
        assert!((report.symmetry_defect - 0.1).abs() < 1e-15);
        assert!(CovarianceMatrix::new(m).is_err());
    }

    #[test]
    fn symplectic_spectra_of_simple_states() {
        let s = CovarianceMatrix::identity().symplectic_eigenvalues().unwrap();
        assert_eq!((s.nu_minus, s.nu_plus), (1.0, 1.0));
        let s = CovarianceMatrix::scaled_identity(3.0).symplectic_eigenvalues().unwrap();
        assert!((s.nu_minus - 3.0).abs() < 1e-13 && (s.nu_plus - 3.0).abs() < 1e-13);
        let tmsv = build_standard_form(StateParams::two_mode_squeezed(2.0)).unwrap();
        let s = tmsv.symplectic_eigenvalues().unwrap();
        assert!((s.nu_minus - 1.0).abs() < 1e-10 && (s.nu_plus - 1.0).abs() < 1e-10);
    }

    #[test]
    fn partial_transpose_flips_second_momentum() {
        assert_eq!(CovarianceMatrix::identity().partial_transpose(), CovarianceMatrix::identity());
        let sigma = CovarianceMatrix::standard_form(3.0, 2.0, 1.0, -0.5);
        assert_eq!(
            sigma.partial_transpose(),
            CovarianceMatrix::standard_form(3.0, 2.0, 1.0, 0.5)
        );
        let tmsv = build_standard_form(StateParams::two_mode_squeezed(2.0)).unwrap();
        assert!((tmsv.partial_transpose().get(1, 3) - SQRT3).abs() < 1e-12);
        assert_eq!(tmsv.partial_transpose().partial_transpose(), tmsv);
    }

    #[test]
    fn negativity_examples() {
        let vac = CovarianceMatrix::identity();
        assert_eq!(vac.ppt_min_eigenvalue().unwrap(), 1.0);
        assert_eq!(vac.log_negativity().unwrap(), 0.0);

        let tmsv = build_standard_form(StateParams::two_mode_squeezed(2.0)).unwrap();
        let nu = tmsv.ppt_min_eigenvalue().unwrap();
        assert!((nu - (2.0 - SQRT3)).abs() < 1e-12);
        assert!((tmsv.log_negativity().unwrap() - 1.316_957_896_924_816_6).abs() < 1e-10);

        let thermal = CovarianceMatrix::scaled_identity(3.0);
        assert!((thermal.ppt_min_eigenvalue().unwrap() - 3.0).abs() < 1e-13);
        assert_eq!(thermal.log_negativity().unwrap(), 0.0);
    }

    #[test]
    fn purity_examples() {
        let p = CovarianceMatrix::identity().purities();
        assert_eq!((p.global, p.mode_1, p.mode_2), (1.0, 1.0, 1.0));
        let p = build_standard_form(StateParams::two_mode_squeezed(2.0)).unwrap().purities();
        assert!((p.global - 1.0).abs() < 1e-9);
        assert!((p.mode_1 - 0.5).abs() < 1e-14 && (p.mode_2 - 0.5).abs() < 1e-14);

        let sigma = build_standard_form(StateParams::new(4.0, 1.0, 3.0, 1.0)).unwrap();
        assert!((sigma.determinant() - 9.0).abs() < 1e-9);
        let p = sigma.purities();
        assert!((p.mode_1 - 0.2).abs() < 1e-14);
        assert!((p.mode_2 - 1.0 / 3.0).abs() < 1e-14);
        assert!((p.global - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn decorrelate_examples() {
        assert_eq!(CovarianceMatrix::identity().decorrelate(), CovarianceMatrix::identity());
        let tmsv = build_standard_form(StateParams::two_mode_squeezed(2.0)).unwrap();
        assert_eq!(tmsv.decorrelate(), CovarianceMatrix::scaled_identity(2.0));
        let product = CovarianceMatrix::standard_form(3.0, 1.5, 0.0, 0.0);
        assert_eq!(product.decorrelate(), product);
    }

    #[test]
    fn slice_relation_examples() {
        assert!(d_from_nu(2.0, 2.0 - SQRT3).unwrap().abs() < 1e-14);
        assert_eq!(d_from_nu(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(nu_from_d(4.0, 3.0).unwrap(), 1.0);
        assert!(matches!(nu_from_d(1.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn slice_relation_matches_partial_transpose() {
        for d in [0.0, 0.5, 1.25, 2.0, 3.0] {
            let s = 4.0;
            let sigma = build_standard_form(StateParams::new(s, d, 2.0 * d + 1.0, 1.0)).unwrap();
            let numeric = sigma.ppt_min_eigenvalue().unwrap();
            assert!((numeric - nu_from_d(s, d).unwrap()).abs() < 1e-9, "d = {d}");
        }
    }

    #[test]
    fn closed_form_spectrum_agrees_on_standard_form() {
        let sigma = build_standard_form(StateParams::new(3.0, 0.7, 2.9, 0.3)).unwrap();
        let generic = sigma.symplectic_eigenvalues().unwrap();
        let closed = symplectic_spectrum_closed_form(&sigma);
        assert!((generic.nu_minus - closed.nu_minus).abs() < 1e-10);
        assert!((generic.nu_plus - closed.nu_plus).abs() < 1e-10);
    }
}
