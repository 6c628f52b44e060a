//! Positive self-adjoint operators given by their spectra: the semigroup
//! `T(t)`, fractional powers `A^q`, sine transforms for the 1-D Dirichlet
//! Laplacian, and the scalar semigroup estimates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun;

/// Basis in which state coefficients are expressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Basis {
    /// State entries are the coefficients themselves.
    Identity,
    /// Coefficients of `sin(kπx/ℓ)`, `k = 1..=d`, on `(0, ℓ)`.
    DirichletSine { length: f64 },
}

/// Diagonalizable positive operator `A = Σ λ_k e_k ⊗ e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOperator {
    eigenvalues: Vec<f64>,
    basis: Basis,
    sine: Option<SineTable>,
}

#[derive(Debug, Clone, PartialEq)]
struct SineTable {
    n: usize,
    // row-major: entry (j, k) = sin((k+1)π(j+1)/(n+1))
    values: Vec<f64>,
}

impl SineTable {
    fn new(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                // exact integer reduction before scaling keeps the table symmetric
                let m = ((j + 1) * (k + 1)) % (2 * (n + 1));
                values[j * n + k] = specfun::sin_pi(m as f64 / (n + 1) as f64);
            }
        }
        Self { n, values }
    }
}

/// State coefficients in the operator's basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("state vector entries must be finite"));
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean distance.
pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Diagonal operator in the identity basis.
pub fn make_diagonal(lambdas: &[f64]) -> Result<SpectralOperator> {
    if lambdas.is_empty() {
        return Err(Error::domain("operator needs at least one eigenvalue"));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
        return Err(Error::domain(format!("eigenvalues must be positive and finite, got {l}")));
    }
    Ok(SpectralOperator { eigenvalues: lambdas.to_vec(), basis: Basis::Identity, sine: None })
}

/// `−∂²/∂x²` on `(0, ℓ)` with Dirichlet conditions, truncated to `n_modes`
/// sine modes; eigenvalues `(kπ/ℓ)²`.
pub fn make_dirichlet_laplacian_1d(n_modes: usize, length: f64) -> Result<SpectralOperator> {
    if n_modes == 0 {
        return Err(Error::domain("Dirichlet Laplacian needs at least one mode"));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::domain(format!("interval length must be positive, got {length}")));
    }
    let eigenvalues = (1..=n_modes).map(|k| (k as f64 * PI / length).powi(2)).collect();
    Ok(SpectralOperator {
        eigenvalues,
        basis: Basis::DirichletSine { length },
        sine: Some(SineTable::new(n_modes)),
    })
}

impl SpectralOperator {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: d });
        }
        Ok(())
    }

    /// `Ax`.
    pub fn apply(&self, x: &StateVector) -> Result<StateVector> {
        self.apply_fractional_power(1.0, x)
    }

    /// Interior sample points `x_j = jℓ/(n+1)`; empty for the identity basis.
    pub fn sample_points(&self) -> Vec<f64> {
        match self.basis {
            Basis::Identity => Vec::new(),
            Basis::DirichletSine { length } => {
                let n = self.dim();
                (1..=n).map(|j| j as f64 * length / (n + 1) as f64).collect()
            }
        }
    }

    /// Map coefficients to physical samples at [`Self::sample_points`]; the
    /// identity basis returns the coefficients unchanged.
    pub fn to_samples(&self, coeffs: &[f64], out: &mut [f64]) {
        match &self.sine {
            None => out.copy_from_slice(coeffs),
            Some(t) => {
                let n = t.n;
                for j in 0..n {
                    let row = &t.values[j * n..(j + 1) * n];
                    out[j] = row.iter().zip(coeffs).map(|(s, c)| s * c).sum();
                }
            }
        }
    }

    /// Inverse of [`Self::to_samples`].
    pub fn from_samples(&self, samples: &[f64], out: &mut [f64]) {
        match &self.sine {
            None => out.copy_from_slice(samples),
            Some(t) => {
                let n = t.n;
                let scale = 2.0 / (n + 1) as f64;
                for (k, o) in out.iter_mut().enumerate().take(n) {
                    let mut s = 0.0;
                    for (j, u) in samples.iter().enumerate() {
                        s += t.values[j * n + k] * u;
                    }
                    *o = scale * s;
                }
            }
        }
    }

    /// Coefficients of the grid samples `samples` (sine transform).
    pub fn transform(&self, samples: &[f64]) -> Result<StateVector> {
        self.check_dim(samples.len())?;
        let mut out = vec![0.0; self.dim()];
        self.from_samples(samples, &mut out);
        Ok(StateVector(out))
    }

    /// Grid samples of the coefficient vector `x` (inverse sine transform).
    pub fn inverse_transform(&self, x: &StateVector) -> Result<Vec<f64>> {
        self.check_dim(x.dim())?;
        let mut out = vec![0.0; self.dim()];
        self.to_samples(&x.0, &mut out);
        Ok(out)
    }

    /// Ratio bounding the max-norm of samples by the coefficient norm:
    /// `max_j |u(x_j)| ≤ sup_scale · ‖c‖`.
    pub fn sup_scale(&self) -> f64 {
        match self.basis {
            Basis::Identity => 1.0,
            Basis::DirichletSine { .. } => ((self.dim() + 1) as f64 / 2.0).sqrt(),
        }
    }

    /// `T(t)x`, coefficientwise `e^{−λ_k t} x_k`.
    pub fn apply_semigroup(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("semigroup time must be >= 0, got {t}")));
        }
        self.check_dim(x.dim())?;
        Ok(StateVector(self.eigenvalues.iter().zip(&x.0).map(|(l, v)| (-l * t).exp() * v).collect()))
    }

    /// `A^q x`, coefficientwise `λ_k^q x_k`.
    pub fn apply_fractional_power(&self, q: f64, x: &StateVector) -> Result<StateVector> {
        if !(-2.0..=2.0).contains(&q) {
            return Err(Error::domain(format!("fractional power must lie in [-2, 2], got {q}")));
        }
        self.check_dim(x.dim())?;
        Ok(StateVector(self.eigenvalues.iter().zip(&x.0).map(|(l, v)| l.powf(q) * v).collect()))
    }

    /// Compare `‖A^δ T(t)‖ = max_k λ_k^δ e^{−λ_k t}` against the scalar bound
    /// `(δ/e)^δ t^{−δ}` and the sectorial bound `Γ(δ) t^{−δ}`.
    pub fn semigroup_power_estimate(&self, delta: f64, t: f64) -> Result<PowerEstimate> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1], got {delta}")));
        }
        if !(t > 0.0) {
            return Err(Error::domain(format!("t must be positive, got {t}")));
        }
        let observed = self
            .eigenvalues
            .iter()
            .map(|l| l.powf(delta) * (-l * t).exp())
            .fold(0.0, f64::max);
        let bound = (delta / std::f64::consts::E).powf(delta) * t.powf(-delta);
        let sectorial_bound = specfun::gamma(delta)? * t.powf(-delta);
        Ok(PowerEstimate { observed, bound, sectorial_bound })
    }

    /// Compare `‖(T(t) − I)A^{−δ}‖ = max_k (1 − e^{−λ_k t}) λ_k^{−δ}` against
    /// `C t^δ` with `C = ((1−δ)/e)^{1−δ}/δ`, the constant obtained by
    /// integrating the `‖A^{1−δ}T(τ)‖` bound over `(0, t)`.
    pub fn semigroup_increment_estimate(&self, delta: f64, t: f64) -> Result<PowerEstimate> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1], got {delta}")));
        }
        if !(t > 0.0) {
            return Err(Error::domain(format!("t must be positive, got {t}")));
        }
        let observed = self
            .eigenvalues
            .iter()
            .map(|l| -(-l * t).exp_m1() * l.powf(-delta))
            .fold(0.0, f64::max);
        let c = increment_constant(delta);
        let bound = c * t.powf(delta);
        let sectorial_bound = if delta < 1.0 {
            specfun::gamma(1.0 - delta)? / delta * t.powf(delta)
        } else {
            t
        };
        Ok(PowerEstimate { observed, bound, sectorial_bound })
    }
}

/// Constant `C_δ` in `|e^{−λt} − 1| λ^{−δ} ≤ C_δ t^δ`.
pub fn increment_constant(delta: f64) -> f64 {
    let e = 1.0 - delta;
    let base = if e > 0.0 { (e / std::f64::consts::E).powf(e) } else { 1.0 };
    base / delta
}

/// Observed operator-norm quantity next to its analytic bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub observed: f64,
    pub bound: f64,
    pub sectorial_bound: f64,
}

impl PowerEstimate {
    pub fn holds(&self) -> bool {
        let slack = 1e-12 * self.bound.abs();
        self.observed <= self.bound + slack && self.bound <= self.sectorial_bound + slack
    }
}
