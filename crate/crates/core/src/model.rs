//! Linear-model incidence matrices and the information matrices for direct
//! effects under the carryover model and its three reduced models.
//!
//! Observations are ordered unit by unit: observation `(k, u)` sits at row
//! `u * p + k`. With `P` (periods), `U` (units), `T` (direct treatment) and
//! `F` (carryover of the previous period's treatment) the information matrix
//! is `C = Tᵀ pr⊥(Z) T` where `Z` is the nuisance block chosen by the model.
//! The contrast information `M` drops the control row and column of `C`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::matrix::{residual_cross, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Periods, units and first-order carryover are nuisance.
    Carryover,
    /// Periods and units.
    TwoWay,
    /// Units only.
    OneWay,
    /// General mean only.
    ZeroWay,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Carryover,
        ModelKind::TwoWay,
        ModelKind::OneWay,
        ModelKind::ZeroWay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Carryover => "carryover",
            ModelKind::TwoWay => "two-way",
            ModelKind::OneWay => "one-way",
            ModelKind::ZeroWay => "zero-way",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "carryover" => Ok(ModelKind::Carryover),
            "two-way" => Ok(ModelKind::TwoWay),
            "one-way" => Ok(ModelKind::OneWay),
            "zero-way" => Ok(ModelKind::ZeroWay),
            other => Err(Error::Unsupported(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelMatrices {
    /// `np × p` period incidence.
    pub period: Matrix,
    /// `np × n` unit incidence.
    pub unit: Matrix,
    /// `np × (t+1)` direct treatment incidence.
    pub treatment: Matrix,
    /// `np × (t+1)` carryover incidence; period-one rows are zero.
    pub carryover: Matrix,
    /// `p × p` lag operator, `F_u = L T_u`.
    pub lag: Matrix,
}

impl ModelMatrices {
    /// Nuisance block projected out under `kind`.
    pub fn nuisance(&self, kind: ModelKind) -> Matrix {
        match kind {
            ModelKind::Carryover => self
                .period
                .hcat(&self.unit)
                .and_then(|m| m.hcat(&self.carryover))
                .expect("row counts agree"),
            ModelKind::TwoWay => self.period.hcat(&self.unit).expect("row counts agree"),
            ModelKind::OneWay => self.unit.clone(),
            ModelKind::ZeroWay => Matrix::ones(self.period.rows(), 1),
        }
    }
}

pub fn lag_operator(p: usize) -> Matrix {
    Matrix::from_fn(p, p, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
}

pub fn build_model_matrices(d: &Design) -> ModelMatrices {
    let (t, p, n) = (d.t(), d.p(), d.n());
    let rows = n * p;
    let mut period = Matrix::zeros(rows, p);
    let mut unit = Matrix::zeros(rows, n);
    let mut treatment = Matrix::zeros(rows, t + 1);
    let mut carryover = Matrix::zeros(rows, t + 1);
    for u in 0..n {
        for k in 0..p {
            let row = u * p + k;
            period[(row, k)] = 1.0;
            unit[(row, u)] = 1.0;
            treatment[(row, d.get(k, u))] = 1.0;
            if k > 0 {
                carryover[(row, d.get(k - 1, u))] = 1.0;
            }
        }
    }
    ModelMatrices {
        period,
        unit,
        treatment,
        carryover,
        lag: lag_operator(p),
    }
}

/// The `(t+1) × (t+1)` information matrix for direct effects.
pub fn c_matrix(d: &Design, kind: ModelKind) -> Matrix {
    let mm = build_model_matrices(d);
    let z = mm.nuisance(kind);
    residual_cross(&mm.treatment, &z, &mm.treatment)
        .expect("model blocks are conformable")
        .symmetrized()
}

/// Deletes the control row and column of `C`.
pub fn m_matrix(c: &Matrix) -> Result<Matrix> {
    if !c.is_square() || c.rows() < 2 {
        return Err(Error::Dimension(format!(
            "need a square matrix of order at least 2, got {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    let keep: Vec<usize> = (1..c.rows()).collect();
    Ok(c.select(&keep, &keep))
}

#[derive(Debug, Clone)]
pub struct InfoPair {
    pub c: Matrix,
    pub m: Matrix,
}

impl InfoPair {
    pub fn of(d: &Design, kind: ModelKind) -> Self {
        let c = c_matrix(d, kind);
        let m = m_matrix(&c).unwrap_or_else(|_| Matrix::zeros(0, 0));
        Self { c, m }
    }

    /// Covariance (in units of σ²) of the test-minus-control estimates.
    pub fn contrast_covariance(&self) -> Result<Matrix> {
        contrast_covariance(&self.m)
    }
}

/// `M⁻¹`, with singular `M` reported as a disconnected design.
pub fn contrast_covariance(m: &Matrix) -> Result<Matrix> {
    if m.rows() == 0 {
        return Err(Error::Disconnected);
    }
    let tol = 1e-9 * (1.0 + m.norm_inf());
    m.inverse_spd(tol).map_err(|_| Error::Disconnected)
}

/// `Tr(M⁻¹)`: the sum over test treatments of `Var(τ̂ᵢ − τ̂₀) / σ²`.
pub fn a_criterion(d: &Design, kind: ModelKind) -> Result<f64> {
    Ok(InfoPair::of(d, kind).contrast_covariance()?.trace())
}

/// `maxᵢ Var(τ̂ᵢ − τ̂₀) / σ²`.
pub fn mv_criterion(d: &Design, kind: ModelKind) -> Result<f64> {
    let cov = InfoPair::of(d, kind).contrast_covariance()?;
    Ok(cov.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Both criteria from one inversion.
pub fn criteria(d: &Design, kind: ModelKind) -> Result<(f64, f64)> {
    let cov = InfoPair::of(d, kind).contrast_covariance()?;
    let mv = cov.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok((cov.trace(), mv))
}

/// `true` iff `m = xI + yJ` up to `tol`.
pub fn is_completely_symmetric(m: &Matrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.rows();
    if n == 0 {
        return true;
    }
    let d0 = m[(0, 0)];
    let o0 = if n > 1 { m[(0, 1)] } else { 0.0 };
    (0..n).all(|i| {
        (0..n).all(|j| {
            let target = if i == j { d0 } else { o0 };
            (m[(i, j)] - target).abs() <= tol
        })
    })
}

/// Right-hand side of the period-free upper bound on `C`:
/// `TᵀU⊥T − TᵀU⊥F (FᵀU⊥F)⁻ FᵀU⊥T`, with `U⊥ = pr⊥(U)`.
///
/// Equals the carryover `C` when every treatment is spread evenly over
/// periods, and dominates it in the Loewner order otherwise.
pub fn period_free_bound(d: &Design) -> Matrix {
    let mm = build_model_matrices(d);
    let (tt, tf, ff) = unit_residual_blocks(&mm);
    let g = ff.g_inverse();
    (&tt - &(&(&tf * &g) * &tf.transpose())).symmetrized()
}

/// `(TᵀU⊥T, TᵀU⊥F, FᵀU⊥F)` with `U⊥ = pr⊥(U)`.
pub fn unit_residual_blocks(mm: &ModelMatrices) -> (Matrix, Matrix, Matrix) {
    let u = &mm.unit;
    let tt = residual_cross(&mm.treatment, u, &mm.treatment).expect("conformable");
    let tf = residual_cross(&mm.treatment, u, &mm.carryover).expect("conformable");
    let ff = residual_cross(&mm.carryover, u, &mm.carryover).expect("conformable");
    (tt, tf, ff)
}
