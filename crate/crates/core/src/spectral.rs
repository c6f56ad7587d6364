//! Row-stochastic matrices, their rank-one limits, and left Perron vectors.
//!
//! Two independent routes produce the consensus weight vector `nu`:
//! [`sia_limit`] squares the matrix until its rows agree, while
//! [`left_eigenvector`] solves `(P^T - I) nu = 0, 1^T nu = 1` directly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-sum tolerance accepted by [`check_stochastic`].
pub const ROW_SUM_TOL: f64 = 1e-12;
pub const DEFAULT_SIA_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_SQUARINGS: usize = 200;
/// Components of `nu` below this magnitude are clamped to zero.
pub const CLAMP_TOL: f64 = 1e-14;
/// Relative singular-value threshold for the null-space rank test.
pub const NULLITY_TOL: f64 = 1e-10;

/// A validated row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(DMatrix<f64>);

impl StochasticMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn min_diagonal(&self) -> f64 {
        self.0.diagonal().min()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(x)).as_slice().to_vec()
    }
}

/// Nonnegative left fixed point of a stochastic matrix, normalised to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronVector {
    pub nu: Vec<f64>,
    /// `max |(P^T nu - nu)_i|`.
    pub residual: f64,
}

impl PerronVector {
    fn new(p: &DMatrix<f64>, mut nu: Vec<f64>) -> Self {
        for v in nu.iter_mut() {
            if v.abs() < CLAMP_TOL {
                *v = 0.0;
            }
        }
        let v = DVector::from_column_slice(&nu);
        let residual = (p.transpose() * &v - &v).amax();
        Self { nu, residual }
    }

    /// `nu^T x`.
    pub fn weigh(&self, x: &[f64]) -> f64 {
        self.nu.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Result of [`sia_limit`].
#[derive(Debug, Clone)]
pub struct SiaLimit {
    pub limit: DMatrix<f64>,
    pub nu: PerronVector,
    pub squarings: usize,
}

pub fn check_stochastic(m: DMatrix<f64>) -> Result<StochasticMatrix> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    for (row, r) in m.row_iter().enumerate() {
        if let Some((col, &value)) = r.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeEntry { row, col, value });
        }
        let residual = (r.sum() - 1.0).abs();
        if !(residual <= ROW_SUM_TOL) {
            return Err(Error::NotStochastic { row, residual });
        }
    }
    Ok(StochasticMatrix(m))
}

/// Largest per-column spread `max - min`; zero iff all rows are equal.
pub fn column_spread(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.max() - c.min())
        .fold(0.0, f64::max)
}

/// Repeatedly squares `p` until successive powers differ by less than `tol`
/// and every column is constant to within `tol`.
pub fn sia_limit(p: &StochasticMatrix, tol: f64, max_squarings: usize) -> Result<SiaLimit> {
    if !(tol > 0.0) {
        return Err(Error::InvalidTolerance(tol));
    }
    let mut power = p.0.clone();
    let mut spread = column_spread(&power);
    for squarings in 1..=max_squarings {
        let mut next = &power * &power;
        // Squaring amplifies row-sum round-off geometrically; renormalise.
        for mut row in next.row_iter_mut() {
            let sum = row.sum();
            row /= sum;
        }
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        let change = (&next - &power).amax();
        power = next;
        spread = column_spread(&power);
        if change < tol && spread < tol {
            let nu = PerronVector::new(&p.0, power.row(0).iter().copied().collect());
            return Ok(SiaLimit { limit: power, nu, squarings });
        }
    }
    Err(Error::NotRankOne { squarings: max_squarings, spread })
}

/// Solves for the left Perron vector of `p` through the bordered system
/// `[P^T - I; 1^T] nu = [0; 1]`.
pub fn left_eigenvector(p: &StochasticMatrix) -> Result<PerronVector> {
    let n = p.order();
    let a = p.0.transpose() - DMatrix::identity(n, n);

    let sv = a.clone().svd(false, false).singular_values;
    let scale = sv.max().max(1.0);
    let nullity = sv.iter().filter(|&&s| s <= NULLITY_TOL * scale).count();
    if nullity != 1 {
        return Err(Error::DegenerateEigenspace { nullity });
    }

    let mut bordered = a.insert_row(n, 1.0);
    bordered.row_mut(n).fill(1.0);
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let nu = bordered
        .svd(true, true)
        .solve(&rhs, f64::EPSILON)
        .map_err(|_| Error::DegenerateEigenspace { nullity })?;
    Ok(PerronVector::new(&p.0, nu.as_slice().to_vec()))
}
