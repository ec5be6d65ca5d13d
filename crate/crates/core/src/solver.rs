//! Least-squares and ridge solves for the weight vector.
//!
//! The normal equations `(HᵀH + βI)θ = Hᵀy` are factored with Cholesky. When
//! the factorization fails or its pivots show the system is numerically
//! singular, the solve falls back to an SVD of `H`, which yields the
//! minimum-norm minimizer when `β = 0`.
//!
//! The ridge penalty `β‖θ‖²` acts on the banded weights directly. It is not the
//! same regularization as the nuclear-norm style penalty of the convex
//! formulation; the two only share a minimizer at `β = 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quadcore::ConvSpec;
use crate::regressor::RegressorMatrix;

/// Smallest accepted ratio between the smallest and largest Cholesky pivot.
/// Below this `cond(HᵀH) > 1e10` and the SVD path is used instead.
const PIVOT_RATIO_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStrategy {
    Cholesky,
    Pseudoinverse,
}

impl SolveStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStrategy::Cholesky => "cholesky",
            SolveStrategy::Pseudoinverse => "pseudoinverse",
        }
    }
}

/// Weight vector laid out as `[Z̄¹ diagonal (n); 2·Z̄¹ off-diagonal band,
/// diagonal-major (q − n); Z̄² (n)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    theta: Vec<f64>,
    spec: ConvSpec,
}

impl WeightVector {
    pub fn new(theta: Vec<f64>, spec: ConvSpec) -> Result<Self> {
        if theta.len() != spec.weight_len() {
            return Err(Error::dims("weight vector", spec.weight_len(), theta.len()));
        }
        Ok(Self { theta, spec })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn spec(&self) -> ConvSpec {
        self.spec
    }

    pub fn norm(&self) -> f64 {
        norm(&self.theta)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }
}

/// Solution of a dense least-squares problem with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub theta: Vec<f64>,
    pub beta: f64,
    /// `‖y − Hθ‖`
    pub residual_norm: f64,
    /// `‖Hᵀ(y − Hθ) − βθ‖`, zero at the exact minimizer.
    pub normal_residual_norm: f64,
    /// Set when the system was numerically singular and the pseudoinverse
    /// answer was returned.
    pub rank_deficient: bool,
    pub strategy: SolveStrategy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub theta: WeightVector,
    pub beta: f64,
    pub residual_norm: f64,
    pub normal_residual_norm: f64,
    pub rank_deficient: bool,
    pub strategy: SolveStrategy,
}

pub fn solve_ls(h: &RegressorMatrix, y: &[f64]) -> Result<SolveReport> {
    solve_ridge(h, y, 0.0)
}

pub fn solve_ridge(h: &RegressorMatrix, y: &[f64], beta: f64) -> Result<SolveReport> {
    let sol = solve_least_squares(h.matrix(), y, beta)?;
    Ok(SolveReport {
        theta: WeightVector::new(sol.theta, h.spec())?,
        beta: sol.beta,
        residual_norm: sol.residual_norm,
        normal_residual_norm: sol.normal_residual_norm,
        rank_deficient: sol.rank_deficient,
        strategy: sol.strategy,
    })
}

/// Minimizes `‖Hθ − y‖² + β‖θ‖²` for an arbitrary dense `H`.
pub fn solve_least_squares(h: &DMatrix<f64>, y: &[f64], beta: f64) -> Result<LsSolution> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::NegativeRegularizer(beta));
    }
    if h.nrows() != y.len() {
        return Err(Error::dims("label vector", h.nrows(), y.len()));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("regressor matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("labels"));
    }

    let yv = DVector::from_column_slice(y);
    let hty = h.tr_mul(&yv);
    let (theta, strategy, rank_deficient) = match cholesky_solve(h, &hty, beta) {
        Some(theta) => (theta, SolveStrategy::Cholesky, false),
        None => {
            let (theta, deficient) = svd_solve(h, &yv, beta);
            (theta, SolveStrategy::Pseudoinverse, deficient)
        }
    };

    let resid = &yv - h * &theta;
    let normal = h.tr_mul(&resid) - &theta * beta;
    Ok(LsSolution {
        residual_norm: resid.norm(),
        normal_residual_norm: normal.norm(),
        theta: theta.as_slice().to_vec(),
        beta,
        rank_deficient,
        strategy,
    })
}

fn cholesky_solve(h: &DMatrix<f64>, hty: &DVector<f64>, beta: f64) -> Option<DVector<f64>> {
    if h.ncols() == 0 {
        return None;
    }
    let mut gram = h.tr_mul(h);
    for i in 0..gram.nrows() {
        gram[(i, i)] += beta;
    }
    let chol = gram.cholesky()?;
    let l = chol.l_dirty();
    let (lo, hi) = (0..l.nrows())
        .map(|i| l[(i, i)] * l[(i, i)])
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p), hi.max(p)));
    if lo.is_nan() || lo <= hi * PIVOT_RATIO_FLOOR {
        return None;
    }
    let theta = chol.solve(hty);
    theta.iter().all(|v| v.is_finite()).then_some(theta)
}

/// SVD route. Singular values below `σ_max·ε·max(N, p)` count as zero; with
/// `β = 0` their directions are dropped, giving the minimum-norm solution.
fn svd_solve(h: &DMatrix<f64>, y: &DVector<f64>, beta: f64) -> (DVector<f64>, bool) {
    let (rows, cols) = h.shape();
    let svd = h.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().copied().fold(0.0f64, f64::max);
    let tol = smax * f64::EPSILON * rows.max(cols) as f64;

    let mut theta = DVector::zeros(cols);
    let mut rank = 0;
    for (k, &s) in sigma.iter().enumerate() {
        let kept = s > tol;
        if kept {
            rank += 1;
        }
        let gain = if beta > 0.0 {
            s / (s * s + beta)
        } else if kept {
            1.0 / s
        } else {
            continue;
        };
        let coef = u.column(k).dot(y) * gain;
        theta.axpy(coef, &v_t.row(k).transpose(), 1.0);
    }
    (theta, rank < cols)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
