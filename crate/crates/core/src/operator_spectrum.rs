//! Finite-dimensional operators `A`: spectral data, the boundary set
//! `{xi real : (i xi)^alpha in sigma(A)}`, the fractional resolvent
//! `lambda^(alpha-1) (lambda^alpha - A)^(-1)` and its ergodic limits.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::dd_resolvent::ErgodicDiagnostic;
use crate::error::{Error, Result};
use crate::signal::vec_norm;
use crate::special_fn::{principal_power, FractionalOrder};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Condition number of the eigenvector matrix above which a warning is logged.
pub const CONDITION_WARN: f64 = 1e8;

/// Tolerance on `arg mu = +-alpha pi / 2` when matching eigenvalues to the axis.
pub const ARG_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
struct Eigenbasis {
    vectors: DMatrix<Complex64>,
    inverse: DMatrix<Complex64>,
    condition: f64,
}

/// A square complex matrix with its eigenvalues and, when it is
/// diagonalizable, an eigenbasis.
#[derive(Debug, Clone)]
pub struct OperatorModel {
    matrix: DMatrix<Complex64>,
    eigenvalues: Vec<Complex64>,
    basis: Option<Eigenbasis>,
}

fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

impl OperatorModel {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = matrix.nrows();
        if d == 0 || matrix.ncols() != d {
            return Err(Error::Domain(format!(
                "operator must be a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("operator has non-finite entries".into()));
        }
        let scale = spectral_norm(&matrix).max(1.0);
        let eigenvalues: Vec<Complex64> = matrix
            .clone()
            .schur()
            .eigenvalues()
            .ok_or_else(|| Error::ConvergenceFailure("Schur decomposition".into()))?
            .iter()
            .copied()
            .collect();
        let basis = eigenbasis(&matrix, &eigenvalues, scale);
        if let Some(b) = &basis {
            if b.condition > CONDITION_WARN {
                log::warn!("eigenvector matrix is ill conditioned (condition {:e})", b.condition);
            }
        }
        Ok(Self {
            matrix,
            eigenvalues,
            basis,
        })
    }

    /// Builds the operator from rows of equal length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Domain("operator rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn diagonal(entries: &[Complex64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn is_diagonalizable(&self) -> bool {
        self.basis.is_some()
    }

    /// Condition number of the eigenvector matrix, `None` when defective.
    pub fn condition(&self) -> Option<f64> {
        self.basis.as_ref().map(|b| b.condition)
    }

    /// `(V, V^-1)` with `A = V diag(eigenvalues) V^-1`.
    pub fn eigenvectors(&self) -> Option<(&DMatrix<Complex64>, &DMatrix<Complex64>)> {
        self.basis.as_ref().map(|b| (&b.vectors, &b.inverse))
    }

    pub fn norm(&self) -> f64 {
        spectral_norm(&self.matrix)
    }

    /// `V diag(g(mu_i)) V^-1`.
    pub fn function<F: Fn(Complex64) -> Result<Complex64>>(&self, g: F) -> Result<DMatrix<Complex64>> {
        let b = self
            .basis
            .as_ref()
            .ok_or_else(|| Error::DefectiveMatrix("matrix functions need an eigenbasis".into()))?;
        let mut scaled = b.vectors.clone();
        for (j, mu) in self.eigenvalues.iter().enumerate() {
            let gj = g(*mu)?;
            scaled.column_mut(j).iter_mut().for_each(|v| *v *= gj);
        }
        Ok(scaled * &b.inverse)
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (&self.matrix * DVector::from_column_slice(x)).iter().copied().collect()
    }
}

fn eigenbasis(a: &DMatrix<Complex64>, eig: &[Complex64], scale: f64) -> Option<Eigenbasis> {
    let d = a.nrows();
    let cluster_tol = 1e-7 * scale;
    let null_tol = 1e-6 * scale;
    let mut vectors = DMatrix::<Complex64>::zeros(d, d);
    let mut done = vec![false; d];
    for i in 0..d {
        if done[i] {
            continue;
        }
        let members: Vec<usize> = (i..d)
            .filter(|&j| !done[j] && (eig[j] - eig[i]).norm() <= cluster_tol)
            .collect();
        let center = members.iter().map(|&j| eig[j]).sum::<Complex64>() / members.len() as f64;
        let shifted = a - DMatrix::<Complex64>::identity(d, d) * center;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t?;
        // singular values are sorted in decreasing order
        let sv = &svd.singular_values;
        let small = sv.iter().filter(|s| **s <= null_tol).count();
        if small < members.len() {
            return None;
        }
        for (slot, &j) in members.iter().enumerate() {
            let row = d - 1 - slot;
            for k in 0..d {
                vectors[(k, j)] = v_t[(row, k)].conj();
            }
            done[j] = true;
        }
    }
    let inverse = vectors.clone().try_inverse()?;
    let condition = spectral_norm(&vectors) * spectral_norm(&inverse);
    if !condition.is_finite() || condition > 1e14 {
        return None;
    }
    // eigenpair residuals
    for j in 0..d {
        let v = vectors.column(j);
        let r = a * v - v * eig[j];
        if r.norm() > 1e-8 * scale {
            return None;
        }
    }
    Some(Eigenbasis {
        vectors,
        inverse,
        condition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryReason {
    EigenvalueHit,
    BranchPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub xi: f64,
    pub reason: BoundaryReason,
}

/// Points of the imaginary axis where the fractional resolvent is not analytic.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BoundarySpectrum {
    pub points: Vec<BoundaryPoint>,
}

impl BoundarySpectrum {
    pub fn xis(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.xi)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

/// `{xi : (i xi)^alpha in sigma(A)}`, plus `xi = 0` as a branch point when
/// `alpha < 1` or when `alpha = 1` and `0 in sigma(A)`.
pub fn sigma_set(a: &OperatorModel, alpha: FractionalOrder) -> BoundarySpectrum {
    let al = alpha.get();
    let zero_tol = 1e-12 * a.norm().max(1.0);
    let mut points = Vec::new();
    let mut zero_eig = false;
    for mu in a.eigenvalues() {
        if mu.norm() <= zero_tol {
            zero_eig = true;
            continue;
        }
        let xi = mu.norm().powf(1.0 / al);
        let arg = mu.arg();
        if (arg - al * PI / 2.0).abs() <= ARG_TOL {
            points.push(BoundaryPoint {
                xi,
                reason: BoundaryReason::EigenvalueHit,
            });
        } else if (arg + al * PI / 2.0).abs() <= ARG_TOL {
            points.push(BoundaryPoint {
                xi: -xi,
                reason: BoundaryReason::EigenvalueHit,
            });
        }
    }
    if !alpha.is_classical() || zero_eig {
        points.push(BoundaryPoint {
            xi: 0.0,
            reason: BoundaryReason::BranchPoint,
        });
    }
    points.sort_by(|p, q| p.xi.total_cmp(&q.xi));
    points.dedup_by(|p, q| (p.xi - q.xi).abs() <= 1e-9 * p.xi.abs().max(1.0));
    BoundarySpectrum { points }
}

/// `R_alpha(lambda, A) = lambda^(alpha-1) (lambda^alpha I - A)^(-1)`.
pub fn fractional_resolvent(
    a: &OperatorModel,
    alpha: FractionalOrder,
    lambda: Complex64,
) -> Result<DMatrix<Complex64>> {
    let al = alpha.get();
    // at alpha = 1 no power is taken, so the whole plane is admissible
    let (la, pre) = if alpha.is_classical() {
        (lambda, ONE)
    } else {
        (principal_power(lambda, al)?, principal_power(lambda, al - 1.0)?)
    };
    let d = a.dim();
    let m = DMatrix::<Complex64>::identity(d, d) * la - a.matrix();
    let svd = m.clone().svd(false, false);
    let smin = svd.singular_values.min();
    if smin <= 1e-12 * a.norm().max(1.0) {
        return Err(Error::SingularMatrix(format!(
            "lambda^alpha = {la} is an eigenvalue (smallest singular value {smin:e})"
        )));
    }
    let inv = m
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix(format!("lambda^alpha - A at lambda = {lambda}")))?;
    Ok(inv * pre)
}

fn scaled_resolvent_norms(
    a: &OperatorModel,
    alpha: FractionalOrder,
    zeta: f64,
    x: &[Complex64],
    etas: &[f64],
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    if x.len() != a.dim() {
        return Err(Error::Domain(format!(
            "vector has dimension {}, operator {}",
            x.len(),
            a.dim()
        )));
    }
    let xv = DVector::from_column_slice(x);
    let mut norms = Vec::with_capacity(etas.len());
    let mut last = Vec::new();
    for &eta in etas {
        let r = fractional_resolvent(a, alpha, Complex64::new(eta, zeta))?;
        let y: Vec<Complex64> = (r * &xv * Complex64::new(eta, 0.0)).iter().copied().collect();
        norms.push(vec_norm(&y));
        last = y;
    }
    Ok((last, norms))
}

/// `eta R_alpha(eta + i zeta, A) x` for `eta` decreasing to zero through positive values.
pub fn ergodic_mean_operator(
    a: &OperatorModel,
    alpha: FractionalOrder,
    zeta: f64,
    x: &[Complex64],
    eta_sequence: &[f64],
) -> Result<(Vec<Complex64>, ErgodicDiagnostic)> {
    if eta_sequence.is_empty() || eta_sequence.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain("eta sequence must be non-empty and positive".into()));
    }
    let (last, norms) = scaled_resolvent_norms(a, alpha, zeta, x, eta_sequence)?;
    Ok((last, ErgodicDiagnostic::from_norms(eta_sequence.to_vec(), norms)))
}

/// The same limit approached from `Re lambda < 0`, i.e. along `-eta + i zeta`.
/// At `zeta = 0` this path runs along the branch cut and is rejected.
pub fn ergodic_mean_operator_below(
    a: &OperatorModel,
    alpha: FractionalOrder,
    zeta: f64,
    x: &[Complex64],
    eta_sequence: &[f64],
) -> Result<(Vec<Complex64>, ErgodicDiagnostic)> {
    if eta_sequence.is_empty() || eta_sequence.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain("eta sequence must be non-empty and positive".into()));
    }
    let neg: Vec<f64> = eta_sequence.iter().map(|e| -e).collect();
    let (last, norms) = scaled_resolvent_norms(a, alpha, zeta, x, &neg)?;
    Ok((last, ErgodicDiagnostic::from_norms(neg, norms)))
}
