//! Resolvent of the differentiation operator on weighted half-line spaces,
//! Laplace transforms, Laurent coefficients on circles, singularity scans
//! and ergodic means of sampled signals.
//!
//! Sign convention: `y = R(lambda) f` solves `lambda y - y' = f`.  For
//! `Re lambda > 0` this is `y(t) = int_t^inf e^(lambda (t-s)) f(s) ds`, for
//! `Re lambda < 0` it is `y(t) = -int_0^t e^(lambda (t-s)) f(s) ds`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::signal::{vec_norm, SampledSignal};
use crate::weighted_space::weighted_norm;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Bound on `e^(-Re lambda (T - t)) (1+T)^n` for every reported `t`.
pub const TRUNCATION_TOL: f64 = 1e-10;

/// `eta_k = 0.5^k`, `k = 1..=10`.
pub fn default_eta_sequence() -> Vec<f64> {
    (1..=10).map(|k| 0.5f64.powi(k)).collect()
}

/// Length of the final stretch of `[0, t_max]` lost to the tail criterion.
pub fn tail_margin(re_lambda: f64, n: u32, t_max: f64) -> f64 {
    ((1.0 / TRUNCATION_TOL).ln() + n as f64 * (1.0 + t_max).ln()) / re_lambda
}

/// Whether `t = 0` can be reported for `Re lambda = eta` on a grid ending at `t_max`.
pub fn eta_reachable(eta: f64, n: u32, t_max: f64) -> bool {
    eta > 0.0 && tail_margin(eta, n, t_max) < t_max
}

/// `int_0^h e^(-w tau) [(1 - tau/h) a + (tau/h) b] dtau = A a + B b`; returns `(A, B)`.
fn exp_weights(w: Complex64, h: f64) -> (Complex64, Complex64) {
    let z = w * h;
    let (p1, p2) = if z.norm() < 0.5 {
        // (1 - e^-z)/z and (1 - e^-z (1+z))/z^2 by their Taylor series
        let mut p1 = ZERO;
        let mut p2 = ZERO;
        let mut zk = Complex64::new(1.0, 0.0);
        let mut fact = 1.0; // (k+1)!
        for k in 0..24 {
            fact *= (k + 1) as f64;
            p1 += zk / fact;
            p2 += zk * (k + 1) as f64 / (fact * (k + 2) as f64);
            zk *= -z;
        }
        (p1, p2)
    } else {
        let e = (-z).exp();
        ((1.0 - e) / z, (1.0 - e * (1.0 + z)) / (z * z))
    };
    (h * (p1 - p2), h * p2)
}

fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Number of samples of `f` for which `R(lambda) f` is reported.
fn reported_len(f: &SampledSignal, lambda: Complex64, n: u32) -> Result<usize> {
    let t_max = f.t_max();
    let margin = tail_margin(lambda.re, n, t_max);
    let last = t_max - margin;
    if !(last >= 0.0) {
        return Err(Error::Truncation(format!(
            "Re lambda = {} on a grid ending at {t_max} with n = {n} needs a horizon beyond {}",
            lambda.re, margin
        )));
    }
    // strict inequality keeps the criterion below the tolerance at the last reported point
    let mut len = (last / f.dt()).floor() as usize + 1;
    if len as f64 * f.dt() - f.dt() >= last && len > 1 {
        len -= 1;
    }
    Ok(len.min(f.len()))
}

/// The `n`-bounded representative of `(lambda - d/dt)^(-1) f`.
///
/// For `Re lambda > 0` the infinite integral is truncated at the end of the
/// grid and only the samples satisfying the tail criterion are returned.
pub fn resolvent_apply(f: &SampledSignal, lambda: Complex64, n: u32) -> Result<SampledSignal> {
    if lambda.re == 0.0 || !lambda.re.is_finite() {
        return Err(Error::Domain(format!("resolvent needs Re lambda != 0, got {lambda}")));
    }
    let h = f.dt();
    let d = f.dim();
    let m = f.len();
    let mut y = vec![ZERO; m * d];
    if lambda.re > 0.0 {
        let (a, b) = exp_weights(lambda, h);
        let decay = (-lambda * h).exp();
        for j in (0..m - 1).rev() {
            let (head, tail) = y.split_at_mut((j + 1) * d);
            let yj = &mut head[j * d..];
            for k in 0..d {
                yj[k] = decay * tail[k];
            }
            axpy(yj, a, f.row(j));
            axpy(yj, b, f.row(j + 1));
        }
        let len = reported_len(f, lambda, n)?;
        y.truncate(len * d);
    } else {
        // sigma = t_{j+1} - s runs over [0, h]; f_{j+1} sits at sigma = 0
        let (a, b) = exp_weights(-lambda, h);
        let growth = (lambda * h).exp();
        for j in 0..m - 1 {
            let (head, tail) = y.split_at_mut((j + 1) * d);
            let yn = &mut tail[..d];
            for k in 0..d {
                yn[k] = growth * head[j * d + k];
            }
            axpy(yn, -a, f.row(j + 1));
            axpy(yn, -b, f.row(j));
        }
    }
    SampledSignal::from_flat(h, d, n, y)
}

fn laplace_with_degree(f: &SampledSignal, lambda: Complex64, n: u32) -> Result<Vec<Complex64>> {
    if !(lambda.re > 0.0) {
        return Err(Error::Domain(format!(
            "Laplace transform needs Re lambda > 0, got {lambda}"
        )));
    }
    let t_max = f.t_max();
    if !((-lambda.re * t_max).exp() * (1.0 + t_max).powi(n as i32) < TRUNCATION_TOL) {
        return Err(Error::Truncation(format!(
            "e^(-{} T) (1+T)^{n} is not below {TRUNCATION_TOL:e} at T = {t_max}",
            lambda.re
        )));
    }
    let h = f.dt();
    let (a, b) = exp_weights(lambda, h);
    let mut acc = vec![ZERO; f.dim()];
    for j in 0..f.len() - 1 {
        let e = (-lambda * f.t(j)).exp();
        axpy(&mut acc, e * a, f.row(j));
        axpy(&mut acc, e * b, f.row(j + 1));
    }
    Ok(acc)
}

/// Truncated `int_0^T e^(-lambda t) f(t) dt`, using the degree of `f` for the tail criterion.
pub fn laplace_transform(f: &SampledSignal, lambda: Complex64) -> Result<Vec<Complex64>> {
    laplace_with_degree(f, lambda, f.degree())
}

/// `sum_j coeffs[j] / (z - pole)^(j+1)`, vector valued.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleTerm {
    pub pole: Complex64,
    pub coeffs: Vec<Vec<Complex64>>,
}

/// A vector-valued rational function in partial-fraction form.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    dim: usize,
    /// Ascending powers of `z`.
    polynomial: Vec<Vec<Complex64>>,
    poles: Vec<PoleTerm>,
}

impl RationalFunction {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            polynomial: Vec::new(),
            poles: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn poles(&self) -> &[PoleTerm] {
        &self.poles
    }

    pub fn with_polynomial(mut self, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        self.check(&coeffs)?;
        self.polynomial = coeffs;
        Ok(self)
    }

    pub fn with_pole(mut self, pole: Complex64, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        self.check(&coeffs)?;
        self.poles.push(PoleTerm { pole, coeffs });
        Ok(self)
    }

    /// Scalar `sum poly[k] z^k + sum_p sum_j c_pj / (z - p)^(j+1)`.
    pub fn scalar(poly: &[Complex64], poles: &[(Complex64, Vec<Complex64>)]) -> Self {
        let wrap = |v: &[Complex64]| v.iter().map(|c| vec![*c]).collect::<Vec<_>>();
        Self {
            dim: 1,
            polynomial: wrap(poly),
            poles: poles
                .iter()
                .map(|(p, c)| PoleTerm {
                    pole: *p,
                    coeffs: wrap(c),
                })
                .collect(),
        }
    }

    fn check(&self, coeffs: &[Vec<Complex64>]) -> Result<()> {
        if coeffs.iter().any(|c| c.len() != self.dim) {
            return Err(Error::Domain(format!("coefficients must have dimension {}", self.dim)));
        }
        Ok(())
    }

    pub fn eval(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; self.dim];
        let mut zk = Complex64::new(1.0, 0.0);
        for c in &self.polynomial {
            axpy(&mut out, zk, c);
            zk *= z;
        }
        for term in &self.poles {
            let w = z - term.pole;
            if w == ZERO {
                return Err(Error::Domain(format!("rational function evaluated at its pole {z}")));
            }
            let inv = 1.0 / w;
            let mut p = inv;
            for c in &term.coeffs {
                axpy(&mut out, p, c);
                p *= inv;
            }
        }
        Ok(out)
    }
}

/// A function holomorphic off the imaginary axis.
#[derive(Debug, Clone, PartialEq)]
pub enum HolomorphicHandle {
    Rational(RationalFunction),
    /// `lambda -> L f(lambda)`, defined for `Re lambda > 0` only.
    LaplaceOfSignal {
        signal: SampledSignal,
        degree: u32,
    },
}

impl HolomorphicHandle {
    pub fn eval(&self, z: Complex64) -> Result<Vec<Complex64>> {
        match self {
            Self::Rational(r) => r.eval(z),
            Self::LaplaceOfSignal { signal, degree } => laplace_with_degree(signal, z, *degree),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaurentExpansion {
    pub center_xi: f64,
    pub radius: f64,
    pub coefficients: BTreeMap<i64, Vec<Complex64>>,
    pub quad_points: usize,
}

impl LaurentExpansion {
    pub fn coeff(&self, k: i64) -> Option<&[Complex64]> {
        self.coefficients.get(&k).map(Vec::as_slice)
    }
}

fn circle_coefficients(
    f: &RationalFunction,
    center: Complex64,
    r: f64,
    k_min: i64,
    k_max: i64,
    points: usize,
) -> Result<BTreeMap<i64, Vec<Complex64>>> {
    let samples = (0..points)
        .map(|j| {
            let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / points as f64);
            f.eval(center + r * e).map(|v| (e, v))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|_| Error::SingularityTooClose { drift: f64::INFINITY })?;
    let mut out = BTreeMap::new();
    for k in k_min..=k_max {
        let mut acc = vec![ZERO; f.dim()];
        for (e, v) in &samples {
            axpy(&mut acc, e.powi(-(k as i32)), v);
        }
        let scale = r.powi(-(k as i32)) / points as f64;
        out.insert(k, acc.into_iter().map(|c| c * scale).collect());
    }
    Ok(out)
}

/// Laurent coefficients `a_k` around `i xi` from the trapezoidal rule on
/// the circle of radius `r`; the result uses `2 quad_points` nodes and is
/// compared with the `quad_points` result to detect nearby singularities.
pub fn laurent_coefficients(
    f: &HolomorphicHandle,
    xi: f64,
    r: f64,
    k_min: i64,
    k_max: i64,
    quad_points: usize,
) -> Result<LaurentExpansion> {
    let HolomorphicHandle::Rational(rf) = f else {
        return Err(Error::Domain(
            "Laurent coefficients are only computed for rational handles".into(),
        ));
    };
    if quad_points < 64 {
        return Err(Error::Domain(format!(
            "need at least 64 quadrature points, got {quad_points}"
        )));
    }
    if !(r > 0.0) || k_min > k_max {
        return Err(Error::Domain(format!(
            "bad radius {r} or index range {k_min}..={k_max}"
        )));
    }
    let center = Complex64::new(0.0, xi);
    for p in rf.poles() {
        let dist = (p.pole - center).norm();
        if dist > 1e-14 * r && dist <= r * (1.0 + 1e-12) {
            return Err(Error::SingularityTooClose { drift: f64::INFINITY });
        }
    }
    let coarse = circle_coefficients(rf, center, r, k_min, k_max, quad_points)?;
    let fine = circle_coefficients(rf, center, r, k_min, k_max, 2 * quad_points)?;
    let mut drift = 0.0f64;
    let mut size = 1.0f64;
    for (k, a) in &fine {
        let rk = r.powi(*k as i32);
        let b = &coarse[k];
        let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        drift = drift.max(vec_norm(&d) * rk);
        size = size.max(vec_norm(a) * rk);
    }
    if drift > 1e-8 * size {
        return Err(Error::SingularityTooClose { drift });
    }
    Ok(LaurentExpansion {
        center_xi: xi,
        radius: r,
        coefficients: fine,
        quad_points: 2 * quad_points,
    })
}

/// `|sum_j C(N,j) r^(2N-2j) a_(k-2j)| - 2^N M r^(N-k)`; non-positive when
/// the coefficient estimate for `|f(z)| <= M / |Re z|^N` holds.
pub fn laurent_bound_residual(exp: &LaurentExpansion, big_n: u32, m: f64, k: i64) -> Result<f64> {
    let r = exp.radius;
    let dim = exp.coefficients.values().next().map(Vec::len).unwrap_or(1);
    let mut sum = vec![ZERO; dim];
    let mut binom = 1.0;
    for j in 0..=big_n {
        if j > 0 {
            binom *= (big_n - j + 1) as f64 / j as f64;
        }
        let idx = k - 2 * j as i64;
        let a = exp.coeff(idx).ok_or(Error::MissingCoefficient(idx))?;
        let w = binom * r.powi(2 * (big_n - j) as i32);
        axpy(&mut sum, Complex64::new(w, 0.0), a);
    }
    let rhs = 2f64.powi(big_n as i32) * m * r.powf(big_n as f64 - k as f64);
    Ok(vec_norm(&sum) - rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub xi: f64,
    /// 0 when no singularity is detected.
    pub order: u32,
    pub fit_slope: f64,
}

fn usable_etas(eta_sequence: &[f64], n: u32, t_max: f64) -> Result<Vec<f64>> {
    if eta_sequence.windows(2).any(|w| !(w[1] < w[0])) || eta_sequence.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain("eta sequence must be positive and decreasing".into()));
    }
    let etas: Vec<f64> = eta_sequence
        .iter()
        .copied()
        .filter(|e| eta_reachable(*e, n, t_max))
        .collect();
    if etas.is_empty() {
        return Err(Error::Truncation(format!(
            "no eta in the sequence satisfies the tail criterion on [0, {t_max}] with n = {n}"
        )));
    }
    Ok(etas)
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fits `log |L f(eta + i xi)|` against `log eta` for each `xi`; a slope
/// of `-0.5` or steeper marks a singularity whose order is the rounded
/// slope capped at `n + 1`.  A heuristic, not a decision procedure.
///
/// Values of `eta` whose tail criterion cannot be met on the grid of `f`
/// are skipped.
pub fn singularity_scan(f: &SampledSignal, n: u32, xi_grid: &[f64], eta_sequence: &[f64]) -> Result<Vec<ScanPoint>> {
    let etas = usable_etas(eta_sequence, n, f.t_max())?;
    if etas.len() < 2 {
        return Err(Error::Truncation(format!(
            "only {} eta value(s) usable on [0, {}]; a fit needs two",
            etas.len(),
            f.t_max()
        )));
    }
    let log_eta: Vec<f64> = etas.iter().map(|e| e.ln()).collect();
    xi_grid
        .par_iter()
        .map(|&xi| {
            let mut logs = Vec::with_capacity(etas.len());
            for &eta in &etas {
                let v = laplace_with_degree(f, Complex64::new(eta, xi), n)?;
                logs.push(vec_norm(&v).ln());
            }
            let slope = if logs.iter().all(|l| l.is_finite()) {
                ls_slope(&log_eta, &logs)
            } else {
                0.0
            };
            let order = if slope <= -0.5 {
                ((-slope).round() as u32).clamp(1, n + 1)
            } else {
                0
            };
            Ok(ScanPoint {
                xi,
                order,
                fit_slope: slope,
            })
        })
        .collect()
}

fn ser_limit<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

/// Scaled norms along a decreasing `eta` sequence and their extrapolated limit.
/// A divergent sequence has limit `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicDiagnostic {
    pub eta_values: Vec<f64>,
    pub scaled_norms: Vec<f64>,
    #[serde(serialize_with = "ser_limit")]
    pub extrapolated_limit: f64,
    pub converged: bool,
}

impl ErgodicDiagnostic {
    /// Aitken extrapolation on the last three norms; a non-decelerating
    /// increase is reported as divergence.
    pub fn from_norms(eta_values: Vec<f64>, scaled_norms: Vec<f64>) -> Self {
        let n = scaled_norms.len();
        let converged = n >= 2 && (scaled_norms[n - 1] - scaled_norms[n - 2]).abs() < 1e-3;
        let last = scaled_norms.last().copied().unwrap_or(0.0);
        let limit = if n < 3 {
            last
        } else {
            let (s1, s2, s3) = (scaled_norms[n - 3], scaled_norms[n - 2], last);
            let (d1, d2) = (s2 - s1, s3 - s2);
            if d2.abs() <= 1e-12 * s3.abs().max(1.0) || d1 == 0.0 {
                s3
            } else {
                let r = d2 / d1;
                if r > 0.0 && r < 1.0 {
                    (s3 + d2 * r / (1.0 - r)).max(0.0)
                } else if r >= 1.0 && d2 > 0.0 {
                    f64::INFINITY
                } else {
                    s3
                }
            }
        };
        Self {
            eta_values,
            scaled_norms,
            extrapolated_limit: limit,
            converged,
        }
    }

    pub fn diverges(&self) -> bool {
        self.extrapolated_limit.is_infinite()
    }
}

/// `eta R(eta + i zeta) f` along the usable part of `eta_sequence`; returns the
/// last iterate and the diagnostic of its weighted norms.
pub fn ergodic_mean_signal(
    f: &SampledSignal,
    n: u32,
    zeta: f64,
    eta_sequence: &[f64],
) -> Result<(SampledSignal, ErgodicDiagnostic)> {
    let etas = usable_etas(eta_sequence, n, f.t_max())?;
    let mut norms = Vec::with_capacity(etas.len());
    let mut last = None;
    for &eta in &etas {
        let y = resolvent_apply(f, Complex64::new(eta, zeta), n)?.scale(Complex64::new(eta, 0.0));
        norms.push(weighted_norm(&y, n));
        last = Some(y);
    }
    Ok((
        last.expect("at least one eta"),
        ErgodicDiagnostic::from_norms(etas, norms),
    ))
}
