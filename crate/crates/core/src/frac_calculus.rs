//! Riemann–Liouville integrals and Caputo derivatives of sampled signals.
//!
//! `J^a f(t_m)` is approximated by integrating the piecewise-linear
//! interpolant of `f` exactly against `(t_m - s)^(a-1) / Gamma(a)`.  The
//! resulting weights depend on `m - j` except for the first sample, so the
//! whole grid is one causal convolution evaluated with an FFT.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::signal::SampledSignal;
use crate::special_fn::{rgamma, FractionalOrder};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

// Below this length a direct O(n^2) convolution is cheaper than the FFT.
const DIRECT_CONVOLUTION_MAX: usize = 96;

const MAX_CORRECTIONS: usize = 4;
const MIN_EXPONENT_GAP: f64 = 0.05;

// Index from which the weights are evaluated by their binomial series.
const SERIES_FROM: usize = 8;

fn binomial_series(p: f64, x: f64, from: usize, step: usize, sign: f64) -> f64 {
    // sum_{j >= from, j = from mod step} C(p, j) (sign x)^j
    let mut c = 1.0;
    let mut xj = 1.0;
    let mut sum = 0.0;
    for j in 1..200usize {
        c *= (p - (j as f64 - 1.0)) / j as f64;
        xj *= sign * x;
        if j >= from && (j - from) % step == 0 {
            let term = c * xj;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
    }
    sum
}

/// Interior weight `(l+1)^(a+1) - 2 l^(a+1) + (l-1)^(a+1)`, with `w(0) = 1`.
pub(crate) fn interior_weight(a: f64, l: usize) -> f64 {
    let p = a + 1.0;
    match l {
        0 => 1.0,
        l if l < SERIES_FROM => {
            let lf = l as f64;
            (lf + 1.0).powf(p) - 2.0 * lf.powf(p) + (lf - 1.0).powf(p)
        }
        l => {
            let lf = l as f64;
            2.0 * lf.powf(p) * binomial_series(p, 1.0 / lf, 2, 2, 1.0)
        }
    }
}

/// First-sample weight `(m-1)^(a+1) - (m-1-a) m^a` for `m >= 1`.
pub(crate) fn start_weight(a: f64, m: usize) -> f64 {
    let p = a + 1.0;
    let mf = m as f64;
    if m < SERIES_FROM {
        (mf - 1.0).powf(p) - (mf - 1.0 - a) * mf.powf(a)
    } else {
        mf.powf(p) * binomial_series(p, 1.0 / mf, 2, 1, -1.0)
    }
}

/// Plans forward/inverse transforms of one size.
pub(crate) struct Convolver {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Convolver {
    pub(crate) fn new(len: usize) -> Self {
        let n = (2 * len).next_power_of_two().max(2);
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub(crate) fn spectrum(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![ZERO; self.n];
        buf[..x.len()].copy_from_slice(x);
        self.fwd.process(&mut buf);
        buf
    }

    /// `y[m] = sum_{j<=m} k[m-j] x[j]` for `m < x.len()`, given the spectrum of `k`.
    pub(crate) fn apply(&self, kernel_spec: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = self.spectrum(x);
        for (b, k) in buf.iter_mut().zip(kernel_spec) {
            *b *= k;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.truncate(x.len());
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }
}

/// Causal convolution `y[m] = sum_{j<=m} kernel[m-j] x[j]`.
pub(crate) fn causal_convolve(kernel: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    if n <= DIRECT_CONVOLUTION_MAX {
        return (0..n).map(|m| (0..=m).map(|j| kernel[m - j] * x[j]).sum()).collect();
    }
    let conv = Convolver::new(n);
    let spec = conv.spectrum(&kernel[..n]);
    conv.apply(&spec, x)
}

/// `J^a` of a scalar series on step `h`, for any order `a > 0`.
pub(crate) fn frac_integral_series(x: &[Complex64], h: f64, a: f64) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let c = h.powf(a) * rgamma(a + 2.0);
    let kernel: Vec<Complex64> = (0..n).map(|l| Complex64::new(interior_weight(a, l), 0.0)).collect();
    let mut tail = x.to_vec();
    tail[0] = ZERO;
    let conv = causal_convolve(&kernel, &tail);
    let mut out = vec![ZERO; n];
    for m in 1..n {
        out[m] = c * (start_weight(a, m) * x[0] + conv[m]);
    }
    out
}

/// Starting-weight corrections (Lubich) on top of [`frac_integral_series`]:
/// the corrected rule is additionally exact for `t^g`, `g` in `exponents`,
/// which absorbs the `t^(k alpha)` terms of solutions near `t = 0`.
pub(crate) fn frac_integral_series_corrected(x: &[Complex64], h: f64, a: f64, exponents: &[f64]) -> Vec<Complex64> {
    let mut exps = vec![0.0, 1.0];
    let mut sorted = exponents.to_vec();
    sorted.sort_by(f64::total_cmp);
    for g in sorted {
        // nearly equal exponents make the weight system ill-conditioned
        if exps.len() < 2 + MAX_CORRECTIONS
            && g > 0.0
            && g.fract().abs() > 1e-9
            && !exps.iter().any(|e: &f64| (e - g).abs() < MIN_EXPONENT_GAP)
        {
            exps.push(g);
        }
    }
    let s = exps.len();
    let n = x.len();
    let mut out = frac_integral_series(x, h, a);
    if s == 2 || n <= 2 * s {
        return out;
    }
    // V[i][k] = k^g_i with 0^0 = 1; unknowns scaled so that h drops out
    let v = nalgebra::DMatrix::from_fn(s, s, |i, k| {
        if k == 0 && exps[i] == 0.0 {
            1.0
        } else {
            (k as f64).powf(exps[i])
        }
    });
    let Some(vinv) = v.try_inverse() else {
        return out;
    };
    let mut err = vec![vec![0.0; n]; s];
    for (i, &g) in exps.iter().enumerate() {
        if g.fract() == 0.0 {
            continue; // the base rule is exact for 1 and t
        }
        let basis: Vec<Complex64> = (0..n).map(|m| Complex64::new((m as f64).powf(g), 0.0)).collect();
        let quad = frac_integral_series(&basis, 1.0, a);
        let c = crate::special_fn::gamma_ratio(g + 1.0, g + 1.0 + a);
        for m in 1..n {
            err[i][m] = c * (m as f64).powf(g + a) - quad[m].re;
        }
    }
    let ha = h.powf(a);
    for m in 1..n {
        for k in 0..s {
            let w: f64 = (0..s).map(|i| vinv[(k, i)] * err[i][m]).sum();
            out[m] += x[k] * (w * ha);
        }
    }
    out
}

fn integral_of_order(f: &SampledSignal, a: f64) -> Result<SampledSignal> {
    let exps = f.start_exponents();
    let comps: Vec<Vec<Complex64>> = (0..f.dim())
        .map(|k| frac_integral_series_corrected(&f.component(k), f.dt(), a, exps))
        .collect();
    let mut out_exps = vec![a];
    out_exps.extend(exps.iter().map(|g| g + a));
    Ok(SampledSignal::from_components(f.dt(), f.degree(), &comps)?.with_start_exponents(out_exps))
}

/// Riemann–Liouville integral `J^alpha f` on the grid of `f`; `J^alpha f(0) = 0`.
///
/// The product rule is exact for piecewise-linear data; powers listed in
/// [`SampledSignal::start_exponents`] are integrated exactly as well, and the
/// result records the powers `alpha` and `g + alpha` it acquires.
pub fn frac_integral(f: &SampledSignal, alpha: FractionalOrder) -> Result<SampledSignal> {
    integral_of_order(f, alpha.get())
}

/// Second-order finite-difference derivative, one-sided at both ends.
pub fn finite_difference(f: &SampledSignal) -> Result<SampledSignal> {
    let m = f.len();
    if m < 3 {
        return Err(Error::TooFewPoints { needed: 3, have: m });
    }
    let h = f.dt();
    let mut rows = Vec::with_capacity(m);
    for j in 0..m {
        let d: Vec<Complex64> = (0..f.dim())
            .map(|k| {
                let v = |i: usize| f.row(i)[k];
                if j == 0 {
                    (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
                } else if j == m - 1 {
                    (3.0 * v(j) - 4.0 * v(j - 1) + v(j - 2)) / (2.0 * h)
                } else {
                    (v(j + 1) - v(j - 1)) / (2.0 * h)
                }
            })
            .collect();
        rows.push(d);
    }
    SampledSignal::new(h, f.degree(), rows)
}

/// Caputo derivative `D^alpha f = J^(1-alpha) f'`, the plain derivative at `alpha = 1`.
/// `f` is taken to be smooth at `t = 0`.
pub fn caputo_derivative(f: &SampledSignal, alpha: FractionalOrder) -> Result<SampledSignal> {
    let df = finite_difference(f)?;
    if alpha.is_classical() {
        return Ok(df);
    }
    integral_of_order(&df, 1.0 - alpha.get())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    #[test]
    fn weights_match_direct_formula_where_it_is_accurate() {
        for &a in &[0.3, 0.5, 1.0] {
            for l in [8usize, 9, 20, 100] {
                let lf = l as f64;
                let p = a + 1.0;
                let direct = (lf + 1.0).powf(p) - 2.0 * lf.powf(p) + (lf - 1.0).powf(p);
                assert!((interior_weight(a, l) - direct).abs() < 1e-9 * direct.abs().max(1.0));
                let direct0 = (lf - 1.0).powf(p) - (lf - 1.0 - a) * lf.powf(a);
                assert!((start_weight(a, l) - direct0).abs() < 1e-9 * direct0.abs().max(1.0));
            }
        }
    }

    #[test]
    fn classical_weights_are_trapezoid() {
        assert_eq!(interior_weight(1.0, 1), 2.0);
        assert!((interior_weight(1.0, 500) - 2.0).abs() < 1e-12);
        assert!((start_weight(1.0, 700) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fft_and_direct_convolutions_agree() {
        let k: Vec<Complex64> = (0..300).map(|l| Complex64::new(1.0 / (1.0 + l as f64), 0.3)).collect();
        let x: Vec<Complex64> = (0..300).map(|j| Complex64::new((j as f64).sin(), 1.0)).collect();
        let fast = causal_convolve(&k, &x);
        for m in [0usize, 1, 50, 299] {
            let slow: Complex64 = (0..=m).map(|j| k[m - j] * x[j]).sum();
            assert!((fast[m] - slow).norm() < 1e-11 * slow.norm().max(1.0));
        }
    }

    #[test]
    fn integral_examples() {
        let one = SampledSignal::from_scalar_fn(0.01, 201, 0, |_| Complex64::new(1.0, 0.0)).unwrap();
        let j1 = frac_integral(&one, order(1.0)).unwrap();
        for j in 0..one.len() {
            assert!((j1.row(j)[0].re - one.t(j)).abs() < 1e-12);
        }
        let jh = frac_integral(&one, order(0.5)).unwrap();
        assert_eq!(jh.row(0)[0], ZERO);
        assert!((jh.row(100)[0].re - 1.1283791670955126).abs() < 1e-12);
        let zero = one.scale(ZERO);
        assert!(frac_integral(&zero, order(0.5))
            .unwrap()
            .as_flat()
            .iter()
            .all(|v| *v == ZERO));
    }

    #[test]
    fn caputo_examples() {
        let c = SampledSignal::from_scalar_fn(0.01, 301, 0, |_| Complex64::new(2.5, -1.0)).unwrap();
        let d = caputo_derivative(&c, order(0.4)).unwrap();
        assert!(d.as_flat().iter().all(|v| v.norm() < 1e-10));

        let lin = SampledSignal::from_scalar_fn(0.01, 201, 0, |t| Complex64::new(t, 0.0)).unwrap();
        let d = caputo_derivative(&lin, order(0.5)).unwrap();
        assert!((d.row(100)[0].re - 1.1283791670955126).abs() < 1e-10);

        let sq = SampledSignal::from_scalar_fn(0.01, 401, 0, |t| Complex64::new(t * t, 0.0)).unwrap();
        let d = caputo_derivative(&sq, order(1.0)).unwrap();
        assert!((d.row(300)[0].re - 6.0).abs() < 1e-10);

        let short = SampledSignal::from_scalar_fn(0.1, 2, 0, |t| Complex64::new(t, 0.0)).unwrap();
        assert_eq!(
            caputo_derivative(&short, order(0.5)),
            Err(Error::TooFewPoints { needed: 3, have: 2 })
        );
    }
}
