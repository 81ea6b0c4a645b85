//! Weighted sup-norms `sup |f(t)| / (1+t)^n`, continuity moduli, the
//! translation semigroup and a windowed detector for decay at infinity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal::{vec_norm, SampledSignal};

/// `(1+t)^n`.
#[inline]
pub fn weight(t: f64, n: u32) -> f64 {
    (1.0 + t).powi(n as i32)
}

/// `max_j |f(t_j)| / (1+t_j)^n` over the grid.
pub fn weighted_norm(f: &SampledSignal, n: u32) -> f64 {
    (0..f.len())
        .map(|j| f.norm_at(j) / weight(f.t(j), n))
        .fold(0.0, f64::max)
}

/// Result of [`continuity_modulus`]; `h` is the shift actually used after
/// rounding to a multiple of the grid step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityModulus {
    pub value: f64,
    pub h: f64,
}

/// `sup_t |f(t+h) - f(t)| / (1+t)^n` over grid points where `t+h` is on the grid.
pub fn continuity_modulus(f: &SampledSignal, n: u32, h: f64) -> Result<ContinuityModulus> {
    let shift = (h / f.dt()).round();
    if !(shift >= 1.0) {
        return Err(Error::Domain(format!("shift {h} rounds to zero on step {}", f.dt())));
    }
    let s = shift as usize;
    let mut value = 0.0f64;
    for j in 0..f.len().saturating_sub(s) {
        let d: Vec<_> = f.row(j + s).iter().zip(f.row(j)).map(|(a, b)| a - b).collect();
        value = value.max(vec_norm(&d) / weight(f.t(j), n));
    }
    Ok(ContinuityModulus {
        value,
        h: s as f64 * f.dt(),
    })
}

/// Left shift `S(t) f = f(t + .)`; the result is shorter by `t_shift / dt` samples.
pub fn translate(f: &SampledSignal, t_shift: f64) -> Result<SampledSignal> {
    let steps = t_shift / f.dt();
    let s = steps.round();
    if !(t_shift >= 0.0) || (steps - s).abs() > 1e-9 * steps.max(1.0) {
        return Err(Error::Domain(format!(
            "shift {t_shift} is not a non-negative multiple of the step {}",
            f.dt()
        )));
    }
    let s = s as usize;
    if s >= f.len() {
        return Err(Error::Domain(format!(
            "shift {t_shift} exceeds the grid span {}",
            f.t_max()
        )));
    }
    SampledSignal::from_flat(f.dt(), f.dim(), f.degree(), f.as_flat()[s * f.dim()..].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Decayed,
    NotDecayed,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSup {
    pub window_start: f64,
    pub sup_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub window_sups: Vec<WindowSup>,
    pub verdict: Verdict,
    pub tail_estimate: f64,
}

pub const DEFAULT_WINDOW_COUNT: usize = 5;
pub const DEFAULT_DECAY_TOLERANCE: f64 = 1e-2;

/// Splits the second half of the grid into `window_count` windows and
/// judges whether `|f(t)|/(1+t)^n` tends to zero.
///
/// * `Decayed`: last window sup below `tol` and at least two of the three
///   pairwise comparisons among the last three windows are non-increasing.
/// * `NotDecayed`: last sup at least `10 tol`, or at least `tol` without
///   that downward trend.
/// * `Inconclusive` otherwise.
pub fn decay_profile(f: &SampledSignal, n: u32, window_count: usize, decay_tolerance: f64) -> Result<DecayReport> {
    if window_count < 3 {
        return Err(Error::Domain(format!("need at least 3 windows, got {window_count}")));
    }
    let start = f.len() / 2;
    let tail = f.len() - start;
    if tail < window_count {
        return Err(Error::TooFewPoints {
            needed: 2 * window_count,
            have: f.len(),
        });
    }
    let mut window_sups = Vec::with_capacity(window_count);
    for w in 0..window_count {
        let lo = start + w * tail / window_count;
        let hi = start + (w + 1) * tail / window_count;
        let sup = (lo..hi).map(|j| f.norm_at(j) / weight(f.t(j), n)).fold(0.0, f64::max);
        window_sups.push(WindowSup {
            window_start: f.t(lo),
            sup_value: sup,
        });
    }
    let s: Vec<f64> = window_sups[window_count - 3..].iter().map(|w| w.sup_value).collect();
    let down = [s[0] >= s[1], s[1] >= s[2], s[0] >= s[2]]
        .iter()
        .filter(|b| **b)
        .count();
    let decreasing = down >= 2;
    let last = s[2];
    let verdict = if last < decay_tolerance && decreasing {
        Verdict::Decayed
    } else if last >= 10.0 * decay_tolerance || (last >= decay_tolerance && !decreasing) {
        Verdict::NotDecayed
    } else {
        Verdict::Inconclusive
    };
    Ok(DecayReport {
        window_sups,
        verdict,
        tail_estimate: last,
    })
}
