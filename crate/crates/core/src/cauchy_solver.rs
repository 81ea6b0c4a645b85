//! Mild solutions of `D^alpha u = A u + f`, `u(0) = x0`, for a matrix `A`.
//!
//! Two independent routes: the Mittag-Leffler resolvent family in the
//! eigenbasis of `A` (variation of constants with product quadrature), and
//! a fractional Adams predictor-corrector on the Volterra form
//! `u = x0 + J^alpha (A u + f)`.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frac_calculus::{causal_convolve, frac_integral, interior_weight, start_weight};
use crate::operator_spectrum::OperatorModel;
use crate::signal::{vec_norm, SampledSignal};
use crate::special_fn::{mittag_leffler, rgamma, FractionalOrder};
use crate::weighted_space::{weight, DEFAULT_DECAY_TOLERANCE};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Zero,
    /// `e^(-rate t) v`
    ExpDecay {
        rate: f64,
        vector: Vec<Complex64>,
    },
    /// `e^(i xi t) v`
    Sinusoid {
        xi: f64,
        vector: Vec<Complex64>,
    },
    /// Samples read from a CSV file on the scenario grid.
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t_max: f64,
    pub steps: usize,
}

impl Grid {
    pub fn dt(&self) -> f64 {
        self.t_max / self.steps as f64
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub decay: f64,
    pub residual: f64,
    pub ergodic: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            decay: DEFAULT_DECAY_TOLERANCE,
            residual: 1e-3,
            ergodic: 5e-2,
        }
    }
}

/// A complete experiment: operator, order, weight degree, data, grid and tolerances.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub operator: OperatorModel,
    pub alpha: FractionalOrder,
    pub degree: u32,
    pub x0: Vec<Complex64>,
    pub forcing: Forcing,
    pub grid: Grid,
    pub tol: Tolerances,
    /// Use the Adams oracle when `A` has no eigenbasis.
    pub adams_fallback: bool,
}

impl Scenario {
    /// Zero forcing, degree 0, default tolerances.
    pub fn new(operator: OperatorModel, alpha: FractionalOrder, x0: Vec<Complex64>, grid: Grid) -> Result<Self> {
        let s = Self {
            operator,
            alpha,
            degree: 0,
            x0,
            forcing: Forcing::Zero,
            grid,
            tol: Tolerances::default(),
            adams_fallback: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.operator.dim();
        if self.x0.len() != d {
            return Err(Error::Config(format!(
                "x0 has dimension {}, matrix is {d}x{d}",
                self.x0.len()
            )));
        }
        match &self.forcing {
            Forcing::ExpDecay { vector, .. } | Forcing::Sinusoid { vector, .. } if vector.len() != d => {
                return Err(Error::Config(format!(
                    "forcing vector has dimension {}, matrix is {d}x{d}",
                    vector.len()
                )));
            }
            _ => {}
        }
        if !(self.grid.t_max > 0.0) || !self.grid.t_max.is_finite() || self.grid.steps < 2 {
            return Err(Error::Config(format!(
                "grid needs t_max > 0 and at least 2 steps, got t_max = {}, steps = {}",
                self.grid.t_max, self.grid.steps
            )));
        }
        let t = &self.tol;
        if !(t.decay > 0.0 && t.residual > 0.0 && t.ergodic > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// The forcing sampled on the scenario grid, carrying the scenario degree.
    pub fn forcing_signal(&self) -> Result<SampledSignal> {
        let (dt, len, d, n) = (self.grid.dt(), self.grid.len(), self.operator.dim(), self.degree);
        match &self.forcing {
            Forcing::Zero => SampledSignal::zeros(dt, len, d, n),
            Forcing::ExpDecay { rate, vector } => SampledSignal::from_fn(dt, len, d, n, |t| {
                let e = (-rate * t).exp();
                vector.iter().map(|v| v * e).collect()
            }),
            Forcing::Sinusoid { xi, vector } => SampledSignal::from_fn(dt, len, d, n, |t| {
                let e = Complex64::from_polar(1.0, xi * t);
                vector.iter().map(|v| v * e).collect()
            }),
            Forcing::Csv(path) => {
                let s = SampledSignal::read_csv_path(path, n)?;
                if (s.dt() - dt).abs() > 1e-9 * dt || s.len() < len || s.dim() != d {
                    return Err(Error::GridMismatch(format!(
                        "forcing file {} has step {}, {} samples, dimension {}; scenario needs step {dt}, {len} samples, dimension {d}",
                        path.display(),
                        s.dt(),
                        s.len(),
                        s.dim()
                    )));
                }
                Ok(s.truncated(len))
            }
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    /// Parses the scenario format: TOML with dotted keys `alpha`, `degree`,
    /// `matrix`, `x0`, `forcing.*`, `grid.*`, `tol.*` and `solver.fallback`.
    /// Complex entries are written `re:im` (or a bare real), separated by
    /// spaces or commas, with `;` between matrix rows.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let root: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let get = |path: &str| -> Option<&toml::Value> {
            let mut parts = path.split('.');
            let mut v = root.get(parts.next()?)?;
            for p in parts {
                v = v.as_table()?.get(p)?;
            }
            Some(v)
        };
        let num = |path: &str| -> Result<Option<f64>> {
            match get(path) {
                None => Ok(None),
                Some(toml::Value::Float(x)) => Ok(Some(*x)),
                Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
                Some(other) => Err(Error::Config(format!("{path} must be a number, got {other}"))),
            }
        };
        let req_num = |path: &str| num(path)?.ok_or_else(|| Error::Config(format!("missing key {path}")));
        let text_of = |path: &str| -> Result<Option<String>> {
            match get(path) {
                None => Ok(None),
                Some(toml::Value::String(s)) => Ok(Some(s.clone())),
                Some(toml::Value::Float(x)) => Ok(Some(x.to_string())),
                Some(toml::Value::Integer(i)) => Ok(Some(i.to_string())),
                Some(other) => Err(Error::Config(format!("{path} must be a string, got {other}"))),
            }
        };
        let req_text = |path: &str| text_of(path)?.ok_or_else(|| Error::Config(format!("missing key {path}")));

        let alpha = FractionalOrder::new(req_num("alpha")?).map_err(|e| Error::Config(e.to_string()))?;
        let degree = match num("degree")? {
            None => 0,
            Some(x) if x >= 0.0 && x.fract() == 0.0 && x <= 16.0 => x as u32,
            Some(x) => {
                return Err(Error::Config(format!(
                    "degree must be a small non-negative integer, got {x}"
                )))
            }
        };
        let operator =
            OperatorModel::from_rows(&parse_matrix(&req_text("matrix")?)?).map_err(|e| Error::Config(e.to_string()))?;
        let x0 = parse_vector(&req_text("x0")?)?;
        let kind = text_of("forcing.kind")?.unwrap_or_else(|| "zero".into());
        let forcing = match kind.as_str() {
            "zero" => Forcing::Zero,
            "exp_decay" => Forcing::ExpDecay {
                rate: req_num("forcing.rate")?,
                vector: parse_vector(&req_text("forcing.vector")?)?,
            },
            "sinusoid" => Forcing::Sinusoid {
                xi: req_num("forcing.xi")?,
                vector: parse_vector(&req_text("forcing.vector")?)?,
            },
            "csv" => Forcing::Csv(base_dir.join(req_text("forcing.path")?)),
            other => return Err(Error::Config(format!("unknown forcing.kind {other:?}"))),
        };
        let steps = req_num("grid.steps")?;
        if !(steps >= 2.0) || steps.fract() != 0.0 {
            return Err(Error::Config(format!(
                "grid.steps must be an integer >= 2, got {steps}"
            )));
        }
        let grid = Grid {
            t_max: req_num("grid.t_max")?,
            steps: steps as usize,
        };
        let def = Tolerances::default();
        let tol = Tolerances {
            decay: num("tol.decay")?.unwrap_or(def.decay),
            residual: num("tol.residual")?.unwrap_or(def.residual),
            ergodic: num("tol.ergodic")?.unwrap_or(def.ergodic),
        };
        let adams_fallback = match text_of("solver.fallback")?.as_deref() {
            None | Some("none") => false,
            Some("adams") => true,
            Some(other) => return Err(Error::Config(format!("unknown solver.fallback {other:?}"))),
        };
        let s = Scenario {
            operator,
            alpha,
            degree,
            x0,
            forcing,
            grid,
            tol,
            adams_fallback,
        };
        s.validate()?;
        Ok(s)
    }
}

fn parse_complex(tok: &str) -> Result<Complex64> {
    let bad = || Error::Config(format!("bad complex entry {tok:?}, expected re:im"));
    let (re, im) = match tok.split_once(':') {
        Some((r, i)) => (
            r.trim().parse().map_err(|_| bad())?,
            i.trim().parse().map_err(|_| bad())?,
        ),
        None => (tok.trim().parse().map_err(|_| bad())?, 0.0),
    };
    Ok(Complex64::new(re, im))
}

/// `"1:0 0:-1"` -> `[1, -i]`.
pub fn parse_vector(s: &str) -> Result<Vec<Complex64>> {
    let v = s
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(parse_complex)
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(Error::Config("empty vector".into()));
    }
    Ok(v)
}

/// Rows separated by `;`.
pub fn parse_matrix(s: &str) -> Result<Vec<Vec<Complex64>>> {
    let rows = s
        .split(';')
        .filter(|r| !r.trim().is_empty())
        .map(parse_vector)
        .collect::<Result<Vec<_>>>()?;
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config(format!("matrix {s:?} is not square")));
    }
    Ok(rows)
}

/// `E_{alpha,beta}(z)`, using `exp` directly in the classical case.
fn ml(alpha: f64, beta: f64, z: Complex64) -> Result<Complex64> {
    if alpha == 1.0 && beta == 1.0 {
        Ok(z.exp())
    } else {
        mittag_leffler(alpha, beta, z)
    }
}

/// `S_alpha(t) = E_alpha(t^alpha A)`; `e^(tA)` when `alpha = 1`.
pub fn resolvent_family(a: &OperatorModel, alpha: FractionalOrder, t: f64) -> Result<DMatrix<Complex64>> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("resolvent family needs t >= 0, got {t}")));
    }
    let d = a.dim();
    if t == 0.0 {
        return Ok(DMatrix::identity(d, d));
    }
    let al = alpha.get();
    let ta = t.powf(al);
    a.function(|mu| ml(al, 1.0, mu * ta))
}

fn check_grid(u: &SampledSignal, sc: &Scenario) -> Result<()> {
    let g = sc.grid;
    if (u.dt() - g.dt()).abs() > 1e-9 * g.dt() || u.len() != g.len() || u.dim() != sc.operator.dim() {
        return Err(Error::GridMismatch(format!(
            "signal (dt {}, {} samples, dim {}) vs scenario (dt {}, {} samples, dim {})",
            u.dt(),
            u.len(),
            u.dim(),
            g.dt(),
            g.len(),
            sc.operator.dim()
        )));
    }
    Ok(())
}

/// `J^alpha` with starting corrections for the `t^(k alpha)` terms that
/// solutions carry near `t = 0`.
fn corrected_integral(u: &SampledSignal, alpha: FractionalOrder) -> Result<SampledSignal> {
    let al = alpha.get();
    let exps: Vec<f64> = (1..).map(|k| k as f64 * al).take_while(|g| *g < 1.0).collect();
    frac_integral(&u.clone().with_start_exponents(exps), alpha)
}

/// `max_t |u(t) - A J^alpha u(t) - J^alpha f(t) - x0| / (1+t)^n`, with the
/// Riemann–Liouville integrals taken by the corrected product rule.
pub fn mild_residual(u: &SampledSignal, sc: &Scenario) -> Result<f64> {
    check_grid(u, sc)?;
    let ju = corrected_integral(u, sc.alpha)?;
    let jf = corrected_integral(&sc.forcing_signal()?, sc.alpha)?;
    let a = sc.operator.matrix();
    let mut worst = 0.0f64;
    for j in 0..u.len() {
        let aju = a * DVector::from_column_slice(ju.row(j));
        let r: Vec<Complex64> = (0..u.dim())
            .map(|k| u.row(j)[k] - aju[k] - jf.row(j)[k] - sc.x0[k])
            .collect();
        worst = worst.max(vec_norm(&r) / weight(u.t(j), sc.degree));
    }
    Ok(worst)
}

/// Spectral route; the result is checked with [`mild_residual`].
pub fn solve_forced(sc: &Scenario) -> Result<SampledSignal> {
    sc.validate()?;
    let Some((v, vinv)) = sc.operator.eigenvectors() else {
        if sc.adams_fallback {
            log::info!("operator is not diagonalizable, using the Adams oracle");
            return adams_oracle(sc);
        }
        return Err(Error::DefectiveMatrix(
            "spectral solver needs an eigenbasis; set solver.fallback = \"adams\"".into(),
        ));
    };
    let al = sc.alpha.get();
    let (h, len, d) = (sc.grid.dt(), sc.grid.len(), sc.operator.dim());
    let f = sc.forcing_signal()?;
    let forced = !matches!(sc.forcing, Forcing::Zero);
    let x_hat = vinv * DVector::from_column_slice(&sc.x0);
    let f_hat: Vec<DVector<Complex64>> = f.rows().map(|r| vinv * DVector::from_column_slice(r)).collect();

    let mut modes = Vec::with_capacity(d);
    for (i, &mu) in sc.operator.eigenvalues().iter().enumerate() {
        let mut ui = vec![ZERO; len];
        for (j, u) in ui.iter_mut().enumerate() {
            let t = j as f64 * h;
            *u = ml(al, 1.0, mu * t.powf(al))? * x_hat[i];
        }
        if forced {
            // The piecewise-linear interpolant of the forcing is integrated exactly
            // against k(tau) = tau^(alpha-1) E_{alpha,alpha}(mu tau^alpha) through its
            // antiderivatives K1 = tau^alpha E_{alpha,alpha+1}, K2 = tau^(alpha+1) E_{alpha,alpha+2}.
            let mut k1 = vec![ZERO; len + 1];
            let mut k2 = vec![ZERO; len + 1];
            for l in 1..=len {
                let tau = l as f64 * h;
                let ta = tau.powf(al);
                k1[l] = ta * ml(al, al + 1.0, mu * ta)?;
                k2[l] = tau * ta * ml(al, al + 2.0, mu * ta)?;
            }
            let a_w = |l: usize| k1[l + 1] - (k2[l + 1] - k2[l]) / h;
            let b_w = |l: usize| (k2[l + 1] - k2[l]) / h - k1[l];
            let kernel: Vec<Complex64> = (0..len)
                .map(|q| b_w(q) + if q > 0 { a_w(q - 1) } else { ZERO })
                .collect();
            let g: Vec<Complex64> = f_hat.iter().map(|r| r[i]).collect();
            let conv = causal_convolve(&kernel, &g);
            for m in 1..len {
                ui[m] += conv[m] - b_w(m) * g[0];
            }
        }
        modes.push(ui);
    }
    let mut data = Vec::with_capacity(len * d);
    for j in 0..len {
        let uj = DVector::from_iterator(d, modes.iter().map(|m| m[j]));
        data.extend((v * uj).iter().copied());
    }
    let u = SampledSignal::from_flat(h, d, sc.degree, data)?;
    let residual = mild_residual(&u, sc)?;
    if residual > sc.tol.residual {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance: sc.tol.residual,
        });
    }
    Ok(u)
}

/// Fractional Adams predictor-corrector (product rectangle predictor,
/// product trapezoid corrector iterated to convergence).
pub fn adams_oracle(sc: &Scenario) -> Result<SampledSignal> {
    sc.validate()?;
    let al = sc.alpha.get();
    let (h, len, d) = (sc.grid.dt(), sc.grid.len(), sc.operator.dim());
    let ha = h.powf(al);
    let factor = sc.operator.norm() * ha * rgamma(al + 1.0);
    if factor >= 1.0 {
        return Err(Error::StepSizeTooLarge { factor });
    }
    let a = sc.operator.matrix();
    let f = sc.forcing_signal()?;
    let cp = ha * rgamma(al + 1.0);
    let cc = ha * rgamma(al + 2.0);
    let b: Vec<f64> = (0..len)
        .map(|l| (l as f64 + 1.0).powf(al) - (l as f64).powf(al))
        .collect();
    let w: Vec<f64> = (0..len).map(|l| interior_weight(al, l)).collect();

    // F_j = A u_j + f_j, stored flat like u
    let rhs = |u: &[Complex64], j: usize, out: &mut [Complex64]| {
        for r in 0..d {
            out[r] = f.row(j)[r] + (0..d).map(|k| a[(r, k)] * u[k]).sum::<Complex64>();
        }
    };
    let mut u = vec![ZERO; len * d];
    let mut big_f = vec![ZERO; len * d];
    u[..d].copy_from_slice(&sc.x0);
    rhs(&sc.x0, 0, &mut big_f[..d]);
    let mut pred = vec![ZERO; d];
    let mut corr = vec![ZERO; d];
    let mut next = vec![ZERO; d];
    let mut fnext = vec![ZERO; d];
    for m in 0..len - 1 {
        let w0 = start_weight(al, m + 1);
        for k in 0..d {
            pred[k] = ZERO;
            corr[k] = big_f[k] * w0;
        }
        for j in 0..=m {
            let fj = &big_f[j * d..(j + 1) * d];
            let (bj, wj) = (b[m - j], if j > 0 { w[m + 1 - j] } else { 0.0 });
            for k in 0..d {
                pred[k] += fj[k] * bj;
                corr[k] += fj[k] * wj;
            }
        }
        for k in 0..d {
            next[k] = sc.x0[k] + pred[k] * cp;
            corr[k] = sc.x0[k] + corr[k] * cc;
        }
        let mut converged = false;
        for _ in 0..200 {
            rhs(&next, m + 1, &mut fnext);
            let mut delta = 0.0;
            for k in 0..d {
                let upd = corr[k] + fnext[k] * cc;
                delta += (upd - next[k]).norm_sqr();
                next[k] = upd;
            }
            if delta.sqrt() <= 1e-14 * (1.0 + vec_norm(&next)) {
                converged = true;
                break;
            }
        }
        if !converged || next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::StepSizeTooLarge { factor });
        }
        u[(m + 1) * d..(m + 2) * d].copy_from_slice(&next);
        rhs(&next, m + 1, &mut big_f[(m + 1) * d..(m + 2) * d]);
    }
    let data = u;
    SampledSignal::from_flat(h, d, sc.degree, data)
}
