//! Vector-valued signals sampled on the uniform half-line grid `t_j = j dt`.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance used when checking that a time column is uniform.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    dt: f64,
    dim: usize,
    degree: u32,
    // row-major, `len * dim` entries
    data: Vec<Complex64>,
    // non-integer powers t^g, 0 < g < 1, the signal is known to carry at t = 0
    start_exponents: Vec<f64>,
}

impl SampledSignal {
    pub fn new(dt: f64, degree: u32, rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Grid("all samples must share one dimension".into()));
        }
        Self::from_flat(dt, dim, degree, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(dt: f64, dim: usize, degree: u32, data: Vec<Complex64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Grid(format!("grid step must be positive, got {dt}")));
        }
        if dim == 0 || data.is_empty() {
            return Err(Error::Grid("signal has no samples".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::Grid(format!(
                "{} values do not split into samples of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self {
            dt,
            dim,
            degree,
            data,
            start_exponents: Vec::new(),
        })
    }

    /// Samples `f` at `t_j = j dt` for `j = 0..len`.
    pub fn from_fn<F>(dt: f64, len: usize, dim: usize, degree: u32, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<Complex64>,
    {
        let mut data = Vec::with_capacity(len * dim);
        for j in 0..len {
            let v = f(j as f64 * dt);
            if v.len() != dim {
                return Err(Error::Grid(format!(
                    "sample at t = {} has dimension {}, expected {dim}",
                    j as f64 * dt,
                    v.len()
                )));
            }
            data.extend(v);
        }
        Self::from_flat(dt, dim, degree, data)
    }

    /// Scalar convenience wrapper around [`SampledSignal::from_fn`].
    pub fn from_scalar_fn<F>(dt: f64, len: usize, degree: u32, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Complex64,
    {
        Self::from_fn(dt, len, 1, degree, |t| vec![f(t)])
    }

    pub fn zeros(dt: f64, len: usize, dim: usize, degree: u32) -> Result<Self> {
        Self::from_flat(dt, dim, degree, vec![Complex64::new(0.0, 0.0); len * dim])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of samples `m + 1`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn with_degree(mut self, degree: u32) -> Self {
        self.degree = degree;
        self
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.t(self.len() - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |j| self.t(j))
    }

    pub fn row(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, Complex64> {
        self.data.chunks(self.dim)
    }

    pub fn as_flat(&self) -> &[Complex64] {
        &self.data
    }

    /// Euclidean norm of the sample at index `j`.
    pub fn norm_at(&self, j: usize) -> f64 {
        vec_norm(self.row(j))
    }

    /// The `k`-th component as a scalar time series.
    pub fn component(&self, k: usize) -> Vec<Complex64> {
        self.rows().map(|r| r[k]).collect()
    }

    /// Assembles a signal from per-component time series of equal length.
    pub fn from_components(dt: f64, degree: u32, comps: &[Vec<Complex64>]) -> Result<Self> {
        let dim = comps.len();
        let len = comps.first().map(Vec::len).unwrap_or(0);
        if comps.iter().any(|c| c.len() != len) {
            return Err(Error::Grid("components have different lengths".into()));
        }
        let mut data = Vec::with_capacity(len * dim);
        for j in 0..len {
            data.extend(comps.iter().map(|c| c[j]));
        }
        Self::from_flat(dt, dim, degree, data)
    }

    fn with_data(&self, data: Vec<Complex64>) -> Self {
        Self {
            dt: self.dt,
            dim: self.dim,
            degree: self.degree,
            data,
            start_exponents: self.start_exponents.clone(),
        }
    }

    /// Fractional powers `t^g` (`0 < g < 1`) present in the signal at `t = 0`.
    /// Fractional integrals use them for starting-weight corrections; signals
    /// built from samples carry none.
    pub fn start_exponents(&self) -> &[f64] {
        &self.start_exponents
    }

    /// Declares the fractional powers of the signal at `t = 0`; integers and
    /// values outside `(0, 1)` are dropped.
    pub fn with_start_exponents(mut self, mut exps: Vec<f64>) -> Self {
        exps.retain(|g| *g > 0.0 && *g < 1.0);
        exps.sort_by(f64::total_cmp);
        exps.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        self.start_exponents = exps;
        self
    }

    /// Keeps the first `len` samples.
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len()).max(1);
        self.with_data(self.data[..len * self.dim].to_vec())
    }

    pub fn map<F: Fn(f64, &[Complex64]) -> Vec<Complex64>>(&self, f: F) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for (j, r) in self.rows().enumerate() {
            data.extend(f(self.t(j), r));
        }
        let dim = data.len() / self.len();
        Self::from_flat(self.dt, dim, self.degree, data)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.with_data(self.data.iter().map(|v| v * c).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        let mut exps = self.start_exponents.clone();
        exps.extend_from_slice(&other.start_exponents);
        Ok(self.with_data(data).with_start_exponents(exps))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if (self.dt - other.dt).abs() > GRID_TOL * self.dt || self.len() != other.len() || self.dim != other.dim {
            return Err(Error::GridMismatch(format!(
                "(dt {}, {} samples, dim {}) vs (dt {}, {} samples, dim {})",
                self.dt,
                self.len(),
                self.dim,
                other.dt,
                other.len(),
                other.dim
            )));
        }
        Ok(())
    }

    /// Writes `t,re_0,im_0,...` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        for k in 0..self.dim {
            header.push(format!("re_{k}"));
            header.push(format!("im_{k}"));
        }
        w.write_record(&header).map_err(csv_err)?;
        for (j, r) in self.rows().enumerate() {
            let mut rec = vec![format!("{:.16e}", self.t(j))];
            for v in r {
                rec.push(format!("{:.16e}", v.re));
                rec.push(format!("{:.16e}", v.im));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }

    /// Reads the CSV layout produced by [`SampledSignal::write_csv`] and
    /// checks that the time column is the uniform grid starting at 0.
    pub fn read_csv<R: Read>(input: R, degree: u32) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let ncol = rdr.headers().map_err(csv_err)?.len();
        if ncol < 3 || ncol % 2 == 0 {
            return Err(Error::Grid(format!(
                "expected columns t,re_0,im_0,..., found {ncol} columns"
            )));
        }
        let dim = (ncol - 1) / 2;
        let mut times = Vec::new();
        let mut data = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let nums = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Grid(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            times.push(nums[0]);
            data.extend(nums[1..].chunks(2).map(|p| Complex64::new(p[0], p[1])));
        }
        if times.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                have: times.len(),
            });
        }
        let dt = times[1] - times[0];
        for (j, &t) in times.iter().enumerate() {
            let want = j as f64 * dt;
            if (t - want).abs() > GRID_TOL * want.abs().max(1.0) * 10.0 {
                return Err(Error::Grid(format!(
                    "time column is not the uniform grid j*dt from 0 (row {j}: t = {t}, expected {want})"
                )));
            }
        }
        Self::from_flat(dt, dim, degree, data)
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv_path(path: &Path, degree: u32) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(f), degree)
    }
}

pub(crate) fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
