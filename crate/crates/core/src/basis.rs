//! Clamped B-spline bases on `[0, 1]` with equally spaced interior knots.
//!
//! The trend `f_i(t/n)` is represented as `sum_k c_ik * phi_k(t/n)`. Columns are
//! centered over the sampled grid `t = 1..n` so that any coefficient vector
//! yields a trend with zero sample mean, which separates the trend from the
//! intercept.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::io::fmt_g9;

/// Number of basis functions, polynomial degree and the clamped knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    m: usize,
    degree: usize,
    knots: Vec<f64>,
}

impl BasisSpec {
    /// Clamped knot layout: `degree + 1` copies of 0 and 1 around
    /// `m - degree - 1` equally spaced interior knots.
    pub fn new(m: usize, degree: usize) -> Result<Self> {
        if m < degree + 1 {
            return Err(Error::Basis(format!(
                "m = {m} basis functions cannot support degree {degree} (need m >= {})",
                degree + 1
            )));
        }
        let interior = m - degree - 1;
        let mut knots = Vec::with_capacity(m + degree + 1);
        knots.extend(std::iter::repeat_n(0.0, degree + 1));
        for j in 1..=interior {
            knots.push(j as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Ok(Self { m, degree, knots })
    }

    /// Cubic basis with `m` functions.
    pub fn cubic(m: usize) -> Result<Self> {
        Self::new(m, 3)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.knots[self.degree + 1..self.m]
    }

    /// Index `s` of the knot span `[knots[s], knots[s+1])` containing `u`; the
    /// right endpoint is assigned to the last non-empty span.
    fn span(&self, u: f64) -> usize {
        let p = self.degree;
        if u >= self.knots[self.m] {
            return self.m - 1;
        }
        // knots[p..=m] are the distinct breakpoints (plus boundary repeats).
        let (mut lo, mut hi) = (p, self.m);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if u < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// All `m` basis values at `u`; at most `degree + 1` are nonzero and they
    /// sum to one.
    pub fn eval_row(&self, u: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Basis(format!("evaluation point {u} outside [0, 1]")));
        }
        let mut row = vec![0.0; self.m];
        let span = self.span(u);
        let local = self.nonzero_funcs(span, u);
        let first = span - self.degree;
        row[first..=span].copy_from_slice(&local);
        Ok(row)
    }

    // Triangular de Boor scheme over the degree + 1 functions supported on `span`.
    fn nonzero_funcs(&self, span: usize, u: f64) -> Vec<f64> {
        let p = self.degree;
        let t = &self.knots;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = u - t[span + 1 - j];
            right[j] = t[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    /// Raw design with row `t - 1` holding the basis at `u = t / n`, `t = 1..n`.
    pub fn build_design(&self, n: usize) -> Result<BasisMatrix> {
        if n == 0 {
            return Err(Error::Basis("design needs n >= 1 rows".into()));
        }
        let mut values = DMatrix::zeros(n, self.m);
        for t in 1..=n {
            let row = self.eval_row(t as f64 / n as f64)?;
            for (k, v) in row.into_iter().enumerate() {
                values[(t - 1, k)] = v;
            }
        }
        Ok(BasisMatrix {
            values,
            centered: false,
            column_means: vec![0.0; self.m],
        })
    }
}

/// Sampled basis values, `n` rows by `m` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    values: DMatrix<f64>,
    centered: bool,
    column_means: Vec<f64>,
}

impl BasisMatrix {
    /// Wraps an arbitrary uncentered matrix.
    pub fn from_raw(values: DMatrix<f64>) -> Self {
        let m = values.ncols();
        Self {
            values,
            centered: false,
            column_means: vec![0.0; m],
        }
    }

    /// No trend: `n` rows, zero columns. Counts as centered.
    pub fn empty(n: usize) -> Self {
        Self {
            values: DMatrix::zeros(n, 0),
            centered: true,
            column_means: Vec::new(),
        }
    }

    /// Centered cubic design with `m` columns, or [`BasisMatrix::empty`] when `m == 0`.
    pub fn centered_cubic(m: usize, n: usize) -> Result<Self> {
        if m == 0 {
            return Ok(Self::empty(n));
        }
        BasisSpec::cubic(m)?.build_design(n)?.center()
    }

    /// Centered design with `m` columns of degree `min(degree, m - 1)`, or
    /// [`BasisMatrix::empty`] when `m == 0`. Small `m` thus still gets a basis
    /// (`m = 3` is quadratic). A single column centers to zero and is rejected.
    pub fn centered(m: usize, degree: usize, n: usize) -> Result<Self> {
        match m {
            0 => Ok(Self::empty(n)),
            1 => Err(Error::Basis("a single centered basis function is identically zero".into())),
            _ => BasisSpec::new(m, degree.min(m - 1))?.build_design(n)?.center(),
        }
    }

    /// Subtracts each column's mean over the sampled rows.
    pub fn center(self) -> Result<Self> {
        if self.centered {
            return Err(Error::Basis("design is already centered".into()));
        }
        let n = self.values.nrows() as f64;
        let mut values = self.values;
        let mut means = Vec::with_capacity(values.ncols());
        for mut col in values.column_iter_mut() {
            let mean = col.iter().sum::<f64>() / n;
            col.iter_mut().for_each(|v| *v -= mean);
            means.push(mean);
        }
        Ok(Self {
            values,
            centered: true,
            column_means: means,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Value of column `k` at 1-based time index `t`.
    #[inline]
    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.values[(t - 1, k)]
    }

    /// `sum_k coefs[k] * phi_k(t/n)` for `t = 1..n`.
    pub fn curve(&self, coefs: &[f64]) -> Result<Vec<f64>> {
        if coefs.len() != self.m() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a basis with {} columns",
                coefs.len(),
                self.m()
            )));
        }
        let c = nalgebra::DVector::from_column_slice(coefs);
        Ok((&self.values * c).iter().copied().collect())
    }

    /// CSV with header `phi_1..phi_m`, one row per time index.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.m()).map(|k| format!("phi_{k}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in self.values.row_iter() {
            let cells: Vec<String> = row.iter().map(|&v| fmt_g9(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}
