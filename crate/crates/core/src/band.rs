//! Exact band matrix of an operator between two unilateral bases, its
//! double-precision export, and a plain-text dump format.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{
    bilateral_index, characteristic_eigenvalue, eval_psi, unilateral_index, BasisIndex,
};
use crate::error::{Error, Result};
use crate::expansion::apply_operator;
use crate::operator::{DiffOperator, GaussianRational};

/// Truncated matrix `b[m][n]` of an operator from `e_n` (level `k0`) to
/// `e'_m` (level `k_diamond`).
///
/// Only rows whose whole band lies inside the stored columns are kept, so
/// `n_rows = n_cols - bandwidth`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    k0: i64,
    k_diamond: i64,
    order: usize,
    bandwidth: usize,
    n_rows: usize,
    n_cols: usize,
    /// Nonzero entries per column as `(row, value)`, rows ascending.
    columns: Vec<Vec<(usize, GaussianRational)>>,
}

/// Level and bandwidth bookkeeping shared by assembly and the CLI.
pub fn bandwidth(order: usize, k0: i64, k_diamond: i64) -> usize {
    (2 * order as i64 + k0 - k_diamond).max(0) as usize
}

impl BandMatrix {
    /// Assembles columns `0..n_cols` in parallel.
    pub fn assemble(op: &DiffOperator, k0: i64, k_diamond: i64, n_cols: usize) -> Result<Self> {
        let max_allowed = op.max_target_level(k0);
        if k_diamond > max_allowed {
            return Err(Error::LevelMismatch {
                k_diamond,
                max_allowed,
            });
        }
        let order = op.order();
        let bw = bandwidth(order, k0, k_diamond);
        if n_cols < bw + 1 {
            return Err(Error::Truncation {
                n_cols,
                min: bw + 1,
                bandwidth: bw,
            });
        }
        let n_rows = n_cols - bw;
        let columns = (0..n_cols)
            .into_par_iter()
            .map(|n| {
                let combo = apply_operator(op, k0, bilateral_index(k0, n as u64), k_diamond)?;
                let mut col = Vec::with_capacity(combo.len());
                for (r_dot, c) in combo.iter() {
                    let m = unilateral_index(k_diamond, r_dot) as usize;
                    if m.abs_diff(n) > bw {
                        return Err(Error::BandViolation {
                            row: m,
                            col: n,
                            bandwidth: bw,
                        });
                    }
                    if m < n_rows {
                        col.push((m, c.clone()));
                    }
                }
                col.sort_by_key(|(m, _)| *m);
                Ok(col)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k0,
            k_diamond,
            order,
            bandwidth: bw,
            n_rows,
            n_cols,
            columns,
        })
    }

    pub fn k0(&self) -> i64 {
        self.k0
    }

    pub fn k_diamond(&self) -> i64 {
        self.k_diamond
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn column(&self, n: usize) -> &[(usize, GaussianRational)] {
        &self.columns[n]
    }

    pub fn get(&self, m: usize, n: usize) -> GaussianRational {
        self.columns
            .get(n)
            .and_then(|col| {
                col.binary_search_by_key(&m, |(r, _)| *r)
                    .ok()
                    .map(|i| col[i].1.clone())
            })
            .unwrap_or_else(GaussianRational::zero)
    }

    /// Stored nonzero entries as `(row, col, value)`, column by column.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, &GaussianRational)> {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(n, col)| col.iter().map(move |(m, c)| (*m, n, c)))
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// Exact product with a coefficient vector of length `n_cols`.
    pub fn mul_exact(&self, f: &[GaussianRational]) -> Vec<GaussianRational> {
        assert_eq!(
            f.len(),
            self.n_cols,
            "vector length must equal the column count"
        );
        let mut out = vec![GaussianRational::zero(); self.n_rows];
        for (m, n, c) in self.triplets() {
            out[m] += &(c * &f[n]);
        }
        out
    }

    /// Double-precision copy in band storage.
    pub fn export_float(&self) -> FloatBandMatrix {
        let width = 2 * self.bandwidth + 1;
        let mut re = vec![0.0; width * self.n_cols];
        let mut im = vec![0.0; width * self.n_cols];
        let mut overflow = Vec::new();
        for (m, n, c) in self.triplets() {
            let z = c.to_complex64();
            if !z.re.is_finite() || !z.im.is_finite() {
                overflow.push((m, n));
            }
            let slot = n * width + m + self.bandwidth - n;
            re[slot] = z.re;
            im[slot] = z.im;
        }
        FloatBandMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            bandwidth: self.bandwidth,
            re,
            im,
            overflow,
        }
    }

    /// Structural and growth checks of the matrix and its target basis.
    pub fn audit_conditions(&self) -> ConditionsReport {
        let c2_bandwidth_ok = self
            .triplets()
            .all(|(m, n, _)| m.abs_diff(n) <= self.bandwidth && m < self.n_rows && n < self.n_cols);

        let c21_sup_estimate = self
            .triplets()
            .filter(|(_, n, _)| *n >= 1)
            .map(|(_, n, c)| c.to_complex64().norm() / (n as f64).powi(self.order as i32))
            .fold(0.0, f64::max);

        let c22_min_ratio = (1..self.n_rows.max(2) as u64)
            .map(|n| characteristic_eigenvalue(self.k_diamond, n).abs() / n as f64)
            .fold(f64::INFINITY, f64::min);

        let kd = self.k_diamond;
        let grid: Vec<f64> = (-100..=100).map(|i| i as f64 / 10.0).collect();
        let c23_envelope_const = (0..self.n_rows as u64)
            .map(|n| {
                let idx = BasisIndex::from_unilateral(kd, n);
                grid.iter()
                    .map(|&x| {
                        let envelope = (x * x + 1.0).powf((1 - kd) as f64 / 2.0) / PI.sqrt();
                        eval_psi(idx, x).norm() / PI.sqrt() / envelope
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);

        ConditionsReport {
            c2_bandwidth_ok,
            c21_sup_estimate,
            c22_min_ratio,
            c23_envelope_const,
        }
    }

    /// Text dump: a header followed by one `m n re im` line per stored
    /// entry, with exact rational parts.
    pub fn to_dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# psi-spectral band matrix");
        let _ = writeln!(s, "k0 {}", self.k0);
        let _ = writeln!(s, "kdiamond {}", self.k_diamond);
        let _ = writeln!(s, "order {}", self.order);
        let _ = writeln!(s, "bandwidth {}", self.bandwidth);
        let _ = writeln!(s, "rows {}", self.n_rows);
        let _ = writeln!(s, "cols {}", self.n_cols);
        for (m, n, c) in self.triplets() {
            let _ = writeln!(s, "{m} {n} {} {}", c.re, c.im);
        }
        s
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut header = [0i64; 6];
        for (slot, key) in
            header
                .iter_mut()
                .zip(["k0", "kdiamond", "order", "bandwidth", "rows", "cols"])
        {
            let (line, l) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
            let value = l
                .strip_prefix(key)
                .map(str::trim)
                .ok_or_else(|| bad(line, &format!("expected '{key}'")))?;
            *slot = value
                .parse()
                .map_err(|_| bad(line, &format!("bad value for '{key}'")))?;
        }
        let [k0, k_diamond, order, bw, n_rows, n_cols] = header;
        if order < 0 || bw < 0 || n_rows < 0 || n_cols < 0 {
            return Err(bad(0, "negative size in header"));
        }
        let (order, bw, n_rows, n_cols) = (
            order as usize,
            bw as usize,
            n_rows as usize,
            n_cols as usize,
        );
        let mut columns: Vec<Vec<(usize, GaussianRational)>> = vec![Vec::new(); n_cols];
        for (line, l) in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let [m, n, re, im] = parts[..] else {
                return Err(bad(line, "expected 'm n re im'"));
            };
            let m: usize = m.parse().map_err(|_| bad(line, "bad row index"))?;
            let n: usize = n.parse().map_err(|_| bad(line, "bad column index"))?;
            if m >= n_rows || n >= n_cols {
                return Err(bad(line, "index outside the declared shape"));
            }
            if m.abs_diff(n) > bw {
                return Err(Error::BandViolation {
                    row: m,
                    col: n,
                    bandwidth: bw,
                });
            }
            let re = crate::operator::parse_rational(re).map_err(|e| bad(line, &e))?;
            let im = crate::operator::parse_rational(im).map_err(|e| bad(line, &e))?;
            columns[n].push((m, GaussianRational::new(re, im)));
        }
        for col in &mut columns {
            col.sort_by_key(|(m, _)| *m);
        }
        Ok(Self {
            k0,
            k_diamond,
            order,
            bandwidth: bw,
            n_rows,
            n_cols,
            columns,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionsReport {
    /// Every stored entry lies within the declared band.
    pub c2_bandwidth_ok: bool,
    /// `max |b[m][n]| / n^M` over stored entries with `n >= 1`.
    pub c21_sup_estimate: f64,
    /// `min |lambda_n| / n` over target rows `n >= 1`, where `lambda_n` is
    /// the characteristic eigenvalue of `e'_n`.
    pub c22_min_ratio: f64,
    /// `max |e'_n(x)| / a(x)` on a grid over `[-10, 10]`, with
    /// `a(x) = (x^2+1)^((1-k')/2) / sqrt(pi)`.
    pub c23_envelope_const: f64,
}

/// Double-precision band matrix. Column `n` stores rows
/// `n - bandwidth ..= n + bandwidth` contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatBandMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub bandwidth: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// Entries whose exact value does not fit in a double.
    pub overflow: Vec<(usize, usize)>,
}

impl FloatBandMatrix {
    fn slot(&self, m: usize, n: usize) -> Option<usize> {
        (m < self.n_rows && n < self.n_cols && m.abs_diff(n) <= self.bandwidth)
            .then(|| n * (2 * self.bandwidth + 1) + m + self.bandwidth - n)
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.slot(m, n).map_or(Complex64::new(0.0, 0.0), |s| {
            Complex64::new(self.re[s], self.im[s])
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n_rows, self.n_cols, |m, n| self.get(m, n))
    }

    pub fn mul_vec(&self, f: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(
            f.len(),
            self.n_cols,
            "vector length must equal the column count"
        );
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_rows];
        for (n, fv) in f.iter().enumerate() {
            let lo = n.saturating_sub(self.bandwidth);
            let hi = (n + self.bandwidth + 1).min(self.n_rows);
            for (m, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
                *o += self.get(m, n) * fv;
            }
        }
        out
    }

    /// `m,n,re,im` lines for every nonzero stored entry, with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,n,re,im\n");
        for n in 0..self.n_cols {
            for m in n.saturating_sub(self.bandwidth)..(n + self.bandwidth + 1).min(self.n_rows) {
                let z = self.get(m, n);
                if z.re != 0.0 || z.im != 0.0 {
                    let _ = writeln!(s, "{m},{n},{},{}", z.re, z.im);
                }
            }
        }
        s
    }
}
