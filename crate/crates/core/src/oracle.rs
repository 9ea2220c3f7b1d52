//! Independent check of reconstructed solutions: the ODE `P f = 0` as a
//! first-order system, integrated by classical fixed-step RK4.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{DiffOperator, FloatPoly};
use crate::reconstruct::ReconstructedFunction;

pub const DEFAULT_STEPS: usize = 4096;

/// Companion form `v' = A(x) v` with `v = (f, f', ..., f^(M-1))`.
#[derive(Clone, Debug)]
pub struct StandardForm {
    coeffs: Vec<FloatPoly>,
    singular: Vec<f64>,
}

impl StandardForm {
    pub fn new(op: &DiffOperator) -> Result<Self> {
        if op.order() == 0 || op.is_zero() {
            return Err(Error::Invalid(
                "the standard form needs an operator of order at least 1".into(),
            ));
        }
        Ok(Self {
            coeffs: op.to_f64(),
            singular: op.all_singular_points().iter().map(|r| r.x).collect(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn singular_points(&self) -> &[f64] {
        &self.singular
    }

    fn leading(&self, x: f64) -> Result<Complex64> {
        let p = &self.coeffs[self.dimension()];
        let value = p.eval(x);
        if value.norm() < 1e-12 * p.magnitude(x) || value.norm() == 0.0 {
            return Err(Error::Domain(format!("x = {x} is at a singular point")));
        }
        Ok(value)
    }

    /// `A(x)`: ones on the superdiagonal, `-p_l/p_M` on the bottom row.
    pub fn matrix(&self, x: f64) -> Result<DMatrix<Complex64>> {
        let m = self.dimension();
        let lead = self.leading(x)?;
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m - 1 {
            a[(i, i + 1)] = Complex64::new(1.0, 0.0);
        }
        for l in 0..m {
            a[(m - 1, l)] = -self.coeffs[l].eval(x) / lead;
        }
        Ok(a)
    }

    fn rhs(&self, x: f64, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let m = self.dimension();
        let lead = self.leading(x)?;
        let mut out: Vec<Complex64> = v[1..].to_vec();
        let last: Complex64 = (0..m).map(|l| self.coeffs[l].eval(x) * v[l]).sum();
        out.push(-last / lead);
        Ok(out)
    }

    /// Maximal subintervals of `[a, b]` free of singular points.
    pub fn validity_intervals(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = self
            .singular
            .iter()
            .copied()
            .filter(|s| *s > a && *s < b)
            .collect();
        cuts.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        let mut lo = a;
        for c in cuts {
            if c > lo {
                out.push((lo, c));
            }
            lo = c;
        }
        if b > lo {
            out.push((lo, b));
        }
        out
    }

    /// RK4 from `x0` to `x1` in `steps` equal steps.
    pub fn integrate(
        &self,
        x0: f64,
        v0: &[Complex64],
        x1: f64,
        steps: usize,
    ) -> Result<Trajectory> {
        let m = self.dimension();
        if v0.len() != m {
            return Err(Error::Invalid(format!(
                "initial state has {} entries, expected {m}",
                v0.len()
            )));
        }
        if steps == 0 {
            return Err(Error::Invalid("at least one step is needed".into()));
        }
        let (lo, hi) = (x0.min(x1), x0.max(x1));
        if let Some(s) = self.singular.iter().find(|s| **s >= lo && **s <= hi) {
            return Err(Error::Domain(format!(
                "[{lo}, {hi}] contains the singular point {s}"
            )));
        }
        let h = (x1 - x0) / steps as f64;
        let axpy = |v: &[Complex64], k: &[Complex64], s: f64| -> Vec<Complex64> {
            v.iter().zip(k).map(|(a, b)| a + b * s).collect()
        };
        let mut xs = Vec::with_capacity(steps + 1);
        let mut states = Vec::with_capacity(steps + 1);
        let mut v = v0.to_vec();
        xs.push(x0);
        states.push(v.clone());
        for i in 0..steps {
            let x = x0 + i as f64 * h;
            let k1 = self.rhs(x, &v)?;
            let k2 = self.rhs(x + h / 2.0, &axpy(&v, &k1, h / 2.0))?;
            let k3 = self.rhs(x + h / 2.0, &axpy(&v, &k2, h / 2.0))?;
            let k4 = self.rhs(x + h, &axpy(&v, &k3, h))?;
            for j in 0..m {
                v[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0);
            }
            xs.push(if i + 1 == steps {
                x1
            } else {
                x0 + (i + 1) as f64 * h
            });
            states.push(v.clone());
        }
        Ok(Trajectory { xs, states })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub xs: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[Complex64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    /// `x, re v0, im v0, re v1, im v1, ...` lines with a header.
    pub fn to_csv(&self) -> String {
        let m = self.states.first().map_or(0, Vec::len);
        let mut s = String::from("x");
        for j in 0..m {
            s.push_str(&format!(",re_v{j},im_v{j}"));
        }
        s.push('\n');
        for (x, v) in self.xs.iter().zip(&self.states) {
            s.push_str(&x.to_string());
            for z in v {
                s.push_str(&format!(",{},{}", z.re, z.im));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    pub a: f64,
    pub b: f64,
    pub steps: usize,
    /// `max |f_oracle - f|` over the step points.
    pub max_abs_dev: f64,
    /// `max_abs_dev / max |f|`, zero for the zero function.
    pub max_rel_dev: f64,
}

/// Integrates from the reconstruction's own value and derivatives at `a`
/// and compares the two functions on `[a, b]`.
pub fn crosscheck(
    f: &ReconstructedFunction,
    op: &DiffOperator,
    a: f64,
    b: f64,
    steps: usize,
) -> Result<CrossCheck> {
    crosscheck_trajectory(f, op, a, b, steps).map(|(c, _)| c)
}

/// [`crosscheck`] that also hands back the oracle trajectory.
pub fn crosscheck_trajectory(
    f: &ReconstructedFunction,
    op: &DiffOperator,
    a: f64,
    b: f64,
    steps: usize,
) -> Result<(CrossCheck, Trajectory)> {
    let sf = StandardForm::new(op)?;
    let m = sf.dimension();
    let v0 = (0..m)
        .map(|r| f.eval_derivative(r, a))
        .collect::<Result<Vec<_>>>()?;
    let traj = sf.integrate(a, &v0, b, steps)?;
    let mut max_abs_dev: f64 = 0.0;
    let mut max_f: f64 = 0.0;
    for (x, v) in traj.xs.iter().zip(&traj.states) {
        let fx = f.eval(*x);
        max_abs_dev = max_abs_dev.max((v[0] - fx).norm());
        max_f = max_f.max(fx.norm());
    }
    let check = CrossCheck {
        a,
        b,
        steps,
        max_abs_dev,
        max_rel_dev: if max_f > 0.0 {
            max_abs_dev / max_f
        } else {
            0.0
        },
    };
    Ok((check, traj))
}
