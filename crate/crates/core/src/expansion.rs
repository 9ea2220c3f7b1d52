//! Exact expansion of `x^j (d/dx)^m psi_{k0,n}` in the basis at a lower
//! level, using three recursions:
//!
//! ```text
//! psi_{k,n}           = -(i/2) (psi_{k-1,n} - psi_{k-1,n+1})
//! x psi_{k,n}         =  (1/2) (psi_{k-1,n} + psi_{k-1,n+1})
//! (d/dx) psi_{k,n}    =  n psi_{k+1,n-1} - (n+k+1) psi_{k+1,n}
//! ```

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::basis::{eval_psi, BasisIndex};
use crate::error::{Error, Result};
use crate::operator::{rational, DiffOperator, GaussianRational};

/// A finite combination `sum_r c_r psi_{level, r}` with exact coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsiCombo {
    level: i64,
    terms: BTreeMap<i64, GaussianRational>,
}

impl PsiCombo {
    pub fn zero(level: i64) -> Self {
        Self {
            level,
            terms: BTreeMap::new(),
        }
    }

    pub fn single(level: i64, n_dot: i64, c: GaussianRational) -> Self {
        let mut combo = Self::zero(level);
        combo.add_term(n_dot, &c);
        combo
    }

    pub fn basis(idx: BasisIndex) -> Self {
        Self::single(idx.k, idx.n_dot, GaussianRational::one())
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, n_dot: i64) -> GaussianRational {
        self.terms
            .get(&n_dot)
            .cloned()
            .unwrap_or_else(GaussianRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &GaussianRational)> {
        self.terms.iter().map(|(&n, c)| (n, c))
    }

    /// Smallest and largest index with a nonzero coefficient.
    pub fn support(&self) -> Option<(i64, i64)> {
        Some((*self.terms.keys().next()?, *self.terms.keys().next_back()?))
    }

    pub fn add_term(&mut self, n_dot: i64, c: &GaussianRational) {
        if c.is_zero() {
            return;
        }
        let slot = self
            .terms
            .entry(n_dot)
            .or_insert_with(GaussianRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&n_dot);
        }
    }

    /// `self += c * other`; both must sit at the same level.
    pub fn add_scaled(&mut self, other: &PsiCombo, c: &GaussianRational) {
        assert_eq!(self.level, other.level, "combos at different levels");
        if c.is_zero() {
            return;
        }
        for (n, v) in &other.terms {
            self.add_term(*n, &(v * c));
        }
    }

    pub fn scale(&self, c: &GaussianRational) -> PsiCombo {
        let mut out = PsiCombo::zero(self.level);
        out.add_scaled(self, c);
        out
    }

    /// `c0 psi_{k-1,n} + c1 psi_{k-1,n+1}` for every term.
    fn lower_with(&self, c0: &GaussianRational, c1: &GaussianRational) -> PsiCombo {
        let mut out = PsiCombo::zero(self.level - 1);
        for (n, v) in &self.terms {
            out.add_term(*n, &(v * c0));
            out.add_term(n + 1, &(v * c1));
        }
        out
    }

    /// Same function, one level lower.
    pub fn lower_identity(&self) -> PsiCombo {
        let half_i = GaussianRational::new(rational(0, 1), rational(1, 2));
        self.lower_with(&-&half_i, &half_i)
    }

    /// `x` times the function, one level lower.
    pub fn lower_mult_x(&self) -> PsiCombo {
        let half = GaussianRational::real(rational(1, 2));
        self.lower_with(&half, &half)
    }

    /// The derivative, one level higher.
    pub fn raise_diff(&self) -> PsiCombo {
        let k = self.level;
        let mut out = PsiCombo::zero(k + 1);
        for (n, v) in &self.terms {
            out.add_term(n - 1, &v.scale(&rational(*n, 1)));
            out.add_term(*n, &v.scale(&rational(-(n + k + 1), 1)));
        }
        out
    }

    /// Lowers with the identity recursion until `level` is reached.
    ///
    /// # Panics
    /// If `level` is above the current level.
    pub fn lower_to(&self, level: i64) -> PsiCombo {
        assert!(
            level <= self.level,
            "cannot lower from {} to {level}",
            self.level
        );
        let mut out = self.clone();
        while out.level > level {
            out = out.lower_identity();
        }
        out
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|(n, c)| c.to_complex64() * eval_psi(BasisIndex::new(self.level, *n), x))
            .sum()
    }

    /// Largest coefficient modulus, in double precision.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.to_complex64().norm())
            .fold(0.0, f64::max)
    }
}

/// `x^j (d/dx)^m psi_{k0, n_dot}` as a combination at level `k_diamond`.
///
/// Requires `k_diamond <= k0 + m - j`.
pub fn expand_monomial_action(
    j: usize,
    m: usize,
    k0: i64,
    n_dot: i64,
    k_diamond: i64,
) -> Result<PsiCombo> {
    let max_allowed = k0 + m as i64 - j as i64;
    if k_diamond > max_allowed {
        return Err(Error::LevelMismatch {
            k_diamond,
            max_allowed,
        });
    }
    let mut combo = PsiCombo::basis(BasisIndex::new(k0, n_dot));
    for _ in 0..m {
        combo = combo.raise_diff();
    }
    for _ in 0..j {
        combo = combo.lower_mult_x();
    }
    Ok(combo.lower_to(k_diamond))
}

/// `P psi_{k0, n_dot}` as a combination at level `k_diamond`.
///
/// Requires `k_diamond <= k0 - s0(P)`. Derivatives are shared across the
/// powers of `x` that multiply them.
pub fn apply_operator(op: &DiffOperator, k0: i64, n_dot: i64, k_diamond: i64) -> Result<PsiCombo> {
    let max_allowed = op.max_target_level(k0);
    if k_diamond > max_allowed {
        return Err(Error::LevelMismatch {
            k_diamond,
            max_allowed,
        });
    }
    let mut out = PsiCombo::zero(k_diamond);
    let mut derivative = PsiCombo::basis(BasisIndex::new(k0, n_dot));
    for (m, p) in op.coeffs().iter().enumerate() {
        if m > 0 {
            derivative = derivative.raise_diff();
        }
        let mut times_x = derivative.clone();
        for (j, c) in p.coeffs().iter().enumerate() {
            if j > 0 {
                times_x = times_x.lower_mult_x();
            }
            if !c.is_zero() {
                out.add_scaled(&times_x.lower_to(k_diamond), c);
            }
        }
    }
    Ok(out)
}
