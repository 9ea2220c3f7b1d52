//! Differential operators with exact polynomial or rational coefficients.

mod parse;
mod poly;
mod roots;
mod scalar;

pub use parse::{parse_document, Document, Entry};
pub use poly::{FloatPoly, Poly, RationalFunction};
pub use roots::{real_roots, RealRoot};
pub use scalar::{
    integer, parse_decimal, parse_rational, rational, rationalize, GaussianRational, Rational,
};

use crate::error::{Error, Result};

/// Default absolute width to which singular points are bisected.
pub const ROOT_TOL: f64 = 1e-12;

/// `sum_m p_m(x) (d/dx)^m` with polynomial coefficients.
///
/// The only operator allowed a vanishing leading coefficient is the zero
/// operator, which is stored with order 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffOperator {
    coeffs: Vec<Poly>,
    lcm_den: Poly,
}

impl DiffOperator {
    /// Trailing zero coefficients are dropped, so the order is the index
    /// of the last nonzero coefficient.
    pub fn new(mut coeffs: Vec<Poly>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(Poly::is_zero) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Poly::zero());
        }
        Self {
            coeffs,
            lcm_den: Poly::one(),
        }
    }

    pub fn zero() -> Self {
        Self::new(vec![Poly::zero()])
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Poly] {
        &self.coeffs
    }

    pub fn coeff(&self, m: usize) -> Option<&Poly> {
        self.coeffs.get(m)
    }

    pub fn leading(&self) -> &Poly {
        &self.coeffs[self.order()]
    }

    /// The `l(x)` that cleared the denominators; one for native input.
    pub fn lcm_den(&self) -> &Poly {
        &self.lcm_den
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Poly::is_zero)
    }

    /// `max_m (deg p_m - m)` over nonzero coefficients; `None` for the zero
    /// operator.
    pub fn s0(&self) -> Option<i64> {
        self.coeffs
            .iter()
            .enumerate()
            .filter_map(|(m, p)| p.degree().map(|d| d as i64 - m as i64))
            .max()
    }

    /// Largest admissible target level for a source level `k0`.
    pub fn max_target_level(&self, k0: i64) -> i64 {
        match self.s0() {
            Some(s0) => k0 - s0,
            None => k0,
        }
    }

    /// Real zeros of the leading coefficient in `[a, b]`.
    pub fn singular_points(&self, a: f64, b: f64) -> Vec<RealRoot> {
        if self.is_zero() {
            return Vec::new();
        }
        real_roots(self.leading(), a, b, ROOT_TOL)
    }

    /// Every real zero of the leading coefficient.
    pub fn all_singular_points(&self) -> Vec<RealRoot> {
        if self.is_zero() {
            return Vec::new();
        }
        let bound = num_traits::ToPrimitive::to_f64(&self.leading().root_bound()).unwrap_or(0.0);
        real_roots(self.leading(), -bound, bound, ROOT_TOL)
    }

    /// The nonzero monomial terms `p_{m,j} x^j (d/dx)^m` as `(m, j, p_{m,j})`,
    /// ordered by derivative order, then by descending power.
    pub fn monomial_terms(&self) -> Vec<(usize, usize, GaussianRational)> {
        self.coeffs
            .iter()
            .enumerate()
            .flat_map(|(m, p)| {
                p.coeffs()
                    .iter()
                    .enumerate()
                    .rev()
                    .filter(|(_, c)| !c.is_zero())
                    .map(move |(j, c)| (m, j, c.clone()))
            })
            .collect()
    }

    /// Coefficient polynomials rounded to double precision.
    pub fn to_f64(&self) -> Vec<FloatPoly> {
        self.coeffs.iter().map(Poly::to_f64).collect()
    }
}

/// `sum_m r_m(x) (d/dx)^m` with rational-function coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalDiffOperator {
    coeffs: Vec<RationalFunction>,
}

impl RationalDiffOperator {
    /// Fails when the leading coefficient is zero, unless the whole
    /// operator is the order-0 zero operator.
    pub fn new(coeffs: Vec<RationalFunction>) -> Result<Self> {
        let Some(last) = coeffs.last() else {
            return Err(Error::InvalidOperator("no coefficients".into()));
        };
        if last.is_zero() && coeffs.len() > 1 {
            return Err(Error::InvalidOperator(format!(
                "leading coefficient of the order-{} term is zero",
                coeffs.len() - 1
            )));
        }
        Ok(Self { coeffs })
    }

    pub fn from_polys(coeffs: Vec<Poly>) -> Result<Self> {
        Self::new(
            coeffs
                .into_iter()
                .map(RationalFunction::from_poly)
                .collect(),
        )
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[RationalFunction] {
        &self.coeffs
    }

    /// Monic least common multiple of all denominators.
    pub fn lcm_den(&self) -> Poly {
        self.coeffs
            .iter()
            .fold(Poly::one(), |acc, r| acc.lcm(r.den()))
    }

    /// Folds the eigenvalue into a polynomial operator:
    /// `P = l R - lambda l` with `l` the denominator LCM.
    pub fn clear_denominators(&self, lambda: &GaussianRational) -> Result<DiffOperator> {
        let last = self.coeffs.last().expect("nonempty by construction");
        if last.is_zero() && self.order() > 0 {
            return Err(Error::InvalidOperator("zero leading coefficient".into()));
        }
        let l = self.lcm_den();
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for r in &self.coeffs {
            let factor = l.exact_div(r.den()).ok_or_else(|| {
                Error::InvalidOperator("denominator does not divide the LCM".into())
            })?;
            coeffs.push(&factor * r.num());
        }
        if !lambda.is_zero() {
            coeffs[0] = &coeffs[0] - &l.scale(lambda);
        }
        let mut op = DiffOperator::new(coeffs);
        op.lcm_den = l;
        Ok(op)
    }
}
