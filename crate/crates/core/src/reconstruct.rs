//! Evaluation of `f = sum f_n e_n`, its derivatives, ODE residuals and
//! comparisons with reference functions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::basis::{bilateral_index, eval_psi, BasisIndex, ThetaQuadrature};
use crate::error::{Error, Result};
use crate::nullspace::CoefficientVector;
use crate::operator::{DiffOperator, FloatPoly};

/// Points closer than this to a singular point are flagged.
pub const SINGULAR_MARGIN: f64 = 1e-6;

/// Coefficients at one level, keyed by bilateral index.
#[derive(Clone, Debug)]
struct Series {
    level: i64,
    terms: Vec<(i64, Complex64)>,
}

impl Series {
    fn eval(&self, x: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|(n, c)| c * eval_psi(BasisIndex::new(self.level, *n), x))
            .sum()
    }

    /// Termwise derivative, one level up.
    fn derivative(&self) -> Series {
        let k = self.level;
        let mut out: std::collections::BTreeMap<i64, Complex64> = Default::default();
        for &(n, c) in &self.terms {
            *out.entry(n - 1).or_default() += c * n as f64;
            *out.entry(n).or_default() -= c * (n + k + 1) as f64;
        }
        Series {
            level: k + 1,
            terms: out
                .into_iter()
                .filter(|(_, c)| *c != Complex64::default())
                .collect(),
        }
    }
}

/// A truncated expansion with its derivative series precomputed.
#[derive(Clone, Debug)]
pub struct ReconstructedFunction {
    coeffs: CoefficientVector,
    /// `series[r]` holds the `r`-th derivative, already scaled by `1/sqrt(pi)`.
    series: Vec<Series>,
}

impl ReconstructedFunction {
    /// Prepares derivatives up to `max_order`.
    pub fn new(coeffs: CoefficientVector, max_order: usize) -> Self {
        let scale = 1.0 / PI.sqrt();
        let base = Series {
            level: coeffs.k0,
            terms: coeffs
                .values
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != Complex64::default())
                .map(|(n, c)| (bilateral_index(coeffs.k0, n as u64), c * scale))
                .collect(),
        };
        let mut series = vec![base];
        for r in 0..max_order {
            let next = series[r].derivative();
            series.push(next);
        }
        Self { coeffs, series }
    }

    pub fn from_values(k0: i64, values: Vec<Complex64>, max_order: usize) -> Self {
        Self::new(CoefficientVector::new(k0, values), max_order)
    }

    pub fn k0(&self) -> i64 {
        self.coeffs.k0
    }

    pub fn coeffs(&self) -> &CoefficientVector {
        &self.coeffs
    }

    pub fn max_order(&self) -> usize {
        self.series.len() - 1
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.series[0].eval(x)
    }

    /// `r`-th derivative from the differentiated series.
    pub fn eval_derivative(&self, r: usize, x: f64) -> Result<Complex64> {
        self.series.get(r).map(|s| s.eval(x)).ok_or_else(|| {
            Error::Invalid(format!(
                "derivative order {r} exceeds the prepared {}",
                self.max_order()
            ))
        })
    }

    /// `||f||` in the weighted space, which for an orthonormal basis is the
    /// Euclidean norm of the coefficients.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// The same norm by quadrature of `|f|^2 (x^2+1)^k0`.
    pub fn quadrature_norm(&self, nodes: usize) -> f64 {
        ThetaQuadrature::new(nodes)
            .integrate(self.k0(), |x| Complex64::new(self.eval(x).norm_sqr(), 0.0))
            .re
            .max(0.0)
            .sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualSample {
    pub x: f64,
    pub value: Complex64,
    /// `x` lies within the margin of a singular point.
    pub near_singular: bool,
}

/// `P f` evaluated pointwise for a fixed operator.
#[derive(Clone, Debug)]
pub struct ResidualEvaluator {
    coeffs: Vec<FloatPoly>,
    singular: Vec<f64>,
    margin: f64,
}

impl ResidualEvaluator {
    pub fn new(op: &DiffOperator, margin: f64) -> Self {
        Self {
            coeffs: op.to_f64(),
            singular: op.all_singular_points().iter().map(|r| r.x).collect(),
            margin,
        }
    }

    pub fn singular_points(&self) -> &[f64] {
        &self.singular
    }

    pub fn is_near_singular(&self, x: f64) -> bool {
        self.singular.iter().any(|s| (x - s).abs() <= self.margin)
    }

    /// # Errors
    /// If `f` was prepared with fewer derivatives than the operator order.
    pub fn at(&self, f: &ReconstructedFunction, x: f64) -> Result<ResidualSample> {
        let mut value = Complex64::default();
        for (m, p) in self.coeffs.iter().enumerate() {
            value += p.eval(x) * f.eval_derivative(m, x)?;
        }
        Ok(ResidualSample {
            x,
            value,
            near_singular: self.is_near_singular(x),
        })
    }

    /// `sum |p_m(x) f^(m)(x)|`, the size of the terms that cancel in
    /// `(P f)(x)`.
    pub fn term_scale(&self, f: &ReconstructedFunction, x: f64) -> Result<f64> {
        let mut total = 0.0;
        for (m, p) in self.coeffs.iter().enumerate() {
            total += (p.eval(x) * f.eval_derivative(m, x)?).norm();
        }
        Ok(total)
    }

    /// Largest `|P f|` over grid points away from singular points, with
    /// the number of points skipped.
    pub fn sup(&self, f: &ReconstructedFunction, grid: &[f64]) -> Result<(f64, usize)> {
        let mut sup: f64 = 0.0;
        let mut skipped = 0;
        for &x in grid {
            let s = self.at(f, x)?;
            if s.near_singular {
                skipped += 1;
            } else {
                sup = sup.max(s.value.norm());
            }
        }
        Ok((sup, skipped))
    }
}

/// One-off residual `(P f)(x)`.
pub fn residual(op: &DiffOperator, f: &ReconstructedFunction, x: f64) -> Result<ResidualSample> {
    ResidualEvaluator::new(op, SINGULAR_MARGIN).at(f, x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alignment {
    /// Least-squares scalar with `f ~ alpha g`.
    pub alpha: Complex64,
    /// `max |f/alpha - g|` on the grid.
    pub max_abs_err: f64,
    /// `||f/alpha - g|| / ||g||` on the grid.
    pub rel_l2_err: f64,
}

/// Best scalar multiple of `g` matching `f` on the grid.
pub fn align_and_compare(
    f: impl Fn(f64) -> Complex64,
    g: impl Fn(f64) -> Complex64,
    grid: &[f64],
) -> Result<Alignment> {
    if grid.is_empty() {
        return Err(Error::Alignment("empty grid".into()));
    }
    let fv: Vec<Complex64> = grid.iter().map(|&x| f(x)).collect();
    let gv: Vec<Complex64> = grid.iter().map(|&x| g(x)).collect();
    if gv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Alignment(
            "reference is not finite on the grid".into(),
        ));
    }
    let g_norm2: f64 = gv.iter().map(|z| z.norm_sqr()).sum();
    let f_norm2: f64 = fv.iter().map(|z| z.norm_sqr()).sum();
    if g_norm2 <= f64::MIN_POSITIVE {
        return Err(Error::Alignment("reference vanishes on the grid".into()));
    }
    let alpha: Complex64 = gv
        .iter()
        .zip(&fv)
        .map(|(g, f)| g.conj() * f)
        .sum::<Complex64>()
        / g_norm2;
    if alpha.norm() <= 1e-300 || f_norm2 == 0.0 {
        return Err(Error::Alignment(
            "function is orthogonal to the reference".into(),
        ));
    }
    let diffs: Vec<f64> = fv
        .iter()
        .zip(&gv)
        .map(|(f, g)| (f / alpha - g).norm())
        .collect();
    let max_abs_err = diffs.iter().copied().fold(0.0, f64::max);
    let rel_l2_err = (diffs.iter().map(|d| d * d).sum::<f64>() / g_norm2).sqrt();
    Ok(Alignment {
        alpha,
        max_abs_err,
        rel_l2_err,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpanFit {
    /// Weights `c_i` with `sum c_i f_i ~ g`.
    pub weights: Vec<Complex64>,
    pub max_abs_err: f64,
    pub rel_l2_err: f64,
}

/// Least-squares fit of `g` by combinations of `fs` on the grid.
pub fn project_onto_span(
    fs: &[&dyn Fn(f64) -> Complex64],
    g: impl Fn(f64) -> Complex64,
    grid: &[f64],
) -> Result<SpanFit> {
    if grid.is_empty() || fs.is_empty() {
        return Err(Error::Alignment("nothing to fit".into()));
    }
    let a = DMatrix::from_fn(grid.len(), fs.len(), |i, j| fs[j](grid[i]));
    let b = DVector::from_iterator(grid.len(), grid.iter().map(|&x| g(x)));
    let g_norm = b.norm();
    if g_norm <= f64::MIN_POSITIVE {
        return Err(Error::Alignment("reference vanishes on the grid".into()));
    }
    let w = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Alignment(e.to_string()))?;
    let r = &a * &w - &b;
    Ok(SpanFit {
        weights: w.iter().copied().collect(),
        max_abs_err: r.iter().map(|z| z.norm()).fold(0.0, f64::max),
        rel_l2_err: r.norm() / g_norm,
    })
}

/// `n` equally spaced points covering `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::project_coefficients;
    use crate::operator::Poly;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const I: Complex64 = Complex64::new(0.0, 1.0);

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn gaussian(x: f64) -> Complex64 {
        c((-x * x / 2.0).exp())
    }

    fn hermite(lambda: i64) -> DiffOperator {
        DiffOperator::new(vec![
            Poly::from_ints(&[-lambda, 0, 1]),
            Poly::zero(),
            Poly::from_ints(&[-1]),
        ])
    }

    #[test]
    fn zero_and_single_term() {
        let z = ReconstructedFunction::from_values(0, vec![c(0.0); 6], 2);
        assert_eq!(z.eval(0.7), c(0.0));
        assert_eq!(z.l2_norm(), 0.0);
        assert_eq!(residual(&hermite(1), &z, 0.3).unwrap().value, c(0.0));
        let one = ReconstructedFunction::from_values(0, vec![c(PI.sqrt())], 0);
        assert!((one.eval(0.0) - I).norm() < 1e-15);
        assert_eq!(one.eval_derivative(0, 1.1).unwrap(), one.eval(1.1));
        assert!(one.eval_derivative(1, 0.0).is_err());
    }

    #[test]
    fn derivative_of_a_single_term() {
        // e_1 at level 0 is psi_{0,0}/sqrt(pi); its derivative is -psi_{1,0}/sqrt(pi).
        let f = ReconstructedFunction::from_values(0, vec![c(0.0), c(1.0)], 1);
        let want = -eval_psi(BasisIndex::new(1, 0), 1.2) / PI.sqrt();
        assert!((f.eval_derivative(1, 1.2).unwrap() - want).norm() < 1e-15);
    }

    #[test]
    fn derivative_converges_at_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<Complex64> = (0..30)
            .map(|_| Complex64::new(rng.gen(), rng.gen()))
            .collect();
        let f = ReconstructedFunction::from_values(1, vals, 1);
        let x = 0.5;
        let exact = f.eval_derivative(1, x).unwrap();
        let err = |h: f64| ((f.eval(x + h) - f.eval(x - h)) / (2.0 * h) - exact).norm();
        let order = (err(1e-3) / err(5e-4)).log2();
        assert!(order >= 1.9, "observed order {order}");
    }

    #[test]
    fn parseval_for_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for k0 in [-2, 0, 3] {
            let vals: Vec<Complex64> = (0..30)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let f = ReconstructedFunction::from_values(k0, vals, 0);
            assert!((f.quadrature_norm(512) - f.l2_norm()).abs() < 1e-8);
        }
        let unit = ReconstructedFunction::from_values(0, vec![c(0.0), c(1.0)], 0);
        assert_eq!(unit.l2_norm(), 1.0);
    }

    #[test]
    fn alignment_examples() {
        let grid = uniform_grid(-2.0, 2.0, 41);
        let a = align_and_compare(|x| 3.0 * I * gaussian(x), gaussian, &grid).unwrap();
        assert!((a.alpha - 3.0 * I).norm() < 1e-14);
        assert!(a.max_abs_err < 1e-14 && a.rel_l2_err < 1e-14);
        assert!(matches!(
            align_and_compare(gaussian, |_| c(0.0), &grid),
            Err(Error::Alignment(_))
        ));
        assert!(align_and_compare(gaussian, gaussian, &[]).is_err());
    }

    #[test]
    fn span_fit_recovers_a_combination() {
        let grid = uniform_grid(-3.0, 3.0, 61);
        let f1 = |x: f64| c(x.cos());
        let f2 = |x: f64| c(x.sin());
        let fit = project_onto_span(&[&f1, &f2], |x| c(2.0 * x.cos() - x.sin()), &grid).unwrap();
        assert!(
            (fit.weights[0] - c(2.0)).norm() < 1e-12 && (fit.weights[1] + c(1.0)).norm() < 1e-12
        );
        assert!(fit.rel_l2_err < 1e-13);
    }

    #[test]
    fn projected_gaussian_satisfies_the_ode() {
        let vals = project_coefficients(0, gaussian, 160, 2048);
        let f = ReconstructedFunction::from_values(0, vals, 2);
        let ev = ResidualEvaluator::new(&hermite(1), SINGULAR_MARGIN);
        let (sup, skipped) = ev.sup(&f, &uniform_grid(-3.0, 3.0, 61)).unwrap();
        assert_eq!(skipped, 0);
        assert!(sup < 1e-5, "residual {sup}");
        let fd = (f.eval(0.5 + 1e-5) - f.eval(0.5 - 1e-5)) / 2e-5;
        assert!((fd - f.eval_derivative(1, 0.5).unwrap()).norm() < 1e-7);
    }

    #[test]
    fn random_vectors_are_not_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let vals: Vec<Complex64> = (0..80)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = ReconstructedFunction::from_values(0, vals, 2);
        let ev = ResidualEvaluator::new(&hermite(1), SINGULAR_MARGIN);
        assert!(ev.sup(&f, &uniform_grid(-3.0, 3.0, 61)).unwrap().0 > 1e-2);
    }

    #[test]
    fn singular_neighbourhoods_are_flagged() {
        let op = DiffOperator::new(vec![Poly::one(), Poly::from_ints(&[0, 1])]);
        let f = ReconstructedFunction::from_values(0, vec![c(1.0)], 1);
        let ev = ResidualEvaluator::new(&op, SINGULAR_MARGIN);
        assert!(ev.at(&f, 5e-7).unwrap().near_singular);
        assert!(!ev.at(&f, 1e-3).unwrap().near_singular);
        assert_eq!(ev.sup(&f, &[0.0, 0.5]).unwrap().1, 1);
    }
}
