//! The rational basis `psi_{k,n}(x) = (x+i)^-(k+1) ((x-i)/(x+i))^n` and
//! the weighted inner products it is orthogonal under.
//!
//! Two index conventions coexist. The *bilateral* index `n_dot` ranges
//! over all integers and labels `psi` directly. The *unilateral* index
//! `n >= 0` orders the same functions by the size of their characteristic
//! eigenvalue `n_dot + (k+1)/2`, alternating sign.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bilateral index matched to the unilateral index `n` at level `k`.
pub fn bilateral_index(k: i64, n: u64) -> i64 {
    let base = (-(k + 1)).div_euclid(2);
    let half = n.div_ceil(2) as i64;
    if (n as i64 + k + 1).rem_euclid(2) == 0 {
        base + half
    } else {
        base - half
    }
}

/// Inverse of [`bilateral_index`].
pub fn unilateral_index(k: i64, n_dot: i64) -> u64 {
    let d = n_dot - (-(k + 1)).div_euclid(2);
    if d == 0 {
        return 0;
    }
    let q = d.unsigned_abs();
    // n and n + k + 1 share parity with the sign of d flipped in.
    let want_even = if d > 0 {
        (k + 1).rem_euclid(2) == 0
    } else {
        k.rem_euclid(2) == 0
    };
    if want_even {
        2 * q
    } else {
        2 * q - 1
    }
}

/// Eigenvalue of the first-order characteristic operator on
/// `psi_{k, n_dot_{k,n}}`: `n_dot + (k+1)/2`.
pub fn characteristic_eigenvalue(k: i64, n: u64) -> f64 {
    bilateral_index(k, n) as f64 + (k + 1) as f64 / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisIndex {
    pub k: i64,
    pub n_dot: i64,
}

impl BasisIndex {
    pub fn new(k: i64, n_dot: i64) -> Self {
        Self { k, n_dot }
    }

    pub fn from_unilateral(k: i64, n: u64) -> Self {
        Self::new(k, bilateral_index(k, n))
    }

    pub fn unilateral(&self) -> u64 {
        unilateral_index(self.k, self.n_dot)
    }

    /// Index whose function is the complex conjugate of this one.
    pub fn conjugate(&self) -> Self {
        Self::new(self.k, -self.n_dot - self.k - 1)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        eval_psi(*self, x)
    }

    pub fn eval_theta(&self, theta: f64) -> Result<Complex64> {
        eval_psi_theta(*self, theta)
    }
}

/// `psi_{k,n_dot}(x)` in polar form: `|x+i|^-(k+1) e^{-i(k+1+2 n_dot) arg(x+i)}`.
pub fn eval_psi(idx: BasisIndex, x: f64) -> Complex64 {
    let arg = 1f64.atan2(x);
    let modulus = (x * x + 1.0).powf(-(idx.k as f64 + 1.0) / 2.0);
    let phase = -((idx.k + 1 + 2 * idx.n_dot) as f64) * arg;
    Complex64::from_polar(modulus, phase)
}

/// The basis function in the angle variable `theta = 2 arctan x`, after
/// the weighting of [`to_theta`]: `(-1)^n_dot e^{i n_dot theta} / sqrt 2`.
pub fn eval_psi_theta(idx: BasisIndex, theta: f64) -> Result<Complex64> {
    check_theta(theta)?;
    let sign = if idx.n_dot.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    Ok(Complex64::from_polar(
        sign * FRAC_1_SQRT_2,
        idx.n_dot as f64 * theta,
    ))
}

/// Weighted angle-variable value of a function whose value at
/// `x = tan(theta/2)` is `fx`, for weight level `k`.
///
/// The phase factor is `e^{-i(k+1)(theta - pi)/2}`, which turns every
/// `psi_{k,n}` into a pure Fourier mode.
pub fn to_theta(k: i64, theta: f64, fx: Complex64) -> Result<Complex64> {
    check_theta(theta)?;
    let kp1 = (k + 1) as f64;
    let sec = 1.0 / (theta / 2.0).cos().abs();
    let phase = -kp1 * (theta - PI) / 2.0;
    Ok(Complex64::from_polar(FRAC_1_SQRT_2 * sec.powf(kp1), phase) * fx)
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.abs() < PI {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "theta = {theta} is outside (-pi, pi)"
        )))
    }
}

/// Gauss-Legendre rule in `theta` over `(-pi, pi)`, stored with the
/// matching points `x = tan(theta/2)` and the Jacobian `(x^2+1)/2` folded
/// into the weights.
#[derive(Debug)]
pub struct ThetaQuadrature {
    points: Vec<f64>,
    weights: Vec<f64>,
}

fn rule_cache() -> &'static Mutex<HashMap<usize, Arc<ThetaQuadrature>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ThetaQuadrature>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl ThetaQuadrature {
    /// Rule with `nodes` points, shared across callers.
    ///
    /// # Panics
    /// If `nodes < 2`.
    pub fn new(nodes: usize) -> Arc<Self> {
        assert!(nodes >= 2, "quadrature needs at least two nodes");
        let mut cache = rule_cache().lock().unwrap_or_else(|e| e.into_inner());
        cache
            .entry(nodes)
            .or_insert_with(|| Arc::new(Self::build(nodes)))
            .clone()
    }

    fn build(nodes: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(nodes).expect("nodes >= 2"));
        let (points, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(t, w)| {
                let theta = PI * t;
                let x = (theta / 2.0).tan();
                (x, PI * w * (x * x + 1.0) / 2.0)
            })
            .unzip();
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sample points on the real line.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Weights for `int g(x) dx`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int g(x) (x^2+1)^k dx`.
    pub fn integrate(&self, k: i64, g: impl Fn(f64) -> Complex64) -> Complex64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| g(x) * (w * (x * x + 1.0).powi(k as i32)))
            .sum()
    }

    /// `int f(x) conj(psi_idx(x)) (x^2+1)^k dx` for each index, from one
    /// set of samples of `f`.
    pub fn project(&self, k: i64, samples: &[Complex64], indices: &[BasisIndex]) -> Vec<Complex64> {
        let weighted: Vec<Complex64> = samples
            .iter()
            .zip(self.points.iter().zip(&self.weights))
            .map(|(f, (&x, &w))| f * (w * (x * x + 1.0).powi(k as i32)))
            .collect();
        indices
            .iter()
            .map(|idx| {
                self.points
                    .iter()
                    .zip(&weighted)
                    .map(|(&x, fw)| fw * eval_psi(*idx, x).conj())
                    .sum()
            })
            .collect()
    }
}

/// `<f, g>_(k) = int f conj(g) (x^2+1)^k dx` by `nodes`-point quadrature in
/// the angle variable.
///
/// # Panics
/// If `nodes < 2`.
pub fn weighted_inner_product(
    k: i64,
    f: impl Fn(f64) -> Complex64,
    g: impl Fn(f64) -> Complex64,
    nodes: usize,
) -> Complex64 {
    ThetaQuadrature::new(nodes).integrate(k, |x| f(x) * g(x).conj())
}

/// Coefficients `f_n = <f, e_n>_(k0)` for `n < len` against the orthonormal
/// basis `e_n = psi_{k0, n_dot_{k0,n}} / sqrt(pi)`.
pub fn project_coefficients(
    k0: i64,
    f: impl Fn(f64) -> Complex64,
    len: usize,
    nodes: usize,
) -> Vec<Complex64> {
    let rule = ThetaQuadrature::new(nodes);
    let samples: Vec<Complex64> = rule.points().iter().map(|&x| f(x)).collect();
    let indices: Vec<BasisIndex> = (0..len as u64)
        .map(|n| BasisIndex::from_unilateral(k0, n))
        .collect();
    let scale = 1.0 / PI.sqrt();
    rule.project(k0, &samples, &indices)
        .into_iter()
        .map(|c| c * scale)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const I: Complex64 = Complex64::new(0.0, 1.0);

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    /// Direct evaluation from the defining quotient.
    fn psi_direct(k: i64, n_dot: i64, x: f64) -> Complex64 {
        let z = Complex64::new(x, 1.0);
        let ratio = Complex64::new(x, -1.0) / z;
        z.powi(-(k as i32 + 1)) * ratio.powi(n_dot as i32)
    }

    #[test]
    fn index_tables() {
        let k0: Vec<i64> = (0..4).map(|n| bilateral_index(0, n)).collect();
        assert_eq!(k0, vec![-1, 0, -2, 1]);
        let km2: Vec<i64> = (0..3).map(|n| bilateral_index(-2, n)).collect();
        assert_eq!(km2, vec![0, 1, -1]);
        assert_eq!(unilateral_index(0, -1), 0);
        assert_eq!(unilateral_index(0, 1), 3);
        assert_eq!((bilateral_index(0, 0) as f64 + 0.5).abs(), 0.5);
    }

    #[test]
    fn index_bijection_exhaustive() {
        for k in -6..=6 {
            let mut seen = std::collections::HashSet::new();
            for n in 0..=10_000u64 {
                let nd = bilateral_index(k, n);
                assert_eq!(unilateral_index(k, nd), n, "k={k} n={n}");
                assert!(seen.insert(nd));
                // |n_dot + (k+1)/2| in half units.
                let twice = (2 * nd + k + 1).unsigned_abs();
                let want = if k.rem_euclid(2) == 0 {
                    2 * (n / 2) + 1
                } else {
                    2 * n.div_ceil(2)
                };
                assert_eq!(twice, want, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn eigenvalue_ratio_floor_is_exactly_one_half() {
        for k in -6..=6 {
            let min = (1..400u64)
                .map(|n| characteristic_eigenvalue(k, n).abs() / n as f64)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(min, 0.5, "k={k}");
        }
    }

    #[test]
    fn psi_examples() {
        assert!(close(eval_psi(BasisIndex::new(0, 0), 0.0), -I, 1e-15));
        assert!((eval_psi(BasisIndex::new(1, 5), 2.0).norm() - 0.2).abs() < 1e-15);
        let x = 0.7;
        assert!(close(
            eval_psi(BasisIndex::new(0, 2), x).conj(),
            eval_psi(BasisIndex::new(0, -3), x),
            1e-15
        ));
    }

    #[test]
    fn polar_form_matches_the_quotient() {
        for k in -3..=3 {
            for nd in -6..=6 {
                for x in [-5.0, -1.2, 0.0, 0.3, 2.0, 7.5] {
                    let a = eval_psi(BasisIndex::new(k, nd), x);
                    let b = psi_direct(k, nd, x);
                    assert!(close(a, b, 1e-13 * b.norm().max(1.0)), "k={k} n={nd} x={x}");
                }
            }
        }
    }

    #[test]
    fn envelope_grid() {
        for k in -4..=4 {
            for nd in -10..=10 {
                for x in -7..=7 {
                    let x = x as f64;
                    let want = (x * x + 1.0).powf(-(k as f64 + 1.0) / 2.0);
                    let got = eval_psi(BasisIndex::new(k, nd), x).norm();
                    assert!((got - want).abs() < 1e-13 * want.max(1.0));
                }
            }
        }
    }

    #[test]
    fn theta_examples() {
        let h = eval_psi_theta(BasisIndex::new(0, 0), 0.0).unwrap();
        assert!(close(h, Complex64::new(FRAC_1_SQRT_2, 0.0), 1e-15));
        let h = eval_psi_theta(BasisIndex::new(0, 1), PI / 2.0).unwrap();
        assert!(close(h, -I * FRAC_1_SQRT_2, 1e-15));
        assert!(eval_psi_theta(BasisIndex::new(0, 0), PI).is_err());
        assert!(eval_psi_theta(BasisIndex::new(0, 0), -4.0).is_err());
    }

    #[test]
    fn theta_form_agrees_with_x_form() {
        let idx = BasisIndex::new(2, -3);
        let theta = 0.4;
        let via_x = to_theta(2, theta, idx.eval((theta / 2.0).tan())).unwrap();
        assert!(close(via_x, idx.eval_theta(theta).unwrap(), 1e-13));
        for k in -3..=4 {
            for nd in -5..=5 {
                let idx = BasisIndex::new(k, nd);
                for theta in [-3.0, -1.1, 0.0, 0.9, 2.5] {
                    let via_x = to_theta(k, theta, idx.eval((theta / 2.0).tan())).unwrap();
                    assert!(
                        close(via_x, idx.eval_theta(theta).unwrap(), 1e-12),
                        "k={k} n={nd}"
                    );
                }
            }
        }
    }

    #[test]
    fn inner_product_examples() {
        let p = |k, n| move |x| eval_psi(BasisIndex::new(k, n), x);
        let ip = weighted_inner_product(0, p(0, 0), p(0, 0), 512);
        assert!(close(ip, Complex64::new(PI, 0.0), 1e-10));
        let ip = weighted_inner_product(0, p(0, 1), p(0, 2), 512);
        assert!(ip.norm() < 1e-10);
        let g = |x: f64| Complex64::new((-x * x / 2.0).exp(), 0.0);
        let ip = weighted_inner_product(0, g, g, 512);
        assert!((ip.re - PI.sqrt()).abs() < 1e-8 && ip.im.abs() < 1e-12);
    }

    #[test]
    fn gram_matrix_small() {
        for k in [-2, 0, 3] {
            let rule = ThetaQuadrature::new(256);
            for m in -8..=8 {
                for n in -8..=8 {
                    let a = BasisIndex::new(k, m);
                    let b = BasisIndex::new(k, n);
                    let ip = rule.integrate(k, |x| a.eval(x) * b.eval(x).conj()) / PI;
                    let want = if m == n { 1.0 } else { 0.0 };
                    assert!(close(ip, Complex64::new(want, 0.0), 1e-10));
                }
            }
        }
    }

    #[test]
    fn projection_recovers_a_basis_vector() {
        let target = BasisIndex::from_unilateral(1, 5);
        let c = project_coefficients(1, |x| target.eval(x) / PI.sqrt(), 12, 128);
        for (n, v) in c.iter().enumerate() {
            let want = if n == 5 { 1.0 } else { 0.0 };
            assert!(close(*v, Complex64::new(want, 0.0), 1e-12), "n={n} {v}");
        }
    }

    #[test]
    fn rules_are_cached() {
        assert!(Arc::ptr_eq(
            &ThetaQuadrature::new(64),
            &ThetaQuadrature::new(64)
        ));
        assert_eq!(ThetaQuadrature::new(64).len(), 64);
    }

    proptest! {
        #[test]
        fn unilateral_round_trip(k in -50i64..50, n in 0u64..1_000_000) {
            prop_assert_eq!(unilateral_index(k, bilateral_index(k, n)), n);
        }

        #[test]
        fn bilateral_round_trip(k in -50i64..50, nd in -500_000i64..500_000) {
            prop_assert_eq!(bilateral_index(k, unilateral_index(k, nd)), nd);
        }

        #[test]
        fn conjugation(k in -4i64..=4, nd in -12i64..=12, x in -8.0f64..8.0) {
            let idx = BasisIndex::new(k, nd);
            let a = idx.eval(x).conj();
            let b = idx.conjugate().eval(x);
            prop_assert!(close(a, b, 1e-13 * a.norm().max(1.0)));
        }

        #[test]
        fn characteristic_equation(k in -3i64..=3, nd in -8i64..=8, x in -4.0f64..4.0) {
            let idx = BasisIndex::new(k, nd);
            let h = 1e-5;
            let d = (idx.eval(x + h) - idx.eval(x - h)) / (2.0 * h);
            let lhs = -I / 2.0 * ((x * x + 1.0) * d + (k + 1) as f64 * x * idx.eval(x));
            let rhs = (nd as f64 + (k + 1) as f64 / 2.0) * idx.eval(x);
            prop_assert!((lhs - rhs).norm() < 1e-7, "{} vs {}", lhs, rhs);
        }
    }
}
