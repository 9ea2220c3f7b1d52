//! Real roots of exact polynomials: square-free split, Sturm-sequence
//! isolation, then bisection on exact rational midpoints.

use std::cmp::Ordering;

use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use super::poly::Poly;
use super::scalar::Rational;

/// A real root together with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RealRoot {
    pub x: f64,
    pub multiplicity: usize,
}

/// Sturm chain `p, p', -rem(p, p'), ...` of a real square-free polynomial.
struct SturmChain(Vec<Poly>);

impl SturmChain {
    fn new(p: &Poly) -> Self {
        let mut chain = vec![p.clone(), p.derivative()];
        loop {
            let n = chain.len();
            if chain[n - 1].is_zero() {
                chain.pop();
                break;
            }
            let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
            if r.is_zero() {
                break;
            }
            chain.push(-&r);
        }
        Self(chain)
    }

    fn sign_changes(&self, x: &Rational) -> usize {
        let mut changes = 0;
        let mut last = Ordering::Equal;
        for p in &self.0 {
            let s = p.eval_real(x).cmp(&Rational::zero());
            if s == Ordering::Equal {
                continue;
            }
            if last != Ordering::Equal && s != last {
                changes += 1;
            }
            last = s;
        }
        changes
    }

    /// Number of distinct roots in `(lo, hi]`.
    fn count(&self, lo: &Rational, hi: &Rational) -> usize {
        self.sign_changes(lo).saturating_sub(self.sign_changes(hi))
    }
}

/// Real roots of `p` in `[a, b]`, ascending, each located to within `tol`.
///
/// Complex-coefficient polynomials are handled through the common real
/// factor of their real and imaginary parts, since a real `x` is a root
/// exactly when both parts vanish there.
pub fn real_roots(p: &Poly, a: f64, b: f64, tol: f64) -> Vec<RealRoot> {
    let (Some(lo), Some(hi), Some(tol)) = (
        Rational::from_float(a),
        Rational::from_float(b),
        Rational::from_float(tol.abs().max(f64::MIN_POSITIVE)),
    ) else {
        return Vec::new();
    };
    if lo > hi || p.is_constant() {
        return Vec::new();
    }
    let core = if p.is_real() {
        p.clone()
    } else {
        p.real_part().gcd(&p.imag_part())
    };
    let mut roots = Vec::new();
    for (i, factor) in core.square_free_factors().iter().enumerate() {
        if factor.is_constant() {
            continue;
        }
        for x in isolate(factor, &lo, &hi, &tol) {
            roots.push(RealRoot {
                x,
                multiplicity: i + 1,
            });
        }
    }
    roots.sort_by(|u, v| u.x.total_cmp(&v.x));
    roots
}

fn isolate(p: &Poly, lo: &Rational, hi: &Rational, tol: &Rational) -> Vec<f64> {
    let chain = SturmChain::new(p);
    let mut found = Vec::new();
    if p.eval_real(lo).is_zero() {
        found.push(to_f64(lo));
    }
    let two = Rational::from_integer(2.into());
    let mut stack = vec![(lo.clone(), hi.clone())];
    while let Some((l, h)) = stack.pop() {
        match chain.count(&l, &h) {
            0 => {}
            1 => found.push(refine(p, &chain, l, h, tol)),
            _ => {
                let mid = (&l + &h) / &two;
                stack.push((mid.clone(), h));
                stack.push((l, mid));
            }
        }
    }
    found
}

/// Shrinks `(lo, hi]`, known to hold exactly one root, below `tol`.
fn refine(p: &Poly, chain: &SturmChain, mut lo: Rational, mut hi: Rational, tol: &Rational) -> f64 {
    let two = Rational::from_integer(2.into());
    if p.eval_real(&hi).is_zero() {
        return to_f64(&hi);
    }
    while &(&hi - &lo) > tol {
        let mid = (&lo + &hi) / &two;
        if p.eval_real(&mid).is_zero() {
            return to_f64(&mid);
        }
        if chain.count(&lo, &mid) == 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    to_f64(&((lo + hi) / two))
}

fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
