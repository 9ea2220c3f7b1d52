//! Operators shared by the benchmarks.

use psi_spectral::operator::{DiffOperator, GaussianRational, Poly, RationalDiffOperator};

/// `-f'' + x^2 f - lambda f`.
pub fn hermite(lambda: i64) -> DiffOperator {
    DiffOperator::new(vec![
        Poly::from_ints(&[-lambda, 0, 1]),
        Poly::zero(),
        Poly::from_ints(&[-1]),
    ])
}

pub fn hermite_rational() -> RationalDiffOperator {
    RationalDiffOperator::from_polys(vec![
        Poly::from_ints(&[0, 0, 1]),
        Poly::zero(),
        Poly::from_ints(&[-1]),
    ])
    .expect("nonzero leading coefficient")
}

/// The eighth-degree example with eigenvalue -6, folded.
pub fn worked_example() -> DiffOperator {
    let u = Poly::from_ints(&[1, 0, 3]);
    RationalDiffOperator::from_polys(vec![
        &u.pow(4) - &Poly::from_ints(&[0, 0, 18]),
        &Poly::from_ints(&[0, 6]) * &u,
        u.pow(2),
    ])
    .and_then(|r| r.clear_denominators(&GaussianRational::from_int(-6)))
    .expect("well-formed operator")
}
