//! Square-summable null vectors of a truncated band matrix.
//!
//! The row-truncated matrix always has a kernel of dimension at least
//! `bandwidth`. Most of it belongs to solutions whose coefficients do not
//! decay, so candidates are filtered by how much energy they keep in the
//! last quarter of the coefficients, and the survivors must agree between
//! truncations `N` and `2N`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::band::{BandMatrix, FloatBandMatrix};
use crate::error::{Error, Result};
use crate::operator::{rationalize, DiffOperator, GaussianRational, RationalDiffOperator};

const SVD_EPS: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Singular values below `sigma_rel * sigma_max` count as zero.
    pub sigma_rel: f64,
    /// Largest admissible share of energy in the last quarter of a vector.
    pub tail_fraction: f64,
    /// Largest admissible principal angle between truncations, in radians.
    pub angle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sigma_rel: 1e-8,
            tail_fraction: 1e-4,
            angle: 1e-4,
        }
    }
}

/// Coefficients `f_0 .. f_{N-1}` of `sum f_n e_n` at level `k0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    pub k0: i64,
    pub values: Vec<Complex64>,
    /// Share of `|f|^2` in the last `ceil(N/4)` coefficients.
    pub tail_fraction: f64,
}

impl CoefficientVector {
    pub fn new(k0: i64, values: Vec<Complex64>) -> Self {
        let tail_fraction = tail_fraction(&values);
        Self {
            k0,
            values,
            tail_fraction,
        }
    }

    pub fn truncation(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Energy share of the last `ceil(N/4)` entries; zero for the zero vector.
pub fn tail_fraction(values: &[Complex64]) -> f64 {
    let total: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let start = values.len() - tail_len(values.len());
    values[start..].iter().map(|v| v.norm_sqr()).sum::<f64>() / total
}

fn tail_len(n: usize) -> usize {
    n.div_ceil(4)
}

/// Numerical kernel of one truncation.
#[derive(Clone, Debug)]
pub struct Kernel {
    /// Orthonormal basis of right null vectors.
    pub basis: Vec<Vec<Complex64>>,
    /// The `n_rows` singular values of the matrix, ascending.
    pub singular_values: Vec<f64>,
    pub sigma_max: f64,
}

impl Kernel {
    pub fn min_sigma(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }
}

/// Right singular vectors with `sigma < sigma_rel_tol * sigma_max`,
/// including the directions the missing rows leave unconstrained.
pub fn nullspace(b: &FloatBandMatrix, sigma_rel_tol: f64) -> Result<Kernel> {
    if !(sigma_rel_tol > 0.0 && sigma_rel_tol < 1.0) {
        return Err(Error::Invalid(format!(
            "sigma tolerance {sigma_rel_tol} is outside (0, 1)"
        )));
    }
    let n = b.n_cols;
    let mut square = DMatrix::<Complex64>::zeros(n, n);
    for col in 0..n {
        for row in col.saturating_sub(b.bandwidth)..(col + b.bandwidth + 1).min(b.n_rows) {
            square[(row, col)] = b.get(row, col);
        }
    }
    let svd = square
        .try_svd(false, true, SVD_EPS, 0)
        .ok_or_else(|| Error::Solver("singular value decomposition did not converge".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Solver("right singular vectors were not computed".into()))?;
    let sigma = svd.singular_values;
    let sigma_max = sigma.max();
    let cutoff = sigma_rel_tol * sigma_max;
    let basis = (0..n)
        .filter(|&i| i >= b.n_rows || sigma_max == 0.0 || sigma[i] < cutoff)
        .map(|i| v_t.row(i).iter().map(|z| z.conj()).collect())
        .collect();
    let mut singular_values: Vec<f64> = sigma.iter().take(b.n_rows).copied().collect();
    singular_values.reverse();
    Ok(Kernel {
        basis,
        singular_values,
        sigma_max,
    })
}

/// The subspace of `span(vectors)` whose tail share is at most
/// `tail_fraction_tol`, as an orthonormal list sorted by tail share.
///
/// Within the span, the tail share of `Q y` is the Rayleigh quotient of the
/// tail Gram matrix, so its eigenvectors are the least- to most-tailed
/// directions.
pub fn tail_filter(
    k0: i64,
    vectors: &[Vec<Complex64>],
    tail_fraction_tol: f64,
) -> Vec<CoefficientVector> {
    let Some(first) = vectors.first() else {
        return Vec::new();
    };
    let n = first.len();
    let q = orthonormalize(vectors);
    if q.ncols() == 0 || n == 0 {
        return Vec::new();
    }
    let t = tail_len(n);
    let tail = q.rows(n - t, t);
    let gram = tail.adjoint() * tail;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] <= tail_fraction_tol)
        .map(|i| {
            let v = &q * eig.eigenvectors.column(i);
            CoefficientVector::new(k0, fix_phase(v.iter().copied().collect()))
        })
        .filter(|v| v.tail_fraction <= tail_fraction_tol)
        .collect()
}

/// Modified Gram-Schmidt, dropping numerically dependent inputs.
fn orthonormalize(vectors: &[Vec<Complex64>]) -> DMatrix<Complex64> {
    let mut cols: Vec<DVector<Complex64>> = Vec::new();
    for v in vectors {
        let mut w = DVector::from_column_slice(v);
        let scale = w.norm();
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&w);
                w -= c * proj;
            }
        }
        let norm = w.norm();
        if norm > 1e-10 * scale.max(f64::MIN_POSITIVE) && norm > 0.0 {
            cols.push(w / Complex64::new(norm, 0.0));
        }
    }
    if cols.is_empty() {
        return DMatrix::zeros(vectors.first().map_or(0, Vec::len), 0);
    }
    DMatrix::from_columns(&cols)
}

/// Rotates a vector so its largest entry is real and positive.
fn fix_phase(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let pivot = v.iter().copied().fold(Complex64::new(0.0, 0.0), |best, z| {
        if z.norm() > best.norm() {
            z
        } else {
            best
        }
    });
    if pivot.norm() > 0.0 {
        let rot = pivot.conj() / pivot.norm();
        for z in &mut v {
            *z *= rot;
        }
    }
    v
}

/// Principal angles in radians, largest first, between two orthonormal
/// families. Shorter vectors are zero-padded to a common length.
pub fn principal_angles(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = a.iter().chain(b).map(Vec::len).max().unwrap_or(0);
    let pad = |vs: &[Vec<Complex64>]| {
        let cols: Vec<DVector<Complex64>> = vs
            .iter()
            .map(|v| DVector::from_fn(len, |i, _| v.get(i).copied().unwrap_or_default()))
            .collect();
        DMatrix::from_columns(&cols)
    };
    let (qa, qb) = (pad(a), pad(b));
    let residual = &qa - &qb * (qb.adjoint() * &qa);
    // The singular values of the residual are the sines of the angles.
    let mut angles: Vec<f64> = residual
        .singular_values()
        .iter()
        .map(|s| s.clamp(0.0, 1.0).asin())
        .collect();
    angles.sort_by(|x, y| y.total_cmp(x));
    angles
}

/// Outcome of a two-truncation solve.
#[derive(Clone, Debug)]
pub struct NullspaceResult {
    /// The coarse truncation `N`; accepted vectors have length `2N`.
    pub truncation: usize,
    /// Accepted vectors at truncation `2N`, orthonormal.
    pub vectors: Vec<CoefficientVector>,
    /// Singular values at truncation `N`, ascending.
    pub singular_values: Vec<f64>,
    pub sigma_max: f64,
    /// Raw kernel dimensions at `N` and `2N`.
    pub kernel_dimensions: [usize; 2],
    /// Candidates surviving the tail filter at `N` and `2N`.
    pub candidate_dimensions: [usize; 2],
    /// Largest principal angle between the two candidate subspaces.
    pub subspace_angle: Option<f64>,
    pub accepted_dimension: usize,
    pub converged: bool,
    pub tolerances: Tolerances,
}

impl NullspaceResult {
    pub fn min_sigma(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }
}

/// Candidate vectors of one truncation.
pub fn filtered_kernel(
    op: &DiffOperator,
    k0: i64,
    k_diamond: i64,
    n: usize,
    tol: &Tolerances,
) -> Result<(Kernel, Vec<CoefficientVector>)> {
    let matrix = BandMatrix::assemble(op, k0, k_diamond, n)?;
    let kernel = nullspace(&matrix.export_float(), tol.sigma_rel)?;
    let accepted = tail_filter(k0, &kernel.basis, tol.tail_fraction);
    Ok((kernel, accepted))
}

/// Runs the filtered kernel at `N` and `2N`. When both truncations agree,
/// the `2N` vectors are returned and the `N` ones serve as the check.
pub fn solve(
    op: &DiffOperator,
    k0: i64,
    k_diamond: i64,
    n: usize,
    tol: &Tolerances,
) -> Result<NullspaceResult> {
    let (coarse, fine) = rayon::join(
        || filtered_kernel(op, k0, k_diamond, n, tol),
        || filtered_kernel(op, k0, k_diamond, 2 * n, tol),
    );
    let (kernel, coarse) = coarse?;
    let (kernel_fine, fine) = fine?;
    let dims = [coarse.len(), fine.len()];
    let (angle, converged) = if dims[0] != dims[1] {
        (None, false)
    } else if dims[0] == 0 {
        (None, true)
    } else {
        let a: Vec<Vec<Complex64>> = coarse.iter().map(|v| v.values.clone()).collect();
        let b: Vec<Vec<Complex64>> = fine.iter().map(|v| v.values.clone()).collect();
        let max = principal_angles(&a, &b).first().copied().unwrap_or(0.0);
        (Some(max), max < tol.angle)
    };
    let vectors = if converged { fine } else { Vec::new() };
    Ok(NullspaceResult {
        truncation: n,
        accepted_dimension: vectors.len(),
        vectors,
        singular_values: kernel.singular_values.clone(),
        sigma_max: kernel.sigma_max,
        kernel_dimensions: [kernel.basis.len(), kernel_fine.basis.len()],
        candidate_dimensions: dims,
        subspace_angle: angle,
        converged,
        tolerances: *tol,
    })
}

/// Exact eigenvalue for the operator fold: `lambda` rationalized to within
/// `tol`.
pub fn exact_lambda(lambda: f64, tol: f64) -> Result<GaussianRational> {
    rationalize(lambda, tol)
        .map(GaussianRational::real)
        .ok_or_else(|| Error::Invalid(format!("cannot rationalize lambda = {lambda}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub lambda: f64,
    pub min_sigma: f64,
    pub relative_min_sigma: f64,
    pub accepted_dimension: usize,
}

/// Settings shared by every point of a scan.
#[derive(Clone, Debug)]
pub struct ScanSettings {
    pub k0: i64,
    /// Target level; `None` picks the largest admissible one per point.
    pub k_diamond: Option<i64>,
    pub truncation: usize,
    pub tolerances: Tolerances,
    pub lambda_tol: f64,
}

/// One light solve per eigenvalue guess, in parallel.
pub fn scan(
    op: &RationalDiffOperator,
    lambdas: &[f64],
    settings: &ScanSettings,
) -> Result<Vec<ScanPoint>> {
    lambdas
        .par_iter()
        .map(|&lambda| {
            let folded = op.clear_denominators(&exact_lambda(lambda, settings.lambda_tol)?)?;
            let kd = settings
                .k_diamond
                .unwrap_or_else(|| folded.max_target_level(settings.k0));
            let result = solve(
                &folded,
                settings.k0,
                kd,
                settings.truncation,
                &settings.tolerances,
            )?;
            let relative = if result.sigma_max > 0.0 {
                result.min_sigma() / result.sigma_max
            } else {
                0.0
            };
            Ok(ScanPoint {
                lambda,
                min_sigma: result.min_sigma(),
                relative_min_sigma: relative,
                accepted_dimension: result.accepted_dimension,
            })
        })
        .collect()
}

/// Interior points whose `min_sigma` is below both neighbours.
pub fn local_minima(points: &[ScanPoint]) -> Vec<f64> {
    points
        .windows(3)
        .filter(|w| w[1].min_sigma < w[0].min_sigma && w[1].min_sigma < w[2].min_sigma)
        .map(|w| w[1].lambda)
        .collect()
}

/// `FROM:TO:STEP`, inclusive of `TO` up to rounding.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [from, to, step] = parts[..] else {
        return Err(Error::Invalid(format!("grid '{spec}' is not FROM:TO:STEP")));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Invalid(format!("bad number '{s}' in grid '{spec}'")))
    };
    let (from, to, step) = (num(from)?, num(to)?, num(step)?);
    if step <= 0.0 {
        return Err(Error::Invalid(format!(
            "grid step must be positive, got {step}"
        )));
    }
    if to < from {
        return Ok(Vec::new());
    }
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| from + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::project_coefficients;
    use crate::operator::Poly;

    fn hermite_rational() -> RationalDiffOperator {
        RationalDiffOperator::from_polys(vec![
            Poly::from_ints(&[0, 0, 1]),
            Poly::zero(),
            Poly::from_ints(&[-1]),
        ])
        .unwrap()
    }

    fn hermite(lambda: i64) -> DiffOperator {
        hermite_rational()
            .clear_denominators(&GaussianRational::from_int(lambda))
            .unwrap()
    }

    fn float(op: &DiffOperator, k0: i64, kd: i64, n: usize) -> FloatBandMatrix {
        BandMatrix::assemble(op, k0, kd, n).unwrap().export_float()
    }

    #[test]
    fn zero_matrix_kernel_is_everything() {
        let k = nullspace(&float(&DiffOperator::zero(), 0, 0, 5), 1e-8).unwrap();
        assert_eq!(k.basis.len(), 5);
        assert!(k.singular_values.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn diagonal_matrix_has_no_kernel() {
        let op = DiffOperator::new(vec![Poly::one()]);
        let k = nullspace(&float(&op, 0, 0, 8), 1e-8).unwrap();
        assert!(k.basis.is_empty());
        assert!(k.singular_values.iter().all(|s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn hermite_kernel_is_structural_only() {
        // Only the directions left free by the missing rows are null.
        let k = nullspace(&float(&hermite(1), 0, -2, 80), 1e-8).unwrap();
        assert_eq!(k.basis.len(), 6);
        assert!(k.min_sigma() < 1e-3 * k.sigma_max);
    }

    #[test]
    fn tail_filter_examples() {
        let n = 40;
        let mut spike = vec![Complex64::new(0.0, 0.0); n];
        spike[n - 1] = Complex64::new(1.0, 0.0);
        assert!(tail_filter(0, &[spike], 1e-4).is_empty());
        let geometric: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(0.5f64.powi(i as i32), 0.0))
            .collect();
        let kept = tail_filter(0, &[geometric], 1e-4);
        assert_eq!(kept.len(), 1);
        assert!((kept[0].norm() - 1.0).abs() < 1e-14);
        let ground =
            project_coefficients(0, |x| Complex64::new((-x * x / 2.0).exp(), 0.0), 80, 1024);
        let kept = tail_filter(0, &[ground], 1e-4);
        assert_eq!(kept.len(), 1);
        assert!(kept[0].tail_fraction < 1e-6);
    }

    #[test]
    fn tail_filter_splits_a_mixed_span() {
        let n = 32;
        let decaying: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(0.3f64.powi(i as i32), 0.0))
            .collect();
        let flat = vec![Complex64::new(1.0, 0.0); n];
        let mix: Vec<Complex64> = decaying.iter().zip(&flat).map(|(a, b)| a + b).collect();
        let kept = tail_filter(0, &[mix, flat], 1e-6);
        assert_eq!(kept.len(), 1);
        let cos = decaying
            .iter()
            .zip(&kept[0].values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm()
            / decaying.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert!((cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermite_ground_state_is_found() {
        let tol = Tolerances::default();
        let r = solve(&hermite(1), 0, -2, 80, &tol).unwrap();
        assert!(r.converged);
        assert_eq!(r.accepted_dimension, 1);
        assert!(r.subspace_angle.unwrap() < 1e-4);
        // Accepted vectors lie in the numerical kernel.
        let b = float(&hermite(1), 0, -2, 160);
        assert_eq!(r.vectors[0].truncation(), 160);
        let res: f64 = b
            .mul_vec(&r.vectors[0].values)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(res <= 10.0 * r.sigma_max * tol.sigma_rel);
    }

    #[test]
    fn non_eigenvalue_gives_nothing() {
        let r = solve(&hermite(2), 0, -2, 80, &Tolerances::default()).unwrap();
        assert_eq!(r.accepted_dimension, 0);
    }

    #[test]
    fn scaling_the_matrix_changes_nothing() {
        let tol = Tolerances::default();
        let a = solve(&hermite(1), 0, -2, 60, &tol).unwrap();
        let scaled = DiffOperator::new(
            hermite(1)
                .coeffs()
                .iter()
                .map(|p| p.scale(&"3/2-2*i".parse().unwrap()))
                .collect(),
        );
        let b = solve(&scaled, 0, -2, 60, &tol).unwrap();
        assert_eq!(b.accepted_dimension, 1);
        let overlap: Complex64 = a.vectors[0]
            .values
            .iter()
            .zip(&b.vectors[0].values)
            .map(|(x, y)| x.conj() * y)
            .sum();
        assert!((overlap.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn min_sigma_decreases_with_truncation() {
        let sig: Vec<f64> = [40, 60, 80]
            .iter()
            .map(|&n| {
                nullspace(&float(&hermite(1), 0, -2, n), 1e-8)
                    .unwrap()
                    .min_sigma()
            })
            .collect();
        assert!(sig[1] <= sig[0] * 1.1 && sig[2] <= sig[1] * 1.1, "{sig:?}");
    }

    #[test]
    fn principal_angle_basics() {
        let e = |i: usize, n: usize| {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            v[i] = Complex64::new(1.0, 0.0);
            v
        };
        assert!(principal_angles(&[e(0, 4)], &[e(0, 8)])[0] < 1e-15);
        let right = principal_angles(&[e(0, 4)], &[e(1, 4)]);
        assert!((right[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(
            parse_grid("0:1:0.25").unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(parse_grid("0:6:0.25").unwrap().len(), 25);
        assert!(parse_grid("1:0:0.5").unwrap().is_empty());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn scan_of_a_constant_operator_has_no_dips() {
        let one = RationalDiffOperator::from_polys(vec![Poly::one()]).unwrap();
        let settings = ScanSettings {
            k0: 0,
            k_diamond: None,
            truncation: 10,
            tolerances: Tolerances::default(),
            lambda_tol: 1e-15,
        };
        // P - lambda with P = 1 and lambda != 1 is a nonzero multiple of the identity.
        let pts = scan(&one, &parse_grid("2:4:0.5").unwrap(), &settings).unwrap();
        assert!(local_minima(&pts).is_empty());
        assert!(scan(&one, &[], &settings).unwrap().is_empty());
    }
}
