//! CSV tables. Floats are written with Rust's shortest round-trip
//! formatting, so reading a file back yields bit-identical values.

use num_complex::Complex64;
use psi_spectral::nullspace::ScanPoint;
use psi_spectral::reconstruct::ResidualSample;

use crate::error::CliError;

pub const COEFF_HEADER: &str = "n,re,im";

pub fn coefficients_csv(values: &[Complex64]) -> String {
    let mut s = format!("{COEFF_HEADER}\n");
    for (n, z) in values.iter().enumerate() {
        s.push_str(&format!("{n},{},{}\n", z.re, z.im));
    }
    s
}

/// Reads `n,re,im` rows. Indices must run `0, 1, 2, ...`; the header is
/// optional and an empty file is the zero vector.
pub fn parse_coefficients(text: &str) -> Result<Vec<Complex64>, CliError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || (idx == 0 && line == COEFF_HEADER) {
            continue;
        }
        let bad = |what: &str| CliError::Input(format!("coefficients line {}: {what}", idx + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [n, re, im] = fields[..] else {
            return Err(bad("expected 'n,re,im'"));
        };
        let n: usize = n.parse().map_err(|_| bad("bad index"))?;
        if n != out.len() {
            return Err(bad(&format!("expected index {}, found {n}", out.len())));
        }
        let re: f64 = re.parse().map_err(|_| bad("bad real part"))?;
        let im: f64 = im.parse().map_err(|_| bad("bad imaginary part"))?;
        if !re.is_finite() || !im.is_finite() {
            return Err(bad("non-finite value"));
        }
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

/// `x, f(x)` and the residual `(P f)(x)` per grid point.
pub fn samples_csv(rows: &[(Complex64, ResidualSample)]) -> String {
    let mut s = String::from("x,re,im,residual_re,residual_im,near_singular\n");
    for (f, r) in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.x, f.re, f.im, r.value.re, r.value.im, r.near_singular as u8
        ));
    }
    s
}

pub fn scan_csv(points: &[ScanPoint]) -> String {
    let mut s = String::from("lambda,min_sigma,relative_min_sigma,accepted_dimension\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{},{}\n",
            p.lambda, p.min_sigma, p.relative_min_sigma, p.accepted_dimension
        ));
    }
    s
}
