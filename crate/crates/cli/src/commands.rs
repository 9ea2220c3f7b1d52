//! The four pipelines. Each writes its artifacts into the output directory
//! and returns a short human-readable summary.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use psi_spectral::band::{BandMatrix, ConditionsReport};
use psi_spectral::nullspace::{
    local_minima, parse_grid, scan as run_scan, solve as run_solve, ScanSettings,
};
use psi_spectral::oracle::{crosscheck_trajectory, CrossCheck};
use psi_spectral::reconstruct::{uniform_grid, ReconstructedFunction, ResidualEvaluator};
use serde::Serialize;

use crate::error::{CliError, Stage};
use crate::problem::{Folded, ProblemSpec, ProblemSummary};
use crate::table;
use crate::Checks;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Debug)]
pub struct Outcome {
    pub summary: String,
    pub exit_code: u8,
}

fn ok(summary: String) -> Outcome {
    Outcome {
        summary,
        exit_code: EXIT_OK,
    }
}

struct OutDir<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> OutDir<'a> {
    fn new(dir: &'a Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<String, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        self.written.push(name.to_string());
        Ok(name.to_string())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<String, CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }
}

#[derive(Serialize)]
struct AssembleReport {
    problem: ProblemSummary,
    rows: usize,
    cols: usize,
    nonzeros: usize,
    conditions: ConditionsReport,
    artifacts: Vec<String>,
}

pub fn assemble(spec: &ProblemSpec, out: &Path) -> Result<Outcome, CliError> {
    let folded = spec.fold()?;
    let b = BandMatrix::assemble(&folded.operator, spec.k0, folded.k_diamond, spec.truncation)
        .stage("assemble")?;
    let conditions = b.audit_conditions();
    let mut dir = OutDir::new(out)?;
    dir.write("matrix.dump", &b.to_dump())?;
    dir.write("matrix.csv", &b.export_float().to_csv())?;
    let mut artifacts = dir.written.clone();
    artifacts.push("assemble.json".into());
    let report = AssembleReport {
        problem: spec.summary(&folded),
        rows: b.n_rows(),
        cols: b.n_cols(),
        nonzeros: b.nnz(),
        conditions,
        artifacts,
    };
    dir.write_json("assemble.json", &report)?;
    Ok(ok(format!(
        "assembled {}x{} matrix, bandwidth {}, {} nonzeros",
        b.n_rows(),
        b.n_cols(),
        b.bandwidth(),
        b.nnz()
    )))
}

/// Residual and oracle statistics of one reconstructed function.
#[derive(Serialize)]
struct FunctionReport {
    length: usize,
    norm: f64,
    tail_fraction: f64,
    residual_sup: f64,
    /// `residual_sup` over the largest `sum |p_m f^(m)|` on the grid.
    residual_relative: f64,
    residual_skipped: usize,
    oracle: Option<CrossCheck>,
    oracle_note: Option<String>,
    samples: String,
    trajectory: Option<String>,
    coefficients: Option<String>,
}

fn check_function(
    f: &ReconstructedFunction,
    folded: &Folded,
    spec: &ProblemSpec,
    checks: &Checks,
    dir: &mut OutDir,
    tag: &str,
) -> Result<FunctionReport, CliError> {
    let op = &folded.operator;
    let evaluator = ResidualEvaluator::new(op, spec.margin);
    let (a, b) = checks.residual_range;
    let mut rows = Vec::with_capacity(checks.samples);
    let (mut sup, mut scale, mut skipped): (f64, f64, usize) = (0.0, 0.0, 0);
    for x in uniform_grid(a, b, checks.samples) {
        let r = evaluator.at(f, x).stage("residual")?;
        if r.near_singular {
            skipped += 1;
        } else {
            sup = sup.max(r.value.norm());
            scale = scale.max(evaluator.term_scale(f, x).stage("residual")?);
        }
        rows.push((f.eval(x), r));
    }
    let samples = dir.write(&format!("samples{tag}.csv"), &table::samples_csv(&rows))?;

    let (oa, ob) = checks.oracle_range;
    let (oracle, oracle_note, trajectory) = if op.order() == 0 {
        (
            None,
            Some("order 0 operator has no initial value problem".to_string()),
            None,
        )
    } else {
        match crosscheck_trajectory(f, op, oa, ob, checks.oracle_steps) {
            Ok((c, t)) => (
                Some(c),
                None,
                Some(dir.write(&format!("trajectory{tag}.csv"), &t.to_csv())?),
            ),
            Err(e) => (None, Some(e.to_string()), None),
        }
    };
    let c = f.coeffs();
    Ok(FunctionReport {
        length: c.truncation(),
        norm: c.norm(),
        tail_fraction: c.tail_fraction,
        residual_sup: sup,
        residual_relative: if scale > 0.0 { sup / scale } else { 0.0 },
        residual_skipped: skipped,
        oracle,
        oracle_note,
        samples,
        trajectory,
        coefficients: None,
    })
}

#[derive(Serialize)]
struct SolveReport {
    problem: ProblemSummary,
    conditions: ConditionsReport,
    sigma_max: f64,
    smallest_singular_values: Vec<f64>,
    kernel_dimensions: [usize; 2],
    candidate_dimensions: [usize; 2],
    subspace_angle: Option<f64>,
    accepted_dimension: usize,
    converged: bool,
    vectors: Vec<FunctionReport>,
    artifacts: Vec<String>,
}

pub fn solve(spec: &ProblemSpec, checks: &Checks, out: &Path) -> Result<Outcome, CliError> {
    let folded = spec.fold()?;
    let (k0, kd) = (spec.k0, folded.k_diamond);
    let conditions = BandMatrix::assemble(&folded.operator, k0, kd, spec.truncation)
        .stage("assemble")?
        .audit_conditions();
    let result =
        run_solve(&folded.operator, k0, kd, spec.truncation, &spec.tolerances).stage("solve")?;
    let mut dir = OutDir::new(out)?;
    let mut vectors = Vec::new();
    for (i, v) in result.vectors.iter().enumerate() {
        let coeffs = dir.write(
            &format!("coeffs_{i}.csv"),
            &table::coefficients_csv(&v.values),
        )?;
        let f = ReconstructedFunction::new(v.clone(), folded.operator.order());
        let mut r = check_function(&f, &folded, spec, checks, &mut dir, &format!("_{i}"))?;
        r.coefficients = Some(coeffs);
        vectors.push(r);
    }
    let mut artifacts = dir.written.clone();
    artifacts.push("solve.json".into());
    let report = SolveReport {
        problem: spec.summary(&folded),
        conditions,
        sigma_max: result.sigma_max,
        smallest_singular_values: result.singular_values.iter().take(10).copied().collect(),
        kernel_dimensions: result.kernel_dimensions,
        candidate_dimensions: result.candidate_dimensions,
        subspace_angle: result.subspace_angle,
        accepted_dimension: result.accepted_dimension,
        converged: result.converged,
        vectors,
        artifacts,
    };
    dir.write_json("solve.json", &report)?;

    let worst = report
        .vectors
        .iter()
        .map(|v| v.residual_sup)
        .fold(0.0, f64::max);
    let worst_rel = report
        .vectors
        .iter()
        .map(|v| v.residual_relative)
        .fold(0.0, f64::max);
    let mut summary = format!(
        "accepted dimension {} at N = {} (vectors of length {}), max residual {worst:.3e} (relative {worst_rel:.3e})",
        result.accepted_dimension,
        spec.truncation,
        2 * spec.truncation
    );
    let exit_code = if result.converged {
        EXIT_OK
    } else {
        summary.push_str(&format!(
            "; truncations disagree: {} vs {} candidates",
            result.candidate_dimensions[0], result.candidate_dimensions[1]
        ));
        if let Some(a) = result.subspace_angle {
            summary.push_str(&format!(", angle {a:.3e}"));
        }
        EXIT_NOT_CONVERGED
    };
    Ok(Outcome { summary, exit_code })
}

pub fn scan(spec: &ProblemSpec, grid: &str, out: &Path) -> Result<Outcome, CliError> {
    let lambdas = parse_grid(grid).stage("scan")?;
    let settings = ScanSettings {
        k0: spec.k0,
        k_diamond: spec.k_diamond,
        truncation: spec.truncation,
        tolerances: spec.tolerances,
        lambda_tol: spec.lambda_tol,
    };
    let points = run_scan(&spec.operator, &lambdas, &settings).stage("scan")?;
    let mut dir = OutDir::new(out)?;
    dir.write("scan.csv", &table::scan_csv(&points))?;
    let minima = local_minima(&points);
    Ok(ok(format!(
        "scanned {} points, min-sigma dips at {minima:?}",
        points.len()
    )))
}

#[derive(Serialize)]
struct VerifyReport {
    problem: ProblemSummary,
    function: FunctionReport,
    artifacts: Vec<String>,
}

pub fn verify(
    spec: &ProblemSpec,
    checks: &Checks,
    coeffs: &Path,
    out: &Path,
) -> Result<Outcome, CliError> {
    let text = fs::read_to_string(coeffs).map_err(|source| CliError::Io {
        path: coeffs.to_path_buf(),
        source,
    })?;
    let values: Vec<Complex64> = table::parse_coefficients(&text)?;
    let limit = 2 * spec.truncation;
    if values.len() > limit {
        return Err(CliError::Input(format!(
            "length mismatch: {} coefficients exceed the {limit} a solve at N = {} produces",
            values.len(),
            spec.truncation
        )));
    }
    let folded = spec.fold()?;
    let f = ReconstructedFunction::from_values(spec.k0, values, folded.operator.order());
    let mut dir = OutDir::new(out)?;
    let function = check_function(&f, &folded, spec, checks, &mut dir, "")?;
    let mut artifacts = dir.written.clone();
    artifacts.push("verify.json".into());
    let summary = format!(
        "{} coefficients, residual sup {:.3e}{}",
        function.length,
        function.residual_sup,
        function
            .oracle
            .map(|o| format!(", oracle deviation {:.3e}", o.max_abs_dev))
            .unwrap_or_default()
    );
    dir.write_json(
        "verify.json",
        &VerifyReport {
            problem: spec.summary(&folded),
            function,
            artifacts,
        },
    )?;
    Ok(ok(summary))
}
