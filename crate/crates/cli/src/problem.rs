//! Problem files: an operator plus run settings, with command-line
//! overrides applied on top.

use std::path::Path;

use psi_spectral::nullspace::Tolerances;
use psi_spectral::operator::{
    parse_decimal, parse_document, DiffOperator, GaussianRational, RationalDiffOperator,
};
use psi_spectral::reconstruct::SINGULAR_MARGIN;
use serde::Serialize;

use crate::error::{CliError, Stage};
use crate::Settings;

pub const DEFAULT_TRUNCATION: usize = 80;
pub const DEFAULT_LAMBDA_TOL: f64 = 1e-15;

const KEYS: [&str; 7] = [
    "k0",
    "lambda",
    "kdiamond",
    "truncation",
    "sigma_tol",
    "tail_tol",
    "angle_tol",
];

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub operator: RationalDiffOperator,
    pub k0: i64,
    pub lambda: GaussianRational,
    pub k_diamond: Option<i64>,
    pub truncation: usize,
    pub tolerances: Tolerances,
    pub lambda_tol: f64,
    pub margin: f64,
}

/// The folded operator with its resolved target level.
#[derive(Clone, Debug)]
pub struct Folded {
    pub operator: DiffOperator,
    pub k_diamond: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProblemSummary {
    pub order: usize,
    pub k0: i64,
    pub k_diamond: i64,
    pub s0: Option<i64>,
    pub bandwidth: usize,
    pub lambda: String,
    pub truncation: usize,
    pub singular_points: Vec<f64>,
    pub tolerances: Tolerances,
    pub lambda_tol: f64,
    pub singular_margin: f64,
}

/// `a`, `a/b`, `a/b+c/d*i` or a decimal literal, all taken exactly.
pub fn parse_lambda(s: &str) -> Result<GaussianRational, String> {
    s.parse::<GaussianRational>()
        .or_else(|e| parse_decimal(s).map(GaussianRational::real).ok_or(e))
}

fn value<T: std::str::FromStr>(key: &str, line: usize, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Input(format!("line {line}: bad value '{raw}' for '{key}'")))
}

impl ProblemSpec {
    pub fn load(path: &Path, settings: &Settings) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text, settings)
    }

    pub fn from_text(text: &str, settings: &Settings) -> Result<Self, CliError> {
        let doc = parse_document(text).stage("parse")?;
        let mut spec = ProblemSpec {
            operator: doc.operator,
            k0: 0,
            lambda: GaussianRational::zero(),
            k_diamond: None,
            truncation: DEFAULT_TRUNCATION,
            tolerances: Tolerances::default(),
            lambda_tol: DEFAULT_LAMBDA_TOL,
            margin: SINGULAR_MARGIN,
        };
        for e in &doc.entries {
            let (key, line, raw) = (e.key.as_str(), e.line, e.value.as_str());
            match key {
                "k0" => spec.k0 = value(key, line, raw)?,
                "lambda" => {
                    spec.lambda = parse_lambda(raw)
                        .map_err(|m| CliError::Input(format!("line {line}: {m}")))?
                }
                "kdiamond" => spec.k_diamond = Some(value(key, line, raw)?),
                "truncation" => spec.truncation = value(key, line, raw)?,
                "sigma_tol" => spec.tolerances.sigma_rel = value(key, line, raw)?,
                "tail_tol" => spec.tolerances.tail_fraction = value(key, line, raw)?,
                "angle_tol" => spec.tolerances.angle = value(key, line, raw)?,
                _ => {
                    return Err(CliError::Input(format!(
                        "line {line}: unknown key '{key}' (expected one of {})",
                        KEYS.join(", ")
                    )))
                }
            }
        }
        spec.apply(settings)?;
        spec.validate()?;
        Ok(spec)
    }

    fn apply(&mut self, s: &Settings) -> Result<(), CliError> {
        if let Some(l) = &s.lambda {
            self.lambda = parse_lambda(l).map_err(|m| CliError::Input(format!("--lambda: {m}")))?;
        }
        self.k0 = s.k0.unwrap_or(self.k0);
        self.k_diamond = s.kdiamond.or(self.k_diamond);
        self.truncation = s.truncation.unwrap_or(self.truncation);
        self.tolerances.sigma_rel = s.sigma_tol.unwrap_or(self.tolerances.sigma_rel);
        self.tolerances.tail_fraction = s.tail_tol.unwrap_or(self.tolerances.tail_fraction);
        self.tolerances.angle = s.angle_tol.unwrap_or(self.tolerances.angle);
        self.lambda_tol = s.lambda_tol.unwrap_or(self.lambda_tol);
        self.margin = s.margin.unwrap_or(self.margin);
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(CliError::Input(format!(
                    "{name} must lie in (0, 1), got {v}"
                )))
            }
        };
        unit("sigma tolerance", t.sigma_rel)?;
        unit("tail tolerance", t.tail_fraction)?;
        if !(t.angle > 0.0 && t.angle.is_finite()) {
            return Err(CliError::Input(format!(
                "angle tolerance must be positive, got {}",
                t.angle
            )));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(CliError::Input(format!(
                "singular margin must be nonnegative, got {}",
                self.margin
            )));
        }
        if self.truncation == 0 {
            return Err(CliError::Input("truncation must be positive".into()));
        }
        Ok(())
    }

    pub fn fold(&self) -> Result<Folded, CliError> {
        self.fold_at(&self.lambda)
    }

    pub fn fold_at(&self, lambda: &GaussianRational) -> Result<Folded, CliError> {
        let operator = self.operator.clear_denominators(lambda).stage("fold")?;
        let k_diamond = self
            .k_diamond
            .unwrap_or_else(|| operator.max_target_level(self.k0));
        Ok(Folded {
            operator,
            k_diamond,
        })
    }

    pub fn summary(&self, folded: &Folded) -> ProblemSummary {
        let op = &folded.operator;
        ProblemSummary {
            order: op.order(),
            k0: self.k0,
            k_diamond: folded.k_diamond,
            s0: op.s0(),
            bandwidth: psi_spectral::band::bandwidth(op.order(), self.k0, folded.k_diamond),
            lambda: self.lambda.to_string(),
            truncation: self.truncation,
            singular_points: op.all_singular_points().iter().map(|r| r.x).collect(),
            tolerances: self.tolerances,
            lambda_tol: self.lambda_tol,
            singular_margin: self.margin,
        }
    }
}
