//! Run configuration read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ladder::{default_search_range, LadderOptions};
use crate::nonlinearity::{Construction, Direction, NonlinearitySpec, ScanOptions};
use crate::operator::{check_order, QuadratureConfig};
use crate::solver::SolverOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: DomainConfig,
    pub operator: OperatorConfig,
    pub nonlinearity: NonlinearityConfig,
    pub construction: Construction,
    #[serde(default)]
    pub ladder: LadderConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative paths in the file are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub half_width: f64,
    pub n_interior: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            half_width: 1.0,
            n_interior: 257,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub s: f64,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    OriginOscillatory { alpha: f64, beta: f64, a: f64 },
    InfinityOscillatory { alpha: f64, beta: f64, a: f64 },
    /// Inline `(t, f(t))` samples.
    Table { points: Vec<[f64; 2]> },
    /// Two-column CSV of `(t, f(t))` samples.
    CustomTable { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    pub direction: Option<Direction>,
    pub depth: usize,
    pub search_range: Option<[f64; 2]>,
    pub samples_per_decade: usize,
    pub margin: f64,
    pub certificate_samples: usize,
    pub bump_radius: Option<f64>,
    pub height_samples: usize,
    pub box_tol: f64,
    pub separation: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        let base = LadderOptions::new(Direction::Origin, 3);
        Self {
            direction: None,
            depth: base.depth,
            search_range: None,
            samples_per_decade: base.scan.samples_per_decade,
            margin: base.scan.margin,
            certificate_samples: base.scan.certificate_samples,
            bump_radius: base.bump_radius,
            height_samples: base.height_samples,
            box_tol: base.box_tol,
            separation: base.separation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Swept values; `None` uses `±{0, λ̃_K/2, λ̃_K}`.
    pub lambdas: Option<Vec<f64>>,
    /// Samples per rung when measuring `λ_k`.
    pub rung_samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: None,
            rung_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl RunConfig {
    /// Parses and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Parses and validates TOML text.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Re-checks every precondition that does not need assembly.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        };
        self.grid().map_err(cfg_err)?;
        check_order(self.operator.s).map_err(cfg_err)?;
        if let Some(spec) = self.inline_spec() {
            spec.check().map_err(cfg_err)?;
        }
        self.direction()?;
        let l = &self.ladder;
        if l.depth == 0 {
            return Err(Error::Config("ladder.depth must be at least 1".into()));
        }
        if let Some([lo, hi]) = l.search_range {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::Config(format!(
                    "ladder.search_range must satisfy 0 < lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        if l.samples_per_decade == 0 || l.certificate_samples == 0 {
            return Err(Error::Config("ladder sample counts must be positive".into()));
        }
        if !(0.0..0.5).contains(&l.margin) {
            return Err(Error::Config(format!("ladder.margin must lie in [0, 0.5), got {}", l.margin)));
        }
        if let Some(r) = l.bump_radius {
            if !(r > 0.0 && 2.0 * r <= self.domain.half_width) {
                return Err(Error::Config(format!(
                    "ladder.bump_radius must lie in (0, L/2], got {r}"
                )));
            }
        }
        if l.height_samples < 8 || !(l.box_tol >= 0.0) || !(l.separation > 0.0) {
            return Err(Error::Config(
                "ladder.height_samples ≥ 8, box_tol ≥ 0 and separation > 0 are required".into(),
            ));
        }
        self.solver.check().map_err(cfg_err)?;
        if let Some(ls) = &self.sweep.lambdas {
            if ls.is_empty() || ls.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sweep.lambdas must be a non-empty list of finite values".into()));
            }
        }
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats must not be empty".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain.half_width, self.domain.n_interior)
    }

    /// Configured direction, or the one implied by the construction.
    pub fn direction(&self) -> Result<Direction> {
        match (self.ladder.direction, self.construction.natural_direction()) {
            (Some(d), Some(n)) if d != n => Err(Error::Config(format!(
                "ladder.direction {d:?} contradicts the {n:?} construction"
            ))),
            (Some(d), _) | (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::Config(
                "ladder.direction is required for this construction".into(),
            )),
        }
    }

    fn inline_spec(&self) -> Option<NonlinearitySpec> {
        match &self.nonlinearity {
            NonlinearityConfig::OriginOscillatory { alpha, beta, a } => Some(NonlinearitySpec::Origin {
                alpha: *alpha,
                beta: *beta,
                a: *a,
            }),
            NonlinearityConfig::InfinityOscillatory { alpha, beta, a } => Some(NonlinearitySpec::Infinity {
                alpha: *alpha,
                beta: *beta,
                a: *a,
            }),
            NonlinearityConfig::Table { points } => Some(NonlinearitySpec::Table { points: points.clone() }),
            NonlinearityConfig::CustomTable { .. } => None,
        }
    }

    /// The nonlinearity, reading the table file if there is one.
    pub fn spec(&self) -> Result<NonlinearitySpec> {
        let spec = match (&self.nonlinearity, self.inline_spec()) {
            (_, Some(spec)) => spec,
            (NonlinearityConfig::CustomTable { path }, None) => {
                let full = match &self.base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                NonlinearitySpec::table_from_csv(&full)?
            }
            _ => unreachable!("every inline family has a spec"),
        };
        spec.check().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn ladder_options(&self) -> Result<LadderOptions> {
        let direction = self.direction()?;
        let l = &self.ladder;
        let (lo, hi) = match l.search_range {
            Some([lo, hi]) => (lo, hi),
            None => default_search_range(direction),
        };
        Ok(LadderOptions {
            depth: l.depth,
            scan: ScanOptions {
                range: (lo, hi),
                samples_per_decade: l.samples_per_decade,
                margin: l.margin,
                certificate_samples: l.certificate_samples,
            },
            solver: self.solver,
            bump_radius: l.bump_radius,
            height_samples: l.height_samples,
            box_tol: l.box_tol,
            separation: l.separation,
        })
    }

    /// Output directory, relative paths taken from the working directory.
    pub fn output_dir(&self) -> &Path {
        &self.output.dir
    }
}
