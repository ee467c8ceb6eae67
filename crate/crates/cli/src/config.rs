//! Run configuration: a flat TOML table, every key optional.
//!
//! Values are layered as defaults < `--config` file < `--set key=value`
//! < dedicated command-line flags. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use snowflake_fem::fem::CgOptions;
use snowflake_fem::geometry::{DomainSpec, Point2};
use snowflake_fem::mesh::pinned_h;
use snowflake_fem::study::{CIRCLE_RADIUS, DEFAULT_CIRCLE_SEGMENTS};
use snowflake_fem::{GradingParams, SourceField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Snowflake,
    Circle,
    Square,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainKind,
    pub level: u32,
    pub radius: f64,
    pub segments: usize,
    /// Translates the domain; its natural center when absent.
    pub center_x1: Option<f64>,
    pub center_x2: Option<f64>,

    /// Global mesh size; the pinned rule 3^{-n/2}/4 when absent.
    pub h: Option<f64>,
    pub eta: f64,
    pub sigma: f64,
    pub cutoff: f64,

    pub amplitude: f64,
    pub width: f64,
    /// Gaussian center; the domain center when absent.
    pub source_x1: Option<f64>,
    pub source_x2: Option<f64>,
    pub mu: f64,

    pub cg_tol: f64,
    pub cg_max_iter: Option<usize>,

    pub out: PathBuf,
    pub vtk: bool,
    pub csv: bool,

    /// Highest snowflake level of `table1` and `mosco`.
    pub max_n: u32,
    pub conv_levels: usize,
    pub conv_graded: bool,
    /// Coarsest mesh size of the convergence ladder; 3^{-n} when absent.
    pub conv_h0: Option<f64>,
    pub conv_reference_refinements: usize,
    /// Mesh size shared by every level of `mosco`.
    pub mosco_h: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainKind::Snowflake,
            level: 2,
            radius: CIRCLE_RADIUS,
            segments: DEFAULT_CIRCLE_SEGMENTS,
            center_x1: None,
            center_x2: None,
            h: None,
            eta: GradingParams::DEFAULT_ETA,
            sigma: GradingParams::DEFAULT_SIGMA,
            cutoff: GradingParams::DEFAULT_CUTOFF,
            amplitude: SourceField::DEFAULT_AMPLITUDE,
            width: SourceField::DEFAULT_WIDTH,
            source_x1: None,
            source_x2: None,
            mu: 1.0,
            cg_tol: snowflake_fem::fem::DEFAULT_CG_TOL,
            cg_max_iter: None,
            out: PathBuf::from("out"),
            vtk: true,
            csv: true,
            max_n: 4,
            conv_levels: 4,
            conv_graded: true,
            conv_h0: None,
            conv_reference_refinements: 2,
            mosco_h: snowflake_fem::study::default_mosco_grading().h,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl RunConfig {
    /// Reads `path` (if any) and applies `key=value` overrides, whose values
    /// use TOML syntax (`level=3`, `domain="circle"`).
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("override `{item}` is not key=value")))?;
            let parsed = format!("v = {value}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                // Bare words are taken as strings, so `domain=circle` works.
                .unwrap_or_else(|| toml::Value::String(value.trim().to_string()));
            table.insert(key.trim().to_string(), parsed);
        }
        toml::Value::Table(table)
            .try_into::<RunConfig>()
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        self.domain_spec().validate().map_err(|e| ConfigError(e.to_string()))?;
        self.grading().validate().map_err(|e| ConfigError(e.to_string()))?;
        if !(self.amplitude.is_finite()) {
            return bad(format!("amplitude = {} must be finite", self.amplitude));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return bad(format!("width = {} must be positive", self.width));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu = {} must be positive", self.mu));
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return bad(format!("cg_tol = {} must lie in (0, 1)", self.cg_tol));
        }
        if self.cg_max_iter == Some(0) {
            return bad("cg_max_iter must be positive".into());
        }
        if self.max_n > snowflake_fem::geometry::MAX_SNOWFLAKE_LEVEL {
            return bad(format!("max_n = {} exceeds {}", self.max_n, snowflake_fem::geometry::MAX_SNOWFLAKE_LEVEL));
        }
        if self.conv_levels < 4 {
            return bad(format!("conv_levels = {} must be at least 4", self.conv_levels));
        }
        if let Some(h0) = self.conv_h0 {
            if !(h0 > 0.0 && h0.is_finite()) {
                return bad(format!("conv_h0 = {h0} must be positive"));
            }
        }
        if !(self.mosco_h > 0.0 && self.mosco_h.is_finite()) {
            return bad(format!("mosco_h = {} must be positive", self.mosco_h));
        }
        for (name, v) in [
            ("center_x1", self.center_x1),
            ("center_x2", self.center_x2),
            ("source_x1", self.source_x1),
            ("source_x2", self.source_x2),
        ] {
            if v.is_some_and(|x| !x.is_finite()) {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    pub fn domain_spec(&self) -> DomainSpec {
        let mut spec = match self.domain {
            DomainKind::Snowflake => DomainSpec::snowflake(self.level),
            DomainKind::Circle => DomainSpec::circle(self.radius, self.segments),
            DomainKind::Square => DomainSpec::unit_square(),
        };
        spec.center = Point2::new(
            self.center_x1.unwrap_or(spec.center.x1),
            self.center_x2.unwrap_or(spec.center.x2),
        );
        spec
    }

    /// Grading with `h` resolved: explicit value, else the pinned rule.
    pub fn grading(&self) -> GradingParams {
        let level = match self.domain {
            DomainKind::Snowflake => self.level,
            _ => 0,
        };
        GradingParams {
            h: self.h.unwrap_or_else(|| pinned_h(level)),
            eta: self.eta,
            sigma: self.sigma,
            cutoff: self.cutoff,
        }
    }

    pub fn source(&self, spec: &DomainSpec) -> SourceField {
        SourceField::Gaussian {
            amplitude: self.amplitude,
            width: self.width,
            center: Point2::new(
                self.source_x1.unwrap_or(spec.center.x1),
                self.source_x2.unwrap_or(spec.center.x2),
            ),
        }
    }

    pub fn cg(&self) -> CgOptions {
        CgOptions {
            tol: self.cg_tol,
            max_iter: self.cg_max_iter,
        }
    }
}
