//! TOML scenario files.

use crate::aim::{AimConfig, ConstantOverrides};
use crate::decay::{DecayOptions, Mollifier};
use crate::dynamics::AbsorbingOptions;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::{sample_fields, CoefficientFields, FieldSource, FieldSpec, Table};
use crate::forcing::ForcingModel;
use crate::grid::Grid;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// A number, or a constant expression such as `"2*pi"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    pub fn value(&self, key: &str) -> Result<f64> {
        match self {
            Scalar::Number(v) => Ok(*v),
            Scalar::Expr(s) => {
                let e = Expr::parse(s).map_err(|e| Error::config(key, e.to_string()))?;
                Ok(e.eval(0.0, 0.0, 0.0))
            }
        }
    }
}

/// A coefficient given as a number, an expression in `x`, `y`, `L`, or a CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldInput {
    Number(f64),
    Expr(String),
    Table { table: PathBuf },
}

impl FieldInput {
    fn source(&self, key: &str, base: &Path) -> Result<FieldSource> {
        match self {
            FieldInput::Number(v) => Ok(FieldSource::constant(*v)),
            FieldInput::Expr(s) => FieldSource::expr(s).map_err(|e| Error::config(key, e.to_string())),
            FieldInput::Table { table } => {
                let p = base.join(table);
                if !p.is_file() {
                    return Err(Error::config(format!("{key}.table"), format!("file not found: {}", p.display())));
                }
                Ok(FieldSource::Table(Table::read_csv(&p)?))
            }
        }
    }

    fn table_path(&self, base: &Path) -> Option<PathBuf> {
        match self {
            FieldInput::Table { table } => Some(base.join(table)),
            _ => None,
        }
    }
}

fn zero_field() -> FieldInput {
    FieldInput::Number(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub side_length: Scalar,
    pub points: usize,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSection {
    pub b: FieldInput,
    pub nu: FieldInput,
    #[serde(default = "zero_field")]
    pub eta: FieldInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub spinup: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// H-radius of the random initial state.
    #[serde(default = "default_radius")]
    pub initial_radius: f64,
}

fn default_record_every() -> usize {
    10
}

fn default_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbingSection {
    pub ensemble_size: Option<usize>,
    pub horizon: Option<f64>,
    pub init_radius: Option<f64>,
    pub margin: Option<f64>,
    pub cutoff_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AimSection {
    pub n: usize,
    pub levels: usize,
    /// Constant `τ`.
    pub tau: Option<f64>,
    /// Common window `(N+1)τ_N`.
    pub window: Option<f64>,
    #[serde(default)]
    pub paper_schedule: bool,
    #[serde(default)]
    pub paper_literal: bool,
    #[serde(default = "default_quantum")]
    pub memo_quantum: Option<f64>,
    pub budget: Option<usize>,
    /// Cut the nonlinearity off outside the measured absorbing ball.
    #[serde(default = "yes")]
    pub prepared: bool,
    /// Values of `n` for the semidistance sweep.
    #[serde(default)]
    pub sweep: Vec<usize>,
    #[serde(default = "default_audit_samples")]
    pub audit_samples: usize,
    #[serde(default = "default_attractor_samples")]
    pub attractor_samples: usize,
    #[serde(default = "default_spacing")]
    pub sample_spacing: f64,
    #[serde(default)]
    pub overrides: ConstantOverrides,
}

fn default_quantum() -> Option<f64> {
    Some(1e-6)
}

fn yes() -> bool {
    true
}

fn default_audit_samples() -> usize {
    100
}

fn default_attractor_samples() -> usize {
    24
}

fn default_spacing() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Small-data threshold on `sup b_s^{1/2}‖u‖₂`.
    pub kappa: Option<f64>,
    /// Box sizes as multiples of `grid.side_length`.
    #[serde(default = "default_ladder")]
    pub box_ladder: Vec<f64>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub record_every: Option<usize>,
    #[serde(default = "default_mollifiers")]
    pub mollifiers: Vec<String>,
    #[serde(default = "default_calibration")]
    pub calibration_fraction: f64,
    #[serde(default = "yes")]
    pub fourier_audit: bool,
    /// Tolerance of the energy residuals, relative to the initial energy.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_alpha() -> f64 {
    2.0
}

fn default_ladder() -> Vec<f64> {
    vec![1.0]
}

fn default_mollifiers() -> Vec<String> {
    ["identity", "gaussian", "heat", "dirac:4"].map(String::from).to_vec()
}

fn default_calibration() -> f64 {
    0.25
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelScenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub grid: GridSection,
    pub fields: FieldsSection,
    #[serde(default)]
    pub forcing: ForcingModel,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub absorbing: AbsorbingSection,
    pub aim: Option<AimSection>,
    pub decay: Option<DecaySection>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// sha256 of the scenario text and referenced tables.
    #[serde(skip)]
    pub hash: String,
}

impl ModelScenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config("scenario", format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format { path: path.display().to_string(), message },
            e => e,
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut s: ModelScenario = toml::from_str(text).map_err(|e| Error::Format { path: "<scenario>".into(), message: e.to_string() })?;
        s.base_dir = base_dir.to_path_buf();
        s.validate()?;
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        for f in [&s.fields.b, &s.fields.nu, &s.fields.eta] {
            if let Some(p) = f.table_path(base_dir) {
                h.update(std::fs::read(p)?);
            }
        }
        s.hash = format!("{:x}", h.finalize());
        Ok(s)
    }

    pub fn side_length(&self) -> Result<f64> {
        self.grid.side_length.value("grid.side_length")
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.side_length()?, self.grid.points, self.grid.modes).map_err(|e| Error::config("grid", e.to_string()))
    }

    pub fn field_spec(&self) -> Result<FieldSpec> {
        Ok(FieldSpec {
            b: self.fields.b.source("fields.b", &self.base_dir)?,
            nu: self.fields.nu.source("fields.nu", &self.base_dir)?,
            eta: self.fields.eta.source("fields.eta", &self.base_dir)?,
        })
    }

    pub fn fields<T: Real>(&self) -> Result<CoefficientFields<T>> {
        sample_fields(&self.grid()?, &self.field_spec()?)
    }

    /// A copy on a box `factor` times larger, same resolution.
    pub fn scaled_box(&self, factor: f64) -> Result<Self> {
        let mut s = self.clone();
        s.grid.side_length = Scalar::Number(self.side_length()? * factor);
        Ok(s)
    }

    /// Checks everything that does not need a basis.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        let grid = self.grid()?;
        let spec = self.field_spec()?;
        let eta_sup = spec.eta.sample(&grid).into_iter().fold(0.0, f64::max);
        let it = &self.integrator;
        if !(it.dt > 0.0) {
            return Err(Error::config("integrator.dt", "must be positive"));
        }
        if !(it.horizon > 0.0) || it.spinup < 0.0 {
            return Err(Error::config("integrator.horizon", "horizon must be positive and spinup nonnegative"));
        }
        if it.record_every == 0 {
            return Err(Error::config("integrator.record_every", "must be at least 1"));
        }
        let scale = eta_sup.max(forcing_scale(&self.forcing));
        if it.dt * scale > 0.5 {
            return Err(Error::config("integrator.dt", format!("dt * max(sup eta, forcing scale) = {:.3} exceeds 0.5", it.dt * scale)));
        }
        if let Some(a) = &self.aim {
            if a.levels == 0 {
                return Err(Error::config("aim.levels", "must be at least 1"));
            }
            let set = [a.tau.is_some(), a.window.is_some(), a.paper_schedule].iter().filter(|b| **b).count();
            if set != 1 {
                return Err(Error::config("aim.tau", "give exactly one of `tau`, `window` or `paper_schedule = true`"));
            }
            if a.tau.or(a.window).is_some_and(|t| !(t > 0.0)) {
                return Err(Error::config("aim.tau", "must be positive"));
            }
        }
        if let Some(d) = &self.decay {
            for m in &d.mollifiers {
                Mollifier::parse(m).map_err(|e| Error::config("decay.mollifiers", e.to_string()))?;
            }
            if d.box_ladder.is_empty() || d.box_ladder.iter().any(|f| !(*f > 0.0)) {
                return Err(Error::config("decay.box_ladder", "needs positive entries"));
            }
            if !(d.calibration_fraction > 0.0 && d.calibration_fraction <= 1.0) {
                return Err(Error::config("decay.calibration_fraction", "must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    pub fn absorbing_options(&self) -> AbsorbingOptions {
        let a = &self.absorbing;
        let d = AbsorbingOptions::default();
        AbsorbingOptions {
            ensemble_size: a.ensemble_size.unwrap_or(d.ensemble_size),
            horizon: a.horizon.unwrap_or(d.horizon),
            dt: self.integrator.dt,
            init_radius: a.init_radius.unwrap_or(d.init_radius),
            margin: a.margin.unwrap_or(d.margin),
            cutoff_samples: a.cutoff_samples.unwrap_or(d.cutoff_samples),
            seed: self.seed,
            ..d
        }
    }

    /// The recursion settings for cut `n`; `rho1` feeds the cutoff and `schedule`
    /// supplies the schedule when `paper_schedule` is set.
    pub fn aim_config(&self, n: usize, rho1: Option<f64>, schedule: Option<Vec<f64>>) -> Result<AimConfig> {
        let a = self.aim.as_ref().ok_or_else(|| Error::config("aim", "section missing"))?;
        let mut c = AimConfig::new(n, a.levels, a.tau.unwrap_or(1.0));
        if let Some(w) = a.window {
            c = c.with_window(w);
        }
        if a.paper_schedule {
            c.tau_schedule = schedule.ok_or_else(|| Error::config("aim.paper_schedule", "needs the absorbing-set constants"))?;
        }
        c.paper_literal = a.paper_literal;
        c.memo_quantum = a.memo_quantum;
        c.budget = a.budget;
        c.rho1 = if a.prepared { rho1 } else { None };
        Ok(c)
    }

    pub fn decay_options(&self) -> Result<DecayOptions> {
        let d = self.decay.as_ref().ok_or_else(|| Error::config("decay", "section missing"))?;
        Ok(DecayOptions {
            dt: d.dt.unwrap_or(self.integrator.dt),
            horizon: d.horizon.unwrap_or(self.integrator.horizon),
            record_every: d.record_every.unwrap_or(self.integrator.record_every),
            alpha: d.alpha,
            mollifiers: d.mollifiers.iter().map(|m| Mollifier::parse(m)).collect::<Result<_>>()?,
            calibration_fraction: d.calibration_fraction,
            fourier_audit: d.fourier_audit,
        })
    }
}

/// Size of the forcing used in the explicit-step heuristic.
pub fn forcing_scale(f: &ForcingModel) -> f64 {
    match *f {
        ForcingModel::Zero => 0.0,
        ForcingModel::SteadyLowMode { amplitude, .. } | ForcingModel::Eigenmode { amplitude, .. } | ForcingModel::IntegrableL1 { amplitude, .. } => {
            amplitude.abs()
        }
        ForcingModel::DerivativeForm { kappa, .. } => kappa.abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
[grid]
side_length = "2*pi"
points = 16
modes = 2
[fields]
b = "1 + 0.2*cos(x)"
nu = 0.5
[integrator]
dt = 0.01
horizon = 1.0
"#;

    #[test]
    fn minimal_scenario() {
        let s = ModelScenario::parse(MINIMAL, Path::new(".")).unwrap();
        assert!((s.side_length().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(s.forcing, ForcingModel::Zero);
        assert_eq!(s.hash.len(), 64);
        let f = s.fields::<f64>().unwrap();
        assert!((f.b_s - 1.2).abs() < 1e-12);
    }

    #[test]
    fn missing_table_names_the_key() {
        let text = MINIMAL.replace("b = \"1 + 0.2*cos(x)\"", "b = { table = \"nope.csv\" }");
        match ModelScenario::parse(&text, Path::new("/nonexistent")) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "fields.b.table"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stability_heuristic() {
        let text = format!("{MINIMAL}\n[forcing]\nkind = \"steady_low_mode\"\nwavevector = [1, 0]\namplitude = 100.0\n");
        assert!(matches!(ModelScenario::parse(&text, Path::new(".")), Err(Error::Config { key, .. }) if key == "integrator.dt"));
    }

    #[test]
    fn aim_schedule_must_be_unique() {
        let text = format!("{MINIMAL}\n[aim]\nn = 2\nlevels = 2\ntau = 0.1\nwindow = 0.3\n");
        assert!(matches!(ModelScenario::parse(&text, Path::new(".")), Err(Error::Config { key, .. }) if key == "aim.tau"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("points = 16", "points = 16\npoinst = 3");
        assert!(matches!(ModelScenario::parse(&text, Path::new(".")), Err(Error::Format { .. })));
    }
}
