//! Config-driven experiments: TOML in, a text report and CSV tables out.
//!
//! A config names an experiment kind and the blocks it needs:
//!
//! ```toml
//! kind = "convergence"
//! seed = 0
//!
//! [connection]
//! preset = "magnetic"
//!
//! [path]
//! kind = "arc"
//! center = [0.5, 0.2]
//! radius = 1.0
//! domain = [0.0, 2.0]
//!
//! [integrator]
//! rule = "left"
//! ```
//!
//! Unknown keys are rejected. Errors in the config (bad syntax, unknown
//! presets, out-of-range numbers) map to [`RunError::Config`]; failures while
//! computing map to [`RunError::Numerical`].

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bordism::{
    circle_word, evaluate_bordism, snake_residual, snake_word, BordismWord, Generator, LinearMap, Sign, SignedPoint,
};
use crate::connection::{evaluate_connection, Chart, ConnectionForm};
use crate::descent::{
    angle_distance, check_cech_cocycle, colatitude_circle, glued_transport, rotation_angle, sphere_holonomy_angle,
    GlobalBundle, ManifoldPreset,
};
use crate::error::Error;
use crate::matcore::{operator_distance, EndMap};
use crate::presets;
use crate::reconstruct::{
    additivity_residual, grid_points, homogeneity_residual, reconstruct_at, roundtrip_error, sci, OdeOracle,
    TabulatedOracle, TransportOracle,
};
use crate::transport::{
    cocycle_residual, transport_ode, transport_product, Path, ProductRule, StepDensity, DEFAULT_STEPS_PER_UNIT,
};
use crate::verify::{self, convergence_order, convergence_table, Bound, Check, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Transport,
    Convergence,
    Reconstruct,
    Holonomy,
    Bordism,
    VerifyAll,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Transport => "transport",
            Self::Convergence => "convergence",
            Self::Reconstruct => "reconstruct",
            Self::Holonomy => "holonomy",
            Self::Bordism => "bordism",
            Self::VerifyAll => "verify-all",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectionPreset {
    Zero,
    Constant,
    Magnetic,
    LeviCivita,
    Polynomial,
}

/// A connection on a single chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    pub preset: ConnectionPreset,
    /// `magnetic` only; default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    /// `zero` only; default 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_dim: Option<usize>,
    /// `zero` only; default 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_dim: Option<usize>,
    /// `constant` only: one real matrix per chart coordinate, given by rows.
    /// Defaults to the built-in rank-2 example on the plane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Constant,
    Segment,
    Arc,
    Spline,
    /// Ambient circle of colatitude `theta` on the unit sphere.
    Colatitude,
    /// Colatitude loop in the stereographic chart centred at the pole.
    PolarLoop,
    /// Unit circle in the plane.
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub kind: PathKind,
    /// `constant`: the point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    /// `segment`: endpoints, traversed over `[0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Vec<f64>>,
    /// `arc`: `c + r(cos u·e1 + sin u·e2)`; `e1`, `e2` default to the first
    /// two coordinate vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e2: Option<Vec<f64>>,
    /// `spline`: at least two waypoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints: Option<Vec<Vec<f64>>>,
    /// `colatitude` and `polar-loop`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Parameter interval; `[0, 1]` by default and `[0, 2π]` for arcs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    pub manifold: ManifoldPreset,
    /// `circle`: rotation angle of the transition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    /// `line`: transition `exp(x·X)`; `X` by rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WordKind {
    Snake,
    Circle,
    Slices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Id,
    Arc,
    Coev,
    Ev,
    Perm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub sign: Sign,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenSpec {
    pub token: TokenKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<Sign>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    /// `coev`, `ev`: sign of the left point of the pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first: Option<Sign>,
    /// `arc`: key into `word.paths`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<usize>>,
}

/// `snake` and `circle` use the top-level path, which must be a loop;
/// `slices` spells out a word generator by generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordSpec {
    pub kind: WordKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source: Vec<PointSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slices: Vec<Vec<TokenSpec>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub paths: BTreeMap<String, PathSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MethodSpec {
    #[default]
    Ode,
    Product,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSpec {
    pub method: MethodSpec,
    pub steps_per_unit: f64,
    pub rule: ProductRule,
    /// Convergence sweep `N = n_min, 2·n_min, …, n_max`.
    pub n_min: usize,
    pub n_max: usize,
    pub reference_steps: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            method: MethodSpec::Ode,
            steps_per_unit: DEFAULT_STEPS_PER_UNIT,
            rule: ProductRule::Left,
            n_min: 16,
            n_max: 4096,
            reference_steps: verify::CONVERGENCE_REFERENCE_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructSpec {
    pub h: f64,
    pub grid_per_axis: usize,
    /// Sampling box, one `[lo, hi]` per chart axis; `[−1, 1]` each by default.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<[f64; 2]>,
    pub lambda: f64,
    /// Tabulated oracle to reconstruct from instead of the connection's own
    /// transport.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_file: Option<String>,
}

impl Default for ReconstructSpec {
    fn default() -> Self {
        Self { h: crate::reconstruct::DEFAULT_H, grid_per_axis: 5, bounds: vec![], lambda: 2.0, oracle_file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: String,
    pub report: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: "out".into(), report: "report.txt".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// May be left out when the caller supplies it (the CLI subcommand).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<BundleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<WordSpec>,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub reconstruct: ReconstructSpec,
    /// Threshold overrides keyed by check name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind: Some(kind),
            seed: 0,
            connection: None,
            bundle: None,
            path: None,
            word: None,
            integrator: IntegratorSpec::default(),
            reconstruct: ReconstructSpec::default(),
            tolerances: BTreeMap::new(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config { key: String::new(), message: e.to_string() })
    }

    pub fn load(path: &FsPath) -> Result<Self, RunError> {
        let text = fs::read_to_string(path)
            .map_err(|e| RunError::Config { key: String::new(), message: format!("{}: {e}", path.display()) })?;
        Self::from_toml(&text).map_err(|e| match e {
            RunError::Config { key, message } => RunError::Config { key, message: format!("{}: {message}", path.display()) },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    /// The config does not parse or does not validate; `key` names the
    /// offending entry when known.
    Config { key: String, message: String },
    Numerical(Error),
    Io(String),
}

impl RunError {
    fn config(key: &str, message: impl Into<String>) -> Self {
        Self::Config { key: key.into(), message: message.into() }
    }

    /// 2 for config errors, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config { key, message } if key.is_empty() => write!(f, "config error: {message}"),
            Self::Config { key, message } => write!(f, "config error at `{key}`: {message}"),
            Self::Numerical(e) => write!(f, "numerical failure: {e}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        Self::Numerical(e)
    }
}

/// Tags construction errors with the config key they came from.
trait AtKey<T> {
    fn at(self, key: &str) -> Result<T, RunError>;
}

impl<T> AtKey<T> for crate::Result<T> {
    fn at(self, key: &str) -> Result<T, RunError> {
        self.map_err(|e| RunError::config(key, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    /// Named results that carry no threshold.
    pub values: Vec<(String, f64)>,
    /// Per-criterion summary lines of a verify-all run.
    pub summaries: Vec<String>,
    pub tables: Vec<PathBuf>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// 0 if every check passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            1
        }
    }

    pub fn failing(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let kind = self.config.kind.map_or("?", |k| k.name());
        let _ = writeln!(s, "experiment: {kind}");
        let _ = writeln!(s, "\n[config]\n{}", self.config.to_toml().trim_end());
        if !self.summaries.is_empty() {
            let _ = writeln!(s, "\n[criteria]");
            for l in &self.summaries {
                let _ = writeln!(s, "{l}");
            }
        }
        if !self.values.is_empty() {
            let _ = writeln!(s, "\n[values]");
            for (k, v) in &self.values {
                let _ = writeln!(s, "{k} = {}", sci(*v));
            }
        }
        let _ = writeln!(s, "\n[checks]");
        for c in &self.checks {
            let _ = writeln!(s, "{c}");
        }
        if !self.tables.is_empty() {
            let _ = writeln!(s, "\n[tables]");
            for t in &self.tables {
                let _ = writeln!(s, "{}", t.display());
            }
        }
        let _ = writeln!(s, "\nresult: {}", if self.pass() { "PASS" } else { "FAIL" });
        s
    }
}

/// Runs the experiment, writing CSV tables, the text report and the echoed
/// config (`config.toml`) into `out_dir`. Deterministic given the config.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &FsPath) -> Result<Report, RunError> {
    let kind = cfg.kind.ok_or_else(|| RunError::config("kind", "missing experiment kind"))?;
    validate_common(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| RunError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut run = Run { cfg, out_dir, checks: vec![], values: vec![], summaries: vec![], tables: vec![] };
    match kind {
        ExperimentKind::Transport => run.transport()?,
        ExperimentKind::Convergence => run.convergence()?,
        ExperimentKind::Reconstruct => run.reconstruct()?,
        ExperimentKind::Holonomy => run.holonomy()?,
        ExperimentKind::Bordism => run.bordism()?,
        ExperimentKind::VerifyAll => run.verify_all()?,
    }
    let tol = Tolerances(cfg.tolerances.clone());
    let checks = run.checks.into_iter().map(|c| tol.apply(c)).collect();
    let report = Report { config: cfg.clone(), checks, values: run.values, summaries: run.summaries, tables: run.tables };
    let echo = out_dir.join("config.toml");
    fs::write(&echo, cfg.to_toml()).map_err(|e| RunError::Io(format!("{}: {e}", echo.display())))?;
    let path = out_dir.join(&cfg.output.report);
    fs::write(&path, report.render()).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    Ok(report)
}

fn validate_common(cfg: &ExperimentConfig) -> Result<(), RunError> {
    let i = &cfg.integrator;
    if !(i.steps_per_unit.is_finite() && i.steps_per_unit >= 1.0) {
        return Err(RunError::config("integrator.steps_per_unit", "must be at least 1"));
    }
    if i.n_min < 1 || i.n_max < i.n_min {
        return Err(RunError::config("integrator.n_min", "need 1 <= n_min <= n_max"));
    }
    if i.reference_steps < 1 {
        return Err(RunError::config("integrator.reference_steps", "must be positive"));
    }
    let r = &cfg.reconstruct;
    if !(r.h > 0.0 && r.h.is_finite()) {
        return Err(RunError::config("reconstruct.h", "must be positive"));
    }
    if r.grid_per_axis < 1 {
        return Err(RunError::config("reconstruct.grid_per_axis", "must be positive"));
    }
    if !(r.lambda > 0.0 && r.lambda.is_finite()) {
        return Err(RunError::config("reconstruct.lambda", "must be positive"));
    }
    for (k, v) in &cfg.tolerances {
        if !v.is_finite() {
            return Err(RunError::config(&format!("tolerances.{k}"), "must be finite"));
        }
    }
    Ok(())
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    out_dir: &'a FsPath,
    checks: Vec<Check>,
    values: Vec<(String, f64)>,
    summaries: Vec<String>,
    tables: Vec<PathBuf>,
}

impl Run<'_> {
    fn check(&mut self, name: &str, bound: Bound, value: crate::Result<f64>) {
        self.checks.push(match value {
            Ok(v) => Check::new(name, v, bound),
            Err(e) => Check::failed(name, bound, e.to_string()),
        });
    }

    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), RunError> {
        let path = self.out_dir.join(name);
        let io = |e: csv::Error| RunError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| RunError::Io(e.to_string()))?;
        self.tables.push(path);
        Ok(())
    }

    fn matrix_table(&mut self, name: &str, m: &EndMap) -> Result<(), RunError> {
        let rows: Vec<Vec<String>> = (0..m.dim())
            .flat_map(|i| (0..m.dim()).map(move |j| (i, j)))
            .map(|(i, j)| {
                let z = m.get(i, j);
                vec![i.to_string(), j.to_string(), sci(z.re), sci(z.im)]
            })
            .collect();
        self.table(name, &["row", "col", "re", "im"], &rows)
    }

    fn connection(&self) -> Result<ConnectionForm, RunError> {
        let spec = self.cfg.connection.as_ref().ok_or_else(|| RunError::config("connection", "block is required"))?;
        build_connection(spec)
    }

    fn path(&self) -> Result<Path, RunError> {
        let spec = self.cfg.path.as_ref().ok_or_else(|| RunError::config("path", "block is required"))?;
        build_path(spec, "path")
    }

    fn bundle(&self) -> Result<GlobalBundle, RunError> {
        let spec = self.cfg.bundle.as_ref().ok_or_else(|| RunError::config("bundle", "block is required"))?;
        match spec.manifold {
            ManifoldPreset::Sphere => GlobalBundle::sphere_tangent().at("bundle.manifold"),
            ManifoldPreset::Circle => GlobalBundle::flat_circle(spec.phi.unwrap_or(0.0)).at("bundle.phi"),
            ManifoldPreset::Line => {
                let a = self.connection()?;
                let rows = spec.generator.as_ref().ok_or_else(|| RunError::config("bundle.generator", "required for a line"))?;
                let x = EndMap::from_rows(rows).at("bundle.generator")?;
                GlobalBundle::line(a, x).at("bundle")
            }
            ManifoldPreset::Flat(n) => {
                let a = self.connection()?;
                if a.chart().dim != n {
                    return Err(RunError::config("bundle.manifold", format!("flat({n}) but the connection lives on R^{}", a.chart().dim)));
                }
                GlobalBundle::flat(a).at("bundle")
            }
        }
    }

    fn density(&self) -> StepDensity {
        StepDensity(self.cfg.integrator.steps_per_unit)
    }

    fn transport(&mut self) -> Result<(), RunError> {
        let a = self.connection()?;
        let path = self.path()?;
        if a.chart().dim != path.dim() {
            return Err(RunError::config("path", format!("path is in R^{} but the connection in R^{}", path.dim(), a.chart().dim)));
        }
        let (s, t) = path.carrier();
        let steps = self.density().steps_for(s, t);
        let result = match self.cfg.integrator.method {
            MethodSpec::Ode => transport_ode(&a, &path, s, t, steps)?,
            MethodSpec::Product => transport_product(&a, &path, s, t, steps, self.cfg.integrator.rule)?,
        };
        self.values.push(("transport.steps".into(), result.steps as f64));
        if let Some(e) = result.error_estimate {
            self.values.push(("transport.error_estimate".into(), e));
        }
        let m = result.map.as_end().clone();
        let identity = operator_distance(&m, &EndMap::identity(m.dim()));
        self.values.push(("transport.distance_from_identity".into(), *identity.as_ref().unwrap_or(&f64::NAN)));
        if a.kind_name() == "zero" || is_constant_path(&path) {
            self.check("transport.identity_residual", Bound::Below(1e-12), identity);
        }
        let mid = 0.5 * (s + t);
        let step = 1.0 / self.cfg.integrator.steps_per_unit;
        self.check("transport.cocycle_residual", Bound::Below(1e-8), cocycle_residual(&a, &path, s, mid, t, step));
        self.matrix_table("transport.csv", &m)
    }

    fn convergence(&mut self) -> Result<(), RunError> {
        let a = self.connection()?;
        let path = self.path()?;
        let i = self.cfg.integrator.clone();
        let mut ns = vec![];
        let mut n = i.n_min;
        while n <= i.n_max {
            ns.push(n);
            n *= 2;
        }
        if ns.len() < 2 {
            return Err(RunError::config("integrator.n_max", "the sweep needs at least two values of N"));
        }
        let errs = convergence_table(&a, &path, &ns, i.rule, i.reference_steps)?;
        let rows: Vec<Vec<String>> = ns.iter().zip(&errs).map(|(n, e)| vec![n.to_string(), sci(*e)]).collect();
        self.table("convergence.csv", &["n", "error"], &rows)?;
        // the slope is refitted from the emitted table so the report matches the file
        let (ns2, errs2) = read_convergence_csv(&self.out_dir.join("convergence.csv"))?;
        let order = convergence_order(&ns2, &errs2);
        let bound = match i.rule {
            ProductRule::Left => Bound::Within(0.9, 1.1),
            ProductRule::Midpoint => Bound::AtLeast(1.8),
        };
        let name = match i.rule {
            ProductRule::Left => "convergence.left_order",
            ProductRule::Midpoint => "convergence.midpoint_order",
        };
        self.check(name, bound, Ok(order));
        Ok(())
    }

    fn reconstruct(&mut self) -> Result<(), RunError> {
        let spec = self.cfg.reconstruct.clone();
        let h = spec.h;
        if let Some(file) = &spec.oracle_file {
            return self.reconstruct_from_table(FsPath::new(file), h);
        }
        let a = self.connection()?;
        let n = a.chart().dim;
        let bounds: Vec<(f64, f64)> = if spec.bounds.is_empty() {
            vec![(-1.0, 1.0); n]
        } else if spec.bounds.len() != n {
            return Err(RunError::config("reconstruct.bounds", format!("need {n} intervals")));
        } else {
            spec.bounds.iter().map(|b| (b[0], b[1])).collect()
        };
        let grid = grid_points(&bounds, spec.grid_per_axis);
        let oracle = OdeOracle::new(a.clone());

        let mut rows = vec![];
        let mut worst: f64 = 0.0;
        for p in &grid {
            let mut err: f64 = 0.0;
            for k in 0..n {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                let got = reconstruct_at(&oracle, p, &e, h)?;
                err = err.max(operator_distance(&got, &evaluate_connection(&a, p, &e)?)?);
            }
            worst = worst.max(err);
            let mut row: Vec<String> = p.iter().map(|x| sci(*x)).collect();
            row.push(sci(err));
            rows.push(row);
        }
        let mut header: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
        header.push("error".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        self.table("reconstruct.csv", &header, &rows)?;
        let rt = roundtrip_error(&a, &grid, h);
        if let Ok(r) = &rt {
            debug_assert!((r - worst).abs() <= 1e-12 * (1.0 + worst));
        }
        self.check("reconstruct.roundtrip", Bound::Below(1e-4), rt);

        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut dir = || -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let probes: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = grid.iter().map(|p| (p.clone(), dir(), dir())).collect();
        let homog = max_over(probes.iter().map(|(p, u, _)| homogeneity_residual(&oracle, p, u, spec.lambda, h)));
        self.check("reconstruct.homogeneity", Bound::Below(1e-6), homog);
        let add = max_over(probes.iter().map(|(p, u, v)| additivity_residual(&oracle, p, u, v, h)));
        self.check("reconstruct.additivity", Bound::Below(1e-6), add);

        // tabulate the oracle, reread it, and reconstruct from the table alone
        let axes: Vec<(Vec<f64>, Vec<f64>)> = grid
            .iter()
            .flat_map(|p| {
                (0..n).map(move |k| {
                    let mut e = vec![0.0; n];
                    e[k] = 1.0;
                    (p.clone(), e)
                })
            })
            .collect();
        let table = TabulatedOracle::sample(&oracle, &axes, &[-h, h])?;
        let path = self.out_dir.join("oracle.csv");
        let file = fs::File::create(&path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        table.write_csv(file)?;
        self.tables.push(path.clone());
        let reread = TabulatedOracle::read_csv(fs::File::open(&path).map_err(|e| RunError::Io(e.to_string()))?)?;
        let table_err = max_over(axes.iter().map(|(p, e)| {
            let from_table = reconstruct_at(&reread, p, e, h)?;
            operator_distance(&from_table, &evaluate_connection(&a, p, e)?)
        }));
        self.check("reconstruct.tabulated_roundtrip", Bound::Below(1e-4), table_err);
        Ok(())
    }

    fn reconstruct_from_table(&mut self, file: &FsPath, h: f64) -> Result<(), RunError> {
        let f = fs::File::open(file).map_err(|e| RunError::config("reconstruct.oracle_file", format!("{}: {e}", file.display())))?;
        let oracle = TabulatedOracle::read_csv(f).at("reconstruct.oracle_file")?;
        let n = oracle.chart_dim();
        let d = oracle.fiber_dim();
        let mut probes: Vec<(Vec<f64>, Vec<f64>)> = vec![];
        for e in oracle.entries() {
            if e.t > 0.0 && !probes.iter().any(|(p, v)| p == &e.p && v == &e.v) {
                probes.push((e.p.clone(), e.v.clone()));
            }
        }
        let reference = self.cfg.connection.as_ref().map(build_connection).transpose()?;
        let mut header: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
        header.extend((1..=n).map(|i| format!("v{i}")));
        for i in 0..d {
            for j in 0..d {
                header.push(format!("A_{i}_{j}_re"));
                header.push(format!("A_{i}_{j}_im"));
            }
        }
        let mut rows = vec![];
        let mut worst: f64 = 0.0;
        for (p, v) in &probes {
            let m = reconstruct_at(&oracle, p, v, h)?;
            if let Some(a) = &reference {
                worst = worst.max(operator_distance(&m, &evaluate_connection(a, p, v)?)?);
            }
            let mut row: Vec<String> = p.iter().chain(v).map(|x| sci(*x)).collect();
            for i in 0..d {
                for j in 0..d {
                    row.push(sci(m.get(i, j).re));
                    row.push(sci(m.get(i, j).im));
                }
            }
            rows.push(row);
        }
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        self.table("reconstruct.csv", &header, &rows)?;
        self.values.push(("reconstruct.probes".into(), probes.len() as f64));
        if reference.is_some() {
            self.check("reconstruct.tabulated_roundtrip", Bound::Below(1e-4), Ok(worst));
        }
        Ok(())
    }

    fn holonomy(&mut self) -> Result<(), RunError> {
        let b = self.bundle()?;
        let path = self.path()?;
        if path.dim() != b.atlas().ambient_dim() {
            return Err(RunError::config("path", format!("bundle base lives in R^{}", b.atlas().ambient_dim())));
        }
        let h = glued_transport(&b, &path)?.map.into_end();
        let tr = h.trace();
        self.values.push(("holonomy.trace_re".into(), tr.re));
        self.values.push(("holonomy.trace_im".into(), tr.im));
        let angle = if h.dim() == 2 { rotation_angle(&h).ok() } else { None };
        if let Some(a) = angle {
            self.values.push(("holonomy.angle".into(), a));
        }
        let spec = self.cfg.bundle.as_ref().expect("bundle checked");
        let path_spec = self.cfg.path.as_ref().expect("path checked");
        match (spec.manifold, path_spec.kind) {
            (ManifoldPreset::Sphere, PathKind::Colatitude) => {
                let expected = sphere_holonomy_angle(path_spec.theta.expect("validated"));
                self.values.push(("holonomy.expected_angle".into(), expected));
                let got = angle.ok_or_else(|| Error::NotARotation("sphere holonomy".into()));
                self.check("holonomy.angle_error", Bound::Below(1e-6), got.map(|a| angle_distance(a, expected)));
            }
            (ManifoldPreset::Circle, PathKind::Circle) => {
                let phi = spec.phi.unwrap_or(0.0);
                let got = angle.ok_or_else(|| Error::NotARotation("circle holonomy".into()));
                self.check("holonomy.angle_error", Bound::Below(1e-8), got.map(|a| angle_distance(a.abs(), wrap(phi).abs())));
            }
            _ => {}
        }
        self.check("holonomy.cech_residual", Bound::Below(1e-10), check_cech_cocycle(b.atlas(), b.cocycle(), 32));
        self.matrix_table("holonomy.csv", &h)
    }

    fn bordism(&mut self) -> Result<(), RunError> {
        let b = self.bundle()?;
        let spec = self.cfg.word.as_ref().ok_or_else(|| RunError::config("word", "block is required"))?;
        match spec.kind {
            WordKind::Snake => {
                let path = self.path()?;
                let x = path.point(path.carrier().0);
                let residual = snake_residual(&b, &x, &path);
                let ok = residual.is_ok();
                self.check("bordism.snake_residual", Bound::Below(1e-8), residual);
                if ok {
                    let m = evaluate_bordism(&snake_word(&b, &x, &path, Sign::Plus)?, &b)?;
                    self.map_table(&m)?;
                }
                Ok(())
            }
            WordKind::Circle => {
                let path = self.path()?;
                let m = evaluate_bordism(&circle_word(&b, &path).at("path")?, &b)?;
                let z = m.scalar()?;
                self.values.push(("bordism.value_re".into(), z.re));
                self.values.push(("bordism.value_im".into(), z.im));
                let tr = glued_transport(&b, &path).map(|g| (g.map.trace() - z).norm());
                self.check("bordism.circle_vs_trace", Bound::Below(1e-8), tr);
                self.map_table(&m)
            }
            WordKind::Slices => {
                let w = build_word(spec, &b)?;
                let m = evaluate_bordism(&w, &b).map_err(|e| match e {
                    Error::Composition(msg) => RunError::config("word.slices", msg),
                    other => RunError::Numerical(other),
                })?;
                self.values.push(("bordism.source_dim".into(), m.source.dim() as f64));
                self.values.push(("bordism.target_dim".into(), m.target.dim() as f64));
                self.map_table(&m)
            }
        }
    }

    fn map_table(&mut self, m: &LinearMap) -> Result<(), RunError> {
        let rows: Vec<Vec<String>> = (0..m.matrix.nrows())
            .flat_map(|i| (0..m.matrix.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| {
                let z = m.matrix[(i, j)];
                vec![i.to_string(), j.to_string(), sci(z.re), sci(z.im)]
            })
            .collect();
        self.table("bordism.csv", &["row", "col", "re", "im"], &rows)
    }

    fn verify_all(&mut self) -> Result<(), RunError> {
        let criteria = verify::verify_all(self.cfg.seed, &Tolerances(self.cfg.tolerances.clone()));
        let mut rows = vec![];
        for c in &criteria {
            self.summaries.push(c.summary());
            for k in &c.checks {
                rows.push(vec![c.id.to_string(), k.name.clone(), sci(k.value), k.bound.to_string(), k.pass.to_string()]);
            }
            self.checks.extend(c.checks.iter().cloned());
        }
        self.table("verify.csv", &["criterion", "check", "value", "bound", "pass"], &rows)
    }
}

fn wrap(a: f64) -> f64 {
    crate::descent::wrap_angle(a)
}

fn is_constant_path(p: &Path) -> bool {
    let (s, t) = p.carrier();
    (0..=16).all(|k| {
        let u = s + (t - s) * k as f64 / 16.0;
        p.velocity(u).iter().all(|v| *v == 0.0)
    })
}

fn max_over(values: impl IntoIterator<Item = crate::Result<f64>>) -> crate::Result<f64> {
    let mut worst: f64 = 0.0;
    for v in values {
        let v = v?;
        if v.is_nan() {
            return Ok(f64::NAN);
        }
        worst = worst.max(v);
    }
    Ok(worst)
}

fn read_convergence_csv(path: &FsPath) -> Result<(Vec<usize>, Vec<f64>), RunError> {
    let io = |e: csv::Error| RunError::Io(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    let mut ns = vec![];
    let mut errs = vec![];
    for rec in r.records() {
        let rec = rec.map_err(io)?;
        let bad = |_| RunError::Io(format!("{}: malformed row", path.display()));
        ns.push(rec[0].parse::<usize>().map_err(|e| bad(e.to_string()))?);
        errs.push(rec[1].parse::<f64>().map_err(|e| bad(e.to_string()))?);
    }
    Ok((ns, errs))
}

pub fn build_connection(spec: &ConnectionSpec) -> Result<ConnectionForm, RunError> {
    let unused = |key: &str, present: bool| -> Result<(), RunError> {
        if present {
            Err(RunError::config(&format!("connection.{key}"), format!("not used by preset {:?}", spec.preset)))
        } else {
            Ok(())
        }
    };
    if spec.preset != ConnectionPreset::Magnetic {
        unused("strength", spec.strength.is_some())?;
    }
    if spec.preset != ConnectionPreset::Zero {
        unused("chart_dim", spec.chart_dim.is_some())?;
        unused("fiber_dim", spec.fiber_dim.is_some())?;
    }
    if spec.preset != ConnectionPreset::Constant {
        unused("components", spec.components.is_some())?;
    }
    match spec.preset {
        ConnectionPreset::Zero => {
            let n = spec.chart_dim.unwrap_or(2);
            let d = spec.fiber_dim.unwrap_or(2);
            let chart = Chart::new(n).at("connection.chart_dim")?;
            ConnectionForm::zero(chart, d).at("connection.fiber_dim")
        }
        ConnectionPreset::Constant => match &spec.components {
            None => presets::constant().at("connection"),
            Some(cs) => {
                let ms = cs.iter().map(|rows| EndMap::from_rows(rows)).collect::<crate::Result<Vec<_>>>().at("connection.components")?;
                let chart = Chart::new(ms.len()).at("connection.components")?;
                ConnectionForm::constant(chart, ms).at("connection.components")
            }
        },
        ConnectionPreset::Magnetic => ConnectionForm::magnetic(spec.strength.unwrap_or(1.0)).at("connection.strength"),
        ConnectionPreset::LeviCivita => Ok(ConnectionForm::levi_civita_sphere()),
        ConnectionPreset::Polynomial => presets::polynomial().at("connection"),
    }
}

pub fn build_path(spec: &PathSpec, key: &str) -> Result<Path, RunError> {
    let need = |name: &str, v: Option<&Vec<f64>>| -> Result<Vec<f64>, RunError> {
        v.cloned().ok_or_else(|| RunError::config(&format!("{key}.{name}"), format!("required for kind {:?}", spec.kind)))
    };
    let theta = || -> Result<f64, RunError> {
        let t = spec.theta.ok_or_else(|| RunError::config(&format!("{key}.theta"), "required"))?;
        if !(t > 0.0 && t < std::f64::consts::PI) {
            return Err(RunError::config(&format!("{key}.theta"), "must lie in (0, pi)"));
        }
        Ok(t)
    };
    let domain = |default: (f64, f64)| spec.domain.map_or(default, |d| (d[0], d[1]));
    let k = |suffix: &str| format!("{key}.{suffix}");
    match spec.kind {
        PathKind::Constant => Path::constant(need("point", spec.point.as_ref())?, domain((0.0, 1.0))).at(&k("point")),
        PathKind::Segment => {
            let (p, q) = (need("start", spec.start.as_ref())?, need("end", spec.end.as_ref())?);
            let (s, t) = domain((0.0, 1.0));
            if p.len() != q.len() || !(t > s) {
                return Err(RunError::config(&k("end"), "endpoints must share a dimension over a nonempty domain"));
            }
            let v: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (b - a) / (t - s)).collect();
            let start: Vec<f64> = p.iter().zip(&v).map(|(a, w)| a - s * w).collect();
            Path::affine(start, v, (s, t)).at(key)
        }
        PathKind::Arc => {
            let c = need("center", spec.center.as_ref())?;
            let n = c.len();
            let unit = |i: usize| (0..n).map(|j| if j == i { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
            let r = spec.radius.ok_or_else(|| RunError::config(&k("radius"), "required for an arc"))?;
            if n < 2 {
                return Err(RunError::config(&k("center"), "an arc needs at least two dimensions"));
            }
            let e1 = spec.e1.clone().unwrap_or_else(|| unit(0));
            let e2 = spec.e2.clone().unwrap_or_else(|| unit(1));
            Path::circle_arc(c, r, e1, e2, domain((0.0, TAU))).at(key)
        }
        PathKind::Spline => {
            let w = spec.waypoints.clone().ok_or_else(|| RunError::config(&k("waypoints"), "required for a spline"))?;
            Path::spline(w, domain((0.0, 1.0))).at(&k("waypoints"))
        }
        PathKind::Colatitude => colatitude_circle(theta()?).at(key),
        PathKind::PolarLoop => Path::colatitude_loop(theta()?).at(key),
        PathKind::Circle => Path::planar_arc([0.0, 0.0], 1.0, domain((0.0, TAU))).at(key),
    }
}

fn build_word(spec: &WordSpec, b: &GlobalBundle) -> Result<BordismWord, RunError> {
    let mut paths = BTreeMap::new();
    for (name, p) in &spec.paths {
        paths.insert(name.clone(), build_path(p, &format!("word.paths.{name}"))?);
    }
    let source = spec
        .source
        .iter()
        .enumerate()
        .map(|(i, p)| SignedPoint::at(b, p.sign, p.point.clone()).at(&format!("word.source[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut slices = vec![];
    for (i, slice) in spec.slices.iter().enumerate() {
        let mut out = vec![];
        for (j, t) in slice.iter().enumerate() {
            let key = format!("word.slices[{i}][{j}]");
            let need_point = || t.point.clone().ok_or_else(|| RunError::config(&format!("{key}.point"), "required"));
            let need_sign = |v: Option<Sign>, name: &str| v.ok_or_else(|| RunError::config(&format!("{key}.{name}"), "required"));
            out.push(match t.token {
                TokenKind::Id => Generator::Id(SignedPoint::at(b, need_sign(t.sign, "sign")?, need_point()?).at(&key)?),
                TokenKind::Arc => {
                    let name = t.path.as_ref().ok_or_else(|| RunError::config(&format!("{key}.path"), "required"))?;
                    let p = paths
                        .get(name)
                        .ok_or_else(|| RunError::config(&format!("{key}.path"), format!("no path named `{name}` in word.paths")))?;
                    Generator::arc(p.clone(), need_sign(t.sign, "sign")?)
                }
                TokenKind::Coev => Generator::Coev { point: need_point()?, first: need_sign(t.first, "first")? },
                TokenKind::Ev => Generator::Ev { point: need_point()?, first: need_sign(t.first, "first")? },
                TokenKind::Perm => {
                    Generator::Perm(t.sigma.clone().ok_or_else(|| RunError::config(&format!("{key}.sigma"), "required"))?)
                }
            });
        }
        slices.push(out);
    }
    Ok(BordismWord::new(source, slices))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> (Report, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        (run_experiment(&cfg, dir.path()).unwrap(), dir)
    }

    #[test]
    fn zero_connection_transport_is_identity() {
        let (r, dir) = run(
            r#"
kind = "transport"
[connection]
preset = "zero"
[path]
kind = "spline"
waypoints = [[0.0, 0.0], [0.5, 1.0], [1.0, 0.0]]
"#,
        );
        assert!(r.pass(), "{}", r.render());
        let c = r.checks.iter().find(|c| c.name == "transport.identity_residual").unwrap();
        assert!(c.value <= 1e-12);
        assert!(dir.path().join("transport.csv").exists());
        assert!(dir.path().join("report.txt").exists());
    }

    #[test]
    fn constant_transport_matches_exponential() {
        let (r, dir) = run(
            r#"
kind = "transport"
[connection]
preset = "constant"
components = [[[0.0, 1.0], [-1.0, 0.0]]]
[path]
kind = "segment"
start = [0.0]
end = [1.5]
"#,
        );
        assert!(r.pass());
        let text = fs::read_to_string(dir.path().join("transport.csv")).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let vals: Vec<f64> = rdr.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
        let expected = [1.5f64.cos(), 1.5f64.sin(), -1.5f64.sin(), 1.5f64.cos()];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12, "{v} vs {e}");
        }
    }

    #[test]
    fn csv_numbers_have_fifteen_significant_digits() {
        let (_, dir) = run(
            r#"
kind = "transport"
[connection]
preset = "magnetic"
[path]
kind = "arc"
center = [0.0, 0.0]
radius = 0.5
"#,
        );
        let text = fs::read_to_string(dir.path().join("transport.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("row,col,re,im"));
        let field = lines.next().unwrap().split(',').nth(2).unwrap().to_string();
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.len(), 16, "{field}");
    }

    #[test]
    fn unknown_preset_names_the_key() {
        let e = ExperimentConfig::from_toml("kind = \"transport\"\n[connection]\npreset = \"bogus\"\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let msg = e.to_string();
        assert!(msg.contains("preset") && msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::from_toml("kind = \"transport\"\n[path]\nkind = \"circle\"\nradius_typo = 1\n").unwrap_err();
        assert!(e.to_string().contains("radius_typo"));
    }

    #[test]
    fn missing_parameters_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml("kind = \"transport\"\n[connection]\npreset = \"zero\"\n[path]\nkind = \"arc\"\ncenter = [0.0, 0.0]\n").unwrap();
        let e = run_experiment(&cfg, dir.path()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("path.radius"), "{e}");
        let cfg = ExperimentConfig::from_toml("kind = \"transport\"\n[connection]\npreset = \"magnetic\"\nfiber_dim = 3\n[path]\nkind = \"circle\"\n").unwrap();
        let e = run_experiment(&cfg, dir.path()).unwrap_err();
        assert!(e.to_string().contains("connection.fiber_dim"), "{e}");
    }

    #[test]
    fn config_round_trips_through_the_report() {
        let text = r#"
kind = "bordism"
seed = 7
[bundle]
manifold = "circle"
phi = 0.4
[word]
kind = "slices"
source = [{ sign = "+", point = [1.0, 0.0] }]
slices = [[{ token = "arc", sign = "+", path = "up" }]]
[word.paths.up]
kind = "arc"
center = [0.0, 0.0]
radius = 1.0
domain = [0.0, 1.0]
[tolerances]
"x.y" = 1e-3
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.integrator, IntegratorSpec::default());
    }

    #[test]
    fn convergence_slope_from_table() {
        let (r, dir) = run(
            r#"
kind = "convergence"
[connection]
preset = "magnetic"
[path]
kind = "arc"
center = [0.5, 0.2]
radius = 1.0
domain = [0.0, 2.0]
[integrator]
n_min = 16
n_max = 1024
reference_steps = 8192
"#,
        );
        assert!(r.pass(), "{}", r.render());
        let text = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 7);
    }

    #[test]
    fn holonomy_on_the_sphere() {
        let (r, _) = run(
            r#"
kind = "holonomy"
[bundle]
manifold = "sphere"
[path]
kind = "colatitude"
theta = 1.0471975511965976
"#,
        );
        assert!(r.pass(), "{}", r.render());
        let (_, a) = r.values.iter().find(|(k, _)| k == "holonomy.angle").unwrap();
        assert!(angle_distance(*a, sphere_holonomy_angle(PI_3)) < 1e-6);
    }

    const PI_3: f64 = std::f64::consts::FRAC_PI_3;

    #[test]
    fn flat_circle_holonomy_and_circle_word() {
        let (r, _) = run("kind = \"holonomy\"\n[bundle]\nmanifold = \"circle\"\nphi = 0.9\n[path]\nkind = \"circle\"\n");
        assert!(r.pass(), "{}", r.render());
        let (r, _) = run(
            "kind = \"bordism\"\n[bundle]\nmanifold = \"circle\"\nphi = 0.9\n[path]\nkind = \"circle\"\n[word]\nkind = \"circle\"\n",
        );
        assert!(r.pass(), "{}", r.render());
        let (_, v) = r.values.iter().find(|(k, _)| k == "bordism.value_re").unwrap();
        assert!((v - 2.0 * 0.9f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn snake_on_a_line_bundle() {
        let (r, _) = run(
            r#"
kind = "bordism"
[connection]
preset = "constant"
components = [[[0.3, -0.8], [0.5, -0.1]]]
[bundle]
manifold = "line"
generator = [[0.0, -0.4], [0.4, 0.1]]
[path]
kind = "constant"
point = [0.2]
[word]
kind = "snake"
"#,
        );
        assert!(r.pass(), "{}", r.render());
    }

    #[test]
    fn slices_with_a_bad_arc_reference() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml(
            "kind = \"bordism\"\n[bundle]\nmanifold = \"circle\"\n[word]\nkind = \"slices\"\nslices = [[{ token = \"arc\", sign = \"+\", path = \"nope\" }]]\n",
        )
        .unwrap();
        let e = run_experiment(&cfg, dir.path()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("word.slices[0][0].path"), "{e}");
    }

    #[test]
    fn reconstruct_and_reread_table() {
        let (r, dir) = run(
            r#"
kind = "reconstruct"
[connection]
preset = "polynomial"
[reconstruct]
grid_per_axis = 3
"#,
        );
        assert!(r.pass(), "{}", r.render());
        let table = dir.path().join("oracle.csv");
        assert!(table.exists());
        let text = format!(
            "kind = \"reconstruct\"\n[connection]\npreset = \"polynomial\"\n[reconstruct]\noracle_file = {:?}\n",
            table.to_str().unwrap()
        );
        let out = tempfile::tempdir().unwrap();
        let r2 = run_experiment(&ExperimentConfig::from_toml(&text).unwrap(), out.path()).unwrap();
        assert!(r2.pass(), "{}", r2.render());
        let (_, n) = r2.values.iter().find(|(k, _)| k == "reconstruct.probes").unwrap();
        assert_eq!(*n, 18.0);
    }

    #[test]
    fn tolerance_override_can_fail_a_check() {
        let (r, _) = run(
            "kind = \"transport\"\n[connection]\npreset = \"magnetic\"\n[path]\nkind = \"circle\"\n[tolerances]\n\"transport.cocycle_residual\" = 0.0\n",
        );
        assert!(!r.pass());
        assert_eq!(r.exit_code(), 1);
        assert_eq!(r.failing()[0].name, "transport.cocycle_residual");
    }

    #[test]
    fn runs_are_deterministic() {
        let text = "kind = \"reconstruct\"\nseed = 3\n[connection]\npreset = \"magnetic\"\n[reconstruct]\ngrid_per_axis = 2\n";
        let (a, da) = run(text);
        let (b, db) = run(text);
        assert_eq!(a.checks, b.checks);
        for f in ["reconstruct.csv", "oracle.csv"] {
            assert_eq!(fs::read(da.path().join(f)).unwrap(), fs::read(db.path().join(f)).unwrap());
        }
    }
}
