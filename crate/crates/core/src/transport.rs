//! Parallel transport along parametrized paths in a chart.
//!
//! Two independent routes compute `F(s, t)`: a fixed-step classical
//! Runge–Kutta solve of `∂ᵤα = A(γ(u), γ′(u))·α`, `α(s) = id`, and the ordered
//! product of exponentials `exp(Δ·A_N)⋯exp(Δ·A_1)` with the most recent factor
//! on the left.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::connection::{evaluate_connection, Chart, ConnectionForm};
use crate::error::{Error, Result};
use crate::matcore::{matrix_exponential, operator_distance, EndMap, GaugeMap};

/// Default number of integrator steps per unit of parameter length.
pub const DEFAULT_STEPS_PER_UNIT: f64 = 2048.0;

const DOMAIN_SLACK: f64 = 1e-12;

type PointFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;
type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Natural cubic spline through equally spaced waypoints.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    domain: (f64, f64),
    waypoints: Vec<Vec<f64>>,
    /// Second derivatives at the knots, per coordinate.
    moments: Vec<Vec<f64>>,
}

impl CubicSpline {
    pub fn new(waypoints: Vec<Vec<f64>>, domain: (f64, f64)) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidInput("a spline needs at least two waypoints".into()));
        }
        let dim = waypoints[0].len();
        if dim == 0 || waypoints.iter().any(|w| w.len() != dim || w.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidInput("waypoints must be finite points of equal dimension".into()));
        }
        let m = waypoints.len() - 1;
        let h = (domain.1 - domain.0) / m as f64;
        let moments = (0..dim)
            .map(|c| {
                let y: Vec<f64> = waypoints.iter().map(|w| w[c]).collect();
                natural_moments(&y, h)
            })
            .collect();
        Ok(Self { domain, waypoints, moments })
    }

    fn locate(&self, u: f64) -> (usize, f64, f64) {
        let m = self.waypoints.len() - 1;
        let h = (self.domain.1 - self.domain.0) / m as f64;
        let s = ((u - self.domain.0) / h).clamp(0.0, m as f64);
        let i = (s.floor() as usize).min(m - 1);
        (i, s - i as f64, h)
    }

    fn point(&self, u: f64) -> Vec<f64> {
        let (i, t, h) = self.locate(u);
        (0..self.moments.len())
            .map(|c| {
                let (y0, y1) = (self.waypoints[i][c], self.waypoints[i + 1][c]);
                let (m0, m1) = (self.moments[c][i], self.moments[c][i + 1]);
                let a = 1.0 - t;
                a * y0 + t * y1 + h * h / 6.0 * ((a * a * a - a) * m0 + (t * t * t - t) * m1)
            })
            .collect()
    }

    fn velocity(&self, u: f64) -> Vec<f64> {
        let (i, t, h) = self.locate(u);
        (0..self.moments.len())
            .map(|c| {
                let (y0, y1) = (self.waypoints[i][c], self.waypoints[i + 1][c]);
                let (m0, m1) = (self.moments[c][i], self.moments[c][i + 1]);
                let a = 1.0 - t;
                (y1 - y0) / h + h / 6.0 * (-(3.0 * a * a - 1.0) * m0 + (3.0 * t * t - 1.0) * m1)
            })
            .collect()
    }
}

/// Second derivatives of the natural cubic spline through `y` with knot
/// spacing `h` (Thomas algorithm on the standard tridiagonal system).
fn natural_moments(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let k = n - 2;
    let mut diag = vec![4.0; k];
    let mut rhs: Vec<f64> = (1..n - 1)
        .map(|i| 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h))
        .collect();
    for i in 1..k {
        let w = 1.0 / diag[i - 1];
        diag[i] -= w;
        rhs[i] -= w * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for i in (0..k - 1).rev() {
        m[i + 1] = (rhs[i] - m[i + 2]) / diag[i];
    }
    m
}

/// A monotone reparametrization `φ` of a path's parameter interval onto itself.
#[derive(Clone)]
pub enum Reparametrization {
    Identity,
    /// `φ(u) = a + (b − a)·sᵏ` with `s = (u − a)/(b − a)`.
    Power(f64),
    /// `s ↦ λ·s + (1 − λ)·bump(s)`; constant near both ends when `λ = 0`.
    Sitting(f64),
    Custom { map: Arc<ScalarFn>, derivative: Arc<ScalarFn> },
}

impl fmt::Debug for Reparametrization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::Power(k) => write!(f, "Power({k})"),
            Self::Sitting(l) => write!(f, "Sitting({l})"),
            Self::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// `exp(−1/s)` for `s > 0`, else 0, and its derivative.
fn flat_exp(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0)
    } else {
        let f = (-1.0 / s).exp();
        (f, f / (s * s))
    }
}

/// Smooth step: 0 on `[0, 1/3]`, 1 on `[2/3, 1]`, strictly increasing between.
pub fn bump(x: f64) -> (f64, f64) {
    let (f1, d1) = flat_exp(3.0 * x - 1.0);
    let (f2, d2) = flat_exp(2.0 - 3.0 * x);
    let den = f1 + f2;
    (f1 / den, 3.0 * (d1 * f2 + f1 * d2) / (den * den))
}

impl Reparametrization {
    /// `(φ(u), φ′(u))` on the domain `(a, b)`.
    fn eval(&self, (a, b): (f64, f64), u: f64) -> (f64, f64) {
        let len = b - a;
        let s = ((u - a) / len).clamp(0.0, 1.0);
        match self {
            Self::Identity => (u, 1.0),
            Self::Power(k) => (a + len * s.powf(*k), k * s.powf(k - 1.0)),
            Self::Sitting(l) => {
                let (bv, bd) = bump(s);
                (a + len * (l * s + (1.0 - l) * bv), l + (1.0 - l) * bd)
            }
            Self::Custom { map, derivative } => (map(u), derivative(u)),
        }
    }
}

enum PathKind {
    Constant(Vec<f64>),
    Affine { start: Vec<f64>, velocity: Vec<f64> },
    CircleArc { center: Vec<f64>, radius: f64, e1: Vec<f64>, e2: Vec<f64> },
    Spline(CubicSpline),
    Reparametrized { base: Path, map: Reparametrization },
    Custom { point: Arc<PointFn>, velocity: Arc<PointFn> },
}

/// A C¹ curve `γ: [a, b] → ℝⁿ` with nondecreasing cut values `t₀ ≤ … ≤ t_k`.
/// Evaluation uses the carrier `[t₀, t_k]`.
#[derive(Clone)]
pub struct Path {
    chart: Chart,
    domain: (f64, f64),
    cuts: Vec<f64>,
    kind: Arc<PathKind>,
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &*self.kind {
            PathKind::Constant(_) => "constant",
            PathKind::Affine { .. } => "affine",
            PathKind::CircleArc { .. } => "circle-arc",
            PathKind::Spline(_) => "spline",
            PathKind::Reparametrized { .. } => "reparametrized",
            PathKind::Custom { .. } => "custom",
        };
        f.debug_struct("Path")
            .field("kind", &kind)
            .field("dim", &self.chart.dim)
            .field("domain", &self.domain)
            .field("cuts", &self.cuts)
            .finish()
    }
}

fn check_domain(domain: (f64, f64)) -> Result<()> {
    if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 <= domain.1) {
        return Err(Error::InvalidInput(format!("bad parameter domain {domain:?}")));
    }
    Ok(())
}

impl Path {
    fn build(dim: usize, domain: (f64, f64), kind: PathKind) -> Result<Self> {
        check_domain(domain)?;
        Ok(Self { chart: Chart::new(dim)?, domain, cuts: vec![domain.0, domain.1], kind: Arc::new(kind) })
    }

    pub fn constant(point: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        Self::build(point.len(), domain, PathKind::Constant(point))
    }

    /// `γ(u) = start + u·velocity`.
    pub fn affine(start: Vec<f64>, velocity: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        if start.len() != velocity.len() {
            return Err(Error::InvalidInput("start and velocity differ in dimension".into()));
        }
        Self::build(start.len(), domain, PathKind::Affine { start, velocity })
    }

    /// Straight segment from `p` to `q` over `[0, 1]`.
    pub fn segment(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let v = q.iter().zip(&p).map(|(b, a)| b - a).collect();
        Self::affine(p, v, (0.0, 1.0))
    }

    /// `γ(u) = center + radius·(cos u·e1 + sin u·e2)`.
    pub fn circle_arc(center: Vec<f64>, radius: f64, e1: Vec<f64>, e2: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        let n = center.len();
        if e1.len() != n || e2.len() != n || !radius.is_finite() {
            return Err(Error::InvalidInput("circle arc axes must match the center".into()));
        }
        Self::build(n, domain, PathKind::CircleArc { center, radius, e1, e2 })
    }

    /// Planar arc about `center` in the first two coordinates of `ℝ²`.
    pub fn planar_arc(center: [f64; 2], radius: f64, domain: (f64, f64)) -> Result<Self> {
        Self::circle_arc(center.to_vec(), radius, vec![1.0, 0.0], vec![0.0, 1.0], domain)
    }

    /// The colatitude-`θ` circle of the unit sphere in the stereographic chart
    /// centred at the pole: radius `tan(θ/2)`, one counterclockwise turn.
    pub fn colatitude_loop(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(Error::InvalidInput("colatitude must lie in (0, π)".into()));
        }
        Self::planar_arc([0.0, 0.0], (0.5 * theta).tan(), (0.0, std::f64::consts::TAU))
    }

    pub fn spline(waypoints: Vec<Vec<f64>>, domain: (f64, f64)) -> Result<Self> {
        check_domain(domain)?;
        if domain.0 == domain.1 {
            return Err(Error::InvalidInput("spline needs a nondegenerate domain".into()));
        }
        let s = CubicSpline::new(waypoints, domain)?;
        let dim = s.waypoints[0].len();
        Self::build(dim, domain, PathKind::Spline(s))
    }

    /// A path from closures for position and velocity.
    pub fn from_fn<P, V>(dim: usize, domain: (f64, f64), point: P, velocity: V) -> Result<Self>
    where
        P: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        V: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::build(dim, domain, PathKind::Custom { point: Arc::new(point), velocity: Arc::new(velocity) })
    }

    pub fn with_cuts(mut self, cuts: Vec<f64>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(Error::InvalidInput("a path needs at least one cut".into()));
        }
        if cuts.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidInput("cuts must be nondecreasing".into()));
        }
        if cuts.iter().any(|&c| !self.in_domain(c)) {
            return Err(Error::InvalidInput("cuts must lie in the parameter domain".into()));
        }
        self.cuts = cuts;
        Ok(self)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// `[t₀, t_k]`.
    pub fn carrier(&self) -> (f64, f64) {
        (self.cuts[0], self.cuts[self.cuts.len() - 1])
    }

    fn in_domain(&self, u: f64) -> bool {
        let slack = DOMAIN_SLACK * (1.0 + self.domain.0.abs().max(self.domain.1.abs()));
        u >= self.domain.0 - slack && u <= self.domain.1 + slack
    }

    pub fn point(&self, u: f64) -> Vec<f64> {
        match &*self.kind {
            PathKind::Constant(p) => p.clone(),
            PathKind::Affine { start, velocity } => {
                start.iter().zip(velocity).map(|(p, v)| p + u * v).collect()
            }
            PathKind::CircleArc { center, radius, e1, e2 } => {
                let (s, c) = u.sin_cos();
                (0..center.len()).map(|i| center[i] + radius * (c * e1[i] + s * e2[i])).collect()
            }
            PathKind::Spline(s) => s.point(u),
            PathKind::Reparametrized { base, map } => base.point(map.eval(self.domain, u).0),
            PathKind::Custom { point, .. } => point(u),
        }
    }

    pub fn velocity(&self, u: f64) -> Vec<f64> {
        match &*self.kind {
            PathKind::Constant(p) => vec![0.0; p.len()],
            PathKind::Affine { velocity, .. } => velocity.clone(),
            PathKind::CircleArc { center, radius, e1, e2 } => {
                let (s, c) = u.sin_cos();
                (0..center.len()).map(|i| radius * (-s * e1[i] + c * e2[i])).collect()
            }
            PathKind::Spline(s) => s.velocity(u),
            PathKind::Reparametrized { base, map } => {
                let (phi, dphi) = map.eval(self.domain, u);
                base.velocity(phi).into_iter().map(|v| v * dphi).collect()
            }
            PathKind::Custom { velocity, .. } => velocity(u),
        }
    }
}

/// `γ∘φ`, with cuts pulled back through `φ⁻¹`.
///
/// `φ` must fix both ends of the domain and be nondecreasing, so it may sit
/// still on subintervals (sitting instances) or have `φ′ = 0` at points.
pub fn reparametrize(path: &Path, map: Reparametrization) -> Result<Path> {
    let (a, b) = path.domain;
    let tol = 1e-12 * (1.0 + a.abs().max(b.abs()));
    let (fa, _) = map.eval((a, b), a);
    let (fb, _) = map.eval((a, b), b);
    if (fa - a).abs() > tol || (fb - b).abs() > tol {
        return Err(Error::InvalidReparametrization(format!(
            "map sends [{a}, {b}] to [{fa}, {fb}] instead of onto itself"
        )));
    }
    if b > a {
        let samples = 512;
        let mut prev = fa;
        for k in 1..=samples {
            let u = a + (b - a) * k as f64 / samples as f64;
            let (phi, dphi) = map.eval((a, b), u);
            if !phi.is_finite() || !dphi.is_finite() || dphi < 0.0 || phi < prev {
                return Err(Error::InvalidReparametrization(format!(
                    "map is not orientation preserving near u = {u}"
                )));
            }
            prev = phi;
        }
    }
    Ok(pulled_back(path, map))
}

/// `γ∘Γ(·, λ)` with `Γ(x, λ) = λx + (1 − λ)·bump(x)`; for `λ = 0` the path sits
/// still on the first and last thirds of its domain.
pub fn with_sitting_instances(path: &Path, blend: f64) -> Result<Path> {
    if !(0.0..=1.0).contains(&blend) {
        return Err(Error::InvalidReparametrization("blend must lie in [0, 1]".into()));
    }
    Ok(pulled_back(path, Reparametrization::Sitting(blend)))
}

fn pulled_back(path: &Path, map: Reparametrization) -> Path {
    let domain = path.domain;
    let cuts = path.cuts.iter().map(|&c| preimage(&map, domain, c)).collect();
    Path {
        chart: path.chart.clone(),
        domain,
        cuts,
        kind: Arc::new(PathKind::Reparametrized { base: path.clone(), map }),
    }
}

/// Smallest `u` with `φ(u) ≥ target` (bisection; `φ` nondecreasing).
fn preimage(map: &Reparametrization, (a, b): (f64, f64), target: f64) -> f64 {
    if target <= a {
        return a;
    }
    if target >= b {
        return b;
    }
    let (mut lo, mut hi) = (a, b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if map.eval((a, b), mid).0 < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ode,
    Product,
}

/// Sample point of each subinterval in the product formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProductRule {
    #[default]
    Left,
    Midpoint,
}

impl ProductRule {
    pub fn order(self) -> i32 {
        match self {
            Self::Left => 1,
            Self::Midpoint => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransportResult {
    pub map: GaugeMap,
    pub method: Method,
    pub steps: usize,
    /// Step-halving estimate of the truncation error; `None` for a single step.
    pub error_estimate: Option<f64>,
}

fn check_inputs(a: &ConnectionForm, path: &Path, s: f64, t: f64, steps: usize) -> Result<()> {
    if a.chart().dim != path.dim() {
        return Err(Error::InvalidInput(format!(
            "path lives in R^{} but the connection in R^{}",
            path.dim(),
            a.chart().dim
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("step count must be at least 1".into()));
    }
    if !path.in_domain(s) || !path.in_domain(t) {
        return Err(Error::InvalidInput(format!(
            "interval [{s}, {t}] leaves the path domain {:?}",
            path.domain
        )));
    }
    Ok(())
}

/// `A(γ(u), γ′(u))`; evaluation failures are reported as evaluation errors.
pub(crate) fn generator(a: &ConnectionForm, path: &Path, u: f64) -> Result<EndMap> {
    evaluate_connection(a, &path.point(u), &path.velocity(u)).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::Evaluation(msg),
        other => other,
    })
}

fn rk4(a: &ConnectionForm, path: &Path, s: f64, t: f64, steps: usize) -> Result<EndMap> {
    let d = a.fiber_dim();
    let mut alpha = EndMap::identity(d);
    if s == t {
        return Ok(alpha);
    }
    let h = (t - s) / steps as f64;
    let mut m0 = generator(a, path, s)?;
    for k in 0..steps {
        let u = s + k as f64 * h;
        let u1 = if k + 1 == steps { t } else { u + h };
        let mh = generator(a, path, u + 0.5 * h)?;
        let m1 = generator(a, path, u1)?;
        let k1 = m0.compose(&alpha)?;
        let mut y = alpha.clone();
        y.axpy(0.5 * h, &k1);
        let k2 = mh.compose(&y)?;
        let mut y = alpha.clone();
        y.axpy(0.5 * h, &k2);
        let k3 = mh.compose(&y)?;
        let mut y = alpha.clone();
        y.axpy(h, &k3);
        let k4 = m1.compose(&y)?;
        alpha.axpy(h / 6.0, &k1);
        alpha.axpy(h / 3.0, &k2);
        alpha.axpy(h / 3.0, &k3);
        alpha.axpy(h / 6.0, &k4);
        m0 = m1;
    }
    if !alpha.is_finite() {
        return Err(Error::Evaluation("transport diverged".into()));
    }
    Ok(alpha)
}

fn product(a: &ConnectionForm, path: &Path, s: f64, t: f64, n: usize, rule: ProductRule) -> Result<EndMap> {
    let d = a.fiber_dim();
    let mut acc = EndMap::identity(d);
    if s == t {
        return Ok(acc);
    }
    let delta = (t - s) / n as f64;
    let offset = match rule {
        ProductRule::Left => 0.0,
        ProductRule::Midpoint => 0.5,
    };
    for i in 0..n {
        let u = s + (i as f64 + offset) * delta;
        let e = matrix_exponential(&generator(a, path, u)?.scale(delta))?;
        acc = e.compose(&acc)?;
    }
    Ok(acc)
}

fn into_gauge(m: EndMap) -> Result<GaugeMap> {
    GaugeMap::new(m).map_err(|e| Error::Evaluation(format!("transport is not invertible: {e}")))
}

/// Fixed-step RK4 transport `F(s, t)`. For `s > t` this integrates backwards
/// and returns the orientation-reversed transport.
pub fn transport_ode(a: &ConnectionForm, path: &Path, s: f64, t: f64, steps: usize) -> Result<TransportResult> {
    check_inputs(a, path, s, t, steps)?;
    let fine = rk4(a, path, s, t, steps)?;
    let error_estimate = if steps >= 2 && s != t {
        let coarse = rk4(a, path, s, t, steps / 2)?;
        Some(operator_distance(&fine, &coarse)? / 15.0)
    } else if s == t {
        Some(0.0)
    } else {
        None
    };
    Ok(TransportResult { map: into_gauge(fine)?, method: Method::Ode, steps, error_estimate })
}

/// Ordered product `∏ exp(Δ·A(γ(uᵢ), γ′(uᵢ)))`, latest factor leftmost.
pub fn transport_product(
    a: &ConnectionForm,
    path: &Path,
    s: f64,
    t: f64,
    n: usize,
    rule: ProductRule,
) -> Result<TransportResult> {
    check_inputs(a, path, s, t, n)?;
    let fine = product(a, path, s, t, n, rule)?;
    let error_estimate = if n >= 2 && s != t {
        let coarse = product(a, path, s, t, n / 2, rule)?;
        let ratio = f64::from(1 << rule.order()) - 1.0;
        Some(operator_distance(&fine, &coarse)? / ratio)
    } else if s == t {
        Some(0.0)
    } else {
        None
    };
    Ok(TransportResult { map: into_gauge(fine)?, method: Method::Product, steps: n, error_estimate })
}

/// Integrator resolution expressed as a step density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDensity(pub f64);

impl Default for StepDensity {
    fn default() -> Self {
        Self(DEFAULT_STEPS_PER_UNIT)
    }
}

impl StepDensity {
    /// Density matching a maximum step size `h`.
    pub fn from_step(h: f64) -> Self {
        Self(1.0 / h)
    }

    pub fn steps_for(self, s: f64, t: f64) -> usize {
        ((t - s).abs() * self.0).ceil().max(1.0) as usize
    }
}

/// RK4 transport without the step-halving estimate, at a given step density.
pub fn transport_map(a: &ConnectionForm, path: &Path, s: f64, t: f64, density: StepDensity) -> Result<GaugeMap> {
    transport_map_steps(a, path, s, t, density.steps_for(s, t))
}

/// RK4 transport with an explicit step count, without the error estimate.
pub fn transport_map_steps(a: &ConnectionForm, path: &Path, s: f64, t: f64, steps: usize) -> Result<GaugeMap> {
    check_inputs(a, path, s, t, steps)?;
    into_gauge(rk4(a, path, s, t, steps)?)
}

/// Transport over the carrier, composed segment by segment along the cuts:
/// `F(t_{k−1}, t_k)∘⋯∘F(t₀, t₁)`.
pub fn transport_along(a: &ConnectionForm, path: &Path, density: StepDensity) -> Result<GaugeMap> {
    let mut acc = EndMap::identity(a.fiber_dim());
    for w in path.cuts.windows(2) {
        let f = transport_map(a, path, w[0], w[1], density)?;
        acc = f.compose(&acc)?;
    }
    into_gauge(acc)
}

/// `‖F(y, z)·F(x, y) − F(x, z)‖` with RK4 at maximum step size `step`.
pub fn cocycle_residual(a: &ConnectionForm, path: &Path, x: f64, y: f64, z: f64, step: f64) -> Result<f64> {
    if !(x <= y && y <= z) {
        return Err(Error::InvalidInput(format!("need x <= y <= z, got ({x}, {y}, {z})")));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let density = StepDensity::from_step(step);
    let fxy = transport_map(a, path, x, y, density)?;
    let fyz = transport_map(a, path, y, z, density)?;
    let fxz = transport_map(a, path, x, z, density)?;
    operator_distance(&fyz.compose(&fxy)?, &fxz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::PolynomialTerm;
    use crate::matcore::matrix_inverse;

    fn x_gen() -> EndMap {
        EndMap::from_rows(&[vec![0.3, -1.1], vec![0.8, -0.2]]).unwrap()
    }

    #[test]
    fn zero_connection_transports_identity() {
        let a = ConnectionForm::zero(Chart::new(2).unwrap(), 3).unwrap();
        let p = Path::planar_arc([0.5, 0.0], 2.0, (0.0, 3.0)).unwrap();
        let f = transport_ode(&a, &p, 0.0, 3.0, 64).unwrap();
        assert_eq!(*f.map.as_end(), EndMap::identity(3));
        let f = transport_product(&a, &p, 0.0, 3.0, 64, ProductRule::Midpoint).unwrap();
        assert_eq!(*f.map.as_end(), EndMap::identity(3));
    }

    #[test]
    fn scalar_dt_gives_e() {
        let a = ConnectionForm::constant(Chart::new(1).unwrap(), vec![EndMap::identity(1)]).unwrap();
        let p = Path::affine(vec![0.0], vec![1.0], (0.0, 1.0)).unwrap();
        let f = transport_ode(&a, &p, 0.0, 1.0, 2048).unwrap();
        assert!((f.map.get(0, 0).re - std::f64::consts::E).abs() < 1e-13);
        assert!(f.error_estimate.unwrap() < 1e-13);
    }

    #[test]
    fn constant_matrix_matches_exponential() {
        let a = ConnectionForm::constant(Chart::new(1).unwrap(), vec![x_gen()]).unwrap();
        let p = Path::affine(vec![0.0], vec![1.0], (-1.0, 2.0)).unwrap();
        let expected = matrix_exponential(&x_gen().scale(1.7)).unwrap();
        let f = transport_ode(&a, &p, -0.5, 1.2, 1000).unwrap();
        assert!(operator_distance(&f.map, &expected).unwrap() < 1e-12);
        for n in [1, 3, 17] {
            let g = transport_product(&a, &p, -0.5, 1.2, n, ProductRule::Left).unwrap();
            assert!(operator_distance(&g.map, &expected).unwrap() < 1e-13);
        }
    }

    #[test]
    fn product_midpoint_scalar_quadrature() {
        // A = t dt on [0, 1]: exp of the midpoint sum, which is exact for linear
        // integrands, so compare the left rule error against the closed form.
        let terms = vec![PolynomialTerm { component: 0, exponents: vec![1], coefficient: EndMap::identity(1) }];
        let a = ConnectionForm::polynomial(Chart::new(1).unwrap(), 1, terms).unwrap();
        let p = Path::affine(vec![0.0], vec![1.0], (0.0, 1.0)).unwrap();
        let exact = 0.5f64.exp();
        let mid = transport_product(&a, &p, 0.0, 1.0, 100, ProductRule::Midpoint).unwrap();
        assert!((mid.map.get(0, 0).re - exact).abs() < 1e-14);
        // left Riemann sum of t on N cells is 1/2 - 1/(2N)
        for n in [10, 100] {
            let left = transport_product(&a, &p, 0.0, 1.0, n, ProductRule::Left).unwrap();
            let oracle = (0.5 - 0.5 / n as f64).exp();
            assert!((left.map.get(0, 0).re - oracle).abs() < 1e-13);
        }
    }

    #[test]
    fn identical_endpoints_give_identity_exactly() {
        let a = ConnectionForm::magnetic(2.0).unwrap();
        let p = Path::planar_arc([0.3, 0.1], 1.0, (0.0, 1.0)).unwrap();
        let f = transport_ode(&a, &p, 0.4, 0.4, 10).unwrap();
        assert_eq!(*f.map.as_end(), EndMap::identity(1));
        assert_eq!(cocycle_residual(&a, &p, 0.2, 0.2, 0.2, 1e-3).unwrap(), 0.0);
        assert!(cocycle_residual(&a, &p, 0.2, 0.2, 0.9, 1e-3).unwrap() <= 1e-12);
    }

    #[test]
    fn backwards_interval_inverts() {
        let a = ConnectionForm::levi_civita_sphere();
        let p = Path::spline(vec![vec![0.0, 0.0], vec![0.5, 0.3], vec![0.2, 1.0], vec![-0.4, 0.6]], (0.0, 1.0)).unwrap();
        let fwd = transport_ode(&a, &p, 0.1, 0.9, 2048).unwrap();
        let back = transport_ode(&a, &p, 0.9, 0.1, 2048).unwrap();
        let inv = matrix_inverse(&fwd.map).unwrap();
        assert!(operator_distance(&back.map, &inv).unwrap() < 1e-10);
    }

    #[test]
    fn cocycle_on_magnetic_arc() {
        let a = ConnectionForm::magnetic(1.0).unwrap();
        let p = Path::planar_arc([0.4, -0.2], 1.3, (0.0, 1.0)).unwrap();
        assert!(cocycle_residual(&a, &p, 0.0, 0.5, 1.0, 1e-3).unwrap() < 1e-8);
        assert!(cocycle_residual(&a, &p, 0.5, 0.2, 1.0, 1e-3).is_err());
    }

    #[test]
    fn spline_velocity_is_analytic_derivative() {
        let p = Path::spline(vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![1.5, 2.0], vec![3.0, 2.0]], (0.0, 2.0)).unwrap();
        for &u in &[0.1, 0.66, 1.0, 1.37, 1.9] {
            let h = 1e-6;
            let (pp, pm) = (p.point(u + h), p.point(u - h));
            let v = p.velocity(u);
            for c in 0..2 {
                assert!(((pp[c] - pm[c]) / (2.0 * h) - v[c]).abs() < 1e-8);
            }
        }
        assert_eq!(p.point(0.0), vec![0.0, 1.0]);
        assert!((p.point(2.0)[0] - 3.0).abs() < 1e-14);
        assert!((p.point(2.0 / 3.0)[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn reparametrization_rules() {
        let p = Path::planar_arc([0.0, 0.0], 1.0, (0.0, 1.0)).unwrap().with_cuts(vec![0.0, 0.25, 1.0]).unwrap();
        let same = reparametrize(&p, Reparametrization::Identity).unwrap();
        assert_eq!(same.point(0.3), p.point(0.3));
        let sq = reparametrize(&p, Reparametrization::Power(2.0)).unwrap();
        assert!((sq.cuts()[1] - 0.5).abs() < 1e-12);
        let bad = Reparametrization::Custom { map: Arc::new(|u| 1.0 - u), derivative: Arc::new(|_| -1.0) };
        assert!(matches!(reparametrize(&p, bad), Err(Error::InvalidReparametrization(_))));
        let wiggle = Reparametrization::Custom {
            map: Arc::new(|u| u + 0.2 * (std::f64::consts::TAU * u).sin()),
            derivative: Arc::new(|u| 1.0 + 0.2 * std::f64::consts::TAU * (std::f64::consts::TAU * u).cos()),
        };
        assert!(reparametrize(&p, wiggle).is_err());
        let sit = reparametrize(&p, Reparametrization::Sitting(0.0)).unwrap();
        assert_eq!(sit.point(0.1), p.point(0.0));
    }

    #[test]
    fn bump_is_smooth_step() {
        assert_eq!(bump(0.2), (0.0, 0.0));
        assert_eq!(bump(0.9), (1.0, 0.0));
        let (b, db) = bump(0.5);
        assert!((b - 0.5).abs() < 1e-15 && db > 0.0);
        let h = 1e-6;
        for &x in &[0.4, 0.45, 0.61] {
            let fd = (bump(x + h).0 - bump(x - h).0) / (2.0 * h);
            assert!((fd - bump(x).1).abs() < 1e-6);
        }
    }

    #[test]
    fn mismatched_chart_rejected() {
        let a = ConnectionForm::magnetic(1.0).unwrap();
        let p = Path::affine(vec![0.0], vec![1.0], (0.0, 1.0)).unwrap();
        assert!(matches!(transport_ode(&a, &p, 0.0, 1.0, 4), Err(Error::InvalidInput(_))));
        let p = Path::planar_arc([0.0, 0.0], 1.0, (0.0, 1.0)).unwrap();
        assert!(transport_ode(&a, &p, 0.0, 2.0, 4).is_err());
        assert!(transport_ode(&a, &p, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn non_finite_connection_is_an_evaluation_error() {
        let a = ConnectionForm::from_fn(Chart::new(1).unwrap(), 1, crate::matcore::Field::Real, |p: &[f64]| {
            if p[0] > 0.5 {
                Err(Error::Evaluation("blow-up".into()))
            } else {
                Ok(vec![EndMap::zeros(1)])
            }
        })
        .unwrap();
        let p = Path::affine(vec![0.0], vec![1.0], (0.0, 1.0)).unwrap();
        assert!(matches!(transport_ode(&a, &p, 0.0, 1.0, 8), Err(Error::Evaluation(_))));
    }
}
