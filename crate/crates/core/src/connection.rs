//! `End(V)`-valued connection 1-forms on charts `ℝⁿ`, gauge fields, and the
//! gauge action on connections.
//!
//! Sign convention: transport solves `∂ₜα = A(γ′)·α`, so a change of frame by
//! `g` acts as `A′ = g·A·g⁻¹ + (dg)·g⁻¹`. With this convention
//! `g(y)·F_A(x, y) = F_{A′}(x, y)·g(x)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{matrix_exponential, matrix_inverse, EndMap, Field, GaugeMap, Scalar};

/// Default central-difference step for gauge derivatives.
pub const GAUGE_FD_STEP: f64 = 1e-5;

const CHART_SLACK: f64 = 1e-9;

/// A Cartesian chart `ℝⁿ`, optionally with a bounding box used for sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Chart {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("chart dimension must be at least 1".into()));
        }
        Ok(Self { dim, bounds: None })
    }

    pub fn with_bounds(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidInput("chart dimension must be at least 1".into()));
        }
        if bounds.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::InvalidInput("chart bounds must be finite with lo < hi".into()));
        }
        Ok(Self { dim: bounds.len(), bounds: Some(bounds) })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        if p.len() != self.dim || p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match &self.bounds {
            None => true,
            Some(b) => b.iter().zip(p).all(|(&(lo, hi), &x)| {
                let slack = CHART_SLACK * (hi - lo).max(1.0);
                x >= lo - slack && x <= hi + slack
            }),
        }
    }

    pub(crate) fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, chart has dimension {}",
                p.len(),
                self.dim
            )));
        }
        if !self.contains(p) {
            return Err(Error::InvalidInput(format!("point {p:?} is outside the chart")));
        }
        Ok(())
    }

    /// A small deterministic set of points used to validate fields at
    /// construction time: the box corners, face centres and centre, or a
    /// unit-scale cloud around the origin for unbounded charts.
    pub(crate) fn probe_points(&self) -> Vec<Vec<f64>> {
        let levels: Vec<Vec<f64>> = match &self.bounds {
            Some(b) => b.iter().map(|&(lo, hi)| vec![lo, 0.5 * (lo + hi), hi]).collect(),
            None => (0..self.dim).map(|_| vec![-1.0, 0.0, 1.0]).collect(),
        };
        let dim = self.dim.min(4);
        let mut out = vec![Vec::new()];
        for axis in levels.iter().take(dim) {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&x| {
                        let mut q = prefix.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        let centre: Vec<f64> = levels.iter().map(|l| l[1]).collect();
        for q in &mut out {
            q.extend_from_slice(&centre[q.len()..]);
        }
        out
    }
}

/// One monomial term `coefficient · ∏ pⱼ^exponentⱼ` of the `component`-th
/// coefficient field `A_component`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialTerm {
    pub component: usize,
    pub exponents: Vec<u32>,
    pub coefficient: EndMap,
}

/// Sampled coefficient fields on a rectilinear grid. Nodes are stored in
/// row-major order over the axes (last axis fastest); each node holds one
/// matrix per chart coordinate.
#[derive(Debug, Clone)]
pub struct SampledField {
    axes: Vec<Vec<f64>>,
    nodes: Vec<Vec<EndMap>>,
}

impl SampledField {
    pub fn new(axes: Vec<Vec<f64>>, nodes: Vec<Vec<EndMap>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidInput("sampled field needs at least one axis".into()));
        }
        for axis in &axes {
            if axis.len() < 2 || axis.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidInput(
                    "grid axes need at least two strictly increasing nodes".into(),
                ));
            }
        }
        let count: usize = axes.iter().map(Vec::len).product();
        if nodes.len() != count {
            return Err(Error::InvalidInput(format!(
                "expected {count} grid nodes, got {}",
                nodes.len()
            )));
        }
        let n = axes.len();
        let d = nodes[0].first().map(EndMap::dim).unwrap_or(0);
        for node in &nodes {
            if node.len() != n || node.iter().any(|m| m.dim() != d || !m.is_finite()) {
                return Err(Error::InvalidInput(
                    "every grid node needs one finite d x d matrix per axis".into(),
                ));
            }
        }
        Ok(Self { axes, nodes })
    }

    /// Tabulates `f` on the given grid.
    pub fn tabulate(
        axes: Vec<Vec<f64>>,
        f: impl Fn(&[f64]) -> Result<Vec<EndMap>>,
    ) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut index = vec![0usize; axes.len()];
        loop {
            let p: Vec<f64> = index.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
            nodes.push(f(&p)?);
            let mut k = axes.len();
            loop {
                if k == 0 {
                    return Self::new(axes, nodes);
                }
                k -= 1;
                index[k] += 1;
                if index[k] < axes[k].len() {
                    break;
                }
                index[k] = 0;
            }
        }
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a[0], a[a.len() - 1])).collect()
    }

    fn fiber_dim(&self) -> usize {
        self.nodes[0][0].dim()
    }

    fn field(&self) -> Field {
        self.nodes
            .iter()
            .flatten()
            .fold(Field::Real, |f, m| f.join(m.field()))
    }

    fn interpolate(&self, p: &[f64]) -> Vec<EndMap> {
        let weights: Vec<Vec<(usize, f64)>> = self
            .axes
            .iter()
            .zip(p)
            .map(|(axis, &x)| hermite_weights(axis, x))
            .collect();
        let strides: Vec<usize> = {
            let mut s = vec![1usize; self.axes.len()];
            for k in (0..self.axes.len().saturating_sub(1)).rev() {
                s[k] = s[k + 1] * self.axes[k + 1].len();
            }
            s
        };
        let n = self.axes.len();
        let d = self.fiber_dim();
        let field = self.field();
        let mut acc = vec![DMatrix::<Scalar>::zeros(d, d); n];
        let mut combo = vec![0usize; n];
        loop {
            let mut w = 1.0;
            let mut flat = 0;
            for k in 0..n {
                let (idx, wk) = weights[k][combo[k]];
                w *= wk;
                flat += idx * strides[k];
            }
            if w != 0.0 {
                for (a, m) in acc.iter_mut().zip(&self.nodes[flat]) {
                    *a += m.matrix() * Scalar::new(w, 0.0);
                }
            }
            let mut k = n;
            loop {
                if k == 0 {
                    return acc.into_iter().map(|m| EndMap::from_parts(field, m)).collect();
                }
                k -= 1;
                combo[k] += 1;
                if combo[k] < weights[k].len() {
                    break;
                }
                combo[k] = 0;
            }
        }
    }
}

/// Node weights of the C¹ cubic Hermite interpolant with finite-difference
/// slopes, evaluated at `x` (clamped into the axis range).
fn hermite_weights(axis: &[f64], x: f64) -> Vec<(usize, f64)> {
    let last = axis.len() - 1;
    let x = x.clamp(axis[0], axis[last]);
    let i = match axis.partition_point(|&a| a <= x) {
        0 => 0,
        k => (k - 1).min(last - 1),
    };
    let h = axis[i + 1] - axis[i];
    let t = (x - axis[i]) / h;
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;

    // slope at node j as weights over node values
    let slope = |j: usize| -> [(usize, f64); 2] {
        let (lo, hi) = if j == 0 {
            (0, 1)
        } else if j == last {
            (last - 1, last)
        } else {
            (j - 1, j + 1)
        };
        let span = axis[hi] - axis[lo];
        [(hi, 1.0 / span), (lo, -1.0 / span)]
    };
    let mut w: Vec<(usize, f64)> = vec![(i, h00), (i + 1, h01)];
    for (idx, c) in slope(i) {
        w.push((idx, h10 * h * c));
    }
    for (idx, c) in slope(i + 1) {
        w.push((idx, h11 * h * c));
    }
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(4);
    for (idx, c) in w {
        match merged.iter_mut().find(|(j, _)| *j == idx) {
            Some(e) => e.1 += c,
            None => merged.push((idx, c)),
        }
    }
    merged
}

type ComponentFn = dyn Fn(&[f64]) -> Result<Vec<EndMap>> + Send + Sync;

enum ConnectionKind {
    Zero,
    Constant(Vec<EndMap>),
    Magnetic { strength: f64 },
    LeviCivitaSphere,
    Polynomial(Vec<PolynomialTerm>),
    Sampled(SampledField),
    Gauged { base: ConnectionForm, gauge: GaugeField },
    Custom(Arc<ComponentFn>),
}

/// An `End(V)`-valued 1-form `A = Σᵢ Aᵢ(p) dxⁱ` on a chart.
#[derive(Clone)]
pub struct ConnectionForm {
    chart: Chart,
    fiber_dim: usize,
    field: Field,
    kind: Arc<ConnectionKind>,
}

impl fmt::Debug for ConnectionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConnectionForm")
            .field("chart", &self.chart)
            .field("fiber_dim", &self.fiber_dim)
            .field("kind", &self.kind_name())
            .finish()
    }
}

impl ConnectionForm {
    pub fn zero(chart: Chart, fiber_dim: usize) -> Result<Self> {
        if fiber_dim == 0 {
            return Err(Error::InvalidInput("fiber dimension must be at least 1".into()));
        }
        Ok(Self { chart, fiber_dim, field: Field::Real, kind: Arc::new(ConnectionKind::Zero) })
    }

    /// Constant coefficients `Aᵢ(p) = components[i]`.
    pub fn constant(chart: Chart, components: Vec<EndMap>) -> Result<Self> {
        let fiber_dim = check_components(&chart, &components)?;
        let field = components.iter().fold(Field::Real, |f, m| f.join(m.field()));
        Ok(Self { chart, fiber_dim, field, kind: Arc::new(ConnectionKind::Constant(components)) })
    }

    /// Scalar form `strength · (x dy − y dx)` on `ℝ²`.
    pub fn magnetic(strength: f64) -> Result<Self> {
        if !strength.is_finite() {
            return Err(Error::InvalidInput("magnetic strength must be finite".into()));
        }
        Ok(Self {
            chart: Chart::new(2)?,
            fiber_dim: 1,
            field: Field::Real,
            kind: Arc::new(ConnectionKind::Magnetic { strength }),
        })
    }

    /// Levi-Civita connection of the unit round sphere in a stereographic
    /// chart, acting on tangent-vector components in the coordinate frame.
    pub fn levi_civita_sphere() -> Self {
        Self {
            chart: Chart { dim: 2, bounds: None },
            fiber_dim: 2,
            field: Field::Real,
            kind: Arc::new(ConnectionKind::LeviCivitaSphere),
        }
    }

    pub fn polynomial(chart: Chart, fiber_dim: usize, terms: Vec<PolynomialTerm>) -> Result<Self> {
        if fiber_dim == 0 {
            return Err(Error::InvalidInput("fiber dimension must be at least 1".into()));
        }
        for t in &terms {
            if t.component >= chart.dim || t.exponents.len() != chart.dim {
                return Err(Error::InvalidInput(
                    "polynomial term does not match the chart dimension".into(),
                ));
            }
            if t.coefficient.dim() != fiber_dim {
                return Err(Error::InvalidInput(
                    "polynomial coefficient does not match the fiber dimension".into(),
                ));
            }
        }
        let field = terms.iter().fold(Field::Real, |f, t| f.join(t.coefficient.field()));
        Ok(Self { chart, fiber_dim, field, kind: Arc::new(ConnectionKind::Polynomial(terms)) })
    }

    /// Interpolated coefficients; the chart is the grid's bounding box.
    pub fn sampled(field_data: SampledField) -> Result<Self> {
        let chart = Chart::with_bounds(field_data.bounds())?;
        Ok(Self {
            fiber_dim: field_data.fiber_dim(),
            field: field_data.field(),
            chart,
            kind: Arc::new(ConnectionKind::Sampled(field_data)),
        })
    }

    /// Coefficients given by a closure returning `(A₁(p), …, Aₙ(p))`.
    pub fn from_fn<F>(chart: Chart, fiber_dim: usize, field: Field, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<Vec<EndMap>> + Send + Sync + 'static,
    {
        if fiber_dim == 0 {
            return Err(Error::InvalidInput("fiber dimension must be at least 1".into()));
        }
        Ok(Self { chart, fiber_dim, field, kind: Arc::new(ConnectionKind::Custom(Arc::new(f))) })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn kind_name(&self) -> &'static str {
        match &*self.kind {
            ConnectionKind::Zero => "zero",
            ConnectionKind::Constant(_) => "constant",
            ConnectionKind::Magnetic { .. } => "magnetic",
            ConnectionKind::LeviCivitaSphere => "levi-civita-sphere",
            ConnectionKind::Polynomial(_) => "polynomial",
            ConnectionKind::Sampled(_) => "sampled",
            ConnectionKind::Gauged { .. } => "gauged",
            ConnectionKind::Custom(_) => "custom",
        }
    }

    /// The coefficient matrices `(A₁(p), …, Aₙ(p))`.
    pub fn components(&self, p: &[f64]) -> Result<Vec<EndMap>> {
        self.chart.check_point(p)?;
        let n = self.chart.dim;
        let d = self.fiber_dim;
        let out = match &*self.kind {
            ConnectionKind::Zero => vec![EndMap::zeros(d); n],
            ConnectionKind::Constant(c) => c.clone(),
            ConnectionKind::Magnetic { strength } => vec![
                EndMap::diagonal(&[-strength * p[1]])?,
                EndMap::diagonal(&[strength * p[0]])?,
            ],
            ConnectionKind::LeviCivitaSphere => {
                let (a0, a1) = sphere_christoffel(p);
                vec![a0, a1]
            }
            ConnectionKind::Polynomial(terms) => {
                let mut acc = vec![EndMap::zeros(d); n];
                for t in terms {
                    let mono: f64 =
                        t.exponents.iter().zip(p).map(|(&e, &x)| x.powi(e as i32)).product();
                    acc[t.component].axpy(mono, &t.coefficient);
                }
                acc
            }
            ConnectionKind::Sampled(s) => s.interpolate(p),
            ConnectionKind::Gauged { base, gauge } => gauged_components(base, gauge, p)?,
            ConnectionKind::Custom(f) => {
                let c = f(p)?;
                if c.len() != n || c.iter().any(|m| m.dim() != d) {
                    return Err(Error::Evaluation(
                        "custom connection returned wrongly shaped components".into(),
                    ));
                }
                c
            }
        };
        if out.iter().any(|m| !m.is_finite()) {
            return Err(Error::Evaluation(format!("non-finite connection value at {p:?}")));
        }
        Ok(out)
    }

    fn is_zero(&self) -> bool {
        matches!(&*self.kind, ConnectionKind::Zero)
    }
}

fn check_components(chart: &Chart, components: &[EndMap]) -> Result<usize> {
    if components.len() != chart.dim {
        return Err(Error::InvalidInput(format!(
            "expected {} components, got {}",
            chart.dim,
            components.len()
        )));
    }
    let d = components[0].dim();
    if components.iter().any(|m| m.dim() != d) {
        return Err(Error::InvalidInput("components differ in fiber dimension".into()));
    }
    Ok(d)
}

/// `Aₓ = −φₓ I + φ_y J`, `A_y = −φ_y I − φₓ J` with `φ = log 2 − log(1 + r²)`
/// the log conformal factor and `J` the quarter rotation.
fn sphere_christoffel(p: &[f64]) -> (EndMap, EndMap) {
    let (x, y) = (p[0], p[1]);
    let s = 1.0 + x * x + y * y;
    let (px, py) = (-2.0 * x / s, -2.0 * y / s);
    let ax = DMatrix::from_row_slice(2, 2, &[-px, -py, py, -px]);
    let ay = DMatrix::from_row_slice(2, 2, &[-py, px, -px, -py]);
    (
        EndMap::from_parts(Field::Real, ax.map(|v| Scalar::new(v, 0.0))),
        EndMap::from_parts(Field::Real, ay.map(|v| Scalar::new(v, 0.0))),
    )
}

fn gauged_components(base: &ConnectionForm, gauge: &GaugeField, p: &[f64]) -> Result<Vec<EndMap>> {
    let g = gauge.value(p)?;
    let g_inv = matrix_inverse(&g).map_err(|_| singular_gauge(p, &g))?;
    let a = base.components(p)?;
    let constant = gauge.is_constant();
    a.iter()
        .enumerate()
        .map(|(i, ai)| {
            let conj = if base.is_zero() {
                EndMap::zeros(ai.dim())
            } else {
                g.compose(ai)?.compose(&g_inv)?
            };
            if constant {
                Ok(conj)
            } else {
                conj.add(&gauge.derivative(p, i)?.compose(&g_inv)?)
            }
        })
        .collect()
}

fn singular_gauge(p: &[f64], g: &EndMap) -> Error {
    Error::SingularGauge { point: p.to_vec(), sigma_min: g.sigma_min() }
}

/// `A_p(v) = Σᵢ vᵢ Aᵢ(p)`.
pub fn evaluate_connection(a: &ConnectionForm, p: &[f64], v: &[f64]) -> Result<EndMap> {
    if v.len() != a.chart.dim {
        return Err(Error::InvalidInput(format!(
            "tangent vector has {} components, chart has dimension {}",
            v.len(),
            a.chart.dim
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite tangent vector".into()));
    }
    let comps = a.components(p)?;
    let mut out = EndMap::zeros(a.fiber_dim);
    for (vi, ai) in v.iter().zip(&comps) {
        if *vi != 0.0 {
            out.axpy(*vi, ai);
        }
    }
    Ok(out)
}

/// Scalar coefficient `f(p) = c + Σᵢ (lᵢ pᵢ + aᵢ sin(ωᵢ pᵢ + φᵢ))` multiplying
/// a generator in an [`ExpFactor`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothCoefficient {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub amplitude: Vec<f64>,
    #[serde(default)]
    pub frequency: Vec<f64>,
    #[serde(default)]
    pub phase: Vec<f64>,
}

impl SmoothCoefficient {
    /// `f(p) = p_axis`.
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        let mut linear = vec![0.0; dim];
        linear[axis] = 1.0;
        Self { constant: 0.0, linear, amplitude: vec![], frequency: vec![], phase: vec![] }
    }

    fn coeff(v: &[f64], i: usize) -> f64 {
        v.get(i).copied().unwrap_or(0.0)
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        self.constant
            + p.iter()
                .enumerate()
                .map(|(i, &x)| {
                    Self::coeff(&self.linear, i) * x
                        + Self::coeff(&self.amplitude, i)
                            * (Self::coeff(&self.frequency, i) * x + Self::coeff(&self.phase, i))
                                .sin()
                })
                .sum::<f64>()
    }

    pub fn partial(&self, p: &[f64], i: usize) -> f64 {
        let (w, a) = (Self::coeff(&self.frequency, i), Self::coeff(&self.amplitude, i));
        Self::coeff(&self.linear, i) + a * w * (w * p[i] + Self::coeff(&self.phase, i)).cos()
    }
}

/// Factor `exp(f(p)·X)` of a product-of-exponentials gauge field.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFactor {
    pub generator: EndMap,
    pub coefficient: SmoothCoefficient,
}

pub type GaugeValueFn = dyn Fn(&[f64]) -> Result<EndMap> + Send + Sync;
pub type GaugeDerivFn = dyn Fn(&[f64], usize) -> Result<EndMap> + Send + Sync;

enum GaugeKind {
    Constant(GaugeMap),
    /// `g(p) = exp(f₁(p)X₁)·exp(f₂(p)X₂)⋯`
    ExpProduct(Vec<ExpFactor>),
    /// Constant on each side of the hyperplane `p[axis] = split`.
    Piecewise { axis: usize, split: f64, below: GaugeMap, above: GaugeMap },
    Inverse(GaugeField),
    /// Pointwise product `g₁(p)·g₂(p)⋯`.
    Product(Vec<GaugeField>),
    Custom { value: Arc<GaugeValueFn>, derivative: Option<Arc<GaugeDerivFn>> },
}

/// A smooth map `p ↦ g(p) ∈ GL(V)` on a chart.
#[derive(Clone)]
pub struct GaugeField {
    chart: Chart,
    dim: usize,
    kind: Arc<GaugeKind>,
    fd_step: f64,
    richardson: bool,
}

impl fmt::Debug for GaugeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeField")
            .field("chart", &self.chart)
            .field("dim", &self.dim)
            .field("closed_form_derivative", &self.has_closed_form_derivative())
            .finish()
    }
}

impl GaugeField {
    fn build(chart: Chart, dim: usize, kind: GaugeKind) -> Self {
        Self { chart, dim, kind: Arc::new(kind), fd_step: GAUGE_FD_STEP, richardson: false }
    }

    pub fn constant(chart: Chart, g: GaugeMap) -> Self {
        let dim = g.dim();
        Self::build(chart, dim, GaugeKind::Constant(g))
    }

    pub fn identity(chart: Chart, dim: usize) -> Self {
        Self::constant(chart, GaugeMap::identity(dim))
    }

    pub fn exp_product(chart: Chart, factors: Vec<ExpFactor>) -> Result<Self> {
        let dim = factors
            .first()
            .map(|f| f.generator.dim())
            .ok_or_else(|| Error::InvalidInput("exp-product gauge needs a factor".into()))?;
        if factors.iter().any(|f| f.generator.dim() != dim) {
            return Err(Error::InvalidInput("gauge generators differ in dimension".into()));
        }
        let g = Self::build(chart, dim, GaugeKind::ExpProduct(factors));
        g.validate()?;
        Ok(g)
    }

    /// `g(t) = exp(t·X)` on `ℝ`.
    pub fn exp_line(generator: EndMap) -> Result<Self> {
        Self::exp_product(
            Chart::new(1)?,
            vec![ExpFactor { generator, coefficient: SmoothCoefficient::coordinate(1, 0) }],
        )
    }

    pub fn piecewise(chart: Chart, axis: usize, split: f64, below: GaugeMap, above: GaugeMap) -> Result<Self> {
        if axis >= chart.dim || below.dim() != above.dim() {
            return Err(Error::InvalidInput("piecewise gauge does not match the chart".into()));
        }
        let dim = below.dim();
        Ok(Self::build(chart, dim, GaugeKind::Piecewise { axis, split, below, above }))
    }

    /// A gauge field given by closures. Without a derivative closure the
    /// partial derivatives fall back to central differences.
    pub fn from_fn<V>(chart: Chart, dim: usize, value: V, derivative: Option<Arc<GaugeDerivFn>>) -> Result<Self>
    where
        V: Fn(&[f64]) -> Result<EndMap> + Send + Sync + 'static,
    {
        let g = Self::build(chart, dim, GaugeKind::Custom { value: Arc::new(value), derivative });
        g.validate()?;
        Ok(g)
    }

    /// Like [`GaugeField::from_fn`] but without probing: for gauges that are
    /// only defined away from some of the probe points.
    pub(crate) fn from_fn_unprobed<V>(chart: Chart, dim: usize, value: V, derivative: Option<Arc<GaugeDerivFn>>) -> Self
    where
        V: Fn(&[f64]) -> Result<EndMap> + Send + Sync + 'static,
    {
        Self::build(chart, dim, GaugeKind::Custom { value: Arc::new(value), derivative })
    }

    /// Pointwise inverse `p ↦ g(p)⁻¹`.
    pub fn inverse(&self) -> Self {
        Self { kind: Arc::new(GaugeKind::Inverse(self.clone())), ..self.clone() }
    }

    /// Pointwise product `p ↦ self(p)·other(p)`.
    pub fn product(&self, other: &GaugeField) -> Result<Self> {
        if self.dim != other.dim || self.chart.dim != other.chart.dim {
            return Err(Error::InvalidInput("gauge fields do not match".into()));
        }
        Ok(Self { kind: Arc::new(GaugeKind::Product(vec![self.clone(), other.clone()])), ..self.clone() })
    }

    pub fn with_fd_step(mut self, h: f64, richardson: bool) -> Self {
        self.fd_step = h;
        self.richardson = richardson;
        self
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        matches!(&*self.kind, GaugeKind::Constant(_))
    }

    pub fn has_closed_form_derivative(&self) -> bool {
        match &*self.kind {
            GaugeKind::Constant(_) | GaugeKind::ExpProduct(_) | GaugeKind::Piecewise { .. } => true,
            GaugeKind::Inverse(g) => g.has_closed_form_derivative(),
            GaugeKind::Product(gs) => gs.iter().all(GaugeField::has_closed_form_derivative),
            GaugeKind::Custom { derivative, .. } => derivative.is_some(),
        }
    }

    fn validate(&self) -> Result<()> {
        for p in self.chart.probe_points() {
            self.value(&p)?;
        }
        Ok(())
    }

    fn raw_value(&self, p: &[f64]) -> Result<EndMap> {
        Ok(match &*self.kind {
            GaugeKind::Constant(g) => g.as_end().clone(),
            GaugeKind::ExpProduct(factors) => {
                let mut acc = EndMap::identity(self.dim);
                for f in factors {
                    let e = matrix_exponential(&f.generator.scale(f.coefficient.value(p)))?;
                    acc = acc.compose(&e)?;
                }
                acc
            }
            GaugeKind::Piecewise { axis, split, below, above } => {
                if p[*axis] < *split { below.as_end().clone() } else { above.as_end().clone() }
            }
            GaugeKind::Inverse(g) => matrix_inverse(&g.value(p)?)?.into_end(),
            GaugeKind::Product(gs) => {
                let mut acc = EndMap::identity(self.dim);
                for g in gs {
                    acc = acc.compose(g.value(p)?.as_end())?;
                }
                acc
            }
            GaugeKind::Custom { value, .. } => value(p)?,
        })
    }

    /// `g(p)`, checked for invertibility.
    pub fn value(&self, p: &[f64]) -> Result<GaugeMap> {
        self.chart.check_point(p)?;
        let m = self.raw_value(p)?;
        if m.dim() != self.dim || !m.is_finite() {
            return Err(Error::Evaluation(format!("gauge value at {p:?} is malformed")));
        }
        GaugeMap::new(m.clone()).map_err(|_| singular_gauge(p, &m))
    }

    /// `∂ᵢg(p)`, closed form when available, else central differences.
    pub fn derivative(&self, p: &[f64], i: usize) -> Result<EndMap> {
        if i >= self.chart.dim {
            return Err(Error::InvalidInput(format!("no coordinate {i}")));
        }
        match &*self.kind {
            GaugeKind::Constant(_) | GaugeKind::Piecewise { .. } => Ok(EndMap::zeros(self.dim)),
            GaugeKind::ExpProduct(factors) => {
                let exps = factors
                    .iter()
                    .map(|f| matrix_exponential(&f.generator.scale(f.coefficient.value(p))))
                    .collect::<Result<Vec<_>>>()?;
                let mut total = EndMap::zeros(self.dim);
                for (k, factor) in factors.iter().enumerate() {
                    let df = factor.coefficient.partial(p, i);
                    if df == 0.0 {
                        continue;
                    }
                    let mut term = EndMap::identity(self.dim);
                    for (j, e) in exps.iter().enumerate() {
                        if j == k {
                            term = term.compose(&factor.generator.scale(df))?;
                        }
                        term = term.compose(e)?;
                    }
                    total = total.add(&term)?;
                }
                Ok(total)
            }
            GaugeKind::Inverse(g) if g.has_closed_form_derivative() => {
                let inv = matrix_inverse(&g.value(p)?)?;
                Ok(inv.compose(&g.derivative(p, i)?)?.compose(&inv)?.scale(-1.0))
            }
            GaugeKind::Product(gs) if self.has_closed_form_derivative() => {
                let values = gs.iter().map(|g| g.value(p)).collect::<Result<Vec<_>>>()?;
                let mut total = EndMap::zeros(self.dim);
                for (k, gk) in gs.iter().enumerate() {
                    let mut term = EndMap::identity(self.dim);
                    for (j, v) in values.iter().enumerate() {
                        term = if j == k {
                            term.compose(&gk.derivative(p, i)?)?
                        } else {
                            term.compose(v)?
                        };
                    }
                    total = total.add(&term)?;
                }
                Ok(total)
            }
            GaugeKind::Custom { derivative: Some(d), .. } => d(p, i),
            _ => self.fd_derivative(p, i),
        }
    }

    fn fd_derivative(&self, p: &[f64], i: usize) -> Result<EndMap> {
        let central = |h: f64| -> Result<EndMap> {
            let mut plus = p.to_vec();
            let mut minus = p.to_vec();
            plus[i] += h;
            minus[i] -= h;
            Ok(self.raw_value(&plus)?.sub(&self.raw_value(&minus)?)?.scale(0.5 / h))
        };
        let d = central(self.fd_step)?;
        if self.richardson {
            let half = central(0.5 * self.fd_step)?;
            Ok(half.scale(4.0 / 3.0).sub(&d.scale(1.0 / 3.0))?)
        } else {
            Ok(d)
        }
    }
}

/// `A′ = g·A·g⁻¹ + (dg)·g⁻¹`, evaluated lazily.
///
/// The gauge is probed for invertibility at the chart's probe points up front;
/// a singular value found later surfaces as [`Error::SingularGauge`] from
/// evaluation.
pub fn gauge_transform(a: &ConnectionForm, g: &GaugeField) -> Result<ConnectionForm> {
    if a.chart.dim != g.chart.dim {
        return Err(Error::InvalidInput("connection and gauge live on different charts".into()));
    }
    if a.fiber_dim != g.dim {
        return Err(Error::InvalidInput(format!(
            "fiber dimension {} does not match gauge dimension {}",
            a.fiber_dim, g.dim
        )));
    }
    let chart = match (&a.chart.bounds, &g.chart.bounds) {
        (Some(_), _) => a.chart.clone(),
        (None, _) => g.chart.clone(),
    };
    for p in chart.probe_points() {
        g.value(&p)?;
    }
    let field = a.field.join(gauge_field_tag(g, &chart));
    Ok(ConnectionForm {
        chart,
        fiber_dim: a.fiber_dim,
        field,
        kind: Arc::new(ConnectionKind::Gauged { base: a.clone(), gauge: g.clone() }),
    })
}

fn gauge_field_tag(g: &GaugeField, chart: &Chart) -> Field {
    chart
        .probe_points()
        .first()
        .and_then(|p| g.value(p).ok())
        .map(|m| m.field())
        .unwrap_or(Field::Real)
}
