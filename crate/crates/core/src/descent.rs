//! Atlases with transition cocycles, path cutting subordinate to a cover,
//! and glued transport across charts.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::connection::{gauge_transform, evaluate_connection, Chart, ConnectionForm, GaugeField};
use crate::error::{Error, Result};
use crate::matcore::{matrix_inverse, operator_distance, EndMap, GaugeMap};
use crate::transport::{transport_map, transport_product, Path, ProductRule, StepDensity};

/// Default interior margin of [`subordinate_cut`], relative to chart radius.
pub const DEFAULT_MARGIN: f64 = 0.05;

/// Samples per unit parameter length used by the greedy march.
const MARCH_DENSITY: f64 = 512.0;
const MARCH_MIN_SAMPLES: usize = 64;

const SPHERE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldPreset {
    /// The interval `(−2, 2)` of the real line, two overlapping charts.
    Line,
    /// The unit circle in `ℝ²`, two angle charts.
    Circle,
    /// The unit sphere in `ℝ³`, two stereographic charts.
    Sphere,
    /// `ℝⁿ` with a single identity chart.
    Flat(usize),
}

/// Coordinate map from the ambient space to a chart.
#[derive(Debug, Clone, PartialEq)]
pub enum ChartMap {
    Identity { dim: usize },
    /// Polar angle on the unit circle, taking values in `[branch, branch + 2π)`.
    Angle { branch: f64 },
    /// Stereographic projection from `−c` onto the plane spanned by `e1, e2`,
    /// `u = (p·e1, p·e2) / (1 + p·c)`. `(e1, e2, c)` is right-handed.
    Stereographic { c: [f64; 3], e1: [f64; 3], e2: [f64; 3] },
}

fn dot3(a: &[f64], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl ChartMap {
    pub fn chart_dim(&self) -> usize {
        match self {
            Self::Identity { dim } => *dim,
            Self::Angle { .. } => 1,
            Self::Stereographic { .. } => 2,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::Identity { dim } => *dim,
            Self::Angle { .. } => 2,
            Self::Stereographic { .. } => 3,
        }
    }

    pub fn coords(&self, p: &[f64]) -> Vec<f64> {
        match self {
            Self::Identity { .. } => p.to_vec(),
            Self::Angle { branch } => {
                let a = p[1].atan2(p[0]);
                vec![branch + (a - branch).rem_euclid(TAU)]
            }
            Self::Stereographic { c, e1, e2 } => {
                let den = 1.0 + dot3(p, c);
                vec![dot3(p, e1) / den, dot3(p, e2) / den]
            }
        }
    }

    /// Inverse of [`ChartMap::coords`].
    pub fn point(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Self::Identity { .. } => u.to_vec(),
            Self::Angle { .. } => vec![u[0].cos(), u[0].sin()],
            Self::Stereographic { c, e1, e2 } => {
                let r2 = u[0] * u[0] + u[1] * u[1];
                let den = 1.0 + r2;
                (0..3).map(|k| (2.0 * u[0] * e1[k] + 2.0 * u[1] * e2[k] + (1.0 - r2) * c[k]) / den).collect()
            }
        }
    }

    /// Derivative of the coordinates at `p`, `chart_dim × ambient_dim`.
    pub fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        match self {
            Self::Identity { dim } => DMatrix::identity(*dim, *dim),
            Self::Angle { .. } => {
                let r2 = p[0] * p[0] + p[1] * p[1];
                DMatrix::from_row_slice(1, 2, &[-p[1] / r2, p[0] / r2])
            }
            Self::Stereographic { c, e1, e2 } => {
                let den = 1.0 + dot3(p, c);
                let mut j = DMatrix::zeros(2, 3);
                for (row, e) in [e1, e2].into_iter().enumerate() {
                    let pe = dot3(p, e);
                    for k in 0..3 {
                        j[(row, k)] = e[k] / den - pe * c[k] / (den * den);
                    }
                }
                j
            }
        }
    }

    /// `Dφ(p)·w` for an ambient vector `w`.
    pub fn push_forward(&self, p: &[f64], w: &[f64]) -> Vec<f64> {
        let j = self.jacobian(p);
        (0..j.nrows()).map(|r| (0..j.ncols()).map(|k| j[(r, k)] * w[k]).sum()).collect()
    }
}

/// Image of a chart in its coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum ChartDomain {
    Box(Vec<(f64, f64)>),
    Ball { radius: f64 },
}

impl ChartDomain {
    /// Distance to the boundary relative to the chart radius; positive inside.
    pub fn depth(&self, u: &[f64]) -> f64 {
        match self {
            Self::Box(b) => b
                .iter()
                .zip(u)
                .map(|(&(lo, hi), &x)| {
                    let dist = (x - lo).min(hi - x);
                    let half = 0.5 * (hi - lo);
                    if half.is_finite() {
                        dist / half
                    } else {
                        dist
                    }
                })
                .fold(f64::INFINITY, f64::min),
            Self::Ball { radius } => {
                let r = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                (radius - r) / radius
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtlasChart {
    pub map: ChartMap,
    pub domain: ChartDomain,
}

/// A finite cover of a manifold preset by coordinate charts.
#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    preset: ManifoldPreset,
    charts: Vec<AtlasChart>,
}

/// Stereographic radius of the sphere charts: caps of angular radius 110°.
pub fn sphere_chart_radius() -> f64 {
    (55.0f64).to_radians().tan()
}

impl Atlas {
    pub fn preset(preset: ManifoldPreset) -> Result<Self> {
        match preset {
            ManifoldPreset::Line => Ok(Self::line()),
            ManifoldPreset::Circle => Ok(Self::circle()),
            ManifoldPreset::Sphere => Ok(Self::sphere()),
            ManifoldPreset::Flat(n) => Self::flat(n),
        }
    }

    /// Charts `(−2, 0.5)` and `(−0.5, 2)`, both the identity coordinate.
    pub fn line() -> Self {
        let chart = |lo, hi| AtlasChart { map: ChartMap::Identity { dim: 1 }, domain: ChartDomain::Box(vec![(lo, hi)]) };
        Self { preset: ManifoldPreset::Line, charts: vec![chart(-2.0, 0.5), chart(-0.5, 2.0)] }
    }

    /// Angle charts on `(−3π/4, 3π/4)` and `(π/4, 7π/4)`. The overlap has two
    /// components, one around `π/2` and one around `−π/2 ≡ 3π/2`.
    pub fn circle() -> Self {
        Self {
            preset: ManifoldPreset::Circle,
            charts: vec![
                AtlasChart { map: ChartMap::Angle { branch: -PI }, domain: ChartDomain::Box(vec![(-0.75 * PI, 0.75 * PI)]) },
                AtlasChart { map: ChartMap::Angle { branch: 0.0 }, domain: ChartDomain::Box(vec![(0.25 * PI, 1.75 * PI)]) },
            ],
        }
    }

    /// Stereographic charts centred at `+e_x` and `−e_x`.
    pub fn sphere() -> Self {
        let radius = sphere_chart_radius();
        let ex = [1.0, 0.0, 0.0];
        let ey = [0.0, 1.0, 0.0];
        let ez = [0.0, 0.0, 1.0];
        Self {
            preset: ManifoldPreset::Sphere,
            charts: vec![
                AtlasChart { map: ChartMap::Stereographic { c: ex, e1: ey, e2: ez }, domain: ChartDomain::Ball { radius } },
                AtlasChart {
                    map: ChartMap::Stereographic { c: [-1.0, 0.0, 0.0], e1: ez, e2: ey },
                    domain: ChartDomain::Ball { radius },
                },
            ],
        }
    }

    pub fn flat(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("flat preset needs dimension at least 1".into()));
        }
        Ok(Self {
            preset: ManifoldPreset::Flat(n),
            charts: vec![AtlasChart {
                map: ChartMap::Identity { dim: n },
                domain: ChartDomain::Box(vec![(f64::NEG_INFINITY, f64::INFINITY); n]),
            }],
        })
    }

    pub fn manifold(&self) -> ManifoldPreset {
        self.preset
    }

    pub fn charts(&self) -> &[AtlasChart] {
        &self.charts
    }

    pub fn len(&self) -> usize {
        self.charts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    pub fn chart_dim(&self) -> usize {
        self.charts[0].map.chart_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.charts[0].map.ambient_dim()
    }

    fn chart(&self, i: usize) -> Result<&AtlasChart> {
        self.charts.get(i).ok_or_else(|| Error::InvalidInput(format!("no chart {i}")))
    }

    pub fn coords(&self, i: usize, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.chart(i)?.map.coords(p))
    }

    pub fn depth(&self, i: usize, p: &[f64]) -> Result<f64> {
        let c = self.chart(i)?;
        Ok(c.domain.depth(&c.map.coords(p)))
    }

    /// Checks that `p` has the ambient dimension and lies on the manifold.
    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.ambient_dim() || p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("{p:?} is not a point of R^{}", self.ambient_dim())));
        }
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let on = match self.preset {
            ManifoldPreset::Circle | ManifoldPreset::Sphere => (norm - 1.0).abs() <= SPHERE_TOL,
            _ => true,
        };
        if !on {
            return Err(Error::InvalidInput(format!("{p:?} is off the unit {:?}", self.preset)));
        }
        Ok(())
    }

    /// Charts whose interior contains `p`.
    pub fn containing(&self, p: &[f64]) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.charts[i].domain.depth(&self.charts[i].map.coords(p)) > 0.0).collect()
    }

    /// The chart in which `p` lies deepest.
    pub fn home_chart(&self, p: &[f64]) -> Result<usize> {
        self.check_point(p)?;
        let (best, depth) = (0..self.len())
            .map(|i| (i, self.charts[i].domain.depth(&self.charts[i].map.coords(p))))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if depth > 0.0 {
            Ok(best)
        } else {
            Err(Error::Coverage(format!("{p:?} is not interior to any chart")))
        }
    }

    /// Orthonormal basis of the tangent space at `p`, as ambient vectors.
    pub fn tangent_basis(&self, p: &[f64]) -> Vec<Vec<f64>> {
        match self.preset {
            ManifoldPreset::Line => vec![vec![1.0]],
            ManifoldPreset::Flat(n) => (0..n).map(|k| (0..n).map(|j| if j == k { 1.0 } else { 0.0 }).collect()).collect(),
            ManifoldPreset::Circle => vec![vec![-p[1], p[0]]],
            ManifoldPreset::Sphere => {
                let helper = if p[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
                let t1 = cross(p, &helper);
                let n1 = norm3(&t1);
                let t1 = [t1[0] / n1, t1[1] / n1, t1[2] / n1];
                let t2 = cross(p, &t1);
                vec![t1.to_vec(), t2.to_vec()]
            }
        }
    }

    /// A deterministic cloud of `n` points of the manifold.
    pub fn sample_points(&self, n: usize) -> Vec<Vec<f64>> {
        let n = n.max(1);
        match self.preset {
            ManifoldPreset::Line => (0..n).map(|k| vec![-2.0 + 4.0 * (k as f64 + 0.5) / n as f64]).collect(),
            ManifoldPreset::Circle => (0..n)
                .map(|k| {
                    let a = TAU * (k as f64 + 0.5) / n as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect(),
            ManifoldPreset::Sphere => {
                let golden = PI * (3.0 - 5.0f64.sqrt());
                (0..n)
                    .map(|k| {
                        let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let a = golden * k as f64;
                        vec![r * a.cos(), r * a.sin(), z]
                    })
                    .collect()
            }
            ManifoldPreset::Flat(d) => {
                let side = (n as f64).powf(1.0 / d as f64).ceil().max(1.0) as usize;
                crate::reconstruct::grid_points(&vec![(-1.0, 1.0); d], side).into_iter().take(n).collect()
            }
        }
    }
}

fn cross(a: &[f64], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Transition maps `g_ij` for ordered pairs of overlapping charts. `g_ij` is a
/// gauge field in chart `i`'s coordinates and maps frame `i` to frame `j`.
#[derive(Clone)]
pub struct TransitionCocycle {
    dim: usize,
    maps: BTreeMap<(usize, usize), GaugeField>,
}

impl fmt::Debug for TransitionCocycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransitionCocycle").field("dim", &self.dim).field("pairs", &self.maps.keys().collect::<Vec<_>>()).finish()
    }
}

impl TransitionCocycle {
    /// The trivial cocycle of a single chart.
    pub fn trivial(dim: usize) -> Self {
        Self { dim, maps: BTreeMap::new() }
    }

    pub fn new(dim: usize, maps: BTreeMap<(usize, usize), GaugeField>) -> Result<Self> {
        for (&(i, j), g) in &maps {
            if i == j {
                return Err(Error::InvalidInput(format!("g_{i}{i} is the identity and must not be given")));
            }
            if g.dim() != dim {
                return Err(Error::InvalidInput(format!("g_{i}{j} has dimension {}, expected {dim}", g.dim())));
            }
        }
        Ok(Self { dim, maps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.maps.keys().copied()
    }

    pub fn field(&self, i: usize, j: usize) -> Option<&GaugeField> {
        self.maps.get(&(i, j))
    }

    /// `g_ij` at the point with chart-`i` coordinates `u`.
    pub fn value(&self, i: usize, j: usize, u: &[f64]) -> Result<GaugeMap> {
        if i == j {
            return Ok(GaugeMap::identity(self.dim));
        }
        self.maps
            .get(&(i, j))
            .ok_or_else(|| Error::InconsistentBundle(format!("charts {i} and {j} have no transition")))?
            .value(u)
    }
}

/// Rotation by `phi` in the first two coordinates of a rank-2 fiber.
pub fn rotation(phi: f64) -> GaugeMap {
    let (s, c) = phi.sin_cos();
    GaugeMap::new(EndMap::from_rows(&[vec![c, -s], vec![s, c]]).expect("finite rows")).expect("rotation is invertible")
}

/// Jacobian of the sphere chart change `τ(u) = (u₂, u₁)/|u|²`.
fn sphere_transition_value(u: &[f64]) -> Result<EndMap> {
    let (a, b) = (u[0], u[1]);
    let r2 = a * a + b * b;
    if r2 == 0.0 {
        return Err(Error::Evaluation("sphere transition is undefined at the chart centre".into()));
    }
    let r4 = r2 * r2;
    EndMap::from_rows(&[vec![-2.0 * a * b / r4, (a * a - b * b) / r4], vec![(b * b - a * a) / r4, -2.0 * a * b / r4]])
}

fn sphere_transition_derivative(u: &[f64], k: usize) -> Result<EndMap> {
    let (a, b) = (u[0], u[1]);
    let r2 = a * a + b * b;
    let r4 = r2 * r2;
    let n = [[-2.0 * a * b, a * a - b * b], [b * b - a * a, -2.0 * a * b]];
    let dn = if k == 0 {
        [[-2.0 * b, 2.0 * a], [-2.0 * a, -2.0 * b]]
    } else {
        [[-2.0 * a, -2.0 * b], [2.0 * b, -2.0 * a]]
    };
    let uk = u[k];
    let rows: Vec<Vec<f64>> =
        (0..2).map(|r| (0..2).map(|c| dn[r][c] / r4 - 4.0 * uk * n[r][c] / (r4 * r2)).collect()).collect();
    EndMap::from_rows(&rows)
}

/// The tangent-bundle transition of the two-chart sphere, identical in both
/// directions.
pub fn sphere_transition() -> GaugeField {
    GaugeField::from_fn_unprobed(
        Chart { dim: 2, bounds: None },
        2,
        sphere_transition_value,
        Some(Arc::new(sphere_transition_derivative)),
    )
}

/// Compatibility residual tolerance of [`GlobalBundle::new`].
pub const COMPATIBILITY_TOL: f64 = 1e-7;
const COMPATIBILITY_SAMPLES: usize = 16;

/// Local connections on an atlas glued by a transition cocycle.
#[derive(Debug, Clone)]
pub struct GlobalBundle {
    atlas: Atlas,
    cocycle: TransitionCocycle,
    connections: Vec<ConnectionForm>,
}

impl GlobalBundle {
    /// Validates dimensions and the overlap compatibility
    /// `A_j = g_ij·A_i·g_ij⁻¹ + (dg_ij)·g_ij⁻¹` at sampled overlap points.
    pub fn new(atlas: Atlas, cocycle: TransitionCocycle, connections: Vec<ConnectionForm>) -> Result<Self> {
        let b = Self::unchecked(atlas, cocycle, connections)?;
        let r = b.compatibility_residual(COMPATIBILITY_SAMPLES)?;
        if !(r <= COMPATIBILITY_TOL) {
            return Err(Error::InconsistentBundle(format!(
                "local connections disagree on overlaps by {r:e} (tolerance {COMPATIBILITY_TOL:e})"
            )));
        }
        Ok(b)
    }

    /// Dimension checks only.
    pub fn unchecked(atlas: Atlas, cocycle: TransitionCocycle, connections: Vec<ConnectionForm>) -> Result<Self> {
        if connections.len() != atlas.len() {
            return Err(Error::InvalidInput(format!(
                "{} charts but {} local connections",
                atlas.len(),
                connections.len()
            )));
        }
        for (i, a) in connections.iter().enumerate() {
            if a.chart().dim != atlas.chart_dim() {
                return Err(Error::InvalidInput(format!("connection {i} lives on R^{}", a.chart().dim)));
            }
            if a.fiber_dim() != cocycle.dim() {
                return Err(Error::InvalidInput(format!("connection {i} has fiber dimension {}", a.fiber_dim())));
            }
        }
        for (i, j) in cocycle.pairs() {
            if i >= atlas.len() || j >= atlas.len() {
                return Err(Error::InvalidInput(format!("transition ({i}, {j}) names a missing chart")));
            }
        }
        Ok(Self { atlas, cocycle, connections })
    }

    /// A single chart of `ℝⁿ` carrying `a`.
    pub fn flat(a: ConnectionForm) -> Result<Self> {
        let n = a.chart().dim;
        let d = a.fiber_dim();
        Self::new(Atlas::flat(n)?, TransitionCocycle::trivial(d), vec![a])
    }

    /// The line atlas with `a` on chart 0, transition `g_01(x) = exp(x·X)` and
    /// the gauge-transformed connection on chart 1.
    pub fn line(a: ConnectionForm, generator: EndMap) -> Result<Self> {
        let g = GaugeField::exp_line(generator)?;
        let b = gauge_transform(&a, &g)?;
        let mut maps = BTreeMap::new();
        maps.insert((0, 1), g.clone());
        maps.insert((1, 0), g.inverse());
        Self::new(Atlas::line(), TransitionCocycle::new(a.fiber_dim(), maps)?, vec![a, b])
    }

    /// Trivial rank-2 connections on the circle with transitions `R_φ` on the
    /// overlap component around `π/2` and the identity around `3π/2`.
    pub fn flat_circle(phi: f64) -> Result<Self> {
        let id = GaugeMap::identity(2);
        let r = rotation(phi);
        let r_inv = rotation(-phi);
        let chart = Chart::new(1)?;
        let mut maps = BTreeMap::new();
        maps.insert((0, 1), GaugeField::piecewise(chart.clone(), 0, 0.0, id.clone(), r)?);
        maps.insert((1, 0), GaugeField::piecewise(chart.clone(), 0, PI, r_inv, id)?);
        let zero = ConnectionForm::zero(chart, 2)?;
        Self::new(Atlas::circle(), TransitionCocycle::new(2, maps)?, vec![zero.clone(), zero])
    }

    /// The tangent bundle of the unit sphere with its Levi-Civita connection,
    /// in the coordinate frames of the two stereographic charts.
    pub fn sphere_tangent() -> Result<Self> {
        let mut maps = BTreeMap::new();
        maps.insert((0, 1), sphere_transition());
        maps.insert((1, 0), sphere_transition());
        let a = ConnectionForm::levi_civita_sphere();
        Self::new(Atlas::sphere(), TransitionCocycle::new(2, maps)?, vec![a.clone(), a])
    }

    pub fn atlas(&self) -> &Atlas {
        &self.atlas
    }

    pub fn cocycle(&self) -> &TransitionCocycle {
        &self.cocycle
    }

    pub fn connections(&self) -> &[ConnectionForm] {
        &self.connections
    }

    pub fn fiber_dim(&self) -> usize {
        self.cocycle.dim()
    }

    /// `max ‖(g_ij·A_i)(v_i) − A_j(v_j)‖` over sampled overlap points and a
    /// tangent basis, where `v_i`, `v_j` are the same tangent vector in the
    /// two charts.
    pub fn compatibility_residual(&self, samples: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, j) in self.cocycle.pairs() {
            let g = self.cocycle.field(i, j).expect("listed pair");
            for p in overlap_samples(&self.atlas, i, j, samples)? {
                let ui = self.atlas.coords(i, &p)?;
                let uj = self.atlas.coords(j, &p)?;
                let gv = g.value(&ui)?;
                let g_inv = matrix_inverse(&gv)?;
                for w in self.atlas.tangent_basis(&p) {
                    let vi = self.atlas.charts[i].map.push_forward(&p, &w);
                    let vj = self.atlas.charts[j].map.push_forward(&p, &w);
                    let mut dg = EndMap::zeros(self.fiber_dim());
                    for (k, &vk) in vi.iter().enumerate() {
                        dg.axpy(vk, &g.derivative(&ui, k)?);
                    }
                    let ai = evaluate_connection(&self.connections[i], &ui, &vi)?;
                    let lhs = gv.compose(&ai)?.add(&dg)?.compose(&g_inv)?;
                    let rhs = evaluate_connection(&self.connections[j], &uj, &vj)?;
                    worst = worst.max(operator_distance(&lhs, &rhs)?);
                }
            }
        }
        Ok(worst)
    }

    /// Changes every local frame: `A_i ↦ h_i·A_i`, `g_ij ↦ h_j·g_ij·h_i⁻¹`.
    pub fn regauge(&self, hs: &[GaugeField]) -> Result<Self> {
        if hs.len() != self.atlas.len() {
            return Err(Error::InvalidInput(format!("need {} gauges, got {}", self.atlas.len(), hs.len())));
        }
        let connections =
            self.connections.iter().zip(hs).map(|(a, h)| gauge_transform(a, h)).collect::<Result<Vec<_>>>()?;
        let mut maps = BTreeMap::new();
        for (i, j) in self.cocycle.pairs() {
            let g = self.cocycle.field(i, j).expect("listed pair").clone();
            let (hi, hj) = (hs[i].clone(), hs[j].clone());
            let (mi, mj) = (self.atlas.charts[i].map.clone(), self.atlas.charts[j].map.clone());
            let value = move |u: &[f64]| -> Result<EndMap> {
                let uj = mj.coords(&mi.point(u));
                let inv = matrix_inverse(&hi.value(u)?)?;
                hj.value(&uj)?.compose(g.value(u)?.as_end())?.compose(&inv)
            };
            maps.insert((i, j), GaugeField::from_fn_unprobed(Chart::new(self.atlas.chart_dim())?, self.fiber_dim(), value, None));
        }
        Self::new(self.atlas.clone(), TransitionCocycle::new(self.fiber_dim(), maps)?, connections)
    }
}

/// Up to `n` points of the overlap of charts `i` and `j`, drawn from a
/// deterministic cloud. Points within 1% of either boundary are skipped.
fn overlap_samples(atlas: &Atlas, i: usize, j: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    let cloud = atlas.sample_points(256 * n.max(1));
    let inside: Vec<Vec<f64>> = cloud
        .into_iter()
        .filter(|p| atlas.depth(i, p).unwrap_or(-1.0) > 0.01 && atlas.depth(j, p).unwrap_or(-1.0) > 0.01)
        .collect();
    if inside.is_empty() {
        return Err(Error::Sampling(format!("found no sample point in the overlap of charts {i} and {j}")));
    }
    let stride = (inside.len() / n.max(1)).max(1);
    Ok(inside.into_iter().step_by(stride).take(n).collect())
}

/// `max ‖g_jk·g_ij − g_ik‖` over `samples` points per overlap and every
/// ordered triple of charts containing the point, including the pair
/// conditions `g_ji·g_ij = id`.
pub fn check_cech_cocycle(atlas: &Atlas, cocycle: &TransitionCocycle, samples: usize) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample per overlap".into()));
    }
    let mut points = Vec::new();
    for (i, j) in cocycle.pairs() {
        points.extend(overlap_samples(atlas, i, j, samples)?);
    }
    if points.is_empty() {
        return Ok(0.0);
    }
    check_cech_cocycle_at(atlas, cocycle, &points)
}

/// As [`check_cech_cocycle`] at the given ambient points, each of which must
/// lie in an overlap.
pub fn check_cech_cocycle_at(atlas: &Atlas, cocycle: &TransitionCocycle, points: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in points {
        atlas.check_point(p).map_err(|e| Error::Sampling(e.to_string()))?;
        let charts = atlas.containing(p);
        if charts.len() < 2 {
            return Err(Error::Sampling(format!("{p:?} lies in no overlap")));
        }
        let coords: Vec<Vec<f64>> = (0..atlas.len()).map(|k| atlas.charts[k].map.coords(p)).collect();
        for &i in &charts {
            for &j in &charts {
                for &k in &charts {
                    let gij = cocycle.value(i, j, &coords[i])?;
                    let gjk = cocycle.value(j, k, &coords[j])?;
                    let gik = cocycle.value(i, k, &coords[i])?;
                    worst = worst.max(operator_distance(&gjk.compose(&gij)?, &gik)?);
                }
            }
        }
    }
    Ok(worst)
}

/// Cut values `t₀ ≤ … ≤ t_m` and a chart per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutAssignment {
    pub cuts: Vec<f64>,
    pub charts: Vec<usize>,
}

impl CutAssignment {
    pub fn new(cuts: Vec<f64>, charts: Vec<usize>) -> Result<Self> {
        if cuts.len() != charts.len() + 1 || charts.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} cuts cannot bound {} segments",
                cuts.len(),
                charts.len()
            )));
        }
        if cuts.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidInput("cuts must be nondecreasing".into()));
        }
        Ok(Self { cuts, charts })
    }

    pub fn segments(&self) -> usize {
        self.charts.len()
    }

    /// Splits every segment at its midpoint, keeping its chart.
    pub fn refine(&self) -> Self {
        let mut cuts = vec![self.cuts[0]];
        let mut charts = Vec::with_capacity(2 * self.charts.len());
        for (w, &c) in self.cuts.windows(2).zip(&self.charts) {
            cuts.push(0.5 * (w[0] + w[1]));
            cuts.push(w[1]);
            charts.push(c);
            charts.push(c);
        }
        Self { cuts, charts }
    }

    /// Checks that every segment stays inside its chart at sampled parameters.
    pub fn validate(&self, atlas: &Atlas, path: &Path) -> Result<()> {
        for (w, &c) in self.cuts.windows(2).zip(&self.charts) {
            let n = march_samples(w[0], w[1]);
            for k in 0..=n {
                let t = w[0] + (w[1] - w[0]) * k as f64 / n as f64;
                if !(atlas.depth(c, &path.point(t))? > 0.0) {
                    return Err(Error::Coverage(format!("γ({t}) leaves chart {c} of its segment")));
                }
            }
        }
        Ok(())
    }
}

fn march_samples(s: f64, t: f64) -> usize {
    (((t - s).abs() * MARCH_DENSITY).ceil() as usize).max(MARCH_MIN_SAMPLES)
}

/// Greedy march along the carrier of `path`: a segment is extended while the
/// path stays `margin` deep inside its chart, then a new segment starts in the
/// chart where the path is deepest.
pub fn subordinate_cut(path: &Path, atlas: &Atlas, margin: f64) -> Result<CutAssignment> {
    if path.dim() != atlas.ambient_dim() {
        return Err(Error::InvalidInput(format!("path lives in R^{}, atlas in R^{}", path.dim(), atlas.ambient_dim())));
    }
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::InvalidInput("margin must lie in [0, 1)".into()));
    }
    let (a, b) = path.carrier();
    let n = march_samples(a, b);
    let ts: Vec<f64> = (0..=n).map(|k| if k == n { b } else { a + (b - a) * k as f64 / n as f64 }).collect();
    let depths: Vec<Vec<f64>> = ts
        .iter()
        .map(|&t| {
            let p = path.point(t);
            atlas.check_point(&p).map_err(|e| Error::Coverage(e.to_string()))?;
            let d: Vec<f64> = (0..atlas.len()).map(|i| atlas.depth(i, &p)).collect::<Result<_>>()?;
            if d.iter().all(|&x| !(x > 0.0)) {
                return Err(Error::Coverage(format!("γ({t}) = {p:?} is not interior to any chart")));
            }
            Ok(d)
        })
        .collect::<Result<_>>()?;
    let deepest = |d: &[f64]| (0..d.len()).fold(0, |best, i| if d[i] > d[best] { i } else { best });

    let mut cuts = vec![a];
    let mut charts = vec![deepest(&depths[0])];
    for k in 1..ts.len() {
        let current = *charts.last().expect("nonempty");
        if depths[k][current] >= margin {
            continue;
        }
        let cut = k - 1;
        let next = deepest(&depths[cut]);
        if next == current || depths[cut][next] < margin {
            if depths[k][current] > 0.0 && depths[k].iter().all(|&x| x <= depths[k][current]) {
                continue;
            }
            return Err(Error::Coverage(format!(
                "no chart contains γ near t = {} with margin {margin}",
                ts[cut]
            )));
        }
        if ts[cut] <= *cuts.last().expect("nonempty") {
            return Err(Error::Coverage(format!("cover too thin to cut γ near t = {}", ts[cut])));
        }
        cuts.push(ts[cut]);
        charts.push(next);
    }
    cuts.push(b);
    CutAssignment::new(cuts, charts)
}

/// Integrator used per segment by [`global_transport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    Ode(StepDensity),
    Product { rule: ProductRule, density: StepDensity },
}

impl Default for Integrator {
    fn default() -> Self {
        Self::Ode(StepDensity::default())
    }
}

/// Glued transport, expressed in the frames of the recorded charts.
#[derive(Debug, Clone)]
pub struct GlobalTransport {
    pub map: GaugeMap,
    pub source_chart: usize,
    pub target_chart: usize,
}

/// The restriction of an ambient path to `[s, t]`, in chart coordinates.
pub fn local_path(atlas: &Atlas, chart: usize, path: &Path, s: f64, t: f64) -> Result<Path> {
    let map = atlas.chart(chart)?.map.clone();
    let (p1, p2) = (path.clone(), path.clone());
    let m2 = map.clone();
    Path::from_fn(
        map.chart_dim(),
        (s, t),
        move |u| map.coords(&p1.point(u)),
        move |u| {
            let p = p2.point(u);
            m2.push_forward(&p, &p2.velocity(u))
        },
    )
}

/// `C_m∘F_m∘⋯∘C_1∘F_1`: segment transports in their charts, joined by the
/// transitions at the junctions. The result maps the frame of `source_chart`
/// at `γ(t₀)` to the frame of `target_chart` at `γ(t_m)`; both default to the
/// first and last segment charts.
pub fn global_transport(
    b: &GlobalBundle,
    path: &Path,
    cut: &CutAssignment,
    source_chart: Option<usize>,
    target_chart: Option<usize>,
    integrator: Integrator,
) -> Result<GlobalTransport> {
    let atlas = &b.atlas;
    cut.validate(atlas, path)?;
    let first = cut.charts[0];
    let last = *cut.charts.last().expect("nonempty");
    let source = source_chart.unwrap_or(first);
    let target = target_chart.unwrap_or(last);
    let start = path.point(cut.cuts[0]);
    let end = path.point(*cut.cuts.last().expect("nonempty"));
    for (c, p) in [(source, &start), (target, &end)] {
        if !(atlas.depth(c, p)? > 0.0) {
            return Err(Error::Coverage(format!("frame chart {c} does not contain {p:?}")));
        }
    }

    let convert = |i: usize, j: usize, p: &[f64]| -> Result<GaugeMap> {
        b.cocycle.value(i, j, &atlas.coords(i, p)?).map_err(|e| match e {
            Error::InconsistentBundle(m) => Error::InconsistentBundle(m),
            other => Error::InconsistentBundle(other.to_string()),
        })
    };

    let mut acc = convert(source, first, &start)?.into_end();
    for (k, (w, &c)) in cut.cuts.windows(2).zip(&cut.charts).enumerate() {
        let local = local_path(atlas, c, path, w[0], w[1])?;
        let f = match integrator {
            Integrator::Ode(density) => transport_map(&b.connections[c], &local, w[0], w[1], density)?,
            Integrator::Product { rule, density } => {
                transport_product(&b.connections[c], &local, w[0], w[1], density.steps_for(w[0], w[1]), rule)?.map
            }
        };
        acc = f.compose(&acc)?;
        let next = cut.charts.get(k + 1).copied().unwrap_or(target);
        if next != c {
            acc = convert(c, next, &path.point(w[1]))?.compose(&acc)?;
        }
    }
    let map = GaugeMap::new(acc).map_err(|e| Error::Evaluation(format!("glued transport is singular: {e}")))?;
    Ok(GlobalTransport { map, source_chart: source, target_chart: target })
}

/// Glued transport along a subordinate cut with default margin and
/// integrator; a closed path ends in the frame it starts in.
pub fn glued_transport(b: &GlobalBundle, path: &Path) -> Result<GlobalTransport> {
    let cut = subordinate_cut(path, &b.atlas, DEFAULT_MARGIN)?;
    let (s, t) = path.carrier();
    let closed = is_closed(path, s, t);
    let target = if closed { Some(cut.charts[0]) } else { None };
    global_transport(b, path, &cut, None, target, Integrator::default())
}

fn is_closed(path: &Path, s: f64, t: f64) -> bool {
    let (p, q) = (path.point(s), path.point(t));
    p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) <= 1e-12
}

/// Tolerance of the rotation check in [`loop_holonomy_angle`].
pub const ROTATION_TOL: f64 = 1e-6;

/// Rotation angle in `(−π, π]` of a rank-2 holonomy, which must be within
/// [`ROTATION_TOL`] of a special orthogonal matrix.
pub fn rotation_angle(h: &EndMap) -> Result<f64> {
    if h.dim() != 2 {
        return Err(Error::NotARotation(format!("holonomy has rank {}, expected 2", h.dim())));
    }
    let m = h.matrix();
    if m.iter().any(|z| z.im.abs() > ROTATION_TOL) {
        return Err(Error::NotARotation("holonomy is not real".into()));
    }
    let r = h.real_part();
    let gram = r.transpose() * &r - DMatrix::identity(2, 2);
    let det = r.determinant();
    if gram.norm() > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
        return Err(Error::NotARotation(format!(
            "‖HᵀH − I‖ = {:e}, det H = {det}",
            gram.norm()
        )));
    }
    let angle = (r[(1, 0)] - r[(0, 1)]).atan2(r[(0, 0)] + r[(1, 1)]);
    Ok(if angle <= -PI { angle + TAU } else { angle })
}

/// Rotation angle of the glued holonomy of a closed path.
pub fn loop_holonomy_angle(b: &GlobalBundle, path: &Path) -> Result<f64> {
    let (s, t) = path.carrier();
    if !is_closed(path, s, t) {
        return Err(Error::InvalidInput("holonomy needs a closed path".into()));
    }
    rotation_angle(glued_transport(b, path)?.map.as_end())
}

/// `2π(1 − cos θ)` reduced to `(−π, π]`.
pub fn sphere_holonomy_angle(theta: f64) -> f64 {
    wrap_angle(TAU * (1.0 - theta.cos()))
}

pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Distance on the circle between two angles.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// The colatitude-`θ` circle of the unit sphere as an ambient loop,
/// counterclockwise about `+z`, starting on the `+x` side.
pub fn colatitude_circle(theta: f64) -> Result<Path> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::InvalidInput("colatitude must lie in (0, π)".into()));
    }
    let (s, c) = theta.sin_cos();
    Path::circle_arc(vec![0.0, 0.0, c], s, vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], (0.0, TAU))
}

/// The unit circle as an ambient loop, counterclockwise from `(1, 0)`.
pub fn unit_circle_loop() -> Result<Path> {
    Path::planar_arc([0.0, 0.0], 1.0, (0.0, TAU))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::transport_map as local_transport;

    fn max_entry_diff(a: &EndMap, b: &EndMap) -> f64 {
        operator_distance(a, b).unwrap()
    }

    #[test]
    fn stereographic_inverse_and_jacobian() {
        let atlas = Atlas::sphere();
        let p = [0.3f64, -0.5, 0.0];
        let z = (1.0 - p[0] * p[0] - p[1] * p[1]).sqrt();
        let p = vec![p[0], p[1], z];
        for i in 0..2 {
            let m = &atlas.charts()[i].map;
            let u = m.coords(&p);
            let q = m.point(&u);
            assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-14));
            // difference quotient along a tangent direction
            let w = &atlas.tangent_basis(&p)[0];
            let h = 1e-6;
            let plus: Vec<f64> = p.iter().zip(w).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = p.iter().zip(w).map(|(a, b)| a - h * b).collect();
            let (up, um) = (m.coords(&plus), m.coords(&minus));
            let fd: Vec<f64> = up.iter().zip(&um).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let exact = m.push_forward(&p, w);
            assert!(fd.iter().zip(&exact).all(|(a, b)| (a - b).abs() < 1e-8));
        }
    }

    #[test]
    fn sphere_charts_preserve_orientation() {
        let atlas = Atlas::sphere();
        for p in atlas.sample_points(50) {
            let t = atlas.tangent_basis(&p);
            let n = cross(&t[0], &[t[1][0], t[1][1], t[1][2]]);
            assert!(dot3(&p, &n) > 0.0);
            for i in atlas.containing(&p) {
                let m = &atlas.charts()[i].map;
                let (a, b) = (m.push_forward(&p, &t[0]), m.push_forward(&p, &t[1]));
                assert!(a[0] * b[1] - a[1] * b[0] > 0.0);
            }
        }
    }

    #[test]
    fn sphere_transition_is_the_coordinate_jacobian() {
        let atlas = Atlas::sphere();
        let p = vec![0.1, 0.7, (1.0f64 - 0.5).sqrt()];
        let u0 = atlas.coords(0, &p).unwrap();
        let g = sphere_transition_value(&u0).unwrap();
        // oracle: compose the chart maps numerically
        let tau = |u: &[f64]| atlas.charts()[1].map.coords(&atlas.charts()[0].map.point(u));
        let h = 1e-6;
        for k in 0..2 {
            let mut a = u0.clone();
            let mut b = u0.clone();
            a[k] += h;
            b[k] -= h;
            let (ta, tb) = (tau(&a), tau(&b));
            for r in 0..2 {
                assert!(((ta[r] - tb[r]) / (2.0 * h) - g.get(r, k).re).abs() < 1e-7);
            }
        }
        let f = sphere_transition();
        for k in 0..2 {
            let mut a = u0.clone();
            let mut b = u0.clone();
            a[k] += h;
            b[k] -= h;
            let fd = f.value(&a).unwrap().sub(f.value(&b).unwrap().as_end()).unwrap().scale(0.5 / h);
            assert!(max_entry_diff(&fd, &f.derivative(&u0, k).unwrap()) < 1e-7);
        }
    }

    #[test]
    fn single_chart_cocycle_is_vacuous() {
        let atlas = Atlas::flat(2).unwrap();
        assert_eq!(check_cech_cocycle(&atlas, &TransitionCocycle::trivial(2), 4).unwrap(), 0.0);
    }

    #[test]
    fn circle_and_sphere_cocycles() {
        let b = GlobalBundle::flat_circle(0.7).unwrap();
        assert!(check_cech_cocycle(b.atlas(), b.cocycle(), 8).unwrap() < 1e-15);
        let s = GlobalBundle::sphere_tangent().unwrap();
        assert!(check_cech_cocycle(s.atlas(), s.cocycle(), 32).unwrap() < 1e-12);
    }

    #[test]
    fn cocycle_sample_outside_overlap() {
        let s = GlobalBundle::sphere_tangent().unwrap();
        let e = check_cech_cocycle_at(s.atlas(), s.cocycle(), &[vec![1.0, 0.0, 0.0]]).unwrap_err();
        assert!(matches!(e, Error::Sampling(_)));
    }

    #[test]
    fn broken_cocycle_is_detected() {
        let atlas = Atlas::circle();
        let chart = Chart::new(1).unwrap();
        let mut maps = BTreeMap::new();
        maps.insert((0, 1), GaugeField::constant(chart.clone(), rotation(0.3)));
        maps.insert((1, 0), GaugeField::constant(chart, rotation(0.2)));
        let c = TransitionCocycle::new(2, maps).unwrap();
        assert!(check_cech_cocycle(&atlas, &c, 4).unwrap() > 0.09);
    }

    #[test]
    fn incompatible_bundle_is_rejected() {
        let atlas = Atlas::line();
        let chart = Chart::new(1).unwrap();
        let g = GaugeField::exp_line(EndMap::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        let mut maps = BTreeMap::new();
        maps.insert((0, 1), g.clone());
        maps.insert((1, 0), g.inverse());
        let zero = ConnectionForm::zero(chart, 2).unwrap();
        let e = GlobalBundle::new(atlas, TransitionCocycle::new(2, maps).unwrap(), vec![zero.clone(), zero]).unwrap_err();
        assert!(matches!(e, Error::InconsistentBundle(_)));
    }

    #[test]
    fn path_in_one_chart_is_one_segment() {
        let atlas = Atlas::sphere();
        let arc = Path::circle_arc(vec![0.8, 0.0, 0.0], 0.6, vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], (0.0, 2.0)).unwrap();
        let cut = subordinate_cut(&arc, &atlas, DEFAULT_MARGIN).unwrap();
        assert_eq!(cut.charts, vec![0]);
        assert_eq!(cut.cuts, vec![0.0, 2.0]);
    }

    #[test]
    fn equator_alternates_charts() {
        let atlas = Atlas::sphere();
        let cut = subordinate_cut(&colatitude_circle(0.5 * PI).unwrap(), &atlas, DEFAULT_MARGIN).unwrap();
        assert!(cut.segments() >= 2);
        assert!(cut.charts.windows(2).all(|w| w[0] != w[1]));
        // Lebesgue-number oracle: each segment stays in its chart
        cut.validate(&atlas, &colatitude_circle(0.5 * PI).unwrap()).unwrap();
    }

    #[test]
    fn uncovered_path_is_a_coverage_error() {
        let atlas = Atlas::line();
        let e = subordinate_cut(&Path::segment(vec![0.0], vec![3.0]).unwrap(), &atlas, DEFAULT_MARGIN).unwrap_err();
        assert!(matches!(e, Error::Coverage(_)));
    }

    #[test]
    fn constant_loop_has_trivial_holonomy() {
        let b = GlobalBundle::sphere_tangent().unwrap();
        let p = Path::constant(vec![0.0, 0.0, 1.0], (0.0, 1.0)).unwrap();
        let f = glued_transport(&b, &p).unwrap();
        assert!(max_entry_diff(f.map.as_end(), &EndMap::identity(2)) < 1e-15);
        assert_eq!(loop_holonomy_angle(&b, &p).unwrap(), 0.0);
    }

    #[test]
    fn flat_circle_holonomy_is_the_transition() {
        let phi = 0.9;
        let b = GlobalBundle::flat_circle(phi).unwrap();
        let f = glued_transport(&b, &unit_circle_loop().unwrap()).unwrap();
        assert!(max_entry_diff(f.map.as_end(), rotation(phi).as_end()) < 1e-14);
    }

    #[test]
    fn sphere_holonomy_matches_closed_form() {
        let b = GlobalBundle::sphere_tangent().unwrap();
        for theta in [PI / 6.0, PI / 3.0, PI / 2.0] {
            let a = loop_holonomy_angle(&b, &colatitude_circle(theta).unwrap()).unwrap();
            assert!(angle_distance(a, sphere_holonomy_angle(theta)) < 1e-6, "θ = {theta}: {a}");
        }
        let a = loop_holonomy_angle(&b, &colatitude_circle(PI / 6.0).unwrap()).unwrap();
        assert!((a - 0.841787).abs() < 1e-6);
    }

    #[test]
    fn glued_equals_single_chart_on_the_line() {
        let a = ConnectionForm::constant(
            Chart::new(1).unwrap(),
            vec![EndMap::from_rows(&[vec![0.1, 0.5], vec![-0.3, 0.2]]).unwrap()],
        )
        .unwrap();
        let x = EndMap::from_rows(&[vec![0.0, -0.4], vec![0.4, 0.1]]).unwrap();
        let b = GlobalBundle::line(a.clone(), x).unwrap();
        let path = Path::segment(vec![-1.5], vec![1.5]).unwrap();
        let cut = subordinate_cut(&path, b.atlas(), DEFAULT_MARGIN).unwrap();
        assert_eq!(cut.charts, vec![0, 1]);
        let glued = global_transport(&b, &path, &cut, None, None, Integrator::default()).unwrap();
        assert_eq!((glued.source_chart, glued.target_chart), (0, 1));
        // chart 0's connection is defined on all of R: transport there, then change frame
        let single = local_transport(&a, &path, 0.0, 1.0, StepDensity::default()).unwrap();
        let g = b.cocycle().value(0, 1, &[1.5]).unwrap();
        assert!(max_entry_diff(glued.map.as_end(), &g.compose(single.as_end()).unwrap()) < 1e-10);
        let refined = global_transport(&b, &path, &cut.refine(), None, None, Integrator::default()).unwrap();
        assert!(max_entry_diff(glued.map.as_end(), refined.map.as_end()) < 1e-10);
    }

    #[test]
    fn regauged_holonomy_has_the_same_trace() {
        let b = GlobalBundle::sphere_tangent().unwrap();
        let j = EndMap::from_rows(&[vec![0.2, -1.0], vec![1.0, 0.1]]).unwrap();
        let chart = Chart::new(2).unwrap();
        let h = |s: f64| {
            GaugeField::exp_product(
                chart.clone(),
                vec![crate::connection::ExpFactor {
                    generator: j.clone(),
                    coefficient: crate::connection::SmoothCoefficient {
                        constant: 0.1,
                        linear: vec![s, -0.2],
                        amplitude: vec![0.3, 0.1],
                        frequency: vec![1.0, 0.5],
                        phase: vec![0.2, 0.0],
                    },
                }],
            )
            .unwrap()
        };
        let c = b.regauge(&[h(0.3), h(-0.4)]).unwrap();
        let path = colatitude_circle(PI / 3.0).unwrap();
        let t1 = glued_transport(&b, &path).unwrap().map.trace();
        let t2 = glued_transport(&c, &path).unwrap().map.trace();
        assert!((t1 - t2).norm() < 1e-7);
    }
}
