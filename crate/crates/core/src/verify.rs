//! The acceptance suite: eight criteria, each a list of named checks with a
//! computed value and a bound.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bordism::{
    circle_word, disjoint_union, evaluate_bordism, pairing_residual, snake_residual, snake_word, BordismWord,
    Generator, Sign, SignedPoint,
};
use crate::connection::{gauge_transform, Chart, ConnectionForm, ExpFactor, GaugeField, SmoothCoefficient};
use crate::descent::{
    angle_distance, check_cech_cocycle, colatitude_circle, global_transport, glued_transport, loop_holonomy_angle,
    rotation_angle, sphere_holonomy_angle, subordinate_cut, unit_circle_loop, CutAssignment, GlobalBundle,
    Integrator, DEFAULT_MARGIN,
};
use crate::error::Result;
use crate::matcore::{operator_distance, EndMap, GaugeMap};
use crate::presets;
use crate::reconstruct::{additivity_residual, grid_points, homogeneity_residual, roundtrip_error, OdeOracle};
use crate::transport::{
    cocycle_residual, reparametrize, transport_map, transport_map_steps, transport_product, Path, ProductRule,
    Reparametrization, StepDensity,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    Below(f64),
    AtLeast(f64),
    Within(f64, f64),
}

impl Bound {
    pub fn holds(self, v: f64) -> bool {
        match self {
            Self::Below(t) => v < t,
            Self::AtLeast(t) => v >= t,
            Self::Within(lo, hi) => lo <= v && v <= hi,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Below(t) => write!(f, "< {t:e}"),
            Self::AtLeast(t) => write!(f, ">= {t}"),
            Self::Within(lo, hi) => write!(f, "in [{lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub pass: bool,
    /// Set when the computation itself failed.
    pub error: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, bound: Bound) -> Self {
        Self { name: name.into(), value, bound, pass: bound.holds(value), error: None }
    }

    pub fn failed(name: impl Into<String>, bound: Bound, error: String) -> Self {
        Self { name: name.into(), value: f64::NAN, bound, pass: false, error: Some(error) }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "pass" } else { "FAIL" };
        match &self.error {
            Some(e) => write!(f, "{verdict}  {}: error: {e}", self.name),
            None => write!(f, "{verdict}  {} = {:.6e} ({})", self.name, self.value, self.bound),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    pub checks: Vec<Check>,
}

impl Criterion {
    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    /// One line: verdict, number, title, and the failing checks if any.
    pub fn summary(&self) -> String {
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        let failing: Vec<&str> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        if failing.is_empty() {
            format!("{verdict} [{}] {} ({} checks)", self.id, self.title, self.checks.len())
        } else {
            format!("{verdict} [{}] {} (failing: {})", self.id, self.title, failing.join(", "))
        }
    }
}

/// Replacement thresholds keyed by check name. Applies to `Below` and
/// `AtLeast` bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tolerances(pub BTreeMap<String, f64>);

impl Tolerances {
    pub fn apply(&self, mut c: Check) -> Check {
        if let Some(&t) = self.0.get(&c.name) {
            c.bound = match c.bound {
                Bound::Below(_) => Bound::Below(t),
                Bound::AtLeast(_) => Bound::AtLeast(t),
                b => b,
            };
            c.pass = c.error.is_none() && c.bound.holds(c.value);
        }
        c
    }
}

/// Collects checks, turning computation errors into failing checks.
struct Checks(Vec<Check>);

impl Checks {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn push(&mut self, name: &str, bound: Bound, value: Result<f64>) {
        self.0.push(match value {
            Ok(v) => Check::new(name, v, bound),
            Err(e) => Check::failed(name, bound, e.to_string()),
        });
    }
}

fn max_of(values: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
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

fn rng_for(seed: u64, criterion: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(criterion))
}

/// Triples per preset connection in the cocycle check.
pub const COCYCLE_TRIPLES: usize = 100;

pub fn cocycle(seed: u64) -> Vec<Check> {
    let mut rng = rng_for(seed, 1);
    let mut out = Checks::new();
    let run = |rng: &mut ChaCha8Rng| -> Result<f64> {
        let path = presets::test_spline()?;
        let mut worst: f64 = 0.0;
        for (_, a) in presets::standard_connections()? {
            for _ in 0..COCYCLE_TRIPLES {
                let mut t = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
                t.sort_by(f64::total_cmp);
                worst = worst.max(cocycle_residual(&a, &path, t[0], t[1], t[2], 1e-3)?);
            }
        }
        Ok(worst)
    };
    out.push("cocycle.max_residual", Bound::Below(1e-8), run(&mut rng));
    out.0
}

/// Least-squares slope of `log err` against `log N`, negated.
pub fn convergence_order(ns: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -sxy / sxx
}

/// `N = 16, 32, …, 4096`.
pub fn default_ns() -> Vec<usize> {
    (4..=12).map(|k| 1usize << k).collect()
}

/// Product-formula errors against an RK4 reference.
pub fn convergence_table(
    a: &ConnectionForm,
    path: &Path,
    ns: &[usize],
    rule: ProductRule,
    reference_steps: usize,
) -> Result<Vec<f64>> {
    let (s, t) = path.carrier();
    let reference = transport_map_steps(a, path, s, t, reference_steps)?;
    ns.iter()
        .map(|&n| operator_distance(transport_product(a, path, s, t, n, rule)?.map.as_end(), reference.as_end()))
        .collect()
}

pub const CONVERGENCE_REFERENCE_STEPS: usize = 1 << 15;

pub fn convergence(_seed: u64) -> Vec<Check> {
    let mut out = Checks::new();
    let setup = || -> Result<(ConnectionForm, Path)> { Ok((ConnectionForm::magnetic(1.0)?, presets::convergence_arc()?)) };
    let ns = default_ns();
    let order = |rule| -> Result<f64> {
        let (a, path) = setup()?;
        let errs = convergence_table(&a, &path, &ns, rule, CONVERGENCE_REFERENCE_STEPS)?;
        Ok(convergence_order(&ns, &errs))
    };
    out.push("convergence.left_order", Bound::Within(0.9, 1.1), order(ProductRule::Left));
    out.push("convergence.midpoint_order", Bound::AtLeast(1.8), order(ProductRule::Midpoint));
    // the scalar transport has a closed form: exp of the line integral
    let reference = || -> Result<f64> {
        let (a, path) = setup()?;
        let (s, t) = path.carrier();
        let f = transport_map_steps(&a, &path, s, t, CONVERGENCE_REFERENCE_STEPS)?;
        let (cx, cy, r) = (0.5, 0.2, 1.0);
        let integral = r * r * (t - s) + r * (cx * (t.sin() - s.sin()) - cy * (t.cos() - s.cos()));
        Ok((f.get(0, 0).re - integral.exp()).abs())
    };
    out.push("convergence.reference_error", Bound::Below(1e-12), reference());
    out.0
}

pub const GAUGE_SAMPLES: usize = 50;

/// A random gauge `exp(f₁X₁)·exp(f₂X₂)` on `ℝ²` with smooth coefficients.
pub fn random_gauge(rng: &mut ChaCha8Rng, dim: usize) -> Result<GaugeField> {
    let mut factors = Vec::new();
    for _ in 0..2 {
        let rows: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let coefficient = SmoothCoefficient {
            constant: rng.random_range(-0.5..0.5),
            linear: (0..2).map(|_| rng.random_range(-0.8..0.8)).collect(),
            amplitude: (0..2).map(|_| rng.random_range(0.0..0.5)).collect(),
            frequency: (0..2).map(|_| rng.random_range(0.0..2.0)).collect(),
            phase: (0..2).map(|_| rng.random_range(0.0..TAU)).collect(),
        };
        factors.push(ExpFactor { generator: EndMap::from_rows(&rows)?, coefficient });
    }
    GaugeField::exp_product(Chart::new(2)?, factors)
}

/// `‖g(γ(t))·F_A − F_{A′}·g(γ(s))‖` over the carrier of `path`.
pub fn gauge_covariance_residual(a: &ConnectionForm, g: &GaugeField, path: &Path) -> Result<f64> {
    let a2 = gauge_transform(a, g)?;
    let (s, t) = path.carrier();
    let density = StepDensity::default();
    let f = transport_map(a, path, s, t, density)?;
    let f2 = transport_map(&a2, path, s, t, density)?;
    let lhs = g.value(&path.point(t))?.compose(f.as_end())?;
    let rhs = f2.compose(g.value(&path.point(s))?.as_end())?;
    operator_distance(&lhs, &rhs)
}

pub fn gauge_covariance(seed: u64) -> Vec<Check> {
    let mut rng = rng_for(seed, 3);
    let mut out = Checks::new();
    let run = |rng: &mut ChaCha8Rng| -> Result<f64> {
        let path = presets::test_spline()?;
        let presets = presets::standard_connections()?;
        let mut worst: f64 = 0.0;
        for k in 0..GAUGE_SAMPLES {
            let (_, a) = &presets[k % presets.len()];
            let g = random_gauge(rng, a.fiber_dim())?;
            worst = worst.max(gauge_covariance_residual(a, &g, &path)?);
        }
        Ok(worst)
    };
    out.push("gauge.max_residual", Bound::Below(1e-7), run(&mut rng));
    out.0
}

pub fn identity_and_reparametrization(_seed: u64) -> Vec<Check> {
    let mut out = Checks::new();
    let constant = || -> Result<f64> {
        let path = Path::constant(vec![0.4, -0.7], (0.0, 1.0))?;
        max_of(presets::standard_connections()?.into_iter().map(|(_, a)| {
            let f = transport_map(&a, &path, 0.0, 1.0, StepDensity::default())?;
            operator_distance(f.as_end(), &EndMap::identity(a.fiber_dim()))
        }))
    };
    out.push("identity.constant_path", Bound::Below(1e-12), constant());
    let reparam = || -> Result<f64> {
        let path = presets::test_spline()?;
        let wobble = Reparametrization::Custom {
            map: Arc::new(|u: f64| u + 0.15 * (TAU * u).sin() / TAU),
            derivative: Arc::new(|u: f64| 1.0 + 0.15 * (TAU * u).cos()),
        };
        let maps = [Reparametrization::Power(2.0), Reparametrization::Power(3.0), Reparametrization::Sitting(0.0), Reparametrization::Sitting(0.5), wobble];
        let mut worst: f64 = 0.0;
        for (_, a) in presets::standard_connections()? {
            let f = transport_map(&a, &path, 0.0, 1.0, StepDensity::default())?;
            for m in &maps {
                let q = reparametrize(&path, m.clone())?;
                let g = transport_map(&a, &q, 0.0, 1.0, StepDensity::default())?;
                worst = worst.max(operator_distance(f.as_end(), g.as_end())?);
            }
        }
        Ok(worst)
    };
    out.push("reparametrization.max_residual", Bound::Below(1e-8), reparam());
    out.0
}

/// Step used for the `O(h²)` check, large enough that truncation dominates.
pub const ORDER_CHECK_H: f64 = 0.05;

pub fn reconstruction(seed: u64) -> Vec<Check> {
    let mut rng = rng_for(seed, 5);
    let mut out = Checks::new();
    let h = crate::reconstruct::DEFAULT_H;
    let grid = grid_points(&[(-1.0, 1.0), (-1.0, 1.0)], 5);
    let roundtrip = || -> Result<f64> {
        max_of(presets::standard_connections()?.iter().map(|(_, a)| roundtrip_error(a, &grid, h)))
    };
    out.push("reconstruct.roundtrip_max", Bound::Below(1e-4), roundtrip());
    let mut probes = Vec::new();
    for _ in 0..10 {
        let p: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = rng.random_range(0.5..3.0);
        probes.push((p, u, v, lambda));
    }
    let linearity = |additive: bool| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (_, a) in presets::standard_connections()? {
            let oracle = OdeOracle::new(a);
            for (p, u, v, lambda) in &probes {
                let r = if additive {
                    additivity_residual(&oracle, p, u, v, h)?
                } else {
                    homogeneity_residual(&oracle, p, u, *lambda, h)?
                };
                worst = worst.max(r);
            }
        }
        Ok(worst)
    };
    out.push("reconstruct.homogeneity", Bound::Below(1e-6), linearity(false));
    out.push("reconstruct.additivity", Bound::Below(1e-6), linearity(true));
    let ratio = || -> Result<f64> {
        let a = presets::polynomial()?;
        Ok(roundtrip_error(&a, &grid, ORDER_CHECK_H)? / roundtrip_error(&a, &grid, 0.5 * ORDER_CHECK_H)?)
    };
    out.push("reconstruct.halving_ratio", Bound::Within(3.5, 4.5), ratio());
    out.0
}

pub const SPHERE_THETAS: [(&str, f64); 3] = [("pi/6", PI / 6.0), ("pi/3", PI / 3.0), ("pi/2", PI / 2.0)];

/// Step density of the product-formula cross-check.
pub const DENSE_PRODUCT_DENSITY: f64 = 16384.0;

/// Holonomy angle of the colatitude loop in the stereographic chart centred
/// at the pole: a single-chart oracle.
pub fn polar_chart_angle(theta: f64) -> Result<f64> {
    let f = transport_map(
        &ConnectionForm::levi_civita_sphere(),
        &Path::colatitude_loop(theta)?,
        0.0,
        TAU,
        StepDensity::default(),
    )?;
    rotation_angle(f.as_end())
}

pub fn sphere_holonomy(_seed: u64) -> Vec<Check> {
    let mut out = Checks::new();
    let bundle = GlobalBundle::sphere_tangent();
    for (label, theta) in SPHERE_THETAS {
        let expected = sphere_holonomy_angle(theta);
        let glued = || -> Result<f64> {
            let b = bundle.clone()?;
            Ok(angle_distance(loop_holonomy_angle(&b, &colatitude_circle(theta)?)?, expected))
        };
        out.push(&format!("holonomy.glued[{label}]"), Bound::Below(1e-6), glued());
        let dense = || -> Result<f64> {
            let b = bundle.clone()?;
            let path = colatitude_circle(theta)?;
            let cut = subordinate_cut(&path, b.atlas(), DEFAULT_MARGIN)?;
            let integrator =
                Integrator::Product { rule: ProductRule::Midpoint, density: StepDensity(DENSE_PRODUCT_DENSITY) };
            let f = global_transport(&b, &path, &cut, None, Some(cut.charts[0]), integrator)?;
            Ok(angle_distance(rotation_angle(f.map.as_end())?, expected))
        };
        out.push(&format!("holonomy.dense_product[{label}]"), Bound::Below(1e-6), dense());
        let polar = || -> Result<f64> { Ok(angle_distance(polar_chart_angle(theta)?, expected)) };
        out.push(&format!("holonomy.polar_chart[{label}]"), Bound::Below(1e-6), polar());
    }
    out.0
}

/// A line bundle example: constant rank-2 connection glued by `exp(x·X)`.
pub fn line_bundle() -> Result<GlobalBundle> {
    GlobalBundle::line(
        ConnectionForm::constant(Chart::new(1)?, vec![EndMap::from_rows(&[vec![0.3, -0.8], vec![0.5, -0.1]])?])?,
        EndMap::from_rows(&[vec![0.0, -0.4], vec![0.4, 0.1]])?,
    )
}

/// Great-circle arc through the middle of the sphere overlap (`x = 0`).
pub fn overlap_arc() -> Result<Path> {
    Path::circle_arc(vec![0.0, 0.0, 0.0], 1.0, vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], (0.0, 1.5))
}

pub fn descent(_seed: u64) -> Vec<Check> {
    let mut out = Checks::new();
    let refinement = || -> Result<f64> {
        let line = line_bundle()?;
        let seg = Path::segment(vec![-1.8], vec![1.8])?;
        let sphere = GlobalBundle::sphere_tangent()?;
        let equator = colatitude_circle(PI / 2.0)?;
        let mut worst: f64 = 0.0;
        for (b, p) in [(&line, &seg), (&sphere, &equator)] {
            let cut = subordinate_cut(p, b.atlas(), DEFAULT_MARGIN)?;
            let target = Some(*cut.charts.last().expect("nonempty"));
            let f1 = global_transport(b, p, &cut, None, target, Integrator::default())?;
            let f2 = global_transport(b, p, &cut.refine(), None, target, Integrator::default())?;
            worst = worst.max(operator_distance(f1.map.as_end(), f2.map.as_end())?);
        }
        Ok(worst)
    };
    out.push("descent.cut_refinement", Bound::Below(1e-10), refinement());
    let single = || -> Result<f64> {
        // line: chart 0's connection extends over R, so compare after a frame change
        let line = line_bundle()?;
        let seg = Path::segment(vec![-1.8], vec![1.8])?;
        let cut = subordinate_cut(&seg, line.atlas(), DEFAULT_MARGIN)?;
        let glued = global_transport(&line, &seg, &cut, Some(0), Some(1), Integrator::default())?;
        let direct = transport_map(&line.connections()[0], &seg, 0.0, 1.0, StepDensity::default())?;
        let g = line.cocycle().value(0, 1, &[1.8])?;
        let r1 = operator_distance(glued.map.as_end(), &g.compose(direct.as_end())?)?;
        // sphere: an arc inside both charts, glued through an excursion into chart 1
        let sphere = GlobalBundle::sphere_tangent()?;
        let arc = overlap_arc()?;
        let cut = CutAssignment::new(vec![0.0, 0.5, 1.0, 1.5], vec![0, 1, 0])?;
        let glued = global_transport(&sphere, &arc, &cut, None, None, Integrator::default())?;
        let local = crate::descent::local_path(sphere.atlas(), 0, &arc, 0.0, 1.5)?;
        let direct = transport_map(&sphere.connections()[0], &local, 0.0, 1.5, StepDensity::default())?;
        let r2 = operator_distance(glued.map.as_end(), direct.as_end())?;
        Ok(r1.max(r2))
    };
    out.push("descent.glued_vs_single_chart", Bound::Below(1e-8), single());
    let cech = || -> Result<f64> {
        let bundles = [line_bundle()?, GlobalBundle::flat_circle(0.7)?, GlobalBundle::sphere_tangent()?];
        max_of(bundles.iter().map(|b| check_cech_cocycle(b.atlas(), b.cocycle(), 32)))
    };
    out.push("descent.cech_residual", Bound::Below(1e-10), cech());
    out.0
}

fn magnetic_bundle() -> Result<GlobalBundle> {
    GlobalBundle::flat(ConnectionForm::magnetic(1.0)?)
}

pub fn bordism(seed: u64) -> Vec<Check> {
    let mut rng = rng_for(seed, 8);
    let mut out = Checks::new();
    let theta = PI / 3.0;
    let constant_snakes = || -> Result<f64> {
        let m = magnetic_bundle()?;
        let s = GlobalBundle::sphere_tangent()?;
        let x = vec![0.3, -0.4];
        let y = colatitude_circle(theta)?.point(1.0);
        max_of([
            snake_residual(&m, &x, &Path::constant(x.clone(), (0.0, 1.0))?),
            snake_residual(&s, &y, &Path::constant(y.clone(), (0.0, 1.0))?),
        ])
    };
    out.push("bordism.snake_constant", Bound::Below(1e-10), constant_snakes());
    let one_chart = || -> Result<f64> {
        let m = magnetic_bundle()?;
        let lp = Path::planar_arc([0.0, -0.4], 0.3, (0.0, TAU))?;
        snake_residual(&m, &lp.point(0.0), &lp)
    };
    out.push("bordism.snake_one_chart", Bound::Below(1e-10), one_chart());
    let across = || -> Result<f64> {
        let s = GlobalBundle::sphere_tangent()?;
        let lp = colatitude_circle(theta)?;
        snake_residual(&s, &lp.point(0.0), &lp)
    };
    out.push("bordism.snake_across_charts", Bound::Below(1e-8), across());
    let circle = || -> Result<f64> {
        let s = GlobalBundle::sphere_tangent()?;
        let lp = colatitude_circle(theta)?;
        let v = evaluate_bordism(&circle_word(&s, &lp)?, &s)?.scalar()?;
        let tr = glued_transport(&s, &lp)?.map.trace();
        let phi = 0.9;
        let c = GlobalBundle::flat_circle(phi)?;
        let w = evaluate_bordism(&circle_word(&c, &unit_circle_loop()?)?, &c)?.scalar()?;
        Ok((v - tr).norm().max((w.re - 2.0 * phi.cos()).abs() + w.im.abs()))
    };
    out.push("bordism.circle_vs_trace", Bound::Below(1e-8), circle());
    let monoidal = || -> Result<f64> {
        let m = magnetic_bundle()?;
        let lp = Path::planar_arc([0.2, 0.1], 0.4, (0.0, TAU))?;
        let x = lp.point(0.0);
        let w1 = snake_word(&m, &x, &lp, Sign::Plus)?;
        let y = SignedPoint::at(&m, Sign::Minus, vec![-0.3, 0.2])?;
        let arc = Path::segment(vec![-0.3, 0.2], vec![0.5, 0.6])?;
        let w2 = BordismWord::new(vec![y], vec![vec![Generator::arc(arc, Sign::Minus)]]);
        let s = GlobalBundle::sphere_tangent()?;
        let c = circle_word(&s, &colatitude_circle(theta)?)?;
        let s_snake = snake_word(&s, &colatitude_circle(theta)?.point(0.0), &colatitude_circle(theta)?, Sign::Minus)?;
        let mut worst: f64 = 0.0;
        for (b, u, v) in [(&m, &w1, &w2), (&s, &c, &s_snake)] {
            let (e1, e2) = (evaluate_bordism(u, b)?, evaluate_bordism(v, b)?);
            let eu = evaluate_bordism(&disjoint_union(u, v, b)?, b)?;
            let diff = (e1.matrix.kronecker(&e2.matrix) - &eu.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
            worst = worst.max(diff);
        }
        Ok(worst)
    };
    out.push("bordism.monoidality", Bound::Below(1e-12), monoidal());
    let sitting = || -> Result<f64> {
        let s = GlobalBundle::sphere_tangent()?;
        let lp = colatitude_circle(theta)?;
        let mut worst: f64 = 0.0;
        for w in [circle_word(&s, &lp)?, snake_word(&s, &lp.point(0.0), &lp, Sign::Plus)?] {
            let a = evaluate_bordism(&w, &s)?;
            let b = evaluate_bordism(&w.with_sitting_instances(0.0)?, &s)?;
            worst = worst.max((&a.matrix - &b.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        Ok(worst)
    };
    out.push("bordism.sitting_instances", Bound::Below(1e-8), sitting());
    let pairing = |rng: &mut ChaCha8Rng| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let f = EndMap::from_rows(&rows)?.add(&EndMap::identity(3).scale(2.0))?;
            worst = worst.max(pairing_residual(&GaugeMap::new(f)?)?);
        }
        Ok(worst)
    };
    out.push("bordism.pairing_invariance", Bound::Below(1e-10), pairing(&mut rng));
    let perms = || -> Result<f64> {
        let b = GlobalBundle::flat(ConnectionForm::zero(Chart::new(1)?, 2)?)?;
        let pts: Vec<SignedPoint> = [(Sign::Plus, 0.0), (Sign::Minus, 1.0), (Sign::Plus, 2.0)]
            .into_iter()
            .map(|(s, x)| SignedPoint::at(&b, s, vec![x]))
            .collect::<Result<_>>()?;
        let (sigma, tau) = (vec![2, 0, 1], vec![1, 0, 2]);
        let st: Vec<usize> = (0..3).map(|i| sigma[tau[i]]).collect();
        let two = BordismWord::new(pts.clone(), vec![vec![Generator::Perm(tau)], vec![Generator::Perm(sigma)]]);
        let one = BordismWord::new(pts, vec![vec![Generator::Perm(st)]]);
        let (a, c) = (evaluate_bordism(&two, &b)?, evaluate_bordism(&one, &b)?);
        Ok((&a.matrix - &c.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max))
    };
    out.push("bordism.permutation_coherence", Bound::Below(1e-15), perms());
    out.0
}

pub const CRITERIA: [(usize, &str); 8] = [
    (1, "cocycle identity"),
    (2, "product-formula convergence"),
    (3, "gauge covariance"),
    (4, "constant-path identity and reparametrization invariance"),
    (5, "reconstruction round trip"),
    (6, "sphere holonomy"),
    (7, "descent"),
    (8, "bordism relations"),
];

/// Runs one criterion by number.
pub fn run_criterion(id: usize, seed: u64, tolerances: &Tolerances) -> Option<Criterion> {
    let checks = match id {
        1 => cocycle(seed),
        2 => convergence(seed),
        3 => gauge_covariance(seed),
        4 => identity_and_reparametrization(seed),
        5 => reconstruction(seed),
        6 => sphere_holonomy(seed),
        7 => descent(seed),
        8 => bordism(seed),
        _ => return None,
    };
    let title = CRITERIA[id - 1].1;
    Some(Criterion { id, title, checks: checks.into_iter().map(|c| tolerances.apply(c)).collect() })
}

/// Every criterion, in order. Deterministic given the seed.
pub fn verify_all(seed: u64, tolerances: &Tolerances) -> Vec<Criterion> {
    CRITERIA.iter().filter_map(|&(id, _)| run_criterion(id, seed, tolerances)).collect()
}
