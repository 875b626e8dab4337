//! Decorated 1-dimensional bordism words and their evaluation against a
//! glued bundle.
//!
//! A word is a sequence of slices. Each slice is a parallel arrangement of
//! generator tokens that consume the incoming strands from left to right.
//! Strand order is tensor-factor order, with the leftmost strand the most
//! significant index.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::descent::{global_transport, subordinate_cut, GlobalBundle, Integrator, DEFAULT_MARGIN};
use crate::error::{Error, Result};
use crate::matcore::{matrix_inverse, GaugeMap, Scalar};
use crate::transport::{with_sitting_instances, Path};

/// Largest tensor dimension a slice may have.
pub const MAX_TENSOR_DIM: usize = 1 << 16;

const LOCATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Self::Plus => Self::Minus,
            Self::Minus => Self::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Plus => "+",
            Self::Minus => "-",
        })
    }
}

/// A signed point of the base with the chart whose frame describes its fiber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedPoint {
    pub sign: Sign,
    pub point: Vec<f64>,
    pub chart: usize,
}

impl SignedPoint {
    /// The point in the chart where it lies deepest.
    pub fn at(b: &GlobalBundle, sign: Sign, point: Vec<f64>) -> Result<Self> {
        let chart = b.atlas().home_chart(&point)?;
        Ok(Self { sign, point, chart })
    }

    fn matches(&self, other: &SignedPoint) -> bool {
        self.sign == other.sign
            && self.chart == other.chart
            && self.point.len() == other.point.len()
            && self.point.iter().zip(&other.point).all(|(a, b)| (a - b).abs() <= LOCATION_TOL)
    }
}

impl fmt::Display for SignedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {:?} @ chart {})", self.sign, self.point, self.chart)
    }
}

/// An ordered list of signed points; empty is the monoidal unit.
pub type ObjectConfig = Vec<SignedPoint>;

/// A strand decorated by a path. On a `−` strand the underlying oriented arc
/// runs along the path backwards and the strand carries the dual transport.
#[derive(Debug, Clone)]
pub struct ArcToken {
    pub path: Path,
    pub sign: Sign,
    /// Frame chart at the start; defaults to the home chart of `γ(t₀)`.
    pub source_chart: Option<usize>,
    /// Frame chart at the end; defaults to the home chart of `γ(t_k)`.
    pub target_chart: Option<usize>,
}

impl ArcToken {
    pub fn new(path: Path, sign: Sign) -> Self {
        Self { path, sign, source_chart: None, target_chart: None }
    }

    fn endpoints(&self, b: &GlobalBundle) -> Result<(SignedPoint, SignedPoint)> {
        let (s, t) = self.path.carrier();
        let tag = |u: f64, chart: Option<usize>| -> Result<SignedPoint> {
            let point = self.path.point(u);
            match chart {
                Some(c) => Ok(SignedPoint { sign: self.sign, point, chart: c }),
                None => SignedPoint::at(b, self.sign, point),
            }
        };
        Ok((tag(s, self.source_chart)?, tag(t, self.target_chart)?))
    }
}

#[derive(Debug, Clone)]
pub enum Generator {
    /// Undecorated strand.
    Id(SignedPoint),
    Arc(ArcToken),
    /// Birth of the pair `(first, −first)` at `point`.
    Coev { point: Vec<f64>, first: Sign },
    /// Death of the pair `(first, −first)` at `point`.
    Ev { point: Vec<f64>, first: Sign },
    /// Sends incoming strand `i` to outgoing position `σ(i)`.
    Perm(Vec<usize>),
}

impl Generator {
    pub fn arc(path: Path, sign: Sign) -> Self {
        Self::Arc(ArcToken::new(path, sign))
    }

    fn arity(&self) -> usize {
        match self {
            Self::Id(_) | Self::Arc(_) => 1,
            Self::Coev { .. } => 0,
            Self::Ev { .. } => 2,
            Self::Perm(s) => s.len(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Id(_) => "id",
            Self::Arc(_) => "arc",
            Self::Coev { .. } => "coev",
            Self::Ev { .. } => "ev",
            Self::Perm(_) => "perm",
        }
    }
}

pub type Slice = Vec<Generator>;

#[derive(Debug, Clone)]
pub struct BordismWord {
    pub source: ObjectConfig,
    pub slices: Vec<Slice>,
}

/// Tensor factorization of the value of an object: one fiber (or dual fiber,
/// for `−` points) of dimension `d` per point.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpace {
    pub points: ObjectConfig,
    pub fiber_dim: usize,
}

impl FiberSpace {
    pub fn dim(&self) -> usize {
        self.fiber_dim.pow(self.points.len() as u32)
    }

    /// Covariance tag per factor: `V` or `V*`.
    pub fn tags(&self) -> Vec<&'static str> {
        self.points.iter().map(|p| if p.sign == Sign::Plus { "V" } else { "V*" }).collect()
    }
}

/// A linear map between fiber spaces, as a `target.dim() × source.dim()` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub source: FiberSpace,
    pub target: FiberSpace,
    pub matrix: DMatrix<Scalar>,
}

impl LinearMap {
    /// `‖M − I‖_F`, for endomorphisms only.
    pub fn distance_from_identity(&self) -> Result<f64> {
        if self.matrix.nrows() != self.matrix.ncols() {
            return Err(Error::Composition("map is not an endomorphism".into()));
        }
        let n = self.matrix.nrows();
        Ok((&self.matrix - DMatrix::<Scalar>::identity(n, n)).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
    }

    /// The scalar of a map between unit objects.
    pub fn scalar(&self) -> Result<Scalar> {
        if self.matrix.shape() != (1, 1) {
            return Err(Error::Composition(format!("map has shape {:?}, not 1x1", self.matrix.shape())));
        }
        Ok(self.matrix[(0, 0)])
    }
}

/// Checks that the points are interior to their charts.
pub fn evaluate_object(cfg: &[SignedPoint], b: &GlobalBundle) -> Result<FiberSpace> {
    check_dim(b.fiber_dim(), cfg.len())?;
    for p in cfg {
        b.atlas().check_point(&p.point).map_err(|e| Error::Coverage(e.to_string()))?;
        if !(b.atlas().depth(p.chart, &p.point)? > 0.0) {
            return Err(Error::Coverage(format!("{p} is not interior to its chart")));
        }
    }
    Ok(FiberSpace { points: cfg.to_vec(), fiber_dim: b.fiber_dim() })
}

fn check_dim(d: usize, n: usize) -> Result<()> {
    let total = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > MAX_TENSOR_DIM as u128 {
        return Err(Error::InvalidInput(format!("{n} strands of rank {d} exceed the tensor size limit")));
    }
    Ok(())
}

/// Inverse transpose: the unique map keeping the evaluation pairing invariant.
pub fn dual_transport(f: &GaugeMap) -> Result<GaugeMap> {
    Ok(matrix_inverse(f)?.transpose())
}

fn coev_vector(d: usize) -> DMatrix<Scalar> {
    DMatrix::from_fn(d * d, 1, |r, _| if r / d == r % d { Scalar::new(1.0, 0.0) } else { Scalar::new(0.0, 0.0) })
}

/// Matrix of the strand permutation sending factor `i` to position `σ(i)`.
fn permutation_matrix(sigma: &[usize], d: usize) -> DMatrix<Scalar> {
    let n = sigma.len();
    let total = d.pow(n as u32);
    let mut m = DMatrix::zeros(total, total);
    let mut digits = vec![0usize; n];
    for col in 0..total {
        let mut rest = col;
        for k in (0..n).rev() {
            digits[k] = rest % d;
            rest /= d;
        }
        let mut out = vec![0usize; n];
        for (k, &i) in digits.iter().enumerate() {
            out[sigma[k]] = i;
        }
        let row = out.iter().fold(0, |acc, &i| acc * d + i);
        m[(row, col)] = Scalar::new(1.0, 0.0);
    }
    m
}

fn check_permutation(sigma: &[usize]) -> Result<()> {
    let mut seen = vec![false; sigma.len()];
    for &s in sigma {
        if s >= sigma.len() || seen[s] {
            return Err(Error::Composition(format!("{sigma:?} is not a permutation")));
        }
        seen[s] = true;
    }
    Ok(())
}

fn arc_matrix(b: &GlobalBundle, arc: &ArcToken, source: &SignedPoint, target: &SignedPoint) -> Result<DMatrix<Scalar>> {
    let cut = subordinate_cut(&arc.path, b.atlas(), DEFAULT_MARGIN)?;
    let f = global_transport(b, &arc.path, &cut, Some(source.chart), Some(target.chart), Integrator::default())?.map;
    Ok(match arc.sign {
        Sign::Plus => f.into_end().into_matrix(),
        Sign::Minus => dual_transport(&f)?.into_end().into_matrix(),
    })
}

fn mismatch(slice: usize, token: &Generator, expected: &SignedPoint, got: &SignedPoint) -> Error {
    Error::Composition(format!(
        "slice {slice}: {} expects {expected} but receives {got}",
        token.name()
    ))
}

/// Outgoing strands of one slice; with `b` given, also its matrix.
fn apply_slice(
    b: &GlobalBundle,
    index: usize,
    slice: &[Generator],
    input: &[SignedPoint],
    with_matrix: bool,
) -> Result<(ObjectConfig, Option<DMatrix<Scalar>>)> {
    let d = b.fiber_dim();
    let one = DMatrix::from_element(1, 1, Scalar::new(1.0, 0.0));
    let mut matrix = if with_matrix { Some(one) } else { None };
    let mut output = Vec::new();
    let mut pos = 0;
    for token in slice {
        let n = token.arity();
        let ins = input.get(pos..pos + n).ok_or_else(|| {
            Error::Composition(format!("slice {index}: {} needs {n} strands but too few remain", token.name()))
        })?;
        pos += n;
        let m = match token {
            Generator::Id(p) => {
                if !ins[0].matches(p) {
                    return Err(mismatch(index, token, p, &ins[0]));
                }
                output.push(p.clone());
                with_matrix.then(|| DMatrix::identity(d, d))
            }
            Generator::Arc(arc) => {
                let (s, t) = arc.endpoints(b)?;
                if !ins[0].matches(&s) {
                    return Err(mismatch(index, token, &s, &ins[0]));
                }
                let m = if with_matrix { Some(arc_matrix(b, arc, &s, &t)?) } else { None };
                output.push(t);
                m
            }
            Generator::Coev { point, first } => {
                let a = SignedPoint::at(b, *first, point.clone())?;
                let c = SignedPoint { sign: first.flip(), ..a.clone() };
                output.push(a);
                output.push(c);
                with_matrix.then(|| coev_vector(d))
            }
            Generator::Ev { point, first } => {
                let a = SignedPoint::at(b, *first, point.clone())?;
                let c = SignedPoint { sign: first.flip(), ..a.clone() };
                if !ins[0].matches(&a) {
                    return Err(mismatch(index, token, &a, &ins[0]));
                }
                if !ins[1].matches(&c) {
                    return Err(mismatch(index, token, &c, &ins[1]));
                }
                with_matrix.then(|| coev_vector(d).transpose())
            }
            Generator::Perm(sigma) => {
                check_permutation(sigma)?;
                let mut out = ins.to_vec();
                for (i, p) in ins.iter().enumerate() {
                    out[sigma[i]] = p.clone();
                }
                output.extend(out);
                check_dim(d, n)?;
                with_matrix.then(|| permutation_matrix(sigma, d))
            }
        };
        if let (Some(acc), Some(m)) = (matrix.as_mut(), m) {
            *acc = acc.kronecker(&m);
        }
    }
    if pos != input.len() {
        return Err(Error::Composition(format!(
            "slice {index} consumes {pos} of {} incoming strands",
            input.len()
        )));
    }
    check_dim(d, output.len())?;
    Ok((output, matrix))
}

impl BordismWord {
    pub fn new(source: ObjectConfig, slices: Vec<Slice>) -> Self {
        Self { source, slices }
    }

    /// Boundary objects `source, after slice 1, …, target`.
    pub fn boundaries(&self, b: &GlobalBundle) -> Result<Vec<ObjectConfig>> {
        let mut out = vec![self.source.clone()];
        for (k, slice) in self.slices.iter().enumerate() {
            let (next, _) = apply_slice(b, k, slice, out.last().expect("nonempty"), false)?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn target(&self, b: &GlobalBundle) -> Result<ObjectConfig> {
        Ok(self.boundaries(b)?.pop().expect("nonempty"))
    }

    /// The same word with every arc path given sitting instances.
    pub fn with_sitting_instances(&self, blend: f64) -> Result<Self> {
        let slices = self
            .slices
            .iter()
            .map(|s| {
                s.iter()
                    .map(|g| match g {
                        Generator::Arc(a) => Ok(Generator::Arc(ArcToken {
                            path: with_sitting_instances(&a.path, blend)?,
                            ..a.clone()
                        })),
                        other => Ok(other.clone()),
                    })
                    .collect::<Result<Slice>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { source: self.source.clone(), slices })
    }
}

/// Composite of the slice maps, each the ordered tensor product of its tokens.
pub fn evaluate_bordism(w: &BordismWord, b: &GlobalBundle) -> Result<LinearMap> {
    let source = evaluate_object(&w.source, b)?;
    let mut current = w.source.clone();
    let mut acc = DMatrix::<Scalar>::identity(source.dim(), source.dim());
    for (k, slice) in w.slices.iter().enumerate() {
        let (next, m) = apply_slice(b, k, slice, &current, true)?;
        acc = m.expect("matrix requested") * acc;
        current = next;
    }
    let target = evaluate_object(&current, b)?;
    Ok(LinearMap { source, target, matrix: acc })
}

/// Places two words side by side, padding the shorter with identity strands.
pub fn disjoint_union(w1: &BordismWord, w2: &BordismWord, b: &GlobalBundle) -> Result<BordismWord> {
    let (b1, b2) = (w1.boundaries(b)?, w2.boundaries(b)?);
    let n = w1.slices.len().max(w2.slices.len());
    let pad = |w: &BordismWord, bounds: &[ObjectConfig], k: usize| -> Slice {
        match w.slices.get(k) {
            Some(s) => s.clone(),
            None => bounds.last().expect("nonempty").iter().cloned().map(Generator::Id).collect(),
        }
    };
    let slices = (0..n)
        .map(|k| {
            let mut s = pad(w1, &b1, k);
            s.extend(pad(w2, &b2, k));
            s
        })
        .collect();
    let mut source = w1.source.clone();
    source.extend(w2.source.iter().cloned());
    Ok(BordismWord { source, slices })
}

/// Coevaluation, the loop on the `+` strand, evaluation: the closed circle
/// whose value is the trace of the holonomy.
pub fn circle_word(b: &GlobalBundle, path: &Path) -> Result<BordismWord> {
    let (s, t) = path.carrier();
    let x = path.point(s);
    let y = path.point(t);
    if x.iter().zip(&y).any(|(a, c)| (a - c).abs() > LOCATION_TOL) {
        return Err(Error::InvalidInput("the circle word needs a closed path".into()));
    }
    let minus = SignedPoint::at(b, Sign::Minus, x.clone())?;
    Ok(BordismWord::new(
        vec![],
        vec![
            vec![Generator::Coev { point: x.clone(), first: Sign::Plus }],
            vec![Generator::arc(path.clone(), Sign::Plus), Generator::Id(minus)],
            vec![Generator::Ev { point: x, first: Sign::Plus }],
        ],
    ))
}

/// The zig-zag on `V_x` (`first = +`) or on `V*_x` (`first = −`), with `γ` on
/// the through strand and on the cancelling strand.
pub fn snake_word(b: &GlobalBundle, x: &[f64], path: &Path, first: Sign) -> Result<BordismWord> {
    let through = SignedPoint::at(b, first, x.to_vec())?;
    let (coev, ev, arcs) = match first {
        Sign::Plus => (
            vec![Generator::Id(through.clone()), Generator::Coev { point: x.to_vec(), first: Sign::Minus }],
            vec![Generator::Ev { point: x.to_vec(), first: Sign::Plus }, Generator::Id(through.clone())],
            vec![
                Generator::arc(path.clone(), Sign::Plus),
                Generator::arc(path.clone(), Sign::Minus),
                Generator::Id(through.clone()),
            ],
        ),
        Sign::Minus => (
            vec![Generator::Id(through.clone()), Generator::Coev { point: x.to_vec(), first: Sign::Plus }],
            vec![Generator::Ev { point: x.to_vec(), first: Sign::Minus }, Generator::Id(through.clone())],
            vec![
                Generator::arc(path.clone(), Sign::Minus),
                Generator::arc(path.clone(), Sign::Plus),
                Generator::Id(SignedPoint { sign: Sign::Minus, ..through.clone() }),
            ],
        ),
    };
    Ok(BordismWord::new(vec![through], vec![coev, arcs, ev]))
}

/// Larger of the two zig-zag residuals `‖snake − id‖` for a loop `γ` at `x`.
pub fn snake_residual(b: &GlobalBundle, x: &[f64], path: &Path) -> Result<f64> {
    let (s, t) = path.carrier();
    for end in [path.point(s), path.point(t)] {
        if end.iter().zip(x).any(|(a, c)| (a - c).abs() > LOCATION_TOL) {
            return Err(Error::InvalidInput("the snake needs a loop at x".into()));
        }
    }
    let mut worst: f64 = 0.0;
    for first in [Sign::Plus, Sign::Minus] {
        let m = evaluate_bordism(&snake_word(b, x, path, first)?, b)?;
        worst = worst.max(m.distance_from_identity()?);
    }
    Ok(worst)
}

/// `‖Ev∘(F ⊗ F^dual) − Ev‖` for the rank of `f`.
pub fn pairing_residual(f: &GaugeMap) -> Result<f64> {
    let d = f.dim();
    let dual = dual_transport(f)?;
    let ev = coev_vector(d).transpose();
    let lhs = &ev * f.matrix().kronecker(dual.matrix());
    Ok((lhs - ev).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::EndMap;
    use crate::connection::ConnectionForm;
    use crate::descent::{colatitude_circle, glued_transport};

    fn magnetic() -> GlobalBundle {
        GlobalBundle::flat(ConnectionForm::magnetic(0.8).unwrap()).unwrap()
    }

    fn rank2_flat() -> GlobalBundle {
        GlobalBundle::flat(ConnectionForm::zero(crate::connection::Chart::new(2).unwrap(), 2).unwrap()).unwrap()
    }

    #[test]
    fn objects_and_dimensions() {
        let b = GlobalBundle::flat(ConnectionForm::zero(crate::connection::Chart::new(2).unwrap(), 3).unwrap()).unwrap();
        assert_eq!(evaluate_object(&[], &b).unwrap().dim(), 1);
        let x = SignedPoint::at(&b, Sign::Plus, vec![0.0, 0.0]).unwrap();
        assert_eq!(evaluate_object(std::slice::from_ref(&x), &b).unwrap().dim(), 3);
        let b2 = rank2_flat();
        let y = SignedPoint::at(&b2, Sign::Minus, vec![1.0, 0.0]).unwrap();
        let x = SignedPoint::at(&b2, Sign::Plus, vec![0.0, 0.0]).unwrap();
        let fs = evaluate_object(&[x, y], &b2).unwrap();
        assert_eq!(fs.dim(), 4);
        assert_eq!(fs.tags(), vec!["V", "V*"]);
    }

    #[test]
    fn dual_of_diagonal() {
        let f = GaugeMap::new(EndMap::diagonal(&[2.0, 3.0]).unwrap()).unwrap();
        let d = dual_transport(&f).unwrap();
        assert_eq!(*d.as_end(), EndMap::diagonal(&[0.5, 1.0 / 3.0]).unwrap());
        assert!(pairing_residual(&f).unwrap() < 1e-15);
        let g = GaugeMap::new(EndMap::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.7]]).unwrap()).unwrap();
        assert!(pairing_residual(&g).unwrap() < 1e-10);
    }

    #[test]
    fn constant_arc_is_identity() {
        let b = rank2_flat();
        let p = Path::constant(vec![0.3, 0.1], (0.0, 1.0)).unwrap();
        let x = SignedPoint::at(&b, Sign::Plus, vec![0.3, 0.1]).unwrap();
        let w = BordismWord::new(vec![x], vec![vec![Generator::arc(p, Sign::Plus)]]);
        assert_eq!(evaluate_bordism(&w, &b).unwrap().distance_from_identity().unwrap(), 0.0);
    }

    #[test]
    fn snakes() {
        let b = magnetic();
        let x = vec![0.5, -0.2];
        let constant = Path::constant(x.clone(), (0.0, 1.0)).unwrap();
        assert!(snake_residual(&b, &x, &constant).unwrap() < 1e-12);
        let lp = Path::planar_arc([0.0, -0.2], 0.5, (0.0, std::f64::consts::TAU)).unwrap();
        assert!(snake_residual(&b, &x, &lp).unwrap() < 1e-10);
        let s = GlobalBundle::sphere_tangent().unwrap();
        let l = colatitude_circle(std::f64::consts::PI / 3.0).unwrap();
        assert!(snake_residual(&s, &l.point(0.0), &l).unwrap() < 1e-8);
    }

    #[test]
    fn circle_is_trace() {
        let s = GlobalBundle::sphere_tangent().unwrap();
        let l = colatitude_circle(std::f64::consts::PI / 3.0).unwrap();
        let v = evaluate_bordism(&circle_word(&s, &l).unwrap(), &s).unwrap().scalar().unwrap();
        let h = glued_transport(&s, &l).unwrap().map.trace();
        assert!((v - h).norm() < 1e-8);
        assert!((v.re + 2.0).abs() < 1e-6);
        let flat = rank2_flat();
        let c = Path::constant(vec![1.0, 0.0], (0.0, 1.0)).unwrap();
        let v = evaluate_bordism(&circle_word(&flat, &c).unwrap(), &flat).unwrap().scalar().unwrap();
        assert_eq!(v, Scalar::new(2.0, 0.0));
    }

    #[test]
    fn permutations_compose() {
        let b = GlobalBundle::flat(ConnectionForm::zero(crate::connection::Chart::new(1).unwrap(), 2).unwrap()).unwrap();
        let pts: Vec<SignedPoint> =
            (0..3).map(|k| SignedPoint::at(&b, Sign::Plus, vec![k as f64]).unwrap()).collect();
        let sigma = vec![1, 2, 0];
        let tau = vec![2, 0, 1];
        let st: Vec<usize> = (0..3).map(|i| sigma[tau[i]]).collect();
        let two = BordismWord::new(pts.clone(), vec![vec![Generator::Perm(tau)], vec![Generator::Perm(sigma)]]);
        let one = BordismWord::new(pts, vec![vec![Generator::Perm(st)]]);
        let (a, c) = (evaluate_bordism(&two, &b).unwrap(), evaluate_bordism(&one, &b).unwrap());
        assert_eq!(a.matrix, c.matrix);
        assert_eq!(a.target, c.target);
    }

    #[test]
    fn disjoint_union_is_tensor_product() {
        let b = magnetic();
        let x = vec![0.1, 0.2];
        let lp = Path::planar_arc([0.1, 0.0], 0.2, (0.5 * std::f64::consts::PI, 2.0 * std::f64::consts::PI + 0.5 * std::f64::consts::PI))
            .unwrap();
        let w1 = snake_word(&b, &x, &lp, Sign::Plus).unwrap();
        let arc = Path::segment(vec![0.0, 0.0], vec![0.4, 0.3]).unwrap();
        let y = SignedPoint::at(&b, Sign::Plus, vec![0.0, 0.0]).unwrap();
        let w2 = BordismWord::new(vec![y], vec![vec![Generator::arc(arc, Sign::Plus)]]);
        let u = disjoint_union(&w1, &w2, &b).unwrap();
        let (e1, e2, eu) =
            (evaluate_bordism(&w1, &b).unwrap(), evaluate_bordism(&w2, &b).unwrap(), evaluate_bordism(&u, &b).unwrap());
        let diff = (e1.matrix.kronecker(&e2.matrix) - &eu.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn mismatched_slices_are_rejected() {
        let b = rank2_flat();
        let x = SignedPoint::at(&b, Sign::Plus, vec![0.0, 0.0]).unwrap();
        let arc = Path::segment(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let w = BordismWord::new(vec![x.clone()], vec![vec![Generator::arc(arc, Sign::Plus)]]);
        assert!(matches!(evaluate_bordism(&w, &b).unwrap_err(), Error::Composition(_)));
        let w = BordismWord::new(vec![x.clone()], vec![vec![Generator::Ev { point: vec![0.0, 0.0], first: Sign::Plus }]]);
        assert!(matches!(evaluate_bordism(&w, &b).unwrap_err(), Error::Composition(_)));
        let w = BordismWord::new(vec![x], vec![vec![]]);
        assert!(matches!(evaluate_bordism(&w, &b).unwrap_err(), Error::Composition(_)));
    }

    #[test]
    fn sitting_instances_do_not_change_the_value() {
        let s = GlobalBundle::sphere_tangent().unwrap();
        let l = colatitude_circle(std::f64::consts::PI / 3.0).unwrap();
        let w = circle_word(&s, &l).unwrap();
        let a = evaluate_bordism(&w, &s).unwrap().scalar().unwrap();
        let c = evaluate_bordism(&w.with_sitting_instances(0.0).unwrap(), &s).unwrap().scalar().unwrap();
        assert!((a - c).norm() < 1e-8);
    }
}
