//! Recovering a connection 1-form from black-box transport.
//!
//! A [`TransportOracle`] answers `F(p, v; s, t)`: the transport along the
//! affine probe `u ↦ p + u·v` restricted to `[s, t]`. The connection value is
//! the derivative `A_p(v) = ∂ₜ F(p, v; 0, t)|ₜ₌₀`.

use std::io::{Read, Write};
use std::sync::Mutex;

use nalgebra::DMatrix;

use crate::connection::{evaluate_connection, ConnectionForm, GaugeField, SampledField};
use crate::error::{Error, Result};
use crate::matcore::{matrix_inverse, operator_distance, EndMap, Field, GaugeMap, Scalar};
use crate::transport::{transport_map_steps, Path};

/// Default finite-difference step.
pub const DEFAULT_H: f64 = 1e-4;

/// Transport along affine probe paths.
///
/// Implementations must return the identity when `s == t`.
pub trait TransportOracle {
    fn chart_dim(&self) -> usize;
    fn fiber_dim(&self) -> usize;
    fn transport(&self, p: &[f64], v: &[f64], s: f64, t: f64) -> Result<GaugeMap>;
}

impl<T: TransportOracle + ?Sized> TransportOracle for &T {
    fn chart_dim(&self) -> usize {
        (**self).chart_dim()
    }
    fn fiber_dim(&self) -> usize {
        (**self).fiber_dim()
    }
    fn transport(&self, p: &[f64], v: &[f64], s: f64, t: f64) -> Result<GaugeMap> {
        (**self).transport(p, v, s, t)
    }
}

/// Transport of a known connection, computed with RK4.
#[derive(Debug, Clone)]
pub struct OdeOracle {
    connection: ConnectionForm,
    max_step: f64,
    min_steps: usize,
}

impl OdeOracle {
    pub fn new(connection: ConnectionForm) -> Self {
        Self { connection, max_step: 1e-3, min_steps: 8 }
    }

    pub fn with_resolution(mut self, max_step: f64, min_steps: usize) -> Self {
        self.max_step = max_step;
        self.min_steps = min_steps.max(1);
        self
    }

    pub fn connection(&self) -> &ConnectionForm {
        &self.connection
    }
}

impl TransportOracle for OdeOracle {
    fn chart_dim(&self) -> usize {
        self.connection.chart().dim
    }

    fn fiber_dim(&self) -> usize {
        self.connection.fiber_dim()
    }

    fn transport(&self, p: &[f64], v: &[f64], s: f64, t: f64) -> Result<GaugeMap> {
        let path = Path::affine(p.to_vec(), v.to_vec(), (s.min(t), s.max(t)))?;
        let steps = (((t - s).abs() / self.max_step).ceil() as usize).max(self.min_steps);
        transport_map_steps(&self.connection, &path, s, t, steps)
    }
}

/// An oracle given by a closure `(p, v, s, t) ↦ F`.
pub struct FnOracle<F> {
    chart_dim: usize,
    fiber_dim: usize,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&[f64], &[f64], f64, f64) -> Result<GaugeMap>,
{
    pub fn new(chart_dim: usize, fiber_dim: usize, f: F) -> Self {
        Self { chart_dim, fiber_dim, f }
    }
}

impl<F> TransportOracle for FnOracle<F>
where
    F: Fn(&[f64], &[f64], f64, f64) -> Result<GaugeMap>,
{
    fn chart_dim(&self) -> usize {
        self.chart_dim
    }
    fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }
    fn transport(&self, p: &[f64], v: &[f64], s: f64, t: f64) -> Result<GaugeMap> {
        (self.f)(p, v, s, t)
    }
}

/// `g(γ(t))·F(s, t)·g(γ(s))⁻¹`: the same transport seen in another frame.
pub struct GaugedOracle<O> {
    inner: O,
    gauge: GaugeField,
}

impl<O: TransportOracle> GaugedOracle<O> {
    pub fn new(inner: O, gauge: GaugeField) -> Result<Self> {
        if gauge.dim() != inner.fiber_dim() || gauge.chart().dim != inner.chart_dim() {
            return Err(Error::InvalidInput("gauge does not match the oracle".into()));
        }
        Ok(Self { inner, gauge })
    }
}

impl<O: TransportOracle> TransportOracle for GaugedOracle<O> {
    fn chart_dim(&self) -> usize {
        self.inner.chart_dim()
    }
    fn fiber_dim(&self) -> usize {
        self.inner.fiber_dim()
    }
    fn transport(&self, p: &[f64], v: &[f64], s: f64, t: f64) -> Result<GaugeMap> {
        let at = |u: f64| -> Vec<f64> { p.iter().zip(v).map(|(a, b)| a + u * b).collect() };
        let gs = matrix_inverse(&self.gauge.value(&at(s))?)?;
        let gt = self.gauge.value(&at(t))?;
        let f = self.inner.transport(p, v, s, t)?;
        gt.compose_gauge(&f)?.compose_gauge(&gs)
    }
}

/// Serializes calls to an oracle that is not safe for concurrent use.
pub struct Serialized<O>(Mutex<O>);

impl<O> Serialized<O> {
    pub fn new(inner: O) -> Self {
        Self(Mutex::new(inner))
    }
}

impl<O: TransportOracle> TransportOracle for Serialized<O> {
    fn chart_dim(&self) -> usize {
        self.0.lock().map(|o| o.chart_dim()).unwrap_or(0)
    }
    fn fiber_dim(&self) -> usize {
        self.0.lock().map(|o| o.fiber_dim()).unwrap_or(0)
    }
    fn transport(&self, p: &[f64], v: &[f64], s: f64, t: f64) -> Result<GaugeMap> {
        let guard = self.0.lock().map_err(|_| Error::Oracle("oracle lock poisoned".into()))?;
        guard.transport(p, v, s, t)
    }
}

/// One tabulated value `F(p, v; 0, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedEntry {
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
    pub map: EndMap,
}

/// Transport values read from a table of `(p, v, t) ↦ F(p, v; 0, t)`.
///
/// Lookups match `(p, v, t)` exactly up to a relative tolerance of 1e-12;
/// general intervals use `F(s, t) = F(0, t)·F(0, s)⁻¹`.
///
/// CSV layout: header `p1..pn, v1..vn, t`, then `F_i_j` per entry (row-major,
/// zero-based) for real tables or `F_i_j_re, F_i_j_im` for complex ones.
#[derive(Debug, Clone)]
pub struct TabulatedOracle {
    chart_dim: usize,
    fiber_dim: usize,
    entries: Vec<TabulatedEntry>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

impl TabulatedOracle {
    pub fn new(chart_dim: usize, fiber_dim: usize, entries: Vec<TabulatedEntry>) -> Result<Self> {
        for e in &entries {
            if e.p.len() != chart_dim || e.v.len() != chart_dim || e.map.dim() != fiber_dim {
                return Err(Error::InvalidInput("tabulated entry has the wrong shape".into()));
            }
        }
        Ok(Self { chart_dim, fiber_dim, entries })
    }

    /// Tabulates `oracle` at every `(p, v, t)` in the given lists.
    pub fn sample<O: TransportOracle>(oracle: &O, probes: &[(Vec<f64>, Vec<f64>)], times: &[f64]) -> Result<Self> {
        let mut entries = Vec::new();
        for (p, v) in probes {
            for &t in times {
                let map = oracle.transport(p, v, 0.0, t)?.into_end();
                entries.push(TabulatedEntry { p: p.clone(), v: v.clone(), t, map });
            }
        }
        Self::new(oracle.chart_dim(), oracle.fiber_dim(), entries)
    }

    pub fn entries(&self) -> &[TabulatedEntry] {
        &self.entries
    }

    fn lookup(&self, p: &[f64], v: &[f64], t: f64) -> Result<EndMap> {
        if t == 0.0 {
            return Ok(EndMap::identity(self.fiber_dim));
        }
        self.entries
            .iter()
            .find(|e| {
                close(e.t, t)
                    && e.p.iter().zip(p).all(|(a, b)| close(*a, *b))
                    && e.v.iter().zip(v).all(|(a, b)| close(*a, *b))
            })
            .map(|e| e.map.clone())
            .ok_or_else(|| Error::Oracle(format!("no tabulated value for p={p:?}, v={v:?}, t={t}")))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let complex = self.entries.iter().any(|e| e.map.field() == Field::Complex);
        let mut out = csv::Writer::from_writer(w);
        let n = self.chart_dim;
        let d = self.fiber_dim;
        let mut header: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
        header.extend((1..=n).map(|i| format!("v{i}")));
        header.push("t".into());
        for i in 0..d {
            for j in 0..d {
                if complex {
                    header.push(format!("F_{i}_{j}_re"));
                    header.push(format!("F_{i}_{j}_im"));
                } else {
                    header.push(format!("F_{i}_{j}"));
                }
            }
        }
        out.write_record(&header).map_err(csv_err)?;
        for e in &self.entries {
            let mut row: Vec<String> = e.p.iter().chain(&e.v).map(|x| sci(*x)).collect();
            row.push(sci(e.t));
            for i in 0..d {
                for j in 0..d {
                    let z = e.map.get(i, j);
                    row.push(sci(z.re));
                    if complex {
                        row.push(sci(z.im));
                    }
                }
            }
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(csv_err)?.clone();
        let n = header.iter().filter(|h| h.starts_with('p')).count();
        let complex = header.iter().any(|h| h.ends_with("_re"));
        let entries_cols = header.len().checked_sub(2 * n + 1).filter(|_| n > 0).ok_or_else(|| {
            Error::InvalidInput("tabulated oracle header lacks p/v/t columns".into())
        })?;
        let per = if complex { 2 } else { 1 };
        let d = ((entries_cols / per) as f64).sqrt().round() as usize;
        if d == 0 || d * d * per != entries_cols {
            return Err(Error::InvalidInput("matrix columns do not form a square matrix".into()));
        }
        let mut entries = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidInput(format!("row {}: {e}", line + 2)))?;
            if vals.len() != header.len() {
                return Err(Error::InvalidInput(format!("row {} has {} fields", line + 2, vals.len())));
            }
            let m = &vals[2 * n + 1..];
            let data = DMatrix::from_fn(d, d, |i, j| {
                let k = (i * d + j) * per;
                Scalar::new(m[k], if complex { m[k + 1] } else { 0.0 })
            });
            let field = if complex { Field::Complex } else { Field::Real };
            entries.push(TabulatedEntry {
                p: vals[..n].to_vec(),
                v: vals[n..2 * n].to_vec(),
                t: vals[2 * n],
                map: EndMap::new(field, data)?,
            });
        }
        Self::new(n, d, entries)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// Scientific notation with 15 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.14e}")
}

impl TransportOracle for TabulatedOracle {
    fn chart_dim(&self) -> usize {
        self.chart_dim
    }
    fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }
    fn transport(&self, p: &[f64], v: &[f64], s: f64, t: f64) -> Result<GaugeMap> {
        let ft = self.lookup(p, v, t)?;
        let fs = GaugeMap::new(self.lookup(p, v, s)?)?;
        GaugeMap::new(ft.compose(matrix_inverse(&fs)?.as_end())?)
    }
}

/// Difference quotient used by [`reconstruct_at_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeMode {
    /// `(F(0, h) − F(0, −h)) / 2h`, error `O(h²)`.
    #[default]
    Central,
    /// `(F(0, h) − id) / h`, error `O(h)`.
    OneSided,
}

fn query<O: TransportOracle + ?Sized>(f: &O, p: &[f64], v: &[f64], s: f64, t: f64) -> Result<EndMap> {
    let m = f.transport(p, v, s, t).map_err(|e| match e {
        Error::Oracle(_) => e,
        other => Error::Oracle(other.to_string()),
    })?;
    if m.dim() != f.fiber_dim() || !m.is_finite() {
        return Err(Error::Oracle(format!("oracle returned a malformed value at p={p:?}")));
    }
    Ok(m.into_end())
}

fn check_probe<O: TransportOracle + ?Sized>(f: &O, p: &[f64], v: &[f64], h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput("difference step must be positive".into()));
    }
    if p.len() != f.chart_dim() || v.len() != f.chart_dim() {
        return Err(Error::InvalidInput("probe point/direction do not match the oracle chart".into()));
    }
    Ok(())
}

/// Central-difference estimate of `A_p(v)`.
pub fn reconstruct_at<O: TransportOracle + ?Sized>(f: &O, p: &[f64], v: &[f64], h: f64) -> Result<EndMap> {
    reconstruct_at_with(f, p, v, h, DerivativeMode::Central)
}

pub fn reconstruct_at_with<O: TransportOracle + ?Sized>(
    f: &O,
    p: &[f64],
    v: &[f64],
    h: f64,
    mode: DerivativeMode,
) -> Result<EndMap> {
    check_probe(f, p, v, h)?;
    match mode {
        DerivativeMode::Central => {
            let plus = query(f, p, v, 0.0, h)?;
            let minus = query(f, p, v, 0.0, -h)?;
            Ok(plus.sub(&minus)?.scale(0.5 / h))
        }
        DerivativeMode::OneSided => {
            let plus = query(f, p, v, 0.0, h)?;
            Ok(plus.sub(&EndMap::identity(f.fiber_dim()))?.scale(1.0 / h))
        }
    }
}

/// `‖A(λv) − λ·A(v)‖`, probing `λv` with step `h/λ` so both quotients sample
/// the same stretch of the probe line.
pub fn homogeneity_residual<O: TransportOracle + ?Sized>(
    f: &O,
    p: &[f64],
    v: &[f64],
    lambda: f64,
    h: f64,
) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput("lambda must be positive".into()));
    }
    let scaled: Vec<f64> = v.iter().map(|x| lambda * x).collect();
    let a_scaled = reconstruct_at(f, p, &scaled, h / lambda)?;
    let a = reconstruct_at(f, p, v, h)?;
    operator_distance(&a_scaled, &a.scale(lambda))
}

/// `‖A(u + v) − A(u) − A(v)‖`.
pub fn additivity_residual<O: TransportOracle + ?Sized>(
    f: &O,
    p: &[f64],
    u: &[f64],
    v: &[f64],
    h: f64,
) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput("directions differ in dimension".into()));
    }
    let sum: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + b).collect();
    let a_sum = reconstruct_at(f, p, &sum, h)?;
    let parts = reconstruct_at(f, p, u, h)?.add(&reconstruct_at(f, p, v, h)?)?;
    operator_distance(&a_sum, &parts)
}

/// `(A₁(p), …, Aₙ(p))` from probes along the coordinate directions.
pub fn reconstruct_components<O: TransportOracle + ?Sized>(f: &O, p: &[f64], h: f64) -> Result<Vec<EndMap>> {
    let n = f.chart_dim();
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            reconstruct_at(f, p, &e, h)
        })
        .collect()
}

/// A sampled connection form rebuilt from the oracle on a rectilinear grid.
pub fn reconstruct_connection<O: TransportOracle + ?Sized>(f: &O, axes: Vec<Vec<f64>>, h: f64) -> Result<ConnectionForm> {
    if axes.len() != f.chart_dim() {
        return Err(Error::InvalidInput("grid dimension does not match the oracle".into()));
    }
    ConnectionForm::sampled(SampledField::tabulate(axes, |p| reconstruct_components(f, p, h))?)
}

/// Max over `grid` and coordinate directions of
/// `‖reconstruct(transport(A)) − A‖`.
pub fn roundtrip_error(a: &ConnectionForm, grid: &[Vec<f64>], h: f64) -> Result<f64> {
    let oracle = OdeOracle::new(a.clone());
    let n = a.chart().dim;
    let mut worst: f64 = 0.0;
    for p in grid {
        let rebuilt = reconstruct_components(&oracle, p, h)?;
        for (i, r) in rebuilt.iter().enumerate() {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let exact = evaluate_connection(a, p, &e)?;
            worst = worst.max(operator_distance(r, &exact)?);
        }
    }
    Ok(worst)
}

/// `n₁ × ⋯ × n_k` tensor grid over a box.
pub fn grid_points(bounds: &[(f64, f64)], per_axis: usize) -> Vec<Vec<f64>> {
    let axis = |&(lo, hi): &(f64, f64)| -> Vec<f64> {
        if per_axis <= 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..per_axis).map(|k| lo + (hi - lo) * k as f64 / (per_axis - 1) as f64).collect()
        }
    };
    let mut out = vec![Vec::new()];
    for b in bounds {
        let values = axis(b);
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                values.iter().map(move |&x| {
                    let mut q = prefix.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}
