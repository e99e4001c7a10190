//! Geodesics, nonlinear parallel transport and small-loop holonomy.
//!
//! Everything is fixed-step classical RK4. Connection values come from
//! pointwise low-order jets ([`connection_at`]).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::berwald::{connection_at, BerwaldData};
use crate::error::{Error, Result};
use crate::metric::{norm_value, BasePoint, MetricSpec};

pub const DEFAULT_STEPS_PER_UNIT: usize = 1000;
/// Largest tolerated `|F(c(s), y(s)) − F(c(0), y0)|` along a transport.
pub const DEFAULT_DRIFT_LIMIT: f64 = 1e-6;
/// `defect / eps² → HOLONOMY_SIGN · 𝓡_ij(x, y0)` for the loop
/// `x → x + eps e_i → x + eps(e_i + e_j) → x + eps e_j → x`.
pub const HOLONOMY_SIGN: f64 = 1.0;

const SHOOTING_TOL: f64 = 1e-12;
const SHOOTING_MAX_ITER: usize = 30;

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(p, q)| a * p + q).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn rk4_step<F>(f: &F, s: f64, u: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let k1 = f(s, u)?;
    let k2 = f(s + h / 2.0, &axpy(h / 2.0, &k1, u))?;
    let k3 = f(s + h / 2.0, &axpy(h / 2.0, &k2, u))?;
    let k4 = f(s + h, &axpy(h, &k3, u))?;
    Ok((0..u.len())
        .map(|i| u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// `ẍ = −2G(x, ẋ)` as a first-order system in `(x, ẋ)`.
fn geodesic_rhs(spec: &MetricSpec, u: &[f64]) -> Result<Vec<f64>> {
    let n = u.len() / 2;
    let (x, v) = u.split_at(n);
    let (g, _) = connection_at(spec, x, v)?;
    Ok(v.iter().copied().chain(g.iter().map(|gi| -2.0 * gi)).collect())
}

/// One sample of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub s: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f: f64,
}

pub fn samples_to_csv(samples: &[Sample]) -> String {
    let n = samples.first().map_or(0, |s| s.x.len());
    let mut out = String::from("s");
    for i in 0..n {
        let _ = write!(out, ",x{}", i + 1);
    }
    for i in 0..n {
        let _ = write!(out, ",y{}", i + 1);
    }
    out.push_str(",F\n");
    for s in samples {
        let _ = write!(out, "{:.16e}", s.s);
        for v in s.x.iter().chain(&s.y) {
            let _ = write!(out, ",{v:.16e}");
        }
        let _ = writeln!(out, ",{:.16e}", s.f);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Set when the integration stopped because the curve left the domain.
    pub left_domain: bool,
}

/// Geodesic from `(x0, y0)` over parameter length `length`, in `steps`
/// RK4 steps. Samples carry `(x, ẋ, F(x, ẋ))`.
pub fn integrate_geodesic(spec: &MetricSpec, x0: &[f64], y0: &[f64], length: f64, steps: usize) -> Result<Trajectory> {
    spec.check_point(x0, y0)?;
    if steps == 0 || !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidInput("geodesic needs positive length and steps".into()));
    }
    let n = x0.len();
    let h = length / steps as f64;
    let sample = |s: f64, u: &[f64]| -> Result<Sample> {
        Ok(Sample {
            s,
            x: u[..n].to_vec(),
            y: u[n..].to_vec(),
            f: norm_value(spec, &u[..n], &u[n..])?,
        })
    };
    let mut u: Vec<f64> = x0.iter().chain(y0).copied().collect();
    let mut samples = vec![sample(0.0, &u)?];
    for step in 0..steps {
        let next = rk4_step(&|_, w: &[f64]| geodesic_rhs(spec, w), 0.0, &u, h);
        match next {
            Ok(w) if spec.check_point(&w[..n], &w[n..]).is_ok() => u = w,
            Ok(_) | Err(Error::Domain(_)) => {
                return Ok(Trajectory { samples, left_domain: true });
            }
            Err(e) => return Err(e),
        }
        samples.push(sample((step + 1) as f64 * h, &u)?);
    }
    Ok(Trajectory { samples, left_domain: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Line { from: Vec<f64>, to: Vec<f64> },
    Geodesic { from: Vec<f64>, to: Vec<f64> },
}

impl Segment {
    pub fn from(&self) -> &[f64] {
        match self {
            Segment::Line { from, .. } | Segment::Geodesic { from, .. } => from,
        }
    }

    pub fn to(&self) -> &[f64] {
        match self {
            Segment::Line { to, .. } | Segment::Geodesic { to, .. } => to,
        }
    }

    fn reversed(&self) -> Self {
        match self {
            Segment::Line { from, to } => Segment::Line { from: to.clone(), to: from.clone() },
            Segment::Geodesic { from, to } => Segment::Geodesic { from: to.clone(), to: from.clone() },
        }
    }

    fn chord(&self) -> f64 {
        norm(&axpy(-1.0, self.from(), self.to()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePath {
    pub segments: Vec<Segment>,
    /// `+1` traverses the segments as listed, `−1` backwards.
    pub orientation: i8,
}

impl CurvePath {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let path = Self { segments, orientation: 1 };
        path.validate()?;
        Ok(path)
    }

    /// Closed polygon through `vertices` with straight chart segments.
    pub fn polygon(vertices: &[Vec<f64>]) -> Result<Self> {
        Self::polygon_with(vertices, |a, b| Segment::Line { from: a, to: b })
    }

    /// Closed polygon through `vertices` with geodesic sides.
    pub fn geodesic_polygon(vertices: &[Vec<f64>]) -> Result<Self> {
        Self::polygon_with(vertices, |a, b| Segment::Geodesic { from: a, to: b })
    }

    fn polygon_with(vertices: &[Vec<f64>], side: impl Fn(Vec<f64>, Vec<f64>) -> Segment) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidInput("polygon needs at least two vertices".into()));
        }
        let m = vertices.len();
        Self::new(
            (0..m)
                .map(|i| side(vertices[i].clone(), vertices[(i + 1) % m].clone()))
                .collect(),
        )
    }

    /// Square `x → x + eps e_i → x + eps(e_i + e_j) → x + eps e_j → x`.
    pub fn coordinate_square(x: &[f64], i: usize, j: usize, eps: f64) -> Result<Self> {
        let n = x.len();
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidInput(format!("loop directions ({i}, {j}) invalid in dimension {n}")));
        }
        let mut a = x.to_vec();
        a[i] += eps;
        let mut b = a.clone();
        b[j] += eps;
        let mut c = x.to_vec();
        c[j] += eps;
        Self::polygon(&[x.to_vec(), a, b, c])
    }

    pub fn reversed(&self) -> Self {
        Self { segments: self.segments.clone(), orientation: -self.orientation }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidInput("empty path".into()));
        }
        if self.orientation != 1 && self.orientation != -1 {
            return Err(Error::InvalidInput("orientation must be ±1".into()));
        }
        for w in self.segments.windows(2) {
            if norm(&axpy(-1.0, w[0].to(), w[1].from())) > 1e-12 {
                return Err(Error::InvalidInput("consecutive segments do not share endpoints".into()));
            }
        }
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        let first = self.segments[0].from();
        let last = self.segments[self.segments.len() - 1].to();
        norm(&axpy(-1.0, first, last)) <= 1e-12
    }

    /// Segments in traversal order.
    pub fn traversal(&self) -> Vec<Segment> {
        if self.orientation >= 0 {
            self.segments.clone()
        } else {
            self.segments.iter().rev().map(Segment::reversed).collect()
        }
    }

    pub fn start(&self) -> Vec<f64> {
        self.traversal()[0].from().to_vec()
    }
}

/// Initial velocity of the geodesic `c` on `[0, 1]` with `c(0) = from`,
/// `c(1) = to`, by Newton shooting with a difference Jacobian.
pub fn shoot_geodesic(spec: &MetricSpec, from: &[f64], to: &[f64], steps: usize) -> Result<Vec<f64>> {
    let n = from.len();
    let end = |v: &[f64]| -> Result<Vec<f64>> {
        let t = integrate_geodesic(spec, from, v, 1.0, steps)?;
        if t.left_domain {
            return Err(Error::Domain("shooting trajectory left the domain".into()));
        }
        Ok(t.samples.last().expect("samples").x.clone())
    };
    let mut v = axpy(-1.0, from, to);
    let scale = norm(&v).max(1e-300);
    for _ in 0..SHOOTING_MAX_ITER {
        let r = axpy(-1.0, to, &end(&v)?);
        if norm(&r) <= SHOOTING_TOL * scale.max(1.0) {
            return Ok(v);
        }
        let h = 1e-7 * scale;
        let mut jac = nalgebra::DMatrix::zeros(n, n);
        for c in 0..n {
            let mut vp = v.clone();
            vp[c] += h;
            let mut vm = v.clone();
            vm[c] -= h;
            let (ep, em) = (end(&vp)?, end(&vm)?);
            for r_ in 0..n {
                jac[(r_, c)] = (ep[r_] - em[r_]) / (2.0 * h);
            }
        }
        let delta = jac
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&r))
            .ok_or_else(|| Error::Degenerate("singular shooting Jacobian".into()))?;
        for c in 0..n {
            v[c] -= delta[c];
        }
    }
    Err(Error::Accuracy(format!("geodesic shooting from {from:?} to {to:?} did not converge")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub y_end: Vec<f64>,
    /// `max |F(c(s), y(s)) − F(c(0), y0)|`.
    pub norm_drift: f64,
    pub steps: usize,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    pub steps_per_unit: usize,
    pub drift_limit: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            steps_per_unit: DEFAULT_STEPS_PER_UNIT,
            drift_limit: DEFAULT_DRIFT_LIMIT,
        }
    }
}

/// Integrates the horizontal lift `ẏ^i = −G^i_j(c, y) ċ^j` along `path`.
/// Fails with an accuracy error when the norm drift exceeds the limit.
pub fn parallel_transport(spec: &MetricSpec, path: &CurvePath, y0: &[f64], opts: &TransportOptions) -> Result<TransportResult> {
    let r = parallel_transport_unchecked(spec, path, y0, opts.steps_per_unit)?;
    if r.norm_drift > opts.drift_limit {
        return Err(Error::Accuracy(format!(
            "norm drift {:.3e} exceeds {:.1e}; increase steps",
            r.norm_drift, opts.drift_limit
        )));
    }
    Ok(r)
}

/// Same as [`parallel_transport`], reporting the drift without judging it.
pub fn parallel_transport_unchecked(
    spec: &MetricSpec,
    path: &CurvePath,
    y0: &[f64],
    steps_per_unit: usize,
) -> Result<TransportResult> {
    path.validate()?;
    if steps_per_unit == 0 {
        return Err(Error::InvalidInput("steps_per_unit must be positive".into()));
    }
    let start = path.start();
    spec.check_point(&start, y0)?;
    let n = start.len();
    let f0 = norm_value(spec, &start, y0)?;
    let mut y = y0.to_vec();
    let mut s_total = 0.0;
    let mut steps = 0;
    let mut drift: f64 = 0.0;
    let mut samples = vec![Sample { s: 0.0, x: start.clone(), y: y.clone(), f: f0 }];

    for seg in path.traversal() {
        let count = ((seg.chord() * steps_per_unit as f64).ceil() as usize).max(1);
        let h = 1.0 / count as f64;
        match &seg {
            Segment::Line { from, to } => {
                let dc = axpy(-1.0, from, to);
                let rhs = |s: f64, u: &[f64]| -> Result<Vec<f64>> {
                    let c = axpy(s, &dc, from);
                    let (_, gi) = connection_at(spec, &c, u)?;
                    Ok((0..n).map(|i| -(0..n).map(|j| gi[i][j] * dc[j]).sum::<f64>()).collect())
                };
                for k in 0..count {
                    let s = k as f64 * h;
                    y = rk4_step(&rhs, s, &y, h)?;
                    let x = axpy(s + h, &dc, from);
                    let f = norm_value(spec, &x, &y)?;
                    drift = drift.max((f - f0).abs());
                    samples.push(Sample { s: s_total + s + h, x, y: y.clone(), f });
                }
            }
            Segment::Geodesic { from, to } => {
                let v0 = shoot_geodesic(spec, from, to, count)?;
                // state (x, ẋ, y)
                let rhs = |_: f64, u: &[f64]| -> Result<Vec<f64>> {
                    let (x, rest) = u.split_at(n);
                    let (v, yy) = rest.split_at(n);
                    let (g, _) = connection_at(spec, x, v)?;
                    let (_, gi) = connection_at(spec, x, yy)?;
                    let mut out: Vec<f64> = v.to_vec();
                    out.extend(g.iter().map(|a| -2.0 * a));
                    out.extend((0..n).map(|i| -(0..n).map(|j| gi[i][j] * v[j]).sum::<f64>()));
                    Ok(out)
                };
                let mut u: Vec<f64> = from.iter().chain(&v0).chain(&y).copied().collect();
                for k in 0..count {
                    let s = k as f64 * h;
                    u = rk4_step(&rhs, s, &u, h)?;
                    let x = u[..n].to_vec();
                    let yy = u[2 * n..].to_vec();
                    let f = norm_value(spec, &x, &yy)?;
                    drift = drift.max((f - f0).abs());
                    samples.push(Sample { s: s_total + s + h, x, y: yy, f });
                }
                y = u[2 * n..].to_vec();
            }
        }
        s_total += 1.0;
        steps += count;
    }
    Ok(TransportResult {
        y_end: y,
        norm_drift: drift,
        steps,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub eps: f64,
    /// `y_end − y0` after the loop.
    pub defect: Vec<f64>,
    /// `defect / eps²`.
    pub scaled: Vec<f64>,
    /// `𝓡_ij(x, y0)`, components `R^k_ij`.
    pub curvature: Vec<f64>,
    pub sign: f64,
    /// `‖defect/eps² − sign · 𝓡_ij‖`.
    pub error: f64,
    pub norm_drift: f64,
}

/// Holonomy defect of the coordinate square of side `eps` in directions
/// `i`, `j` at `x`, compared with the curvature field `𝓡_ij(x, y0)`.
pub fn loop_holonomy_defect(
    spec: &MetricSpec,
    x: &[f64],
    i: usize,
    j: usize,
    eps: f64,
    y0: &[f64],
    steps_per_unit: usize,
) -> Result<DefectReport> {
    Ok(loop_holonomy_run(spec, x, i, j, eps, y0, steps_per_unit)?.0)
}

/// [`loop_holonomy_defect`] together with the underlying transport.
pub fn loop_holonomy_run(
    spec: &MetricSpec,
    x: &[f64],
    i: usize,
    j: usize,
    eps: f64,
    y0: &[f64],
    steps_per_unit: usize,
) -> Result<(DefectReport, TransportResult)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("loop size must be positive, got {eps}")));
    }
    let path = CurvePath::coordinate_square(x, i, j, eps)?;
    let r = parallel_transport_unchecked(spec, &path, y0, steps_per_unit)?;
    let point = BasePoint::new(x.to_vec(), y0.to_vec())?;
    let data = BerwaldData::compute(spec, &point, 5)?;
    let curvature: Vec<f64> = data.curvature_field(i, j).xi.iter().map(|c| c.value()).collect();
    let defect = axpy(-1.0, y0, &r.y_end);
    let scaled: Vec<f64> = defect.iter().map(|d| d / (eps * eps)).collect();
    let error = norm(&axpy(-HOLONOMY_SIGN, &curvature, &scaled));
    let report = DefectReport {
        eps,
        defect,
        scaled,
        curvature,
        sign: HOLONOMY_SIGN,
        error,
        norm_drift: r.norm_drift,
    };
    Ok((report, r))
}
