//! Finsler metric catalog and energy jets.
//!
//! Every metric is evaluated in one global chart identified with (a subset
//! of) `R^n`. Energy jets are expanded in the `2n` variables
//! `(x_0, …, x_{n-1}, y_0, …, y_{n-1})` around a [`BasePoint`].

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::TaylorJet;

/// Default inner plateau radius of the bump function.
pub const DEFAULT_R1: f64 = 0.4;
/// Default outer support radius of the bump function.
pub const DEFAULT_R2: f64 = 0.8;

/// A point of the slit tangent bundle: position `x` and nonzero velocity `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl BasePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "x has {} coordinates, y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        if y.iter().all(|&v| v == 0.0) {
            return Err(Error::Domain("tangent vector y must be nonzero".into()));
        }
        Ok(Self { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Radii of the radial bump `ψ`: `ψ = 1` for `|x| ≤ r1`, `ψ = 0` for `|x| ≥ r2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpParams {
    pub r1: f64,
    pub r2: f64,
}

impl Default for BumpParams {
    fn default() -> Self {
        Self {
            r1: DEFAULT_R1,
            r2: DEFAULT_R2,
        }
    }
}

impl BumpParams {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        let p = Self { r1, r2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.r1 && self.r1 < self.r2 && self.r2 < 1.0) {
            return Err(Error::InvalidInput(format!(
                "bump radii must satisfy 0 < r1 < r2 < 1, got r1 = {}, r2 = {}",
                self.r1, self.r2
            )));
        }
        Ok(())
    }
}

/// One monomial `coeff · Π x_v^{exponents[v]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

/// Built-in Riemannian metrics `E = ½ g_ij(x) y_i y_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "catalog", rename_all = "snake_case")]
pub enum RiemannianCatalog {
    /// `g_ij = δ_ij`.
    Flat,
    /// Stereographic chart of the unit sphere, `g_ij = 4 δ_ij / (1 + |x|²)²`.
    RoundSphere,
    /// `g = diag(p_0(x), …, p_{n-1}(x))` with polynomial entries.
    DiagonalPolynomial { diag: Vec<Vec<Monomial>> },
}

/// Parameters of the Funk perturbation `F_t² = (1−t) F² + t F̄²`,
/// `F̄² = ψ F_Funk² + (1−ψ) F²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub base: Box<MetricSpec>,
    pub t: f64,
    #[serde(default)]
    pub bump: BumpParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    Riemannian(RiemannianCatalog),
    FunkStandard,
    FunkPerturbation(Perturbation),
}

/// Declarative description of a Finsler metric on (a chart of) `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: MetricKind,
}

impl MetricSpec {
    pub fn euclidean(dim: usize) -> Self {
        Self {
            dim,
            kind: MetricKind::Euclidean,
        }
    }

    pub fn round_sphere(dim: usize) -> Self {
        Self {
            dim,
            kind: MetricKind::Riemannian(RiemannianCatalog::RoundSphere),
        }
    }

    pub fn riemannian(dim: usize, catalog: RiemannianCatalog) -> Self {
        Self {
            dim,
            kind: MetricKind::Riemannian(catalog),
        }
    }

    pub fn funk(dim: usize) -> Self {
        Self {
            dim,
            kind: MetricKind::FunkStandard,
        }
    }

    pub fn funk_perturbation(base: MetricSpec, t: f64, bump: BumpParams) -> Self {
        Self {
            dim: base.dim,
            kind: MetricKind::FunkPerturbation(Perturbation {
                base: Box::new(base),
                t,
                bump,
            }),
        }
    }

    /// Same family, different `t`. Identity for non-perturbed metrics.
    pub fn with_t(&self, t: f64) -> Self {
        match &self.kind {
            MetricKind::FunkPerturbation(p) => Self::funk_perturbation((*p.base).clone(), t, p.bump),
            _ => self.clone(),
        }
    }

    /// True when the metric needs `|x| < 1`.
    pub fn needs_unit_ball(&self) -> bool {
        matches!(
            self.kind,
            MetricKind::FunkStandard | MetricKind::FunkPerturbation(_)
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be at least 2, got {}",
                self.dim
            )));
        }
        match &self.kind {
            MetricKind::Riemannian(RiemannianCatalog::DiagonalPolynomial { diag }) => {
                if diag.len() != self.dim {
                    return Err(Error::InvalidInput(format!(
                        "diagonal metric needs {} entries, got {}",
                        self.dim,
                        diag.len()
                    )));
                }
                for m in diag.iter().flatten() {
                    if m.exponents.len() != self.dim {
                        return Err(Error::InvalidInput(format!(
                            "monomial exponent vector must have {} entries",
                            self.dim
                        )));
                    }
                }
            }
            MetricKind::FunkPerturbation(p) => {
                if p.base.dim != self.dim {
                    return Err(Error::InvalidInput(format!(
                        "perturbation base has dimension {}, family has {}",
                        p.base.dim, self.dim
                    )));
                }
                if matches!(p.base.kind, MetricKind::FunkPerturbation(_)) {
                    return Err(Error::InvalidInput(
                        "perturbation base must not itself be a perturbation".into(),
                    ));
                }
                if !(0.0..=1.0).contains(&p.t) {
                    return Err(Error::InvalidInput(format!(
                        "perturbation parameter t = {} outside [0, 1]",
                        p.t
                    )));
                }
                p.bump.validate()?;
                p.base.validate()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Checks that `(x, y)` lies in the metric's domain.
    pub fn check_point(&self, x: &[f64], y: &[f64]) -> Result<()> {
        self.validate()?;
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "point has dimension ({}, {}), metric has {}",
                x.len(),
                y.len(),
                self.dim
            )));
        }
        if y.iter().all(|&v| v == 0.0) {
            return Err(Error::Domain("tangent vector y must be nonzero".into()));
        }
        if self.needs_unit_ball() && norm_sq(x) >= 1.0 {
            return Err(Error::Domain(format!(
                "|x| = {} is not inside the unit ball",
                norm_sq(x).sqrt()
            )));
        }
        Ok(())
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// The standard Funk norm of the unit ball: the positive `F` with `|x + y/F| = 1`.
pub fn funk_norm_value(x: &[f64], y: &[f64]) -> Result<f64> {
    let xx = norm_sq(x);
    if xx >= 1.0 {
        return Err(Error::Domain(format!(
            "|x| = {} is not inside the unit ball",
            xx.sqrt()
        )));
    }
    if y.iter().all(|&v| v == 0.0) {
        return Err(Error::Domain("tangent vector y must be nonzero".into()));
    }
    let (xy, yy) = (dot(x, y), norm_sq(y));
    let d = 1.0 - xx;
    Ok(((d * yy + xy * xy).sqrt() + xy) / d)
}

/// Jet coordinate seeds `(x_0…x_{n-1}, y_0…y_{n-1})` at `p`.
struct Seeds {
    x: Vec<TaylorJet>,
    y: Vec<TaylorJet>,
}

impl Seeds {
    fn new(x: &[f64], y: &[f64], order: usize) -> Self {
        let n = x.len();
        let var = |value: f64, i: usize| TaylorJet::variable(value, i, 2 * n, order).expect("seed");
        Self {
            x: x.iter().enumerate().map(|(i, &v)| var(v, i)).collect(),
            y: y.iter().enumerate().map(|(i, &v)| var(v, n + i)).collect(),
        }
    }

    fn num_vars(&self) -> usize {
        2 * self.x.len()
    }

    fn order(&self) -> usize {
        self.x[0].order()
    }

    fn constant(&self, c: f64) -> TaylorJet {
        TaylorJet::constant(c, self.num_vars(), self.order())
    }
}

fn dot_jets(a: &[TaylorJet], b: &[TaylorJet]) -> TaylorJet {
    a.iter()
        .zip(b)
        .map(|(p, q)| p * q)
        .reduce(|acc, t| &acc + &t)
        .expect("nonempty")
}

fn funk_energy(s: &Seeds) -> Result<TaylorJet> {
    let xx = dot_jets(&s.x, &s.x);
    let xy = dot_jets(&s.x, &s.y);
    let yy = dot_jets(&s.y, &s.y);
    let d = xx.scale(-1.0).add_scalar(1.0);
    let disc = &(&d * &yy) + &(&xy * &xy);
    let f = (&disc.sqrt()? + &xy).div(&d)?;
    Ok((&f * &f).scale(0.5))
}

fn monomial_jet(s: &Seeds, m: &Monomial) -> TaylorJet {
    m.exponents
        .iter()
        .zip(&s.x)
        .filter(|(&e, _)| e > 0)
        .fold(s.constant(m.coeff), |acc, (&e, xv)| &acc * &xv.powi(e))
}

fn riemannian_energy(s: &Seeds, catalog: &RiemannianCatalog) -> Result<TaylorJet> {
    let yy = dot_jets(&s.y, &s.y);
    Ok(match catalog {
        RiemannianCatalog::Flat => yy.scale(0.5),
        RiemannianCatalog::RoundSphere => {
            let conf = dot_jets(&s.x, &s.x).add_scalar(1.0);
            let lambda = s.constant(4.0).div(&(&conf * &conf))?;
            (&lambda * &yy).scale(0.5)
        }
        RiemannianCatalog::DiagonalPolynomial { diag } => {
            let mut e = s.constant(0.0);
            for (entry, yi) in diag.iter().zip(&s.y) {
                let g = entry
                    .iter()
                    .fold(s.constant(0.0), |acc, m| &acc + &monomial_jet(s, m));
                e = &e + &(&g * &(yi * yi));
            }
            e.scale(0.5)
        }
    })
}

/// The smooth step `S(s) = f(s) / (f(s) + f(1−s))`, `f(s) = e^{−1/s}` for `s > 0`.
fn smooth_step(s: &TaylorJet) -> Result<TaylorJet> {
    let s0 = s.value();
    let n = s.num_vars();
    if s0 <= 0.0 {
        return Ok(TaylorJet::zero(n, s.order()));
    }
    if s0 >= 1.0 {
        return Ok(TaylorJet::constant(1.0, n, s.order()));
    }
    let flat = |u: &TaylorJet| -> Result<TaylorJet> { Ok(u.recip()?.scale(-1.0).exp()) };
    let a = flat(s)?;
    let b = flat(&s.scale(-1.0).add_scalar(1.0))?;
    a.div(&(&a + &b))
}

fn bump_from_radius_sq(params: &BumpParams, xx: &TaylorJet) -> Result<TaylorJet> {
    let (r1s, r2s) = (params.r1 * params.r1, params.r2 * params.r2);
    let s = xx.scale(-1.0).add_scalar(r2s).scale(1.0 / (r2s - r1s));
    smooth_step(&s)
}

/// Jet in the `n` variables `x` of the radial bump `ψ(x) = S((r2² − |x|²)/(r2² − r1²))`.
pub fn bump_psi_jet(params: &BumpParams, x: &[f64], order: usize) -> Result<TaylorJet> {
    params.validate()?;
    if x.is_empty() {
        return Err(Error::InvalidInput("empty point".into()));
    }
    let n = x.len();
    let xs: Vec<TaylorJet> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| TaylorJet::variable(v, i, n, order))
        .collect::<Result<_>>()?;
    bump_from_radius_sq(params, &dot_jets(&xs, &xs))
}

/// Closed-form `ψ(x)`, used as an oracle.
pub fn bump_psi_value(params: &BumpParams, x: &[f64]) -> f64 {
    let s = (params.r2 * params.r2 - norm_sq(x)) / (params.r2 * params.r2 - params.r1 * params.r1);
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let f = |u: f64| (-1.0 / u).exp();
    f(s) / (f(s) + f(1.0 - s))
}

fn energy_from_seeds(spec: &MetricSpec, s: &Seeds) -> Result<TaylorJet> {
    match &spec.kind {
        MetricKind::Euclidean => Ok(dot_jets(&s.y, &s.y).scale(0.5)),
        MetricKind::Riemannian(c) => riemannian_energy(s, c),
        MetricKind::FunkStandard => funk_energy(s),
        MetricKind::FunkPerturbation(p) => {
            let base = energy_from_seeds(&p.base, s)?;
            if p.t == 0.0 {
                return Ok(base);
            }
            let funk = funk_energy(s)?;
            let psi = bump_from_radius_sq(&p.bump, &dot_jets(&s.x, &s.x))?;
            let one_minus_psi = psi.scale(-1.0).add_scalar(1.0);
            let spliced = &(&psi * &funk) + &(&one_minus_psi * &base);
            Ok(&base.scale(1.0 - p.t) + &spliced.scale(p.t))
        }
    }
}

/// Energy jet without the minimum-order requirement (order 0 gives values).
pub(crate) fn energy_jet_any_order(spec: &MetricSpec, x: &[f64], y: &[f64], order: usize) -> Result<TaylorJet> {
    spec.check_point(x, y)?;
    energy_from_seeds(spec, &Seeds::new(x, y, order))
}

/// Jet of `E = ½F²` in the `2n` variables `(x, y)` centred at `p`.
pub fn energy_jet(spec: &MetricSpec, p: &BasePoint, order: usize) -> Result<TaylorJet> {
    if order < 2 {
        return Err(Error::budget("fundamental tensor", 2, order));
    }
    energy_jet_any_order(spec, &p.x, &p.y, order)
}

/// `F(x, y)`.
pub fn norm_value(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if let MetricKind::FunkStandard = spec.kind {
        spec.check_point(x, y)?;
        return funk_norm_value(x, y);
    }
    let e = energy_jet_any_order(spec, x, y, 0)?.value();
    Ok((2.0 * e).sqrt())
}

/// Verdict of the positive-definiteness test of `g_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub positive_definite: bool,
    pub min_eigenvalue: f64,
}

/// Tests positive definiteness of `g_ij(x, y) = ∂²E/∂y_i∂y_j` at `p`.
pub fn check_strong_convexity(spec: &MetricSpec, p: &BasePoint) -> Result<ConvexityReport> {
    let n = p.dim();
    let e = energy_jet(spec, p, 2)?;
    let g = DMatrix::from_fn(n, n, |i, j| {
        let mut alpha = vec![0u32; 2 * n];
        alpha[n + i] += 1;
        alpha[n + j] += 1;
        e.derivative(&alpha)
    });
    let min_eigenvalue = SymmetricEigen::new(g)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(ConvexityReport {
        positive_definite: min_eigenvalue > 0.0,
        min_eigenvalue,
    })
}
