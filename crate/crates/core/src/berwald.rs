//! Berwald connection data computed from an energy jet.
//!
//! All jets here live in the `2n` variables `(x, y)`. Each differentiation
//! costs one order of the energy jet:
//!
//! | quantity                | order        |
//! |-------------------------|--------------|
//! | `g_ij`, `g^ij`          | `N − 2`      |
//! | `G^i`                   | `N − 3`      |
//! | `G^i_j`                 | `N − 4`      |
//! | `G^i_jk`, `R^i_jk`      | `N − 5`      |
//! | `∇_{p_1…p_s} R^i_jk`    | `N − 5 − s`  |

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::jet::{newton_steps, TaylorJet};
use crate::metric::{energy_jet, BasePoint, MetricSpec};

/// Orders of the energy jet consumed by the spray coefficients `G^i`.
pub const SPRAY_ORDER_COST: usize = 3;
/// Orders consumed by the curvature tensor `R^i_jk`.
pub const CURVATURE_ORDER_COST: usize = 5;
/// Orders consumed by each horizontal covariant derivative.
pub const COVARIANT_ORDER_COST: usize = 1;

/// Energy-jet order needed to read off `k`-jets of fields carrying up to `d`
/// covariant derivatives and `b` nested vertical brackets.
pub fn required_energy_order(k: usize, d: usize, b: usize) -> usize {
    k + d + b + CURVATURE_ORDER_COST
}

/// Order left after the spray is formed from an energy jet of order `n`.
pub fn spray_order(energy_order: usize) -> Option<usize> {
    energy_order.checked_sub(SPRAY_ORDER_COST)
}

/// Order of the curvature jets obtained from an energy jet of order `n`.
pub fn curvature_order(energy_order: usize) -> Option<usize> {
    energy_order.checked_sub(CURVATURE_ORDER_COST)
}

/// Order of `∇_{p_1…p_s} R` obtained from an energy jet of order `n`.
pub fn derived_field_order(energy_order: usize, derivatives: usize) -> Option<usize> {
    curvature_order(energy_order)?.checked_sub(derivatives * COVARIANT_ORDER_COST)
}

type Matrix = Vec<Vec<TaylorJet>>;

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| &a[i][k] * &b[k][j])
                        .reduce(|acc, t| &acc + &t)
                        .expect("nonempty")
                })
                .collect()
        })
        .collect()
}

fn dim_of(energy: &TaylorJet) -> Result<usize> {
    let nv = energy.num_vars();
    if !nv.is_multiple_of(2) || nv < 4 {
        return Err(Error::InvalidInput(format!(
            "energy jet must have 2n ≥ 4 variables, got {nv}"
        )));
    }
    Ok(nv / 2)
}

/// `g_ij = ∂²E/∂y_i∂y_j` and its inverse as matrices of jets.
#[derive(Debug, Clone)]
pub struct FundamentalTensor {
    pub g: Vec<Vec<TaylorJet>>,
    pub g_inv: Vec<Vec<TaylorJet>>,
}

pub fn fundamental_tensor(energy: &TaylorJet) -> Result<FundamentalTensor> {
    let n = dim_of(energy)?;
    if energy.order() < 2 {
        return Err(Error::budget("fundamental tensor", 2, energy.order()));
    }
    let dy: Vec<TaylorJet> = (0..n)
        .map(|i| energy.partial(n + i))
        .collect::<Result<_>>()?;
    let mut g: Matrix = vec![Vec::with_capacity(n); n];
    for i in 0..n {
        for j in 0..n {
            let gij = if j < i {
                g[j][i].clone()
            } else {
                dy[i].partial(n + j)?
            };
            g[i].push(gij);
        }
    }

    let constant = DMatrix::from_fn(n, n, |i, j| g[i][j].value());
    let inv0 = constant
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| {
            Error::Degenerate(format!("fundamental tensor is singular: {constant}"))
        })?;
    let order = g[0][0].order();
    let mut x: Matrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| TaylorJet::constant(inv0[(i, j)], 2 * n, order))
                .collect()
        })
        .collect();
    // Newton–Schulz: X ← X (2I − g X)
    for _ in 0..newton_steps(order) {
        let gx = mat_mul(&g, &x);
        let corr: Matrix = gx
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let m = v.scale(-1.0);
                        if i == j {
                            m.add_scalar(2.0)
                        } else {
                            m
                        }
                    })
                    .collect()
            })
            .collect();
        x = mat_mul(&x, &corr);
    }
    Ok(FundamentalTensor { g, g_inv: x })
}

/// Spray coefficients `G^i`, connection `G^i_j = ∂G^i/∂y_j` and Berwald
/// coefficients `G^i_jk = ∂G^i_j/∂y_k`.
#[derive(Debug, Clone)]
pub struct SprayJets {
    pub g: Vec<TaylorJet>,
    pub gi: Vec<Vec<TaylorJet>>,
    pub gijk: Vec<Vec<Vec<TaylorJet>>>,
}

impl SprayJets {
    pub fn dim(&self) -> usize {
        self.g.len()
    }
}

/// `G^i = ¼ g^{il} (2 ∂g_{jl}/∂x_k − ∂g_{jk}/∂x_l) y_j y_k`, of order
/// `N − 3` for an energy jet of order `N ≥ 3`.
///
/// `y0` is the fiber coordinate of the expansion point of `energy`.
pub fn spray_coefficients(energy: &TaylorJet, y0: &[f64], tensor: &FundamentalTensor) -> Result<Vec<TaylorJet>> {
    let n = dim_of(energy)?;
    if y0.len() != n {
        return Err(Error::InvalidInput(format!(
            "expansion point has {} fiber coordinates, energy has {n}",
            y0.len()
        )));
    }
    let order = energy.order();
    if order < SPRAY_ORDER_COST {
        return Err(Error::budget("spray coefficients", SPRAY_ORDER_COST, order));
    }
    let spray_order = order - SPRAY_ORDER_COST;

    // dg[k][j][l] = ∂g_jl/∂x_k
    let dg: Vec<Matrix> = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| (0..n).map(|l| tensor.g[j][l].partial(k)).collect())
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let y: Vec<TaylorJet> = (0..n)
        .map(|j| TaylorJet::variable(y0[j], n + j, 2 * n, spray_order))
        .collect::<Result<_>>()?;
    let yy: Matrix = (0..n)
        .map(|j| (0..n).map(|k| &y[j] * &y[k]).collect())
        .collect();

    let mut a = vec![TaylorJet::zero(2 * n, spray_order); n];
    for (l, al) in a.iter_mut().enumerate() {
        for j in 0..n {
            for k in 0..n {
                let term = &dg[k][j][l].scale(2.0) - &dg[l][j][k];
                *al = &*al + &(&term * &yy[j][k]);
            }
        }
    }
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|l| &tensor.g_inv[i][l].truncate(spray_order) * &a[l])
                .reduce(|acc, t| &acc + &t)
                .expect("nonempty")
                .scale(0.25)
        })
        .collect())
}

/// Spray, connection and Berwald coefficients; needs an energy jet of
/// order at least 5.
pub fn spray(energy: &TaylorJet, y0: &[f64], tensor: &FundamentalTensor) -> Result<SprayJets> {
    let n = dim_of(energy)?;
    let order = energy.order();
    if order < CURVATURE_ORDER_COST {
        return Err(Error::budget("spray and Berwald coefficients", CURVATURE_ORDER_COST, order));
    }
    let coeffs = spray_coefficients(energy, y0, tensor)?;
    let gi: Matrix = coeffs
        .iter()
        .map(|gc| (0..n).map(|j| gc.partial(n + j)).collect())
        .collect::<Result<_>>()?;
    let gijk = gi
        .iter()
        .map(|row| {
            row.iter()
                .map(|gij| (0..n).map(|k| gij.partial(n + k)).collect())
                .collect::<Result<Matrix>>()
        })
        .collect::<Result<_>>()?;
    Ok(SprayJets {
        g: coeffs,
        gi,
        gijk,
    })
}

/// `R^i_jk` stored as `r[i][j][k]`.
#[derive(Debug, Clone)]
pub struct CurvatureJets {
    pub r: Vec<Vec<Vec<TaylorJet>>>,
}

impl CurvatureJets {
    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn order(&self) -> usize {
        self.r[0][0][0].order()
    }
}

/// `R^i_jk = ∂G^i_j/∂x_k − ∂G^i_k/∂x_j + G^m_j G^i_km − G^m_k G^i_jm`.
pub fn curvature(spray: &SprayJets) -> Result<CurvatureJets> {
    let n = spray.dim();
    let order = spray.gijk[0][0][0].order();
    let gi: Matrix = spray
        .gi
        .iter()
        .map(|row| row.iter().map(|j| j.truncate(order)).collect())
        .collect();
    let zero = TaylorJet::zero(2 * n, order);
    let mut r = vec![vec![vec![zero.clone(); n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in (j + 1)..n {
                let mut v = &spray.gi[i][j].partial(k)? - &spray.gi[i][k].partial(j)?;
                for m in 0..n {
                    v = &v + &(&gi[m][j] * &spray.gijk[i][k][m]);
                    v = &v - &(&gi[m][k] * &spray.gijk[i][j][m]);
                }
                r[i][k][j] = -&v;
                r[i][j][k] = v;
            }
        }
    }
    Ok(CurvatureJets { r })
}

/// A vertical vector field `ξ^i ∂/∂y_i`, as jets either in `(x, y)` (`2n`
/// variables) or in the fiber coordinates `y` alone (`n` variables).
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalFieldJet {
    pub xi: Vec<TaylorJet>,
    pub label: String,
}

impl VerticalFieldJet {
    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn order(&self) -> usize {
        self.xi.iter().map(TaylorJet::order).min().unwrap_or(0)
    }

    pub fn num_vars(&self) -> usize {
        self.xi[0].num_vars()
    }

    /// Index of the first fiber variable.
    fn fiber_offset(&self) -> Result<usize> {
        let (n, nv) = (self.dim(), self.num_vars());
        if self.xi.iter().any(|c| c.num_vars() != nv) {
            return Err(Error::Incompatible("field components differ in variable count".into()));
        }
        match nv {
            v if v == 2 * n => Ok(n),
            v if v == n => Ok(0),
            _ => Err(Error::InvalidInput(format!(
                "field with {n} components cannot live on {nv} variables"
            ))),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.xi.iter().all(TaylorJet::is_zero)
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self {
            xi: self.xi.iter().map(|c| c.truncate(order)).collect(),
            label: self.label.clone(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            xi: self.xi.iter().map(|c| c.scale(factor)).collect(),
            label: format!("{factor}·{}", self.label),
        }
    }

    /// Componentwise `a·self + b·other` at the common order.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let order = self.order().min(other.order());
        Self {
            xi: self
                .xi
                .iter()
                .zip(&other.xi)
                .map(|(p, q)| &p.truncate(order).scale(a) + &q.truncate(order).scale(b))
                .collect(),
            label: format!("{a}·{} + {b}·{}", self.label, other.label),
        }
    }

    /// Freezes `x` at the expansion point, leaving jets in `y` only.
    pub fn restrict_to_fiber(&self) -> Result<Self> {
        let offset = self.fiber_offset()?;
        if offset == 0 {
            return Ok(self.clone());
        }
        Ok(Self {
            xi: self
                .xi
                .iter()
                .map(|c| c.restrict_leading(offset))
                .collect::<Result<_>>()?,
            label: self.label.clone(),
        })
    }

    /// Largest coefficient of `Σ_i w_i ξ^i` for covector jets `w` living on
    /// the same variables.
    pub fn pairing_residual(&self, covector: &[TaylorJet]) -> f64 {
        let order = self
            .order()
            .min(covector.iter().map(TaylorJet::order).min().unwrap_or(0));
        self.xi
            .iter()
            .zip(covector)
            .map(|(v, w)| &v.truncate(order) * &w.truncate(order))
            .reduce(|acc, t| &acc + &t)
            .map(|s| s.max_abs())
            .unwrap_or(0.0)
    }
}

fn index_label(i: usize) -> String {
    (i + 1).to_string()
}

/// The curvature vector field `𝓡_jk = R(δ_j, δ_k)`, with components `R^i_jk`.
pub fn curvature_field(curv: &CurvatureJets, j: usize, k: usize) -> VerticalFieldJet {
    let n = curv.dim();
    assert!(j < n && k < n, "curvature field index out of range");
    VerticalFieldJet {
        xi: (0..n).map(|i| curv.r[i][j][k].clone()).collect(),
        label: format!("R_{{{}{}}}", index_label(j), index_label(k)),
    }
}

/// Horizontal Berwald covariant derivative
/// `(∇_j ξ)^i = ∂ξ^i/∂x_j − G^k_j ∂ξ^i/∂y_k + G^i_jk ξ^k`.
pub fn covariant_derivative(spray: &SprayJets, xi: &VerticalFieldJet, j: usize) -> Result<VerticalFieldJet> {
    let n = spray.dim();
    if j >= n {
        return Err(Error::InvalidInput(format!("direction {j} out of range")));
    }
    if xi.dim() != n || xi.fiber_offset()? != n {
        return Err(Error::InvalidInput(
            "covariant derivative needs a field on the 2n variables (x, y)".into(),
        ));
    }
    let m = xi.order();
    if m == 0 {
        return Err(Error::budget("covariant derivative", 1, 0));
    }
    // limited by the Berwald coefficients when the field is longer than them
    let order = (m - 1).min(spray.gijk[0][0][0].order());
    let gi: Vec<TaylorJet> = (0..n).map(|k| spray.gi[k][j].truncate(order)).collect();
    let mut out = Vec::with_capacity(n);
    let xi_t: Vec<TaylorJet> = xi.xi.iter().map(|c| c.truncate(order)).collect();
    for i in 0..n {
        let mut v = xi.xi[i].partial(j)?.truncate(order);
        for k in 0..n {
            let dyk = xi.xi[i].partial(n + k)?.truncate(order);
            v = &v - &(&gi[k] * &dyk);
            v = &v + &(&spray.gijk[i][j][k].truncate(order) * &xi_t[k]);
        }
        out.push(v);
    }
    Ok(VerticalFieldJet {
        xi: out,
        label: format!("∇_{}{}", index_label(j), xi.label),
    })
}

/// Fiberwise Lie bracket `[a, b]^i = a^j ∂b^i/∂y_j − b^j ∂a^i/∂y_j`.
pub fn vertical_bracket(a: &VerticalFieldJet, b: &VerticalFieldJet) -> Result<VerticalFieldJet> {
    let n = a.dim();
    if b.dim() != n || a.num_vars() != b.num_vars() {
        return Err(Error::Incompatible("bracket of fields on different spaces".into()));
    }
    let offset = a.fiber_offset()?;
    let m = a.order().min(b.order());
    if m == 0 {
        return Err(Error::budget("vertical bracket", 1, 0));
    }
    let order = m - 1;
    let da: Vec<Vec<TaylorJet>> = a
        .xi
        .iter()
        .map(|c| (0..n).map(|j| c.truncate(m).partial(offset + j)).collect())
        .collect::<Result<_>>()?;
    let db: Vec<Vec<TaylorJet>> = b
        .xi
        .iter()
        .map(|c| (0..n).map(|j| c.truncate(m).partial(offset + j)).collect())
        .collect::<Result<_>>()?;
    let at: Vec<TaylorJet> = a.xi.iter().map(|c| c.truncate(order)).collect();
    let bt: Vec<TaylorJet> = b.xi.iter().map(|c| c.truncate(order)).collect();
    let xi = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| &(&at[j] * &db[i][j]) - &(&bt[j] * &da[i][j]))
                .reduce(|acc, t| &acc + &t)
                .expect("nonempty")
        })
        .collect();
    Ok(VerticalFieldJet {
        xi,
        label: format!("[{},{}]", a.label, b.label),
    })
}

/// Fiber gradient `∂E/∂y_i` of an energy jet.
pub fn energy_fiber_gradient(energy: &TaylorJet) -> Result<Vec<TaylorJet>> {
    let n = dim_of(energy)?;
    (0..n).map(|i| energy.partial(n + i)).collect()
}

/// Values `G^i(x, y)` and `G^i_j(x, y)` at a single point, from an energy
/// jet of order 4.
pub fn connection_at(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let point = BasePoint::new(x.to_vec(), y.to_vec())?;
    let energy = energy_jet(spec, &point, SPRAY_ORDER_COST + 1)?;
    let tensor = fundamental_tensor(&energy)?;
    let g = spray_coefficients(&energy, y, &tensor)?;
    let n = x.len();
    let gi = g
        .iter()
        .map(|gc| (0..n).map(|j| Ok(gc.partial(n + j)?.value())).collect())
        .collect::<Result<_>>()?;
    Ok((g.iter().map(TaylorJet::value).collect(), gi))
}

/// Everything the holonomy pipeline needs at one base point.
#[derive(Debug, Clone)]
pub struct BerwaldData {
    pub point: BasePoint,
    pub energy: TaylorJet,
    pub tensor: FundamentalTensor,
    pub spray: SprayJets,
    pub curvature: CurvatureJets,
}

impl BerwaldData {
    pub fn compute(spec: &MetricSpec, point: &BasePoint, energy_order: usize) -> Result<Self> {
        let energy = energy_jet(spec, point, energy_order)?;
        let tensor = fundamental_tensor(&energy)?;
        let spray = spray(&energy, &point.y, &tensor)?;
        let curvature = curvature(&spray)?;
        Ok(Self {
            point: point.clone(),
            energy,
            tensor,
            spray,
            curvature,
        })
    }

    pub fn dim(&self) -> usize {
        self.point.dim()
    }

    pub fn curvature_field(&self, j: usize, k: usize) -> VerticalFieldJet {
        curvature_field(&self.curvature, j, k)
    }

    pub fn covariant_derivative(&self, xi: &VerticalFieldJet, j: usize) -> Result<VerticalFieldJet> {
        covariant_derivative(&self.spray, xi, j)
    }

    /// Largest coefficient of `Σ_i (∂E/∂y_i) ξ^i`; zero up to rounding for
    /// every field of the holonomy construction.
    pub fn tangency_residual(&self, field: &VerticalFieldJet) -> Result<f64> {
        let grad = energy_fiber_gradient(&self.energy)?;
        let grad = if field.fiber_offset()? == 0 {
            let n = self.dim();
            grad.iter().map(|g| g.restrict_leading(n)).collect::<Result<Vec<_>>>()?
        } else {
            grad
        };
        Ok(field.pairing_residual(&grad))
    }
}
