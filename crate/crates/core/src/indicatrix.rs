//! Graph charts on the indicatrix `I_x = {y : F(x, y) = 1}` and the
//! restriction of vertical fields to them.
//!
//! Near a unit vector `y0` the indicatrix is written as a graph
//! `y_e = h(u)` over the remaining fiber coordinates, `u_a = y_{i_a} − y0_{i_a}`
//! for `i_a ≠ e`. A tangent vertical field then has chart components
//! `ξ^i ∘ γ` for `i ≠ e`.

use serde::{Deserialize, Serialize};

use crate::berwald::VerticalFieldJet;
use crate::error::{Error, Result};
use crate::jet::{monomial_count, newton_steps, TaylorJet};
use crate::metric::{energy_jet_any_order, norm_value, MetricSpec};

/// Largest tolerated `|F(x, y0) − 1|` when building a chart.
pub const UNIT_TOLERANCE: f64 = 1e-9;
/// Below this every fiber gradient component is treated as vanishing.
pub const ADMISSIBILITY_FLOOR: f64 = 1e-8;
/// Tangency residual (relative to the field's size) that signals a bug upstream.
pub const TANGENCY_LIMIT: f64 = 1e-6;
const GRAPH_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct IndicatrixChart {
    pub base_x: Vec<f64>,
    pub y0: Vec<f64>,
    pub eliminated: usize,
    /// `y_e` as a jet in the `n − 1` chart variables.
    pub graph: TaylorJet,
    pub order: usize,
    /// `F(x, ·)` as a jet in the `n` fiber variables at `y0`.
    norm: TaylorJet,
}

/// A field on the indicatrix in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartField {
    #[serde(skip)]
    pub components: Vec<TaylorJet>,
    pub label: String,
}

impl ChartField {
    pub fn order(&self) -> usize {
        self.components.iter().map(TaylorJet::order).min().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(TaylorJet::is_zero)
    }
}

fn fiber_norm_jet(spec: &MetricSpec, x: &[f64], y0: &[f64], order: usize) -> Result<TaylorJet> {
    let n = x.len();
    let e = energy_jet_any_order(spec, x, y0, order)?.restrict_leading(n)?;
    e.scale(2.0).sqrt()
}

/// Chart at the unit vector `y0`, eliminating the coordinate with the largest
/// `|∂F/∂y_i|`.
pub fn build_chart(spec: &MetricSpec, x: &[f64], y0: &[f64], order: usize) -> Result<IndicatrixChart> {
    build(spec, x, y0, order, None)
}

/// Chart eliminating a prescribed coordinate, provided it is admissible.
pub fn build_chart_eliminating(
    spec: &MetricSpec,
    x: &[f64],
    y0: &[f64],
    order: usize,
    eliminated: usize,
) -> Result<IndicatrixChart> {
    build(spec, x, y0, order, Some(eliminated))
}

fn build(spec: &MetricSpec, x: &[f64], y0: &[f64], order: usize, forced: Option<usize>) -> Result<IndicatrixChart> {
    let n = y0.len();
    if n < 2 {
        return Err(Error::InvalidInput("indicatrix charts need dimension ≥ 2".into()));
    }
    let f0 = norm_value(spec, x, y0)?;
    if (f0 - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "chart base vector is not on the indicatrix: F = {f0}"
        )));
    }
    // one extra order so that ∂F/∂y_e survives at full chart order
    let norm = fiber_norm_jet(spec, x, y0, order + 1)?;
    let grad: Vec<f64> = (0..n)
        .map(|i| {
            let mut a = vec![0; n];
            a[i] = 1;
            norm.coeff(&a)
        })
        .collect();
    let best = grad
        .iter()
        .enumerate()
        .fold(0, |b, (i, g)| if g.abs() > grad[b].abs() { i } else { b });
    if grad[best].abs() < ADMISSIBILITY_FLOOR {
        return Err(Error::Degenerate(format!("fiber gradient of F vanishes: {grad:?}")));
    }
    let e = match forced {
        None => best,
        Some(e) if e >= n => {
            return Err(Error::InvalidInput(format!("eliminated index {e} out of range")));
        }
        Some(e) if grad[e].abs() < ADMISSIBILITY_FLOOR => {
            return Err(Error::Degenerate(format!(
                "cannot eliminate y_{}: ∂F/∂y = {}",
                e + 1,
                grad[e]
            )));
        }
        Some(e) => e,
    };

    let nu = n - 1;
    let de = norm.partial(e)?;
    let mut h = TaylorJet::constant(y0[e], nu, order);
    let mut chart = IndicatrixChart {
        base_x: x.to_vec(),
        y0: y0.to_vec(),
        eliminated: e,
        graph: h.clone(),
        order,
        norm,
    };
    // Newton on truncated series; the constant term stays at y0_e.
    let mut converged = false;
    for _ in 0..newton_steps(order) + 4 {
        let gamma = chart.gamma();
        let resid = chart.norm.compose(y0, &gamma)?.truncate(order).with_value(0.0);
        if resid.max_abs() <= GRAPH_TOLERANCE {
            converged = true;
            break;
        }
        // the derivative is one order short; its top coefficient only meets
        // the vanishing constant term of the residual
        let slope = de.compose(y0, &gamma)?.extend(order);
        h = &h - &resid.div(&slope)?;
        chart.graph = h.with_value(y0[e]);
        h = chart.graph.clone();
    }
    if !converged {
        let resid = chart.norm.compose(y0, &chart.gamma())?.truncate(order).with_value(0.0);
        if resid.max_abs() > 1e-10 {
            return Err(Error::Accuracy(format!(
                "indicatrix graph did not converge: residual {:e}",
                resid.max_abs()
            )));
        }
    }
    Ok(chart)
}

impl IndicatrixChart {
    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    /// Fiber index carried by chart variable `a`.
    pub fn fiber_index(&self, a: usize) -> usize {
        if a < self.eliminated {
            a
        } else {
            a + 1
        }
    }

    /// `γ(u)`: the point of `I_x` over chart coordinates `u`, as `n` jets in
    /// the `n − 1` chart variables.
    pub fn gamma(&self) -> Vec<TaylorJet> {
        let nu = self.dim() - 1;
        (0..self.dim())
            .map(|i| {
                if i == self.eliminated {
                    self.graph.clone()
                } else {
                    let a = if i < self.eliminated { i } else { i - 1 };
                    TaylorJet::variable(self.y0[i], a, nu, self.order).expect("chart seed")
                }
            })
            .collect()
    }

    /// `γ(u)` evaluated at a displacement `u` (numerical, via the graph polynomial).
    pub fn point(&self, u: &[f64]) -> Vec<f64> {
        let mut y = self.y0.clone();
        for (a, &ua) in u.iter().enumerate() {
            y[self.fiber_index(a)] += ua;
        }
        y[self.eliminated] = self.graph.eval(u);
        y
    }

    /// `F(x, ·)` jet at `y0` in the fiber variables.
    pub fn norm_jet(&self) -> &TaylorJet {
        &self.norm
    }

    /// `F ∘ γ − 1`, as a jet in the chart variables.
    pub fn defining_residual(&self) -> Result<TaylorJet> {
        Ok(self
            .norm
            .compose(&self.y0, &self.gamma())?
            .truncate(self.order)
            .add_scalar(-1.0))
    }

    fn compose_field(&self, xi: &VerticalFieldJet) -> Result<Vec<TaylorJet>> {
        let n = self.dim();
        if xi.dim() != n {
            return Err(Error::InvalidInput(format!(
                "field has {} components, chart dimension is {n}",
                xi.dim()
            )));
        }
        let fiber = xi.restrict_to_fiber()?;
        let order = fiber.order().min(self.order);
        let gamma: Vec<TaylorJet> = self.gamma().iter().map(|g| g.truncate(order)).collect();
        fiber
            .xi
            .iter()
            .map(|c| c.truncate(order).compose(&self.y0, &gamma))
            .collect()
    }

    /// Largest coefficient of `Σ_i (∂F/∂y_i ∘ γ)(ξ^i ∘ γ)` and the field's size.
    fn tangency(&self, composed: &[TaylorJet]) -> Result<(f64, f64)> {
        let order = composed[0].order();
        let gamma: Vec<TaylorJet> = self.gamma().iter().map(|g| g.truncate(order)).collect();
        let mut s = TaylorJet::zero(self.dim() - 1, order);
        for (i, c) in composed.iter().enumerate() {
            let w = self.norm.partial(i)?.compose(&self.y0, &gamma)?.truncate(order);
            s = &s + &(&w * c);
        }
        let size = composed.iter().map(TaylorJet::max_abs).fold(0.0, f64::max);
        Ok((s.max_abs(), size))
    }

    /// The eliminated component recomputed from tangency,
    /// `ξ^e = −Σ_{i≠e} (∂F/∂y_i) ξ^i / (∂F/∂y_e)` on the chart.
    pub fn eliminated_from_tangency(&self, field: &ChartField) -> Result<TaylorJet> {
        let order = field.order();
        let gamma: Vec<TaylorJet> = self.gamma().iter().map(|g| g.truncate(order)).collect();
        let w = |i: usize| -> Result<TaylorJet> {
            Ok(self.norm.partial(i)?.compose(&self.y0, &gamma)?.truncate(order))
        };
        let mut s = TaylorJet::zero(self.dim() - 1, order);
        for (a, c) in field.components.iter().enumerate() {
            s = &s + &(&w(self.fiber_index(a))? * &c.truncate(order));
        }
        s.scale(-1.0).div(&w(self.eliminated)?)
    }
}

/// Pushes a vertical field tangent to the indicatrix into chart coordinates.
pub fn restrict_field(chart: &IndicatrixChart, xi: &VerticalFieldJet) -> Result<ChartField> {
    let composed = chart.compose_field(xi)?;
    let (residual, size) = chart.tangency(&composed)?;
    if residual > TANGENCY_LIMIT * size.max(1.0) {
        return Err(Error::Inconsistent(format!(
            "field {} is not tangent to the indicatrix (residual {residual:e})",
            xi.label
        )));
    }
    let e = chart.eliminated;
    Ok(ChartField {
        components: composed
            .into_iter()
            .enumerate()
            .filter(|&(i, _)| i != e)
            .map(|(_, c)| c)
            .collect(),
        label: xi.label.clone(),
    })
}

/// Length of a `k`-jet vector of a field on an `m`-dimensional indicatrix chart.
pub fn jet_vector_len(chart_dim: usize, k: usize) -> usize {
    chart_dim * monomial_count(chart_dim, k)
}

/// All coefficients of degree `≤ k`, component-major and graded-lex inside
/// each component.
pub fn jet_vector(field: &ChartField, k: usize) -> Result<Vec<f64>> {
    if field.order() < k {
        return Err(Error::budget(format!("{}-jet of {}", k, field.label), k, field.order()));
    }
    Ok(field
        .components
        .iter()
        .flat_map(|c| c.coeffs_upto(k).iter().copied())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::berwald::BerwaldData;
    use crate::metric::BasePoint;

    #[test]
    fn euclidean_circle_chart() {
        let spec = MetricSpec::euclidean(2);
        let c = build_chart(&spec, &[0.0, 0.0], &[1.0, 0.0], 6).unwrap();
        assert_eq!(c.eliminated, 0);
        // sqrt(1 − u²) = 1 − u²/2 − u⁴/8 − u⁶/16
        let expected = [1.0, 0.0, -0.5, 0.0, -0.125, 0.0, -0.0625];
        for (p, e) in expected.iter().enumerate() {
            assert!((c.graph.coeff(&[p as u32]) - e).abs() < 1e-13, "u^{p}");
        }

        let c = build_chart(&spec, &[0.0, 0.0], &[0.0, 1.0], 4).unwrap();
        assert_eq!(c.eliminated, 1);
        assert!((c.graph.coeff(&[2]) + 0.5).abs() < 1e-13);
        assert!((c.graph.coeff(&[4]) + 0.125).abs() < 1e-13);
    }

    #[test]
    fn rejects_off_indicatrix_and_bad_elimination() {
        let spec = MetricSpec::euclidean(2);
        assert!(matches!(
            build_chart(&spec, &[0.0, 0.0], &[2.0, 0.0], 3),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            build_chart_eliminating(&spec, &[0.0, 0.0], &[1.0, 0.0], 3, 1),
            Err(Error::Degenerate(_))
        ));
        assert!(build_chart_eliminating(&spec, &[0.0, 0.0], &[1.0, 0.0], 3, 2).is_err());
    }

    #[test]
    fn rotation_generator_in_chart() {
        let spec = MetricSpec::euclidean(2);
        let c = build_chart(&spec, &[0.0, 0.0], &[1.0, 0.0], 5).unwrap();
        let y = |i| TaylorJet::variable([1.0, 0.0][i], i, 2, 5).unwrap();
        let rot = VerticalFieldJet { xi: vec![-&y(1), y(0)], label: "rot".into() };
        let f = restrict_field(&c, &rot).unwrap();
        assert_eq!(f.components.len(), 1);
        // ξ² ∘ γ = sqrt(1 − u²)
        assert!((f.components[0].value() - 1.0).abs() < 1e-15);
        assert!((f.components[0].coeff(&[2]) + 0.5).abs() < 1e-13);

        // non-tangent field is refused
        let radial = VerticalFieldJet { xi: vec![y(0), y(1)], label: "radial".into() };
        assert!(matches!(restrict_field(&c, &radial), Err(Error::Inconsistent(_))));

        let zero = VerticalFieldJet { xi: vec![TaylorJet::zero(2, 5); 2], label: "0".into() };
        let z = restrict_field(&c, &zero).unwrap();
        assert!(z.is_zero());
        assert_eq!(jet_vector(&z, 3).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn jet_vector_lengths() {
        assert_eq!(jet_vector_len(1, 3), 4);
        assert_eq!(jet_vector_len(2, 3), 20);
        let field = ChartField {
            components: vec![TaylorJet::zero(2, 4), TaylorJet::zero(2, 4)],
            label: "z".into(),
        };
        assert_eq!(jet_vector(&field, 3).unwrap().len(), 20);
        assert!(matches!(jet_vector(&field, 5), Err(Error::Budget { .. })));
    }

    #[test]
    fn funk_curvature_field_eliminated_component_consistent() {
        let spec = MetricSpec::funk(2);
        let x = [0.0, 0.0];
        let f = norm_value(&spec, &x, &[1.0, 0.0]).unwrap();
        let y0 = [1.0 / f, 0.0];
        let d = BerwaldData::compute(&spec, &BasePoint::new(x.to_vec(), y0.to_vec()).unwrap(), 9).unwrap();
        let r = d.curvature_field(0, 1);
        let c = build_chart(&spec, &x, &y0, 4).unwrap();
        let field = restrict_field(&c, &r).unwrap();
        let recomputed = c.eliminated_from_tangency(&field).unwrap();
        let direct = r.restrict_to_fiber().unwrap().xi[c.eliminated]
            .truncate(field.order())
            .compose(&y0, &c.gamma().iter().map(|g| g.truncate(field.order())).collect::<Vec<_>>())
            .unwrap();
        assert!(recomputed.max_abs_diff(&direct) < 1e-8);
    }
}
