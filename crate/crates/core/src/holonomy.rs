//! Spanning sets of the infinitesimal holonomy algebra and the numerical
//! `k`-jet-generating test.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::berwald::{required_energy_order, vertical_bracket, BerwaldData, VerticalFieldJet};
use crate::error::{Error, Result};
use crate::indicatrix::{build_chart, build_chart_eliminating, jet_vector, jet_vector_len, restrict_field, ChartField, IndicatrixChart};
use crate::metric::{norm_value, BasePoint, MetricSpec};

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_D: usize = 3;
pub const DEFAULT_B: usize = 0;
pub const DEFAULT_TOL: f64 = 1e-9;
/// Below this `σ_rank / σ_{rank+1}` the rank decision is flagged ambiguous.
pub const AMBIGUITY_GAP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolonomyConfig {
    pub k: usize,
    pub d: usize,
    pub b: usize,
    pub tol: f64,
    /// Energy-jet order; `None` means `k + d + b + 5`.
    #[serde(default)]
    pub jet_order: Option<usize>,
}

impl Default for HolonomyConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            d: DEFAULT_D,
            b: DEFAULT_B,
            tol: DEFAULT_TOL,
            jet_order: None,
        }
    }
}

impl HolonomyConfig {
    pub fn energy_order(&self) -> usize {
        self.jet_order.unwrap_or_else(|| required_energy_order(self.k, self.d, self.b))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidInput(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        let needed = required_energy_order(self.k, self.d, self.b);
        if self.energy_order() < needed {
            return Err(Error::budget(
                format!("{}-jets with d = {}, b = {}", self.k, self.d, self.b),
                needed,
                self.energy_order(),
            ));
        }
        Ok(())
    }
}

/// `(n − 1)·C(n − 1 + k, k)`: dimension of the `k`-jets of vector fields on
/// an `(n − 1)`-dimensional indicatrix.
pub fn target_dim(n: usize, k: usize) -> usize {
    jet_vector_len(n - 1, k)
}

/// `y0 / F(x, y0)`.
pub fn normalize(spec: &MetricSpec, x: &[f64], y0: &[f64]) -> Result<Vec<f64>> {
    let f = norm_value(spec, x, y0)?;
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::Degenerate(format!("F(x, y0) = {f}")));
    }
    Ok(y0.iter().map(|v| v / f).collect())
}

#[derive(Debug, Clone)]
pub struct SpanningSet {
    pub fields: Vec<ChartField>,
    pub deriv_depth: usize,
    pub bracket_depth: usize,
    pub chart: IndicatrixChart,
}

impl SpanningSet {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.fields.iter().map(|f| f.label.as_str()).collect()
    }
}

/// `𝓡_ij` followed by `∇_{p_1}…∇_{p_s}𝓡_ij` for `s = 1..=d`, words in
/// lexicographic order, for every pair `i < j` in lexicographic order.
pub fn curvature_family(data: &BerwaldData, d: usize) -> Result<Vec<VerticalFieldJet>> {
    let n = data.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut level = vec![data.curvature_field(i, j)];
            out.extend(level.iter().cloned());
            for _ in 0..d {
                let mut next = Vec::with_capacity(level.len() * n);
                for p in 0..n {
                    for w in &level {
                        next.push(data.covariant_derivative(w, p)?);
                    }
                }
                out.extend(next.iter().cloned());
                level = next;
            }
        }
    }
    Ok(out)
}

/// Fiberwise brackets: level one is `[f_a, f_b]` for `a < b`; each further
/// level brackets every base field with the previous level.
pub fn bracket_family(base: &[VerticalFieldJet], b: usize) -> Result<Vec<VerticalFieldJet>> {
    if b == 0 {
        return Ok(Vec::new());
    }
    let fiber: Vec<VerticalFieldJet> = base
        .iter()
        .map(VerticalFieldJet::restrict_to_fiber)
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut level = Vec::new();
    for a in 0..fiber.len() {
        for c in (a + 1)..fiber.len() {
            level.push(vertical_bracket(&fiber[a], &fiber[c])?);
        }
    }
    out.extend(level.iter().cloned());
    for _ in 1..b {
        let mut next = Vec::with_capacity(fiber.len() * level.len());
        for f in &fiber {
            for g in &level {
                next.push(vertical_bracket(f, g)?);
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    Ok(out)
}

/// Which coordinate the chart eliminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChartChoice {
    #[default]
    Automatic,
    Eliminate(usize),
}

pub fn generate_spanning_set(
    spec: &MetricSpec,
    x: &[f64],
    y0: &[f64],
    d: usize,
    b: usize,
    energy_order: usize,
) -> Result<SpanningSet> {
    generate_spanning_set_with_chart(spec, x, y0, d, b, energy_order, ChartChoice::Automatic)
}

pub fn generate_spanning_set_with_chart(
    spec: &MetricSpec,
    x: &[f64],
    y0: &[f64],
    d: usize,
    b: usize,
    energy_order: usize,
    choice: ChartChoice,
) -> Result<SpanningSet> {
    spec.validate()?;
    let y = normalize(spec, x, y0)?;
    let point = BasePoint::new(x.to_vec(), y.clone())?;
    let data = BerwaldData::compute(spec, &point, energy_order)?;
    let chart_order = data.curvature.order();
    let chart = match choice {
        ChartChoice::Automatic => build_chart(spec, x, &y, chart_order)?,
        ChartChoice::Eliminate(e) => build_chart_eliminating(spec, x, &y, chart_order, e)?,
    };
    let mut raw = curvature_family(&data, d)?;
    let brackets = bracket_family(&raw, b)?;
    raw.extend(brackets);
    let fields = raw
        .iter()
        .map(|f| restrict_field(&chart, f))
        .collect::<Result<_>>()?;
    Ok(SpanningSet {
        fields,
        deriv_depth: d,
        bracket_depth: b,
        chart,
    })
}

/// Row `i` is the `k`-jet vector of field `i`.
pub fn jet_matrix(set: &SpanningSet, k: usize) -> Result<DMatrix<f64>> {
    let cols = jet_vector_len(set.chart.dim() - 1, k);
    let rows = set
        .fields
        .iter()
        .map(|f| jet_vector(f, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Outcome of the singular-value rank decision.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericalRank {
    pub rank: usize,
    /// Descending singular values of the normalized, kept rows.
    pub singular_values: Vec<f64>,
    /// `σ_rank / σ_{rank+1}`; infinite when no singular value was cut.
    pub gap_ratio: f64,
    pub ambiguous: bool,
    /// Indices of rows that survived the zero-row filter.
    pub kept_rows: Vec<usize>,
}

fn row_max(m: &DMatrix<f64>, i: usize) -> f64 {
    m.row(i).iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Rows scaled to unit max-norm; rows whose max-norm is at most
/// `tol` times the largest one count as zero and are dropped.
pub fn normalized_rows(m: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, Vec<usize>) {
    let scales: Vec<f64> = (0..m.nrows()).map(|i| row_max(m, i)).collect();
    let top = scales.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..m.nrows())
        .filter(|&i| scales[i] > 0.0 && scales[i] > tol * top)
        .collect();
    let out = DMatrix::from_fn(kept.len(), m.ncols(), |r, c| m[(kept[r], c)] / scales[kept[r]]);
    (out, kept)
}

pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> Result<NumericalRank> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("jet matrix has non-finite entries".into()));
    }
    let (normed, kept_rows) = normalized_rows(m, tol);
    if normed.nrows() == 0 || normed.ncols() == 0 {
        return Ok(NumericalRank {
            rank: 0,
            singular_values: Vec::new(),
            gap_ratio: f64::INFINITY,
            ambiguous: false,
            kept_rows,
        });
    }
    let mut sv: Vec<f64> = normed.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv[0];
    let rank = sv.iter().filter(|&&s| s > tol * smax).count();
    let gap_ratio = match (rank, sv.get(rank)) {
        (0, _) | (_, None) => f64::INFINITY,
        (r, Some(&next)) => sv[r - 1] / next,
    };
    Ok(NumericalRank {
        rank,
        singular_values: sv,
        gap_ratio,
        ambiguous: gap_ratio < AMBIGUITY_GAP,
        kept_rows,
    })
}

pub(crate) mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// The verdict of the `k`-jet-generating test at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub matrix_rows: usize,
    pub matrix_cols: usize,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub target_dim: usize,
    pub generating: bool,
    /// Serialized as `null` when infinite.
    #[serde(with = "infinite_as_null")]
    pub gap_ratio: f64,
    pub ambiguous: bool,
}

impl RankReport {
    pub fn from_matrix(m: &DMatrix<f64>, target_dim: usize, tol: f64) -> Result<Self> {
        let nr = numerical_rank(m, tol)?;
        Ok(Self {
            matrix_rows: m.nrows(),
            matrix_cols: m.ncols(),
            singular_values: nr.singular_values,
            rank: nr.rank,
            target_dim,
            generating: nr.rank == target_dim,
            gap_ratio: nr.gap_ratio,
            ambiguous: nr.ambiguous,
        })
    }

    /// Smallest singular value counted in the rank (0 when the rank is 0).
    pub fn min_kept_singular(&self) -> f64 {
        if self.rank == 0 {
            0.0
        } else {
            self.singular_values[self.rank - 1]
        }
    }

    pub fn summary(&self, k: usize) -> String {
        format!(
            "{k}-jet generating: {}, rank {}/{}, gap {:.1e}{}",
            if self.generating { "YES" } else { "NO" },
            self.rank,
            self.target_dim,
            self.gap_ratio,
            if self.ambiguous { " (ambiguous)" } else { "" }
        )
    }
}

pub fn is_k_jet_generating(spec: &MetricSpec, x: &[f64], y0: &[f64], cfg: &HolonomyConfig) -> Result<RankReport> {
    rank_report_with_chart(spec, x, y0, cfg, ChartChoice::Automatic)
}

pub fn rank_report_with_chart(
    spec: &MetricSpec,
    x: &[f64],
    y0: &[f64],
    cfg: &HolonomyConfig,
    choice: ChartChoice,
) -> Result<RankReport> {
    cfg.validate()?;
    let set = generate_spanning_set_with_chart(spec, x, y0, cfg.d, cfg.b, cfg.energy_order(), choice)?;
    let m = jet_matrix(&set, cfg.k)?;
    RankReport::from_matrix(&m, target_dim(spec.dim, cfg.k), cfg.tol)
}
