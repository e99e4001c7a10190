//! Sweeps of the Funk perturbation `F_t² = (1−t)F² + t(ψF_B² + (1−ψ)F²)`
//! over `t`, with rank verdicts and the determinant of a frozen square
//! submatrix of the jet matrix.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::holonomy::{generate_spanning_set, infinite_as_null, jet_matrix, normalized_rows, target_dim, HolonomyConfig, RankReport};
use crate::metric::{check_strong_convexity, BasePoint, BumpParams, MetricSpec};

/// `|det P_t|` below this fraction of its largest value on the grid marks a dip.
pub const DET_DIP_FRACTION: f64 = 1e-3;

pub const CSV_HEADER: &str = "t,rank,generating,min_kept_singular,gap_ratio,det_Pt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TGrid {
    Range { min: f64, max: f64, step: f64 },
    List(Vec<f64>),
}

impl TGrid {
    /// Parses `min:max:step`.
    pub fn parse_range(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidInput(format!("t grid must be min:max:step, got {s:?}")));
        }
        let num = |p: &str| -> Result<f64> {
            p.trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad number {p:?} in t grid")))
        };
        Ok(TGrid::Range {
            min: num(parts[0])?,
            max: num(parts[1])?,
            step: num(parts[2])?,
        })
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let ts = match *self {
            TGrid::Range { min, max, step } => {
                if !(step > 0.0) || !step.is_finite() {
                    return Err(Error::InvalidInput(format!("t step must be positive, got {step}")));
                }
                if max < min {
                    return Err(Error::InvalidInput(format!("t grid is empty: {min} > {max}")));
                }
                let count = ((max - min) / step).round() as usize + 1;
                (0..count)
                    .map(|i| {
                        let t = min + i as f64 * step;
                        // snap accumulated rounding onto the endpoint
                        if (t - max).abs() < 1e-9 * step { max } else { t }
                    })
                    .collect()
            }
            TGrid::List(ref ts) => ts.clone(),
        };
        if ts.is_empty() {
            return Err(Error::InvalidInput("t grid is empty".into()));
        }
        if let Some(t) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidInput(format!("t = {t} outside [0, 1]")));
        }
        Ok(ts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub base: MetricSpec,
    #[serde(default)]
    pub bump: BumpParams,
    pub x: Vec<f64>,
    pub y0: Vec<f64>,
    #[serde(flatten)]
    pub holonomy: HolonomyConfig,
    pub t_grid: TGrid,
}

impl ScanConfig {
    pub fn new(base: MetricSpec, x: Vec<f64>, y0: Vec<f64>, t_grid: TGrid) -> Self {
        Self {
            base,
            bump: BumpParams::default(),
            x,
            y0,
            holonomy: HolonomyConfig::default(),
            t_grid,
        }
    }

    pub fn metric_at(&self, t: f64) -> MetricSpec {
        MetricSpec::funk_perturbation(self.base.clone(), t, self.bump)
    }

    pub fn validate(&self) -> Result<()> {
        self.holonomy.validate()?;
        self.bump.validate()?;
        self.metric_at(1.0).check_point(&self.x, &self.y0)?;
        self.t_grid.values()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub t: f64,
    pub rank: usize,
    pub generating: bool,
    pub min_kept_singular: f64,
    #[serde(with = "infinite_as_null")]
    pub gap_ratio: f64,
    #[serde(rename = "det_Pt")]
    pub det_pt: f64,
    /// False when `F_t` fails strong convexity at the point.
    pub valid: bool,
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalInterval {
    pub t_lo: f64,
    pub t_hi: f64,
    pub reasons: Vec<String>,
}

impl ExceptionalInterval {
    pub fn contains(&self, t: f64) -> bool {
        self.t_lo <= t && t <= self.t_hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Rows of the jet matrix forming `P_t`, chosen at `t = 1`.
    pub pivot_rows: Vec<usize>,
    pub candidate_intervals: Vec<ExceptionalInterval>,
}

impl ScanReport {
    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows)
    }

    /// Every non-generating row lies in a reported candidate interval.
    pub fn exceptions_covered(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| !r.generating)
            .all(|r| self.candidate_intervals.iter().any(|iv| iv.contains(r.t)))
    }
}

pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn rows_to_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_real(r.t),
            r.rank,
            r.generating,
            fmt_real(r.min_kept_singular),
            fmt_real(r.gap_ratio),
            fmt_real(r.det_pt)
        );
    }
    out
}

/// Jet matrix of the perturbed metric at one `t`, with `y0` renormalized to
/// the indicatrix of `F_t`.
pub fn jet_matrix_at(cfg: &ScanConfig, t: f64) -> Result<DMatrix<f64>> {
    let spec = cfg.metric_at(t);
    let h = &cfg.holonomy;
    let set = generate_spanning_set(&spec, &cfg.x, &cfg.y0, h.d, h.b, h.energy_order())?;
    jet_matrix(&set, h.k)
}

/// Greedy pivoted Gram–Schmidt on max-normalized rows: picks `count` rows
/// of largest residual norm, one at a time.
pub fn select_pivot_rows(m: &DMatrix<f64>, count: usize, tol: f64) -> Result<Vec<usize>> {
    let (normed, kept) = normalized_rows(m, tol);
    let mut residual: Vec<Vec<f64>> = (0..normed.nrows())
        .map(|i| normed.row(i).iter().copied().collect())
        .collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    let mut used = vec![false; residual.len()];
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    for _ in 0..count {
        let best = (0..residual.len())
            .filter(|&i| !used[i])
            .map(|i| (i, norm(&residual[i])))
            // first index wins ties, keeping the choice reproducible
            .fold(None, |acc: Option<(usize, f64)>, (i, n)| match acc {
                Some((_, bn)) if bn >= n => acc,
                _ => Some((i, n)),
            });
        let Some((p, pn)) = best.filter(|&(_, n)| n > tol) else {
            return Err(Error::Config(format!(
                "no full-rank {count}×{count} submatrix at t = 1: only {} independent rows",
                chosen.len()
            )));
        };
        used[p] = true;
        chosen.push(kept[p]);
        let q: Vec<f64> = residual[p].iter().map(|v| v / pn).collect();
        for (i, r) in residual.iter_mut().enumerate() {
            if used[i] {
                continue;
            }
            let c: f64 = r.iter().zip(&q).map(|(a, b)| a * b).sum();
            for (a, b) in r.iter_mut().zip(&q) {
                *a -= c * b;
            }
        }
    }
    Ok(chosen)
}

/// `det` of the rows `pivots` of `m` (all columns; the submatrix is square).
pub fn frozen_determinant(m: &DMatrix<f64>, pivots: &[usize]) -> f64 {
    let l = pivots.len();
    if l != m.ncols() {
        return f64::NAN;
    }
    DMatrix::from_fn(l, l, |i, j| m[(pivots[i], j)]).determinant()
}

fn scan_row(cfg: &ScanConfig, t: f64, pivots: &[usize]) -> Result<ScanRow> {
    let spec = cfg.metric_at(t);
    let point = BasePoint::new(cfg.x.clone(), cfg.y0.clone())?;
    let convex = check_strong_convexity(&spec, &point)?;
    if !convex.positive_definite {
        return Ok(ScanRow {
            t,
            rank: 0,
            generating: false,
            min_kept_singular: f64::NAN,
            gap_ratio: f64::NAN,
            det_pt: f64::NAN,
            valid: false,
            ambiguous: true,
        });
    }
    let m = jet_matrix_at(cfg, t)?;
    let h = &cfg.holonomy;
    let report = RankReport::from_matrix(&m, target_dim(cfg.x.len(), h.k), h.tol)?;
    Ok(ScanRow {
        t,
        rank: report.rank,
        generating: report.generating,
        min_kept_singular: report.min_kept_singular(),
        gap_ratio: report.gap_ratio,
        det_pt: frozen_determinant(&m, pivots),
        valid: true,
        ambiguous: report.ambiguous,
    })
}

/// Brackets exceptional `t`: non-generating rows, sign changes of `det P_t`
/// between neighbours, and interior dips of `|det P_t|`.
pub fn candidate_intervals(rows: &[ScanRow]) -> Vec<ExceptionalInterval> {
    let n = rows.len();
    let at = |i: usize| rows[i].t;
    let mut raw: Vec<ExceptionalInterval> = Vec::new();
    let mut push = |lo: usize, hi: usize, reason: String| {
        raw.push(ExceptionalInterval {
            t_lo: at(lo),
            t_hi: at(hi),
            reasons: vec![reason],
        })
    };
    let dmax = rows
        .iter()
        .map(|r| r.det_pt.abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    for i in 0..n {
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
        if !rows[i].generating {
            push(lo, hi, format!("rank {} at t = {}", rows[i].rank, rows[i].t));
        }
        if i + 1 < n {
            let (a, b) = (rows[i].det_pt, rows[i + 1].det_pt);
            if a.is_finite() && b.is_finite() && a * b < 0.0 {
                push(i, i + 1, "det P_t changes sign".into());
            }
        }
        if i > 0 && i + 1 < n && dmax > 0.0 {
            let d = rows[i].det_pt.abs();
            if d < DET_DIP_FRACTION * dmax && d <= rows[i - 1].det_pt.abs() && d <= rows[i + 1].det_pt.abs() {
                push(lo, hi, format!("|det P_t| dips to {d:.3e}"));
            }
        }
    }
    raw.sort_by(|a, b| a.t_lo.total_cmp(&b.t_lo));
    let mut merged: Vec<ExceptionalInterval> = Vec::new();
    for iv in raw {
        match merged.last_mut() {
            Some(last) if iv.t_lo <= last.t_hi => {
                last.t_hi = last.t_hi.max(iv.t_hi);
                for r in iv.reasons {
                    if !last.reasons.contains(&r) {
                        last.reasons.push(r);
                    }
                }
            }
            _ => merged.push(iv),
        }
    }
    merged
}

/// Runs the sweep on a pool of `workers` threads (`None`: one per processor).
/// Rows do not depend on the worker count.
pub fn scan_perturbation(cfg: &ScanConfig, workers: Option<usize>) -> Result<ScanReport> {
    cfg.validate()?;
    let ts = cfg.t_grid.values()?;
    let h = &cfg.holonomy;
    let m1 = jet_matrix_at(cfg, 1.0)?;
    let pivots = select_pivot_rows(&m1, target_dim(cfg.x.len(), h.k), h.tol)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::InvalidInput("worker count must be positive".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        ts.par_iter()
            .map(|&t| scan_row(cfg, t, &pivots))
            .collect::<Result<Vec<_>>>()
    })?;
    let candidate_intervals = candidate_intervals(&rows);
    Ok(ScanReport {
        rows,
        pivot_rows: pivots,
        candidate_intervals,
    })
}

/// `det P_t` on the grid for the rows frozen at `t = 1`.
pub fn track_determinant(cfg: &ScanConfig, pivot_rows: &[usize]) -> Result<Vec<(f64, f64)>> {
    cfg.t_grid
        .values()?
        .into_iter()
        .map(|t| Ok((t, frozen_determinant(&jet_matrix_at(cfg, t)?, pivot_rows))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, generating: bool, det: f64) -> ScanRow {
        ScanRow {
            t,
            rank: if generating { 4 } else { 3 },
            generating,
            min_kept_singular: 1.0,
            gap_ratio: f64::INFINITY,
            det_pt: det,
            valid: true,
            ambiguous: false,
        }
    }

    #[test]
    fn grid_arithmetic() {
        let g = TGrid::parse_range("0:1:0.05").unwrap();
        let v = g.values().unwrap();
        assert_eq!(v.len(), 21);
        assert_eq!(v[0], 0.0);
        assert_eq!(*v.last().unwrap(), 1.0);
        assert_eq!(TGrid::parse_range("0.05:1:0.05").unwrap().values().unwrap().len(), 20);
        assert!(TGrid::parse_range("0:1:0").unwrap().values().is_err());
        assert!(TGrid::parse_range("0:2:0.5").unwrap().values().is_err());
        assert!(TGrid::parse_range("0:1").is_err());
        assert!(TGrid::List(vec![]).values().is_err());
    }

    #[test]
    fn intervals_from_sign_changes_rank_drops_and_dips() {
        let rows = vec![
            row(0.0, true, 1.0),
            row(0.1, true, 0.5),
            row(0.2, true, -0.5),
            row(0.3, true, -1.0),
            row(0.4, false, -1.0),
            row(0.5, true, -1.0),
            row(0.6, true, -1e-5),
            row(0.7, true, -1.0),
        ];
        let iv = candidate_intervals(&rows);
        // the rank drop [0.3, 0.5] and the dip [0.5, 0.7] touch and merge
        assert_eq!(iv.len(), 2, "{iv:?}");
        assert_eq!((iv[0].t_lo, iv[0].t_hi), (0.1, 0.2));
        assert_eq!((iv[1].t_lo, iv[1].t_hi), (0.3, 0.7));
        assert_eq!(iv[1].reasons.len(), 2);
        let report = ScanReport { rows, pivot_rows: vec![], candidate_intervals: iv };
        assert!(report.exceptions_covered());
    }

    #[test]
    fn overlapping_intervals_merge() {
        let rows = vec![row(0.0, false, 0.0), row(0.1, false, 0.0), row(0.2, true, 1.0), row(0.3, true, 2.0)];
        let iv = candidate_intervals(&rows);
        assert_eq!(iv.len(), 1);
        assert_eq!((iv[0].t_lo, iv[0].t_hi), (0.0, 0.2));
    }

    #[test]
    fn pivots_pick_independent_rows() {
        let m = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let p = select_pivot_rows(&m, 2, 1e-9).unwrap();
        assert_eq!(p.len(), 2);
        assert!(frozen_determinant(&m, &p).abs() > 0.5);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert!(matches!(select_pivot_rows(&m, 2, 1e-9), Err(Error::Config(_))));
    }

    #[test]
    fn csv_format() {
        let mut r = row(0.05, true, -2.5);
        r.gap_ratio = 12.0;
        let csv = rows_to_csv(&[r, row(1.0, true, 1.0)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "5.0000000000000003e-2,4,true,1.0000000000000000e0,1.2000000000000000e1,-2.5000000000000000e0"
        );
        assert!(lines[2].contains(",inf,"));
    }
}
