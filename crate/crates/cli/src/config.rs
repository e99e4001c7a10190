//! Run configuration: TOML document, command-line flags, and the merge of
//! the two (flags win) into a fully resolved [`RunConfig`].

use std::path::PathBuf;

use clap::ValueEnum;
use finhol::holonomy::{HolonomyConfig, DEFAULT_B, DEFAULT_D, DEFAULT_K, DEFAULT_TOL};
use finhol::metric::{BumpParams, MetricSpec, RiemannianCatalog, DEFAULT_R1, DEFAULT_R2};
use finhol::scan::TGrid;
use finhol::transport::DEFAULT_STEPS_PER_UNIT;
use serde::{Deserialize, Serialize};

pub const DEFAULT_DIM: usize = 2;
pub const DEFAULT_METRIC: &str = "funk";
pub const DEFAULT_BASE: &str = "euclidean";
pub const DEFAULT_EPS: f64 = 1e-2;
pub const DEFAULT_LOOP: [usize; 2] = [1, 2];
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_T_GRID: &str = "0:1:0.05";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Curvature,
    Rank,
    Scan,
    Transport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// A metric either by catalog name (`dim` taken from elsewhere) or as a
/// full metric document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricDoc {
    Name(String),
    Spec(MetricSpec),
}

/// `t` as a single value, a `min:max:step` range, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TDoc {
    Value(f64),
    Text(String),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSection {
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdersSection {
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub b: Option<usize>,
    pub jet_order: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub base: Option<MetricDoc>,
    pub t: Option<TDoc>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    #[serde(rename = "loop")]
    pub loop_dirs: Option<[usize; 2]>,
    pub eps: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// The config document. Every key is optional; flags override it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    pub metric: Option<MetricDoc>,
    pub dim: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub point: PointSection,
    #[serde(default)]
    pub orders: OrdersSection,
    #[serde(default)]
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub transport: TransportSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config: {e}"))
    }

    /// Lays `over` on top of `self`, key by key.
    pub fn overlay(self, over: FileConfig) -> FileConfig {
        FileConfig {
            command: over.command.or(self.command),
            metric: over.metric.or(self.metric),
            dim: over.dim.or(self.dim),
            tol: over.tol.or(self.tol),
            seed: over.seed.or(self.seed),
            point: PointSection {
                x: over.point.x.or(self.point.x),
                y: over.point.y.or(self.point.y),
                samples: over.point.samples.or(self.point.samples),
            },
            orders: OrdersSection {
                k: over.orders.k.or(self.orders.k),
                d: over.orders.d.or(self.orders.d),
                b: over.orders.b.or(self.orders.b),
                jet_order: over.orders.jet_order.or(self.orders.jet_order),
            },
            perturbation: PerturbationSection {
                base: over.perturbation.base.or(self.perturbation.base),
                t: over.perturbation.t.or(self.perturbation.t),
                r1: over.perturbation.r1.or(self.perturbation.r1),
                r2: over.perturbation.r2.or(self.perturbation.r2),
            },
            scan: ScanSection {
                workers: over.scan.workers.or(self.scan.workers),
            },
            transport: TransportSection {
                loop_dirs: over.transport.loop_dirs.or(self.transport.loop_dirs),
                eps: over.transport.eps.or(self.transport.eps),
                steps: over.transport.steps.or(self.transport.steps),
            },
            output: OutputSection {
                path: over.output.path.or(self.output.path),
                format: over.output.format.or(self.output.format),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSettings {
    pub base: MetricSpec,
    pub t_grid: TGrid,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSettings {
    /// 0-based loop directions.
    pub i: usize,
    pub j: usize,
    pub eps: f64,
    pub steps: usize,
}

/// Fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub metric: MetricSpec,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub holonomy: HolonomyConfig,
    pub bump: BumpParams,
    pub scan: ScanSettings,
    pub transport: TransportSettings,
    pub out: Option<PathBuf>,
    pub format: Format,
}

pub fn metric_by_name(name: &str, dim: usize, pert: &PerturbationSection, bump: BumpParams) -> Result<MetricSpec, String> {
    Ok(match name {
        "euclidean" => MetricSpec::euclidean(dim),
        "funk" | "funk_standard" => MetricSpec::funk(dim),
        "sphere" | "round_sphere" => MetricSpec::round_sphere(dim),
        "flat" => MetricSpec::riemannian(dim, RiemannianCatalog::Flat),
        "funk_perturbation" => {
            let base = resolve_metric(pert.base.as_ref(), DEFAULT_BASE, dim, pert, bump)?;
            let t = match &pert.t {
                None => 1.0,
                Some(TDoc::Value(t)) => *t,
                Some(TDoc::Text(s)) => s.trim().parse().map_err(|_| format!("t must be a single number here, got '{s}'"))?,
                Some(TDoc::List(_)) => return Err("t must be a single number for funk_perturbation".into()),
            };
            MetricSpec::funk_perturbation(base, t, bump)
        }
        other => {
            return Err(format!(
                "unknown metric '{other}' (expected euclidean, funk, sphere, flat or funk_perturbation)"
            ))
        }
    })
}

fn resolve_metric(
    doc: Option<&MetricDoc>,
    default: &str,
    dim: usize,
    pert: &PerturbationSection,
    bump: BumpParams,
) -> Result<MetricSpec, String> {
    match doc {
        None => metric_by_name(default, dim, pert, bump),
        Some(MetricDoc::Name(n)) => metric_by_name(n, dim, pert, bump),
        Some(MetricDoc::Spec(s)) => {
            if s.dim != dim {
                return Err(format!("metric document has dim {} but the run uses dim {dim}", s.dim));
            }
            Ok(s.clone())
        }
    }
}

fn t_grid(doc: Option<&TDoc>) -> Result<TGrid, String> {
    let grid = match doc {
        None => TGrid::parse_range(DEFAULT_T_GRID).map_err(|e| e.to_string())?,
        Some(TDoc::Value(t)) => TGrid::List(vec![*t]),
        Some(TDoc::List(v)) => TGrid::List(v.clone()),
        Some(TDoc::Text(s)) if s.contains(':') => TGrid::parse_range(s).map_err(|e| e.to_string())?,
        Some(TDoc::Text(s)) => TGrid::List(
            s.split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad t value '{p}'")))
                .collect::<Result<_, _>>()?,
        ),
    };
    grid.values().map_err(|e| e.to_string())?;
    Ok(grid)
}

impl RunConfig {
    pub fn resolve(cfg: FileConfig) -> Result<Self, String> {
        let command = cfg.command.ok_or("no command given (curvature, rank, scan or transport)")?;
        let doc_dim = match &cfg.metric {
            Some(MetricDoc::Spec(s)) => Some(s.dim),
            _ => None,
        };
        let dim = cfg
            .dim
            .or(doc_dim)
            .or(cfg.point.x.as_ref().map(Vec::len))
            .or(cfg.point.y.as_ref().map(Vec::len))
            .unwrap_or(DEFAULT_DIM);
        if dim < 2 {
            return Err(format!("dim must be at least 2, got {dim}"));
        }
        let x = cfg.point.x.clone().unwrap_or_else(|| vec![0.0; dim]);
        let y = cfg.point.y.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; dim];
            e[0] = 1.0;
            e
        });
        if x.len() != dim || y.len() != dim {
            return Err(format!("x and y must have {dim} components"));
        }
        let bump = BumpParams {
            r1: cfg.perturbation.r1.unwrap_or(DEFAULT_R1),
            r2: cfg.perturbation.r2.unwrap_or(DEFAULT_R2),
        };
        bump.validate().map_err(|e| e.to_string())?;
        let holonomy = HolonomyConfig {
            k: cfg.orders.k.unwrap_or(DEFAULT_K),
            d: cfg.orders.d.unwrap_or(DEFAULT_D),
            b: cfg.orders.b.unwrap_or(DEFAULT_B),
            tol: cfg.tol.unwrap_or(DEFAULT_TOL),
            jet_order: cfg.orders.jet_order,
        };
        let metric = if command == Command::Scan {
            // the scanned family is built from the base; `metric` is unused
            MetricSpec::euclidean(dim)
        } else {
            resolve_metric(cfg.metric.as_ref(), DEFAULT_METRIC, dim, &cfg.perturbation, bump)?
        };
        let scan = ScanSettings {
            base: resolve_metric(cfg.perturbation.base.as_ref(), DEFAULT_BASE, dim, &cfg.perturbation, bump)?,
            t_grid: if command == Command::Scan { t_grid(cfg.perturbation.t.as_ref())? } else { TGrid::List(vec![]) },
            workers: cfg.scan.workers,
        };
        if scan.workers == Some(0) {
            return Err("workers must be positive".into());
        }
        let [li, lj] = cfg.transport.loop_dirs.unwrap_or(DEFAULT_LOOP);
        if li == 0 || lj == 0 || li > dim || lj > dim || li == lj {
            return Err(format!("loop directions must be two distinct indices in 1..={dim}, got {li},{lj}"));
        }
        let transport = TransportSettings {
            i: li - 1,
            j: lj - 1,
            eps: cfg.transport.eps.unwrap_or(DEFAULT_EPS),
            steps: cfg.transport.steps.unwrap_or(DEFAULT_STEPS_PER_UNIT),
        };
        let format = cfg.output.format.unwrap_or_else(|| match &cfg.output.path {
            Some(p) if p.extension().is_some_and(|e| e == "json") => Format::Json,
            _ => Format::Csv,
        });
        Ok(Self {
            command,
            metric,
            x,
            y,
            samples: cfg.point.samples.unwrap_or(0),
            seed: cfg.seed.unwrap_or(DEFAULT_SEED),
            holonomy,
            bump,
            scan,
            transport,
            out: cfg.output.path,
            format,
        })
    }
}

/// The single defaults table printed by `--show-defaults`.
pub fn defaults_table() -> String {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let rows: Vec<(&str, String)> = vec![
        ("metric", DEFAULT_METRIC.into()),
        ("dim", format!("{DEFAULT_DIM} (or the length of x)")),
        ("x", "origin".into()),
        ("y", "e_1".into()),
        ("k", DEFAULT_K.to_string()),
        ("d", DEFAULT_D.to_string()),
        ("b", DEFAULT_B.to_string()),
        ("jet_order", "k + d + b + 5".into()),
        ("tol", format!("{DEFAULT_TOL:e}")),
        ("samples", "0 (use y)".into()),
        ("seed", DEFAULT_SEED.to_string()),
        ("base", DEFAULT_BASE.into()),
        ("t", format!("{DEFAULT_T_GRID} (scan), 1 (funk_perturbation)")),
        ("r1", DEFAULT_R1.to_string()),
        ("r2", DEFAULT_R2.to_string()),
        ("workers", format!("{workers} (available processors)")),
        ("loop", format!("{},{}", DEFAULT_LOOP[0], DEFAULT_LOOP[1])),
        ("eps", format!("{DEFAULT_EPS:e}")),
        ("steps", format!("{DEFAULT_STEPS_PER_UNIT} per unit chart length")),
        ("format", "csv (json when --out ends in .json)".into()),
    ];
    rows.iter().map(|(k, v)| format!("{k:<10} {v}\n")).collect()
}
