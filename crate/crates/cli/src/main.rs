use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use finhol::berwald::BerwaldData;
use finhol::holonomy::{is_k_jet_generating, normalize, RankReport};
use finhol::metric::{norm_value, BasePoint};
use finhol::scan::{scan_perturbation, ScanConfig};
use finhol::transport::{loop_holonomy_run, samples_to_csv, DEFAULT_DRIFT_LIMIT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

mod config;

use config::{Command, FileConfig, Format, MetricDoc, OrdersSection, OutputSection, PerturbationSection, PointSection, RunConfig, ScanSection, TDoc, TransportSection};

const EXIT_INPUT: u8 = 1;
const EXIT_AMBIGUOUS: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Holonomy experiments for concrete Finsler metrics.
#[derive(Debug, Parser)]
#[command(name = "finhol", version)]
struct Cli {
    /// curvature | rank | scan | transport
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the defaults table and exit.
    #[arg(long)]
    show_defaults: bool,
    /// euclidean | funk | sphere | flat | funk_perturbation
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Base point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    /// Tangent vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y: Option<Vec<f64>>,
    /// Rank at this many random unit vectors instead of --y.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Jet order of the verdict.
    #[arg(long)]
    k: Option<usize>,
    /// Covariant-derivative depth.
    #[arg(long)]
    d: Option<usize>,
    /// Bracket depth.
    #[arg(long)]
    b: Option<usize>,
    /// Energy-jet order override.
    #[arg(long)]
    jet_order: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Base metric of the Funk perturbation.
    #[arg(long)]
    base: Option<String>,
    /// Perturbation parameter; for scan a grid `min:max:step` or a list.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    r1: Option<f64>,
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Loop directions `i,j` (1-based).
    #[arg(long = "loop", value_delimiter = ',', num_args = 1)]
    loop_dirs: Option<Vec<usize>>,
    #[arg(long)]
    eps: Option<f64>,
    /// Integration steps per unit chart length.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Cli {
    fn as_config(&self) -> Result<FileConfig, String> {
        let loop_dirs = match &self.loop_dirs {
            None => None,
            Some(v) if v.len() == 2 => Some([v[0], v[1]]),
            Some(v) => return Err(format!("--loop takes two indices, got {}", v.len())),
        };
        Ok(FileConfig {
            command: self.command,
            metric: self.metric.clone().map(MetricDoc::Name),
            dim: self.dim,
            tol: self.tol,
            seed: self.seed,
            point: PointSection {
                x: self.x.clone(),
                y: self.y.clone(),
                samples: self.samples,
            },
            orders: OrdersSection {
                k: self.k,
                d: self.d,
                b: self.b,
                jet_order: self.jet_order,
            },
            perturbation: PerturbationSection {
                base: self.base.clone().map(MetricDoc::Name),
                t: self.t.clone().map(TDoc::Text),
                r1: self.r1,
                r2: self.r2,
            },
            scan: ScanSection { workers: self.workers },
            transport: TransportSection {
                loop_dirs,
                eps: self.eps,
                steps: self.steps,
            },
            output: OutputSection {
                path: self.out.clone(),
                format: self.format,
            },
        })
    }
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Core(finhol::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(s) => f.write_str(s),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<finhol::Error> for Failure {
    fn from(e: finhol::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Input(s)
    }
}

/// What a command produced: the report text, the summary line, and
/// whether the verdict is ambiguous.
struct Outcome {
    report: String,
    summary: String,
    ambiguous: bool,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|a| format!("{a}")).collect::<Vec<_>>().join(",")
}

#[derive(Serialize)]
struct CurvatureOutput {
    x: Vec<f64>,
    y: Vec<f64>,
    /// `R^i_jk` as `r[i][j][k]`.
    r: Vec<Vec<Vec<f64>>>,
    fields: Vec<FieldOutput>,
}

#[derive(Serialize)]
struct FieldOutput {
    label: String,
    values: Vec<f64>,
}

fn run_curvature(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let point = BasePoint::new(cfg.x.clone(), cfg.y.clone())?;
    let order = cfg.holonomy.jet_order.unwrap_or(finhol::berwald::CURVATURE_ORDER_COST);
    let data = BerwaldData::compute(&cfg.metric, &point, order)?;
    let n = data.dim();
    let r: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| data.curvature.r[i][j][k].value()).collect()).collect())
        .collect();
    let mut fields = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            let f = data.curvature_field(j, k);
            fields.push(FieldOutput {
                label: f.label.clone(),
                values: f.xi.iter().map(|c| c.value()).collect(),
            });
        }
    }
    let max = r.iter().flatten().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let report = match cfg.format {
        Format::Json => to_json(&CurvatureOutput { x: cfg.x.clone(), y: cfg.y.clone(), r, fields }),
        Format::Csv => {
            let mut s = String::from("i,j,k,R\n");
            for (i, ri) in r.iter().enumerate() {
                for (j, rij) in ri.iter().enumerate() {
                    for (k, v) in rij.iter().enumerate() {
                        let _ = writeln!(s, "{},{},{},{v:.16e}", i + 1, j + 1, k + 1);
                    }
                }
            }
            s
        }
    };
    Ok(Outcome {
        report,
        summary: format!("curvature at x=({}), y=({}): max |R| = {max:.3e}", fmt_list(&cfg.x), fmt_list(&cfg.y)),
        ambiguous: false,
    })
}

#[derive(Serialize)]
struct SampleReport {
    y0: Vec<f64>,
    #[serde(flatten)]
    report: RankReport,
}

fn sample_directions(cfg: &RunConfig) -> Result<Vec<Vec<f64>>, Failure> {
    if cfg.samples == 0 {
        return Ok(vec![cfg.y.clone()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.x.len();
    (0..cfg.samples)
        .map(|_| {
            // uniform on the Euclidean sphere, then rescaled onto the indicatrix
            let v: Vec<f64> = loop {
                let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r2: f64 = v.iter().map(|a| a * a).sum();
                if r2 > 1e-6 && r2 <= 1.0 {
                    break v;
                }
            };
            Ok(normalize(&cfg.metric, &cfg.x, &v)?)
        })
        .collect()
}

fn run_rank(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let mut reports = Vec::new();
    for y0 in sample_directions(cfg)? {
        let report = is_k_jet_generating(&cfg.metric, &cfg.x, &y0, &cfg.holonomy)?;
        reports.push(SampleReport { y0, report });
    }
    let k = cfg.holonomy.k;
    let ambiguous = reports.iter().any(|r| r.report.ambiguous);
    let summary = if reports.len() == 1 {
        reports[0].report.summary(k)
    } else {
        let generating = reports.iter().filter(|r| r.report.generating).count();
        let min_rank = reports.iter().map(|r| r.report.rank).min().unwrap_or(0);
        let gap = reports.iter().map(|r| r.report.gap_ratio).fold(f64::INFINITY, f64::min);
        format!(
            "{k}-jet generating: {}, {generating}/{} samples, min rank {min_rank}/{}, min gap {gap:.1e}{}",
            if generating == reports.len() { "YES" } else { "NO" },
            reports.len(),
            reports[0].report.target_dim,
            if ambiguous { " (ambiguous)" } else { "" }
        )
    };
    let report = match cfg.format {
        Format::Json if reports.len() == 1 => to_json(&reports[0].report),
        Format::Json => to_json(&reports),
        Format::Csv => {
            let n = cfg.x.len();
            let mut s: String = (1..=n).map(|i| format!("y{i},")).collect();
            s.push_str("matrix_rows,matrix_cols,rank,target_dim,generating,gap_ratio,ambiguous,min_kept_singular\n");
            for r in &reports {
                let p = &r.report;
                for v in &r.y0 {
                    let _ = write!(s, "{v:.16e},");
                }
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    p.matrix_rows,
                    p.matrix_cols,
                    p.rank,
                    p.target_dim,
                    p.generating,
                    finhol::scan::fmt_real(p.gap_ratio),
                    p.ambiguous,
                    finhol::scan::fmt_real(p.min_kept_singular())
                );
            }
            s
        }
    };
    Ok(Outcome { report, summary, ambiguous })
}

fn run_scan(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let scan = ScanConfig {
        base: cfg.scan.base.clone(),
        bump: cfg.bump,
        x: cfg.x.clone(),
        y0: cfg.y.clone(),
        holonomy: cfg.holonomy,
        t_grid: cfg.scan.t_grid.clone(),
    };
    let report = scan_perturbation(&scan, cfg.scan.workers)?;
    let generating = report.rows.iter().filter(|r| r.generating).count();
    let summary = format!(
        "scan: {} rows, {generating} generating, {} candidate exceptional interval(s){}",
        report.rows.len(),
        report.candidate_intervals.len(),
        if report.exceptions_covered() { "" } else { ", UNCOVERED non-generating rows" }
    );
    let text = match cfg.format {
        Format::Json => to_json(&report),
        Format::Csv => report.to_csv(),
    };
    // ambiguous rows inside a reported interval are already flagged
    let ambiguous = report
        .rows
        .iter()
        .any(|r| r.ambiguous && !report.candidate_intervals.iter().any(|c| c.contains(r.t)));
    Ok(Outcome { report: text, summary, ambiguous })
}

#[derive(Serialize)]
struct TransportOutput {
    x: Vec<f64>,
    y0: Vec<f64>,
    #[serde(rename = "loop")]
    loop_dirs: [usize; 2],
    steps: usize,
    #[serde(flatten)]
    defect: finhol::transport::DefectReport,
}

fn run_transport(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let t = &cfg.transport;
    let f = norm_value(&cfg.metric, &cfg.x, &cfg.y)?;
    let y0: Vec<f64> = cfg.y.iter().map(|v| v / f).collect();
    let (defect, run) = loop_holonomy_run(&cfg.metric, &cfg.x, t.i, t.j, t.eps, &y0, t.steps)?;
    if run.norm_drift > DEFAULT_DRIFT_LIMIT {
        return Err(finhol::Error::Accuracy(format!(
            "norm drift {:.3e} exceeds {DEFAULT_DRIFT_LIMIT:.0e}; increase --steps",
            run.norm_drift
        ))
        .into());
    }
    let summary = format!(
        "loop ({},{}) eps {:.1e}: |defect/eps^2 - s*R| = {:.3e} (|R| = {:.3e}), drift {:.1e}",
        t.i + 1,
        t.j + 1,
        t.eps,
        defect.error,
        defect.curvature.iter().map(|a| a * a).sum::<f64>().sqrt(),
        run.norm_drift
    );
    let report = match cfg.format {
        Format::Csv => samples_to_csv(&run.samples),
        Format::Json => to_json(&TransportOutput {
            x: cfg.x.clone(),
            y0,
            loop_dirs: [t.i + 1, t.j + 1],
            steps: run.steps,
            defect,
        }),
    };
    Ok(Outcome { report, summary, ambiguous: false })
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    if cli.show_defaults {
        print!("{}", config::defaults_table());
        return Ok(0);
    }
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            FileConfig::parse(&text)?
        }
        None => FileConfig::default(),
    };
    let cfg = RunConfig::resolve(file.overlay(cli.as_config()?))?;
    cfg.metric.validate()?;
    let outcome = match cfg.command {
        Command::Curvature => run_curvature(&cfg)?,
        Command::Rank => run_rank(&cfg)?,
        Command::Scan => run_scan(&cfg)?,
        Command::Transport => run_transport(&cfg)?,
    };
    if let Some(path) = &cfg.out {
        std::fs::write(path, &outcome.report).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    println!("{}", outcome.summary);
    Ok(if outcome.ambiguous { EXIT_AMBIGUOUS } else { 0 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
