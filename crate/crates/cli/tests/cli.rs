use std::path::Path;
use std::process::{Command, Output};

fn finhol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finhol")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn funk_plane_rank_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rank.json");
    let o = finhol(&["rank", "--metric", "funk", "--dim", "2", "--x", "0,0", "--y", "1,0", "--k", "3", "--d", "3", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("3-jet generating: YES, rank 4/4"), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["generating"], true);
    assert_eq!(v["rank"], 4);
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        ["ambiguous", "gap_ratio", "generating", "matrix_cols", "matrix_rows", "rank", "singular_values", "target_dim"]
    );
}

#[test]
fn euclidean_rank_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rank.csv");
    let o = finhol(&["rank", "--metric", "euclidean", "--dim", "2", "--x", "0,0", "--y", "1,0", "--k", "3", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let field = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(field("rank"), "0");
    assert_eq!(field("generating"), "false");
}

#[test]
fn scan_example_has_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let o = finhol(&["scan", "--base", "euclidean", "--dim", "2", "--x", "0,0", "--y", "1,0", "--t", "0:1:0.05", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,rank,generating,min_kept_singular,gap_ratio,det_Pt");
    // (1 − 0) / 0.05 + 1 grid points
    assert_eq!(lines.count(), 21);
}

#[test]
fn scan_output_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (tag, workers) in [("a", "1"), ("b", "8"), ("c", "8")] {
        let out = dir.path().join(format!("{tag}.csv"));
        let o = finhol(&["scan", "--t", "0:1:0.05", "--workers", workers, "--out", path_str(&out)]);
        assert_eq!(code(&o), 0);
        files.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[1], files[2]);
}

#[test]
fn config_file_matches_flags_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"
command = "rank"
metric = "funk"
tol = 1e-9

[point]
x = [0.1, -0.2]
y = [0.3, 1.0]

[orders]
k = 2
d = 2
"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let from_file = finhol(&["--config", path_str(&cfg), "--out", path_str(&a)]);
    let from_flags = finhol(&["rank", "--metric", "funk", "--x", "0.1,-0.2", "--y", "0.3,1", "--k", "2", "--d", "2", "--out", path_str(&b)]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(stdout(&from_file), stdout(&from_flags));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let over = finhol(&["--config", path_str(&cfg), "--metric", "euclidean"]);
    assert_eq!(code(&over), 0);
    assert!(stdout(&over).contains("rank 0/"), "{}", stdout(&over));
}

#[test]
fn config_accepts_a_full_metric_document() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sphere.toml");
    std::fs::write(
        &cfg,
        r#"
command = "rank"

[metric]
dim = 2
kind = "riemannian"
catalog = "round_sphere"

[point]
x = [0.2, 0.1]

[orders]
k = 2
d = 2
"#,
    )
    .unwrap();
    let o = finhol(&["--config", path_str(&cfg)]);
    assert_eq!(code(&o), 0);
    let flags = finhol(&["rank", "--metric", "sphere", "--x", "0.2,0.1", "--k", "2", "--d", "2"]);
    assert_eq!(stdout(&o), stdout(&flags));
    assert!(stdout(&o).contains("NO, rank 1/"), "{}", stdout(&o));
}

#[test]
fn exit_codes() {
    // invalid input
    assert_eq!(code(&finhol(&["rank", "--metric", "bogus"])), 1);
    assert_eq!(code(&finhol(&["rank", "--metric", "funk", "--x", "1.2,0"])), 1);
    assert_eq!(code(&finhol(&["rank", "--y", "0,0"])), 1);
    assert_eq!(code(&finhol(&["rank", "--no-such-flag"])), 1);
    assert_eq!(code(&finhol(&[])), 1);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "command = \"rank\"\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&finhol(&["--config", path_str(&cfg)])), 1);
    // ambiguous verdict
    let o = finhol(&["rank", "--metric", "funk", "--x", "0.1,0.2", "--y", "0.3,1", "--tol", "0.3"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("ambiguous"));
    // numerical failure: jet budget
    assert_eq!(code(&finhol(&["rank", "--metric", "funk", "--jet-order", "6"])), 3);
}

#[test]
fn defaults_table_lists_every_default() {
    let o = finhol(&["--show-defaults"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    for key in ["k ", "d ", "b ", "tol ", "jet_order ", "r1 ", "r2 ", "workers ", "eps ", "steps "] {
        assert!(s.lines().any(|l| l.starts_with(key)), "missing {key}");
    }
    assert!(s.contains("k + d + b + 5"));
}

#[test]
fn sampled_rank_is_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = finhol(&["rank", "--metric", "funk", "--samples", "4", "--seed", seed, "--out", path_str(&out)]);
        assert_eq!(code(&o), 0);
        std::fs::read_to_string(out).unwrap()
    };
    let (a, b, c) = (run("3", "a.csv"), run("3", "b.csv"), run("4", "c.csv"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.lines().count(), 5);
    assert!(a.lines().skip(1).all(|l| l.contains(",4,4,true,")));
}

#[test]
fn curvature_and_transport_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let curv = dir.path().join("r.csv");
    let o = finhol(&["curvature", "--metric", "euclidean", "--x", "0.1,0.2", "--out", path_str(&curv)]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(&curv).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "i,j,k,R");
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(csv.lines().skip(1).all(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap() == 0.0));

    let traj = dir.path().join("loop.csv");
    let o = finhol(&["transport", "--metric", "funk", "--loop", "1,2", "--eps", "0.05", "--steps", "200", "--out", path_str(&traj)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&traj).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "s,x1,x2,y1,y2,F");
    // 4 sides of 10 steps, plus the start
    assert_eq!(csv.lines().count(), 1 + 41);

    let json = dir.path().join("loop.json");
    let o = finhol(&["transport", "--metric", "sphere", "--x", "0.1,0", "--out", path_str(&json)]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["sign"], 1.0);
    assert!(v["error"].as_f64().unwrap() < 0.1);
    assert_eq!(code(&finhol(&["transport", "--loop", "1,1"])), 1);
}
