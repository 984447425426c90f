use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tb_cli::commands::{paired_table, SeedOutcome};
use tb_cli::output::{parse_summary_csv, svg_for_curve};

fn tb(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tb"))
        .args(args)
        .current_dir(cwd)
        .env_remove("TB_OUT")
        .output()
        .expect("binary runs")
}

fn tb_env(args: &[&str], cwd: &Path, out_env: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tb"))
        .args(args)
        .current_dir(cwd)
        .env("TB_OUT", out_env)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

const BRANIN: &str = "[experiment]\nseeds = [1, 2, 3, 4, 5]\n[function]\nname = \"branin\"\n[policy]\nkind = \"tts\"\n[schedule]\nhorizon = 20\n";

#[test]
fn run_writes_traces_summary_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.toml", BRANIN);
    ok(&tb(&["run", &cfg, "--out", "a"], tmp.path()));
    let files = listing(&tmp.path().join("a"));
    let traces = files
        .iter()
        .filter(|f| f.starts_with("trace_") && f.ends_with(".csv"))
        .count();
    assert_eq!(traces, 5);
    for f in ["summary.csv", "summary.json", "regret.svg", "movement.svg"] {
        assert!(files.contains(&f.to_string()), "{files:?}");
    }
    assert_eq!(files.len(), 9, "no staging leftovers: {files:?}");

    let dir = tmp.path().join("a");
    let trace = fs::read_to_string(dir.join("trace_3.csv")).unwrap();
    assert!(trace.starts_with("t,batch,x_1,x_2,y,regret,move_cost\n"));
    assert_eq!(trace.lines().count(), 21);

    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    let points = parse_summary_csv(&summary).unwrap();
    assert_eq!(points.len(), 40);
    for p in &points {
        assert!(p.band.min <= p.band.mean + 1e-12 && p.band.mean <= p.band.max + 1e-12);
    }
    for curve in ["regret", "movement"] {
        let svg = fs::read_to_string(dir.join(format!("{curve}.svg"))).unwrap();
        assert_eq!(
            svg,
            svg_for_curve(curve, &points),
            "{curve}.svg is a function of summary.csv"
        );
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["replications"], 5);
}

#[test]
fn reruns_are_byte_identical_at_any_parallelism() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.toml", BRANIN);
    ok(&tb(&["run", &cfg, "--out", "one"], tmp.path()));
    ok(&tb(
        &["run", &cfg, "--out", "two", "--parallel", "3"],
        tmp.path(),
    ));
    let a = tmp.path().join("one");
    let b = tmp.path().join("two");
    assert_eq!(listing(&a), listing(&b));
    for f in listing(&a) {
        assert_eq!(
            fs::read(a.join(&f)).unwrap(),
            fs::read(b.join(&f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn seeds_flag_replaces_config_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.toml", BRANIN);
    ok(&tb(
        &["run", &cfg, "--out", "s", "--seeds", "7,9"],
        tmp.path(),
    ));
    let files = listing(&tmp.path().join("s"));
    assert!(
        files.contains(&"trace_7.csv".to_string()) && files.contains(&"trace_9.csv".to_string())
    );
    assert_eq!(files.iter().filter(|f| f.starts_with("trace_")).count(), 2);
}

#[test]
fn output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{BRANIN}[output]\ndir = \"from_config\"\n");
    let cfg = write_config(tmp.path(), "b.toml", &text);
    let env_dir = tmp.path().join("from_env");
    let env_dir = env_dir.to_str().unwrap();

    ok(&tb_env(
        &["run", &cfg, "--seeds", "1", "--out", "from_flag"],
        tmp.path(),
        env_dir,
    ));
    assert!(tmp.path().join("from_flag/trace_1.csv").exists());
    assert!(!tmp.path().join("from_env").exists());

    ok(&tb_env(&["run", &cfg, "--seeds", "1"], tmp.path(), env_dir));
    assert!(tmp.path().join("from_env/trace_1.csv").exists());
    assert!(!tmp.path().join("from_config").exists());

    ok(&tb(&["run", &cfg, "--seeds", "1"], tmp.path()));
    assert!(tmp.path().join("from_config/trace_1.csv").exists());
}

#[test]
fn scaling_writes_csv_and_fit() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&tb(
        &[
            "scaling",
            "--dim",
            "2",
            "--n",
            "16,64,256",
            "--seeds",
            "3",
            "--out",
            "sc",
        ],
        tmp.path(),
    ));
    let csv = fs::read_to_string(tmp.path().join("sc/scaling.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,seed,route_length"));
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    assert!(rows
        .iter()
        .all(|r| r.len() == 3 && r[2].parse::<f64>().unwrap() > 0.0));
    let fit = fs::read_to_string(tmp.path().join("sc/scaling_fit.txt")).unwrap();
    let slope: f64 = fit
        .lines()
        .find_map(|l| l.strip_prefix("slope "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(slope.is_finite() && slope > 0.0, "{fit}");

    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "[experiment]\nkind = \"scaling\"\nreplications = 3\n[scaling]\nn = [16, 64, 256]\n",
    );
    ok(&tb(&["run", &cfg, "--out", "sc2"], tmp.path()));
    assert_eq!(
        fs::read_to_string(tmp.path().join("sc2/scaling.csv")).unwrap(),
        csv
    );
}

#[test]
fn mab_and_lipschitz_configs_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mab = write_config(
        tmp.path(),
        "m.toml",
        "[experiment]\nkind = \"mab\"\nseeds = [1, 2]\n[schedule]\nhorizon = 200\n[arms]\nmeans = [1.0, 0.5, 0.2]\n",
    );
    ok(&tb(&["run", &mab, "--out", "m"], tmp.path()));
    assert_eq!(listing(&tmp.path().join("m")).len(), 6);
    let lip = write_config(
        tmp.path(),
        "l.toml",
        "[experiment]\nkind = \"lipschitz\"\n[schedule]\nhorizon = 300\n[lipschitz]\nobjective = \"quadratic\"\ndim = 2\n",
    );
    ok(&tb(&["run", &lip, "--out", "l"], tmp.path()));
    assert!(tmp.path().join("l/trace_0.csv").exists());
}

fn paired_column(path: &Path, col: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == col).unwrap();
    lines
        .map(|l| l.split(',').nth(k).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn routed_ts_moves_less_than_naive_ts_on_a_flat_function() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[experiment]\nseeds = [0, 1, 2]\n[function]\nname = \"constant2d\"\n[policy]\nkind = \"tts\"\n[schedule]\nhorizon = 40\n",
    );
    ok(&tb(
        &["compare", &cfg, "--policies", "tts,ts", "--out", "cmp"],
        tmp.path(),
    ));
    let diffs = paired_column(
        &tmp.path().join("cmp/paired_tts_vs_ts.csv"),
        "movement_diff",
    );
    assert_eq!(diffs.len(), 3);
    assert!(diffs.iter().all(|d| *d < 0.0), "{diffs:?}");
}

#[test]
fn three_policies_give_three_summaries_and_three_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.toml", BRANIN);
    ok(&tb(
        &[
            "compare",
            &cfg,
            "--policies",
            "tts,tucb,bpe",
            "--seeds",
            "1,2",
            "--out",
            "cmp",
        ],
        tmp.path(),
    ));
    let dir = tmp.path().join("cmp");
    let files = listing(&dir);
    let tables: Vec<&String> = files.iter().filter(|f| f.starts_with("paired_")).collect();
    assert_eq!(tables.len(), 3, "{files:?}");
    for p in ["tts", "tucb", "bpe"] {
        assert!(dir.join(p).join("summary.csv").exists());
    }
    let comparison = fs::read_to_string(dir.join("comparison.csv")).unwrap();
    assert_eq!(comparison.lines().count(), 1 + 3 * 2);
}

#[test]
fn self_comparison_has_zero_differences() {
    let runs: Vec<SeedOutcome> = (0..4)
        .map(|s| SeedOutcome {
            seed: s,
            regret: 0.3 * s as f64 + 0.1,
            movement: 1.0 / (s + 1) as f64,
        })
        .collect();
    let table = paired_table(&runs, &runs).unwrap();
    for line in table.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols[3], 0.0);
        assert_eq!(cols[6], 0.0);
    }
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.toml", BRANIN);
    let out = tb(&["compare", &cfg, "--policies", "tts,tts"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(tb(&["--help"], tmp.path()).status.code(), Some(0));
    assert_eq!(tb(&["--version"], tmp.path()).status.code(), Some(0));
    assert_eq!(tb(&["frobnicate"], tmp.path()).status.code(), Some(1));
    assert_eq!(
        tb(&["run", "missing.toml"], tmp.path()).status.code(),
        Some(1)
    );

    let bad = write_config(tmp.path(), "bad.toml", &BRANIN.replace("branin", "bogus"));
    let out = tb(&["run", &bad], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("function.name"));

    let unknown = write_config(tmp.path(), "u.toml", &format!("{BRANIN}speed = 3\n"));
    assert_eq!(tb(&["run", &unknown], tmp.path()).status.code(), Some(1));

    let good = write_config(tmp.path(), "g.toml", BRANIN);
    fs::write(tmp.path().join("blocker"), "not a directory").unwrap();
    let out = tb(
        &["run", &good, "--seeds", "1", "--out", "blocker/sub"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("tb-out").exists());
}

#[test]
fn failed_commit_leaves_no_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut art = tb_cli::commands::Artifacts::default();
    art.add("ok.csv", "a\n".into());
    art.add("nested", "file".into());
    art.add("nested/inner.csv", "b\n".into());
    assert!(art.commit(tmp.path()).is_err());
    assert!(listing(tmp.path()).is_empty(), "{:?}", listing(tmp.path()));
}
