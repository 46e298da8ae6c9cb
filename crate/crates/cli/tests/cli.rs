use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cases() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

fn tepca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tepca"))
        .args(args)
        .arg("--cases-dir")
        .arg(cases())
        .output()
        .expect("run tepca")
}

/// Runs a subcommand that takes no case arguments.
fn tepca_bare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tepca"))
        .args(args)
        .output()
        .expect("run tepca")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn plan(case: &str, dir: &Path) -> PathBuf {
    let out = dir.join("plan");
    ok(&tepca(&[
        "plan",
        "--case",
        case,
        "--k",
        "2",
        "--out",
        s(&out),
    ]));
    out.join("plan.json")
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn missing_case_exits_with_input_error() {
    let out = tepca(&["validate", "--case", "no-such-case"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("case not found"), "{err}");
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["exit_code"], 2);
}

#[test]
fn bad_gap_and_k_are_rejected_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("p");
    let out = tepca(&[
        "plan",
        "--case",
        "toy2",
        "--gap",
        "1.5",
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = tepca(&["plan", "--case", "toy2", "--k", "0", "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn validate_reports_dimensions() {
    let out = tepca(&["validate", "--case", "mini5"]);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("grid dimensions 5 combinations 243"),
        "{text}"
    );
}

#[test]
fn cluster_writes_one_row_per_hour() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    ok(&tepca(&[
        "cluster",
        "--case",
        "mini5",
        "--k",
        "2",
        "--out",
        s(&out),
    ]));
    assert!(out.join("clusters.json").is_file());
    let text = fs::read_to_string(out.join("blocks.csv")).unwrap();
    assert!(text.lines().count() > 1);
}

#[test]
fn toy_plan_selects_a_root_line_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let a = plan("toy2", &dir.path().join("a"));
    let b = plan("toy2", &dir.path().join("b"));
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let sel = v["selections"].as_array().unwrap();
    assert_eq!(sel.len(), 1);
    assert_eq!(sel[0]["line"], "l1");
    assert_eq!(sel[0]["node"], "0");
    let log = fs::read_to_string(a.with_file_name("solve.log")).unwrap();
    assert!(log.contains("mip objective"));
}

#[test]
fn zero_demand_plan_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan("zero-demand", dir.path());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
    assert!(v["selections"].as_array().unwrap().is_empty());
    assert_eq!(v["objective"].as_f64().unwrap(), 0.0);
}

#[test]
fn prices_pass_the_optimality_checks() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan("toy2", dir.path());
    let out = dir.path().join("prices");
    ok(&tepca(&[
        "prices",
        "--case",
        "toy2",
        "--plan",
        s(&p),
        "--out",
        s(&out),
    ]));
    let kkt: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("kkt.json")).unwrap()).unwrap();
    assert!(kkt["max_production_violation"].as_f64().unwrap() < 1e-6);
    assert!(kkt["max_zero_profit_violation"].as_f64().unwrap() < 1e-6);
    assert!(kkt["duality_gap"].as_f64().unwrap() < 1e-6);
    for f in [
        "prices.csv",
        "rps_prices.csv",
        "flows.csv",
        "capacity_rents.csv",
        "surplus.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn benefits_feed_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan("toy2", dir.path());
    let b = dir.path().join("benefits");
    ok(&tepca(&[
        "benefits",
        "--case",
        "toy2",
        "--plan",
        s(&p),
        "--scope",
        "all",
        "--out",
        s(&b),
    ]));
    let a = dir.path().join("alloc");
    ok(&tepca_bare(&[
        "allocate",
        "--benefits",
        s(&b.join("benefits.json")),
        "--scope",
        "all",
        "--out",
        s(&a),
    ]));
    let table = fs::read_to_string(a.join("allocation_table.tsv")).unwrap();
    let portfolio = table.lines().find(|l| l.starts_with("portfolio")).unwrap();
    let cells: Vec<&str> = portfolio.split('\t').collect();
    assert_eq!(cells[1], "100.00");
    assert_eq!(cells[2], "0.00");
}

#[test]
fn counterfactual_option_three_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan("toy2", dir.path());
    let out = dir.path().join("cf");
    ok(&tepca(&[
        "counterfactual",
        "--case",
        "toy2",
        "--plan",
        s(&p),
        "--option",
        "3",
        "--gap",
        "0.0001",
        "--out",
        s(&out),
    ]));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("counterfactuals.json")).unwrap())
            .unwrap();
    let rec = &v[0];
    assert_eq!(rec["option"], 3);
    assert!(
        rec["objective_delta"].as_f64().unwrap()
            >= -1e-6 * rec["reference_objective"].as_f64().unwrap()
    );
}

#[test]
fn eight_bus_fixture_allocations() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("fx");
    ok(&tepca_bare(&["fixtures", "--out", s(&f)]));
    let a = dir.path().join("alloc");
    ok(&tepca_bare(&[
        "allocate",
        "--benefits",
        s(&f.join("eight_bus.json")),
        "--scope",
        "all",
        "--out",
        s(&a),
    ]));
    let table = fs::read_to_string(a.join("allocation_table.tsv")).unwrap();
    let row = |scope: &str| -> Vec<String> {
        table
            .lines()
            .find(|l| l.split('\t').next() == Some(scope))
            .unwrap()
            .split('\t')
            .map(str::to_string)
            .collect()
    };
    assert_eq!(
        row("portfolio")[1..9],
        ["57.17", "20.98", "0.00", "0.00", "0.00", "0.14", "0.00", "21.71"]
    );
    assert_eq!(
        row("l2")[1..9],
        ["92.27", "0.00", "0.00", "0.00", "0.00", "0.00", "0.00", "7.73"]
    );
    assert!(a.join("scope_comparison.tsv").is_file());

    let single = dir.path().join("l2");
    ok(&tepca_bare(&[
        "allocate",
        "--benefits",
        s(&f.join("eight_bus.json")),
        "--scope",
        "project:l2",
        "--out",
        s(&single),
    ]));
    assert!(single.join("allocation_l2.tsv").is_file());
}

#[test]
fn no_beneficiaries_exits_with_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("fx");
    ok(&tepca_bare(&["fixtures", "--out", s(&f)]));
    let a = dir.path().join("alloc");
    let out = tepca_bare(&[
        "allocate",
        "--benefits",
        s(&f.join("no_beneficiaries.json")),
        "--out",
        s(&a),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no beneficiaries"));
    assert!(!a.exists());
}

#[test]
fn sweep_over_the_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan("mini5", dir.path());
    let run = |name: &str, extra: &[&str]| -> PathBuf {
        let out = dir.path().join(name);
        let mut args = vec![
            "sweep",
            "--case",
            "mini5",
            "--plan",
            s(&p),
            "--out",
            s(&out),
        ];
        args.extend_from_slice(extra);
        ok(&tepca(&args));
        out
    };

    let full = run("full", &[]);
    let table = rows(&full.join("sweep.csv"));
    assert_eq!(table.len(), 243);
    let gross: Vec<f64> = table.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(gross.windows(2).all(|w| w[0] >= w[1]));
    assert!(gross[0] > gross[242]);
    let divergence = fs::read_to_string(full.join("divergence.csv")).unwrap();
    assert!(divergence.starts_with("participant,ex_ante"));
    assert!(full.join("histograms.csv").is_file());

    let again = run("again", &[]);
    for f in [
        "sweep.csv",
        "sweep.json",
        "divergence.csv",
        "histograms.csv",
    ] {
        assert_eq!(
            fs::read(full.join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f} differs between runs"
        );
    }

    let one = run("one", &["--dims", "1"]);
    assert_eq!(rows(&one.join("sweep.csv")).len(), 3);

    let same = run("same", &["--against", "plan", "--dims", "2"]);
    for r in rows(&same.join("sweep.csv")) {
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn sweep_rejects_unknown_additions_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan("mini5", dir.path());
    let out = dir.path().join("s");
    let res = tepca(&[
        "sweep",
        "--case",
        "mini5",
        "--plan",
        s(&p),
        "--add",
        "l9:q100",
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
    let res = tepca(&[
        "sweep",
        "--case",
        "mini5",
        "--plan",
        s(&p),
        "--dims",
        "6",
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn report_collects_tables() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("fx");
    ok(&tepca_bare(&["fixtures", "--out", s(&f)]));
    ok(&tepca_bare(&["report", "--dir", s(&f)]));
    let md = fs::read_to_string(f.join("report.md")).unwrap();
    assert!(md.contains("## eight_bus_ratios.tsv"));
}
