use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shockprop"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn strict_csv(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let (first, rest) = text.split_once('\n').unwrap();
    assert!(first.starts_with("# shockprop "), "{first}");
    assert!(!rest.contains("\n#"));
    csv::Reader::from_reader(rest.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn run_writes_three_files_with_fixture_values() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--economy",
        data("chain3.csv").to_str().unwrap(),
        "--shocks",
        data("chain3_shocks.csv").to_str().unwrap(),
        "--alpha-demand",
        "0",
        "--methods",
        "all",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for name in ["allocations.csv", "sweep.csv", "summary.csv"] {
        assert!(out.path().join(name).exists(), "{name}");
    }
    let rows = strict_csv(&out.path().join("allocations.csv"));
    let value = |method: &str, industry: &str, col: usize| -> f64 {
        rows.iter()
            .find(|r| r[0] == industry && r[1] == method && r[2] == "0")
            .unwrap()[col]
            .parse()
            .unwrap()
    };
    let expect = [
        ("proportional", [5.0, 3.0, 4.0], [2.0, 3.0, 4.0]),
        ("mixed", [5.0, 5.0, 20.0 / 3.0], [0.0, 5.0, 20.0 / 3.0]),
        ("largest_first", [5.0, 6.0, 4.0], [0.0, 6.0, 4.0]),
        ("lp_output", [5.0, 4.5, 8.0], [0.0, 4.5, 8.0]),
    ];
    for (method, x, f) in expect {
        for (i, label) in ["S1", "S2", "S3"].iter().enumerate() {
            assert!(
                (value(method, label, 3) - x[i]).abs() < 1e-6,
                "{method} x {label}"
            );
            assert!(
                (value(method, label, 4) - f[i]).abs() < 1e-6,
                "{method} f {label}"
            );
        }
    }
    assert_eq!(value("meem", "S1", 4), -1.0);
    let meem = rows
        .iter()
        .find(|r| r[0] == "S1" && r[1] == "meem")
        .unwrap();
    assert_eq!(meem[9], "true");
}

#[test]
fn reruns_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, workers) in dirs.iter().zip(["1", "8"]) {
        let o = run(&[
            "sweep-scale",
            "--economy",
            data("chain3.csv").to_str().unwrap(),
            "--shocks",
            data("chain3_shocks.csv").to_str().unwrap(),
            "--alpha",
            "0:1:0.25",
            "--repetitions",
            "2",
            "--samples",
            "5",
            "--seed",
            "17",
            "--workers",
            workers,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    for name in ["sweep.csv", "summary.csv"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn sweep_scale_grid_arithmetic() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "sweep-scale",
        "--economy",
        data("chain3.csv").to_str().unwrap(),
        "--shocks",
        data("chain3_shocks.csv").to_str().unwrap(),
        "--alpha-supply",
        "0:1:0.1",
        "--alpha-demand",
        "0",
        "--samples",
        "3",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = strict_csv(&out.path().join("sweep.csv"));
    // eight methods, random counted once per sample
    assert_eq!(rows.len(), 11 * (7 + 3));
    let mut grid: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    grid.dedup();
    assert_eq!(grid.len(), 11);
    let summary = strict_csv(&out.path().join("summary.csv"));
    assert_eq!(summary.len(), 11 * 8);
}

#[test]
fn sweep_density_runs_and_rejects_dense_targets() {
    let out = tempfile::tempdir().unwrap();
    let (economy, shocks) = (data("pair2.csv"), data("pair2_shocks.csv"));
    let base = [
        "sweep-density",
        "--economy",
        economy.to_str().unwrap(),
        "--shocks",
        shocks.to_str().unwrap(),
        "--removal",
        "smallest_first",
        "--out",
        out.path().to_str().unwrap(),
        "--densities",
    ];
    let o = run(&[&base[..], &["0,0.25,0.5"]].concat());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rows = strict_csv(&out.path().join("sweep.csv"));
    assert!(rows.iter().all(|r| !r[3].is_empty() && !r[17].is_empty()));
    let o = run(&[&base[..], &["0.9"]].concat());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn empty_method_list_gives_header_only_summary() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--economy",
        data("pair2.csv").to_str().unwrap(),
        "--methods",
        "",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(strict_csv(&out.path().join("summary.csv")).is_empty());
}

#[test]
fn validate_reports_and_fails_on_malformed_input() {
    let o = run(&["validate", "--economy", data("pair2.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("density             0.5"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "industry,A,B,final_demand\nA,0,2,8\nB,3,oops,5\n").unwrap();
    let o = run(&["validate", "--economy", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3, column 3"), "{err}");

    fs::write(&bad, "industry,A,final_demand\nA,1,0\n").unwrap();
    let o = run(&["validate", "--economy", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // usage errors
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["run"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    // validation failures
    let shocks = dir.path().join("shocks.csv");
    fs::write(
        &shocks,
        "industry,rli,essential_share,demand_shock\nS1,1.2,0,0\nS2,0,0,0\n",
    )
    .unwrap();
    let o = run(&[
        "shock",
        "--economy",
        data("pair2.csv").to_str().unwrap(),
        "--shocks",
        shocks.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["run", "--economy", "/nonexistent/economy.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&[
        "run",
        "--economy",
        data("pair2.csv").to_str().unwrap(),
        "--methods",
        "fifo",
    ]);
    assert_eq!(o.status.code(), Some(1));
    // computation failure: a closed loop with no final demand has no inverse
    let econ = dir.path().join("loop.csv");
    fs::write(&econ, "industry,A,B,final_demand\nA,1,0,0\nB,0,0,1\n").unwrap();
    let o = run(&[
        "run",
        "--economy",
        econ.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shock_command_writes_ceilings() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "shock",
        "--economy",
        data("pair2.csv").to_str().unwrap(),
        "--shocks",
        data("pair2_shocks.csv").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = strict_csv(&out.path().join("constraints.csv"));
    assert_eq!(rows[0][5], "10");
    assert_eq!(rows[1][1], "0.5");
    assert_eq!(rows[1][5], "4");
}

#[test]
fn dump_and_trajectory_files() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--economy",
        data("pair2.csv").to_str().unwrap(),
        "--shocks",
        data("pair2_shocks.csv").to_str().unwrap(),
        "--methods",
        "lp_output,proportional",
        "--dump-lp",
        "--trajectory",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let lp = fs::read_to_string(out.path().join("lp_output.txt")).unwrap();
    assert!(lp.starts_with("# maximize"));
    let traj = fs::read_to_string(out.path().join("trajectory_proportional.csv")).unwrap();
    assert!(traj.starts_with("t,industry,d,x,f\n"));
    assert_eq!(traj.lines().count(), 1 + 2 * 2);
    assert!(!out.path().join("trajectory_mixed.csv").exists());
}
