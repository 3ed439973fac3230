use std::path::Path;
use std::process::{Command, Output};

use saddlecg::mmio::{read_history_csv, write_matrix_market};
use saddlecg::CsrMatrix;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .env_remove("ORSIRR_1_PATH")
        .output()
        .expect("bench binary runs")
}

fn write_identity(dir: &Path, n: usize) -> String {
    let path = dir.join("identity.mtx");
    let file = std::fs::File::create(&path).unwrap();
    write_matrix_market(&CsrMatrix::identity(n), file).unwrap();
    path.to_string_lossy().into_owned()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON summary on stdout")
}

#[test]
fn identity_matrix_converges_in_two_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = write_identity(dir.path(), 10);
    let csv = dir.path().join("run.csv");
    let out = bench(&["run", "--matrix", &matrix, "--out-csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out);
    assert_eq!(summary["status"], "converged");
    assert!(summary["iterations"].as_u64().unwrap() <= 2);
    assert!(summary["wall_ms"].is_null());

    let history = read_history_csv(std::io::BufReader::new(std::fs::File::open(&csv).unwrap())).unwrap();
    assert_eq!(history.len() as u64, summary["iterations"].as_u64().unwrap() + 1);
}

#[test]
fn every_solver_runs_from_the_command_line() {
    for solver in ["nspcg", "glsqr", "qmr", "lsqr"] {
        let out = bench(&["run", "--example", "1", "--n", "30", "--solver", solver, "--precond", "iqr:0.01"]);
        assert_eq!(out.status.code(), Some(0), "{solver}: {}", String::from_utf8_lossy(&out.stderr));
        let summary = json(&out);
        assert_eq!(summary["solver"], solver);
        assert_eq!(summary["droptol"], 0.01);
    }
}

#[test]
fn iteration_cap_gives_exit_code_two() {
    let out = bench(&["run", "--example", "1", "--n", "50", "--maxit", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["status"], "maxit");
}

#[test]
fn usage_errors_exit_with_one() {
    let cases: [&[&str]; 5] = [
        &["run", "--example", "1", "--precond", "ilu"],
        &["run", "--example", "7"],
        &["run", "--solver", "nspcg"],
        &["run", "--matrix", "/nonexistent/file.mtx"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = bench(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn example2_without_a_local_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["run", "--example", "2"])
        .current_dir(dir.path())
        .env_remove("ORSIRR_1_PATH")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("orsirr_1"));
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let csv = dir.path().join(format!("{k}.csv"));
        let js = dir.path().join(format!("{k}.json"));
        let out = bench(&[
            "run", "--example", "3", "--solver", "qmr", "--rhs", "random", "--seed", "5",
            "--out-csv", csv.to_str().unwrap(), "--out-json", js.to_str().unwrap(),
        ]);
        assert!(out.stdout.is_empty());
        outputs.push((std::fs::read(csv).unwrap(), std::fs::read(js).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn sweep_is_deterministic_across_execution_modes() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let a = bench(&["sweep", "--out-dir", dirs[0].path().to_str().unwrap()]);
    let b = bench(&["sweep", "--out-dir", dirs[1].path().to_str().unwrap(), "--sequential"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    // Examples 1, 3, 4, 5 for every solver plus preconditioned Example 1, CSV and JSON each.
    assert_eq!(names.len(), 2 * (4 * 4 + 4));
    for name in names {
        let x = std::fs::read(dirs[0].path().join(&name)).unwrap();
        let y = std::fs::read(dirs[1].path().join(&name)).unwrap();
        assert_eq!(x, y, "{name:?}");
    }
}
