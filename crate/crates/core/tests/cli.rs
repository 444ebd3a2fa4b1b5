use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavity-spectra")).args(args).output().unwrap()
}

#[test]
fn zero_coupling_spectrum_is_the_bare_ladder() {
    let out = run(&["spectrum", "--n-atoms", "2", "--delta", "1", "--coupling", "0", "--levels", "3"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# cavity-spectra v0.1.0 params: command=spectrum n_atoms=2"));
    assert_eq!(lines.next().unwrap(), "f,sector_J,parity,level_index,method,energy");
    let energies: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    // n + M, parity (-1)^(n + J - M): even sector -1, 1, 1; odd sector 0, 0, 2
    assert_eq!(energies, vec![-1.0, 1.0, 1.0, 0.0, 0.0, 2.0]);
}

#[test]
fn usage_errors_exit_two() {
    let out = run(&["spectrum", "--coupling", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--coupling"));
    assert_eq!(run(&["spectrum", "--unknown"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn strict_convergence_failure_exits_three() {
    let args = ["spectrum", "--coupling", "3", "--n-max-start", "4", "--n-max-cap", "8"];
    assert_eq!(run(&args).status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(run(&strict).status.code(), Some(3));
}

#[test]
fn unwritable_output_exits_four() {
    let out = run(&["overlap-table", "--size", "3", "--output", "/nonexistent-dir/s.csv"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn output_file_and_summary() {
    let dir = std::env::temp_dir().join(format!("cavity-spectra-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("gauges.csv");
    let out = run(&["compare-gauges", "--coupling", "0.5", "--n-max-cap", "128", "-o", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("max deviation"));
    let body = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(body.lines().filter(|l| l.contains(",dipole,")).count(), 16);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn dump_config_and_dump_matrix() {
    let out = run(&["sweep", "--n-atoms", "2", "--j", "1", "--methods", "multi0", "--dump-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("methods=multi0") && text.contains("j=1"));

    let path = std::env::temp_dir().join(format!("cavity-spectra-matrix-{}.csv", std::process::id()));
    let out = run(&[
        "spectrum", "--coupling", "0.2", "--n-max-start", "4", "--n-max-cap", "4",
        "--dump-matrix", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let m = std::fs::read_to_string(&path).unwrap();
    assert_eq!(m.lines().next(), Some("row,col,value"));
    std::fs::remove_file(path).unwrap();
}

#[test]
fn threads_flag_does_not_change_output() {
    let base = ["scaling-check", "--n1", "2", "--n2", "4", "--points", "3", "--levels", "4", "--n-max-start", "16"];
    let a = run(&[&base[..], &["--threads", "1"]].concat());
    let b = run(&[&base[..], &["--threads", "3"]].concat());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
