use std::fs;
use std::process::{Command, Output};

use wfcpl::config::{IntegratorName, SchemeName};
use wfcpl::ExperimentConfig;

fn wfcpl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wfcpl")).args(args).output().expect("run wfcpl")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn successful_run_writes_one_row_per_window() {
    let out = wfcpl(&["run", "--override", "coupling.t_end=3.0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "window,t_end,iterations,converged,residual_norms,l2_error");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("2,3.0,"));
}

#[test]
fn configuration_errors_exit_with_two() {
    for args in [
        &["run", "--override", "coupling.bogus=1"][..],
        &["run", "--override", "coupling.p=2"],
        &["run", "--override", "coupling.t_end=1.3", "--override", "coupling.dt_window=0.5"],
        &["run", "--config", "/nonexistent/wfcpl.toml"],
        &["table", "--setups", "3by3"],
    ] {
        let out = wfcpl(args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn non_convergence_under_abort_exits_with_three() {
    let out = wfcpl(&["run", "--override", "accel.scheme=full_fixed_point", "--override", "coupling.t_end=2.0"]);
    assert_eq!(code(&out), 3);
    let text = String::from_utf8(out.stdout).unwrap();
    // The failed window is still reported, and the run stops there.
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0,1.0,100,false,"));

    let out = wfcpl(&[
        "run",
        "--override",
        "accel.scheme=full_fixed_point",
        "--override",
        "coupling.t_end=2.0",
        "--override",
        "coupling.on_divergence=continue",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
}

#[test]
fn csv_output_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        let out = wfcpl(&["run", "--override", "coupling.n_d=3", "--override", "coupling.t_end=2.0", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
        assert!(out.stdout.is_empty());
    }
    let a = fs::read(&paths[0]).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, fs::read(&paths[1]).unwrap());
}

#[test]
fn tcp_mode_reproduces_the_in_process_csv() {
    let args = ["run", "--override", "coupling.n_d=3", "--override", "coupling.n_n=2", "--override", "coupling.t_end=2.0"];
    let local = wfcpl(&args);
    let mut tcp_args = args.to_vec();
    tcp_args.extend(["--override", "transport.mode=tcp"]);
    let remote = wfcpl(&tcp_args);
    assert_eq!(code(&remote), 0, "{}", String::from_utf8_lossy(&remote.stderr));
    assert_eq!(local.stdout, remote.stdout);
}

#[test]
fn config_file_round_trips_and_drives_the_run() {
    let mut cfg = ExperimentConfig::default();
    cfg.coupling.scheme = SchemeName::SingleValue;
    cfg.coupling.n_d = 2;
    cfg.coupling.t_end = 2.0;
    cfg.integrators.neumann = IntegratorName::TR;
    let text = cfg.to_toml();
    assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(&path, &text).unwrap();
    let from_file = wfcpl(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&from_file), 0, "{}", String::from_utf8_lossy(&from_file.stderr));
    let from_overrides = wfcpl(&[
        "run",
        "--override",
        "coupling.scheme=single_value",
        "--override",
        "coupling.n_d=2",
        "--override",
        "coupling.t_end=2.0",
        "--override",
        "integrators.neumann=TR",
    ]);
    assert_eq!(from_file.stdout, from_overrides.stdout);
}

#[test]
fn csv_path_from_config_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let mut cfg = ExperimentConfig::default();
    cfg.output.csv_path = Some(csv.clone());
    let path = dir.path().join("exp.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    let out = wfcpl(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(fs::read_to_string(&csv).unwrap().starts_with("window,"));
}

#[test]
fn table_cells_carry_their_full_label() {
    let out = wfcpl(&["table", "--dts", "1.0", "--setups", "1x1,3x1", "--override", "coupling.t_end=2.0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with('#'));
    assert_eq!(lines.next().unwrap(), "variant,scheme,view,n_d,n_n,p,dt,avg_iterations,all_converged");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().any(|r| r.starts_with("QN-SC,SingleValue,EndValue,3,1,1,1.0,")));
    assert!(rows.iter().any(|r| r.starts_with("rQN-WI,Waveform,LastSubstep,1,1,1,1.0,")));
}

#[test]
fn recovery_and_order_subcommands() {
    let out = wfcpl(&[
        "recovery",
        "--override",
        "problem.g_kind=polynomial",
        "--override",
        "coupling.tol_rel=1e-12",
        "--dts",
        "0.5",
        "--setups",
        "1x1,2x3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true,true")), "{text}");

    let out = wfcpl(&["order", "--dts", "0.5,0.25,0.125"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# observed order "));
    assert!(String::from_utf8_lossy(&out.stderr).contains("observed order"));
}

#[test]
fn sweep_base_is_validated_per_cell() {
    // p = 2 is invalid for the default 1x1 setup but fine for the swept ones;
    // the 1x1 cell is skipped.
    let out = wfcpl(&[
        "recovery",
        "--override",
        "problem.g_kind=polynomial",
        "--override",
        "problem.alpha=2",
        "--override",
        "integrators.dirichlet=TR",
        "--override",
        "integrators.neumann=TR",
        "--override",
        "coupling.p=2",
        "--dts",
        "1.0",
        "--setups",
        "1x1,2x2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("2,TR,Waveform,2,2,2,1.0,"));

    // A single run is still checked up front.
    assert_eq!(code(&wfcpl(&["run", "--override", "coupling.p=2"])), 2);
}
