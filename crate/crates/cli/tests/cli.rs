use std::fs;
use std::path::Path;
use std::process::Command;

use spinpic::diagnostics::energy_parts_1d;
use spinpic_cli::checkpoint::Checkpoint;
use spinpic_cli::config::Model;
use spinpic_cli::{parse_config, run, Resume, RunError, RunOptions, RunState, Simulation};

const SMALL: &str = "[grid]\ncells = 16\n[time]\nt_end = 0.2\n[particles]\ncount = 300\n";

fn opts(dir: &Path) -> RunOptions {
    RunOptions { out_dir: dir.to_path_buf(), workers: 1, resume: None, quiet: true }
}

fn simulate(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_simulate")).args(args).output().unwrap()
}

#[test]
fn minimal_config_defaults() {
    let cfg = parse_config("model = \"1d\"\n").unwrap();
    assert_eq!(cfg.degrees, vec![3]);
    assert_eq!(cfg.tol, 1e-13);
    assert_eq!(cfg.dt, 0.02);
    assert_eq!(cfg.splitting, spinpic::solver1d::Splitting::Lie);
    assert!((cfg.lengths[0] - 2.0 * std::f64::consts::PI * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn pump_experiment_config_is_accepted_and_echoed() {
    let text = "[grid]\ncells = 128\n[domain]\nk0 = 0.7071067811865476\n[time]\ndt = 0.02\nt_end = 80\n\
                [particles]\ncount = 4000\ntemperature = 0.005870841487279843\n\
                [physics]\nhbar = 0.0\ne0 = 1.7320508075688772\nk = 0.7071067811865476\n";
    let cfg = parse_config(text).unwrap();
    let echoed = cfg.to_toml();
    assert!(echoed.contains("e0 = 1.7320508075688772"), "{echoed}");
    assert!(echoed.contains("count = 4000"));
    assert_eq!(parse_config(&echoed).unwrap(), cfg);
}

#[test]
fn spin_experiment_config_is_accepted() {
    let cfg = parse_config("[time]\nt_end = 200\n[particles]\ncount = 10000\n[physics]\nhbar = 0.1\n").unwrap();
    assert_eq!(cfg.particle_count, 10000);
    assert_eq!(cfg.hbar, 0.1);
}

#[test]
fn constraint_errors_name_the_key() {
    for (text, field) in [
        ("[time]\ndt = -0.1\n", "time.dt"),
        ("[solver]\ntol = 0\n", "solver.tol"),
        ("[solver]\nmax_iter = 0\n", "solver.max_iter"),
        ("[particles]\ncount = 0\n", "particles.count"),
        ("[particles]\nspin_direction = [1.0, 1.0, 0.0]\n", "particles.spin_direction"),
        ("[grid]\ncells = [8, 8]\n", "grid.cells"),
        ("[output]\nmodes = [\"ex:99\"]\n", "output.modes"),
        ("model = \"2d\"\n[time]\nsplitting = \"strang\"\n", "time.splitting"),
    ] {
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.field.as_deref(), Some(field), "{text}");
        assert!(err.line.is_some(), "{text}");
    }
}

#[test]
fn type_mismatch_reports_line() {
    let err = parse_config("[time]\n\ndt = \"fast\"\n").unwrap_err();
    assert_eq!(err.line, Some(3));
}

#[test]
fn initial_gauss_law_holds_for_the_pump_setup() {
    let cfg = parse_config("[particles]\ncount = 4000\n").unwrap();
    let state = RunState::setup(&cfg).unwrap();
    assert!(state.poisson_residual() <= 1e-13, "{}", state.poisson_residual());
}

#[test]
fn zero_pump_energy_is_particles_only() {
    let cfg = parse_config("[grid]\ncells = 32\n[particles]\ncount = 500\n[physics]\ne0 = 0.0\n").unwrap();
    let RunState::OneD(state) = RunState::setup(&cfg).unwrap() else { panic!("1d expected") };
    let parts = energy_parts_1d(&state);
    assert_eq!((parts.ey, parts.ez, parts.ay, parts.az, parts.zeeman), (0.0, 0.0, 0.0, 0.0, 0.0));
    // only the Gauss-law field of the sampled charge adds to the kinetic sum
    assert!(parts.ex < 1e-3 * parts.kinetic, "{parts:?}");
    assert_eq!(spinpic::diagnostics::hamiltonian_1d(&state), parts.kinetic + parts.ex);
}

#[test]
fn spins_are_inert_without_zeeman_coupling() {
    let cfg = parse_config(SMALL).unwrap();
    assert_eq!(Simulation::new(cfg, 1).unwrap().state.spin_moments(), [0.0; 3]);
    let cfg = parse_config(&format!("{SMALL}[physics]\nhbar = 0.1\n")).unwrap();
    let s = Simulation::new(cfg, 1).unwrap().state.spin_moments();
    assert!((s[2] - 2.0 * std::f64::consts::PI * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn stride_beyond_run_gives_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&format!("{SMALL}[output]\ncsv_stride = 1000\n")).unwrap();
    let summary = run(&cfg, &opts(dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(summary.rows, 2);
    assert!(lines[1].starts_with("0,"));
    assert!(lines[2].starts_with("10,"));
    assert_eq!(lines[0], "step,time,H,rel_energy_err,poisson_res_inf,ex_m2,ey_m2,Sx,Sy,Sz");
}

#[test]
fn checkpoint_round_trip_restores_state_bitwise() {
    for text in [SMALL, "model = \"2d\"\n[grid]\ncells = 6\n[time]\nt_end = 0.04\n[particles]\ncount = 50\n[physics]\nhbar = 0.05\n"] {
        let cfg = parse_config(text).unwrap();
        let mut sim = Simulation::new(cfg.clone(), 1).unwrap();
        sim.advance().unwrap();
        let ck = sim.state.to_checkpoint(sim.step, sim.h0);
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        let restored = Simulation::from_checkpoint(cfg, 1, &back).unwrap();
        assert_eq!(restored.state.to_checkpoint(restored.step, restored.h0).to_bytes(), ck.to_bytes());
    }
}

#[test]
fn checkpoint_from_other_grid_is_rejected() {
    let cfg = parse_config(SMALL).unwrap();
    let ck = Simulation::new(cfg, 1).unwrap().state.to_checkpoint(0, 1.0);
    let other = parse_config("[grid]\ncells = 32\n[particles]\ncount = 300\n").unwrap();
    assert!(matches!(Simulation::from_checkpoint(other, 1, &ck), Err(RunError::Config(_))));
}

fn resume_matches(text: &str, resume: Resume) {
    let full = tempfile::tempdir().unwrap();
    let cfg = parse_config(text).unwrap();
    run(&cfg, &opts(full.path())).unwrap();
    let expected = fs::read(full.path().join("diagnostics.csv")).unwrap();

    // interrupted copy: stop at step 6 (rows up to 6, checkpoints 3 and 6),
    // then append a stale row that the resume must drop
    let part = tempfile::tempdir().unwrap();
    let mut early = cfg.clone();
    early.t_end = 6.0 * cfg.dt;
    run(&early, &opts(part.path())).unwrap();
    fs::remove_file(part.path().join("final.bin")).unwrap();
    let csv = part.path().join("diagnostics.csv");
    let mut text = fs::read_to_string(&csv).unwrap();
    text += "7,garbage\n";
    fs::write(&csv, text).unwrap();
    if let Resume::File(name) = &resume {
        // resume from the earlier checkpoint named by the caller
        assert!(part.path().join(name).exists());
    }
    let resume = match resume {
        Resume::File(name) => Resume::File(part.path().join(name)),
        r => r,
    };
    run(&cfg, &RunOptions { resume: Some(resume), ..opts(part.path()) }).unwrap();
    assert_eq!(fs::read(&csv).unwrap(), expected);
    assert_eq!(
        fs::read(part.path().join("final.bin")).unwrap(),
        fs::read(full.path().join("final.bin")).unwrap()
    );
}

#[test]
fn resumed_run_reproduces_csv_bitwise() {
    let text = format!("{SMALL}[output]\ncheckpoint_stride = 3\n");
    resume_matches(&text, Resume::Latest);
    resume_matches(&text, Resume::File("checkpoint_3.bin".into()));
}

#[test]
fn resumed_2d_run_reproduces_csv_bitwise() {
    let text = "model = \"2d\"\n[grid]\ncells = 6\n[time]\nt_end = 0.2\n[particles]\ncount = 60\n\
                [physics]\nhbar = 0.05\n[output]\ncheckpoint_stride = 3\ncsv_stride = 2\n";
    resume_matches(text, Resume::Latest);
}

#[test]
fn retry_halving_rescues_a_failing_step() {
    let text = "[grid]\ncells = 16\n[time]\ndt = 0.2\nt_end = 0.8\n[particles]\ncount = 200\n[solver]\nmax_iter = 6\n";
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.model, Model::OneD);
    let mut plain = Simulation::new(cfg.clone(), 1).unwrap();
    let err = (0..4).try_for_each(|_| plain.advance()).unwrap_err();
    assert!(matches!(err, RunError::NonConvergence { step: 1, .. }), "{err}");
    assert_eq!(err.exit_code(), 3);

    let mut retry = cfg.clone();
    retry.retry_halving = true;
    let mut sim = Simulation::new(retry, 1).unwrap();
    for _ in 0..4 {
        sim.advance().unwrap();
    }
    assert!(sim.retries > 0);
    assert!((sim.state.time() - 0.8).abs() < 1e-15);
    let rec = sim.record().unwrap();
    assert!(rec.rel_energy_err < 1e-10, "{}", rec.rel_energy_err);
}

#[test]
fn binary_reports_config_errors_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[time]\ndt = -0.1\n").unwrap();
    let out = simulate(&["--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let line = String::from_utf8(out.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["error"], "config");
    assert_eq!(v["field"], "time.dt");
    assert_eq!(v["line"], 2);
}

#[test]
fn binary_reports_missing_files_as_io() {
    let out = simulate(&["--config", "/nonexistent/run.toml", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(v["error"], "io");
}

#[test]
fn binary_reports_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, "[grid]\ncells = 16\n[time]\ndt = 0.2\nt_end = 0.4\n[particles]\ncount = 200\n[solver]\nmax_iter = 2\n").unwrap();
    let out = simulate(&["--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(v["error"], "nonconvergence");
    assert_eq!(v["step"], 1);
}

#[test]
fn binary_runs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let out_dir = dir.path().join("o");
    fs::write(&path, format!("{SMALL}[output]\ncheckpoint_stride = 5\n")).unwrap();
    let args = ["--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--quiet"];
    assert!(simulate(&args).status.success());
    let first = fs::read(out_dir.join("diagnostics.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 12);
    let ck = out_dir.join("checkpoint_5.bin");
    let mut resume = args.to_vec();
    resume.extend(["--resume", ck.to_str().unwrap()]);
    assert!(simulate(&resume).status.success());
    assert_eq!(fs::read(out_dir.join("diagnostics.csv")).unwrap(), first);
    assert!(fs::read_to_string(out_dir.join("run.toml")).unwrap().contains("[particles]"));
}
