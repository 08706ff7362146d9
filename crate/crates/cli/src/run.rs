//! Run setup, the time loop and its CSV and checkpoint output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use spinpic::derham::{build_complex_1d, build_complex_2d, Form2};
use spinpic::diagnostics::{
    fourier_mode_amplitude, fourier_mode_amplitude_2d, hamiltonian_1d, hamiltonian_2d, poisson_residual_1d,
    poisson_residual_2d, relative_energy_error, spin_moments, DiagnosticsRecord, FormDegree,
};
use spinpic::particles::{sample_maxwellian_1d, sample_maxwellian_2d};
use spinpic::solver1d::{solve_initial_poisson, Solver1D, State1D};
use spinpic::solver2d::{solve_initial_poisson_2d, Solver2D, State2D};

use crate::checkpoint::Checkpoint;
use crate::config::{ConfigError, ModeField, Model, SimConfig};
use crate::error::{io_error, RunError};

pub const CSV_NAME: &str = "diagnostics.csv";
pub const RESOLVED_CONFIG_NAME: &str = "run.toml";

/// Model state of either dimension.
#[derive(Debug, Clone)]
pub enum RunState {
    OneD(State1D),
    TwoD(State2D),
}

fn core_err(e: spinpic::Error) -> RunError {
    RunError::from_core(e, 0)
}

impl RunState {
    /// Build the initial state: Maxwellian electrons, a circularly
    /// polarized pump (1D) or a transverse pump in `E_z`, `A_z` (2D), and
    /// the electric field from the discrete Gauss law. Spins point along
    /// `spin_direction` when `hbar > 0` and are zero otherwise.
    pub fn setup(cfg: &SimConfig) -> Result<Self, RunError> {
        let k = cfg.k;
        let e0 = cfg.e0;
        match cfg.model {
            Model::OneD => {
                let length = cfg.lengths[0];
                let cx = Arc::new(build_complex_1d(cfg.cells[0], cfg.degrees[0], length).map_err(core_err)?);
                let mut state = State1D::new(cx.clone(), cfg.hbar);
                state.ensemble =
                    sample_maxwellian_1d(cfg.particle_count, cfg.temperature, length, cfg.seed).map_err(core_err)?;
                if cfg.hbar > 0.0 {
                    state.ensemble.init_spin_delta(cfg.spin_direction).map_err(core_err)?;
                }
                let f = &mut state.fields;
                f.ey = cx.l2_project_0form(|x| e0 * (k * x).cos());
                f.ez = cx.l2_project_0form(|x| e0 * (k * x).sin());
                f.ay = cx.l2_project_0form(|x| -e0 * (k * x).sin());
                f.az = cx.l2_project_0form(|x| e0 * (k * x).cos());
                solve_initial_poisson(&mut state).map_err(core_err)?;
                Ok(RunState::OneD(state))
            }
            Model::TwoD => {
                let lengths = [cfg.lengths[0], cfg.lengths[1]];
                let cx = Arc::new(
                    build_complex_2d([cfg.cells[0], cfg.cells[1]], [cfg.degrees[0], cfg.degrees[1]], lengths)
                        .map_err(core_err)?,
                );
                let mut state = State2D::new(cx.clone(), cfg.hbar);
                state.ensemble =
                    sample_maxwellian_2d(cfg.particle_count, cfg.temperature, lengths, cfg.seed).map_err(core_err)?;
                if cfg.hbar > 0.0 {
                    state.ensemble.init_spin_delta(cfg.spin_direction).map_err(core_err)?;
                }
                let f = &mut state.fields;
                f.ez = cx.l2_project_0form(|x| e0 * (k * x[0]).sin());
                f.az = cx.l2_project_0form(|x| e0 * (k * x[0]).cos());
                solve_initial_poisson_2d(&mut state).map_err(core_err)?;
                Ok(RunState::TwoD(state))
            }
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            RunState::OneD(s) => s.time,
            RunState::TwoD(s) => s.time,
        }
    }

    fn set_time(&mut self, t: f64) {
        match self {
            RunState::OneD(s) => s.time = t,
            RunState::TwoD(s) => s.time = t,
        }
    }

    pub fn hamiltonian(&self) -> f64 {
        match self {
            RunState::OneD(s) => hamiltonian_1d(s),
            RunState::TwoD(s) => hamiltonian_2d(s),
        }
    }

    pub fn poisson_residual(&self) -> f64 {
        match self {
            RunState::OneD(s) => poisson_residual_1d(s).1,
            RunState::TwoD(s) => poisson_residual_2d(s).1,
        }
    }

    pub fn spin_moments(&self) -> [f64; 3] {
        match self {
            RunState::OneD(s) => spin_moments(&s.ensemble),
            RunState::TwoD(s) => spin_moments(&s.ensemble),
        }
    }

    /// Amplitudes of the configured Fourier modes, in configuration order.
    pub fn mode_amplitudes(&self, cfg: &SimConfig) -> Result<Vec<(String, f64)>, RunError> {
        let mut out = Vec::with_capacity(cfg.modes.len());
        for mode in &cfg.modes {
            let amp = match self {
                RunState::OneD(s) => {
                    let f = &s.fields;
                    let (coeffs, form) = match mode.field {
                        ModeField::Ex => (&f.ex, FormDegree::One),
                        ModeField::Ey => (&f.ey, FormDegree::Zero),
                        ModeField::Ez => (&f.ez, FormDegree::Zero),
                        ModeField::Ay => (&f.ay, FormDegree::Zero),
                        ModeField::Az => (&f.az, FormDegree::Zero),
                        ModeField::Bz => unreachable!("rejected by the configuration parser"),
                    };
                    fourier_mode_amplitude(&s.complex, coeffs.as_slice(), form, mode.index[0])
                }
                RunState::TwoD(s) => {
                    let f = &s.fields;
                    let half = s.complex.dim0();
                    let (coeffs, form) = match mode.field {
                        ModeField::Ex => (&f.exy.as_slice()[..half], Form2::OneFirst),
                        ModeField::Ey => (&f.exy.as_slice()[half..], Form2::OneSecond),
                        ModeField::Ez => (f.ez.as_slice(), Form2::Zero),
                        ModeField::Az => (f.az.as_slice(), Form2::Zero),
                        ModeField::Bz => (f.bz.as_slice(), Form2::Two),
                        ModeField::Ay => unreachable!("rejected by the configuration parser"),
                    };
                    fourier_mode_amplitude_2d(&s.complex, coeffs, form, [mode.index[0], mode.index[1]])
                }
            }
            .map_err(core_err)?;
            out.push((mode.column(), amp));
        }
        Ok(out)
    }

    pub fn to_checkpoint(&self, step: u64, h0: f64) -> Checkpoint {
        match self {
            RunState::OneD(s) => {
                let sp = &s.complex.space;
                let f = &s.fields;
                let e = &s.ensemble;
                Checkpoint {
                    dims: 1,
                    cells: vec![sp.cells()],
                    degrees: vec![sp.degree],
                    lengths: vec![sp.length()],
                    fields: vec![f.ex.clone(), f.ey.clone(), f.ez.clone(), f.ay.clone(), f.az.clone()],
                    x: e.x.iter().map(|x| x[0]).collect(),
                    p: e.p.iter().map(|p| p[0]).collect(),
                    s: e.s.clone(),
                    w: e.w.clone(),
                    time: s.time,
                    step,
                    h0,
                }
            }
            RunState::TwoD(s) => {
                let cx = &s.complex;
                let f = &s.fields;
                let e = &s.ensemble;
                Checkpoint {
                    dims: 2,
                    cells: cx.n().to_vec(),
                    degrees: cx.degrees().to_vec(),
                    lengths: cx.lengths().to_vec(),
                    fields: vec![f.exy.clone(), f.bz.clone(), f.ez.clone(), f.az.clone()],
                    x: e.x.iter().flatten().copied().collect(),
                    p: e.p.iter().flatten().copied().collect(),
                    s: e.s.clone(),
                    w: e.w.clone(),
                    time: s.time,
                    step,
                    h0,
                }
            }
        }
    }

    /// Overwrite this state with a checkpoint taken from a run with the
    /// same grid and particle count.
    pub fn restore(&mut self, ck: &Checkpoint) -> Result<(), RunError> {
        let mine = self.to_checkpoint(0, 0.0);
        let mismatch = |what: &str| {
            RunError::Config(ConfigError {
                field: None,
                line: None,
                message: format!("checkpoint does not match the configuration: {what} differs"),
            })
        };
        if ck.dims != mine.dims {
            return Err(mismatch("model"));
        }
        if ck.cells != mine.cells {
            return Err(mismatch("grid.cells"));
        }
        if ck.degrees != mine.degrees {
            return Err(mismatch("grid.degree"));
        }
        if ck.lengths != mine.lengths {
            return Err(mismatch("domain lengths"));
        }
        if ck.particle_count() != mine.particle_count() {
            return Err(mismatch("particles.count"));
        }
        let shapes_match = ck.fields.len() == mine.fields.len()
            && ck.fields.iter().zip(&mine.fields).all(|(a, b)| a.len() == b.len());
        if !shapes_match {
            return Err(mismatch("field layout"));
        }
        let v = |i: usize| ck.fields[i].clone();
        match self {
            RunState::OneD(s) => {
                s.fields.ex = v(0);
                s.fields.ey = v(1);
                s.fields.ez = v(2);
                s.fields.ay = v(3);
                s.fields.az = v(4);
                let e = &mut s.ensemble;
                e.x = ck.x.iter().map(|&x| [x]).collect();
                e.p = ck.p.iter().map(|&p| [p]).collect();
                e.s = ck.s.clone();
                e.w = ck.w.clone();
                s.time = ck.time;
            }
            RunState::TwoD(s) => {
                s.fields.exy = v(0);
                s.fields.bz = v(1);
                s.fields.ez = v(2);
                s.fields.az = v(3);
                let e = &mut s.ensemble;
                e.x = ck.x.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
                e.p = ck.p.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
                e.s = ck.s.clone();
                e.w = ck.w.clone();
                s.time = ck.time;
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
enum Stepper {
    OneD(Solver1D),
    TwoD(Solver2D),
}

/// A state together with its solver, step counter and reference energy.
#[derive(Debug)]
pub struct Simulation {
    pub config: SimConfig,
    pub state: RunState,
    pub step: u64,
    pub h0: f64,
    /// Steps that only succeeded after halving `dt`.
    pub retries: u64,
    stepper: Stepper,
}

impl Simulation {
    pub fn new(config: SimConfig, workers: usize) -> Result<Self, RunError> {
        let state = RunState::setup(&config)?;
        let h0 = state.hamiltonian();
        let params = config.solver_params();
        let stepper = match config.model {
            Model::OneD => Stepper::OneD(Solver1D::with_workers(params, workers).map_err(core_err)?),
            Model::TwoD => Stepper::TwoD(Solver2D::with_workers(params, workers).map_err(core_err)?),
        };
        Ok(Simulation { config, state, step: 0, h0, retries: 0, stepper })
    }

    pub fn from_checkpoint(config: SimConfig, workers: usize, ck: &Checkpoint) -> Result<Self, RunError> {
        let mut sim = Self::new(config, workers)?;
        sim.state.restore(ck)?;
        sim.step = ck.step;
        sim.h0 = ck.h0;
        Ok(sim)
    }

    fn raw_step(&mut self, dt: f64) -> Result<(), spinpic::Error> {
        match (&mut self.stepper, &mut self.state) {
            (Stepper::OneD(solver), RunState::OneD(s)) => solver.step(s, dt),
            (Stepper::TwoD(solver), RunState::TwoD(s)) => solver.lie_trotter_step(s, dt),
            _ => unreachable!("stepper and state are built together"),
        }
    }

    /// Advance one step. With `retry_halving`, a step whose fixed-point
    /// iteration fails is retried once as two half steps.
    pub fn advance(&mut self) -> Result<(), RunError> {
        let dt = self.config.dt;
        let step = self.step + 1;
        let saved = self.config.retry_halving.then(|| self.state.clone());
        match self.raw_step(dt) {
            Ok(()) => {}
            Err(err @ spinpic::Error::NonConvergence { .. }) if saved.is_some() => {
                let saved = saved.expect("checked above");
                let t0 = saved.time();
                self.state = saved;
                let half = 0.5 * dt;
                self.raw_step(half)
                    .and_then(|_| self.raw_step(half))
                    .map_err(|e| RunError::from_core(e, step))
                    .map_err(|e| match e {
                        RunError::NonConvergence { step, message } => RunError::NonConvergence {
                            step,
                            message: format!("{message} (after a first failure: {err})"),
                        },
                        other => other,
                    })?;
                self.state.set_time(t0 + dt);
                self.retries += 1;
            }
            Err(e) => return Err(RunError::from_core(e, step)),
        }
        self.step = step;
        Ok(())
    }

    pub fn record(&self) -> Result<DiagnosticsRecord, RunError> {
        let h = self.state.hamiltonian();
        Ok(DiagnosticsRecord {
            step: self.step,
            time: self.state.time(),
            hamiltonian: h,
            rel_energy_err: relative_energy_error(h, self.h0),
            poisson_res_inf: self.state.poisson_residual(),
            mode_amp: self.state.mode_amplitudes(&self.config)?,
            spin_moments: self.state.spin_moments(),
        })
    }
}

pub fn csv_header(cfg: &SimConfig) -> String {
    let mut cols = vec!["step".to_string(), "time".into(), "H".into(), "rel_energy_err".into(), "poisson_res_inf".into()];
    cols.extend(cfg.modes.iter().map(|m| m.column()));
    cols.extend(["Sx".to_string(), "Sy".into(), "Sz".into()]);
    cols.join(",")
}

pub fn csv_row(rec: &DiagnosticsRecord) -> String {
    let mut cols = vec![
        rec.step.to_string(),
        format!("{:e}", rec.time),
        format!("{:e}", rec.hamiltonian),
        format!("{:e}", rec.rel_energy_err),
        format!("{:e}", rec.poisson_res_inf),
    ];
    cols.extend(rec.mode_amp.iter().map(|(_, v)| format!("{v:e}")));
    cols.extend(rec.spin_moments.iter().map(|v| format!("{v:e}")));
    cols.join(",")
}

/// Where a resumed run takes its state from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resume {
    /// The checkpoint with the largest step in the output directory.
    Latest,
    File(PathBuf),
}

/// Command-line options that are not part of the configuration file.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub workers: usize,
    pub resume: Option<Resume>,
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    pub rows: u64,
    pub retries: u64,
    pub final_record: DiagnosticsRecord,
}

/// The checkpoint with the largest step in `dir`, if any.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<Checkpoint>, RunError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_error(dir, e)),
    };
    let mut best: Option<Checkpoint> = None;
    for entry in entries {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let is_checkpoint = name == "final.bin" || (name.starts_with("checkpoint_") && name.ends_with(".bin"));
        if !is_checkpoint {
            continue;
        }
        let ck = Checkpoint::read(&path)?;
        if best.as_ref().is_none_or(|b| ck.step > b.step) {
            best = Some(ck);
        }
    }
    Ok(best)
}

/// Keep the header and the rows with step `<= last_step`.
fn truncate_csv(path: &Path, header: &str, last_step: u64) -> Result<String, RunError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(io_error(path, e)),
    };
    let mut out = format!("{header}\n");
    for line in text.lines().skip(1) {
        let step = line.split(',').next().and_then(|s| s.parse::<u64>().ok());
        match step {
            Some(s) if s <= last_step => {
                out += line;
                out.push('\n');
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Run the configured simulation, writing `diagnostics.csv`, the resolved
/// configuration and checkpoints into `opts.out_dir`.
pub fn run(cfg: &SimConfig, opts: &RunOptions) -> Result<RunSummary, RunError> {
    let dir = &opts.out_dir;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let resolved = cfg.to_toml();
    if !opts.quiet {
        println!("# resolved configuration\n{resolved}");
    }
    let config_path = dir.join(RESOLVED_CONFIG_NAME);
    fs::write(&config_path, &resolved).map_err(|e| io_error(&config_path, e))?;

    let header = csv_header(cfg);
    let csv_path = dir.join(CSV_NAME);
    let resumed = match &opts.resume {
        None => None,
        Some(Resume::Latest) => latest_checkpoint(dir)?,
        Some(Resume::File(path)) => Some(Checkpoint::read(path)?),
    };
    let (mut sim, initial_text) = match &resumed {
        Some(ck) => {
            let sim = Simulation::from_checkpoint(cfg.clone(), opts.workers, ck)?;
            (sim, truncate_csv(&csv_path, &header, ck.step)?)
        }
        None => {
            let sim = Simulation::new(cfg.clone(), opts.workers)?;
            let first = csv_row(&sim.record()?);
            (sim, format!("{header}\n{first}\n"))
        }
    };
    let mut rows = initial_text.lines().count() as u64 - 1;
    let file = fs::File::create(&csv_path).map_err(|e| io_error(&csv_path, e))?;
    let mut csv = BufWriter::new(file);
    csv.write_all(initial_text.as_bytes()).map_err(|e| io_error(&csv_path, e))?;

    let total = cfg.step_count();
    let mut last = sim.record()?;
    while sim.step < total {
        sim.advance()?;
        let step = sim.step;
        if step % cfg.csv_stride == 0 || step == total {
            last = sim.record()?;
            writeln!(csv, "{}", csv_row(&last)).map_err(|e| io_error(&csv_path, e))?;
            rows += 1;
            if !opts.quiet {
                println!(
                    "step {step}/{total} t={:.4} rel_energy_err={:.3e} poisson_res={:.3e}",
                    last.time, last.rel_energy_err, last.poisson_res_inf
                );
            }
        }
        if cfg.checkpoint_stride > 0 && step % cfg.checkpoint_stride == 0 {
            csv.flush().map_err(|e| io_error(&csv_path, e))?;
            let path = dir.join(format!("checkpoint_{step}.bin"));
            sim.state.to_checkpoint(step, sim.h0).write(&path)?;
        }
    }
    csv.flush().map_err(|e| io_error(&csv_path, e))?;
    sim.state.to_checkpoint(sim.step, sim.h0).write(&dir.join("final.bin"))?;
    if last.step != sim.step {
        last = sim.record()?;
    }
    Ok(RunSummary { steps: sim.step, rows, retries: sim.retries, final_record: last })
}
