//! `check`, `simulate` and `reduce`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use evopiezo_core::evolution::{simulate, DiscreteSystem, EnergyLog, SourceTerm, Trajectory};
use evopiezo_core::quasistatic::{assemble_reduced, check_theorem2, reduced_oracle, ReducedSystem};
use evopiezo_core::wellposedness::{check_theorem1, verdict_crosscheck, CheckOptions, Verdict};
use evopiezo_core::{Error, Slot, StateLayout, StateVector};

use crate::config::{Mode, SimulationSpec};
use crate::report::Report;
use crate::snapshot::{snapshot_file_name, write_snapshot, Snapshot};

/// Process exit status. The numeric values are a stable contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Input = 1,
    Falsified = 2,
    Inconclusive = 3,
    Solver = 4,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_verdict(v: Verdict) -> Self {
        match v {
            Verdict::Certified => ExitCode::Success,
            Verdict::Falsified => ExitCode::Falsified,
            Verdict::Inconclusive => ExitCode::Inconclusive,
        }
    }
}

/// Command-line flags that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub nu_cap: Option<f64>,
    pub tol: Option<f64>,
    pub skip_check: bool,
    pub out_dir: Option<PathBuf>,
}

/// Input problems (bad files, capacity limits, unusable materials).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

impl From<Error> for InputError {
    fn from(e: Error) -> Self {
        InputError(e.to_string())
    }
}

impl From<std::io::Error> for InputError {
    fn from(e: std::io::Error) -> Self {
        InputError(e.to_string())
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub exit: Option<ExitCode>,
    pub report: Option<Report>,
    pub log: Option<EnergyLog>,
    pub energy_log_path: Option<PathBuf>,
    pub snapshots: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit(&self) -> ExitCode {
        self.exit.unwrap_or(ExitCode::Success)
    }
}

type CmdResult = Result<Outcome, InputError>;

fn check_options(spec: &SimulationSpec, o: &Overrides) -> Result<CheckOptions, InputError> {
    let mut opts = spec.check;
    if let Some(c) = o.nu_cap {
        if !(c >= 1.0 && c.is_finite()) {
            return Err(InputError(format!(
                "--nu-cap must be a finite number >= 1, got {c}"
            )));
        }
        opts.nu_cap = c;
    }
    if let Some(t) = o.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(InputError(format!("--tol must be > 0, got {t}")));
        }
        opts.tol = t;
    }
    Ok(opts)
}

fn out_path(o: &Overrides, name: &str) -> PathBuf {
    match &o.out_dir {
        Some(d) => d.join(name),
        None => PathBuf::from(name),
    }
}

fn ensure_out_dir(o: &Overrides) -> Result<(), InputError> {
    if let Some(d) = &o.out_dir {
        std::fs::create_dir_all(d)
            .map_err(|e| InputError(format!("cannot create {}: {e}", d.display())))?;
    }
    Ok(())
}

fn full_report(spec: &SimulationSpec, opts: &CheckOptions) -> Result<Report, InputError> {
    match verdict_crosscheck(&spec.material, opts) {
        Ok(cc) => {
            let mut r = Report::from_wellposedness("full", &cc.theorem);
            r.oracle_verdict = Some(cc.oracle_verdict.as_str().to_string());
            r.oracle_min_eig = Some(cc.oracle_min_eig);
            r.oracle_agree = Some(cc.agree);
            Ok(r)
        }
        Err(e) => {
            let mut r = Report::from_wellposedness("full", &check_theorem1(&spec.material, opts)?);
            r.oracle_note = Some(format!("oracle not run: {e}"));
            Ok(r)
        }
    }
}

fn reduced_report(
    rs: &ReducedSystem,
    spec: &SimulationSpec,
    opts: &CheckOptions,
) -> Result<Report, InputError> {
    let mut r =
        Report::from_wellposedness("quasistatic", &check_theorem2(rs, &spec.material, opts)?);
    match reduced_oracle(rs, opts) {
        Ok(o) => {
            r.oracle_verdict = Some(o.verdict.as_str().to_string());
            r.oracle_min_eig = o.oracle_min_eig;
            r.oracle_agree = Some(o.verdict.as_str() == r.verdict);
        }
        Err(e) => r.oracle_note = Some(format!("oracle not run: {e}")),
    }
    Ok(r)
}

fn emit_report(
    report: &Report,
    spec: &SimulationSpec,
    o: &Overrides,
    out: &mut dyn Write,
) -> Result<(), InputError> {
    let text = report.to_toml();
    out.write_all(text.as_bytes())?;
    let name = spec
        .output
        .report
        .as_deref()
        .or(o.out_dir.as_ref().map(|_| "report.toml"));
    if let Some(name) = name {
        ensure_out_dir(o)?;
        let path = out_path(o, name);
        std::fs::write(&path, text)
            .map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Runs the well-posedness check for the configured mode and prints the
/// report. Exit 0 iff the verdict is `certified`.
pub fn cmd_check(spec: &SimulationSpec, o: &Overrides, out: &mut dyn Write) -> CmdResult {
    let opts = check_options(spec, o)?;
    let report = match spec.mode {
        Mode::Full => full_report(spec, &opts)?,
        Mode::Quasistatic => {
            reduced_report(&assemble_reduced(&spec.material, &spec.grid)?, spec, &opts)?
        }
    };
    emit_report(&report, spec, o, out)?;
    Ok(Outcome {
        exit: report.verdict().map(ExitCode::from_verdict),
        report: Some(report),
        ..Outcome::default()
    })
}

/// Reduced formulation: checks the reduced system and, when a schedule is
/// configured, integrates it.
pub fn cmd_reduce(spec: &SimulationSpec, o: &Overrides, out: &mut dyn Write) -> CmdResult {
    let mut spec = spec.clone();
    if spec.mode == Mode::Full {
        if !spec.material.sigma.is_zero() {
            return Err(InputError(
                "reduce requires sigma = 0 (no conductivity term)".into(),
            ));
        }
        if spec
            .sources
            .iter()
            .any(|s| matches!(s.slot, Slot::E | Slot::H))
        {
            return Err(InputError(
                "reduce has no E/H equations; drop the F2/F3 sources".into(),
            ));
        }
        if spec
            .initial
            .iter()
            .any(|(s, _)| matches!(s, Slot::E | Slot::H))
        {
            return Err(InputError(
                "E and H are not state variables of the reduced system".into(),
            ));
        }
        if spec.output.snapshot_fields.iter().any(|f| f == "H") {
            return Err(InputError(
                "H is not available in the reduced system".into(),
            ));
        }
        spec.mode = Mode::Quasistatic;
    }
    if spec.schedule.is_some() {
        cmd_simulate(&spec, o, out)
    } else {
        cmd_check(&spec, o, out)
    }
}

enum Model {
    Full(DiscreteSystem),
    Reduced(Box<ReducedSystem>, DiscreteSystem),
}

impl Model {
    fn system(&self) -> &DiscreteSystem {
        match self {
            Model::Full(s) | Model::Reduced(_, s) => s,
        }
    }
}

fn reduced_source(rs: &ReducedSystem, spec: &SimulationSpec) -> Result<SourceTerm, InputError> {
    let cells = spec.grid.cells();
    let zeros = |slot: Slot| vec![0.0; slot.comps() * cells];
    let [z0, z1, z4, z5] = [Slot::V, Slot::T, Slot::Theta, Slot::Q].map(zeros);
    let zpsi = vec![0.0; cells];
    // G is linear in (F₀, F₁, F₄, F₅, ψ̇): precompute one vector per term
    let mut terms = Vec::new();
    for s in &spec.sources {
        let g = match s.slot {
            Slot::V => rs.adjust_rhs(&s.field, &z1, &z4, &z5, &zpsi)?,
            Slot::T => rs.adjust_rhs(&z0, &s.field, &z4, &z5, &zpsi)?,
            Slot::Theta => rs.adjust_rhs(&z0, &z1, &s.field, &z5, &zpsi)?,
            Slot::Q => rs.adjust_rhs(&z0, &z1, &z4, &s.field, &zpsi)?,
            Slot::E | Slot::H => {
                return Err(InputError("E/H sources have no reduced counterpart".into()))
            }
        };
        terms.push((s.profile, g));
    }
    if let Some(pd) = &spec.psi_dot {
        terms.push((pd.profile, rs.adjust_rhs(&z0, &z1, &z4, &z5, &pd.field)?));
    }
    if terms.is_empty() {
        return Ok(SourceTerm::Zero);
    }
    let dim = rs.layout().dim();
    Ok(SourceTerm::function(move |t| {
        let mut g = vec![0.0; dim];
        for (p, v) in &terms {
            let s = p.eval(t);
            if s != 0.0 {
                for (gi, vi) in g.iter_mut().zip(v) {
                    *gi += s * vi;
                }
            }
        }
        g
    }))
}

fn initial_state(layout: &StateLayout, spec: &SimulationSpec) -> Result<StateVector, InputError> {
    let mut u = StateVector::zeros(layout.clone());
    for (slot, values) in &spec.initial {
        let r = layout
            .range(*slot)
            .ok_or_else(|| InputError(format!("`{}` is not part of this system", slot.name())))?;
        for (dst, v) in u.values_mut()[r].iter_mut().zip(values) {
            *dst += v;
        }
    }
    Ok(u)
}

fn csv_header(uncertified: bool) -> String {
    let mut s = String::new();
    if uncertified {
        s.push_str("# UNCERTIFIED: well-posedness check skipped (--skip-check)\n");
    }
    s.push_str("step,time,energy,dissipation,source_work,balance_residual,solve_residual\n");
    s
}

pub fn format_energy_csv(log: &EnergyLog, uncertified: bool, failure: Option<&Error>) -> String {
    let mut s = csv_header(uncertified);
    for r in &log.rows {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.step,
            r.time,
            r.energy,
            r.dissipation,
            r.source_work,
            r.balance_residual,
            r.solve_residual
        );
    }
    if let Some(e) = failure {
        let step = log.rows.last().map_or(0, |r| r.step + 1);
        let _ = writeln!(
            s,
            "# SOLVER_FAILURE at step {step}: {e}; rows above are partial output"
        );
    }
    s
}

/// Integrates the configured system, writing the energy log and snapshots.
/// Refuses to run unless the check certifies, except with `--skip-check`.
pub fn cmd_simulate(spec: &SimulationSpec, o: &Overrides, out: &mut dyn Write) -> CmdResult {
    let schedule = spec
        .schedule
        .ok_or_else(|| InputError("simulate needs a [schedule] section".into()))?;
    let opts = check_options(spec, o)?;

    let model = match spec.mode {
        Mode::Full => Model::Full(DiscreteSystem::full(&spec.material, &spec.grid)?),
        Mode::Quasistatic => {
            let rs = assemble_reduced(&spec.material, &spec.grid)?;
            let sys = rs.discrete_system()?;
            Model::Reduced(Box::new(rs), sys)
        }
    };

    let mut outcome = Outcome::default();
    if !o.skip_check {
        let report = match &model {
            Model::Full(_) => full_report(spec, &opts)?,
            Model::Reduced(rs, _) => reduced_report(rs, spec, &opts)?,
        };
        emit_report(&report, spec, o, out)?;
        let verdict = report.verdict().expect("report verdicts are valid");
        outcome.report = Some(report);
        if verdict != Verdict::Certified {
            outcome.exit = Some(ExitCode::from_verdict(verdict));
            return Ok(outcome);
        }
    }

    let sys = model.system();
    let src = match &model {
        Model::Full(_) => SourceTerm::Channels(spec.sources.clone()),
        Model::Reduced(rs, _) => reduced_source(rs, spec)?,
    };
    let u0 = initial_state(&sys.layout, spec)?;
    ensure_out_dir(o)?;

    let stride = spec.output.snapshot_stride;
    let n = spec.grid.n();
    let mut snapshot_error: Option<String> = None;
    let mut snapshots = Vec::new();
    let observer = |step: usize, time: f64, u: &StateVector| -> evopiezo_core::Result<()> {
        if stride == 0 || !step.is_multiple_of(stride) || spec.output.snapshot_fields.is_empty() {
            return Ok(());
        }
        let res = write_step_snapshots(&model, spec, o, n, step, time, u);
        match res {
            Ok(mut paths) => {
                snapshots.append(&mut paths);
                Ok(())
            }
            Err(e) => {
                let msg = e.0.clone();
                snapshot_error = Some(e.0);
                Err(Error::InvalidArgument(msg))
            }
        }
    };
    let traj: Result<Trajectory, Error> =
        simulate(sys, &u0, &src, &schedule, spec.solver, observer);
    if let Some(e) = snapshot_error {
        return Err(InputError(e));
    }
    let traj = traj?;

    let log_path = out_path(o, &spec.output.energy_log);
    let csv = format_energy_csv(&traj.log, o.skip_check, traj.failure.as_ref());
    std::fs::write(&log_path, csv)
        .map_err(|e| InputError(format!("cannot write {}: {e}", log_path.display())))?;
    writeln!(
        out,
        "# simulated {} of {} steps, energy log {}",
        traj.log.rows.len() - 1,
        schedule.steps,
        log_path.display()
    )?;

    outcome.exit = Some(if traj.failure.is_some() {
        ExitCode::Solver
    } else {
        ExitCode::Success
    });
    outcome.log = Some(traj.log);
    outcome.energy_log_path = Some(log_path);
    outcome.snapshots = snapshots;
    Ok(outcome)
}

fn write_step_snapshots(
    model: &Model,
    spec: &SimulationSpec,
    o: &Overrides,
    n: [usize; 3],
    step: usize,
    time: f64,
    u: &StateVector,
) -> Result<Vec<PathBuf>, InputError> {
    let mut recon = None;
    let mut paths = Vec::new();
    for name in &spec.output.snapshot_fields {
        let (values, comps) = match (model, name.as_str()) {
            (Model::Reduced(rs, _), "E" | "phi") => {
                if recon.is_none() {
                    let psi = spec
                        .psi
                        .as_ref()
                        .map_or_else(|| vec![0.0; spec.grid.cells()], |p| p.eval(time));
                    recon = Some(rs.electric_field(u.values(), &psi)?);
                }
                let r = recon.as_ref().expect("just set");
                if name == "E" {
                    (r.e.clone(), 3)
                } else {
                    (r.phi.clone(), 1)
                }
            }
            _ => {
                let slot = Slot::from_name(name)
                    .ok_or_else(|| InputError(format!("unknown field {name}")))?;
                let r = u
                    .layout()
                    .range(slot)
                    .ok_or_else(|| InputError(format!("field {name} is not in this system")))?;
                (u.values()[r].to_vec(), slot.comps())
            }
        };
        let snap = Snapshot::new(name, n, comps, values).map_err(|e| InputError(e.to_string()))?;
        let path = out_path(o, &snapshot_file_name(name, step));
        write_snapshot(&snap, &path).map_err(|e| InputError(e.to_string()))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Convenience for tests and `main`: parse a file and report input errors.
pub fn load(path: &Path) -> Result<SimulationSpec, InputError> {
    crate::config::load_config(path).map_err(|e| InputError(e.to_string()))
}
