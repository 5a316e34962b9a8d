//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error,
//! 3 an experiment's own assertion failed.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::diagnostics::{DiagnosticsRecord, TrappingSide};
use crate::experiments::{self, ExperimentError, ExperimentKind, ExperimentSpec};
use crate::ground_state::{self, Quadrature};
use crate::integrator::{self, Flow, RecordOptions, RunState, RunStatus, Trajectory};
use crate::io::csv::{format_f64, format_opt, write_table};
use crate::io::{self, parse_config, Manifest, RunConfig, TimeSeriesWriter};
use crate::spectral::ZParameter;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;

/// Largest share of the S-accumulator allowed over the last quarter of a decay run.
pub const DECAY_TAIL_SHARE: f64 = 0.01;
/// `‖w(T)‖_{H¹}` bound for identical data in the weak-strong run.
pub const IDENTICAL_DATA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(
    name = "ecgl",
    version,
    about = "Energy-critical complex Ginzburg-Landau / NLS solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; overrides `experiment.jobs`.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Only errors on standard error, no summary on standard output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single trajectory from `amplitudes[0]` times the family profile at `z.theta`.
    Run,
    /// Dichotomy sweep over amplitudes and thetas.
    Sweep,
    /// Inviscid limit against the Schrödinger run.
    Inviscid,
    /// Long-time decay of a trapped datum.
    Decay,
    /// Weak-strong stability of two nearby Schrödinger runs.
    Gronwall,
    /// Print the ground-state thresholds.
    Thresholds,
    /// Continue a run from a checkpoint.
    Resume {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
}

enum Failure {
    Config(String),
    Assertion(String),
    Other(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidSpec(m) => Failure::Config(m),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<integrator::IntegratorError> for Failure {
    fn from(e: integrator::IntegratorError) -> Self {
        match e {
            integrator::IntegratorError::InvalidConfig(m) => Failure::Config(m),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
    started: Instant,
    command: &'static str,
}

impl Context {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn manifest(&self, outcome: Vec<(&str, String)>) -> Result<(), Failure> {
        Manifest {
            command: self.command.into(),
            wall_time: self.started.elapsed(),
            outcome: outcome
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            config: self.cfg.clone(),
        }
        .write(&self.out.join("manifest.toml"))?;
        Ok(())
    }

    fn spec(&self, kinds: &[ExperimentKind]) -> Result<ExperimentSpec, Failure> {
        let spec = self.cfg.experiment_spec();
        if !kinds.contains(&spec.kind) {
            return Err(Failure::Config(format!(
                "experiment.kind = {:?} does not match `{}`; expected one of {:?}",
                io::config::kind_name(spec.kind),
                self.command,
                kinds
                    .iter()
                    .map(|k| io::config::kind_name(*k))
                    .collect::<Vec<_>>()
            )));
        }
        Ok(spec)
    }
}

/// Parses `argv` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Assertion(m)) => {
            eprintln!("assertion failed: {m}");
            EXIT_ASSERTION
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            EXIT_FAILURE
        }
    }
}

fn load_config(common: &Common, required: bool) -> Result<Option<RunConfig>, Failure> {
    let Some(path) = &common.config else {
        return if required {
            Err(Failure::Config("--config PATH is required".into()))
        } else {
            Ok(None)
        };
    };
    let mut cfg = parse_config(path).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(dir) = &common.out {
        cfg.output.directory = dir.clone();
    }
    if let Some(j) = common.jobs {
        cfg.experiment.jobs = j;
    }
    Ok(Some(cfg))
}

fn dispatch(cli: Cli) -> Result<i32, Failure> {
    let started = Instant::now();
    if let Command::Thresholds = cli.command {
        let d = load_config(&cli.common, false)?.map_or(3, |c| c.grid.d);
        return thresholds(d, cli.common.quiet);
    }
    let cfg = load_config(&cli.common, true)?.expect("required");
    let command = match cli.command {
        Command::Run => "run",
        Command::Sweep => "sweep",
        Command::Inviscid => "inviscid",
        Command::Decay => "decay",
        Command::Gronwall => "gronwall",
        Command::Resume { .. } => "resume",
        Command::Thresholds => unreachable!(),
    };
    let out = cfg.output.directory.clone();
    fs::create_dir_all(&out)
        .map_err(|e| Failure::Other(format!("cannot create {}: {e}", out.display())))?;
    let ctx = Context {
        cfg,
        out,
        quiet: cli.common.quiet,
        started,
        command,
    };
    match cli.command {
        Command::Run => run_single(&ctx),
        Command::Resume { checkpoint } => resume(&ctx, &checkpoint),
        Command::Sweep => sweep(&ctx),
        Command::Inviscid => inviscid(&ctx),
        Command::Decay => decay(&ctx),
        Command::Gronwall => gronwall(&ctx),
        Command::Thresholds => unreachable!(),
    }
}

fn thresholds(d: usize, quiet: bool) -> Result<i32, Failure> {
    let refs = ground_state::compute_thresholds(d, Quadrature::default())
        .map_err(|e| Failure::Config(e.to_string()))?;
    if !quiet {
        println!("d = {}", refs.d);
        println!("grad_norm_sq_W = {:.12}", refs.grad_norm_sq_w);
        println!("potential_W = {:.12}", refs.potential_w);
        println!("energy_W = {:.12}", refs.energy_w);
        println!(
            "quadrature: {} panels x {} nodes, refinement change {:.3e}",
            refs.quadrature.panels, refs.quadrature.order, refs.quadrature.refinement_change
        );
    }
    Ok(EXIT_OK)
}

/// Streams records to `trajectory.csv` and writes `checkpoint.bin` on cadence.
fn observed_run(
    ctx: &Context,
    flow: &Flow,
    go: impl FnOnce(integrator::Observer<'_>) -> Result<Trajectory, integrator::IntegratorError>,
) -> Result<Trajectory, Failure> {
    let mut writer = TimeSeriesWriter::create(&ctx.out.join("trajectory.csv"))?;
    let ckpt_path = ctx.out.join("checkpoint.bin");
    let cadence = ctx.cfg.output.checkpoint_cadence;
    let mut last_ckpt = None::<u64>;
    let mut io_error: Option<String> = None;
    let mut observer = |rec: &DiagnosticsRecord, state: &RunState| {
        if io_error.is_some() {
            return;
        }
        if let Err(e) = writer.write(rec) {
            io_error = Some(e.to_string());
            return;
        }
        let due = cadence > 0 && last_ckpt.is_none_or(|s| state.step_index >= s + cadence);
        if due && state.status.is_running() {
            match integrator::write_checkpoint(&ckpt_path, state, flow) {
                Ok(()) => last_ckpt = Some(state.step_index),
                Err(e) => io_error = Some(e.to_string()),
            }
        }
    };
    let traj = go(&mut observer)?;
    if let Some(e) = io_error {
        return Err(Failure::Other(e));
    }
    writer.finish()?;
    integrator::write_checkpoint(&ctx.out.join("final_state.bin"), &traj.state, flow)?;
    Ok(traj)
}

fn record_options(cfg: &RunConfig) -> RecordOptions {
    RecordOptions {
        every_steps: cfg.output.record_cadence,
        bubble: cfg.output.bubble,
        time_derivative: false,
    }
}

fn report_trajectory(ctx: &Context, traj: &Trajectory) -> Result<i32, Failure> {
    let mut outcome = vec![
        ("status", traj.state.status.label().to_string()),
        ("t_final", format_f64(traj.state.t)),
        ("steps", traj.state.step_index.to_string()),
        ("rejected_steps", traj.rejected_steps.to_string()),
        ("energy_violations", traj.energy_violations.to_string()),
    ];
    if let RunStatus::BlownUp { t_estimate } = traj.state.status {
        outcome.push(("t_event", format_f64(t_estimate)));
        let t: Vec<f64> = traj.records.iter().map(|r| r.t).collect();
        let m: Vec<f64> = traj.records.iter().map(|r| r.mass).collect();
        if let Ok(est) = integrator::detect_blowup_time(&t, &m) {
            outcome.push(("t_extrapolated", format_opt(est.t_estimate)));
        }
    }
    ctx.say(format!(
        "{} at t = {:.6} after {} steps ({} records)",
        traj.state.status.label(),
        traj.state.t,
        traj.state.step_index,
        traj.records.len()
    ));
    ctx.manifest(outcome)?;
    Ok(match traj.state.status {
        RunStatus::StepFailure { step_index } => {
            eprintln!("step {step_index} produced non-finite values");
            EXIT_FAILURE
        }
        _ => EXIT_OK,
    })
}

fn run_single(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.cfg;
    let grid = cfg
        .grid
        .build()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let u0 = cfg
        .experiment
        .family
        .datum(&grid, cfg.experiment.amplitudes[0])?;
    let flow = Flow::new(ZParameter::new(cfg.theta).map_err(|e| Failure::Config(e.to_string()))?);
    let opts = record_options(cfg);
    let traj = observed_run(ctx, &flow, |obs| {
        integrator::integrate(&u0, &flow, &cfg.stepper, &opts, Some(obs))
    })?;
    report_trajectory(ctx, &traj)
}

fn resume(ctx: &Context, path: &Path) -> Result<i32, Failure> {
    let ck = integrator::read_checkpoint(path)?;
    let flow = ck.flow;
    if (flow.z.theta() - ctx.cfg.theta).abs() > 0.0 {
        eprintln!(
            "note: checkpoint theta {} overrides configured theta {}",
            flow.z.theta(),
            ctx.cfg.theta
        );
    }
    let opts = record_options(&ctx.cfg);
    let traj = observed_run(ctx, &flow, |obs| {
        integrator::integrate_from(ck.state, &flow, &ctx.cfg.stepper, &opts, Some(obs))
    })?;
    report_trajectory(ctx, &traj)
}

fn sweep(ctx: &Context) -> Result<i32, Failure> {
    let spec = ctx.spec(&[
        ExperimentKind::DichotomySweep,
        ExperimentKind::TrappingCheck,
    ])?;
    let result = experiments::run_dichotomy_sweep(&spec)?;
    let cells = ctx.out.join("cells");
    fs::create_dir_all(&cells)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, row) in result.rows.iter().enumerate() {
        let file = format!("cell_{i:03}.csv");
        io::write_time_series(&cells.join(&file), &row.records)?;
        let side = match row.side {
            Some(TrappingSide::Subcritical) => "subcritical",
            Some(TrappingSide::Supercritical) => "supercritical",
            None => "unclassified",
        };
        let trapping_ok = row.trapping.as_ref().is_none_or(|t| t.holds());
        let virial_ok = row.side != Some(TrappingSide::Supercritical)
            || row.measured_delta3().is_some_and(|d| d > 0.0);
        let label = format!(
            "a = {}, theta = {} ({side}, {})",
            row.amplitude,
            row.theta,
            row.status.label()
        );
        if row.misclassified {
            failures.push(format!(
                "{label}: misclassified, expected {}",
                row.expected_status().unwrap_or("-")
            ));
        }
        if row.trusted && !trapping_ok {
            let v = row
                .trapping
                .as_ref()
                .map(|t| t.violations.join("; "))
                .unwrap_or_default();
            failures.push(format!("{label}: trapping violated: {v}"));
        }
        if row.trusted && !virial_ok {
            failures.push(format!("{label}: no positive virial floor"));
        }
        rows.push(vec![
            format_f64(row.amplitude),
            format_f64(row.theta),
            format_f64(row.energy_ratio),
            format_f64(row.kinetic_ratio),
            side.to_string(),
            row.status.label().to_string(),
            format_opt(row.t_event),
            row.trusted.to_string(),
            row.misclassified.to_string(),
            trapping_ok.to_string(),
            format_f64(row.virial_floor),
            format_opt(row.measured_delta3()),
            file,
            format!("\"{}\"", row.trust_note),
        ]);
        ctx.say(format!(
            "{label}: E/E(W) = {:.4}, kinetic/|grad W|^2 = {:.4}",
            row.energy_ratio, row.kinetic_ratio
        ));
    }
    write_table(
        &ctx.out.join("sweep.csv"),
        &[
            "amplitude",
            "theta",
            "energy_ratio",
            "kinetic_ratio",
            "side",
            "status",
            "t_event",
            "trusted",
            "misclassified",
            "trapping_holds",
            "virial_floor",
            "delta3",
            "series",
            "trust_note",
        ],
        &rows,
    )?;
    ctx.manifest(vec![
        ("cells", result.rows.len().to_string()),
        ("misclassified", result.misclassified().len().to_string()),
        ("failures", failures.len().to_string()),
    ])?;
    if failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(Failure::Assertion(failures.join("\n")))
    }
}

fn inviscid(ctx: &Context) -> Result<i32, Failure> {
    let spec = ctx.spec(&[ExperimentKind::InviscidLimit])?;
    let table = experiments::run_inviscid_limit(&spec)?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            ctx.say(format!("theta = {:.6}: err = {:.6e}", r.theta, r.err_l2));
            [
                r.theta,
                r.cos_theta,
                r.err_l2,
                r.err_h1,
                r.defect_estimate,
                r.energy_final,
            ]
            .iter()
            .map(|&v| format_f64(v))
            .collect()
        })
        .collect();
    write_table(
        &ctx.out.join("inviscid.csv"),
        &[
            "theta",
            "cos_theta",
            "err_l2",
            "err_h1",
            "defect_estimate",
            "energy_final",
        ],
        &rows,
    )?;
    ctx.manifest(vec![
        ("monotone", table.monotone().to_string()),
        (
            "energy_inequality",
            table.energy_inequality_holds().to_string(),
        ),
        ("slope", format_opt(table.slope)),
        ("nls_energy_drift", format_f64(table.nls_energy_drift)),
    ])?;
    let mut failures = Vec::new();
    if !table.monotone() {
        failures.push("error is not decreasing along the theta list");
    }
    if !table.energy_inequality_holds() {
        failures.push("a member ended above the initial energy");
    }
    if failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(Failure::Assertion(failures.join("; ")))
    }
}

fn decay(ctx: &Context) -> Result<i32, Failure> {
    let spec = ctx.spec(&[ExperimentKind::DecayStudy])?;
    let report = experiments::run_decay_study(&spec).map_err(|e| match e {
        ExperimentError::Precondition(m) => Failure::Config(m),
        other => other.into(),
    })?;
    io::write_time_series(&ctx.out.join("decay.csv"), &report.records)?;
    ctx.say(format!(
        "{} at t = {:.4}: |grad u| = {:.3e}, S = {:.6e}, last-quarter share {:.3e}",
        report.status.label(),
        report.records.last().map_or(0.0, |r| r.t),
        report.final_h1,
        report.s_total,
        report.s_final_quarter_fraction
    ));
    ctx.manifest(vec![
        ("status", report.status.label().into()),
        ("conclusive", report.conclusive.to_string()),
        ("s_total", format_f64(report.s_total)),
        (
            "s_final_quarter_fraction",
            format_f64(report.s_final_quarter_fraction),
        ),
        ("late_decay_rate", format_opt(report.late_decay_rate)),
    ])?;
    if !report.decayed {
        return Err(Failure::Assertion(format!(
            "no decay within the horizon ({}, not conclusive)",
            report.status.label()
        )));
    }
    if report.s_final_quarter_fraction >= DECAY_TAIL_SHARE {
        return Err(Failure::Assertion(format!(
            "S-accumulator still growing: {:.3e} of the total in the last quarter",
            report.s_final_quarter_fraction
        )));
    }
    Ok(EXIT_OK)
}

fn gronwall(ctx: &Context) -> Result<i32, Failure> {
    let spec = ctx.spec(&[ExperimentKind::WeakStrongGronwall])?;
    let report = experiments::run_weak_strong_gronwall(&spec).map_err(|e| match e {
        ExperimentError::Precondition(m) => Failure::Config(m),
        other => other.into(),
    })?;
    let w0 = report.w_h1_sq[0];
    let rows: Vec<Vec<String>> = report
        .times
        .iter()
        .zip(&report.w_h1_sq)
        .map(|(&t, &w)| {
            vec![
                format_f64(t),
                format_f64(w),
                format_opt((w0 > 0.0).then(|| w / w0)),
            ]
        })
        .collect();
    write_table(
        &ctx.out.join("gronwall.csv"),
        &["t", "w_h1_sq", "ratio"],
        &rows,
    )?;
    ctx.say(format!(
        "epsilon = {:e}: |w(T)|_H1 = {:.6e}, C = {}",
        report.epsilon,
        report.final_w_h1,
        format_opt(report.c_hat)
    ));
    ctx.manifest(vec![
        ("final_w_h1", format_f64(report.final_w_h1)),
        ("c_hat", format_opt(report.c_hat)),
        ("growth_rate", format_opt(report.growth_rate)),
        ("within_hypotheses", report.within_hypotheses.to_string()),
    ])?;
    match report.c_hat {
        None if report.final_w_h1 > IDENTICAL_DATA_TOLERANCE => Err(Failure::Assertion(format!(
            "identical data separated to {:.3e}",
            report.final_w_h1
        ))),
        Some(c) if !experiments::gronwall_envelope_holds(&report, c) => Err(Failure::Assertion(
            "difference escaped its exponential envelope".into(),
        )),
        _ => Ok(EXIT_OK),
    }
}
