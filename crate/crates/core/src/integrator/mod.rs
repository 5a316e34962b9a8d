//! Strang splitting `S(dt/2) N(dt) S(dt/2)` with the exact linear semigroup
//! and the exact pointwise solution of `u' = z c |u|^q u`.
//!
//! Between steps the state is held as spectral coefficients, so a step costs
//! one inverse and one forward transform. Runs on `θ < π/2` pay one extra
//! inverse transform per step for the energy check.

mod blowup;
mod checkpoint;

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::diagnostics::{self, bubble_fit, DiagnosticsRecord, SAccumulator};
use crate::ground_state::{self, critical_exponent, nonlinearity_power};
use crate::spectral::{self, ComplexField, SemigroupMultiplier, Space, SpectralError, ZParameter};

pub use blowup::{detect_blowup_time, BlowupEstimate};
pub use checkpoint::{
    read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("nonlinear substep reaches the pointwise blow-up time {t_star} within the step")]
    BlowUpInSubstep { t_star: f64 },
    #[error("invalid stepper configuration: {0}")]
    InvalidConfig(String),
    #[error("state is not running ({0:?})")]
    NotRunning(RunStatus),
    #[error("initial datum is not finite")]
    NonFiniteDatum,
    #[error("history has {0} samples, need at least 10")]
    InsufficientHistory(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// The right-hand side `z(Δu + c|u|^{4/(d-2)}u)`.
///
/// `coupling = 1` is the focusing equation, `0` the linear flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flow {
    pub z: ZParameter,
    pub coupling: f64,
}

impl Flow {
    pub fn new(z: ZParameter) -> Self {
        Self { z, coupling: 1.0 }
    }

    pub fn linear(z: ZParameter) -> Self {
        Self { z, coupling: 0.0 }
    }

    /// `kinetic/2 - c (d-2)/(2d) potential`
    pub fn energy(&self, d: usize, kinetic: f64, potential: f64) -> f64 {
        let df = d as f64;
        0.5 * kinetic - self.coupling * (df - 2.0) / (2.0 * df) * potential
    }

    /// `kinetic - c potential`
    pub fn k_functional(&self, kinetic: f64, potential: f64) -> f64 {
        kinetic - self.coupling * potential
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub dt_min: f64,
    pub blowup_sup_threshold: f64,
    /// Multiple of `‖∇W‖²`.
    pub blowup_kinetic_factor: f64,
    pub decay_h1_threshold: f64,
    pub max_time: f64,
    /// Relative per-step energy increase tolerated before halving dt.
    pub energy_tolerance: f64,
    /// Clean steps before dt is doubled back toward `dt`.
    pub grow_after: u64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            dt_min: 1e-7,
            blowup_sup_threshold: 1e6,
            blowup_kinetic_factor: 25.0,
            decay_h1_threshold: 1e-6,
            max_time: 20.0,
            energy_tolerance: 1e-8,
            grow_after: 50,
        }
    }
}

impl StepperConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = |name: &str, v: f64, out: &mut Vec<String>| {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be positive and finite, got {v}"));
            }
        };
        positive("dt", self.dt, &mut out);
        positive("dt_min", self.dt_min, &mut out);
        positive("blowup_sup_threshold", self.blowup_sup_threshold, &mut out);
        positive(
            "blowup_kinetic_factor",
            self.blowup_kinetic_factor,
            &mut out,
        );
        positive("decay_h1_threshold", self.decay_h1_threshold, &mut out);
        positive("max_time", self.max_time, &mut out);
        if !(self.energy_tolerance >= 0.0) {
            out.push(format!(
                "energy_tolerance must be non-negative, got {}",
                self.energy_tolerance
            ));
        }
        if !(self.dt > self.dt_min) {
            out.push(format!(
                "dt ({}) must exceed dt_min ({})",
                self.dt, self.dt_min
            ));
        }
        if self.grow_after == 0 {
            out.push("grow_after must be at least 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(IntegratorError::InvalidConfig(v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Running,
    Decayed,
    /// Time at which a blow-up criterion fired.
    BlownUp {
        t_estimate: f64,
    },
    MaxTimeReached,
    StepFailure {
        step_index: u64,
    },
}

impl RunStatus {
    pub fn is_running(&self) -> bool {
        matches!(self, RunStatus::Running)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Running => "Running",
            RunStatus::Decayed => "Decayed",
            RunStatus::BlownUp { .. } => "BlownUp",
            RunStatus::MaxTimeReached => "MaxTimeReached",
            RunStatus::StepFailure { .. } => "StepFailure",
        }
    }
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone)]
pub struct RunState {
    pub t: f64,
    /// Spectral coefficients between steps.
    pub u: ComplexField,
    pub step_index: u64,
    pub status: RunStatus,
    /// Current (possibly reduced) step.
    pub dt: f64,
    pub clean_steps: u64,
    /// Accumulator as of the last record, if any.
    pub accumulator: Option<SAccumulator>,
}

impl RunState {
    pub fn new(u0: &ComplexField, dt: f64) -> Self {
        Self {
            t: 0.0,
            u: u0.to_space(Space::Spectral),
            step_index: 0,
            status: RunStatus::Running,
            dt,
            clean_steps: 0,
            accumulator: None,
        }
    }

    pub fn physical(&self) -> ComplexField {
        self.u.to_space(Space::Physical)
    }
}

/// What gets recorded and how often.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordOptions {
    /// Record every this many accepted steps, plus the start and the end.
    pub every_steps: u64,
    pub bubble: bool,
    /// Evaluate `‖∂_t u‖²` at each record for the dissipation identity.
    pub time_derivative: bool,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self {
            every_steps: 10,
            bubble: false,
            time_derivative: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub state: RunState,
    pub records: Vec<DiagnosticsRecord>,
    /// `‖∂_t u‖²` per record, empty unless requested.
    pub ut_norm_sq: Vec<f64>,
    pub rejected_steps: u64,
    /// Accepted steps whose energy rose above tolerance at `dt_min`.
    pub energy_violations: u64,
    /// Largest accepted per-step `(E_new - E_old)/|E_old|`; `θ < π/2` only.
    pub max_energy_increase: f64,
    /// Largest per-step `|ΔM|/M`.
    pub max_mass_change: f64,
}

/// Applies the exact solution of `u' = z c |u|^q u` over `dt` to every sample.
pub fn nonlinear_substep(
    u: &ComplexField,
    flow: &Flow,
    dt: f64,
) -> Result<ComplexField, IntegratorError> {
    let mut out = u.to_space(Space::Physical);
    nonlinear_in_place(out.values_mut(), flow, u.grid().dim(), dt)?;
    Ok(out)
}

fn modulus_power(r2: f64, d: usize) -> f64 {
    match d {
        3 => r2 * r2,
        4 => r2,
        _ => r2.powf(nonlinearity_power(d) / 2.0),
    }
}

fn nonlinear_in_place(
    values: &mut [Complex64],
    flow: &Flow,
    d: usize,
    dt: f64,
) -> Result<(), IntegratorError> {
    let c = flow.coupling;
    if c == 0.0 || dt == 0.0 {
        return Ok(());
    }
    let q = nonlinearity_power(d);
    let (re, im) = (flow.z.re(), flow.z.im());
    if re > 0.0 && c > 0.0 {
        let peak = values
            .par_iter()
            .map(|v| modulus_power(v.norm_sqr(), d))
            .reduce(|| 0.0, f64::max);
        if q * c * re * peak * dt >= 1.0 {
            return Err(IntegratorError::BlowUpInSubstep {
                t_star: 1.0 / (q * c * re * peak),
            });
        }
    }
    values.par_iter_mut().for_each(|v| {
        let r2 = v.norm_sqr();
        if r2 == 0.0 {
            return;
        }
        let rq = modulus_power(r2, d);
        let factor = if re > 0.0 {
            let log_ratio = -(-q * c * re * rq * dt).ln_1p() / q;
            Complex64::from_polar(log_ratio.exp(), im / re * log_ratio)
        } else {
            Complex64::from_polar(1.0, im * c * rq * dt)
        };
        *v *= factor;
    });
    Ok(())
}

/// One fixed-size step of the splitting, ignoring events and adaptivity.
pub fn strang_step(state: &RunState, flow: &Flow, dt: f64) -> Result<RunState, IntegratorError> {
    if !state.status.is_running() {
        return Err(IntegratorError::NotRunning(state.status));
    }
    let half = SemigroupMultiplier::new(state.u.grid(), flow.z, 0.5 * dt)?;
    let mut u = state.u.to_space(Space::Spectral);
    split_step(&mut u, flow, dt, &half)?;
    let mut next = state.clone();
    next.u = u;
    next.t += dt;
    next.step_index += 1;
    Ok(next)
}

/// In-place step on spectral coefficients; returns the sup of the
/// post-nonlinear physical intermediate.
fn split_step(
    u: &mut ComplexField,
    flow: &Flow,
    dt: f64,
    half: &SemigroupMultiplier,
) -> Result<f64, IntegratorError> {
    let d = u.grid().dim();
    half.apply_spectral(u)?;
    u.inverse_in_place()?;
    nonlinear_in_place(u.values_mut(), flow, d, dt)?;
    let sup = u.sup_abs();
    u.forward_in_place()?;
    half.apply_spectral(u)?;
    Ok(sup)
}

/// Half-step multipliers keyed by the bit pattern of dt.
struct MultiplierCache {
    map: HashMap<u64, SemigroupMultiplier>,
}

impl MultiplierCache {
    const CAPACITY: usize = 12;

    fn get(
        &mut self,
        u: &ComplexField,
        z: ZParameter,
        dt: f64,
    ) -> Result<&SemigroupMultiplier, SpectralError> {
        let key = dt.to_bits();
        if !self.map.contains_key(&key) {
            if self.map.len() >= Self::CAPACITY {
                self.map.clear();
            }
            self.map
                .insert(key, SemigroupMultiplier::new(u.grid(), z, 0.5 * dt)?);
        }
        Ok(&self.map[&key])
    }
}

/// Fixed-step splitting with cached multipliers, for callers that drive
/// several runs in lockstep.
pub struct Stepper {
    flow: Flow,
    cache: MultiplierCache,
}

impl Stepper {
    pub fn new(flow: Flow) -> Self {
        Self {
            flow,
            cache: MultiplierCache {
                map: HashMap::new(),
            },
        }
    }

    /// Advances `u` (converted to spectral form) by `dt`; returns the sup of
    /// the post-nonlinear intermediate.
    pub fn step(&mut self, u: &mut ComplexField, dt: f64) -> Result<f64, IntegratorError> {
        u.convert_to(Space::Spectral);
        let half = self.cache.get(u, self.flow.z, dt)?;
        split_step(u, &self.flow, dt, half)
    }
}

/// Observer called at every record with the record and the current state.
pub type Observer<'a> = &'a mut dyn FnMut(&DiagnosticsRecord, &RunState);

/// Runs from `u0` at `t = 0` until a terminal status.
pub fn integrate(
    u0: &ComplexField,
    flow: &Flow,
    cfg: &StepperConfig,
    opts: &RecordOptions,
    observer: Option<Observer<'_>>,
) -> Result<Trajectory, IntegratorError> {
    if !u0.is_finite() {
        return Err(IntegratorError::NonFiniteDatum);
    }
    integrate_from(RunState::new(u0, cfg.dt), flow, cfg, opts, observer)
}

struct Recorder<'a, 'b> {
    flow: Flow,
    opts: &'a RecordOptions,
    records: Vec<DiagnosticsRecord>,
    ut_norm_sq: Vec<f64>,
    observer: Option<Observer<'b>>,
}

impl Recorder<'_, '_> {
    fn record(&mut self, state: &mut RunState, physical: &ComplexField) {
        let mut rec = diagnostics::record_parts(state.t, physical, &state.u, state.accumulator);
        if self.opts.bubble {
            rec.bubble = bubble_fit(physical);
        }
        if self.opts.time_derivative {
            self.ut_norm_sq
                .push(diagnostics::time_derivative_norm_sq(physical, &self.flow));
        }
        state.accumulator = Some(SAccumulator::from_record(&rec));
        if let Some(obs) = self.observer.as_mut() {
            obs(&rec, state);
        }
        self.records.push(rec);
    }
}

/// Continues a run from `state` (fresh or restored) until a terminal status.
///
/// A record is written at the starting state only when `state.step_index == 0`.
pub fn integrate_from(
    mut state: RunState,
    flow: &Flow,
    cfg: &StepperConfig,
    opts: &RecordOptions,
    observer: Option<Observer<'_>>,
) -> Result<Trajectory, IntegratorError> {
    cfg.validate()?;
    if !state.status.is_running() {
        return Err(IntegratorError::NotRunning(state.status));
    }
    if opts.every_steps == 0 {
        return Err(IntegratorError::InvalidConfig(
            "record cadence must be at least 1".into(),
        ));
    }
    state.u.convert_to(Space::Spectral);
    let d = state.u.grid().dim();
    let g = ground_state::thresholds(d)
        .map_err(|e| IntegratorError::InvalidConfig(e.to_string()))?
        .grad_norm_sq_w;
    let kinetic_limit = cfg.blowup_kinetic_factor * g;
    let p = critical_exponent(d);
    let check_energy = flow.z.re() > 0.0 && cfg.energy_tolerance.is_finite();

    let mut rec = Recorder {
        flow: *flow,
        opts,
        records: Vec::new(),
        ut_norm_sq: Vec::new(),
        observer,
    };
    let mut traj_stats = (0u64, 0u64, 0.0f64, 0.0f64);
    let mut physical = state.physical();
    if state.step_index == 0 && state.status.is_running() {
        rec.record(&mut state, &physical);
    }
    let mut energy = flow.energy(
        d,
        spectral::grad_norm_sq(&state.u),
        spectral::lebesgue_integral(&physical, p),
    );
    let mut mass = spectral::mass(&state.u);
    let mut cache = MultiplierCache {
        map: HashMap::new(),
    };
    let horizon_eps = 1e-12 * cfg.max_time.max(1.0);

    while state.status.is_running() {
        if state.t >= cfg.max_time - horizon_eps {
            state.status = RunStatus::MaxTimeReached;
            break;
        }
        let dt = state.dt.min(cfg.max_time - state.t);
        let mut trial = state.u.clone();
        let half = cache.get(&trial, flow.z, dt)?;
        let sup = match split_step(&mut trial, flow, dt, half) {
            Ok(sup) => sup,
            Err(IntegratorError::BlowUpInSubstep { .. }) => {
                traj_stats.0 += 1;
                if state.dt * 0.5 >= cfg.dt_min {
                    state.dt *= 0.5;
                    state.clean_steps = 0;
                    continue;
                }
                state.status = RunStatus::BlownUp {
                    t_estimate: state.t,
                };
                break;
            }
            Err(e) => return Err(e),
        };
        let kinetic = spectral::grad_norm_sq(&trial);
        let new_mass = spectral::mass(&trial);
        let mut new_physical = None;
        let mut new_energy = energy;
        if check_energy && new_mass.is_finite() {
            let phys = trial.to_space(Space::Physical);
            new_energy = flow.energy(d, kinetic, spectral::lebesgue_integral(&phys, p));
            new_physical = Some(phys);
            let increase = (new_energy - energy) / energy.abs().max(f64::MIN_POSITIVE);
            if new_energy - energy > cfg.energy_tolerance * energy.abs() {
                if state.dt * 0.5 >= cfg.dt_min {
                    traj_stats.0 += 1;
                    state.dt *= 0.5;
                    state.clean_steps = 0;
                    continue;
                }
                traj_stats.1 += 1;
            }
            traj_stats.2 = traj_stats.2.max(increase);
        }
        if mass > 0.0 {
            traj_stats.3 = traj_stats.3.max((new_mass - mass).abs() / mass);
        }

        state.u = trial;
        state.t += dt;
        state.step_index += 1;
        state.clean_steps += 1;
        if state.clean_steps >= cfg.grow_after && state.dt < cfg.dt {
            state.dt = (2.0 * state.dt).min(cfg.dt);
            state.clean_steps = 0;
        }
        energy = new_energy;
        mass = new_mass;

        let sup = new_physical.as_ref().map_or(sup, |p| p.sup_abs().max(sup));
        state.status = if !(kinetic.is_finite() && new_mass.is_finite() && sup.is_finite()) {
            RunStatus::StepFailure {
                step_index: state.step_index,
            }
        } else if kinetic > kinetic_limit || sup > cfg.blowup_sup_threshold {
            RunStatus::BlownUp {
                t_estimate: state.t,
            }
        } else if kinetic.sqrt() < cfg.decay_h1_threshold {
            RunStatus::Decayed
        } else if state.t >= cfg.max_time - horizon_eps {
            RunStatus::MaxTimeReached
        } else {
            RunStatus::Running
        };
        let terminal = !state.status.is_running();
        let failed = matches!(state.status, RunStatus::StepFailure { .. });
        if (terminal && !failed) || state.step_index.is_multiple_of(opts.every_steps) {
            physical = new_physical.unwrap_or_else(|| state.physical());
            rec.record(&mut state, &physical);
        }
    }

    Ok(Trajectory {
        state,
        records: rec.records,
        ut_norm_sq: rec.ut_norm_sq,
        rejected_steps: traj_stats.0,
        energy_violations: traj_stats.1,
        max_energy_increase: traj_stats.2,
        max_mass_change: traj_stats.3,
    })
}
