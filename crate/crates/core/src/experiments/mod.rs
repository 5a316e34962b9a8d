//! Multi-run studies: dichotomy sweeps with trapping checks, the inviscid
//! limit, long-time decay, and weak-strong stability.

mod gronwall;
mod inviscid;

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::diagnostics::{
    self, trapping_report, DiagnosticsError, DiagnosticsRecord, TrappingReport, TrappingSide,
};
use crate::ground_state::{self, GroundStateError, GroundStateRefs};
use crate::integrator::{
    self, Flow, IntegratorError, RecordOptions, RunStatus, StepperConfig, Trajectory,
};
use crate::spectral::{self, ComplexField, Grid, SpectralError, ZParameter};

pub use gronwall::{
    gronwall_envelope_holds, run_weak_strong_gronwall, smooth_noise, GronwallReport,
};
pub use inviscid::{run_inviscid_limit, InviscidRow, InviscidTable};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("run at theta = {theta} ended {status:?} instead of reaching the horizon")]
    MemberRunFailed { theta: f64, status: RunStatus },
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    GroundState(#[from] GroundStateError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    DichotomySweep,
    InviscidLimit,
    DecayStudy,
    WeakStrongGronwall,
    TrappingCheck,
}

/// Shapes multiplied by the amplitude `a` to form the datum.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialFamily {
    /// `W` cut off smoothly between `cutoff` and `cutoff + taper_width`.
    TruncatedW { cutoff: f64, taper_width: f64 },
    /// `e^{-|x|²/(4σ)}`
    Gaussian { sigma: f64 },
    /// `e^{-ρ²/(4σ)}` with `ρ` the distance to the circle of the given radius
    /// in the first coordinate plane. Not radial.
    Ring { radius: f64, sigma: f64 },
}

impl InitialFamily {
    pub fn profile(&self, grid: &Grid) -> Result<ComplexField, ExperimentError> {
        Ok(match *self {
            InitialFamily::TruncatedW {
                cutoff,
                taper_width,
            } => ground_state::truncated_w(grid, cutoff, taper_width)?,
            InitialFamily::Gaussian { sigma } => {
                if !(sigma > 0.0) {
                    return Err(ExperimentError::InvalidSpec(format!(
                        "gaussian sigma must be positive, got {sigma}"
                    )));
                }
                ComplexField::from_fn(grid, |x| {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    Complex64::new((-r2 / (4.0 * sigma)).exp(), 0.0)
                })
            }
            InitialFamily::Ring { radius, sigma } => {
                if !(sigma > 0.0 && radius >= 0.0) {
                    return Err(ExperimentError::InvalidSpec(format!(
                        "ring needs radius >= 0 and sigma > 0, got {radius}, {sigma}"
                    )));
                }
                ComplexField::from_fn(grid, |x| {
                    let planar = (x[0] * x[0] + x[1] * x[1]).sqrt() - radius;
                    let rest: f64 = x[2..].iter().map(|v| v * v).sum();
                    Complex64::new((-(planar * planar + rest) / (4.0 * sigma)).exp(), 0.0)
                })
            }
        })
    }

    pub fn datum(&self, grid: &Grid, amplitude: f64) -> Result<ComplexField, ExperimentError> {
        Ok(self.profile(grid)?.scaled(amplitude))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    pub n_per_axis: usize,
    pub half_length: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, SpectralError> {
        Grid::new(self.d, self.n_per_axis, self.half_length)
    }
}

/// Resolution limits on the initial datum; a cell failing them is untrusted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustLimits {
    pub boundary_mass_fraction: f64,
    pub spectral_tail_fraction: f64,
}

impl Default for TrustLimits {
    fn default() -> Self {
        Self {
            boundary_mass_fraction: 1e-6,
            spectral_tail_fraction: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub initial_family: InitialFamily,
    pub amplitudes: Vec<f64>,
    pub thetas: Vec<f64>,
    pub grid: GridSpec,
    pub stepper: StepperConfig,
    pub seed: u64,
    pub record_every: u64,
    /// Perturbation size for the weak-strong experiment.
    pub epsilon: f64,
    /// Final time for the inviscid limit and weak-strong experiments.
    pub horizon: f64,
    pub trust: TrustLimits,
    /// Worker threads for independent runs; 0 uses the global pool.
    pub jobs: usize,
}

impl ExperimentSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.amplitudes.is_empty() {
            out.push("amplitude list is empty".into());
        }
        if self.amplitudes.iter().any(|a| !a.is_finite()) {
            out.push("amplitudes must be finite".into());
        }
        if self.thetas.is_empty() {
            out.push("theta list is empty".into());
        }
        for &t in &self.thetas {
            if !(t > 0.0 && t <= FRAC_PI_2) {
                out.push(format!("theta {t} outside (0, pi/2]"));
            }
        }
        if self.record_every == 0 {
            out.push("record_every must be at least 1".into());
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            out.push(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            out.push(format!("horizon must be positive, got {}", self.horizon));
        }
        if let Err(e) = self.grid.build() {
            out.push(e.to_string());
        }
        out.extend(self.stepper.violations());
        out
    }

    fn validate(&self, expected: &[ExperimentKind]) -> Result<(), ExperimentError> {
        let mut v = self.violations();
        if !expected.contains(&self.kind) {
            v.push(format!(
                "experiment kind {:?} does not match the requested study",
                self.kind
            ));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::InvalidSpec(v.join("; ")))
        }
    }

    fn record_options(&self) -> RecordOptions {
        RecordOptions {
            every_steps: self.record_every,
            ..RecordOptions::default()
        }
    }

    fn pool(&self) -> Option<rayon::ThreadPool> {
        (self.jobs > 0).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.jobs)
                .build()
                .expect("thread pool")
        })
    }
}

/// One `(a, θ)` cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub amplitude: f64,
    pub theta: f64,
    /// `E(u₀)/E(W)`
    pub energy_ratio: f64,
    /// `‖∇u₀‖²/‖∇W‖²`
    pub kinetic_ratio: f64,
    /// Side of the threshold when `E(u₀) < E(W)`; `None` leaves the cell unclassified.
    pub side: Option<TrappingSide>,
    pub status: RunStatus,
    pub t_event: Option<f64>,
    pub trusted: bool,
    pub trust_note: String,
    pub trapping: Option<TrappingReport>,
    /// `min_t (-Re z K)` over the run, the measured floor of `I''`.
    pub virial_floor: f64,
    pub misclassified: bool,
    pub records: Vec<DiagnosticsRecord>,
}

impl SweepRow {
    pub fn expected_status(&self) -> Option<&'static str> {
        match self.side {
            Some(TrappingSide::Subcritical) => Some("Decayed"),
            Some(TrappingSide::Supercritical) => Some("BlownUp"),
            None => None,
        }
    }

    pub fn measured_delta_bar(&self) -> Option<f64> {
        self.trapping
            .as_ref()
            .filter(|t| t.side == TrappingSide::Subcritical)
            .map(|t| t.measured_delta_bar)
    }

    pub fn measured_delta3(&self) -> Option<f64> {
        self.trapping.as_ref().and_then(|t| t.measured_delta3)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub refs: GroundStateRefs,
}

impl SweepResult {
    pub fn misclassified(&self) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.misclassified).collect()
    }
}

/// Relative distance from the kinetic threshold below which a cell is treated
/// as sitting on it.
const THRESHOLD_BAND: f64 = 1e-6;

fn run_cell(
    spec: &ExperimentSpec,
    grid: &Grid,
    refs: &GroundStateRefs,
    amplitude: f64,
    theta: f64,
) -> Result<SweepRow, ExperimentError> {
    let u0 = spec.initial_family.datum(grid, amplitude)?;
    let z = ZParameter::new(theta)?;
    let first = diagnostics::record(&u0, 0.0, None);
    let energy_ratio = first.energy / refs.energy_w;
    let kinetic_ratio = first.kinetic / refs.grad_norm_sq_w;
    if first.energy < refs.energy_w && (kinetic_ratio - 1.0).abs() < THRESHOLD_BAND {
        return Err(ExperimentError::Precondition(format!(
            "cell a={amplitude} sits on the kinetic threshold with E < E(W)"
        )));
    }
    let side = (first.energy < refs.energy_w).then_some(if kinetic_ratio < 1.0 {
        TrappingSide::Subcritical
    } else {
        TrappingSide::Supercritical
    });
    let boundary = first.boundary_mass_fraction;
    let tail = spectral::spectral_tail_fraction(&u0);
    let mut notes = Vec::new();
    if boundary > spec.trust.boundary_mass_fraction {
        notes.push(format!("boundary mass fraction {boundary:.3e}"));
    }
    if tail > spec.trust.spectral_tail_fraction {
        notes.push(format!("spectral tail fraction {tail:.3e}"));
    }
    let trusted = notes.is_empty();

    let traj = integrator::integrate(
        &u0,
        &Flow::new(z),
        &spec.stepper,
        &spec.record_options(),
        None,
    )?;
    let status = traj.state.status;
    let t_event = match status {
        RunStatus::BlownUp { t_estimate } => Some(t_estimate),
        RunStatus::Decayed | RunStatus::MaxTimeReached => Some(traj.state.t),
        _ => None,
    };
    let trapping = match side {
        Some(_) => Some(trapping_report(&traj.records, refs)?),
        None => None,
    };
    let virial_floor = traj
        .records
        .iter()
        .map(|r| -z.re() * r.k_functional)
        .fold(f64::INFINITY, f64::min);
    let misclassified = trusted
        && match side {
            Some(TrappingSide::Subcritical) => status != RunStatus::Decayed,
            Some(TrappingSide::Supercritical) => !matches!(status, RunStatus::BlownUp { .. }),
            None => false,
        };
    Ok(SweepRow {
        amplitude,
        theta,
        energy_ratio,
        kinetic_ratio,
        side,
        status,
        t_event,
        trusted,
        trust_note: notes.join("; "),
        trapping,
        virial_floor,
        misclassified,
        records: traj.records,
    })
}

/// Every `(a, θ)` cell, rows ordered amplitude-major.
pub fn run_dichotomy_sweep(spec: &ExperimentSpec) -> Result<SweepResult, ExperimentError> {
    spec.validate(&[
        ExperimentKind::DichotomySweep,
        ExperimentKind::TrappingCheck,
    ])?;
    let grid = spec.grid.build()?;
    let refs = ground_state::thresholds(grid.dim())?.clone();
    let cells: Vec<(f64, f64)> = spec
        .amplitudes
        .iter()
        .flat_map(|&a| spec.thetas.iter().map(move |&t| (a, t)))
        .collect();
    let work = || {
        cells
            .par_iter()
            .map(|&(a, t)| run_cell(spec, &grid, &refs, a, t))
            .collect::<Vec<_>>()
    };
    let results = match spec.pool() {
        Some(pool) => pool.install(work),
        None => work(),
    };
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult { rows, refs })
}

/// Trapping along the subcritical cells of a sweep.
pub fn run_trapping_check(
    spec: &ExperimentSpec,
) -> Result<Vec<(f64, f64, TrappingReport)>, ExperimentError> {
    let sweep = run_dichotomy_sweep(spec)?;
    Ok(sweep
        .rows
        .into_iter()
        .filter(|r| r.side == Some(TrappingSide::Subcritical))
        .filter_map(|r| r.trapping.map(|t| (r.amplitude, r.theta, t)))
        .collect())
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub amplitude: f64,
    pub theta: f64,
    pub status: RunStatus,
    pub records: Vec<DiagnosticsRecord>,
    /// `(t, ‖∇u(t)‖)` per record.
    pub h1: Vec<(f64, f64)>,
    pub final_h1: f64,
    /// Least-squares rate `r` in `‖∇u‖ ~ e^{-rt}` over the second half of the records.
    pub late_decay_rate: Option<f64>,
    pub s_total: f64,
    /// Share of `s_total` accumulated over the final quarter of the run.
    pub s_final_quarter_fraction: f64,
    pub decayed: bool,
    /// False when the horizon ran out before the decay threshold.
    pub conclusive: bool,
}

pub fn run_decay_study(spec: &ExperimentSpec) -> Result<DecayReport, ExperimentError> {
    spec.validate(&[ExperimentKind::DecayStudy])?;
    let grid = spec.grid.build()?;
    let (amplitude, theta) = (spec.amplitudes[0], spec.thetas[0]);
    let z = ZParameter::new(theta)?;
    if z.is_nls() {
        return Err(ExperimentError::Precondition(
            "decay needs theta < pi/2".into(),
        ));
    }
    let u0 = spec.initial_family.datum(&grid, amplitude)?;
    let refs = ground_state::thresholds(grid.dim())?;
    let first = diagnostics::record(&u0, 0.0, None);
    if !(first.energy < refs.energy_w && first.kinetic < refs.grad_norm_sq_w) {
        return Err(ExperimentError::Precondition(format!(
            "datum not below both thresholds: E/E(W) = {}, kinetic/|grad W|^2 = {}",
            first.energy / refs.energy_w,
            first.kinetic / refs.grad_norm_sq_w
        )));
    }
    let traj = integrator::integrate(
        &u0,
        &Flow::new(z),
        &spec.stepper,
        &spec.record_options(),
        None,
    )?;
    Ok(decay_report(amplitude, theta, traj))
}

fn decay_report(amplitude: f64, theta: f64, traj: Trajectory) -> DecayReport {
    let records = traj.records;
    let h1: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.kinetic.sqrt())).collect();
    let last = records.last().expect("integrate always records the start");
    let t_end = last.t;
    let s_total = last.s_accumulator;
    let s_at = |t: f64| {
        records
            .iter()
            .take_while(|r| r.t <= t)
            .last()
            .map_or(0.0, |r| r.s_accumulator)
    };
    let s_final_quarter_fraction = if s_total > 0.0 {
        (s_total - s_at(0.75 * t_end)) / s_total
    } else {
        0.0
    };
    let tail: Vec<(f64, f64)> = h1[h1.len() / 2..]
        .iter()
        .copied()
        .filter(|(_, v)| *v > 0.0)
        .collect();
    let late_decay_rate = (tail.len() >= 2).then(|| {
        let n = tail.len() as f64;
        let mt = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let ml = tail.iter().map(|p| p.1.ln()).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
        let sxx: f64 = tail.iter().map(|p| (p.0 - mt).powi(2)).sum();
        -sxy / sxx
    });
    let decayed = traj.state.status == RunStatus::Decayed;
    DecayReport {
        amplitude,
        theta,
        status: traj.state.status,
        final_h1: last.kinetic.sqrt(),
        h1,
        late_decay_rate: late_decay_rate.filter(|v| v.is_finite()),
        s_total,
        s_final_quarter_fraction,
        decayed,
        conclusive: traj.state.status != RunStatus::MaxTimeReached,
        records,
    }
}

#[cfg(test)]
mod tests;
