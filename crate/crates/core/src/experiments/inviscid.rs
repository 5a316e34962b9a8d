//! Complex Ginzburg-Landau runs with `θ → π/2` against the Schrödinger run
//! from the same datum.

use rayon::prelude::*;

use super::{ExperimentError, ExperimentKind, ExperimentSpec};
use crate::integrator::{self, Flow, RecordOptions, RunStatus, StepperConfig, Trajectory};
use crate::spectral::{self, ComplexField, Space, ZParameter};

#[derive(Debug, Clone, PartialEq)]
pub struct InviscidRow {
    pub theta: f64,
    pub cos_theta: f64,
    /// `‖u_θ(T) - v(T)‖_{L²}`
    pub err_l2: f64,
    /// `‖∇(u_θ(T) - v(T))‖_{L²}`
    pub err_h1: f64,
    /// `cos θ ∫₀ᵀ ‖Δv + f(v)‖` along the Schrödinger run.
    pub defect_estimate: f64,
    pub energy_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InviscidTable {
    pub rows: Vec<InviscidRow>,
    pub horizon: f64,
    pub energy_initial: f64,
    /// `|E(v(T)) - E(u₀)| / |E(u₀)|`
    pub nls_energy_drift: f64,
    /// Fitted exponent `p` in `err ~ cos^p θ`.
    pub slope: Option<f64>,
}

impl InviscidTable {
    /// `err_l2` strictly decreasing over the last `k` rows.
    pub fn monotone_tail(&self, k: usize) -> bool {
        let start = self.rows.len().saturating_sub(k);
        self.rows[start..]
            .windows(2)
            .all(|w| w[1].err_l2 < w[0].err_l2)
    }

    pub fn monotone(&self) -> bool {
        self.monotone_tail(self.rows.len())
    }

    /// Every error within `factor` times its defect estimate.
    pub fn bounded_by_defect(&self, factor: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.err_l2 <= factor * r.defect_estimate)
    }

    /// Every row obeys the energy inequality `E(u_θ(T)) ≤ E(u₀)`.
    pub fn energy_inequality_holds(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.energy_final <= self.energy_initial)
    }

    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.err_l2)
    }
}

fn member(
    u0: &ComplexField,
    z: ZParameter,
    cfg: &StepperConfig,
    every: u64,
    time_derivative: bool,
) -> Result<Trajectory, ExperimentError> {
    let opts = RecordOptions {
        every_steps: every,
        time_derivative,
        ..RecordOptions::default()
    };
    let traj = integrator::integrate(u0, &Flow::new(z), cfg, &opts, None)?;
    if traj.state.status != RunStatus::MaxTimeReached {
        return Err(ExperimentError::MemberRunFailed {
            theta: z.theta(),
            status: traj.state.status,
        });
    }
    Ok(traj)
}

/// Runs every `θ` in `spec.thetas` and the `θ = π/2` reference to `spec.horizon`.
///
/// The reference uses a quarter of the step.
pub fn run_inviscid_limit(spec: &ExperimentSpec) -> Result<InviscidTable, ExperimentError> {
    spec.validate(&[ExperimentKind::InviscidLimit])?;
    let grid = spec.grid.build()?;
    let u0 = spec.initial_family.datum(&grid, spec.amplitudes[0])?;
    let cfg = StepperConfig {
        max_time: spec.horizon,
        decay_h1_threshold: f64::MIN_POSITIVE,
        ..spec.stepper.clone()
    };
    let reference_cfg = StepperConfig {
        dt: cfg.dt / 4.0,
        dt_min: cfg.dt_min.min(cfg.dt / 8.0),
        ..cfg.clone()
    };

    let work = || -> Result<(Trajectory, Vec<Trajectory>), ExperimentError> {
        let (reference, members) = rayon::join(
            || {
                member(
                    &u0,
                    ZParameter::nls(),
                    &reference_cfg,
                    4 * spec.record_every,
                    true,
                )
            },
            || {
                spec.thetas
                    .par_iter()
                    .map(|&t| member(&u0, ZParameter::new(t)?, &cfg, spec.record_every, false))
                    .collect::<Result<Vec<_>, _>>()
            },
        );
        Ok((reference?, members?))
    };
    let (reference, members) = match spec.pool() {
        Some(pool) => pool.install(work)?,
        None => work()?,
    };

    let v = reference.state.u.to_space(Space::Spectral);
    let defect_integral: f64 = reference
        .records
        .windows(2)
        .zip(reference.ut_norm_sq.windows(2))
        .map(|(r, n)| 0.5 * (r[1].t - r[0].t) * (n[0].sqrt() + n[1].sqrt()))
        .sum();
    let energy_initial = reference.records[0].energy;
    let nls_final = reference.records.last().expect("reference records").energy;

    let rows: Vec<InviscidRow> = spec
        .thetas
        .iter()
        .zip(&members)
        .map(|(&theta, traj)| {
            let z = ZParameter::new(theta).expect("validated theta");
            let mut diff = traj.state.u.to_space(Space::Spectral);
            diff.axpy(num_complex::Complex64::new(-1.0, 0.0), &v)
                .expect("same grid");
            InviscidRow {
                theta,
                cos_theta: z.re(),
                err_l2: spectral::mass(&diff).sqrt(),
                err_h1: spectral::grad_norm_sq(&diff).sqrt(),
                defect_estimate: z.re() * defect_integral,
                energy_final: traj.records.last().expect("records").energy,
            }
        })
        .collect();

    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.cos_theta > 0.0 && r.err_l2 > 0.0)
        .map(|r| (r.cos_theta.ln(), r.err_l2.ln()))
        .collect();
    let slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(InviscidTable {
        rows,
        horizon: spec.horizon,
        energy_initial,
        nls_energy_drift: (nls_final - energy_initial).abs()
            / energy_initial.abs().max(f64::MIN_POSITIVE),
        slope: slope.filter(|s| s.is_finite()),
    })
}
