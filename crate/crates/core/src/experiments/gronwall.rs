//! Two Schrödinger runs from nearby data, stepped in lockstep, and the growth
//! of their difference `w = v - ṽ` in `H¹`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ExperimentError, ExperimentKind, ExperimentSpec};
use crate::diagnostics;
use crate::ground_state;
use crate::integrator::{Flow, Stepper};
use crate::spectral::{self, ComplexField, Grid, Space, ZParameter};

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    pub epsilon: f64,
    pub times: Vec<f64>,
    /// `‖w(t)‖²_{H¹} = ‖w‖² + ‖∇w‖²`
    pub w_h1_sq: Vec<f64>,
    /// `‖w(t)‖_{H¹}` at the horizon.
    pub final_w_h1: f64,
    /// Smallest `C ≥ 0` with `‖w(t)‖²_{H¹} ≤ ‖w(0)‖²_{H¹} e^{Ct}` at every record;
    /// absent when `w(0) = 0`.
    pub c_hat: Option<f64>,
    /// Least-squares slope of `ln(‖w(t)‖²_{H¹}/‖w(0)‖²_{H¹})` against `t`.
    pub growth_rate: Option<f64>,
    /// Both data satisfy `E < E(W)` and `‖∇u₀‖² < ‖∇W‖²`.
    pub within_hypotheses: bool,
}

/// Smooth seeded field: Gaussian coefficients on modes with `|k| ≤ 3·2π/(2L)`,
/// normalized to unit `H¹` norm.
pub fn smooth_noise(grid: &Grid, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_cut = 3.0 * std::f64::consts::PI / grid.half_length();
    let values: Vec<Complex64> = grid
        .k_squared()
        .iter()
        .map(|&k2| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            if k2 <= k_cut * k_cut * (1.0 + 1e-12) {
                Complex64::new(re, im)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let spec = ComplexField::from_values(grid, values, Space::Spectral).expect("grid-sized values");
    let norm = (spectral::mass(&spec) + spectral::grad_norm_sq(&spec)).sqrt();
    spec.scaled(1.0 / norm).to_space(Space::Physical)
}

/// `‖w(t)‖²_{H¹} ≤ ‖w(0)‖²_{H¹} e^{ct}` at every record, up to roundoff.
pub fn gronwall_envelope_holds(report: &GronwallReport, c: f64) -> bool {
    let w0 = report.w_h1_sq[0];
    report
        .times
        .iter()
        .zip(&report.w_h1_sq)
        .all(|(&t, &w)| w <= w0 * (c * t).exp() * (1.0 + 1e-12))
}

fn h1_sq(f: &ComplexField) -> f64 {
    spectral::mass(f) + spectral::grad_norm_sq(f)
}

pub fn run_weak_strong_gronwall(spec: &ExperimentSpec) -> Result<GronwallReport, ExperimentError> {
    spec.validate(&[ExperimentKind::WeakStrongGronwall])?;
    let grid = spec.grid.build()?;
    let refs = ground_state::thresholds(grid.dim())?;
    let v0 = spec.initial_family.datum(&grid, spec.amplitudes[0])?;
    let mut perturbed = v0.clone();
    perturbed.axpy(
        Complex64::new(spec.epsilon, 0.0),
        &smooth_noise(&grid, spec.seed),
    )?;

    let trapped = |u: &ComplexField| {
        let r = diagnostics::record(u, 0.0, None);
        r.energy < refs.energy_w && r.kinetic < refs.grad_norm_sq_w
    };
    let within_hypotheses = trapped(&v0);
    if within_hypotheses && !trapped(&perturbed) {
        return Err(ExperimentError::Precondition(format!(
            "perturbation of size {} leaves the trapped regime",
            spec.epsilon
        )));
    }

    let flow = Flow::new(ZParameter::nls());
    let mut stepper = Stepper::new(flow);
    let mut v = v0.to_space(Space::Spectral);
    let mut vt = perturbed.to_space(Space::Spectral);
    let dt = spec.stepper.dt;
    let steps = (spec.horizon / dt).round().max(1.0) as u64;
    let dt = spec.horizon / steps as f64;

    let difference = |a: &ComplexField, b: &ComplexField| {
        let mut w = a.clone();
        w.axpy(Complex64::new(-1.0, 0.0), b).expect("same grid");
        h1_sq(&w)
    };
    let mut times = vec![0.0];
    let mut w_h1_sq = vec![difference(&v, &vt)];
    for step in 1..=steps {
        stepper.step(&mut v, dt)?;
        stepper.step(&mut vt, dt)?;
        if step % spec.record_every == 0 || step == steps {
            times.push(step as f64 * dt);
            w_h1_sq.push(difference(&v, &vt));
        }
    }

    let w0 = w_h1_sq[0];
    let (c_hat, growth_rate) = if w0 > 0.0 {
        let logs: Vec<(f64, f64)> = times
            .iter()
            .zip(&w_h1_sq)
            .skip(1)
            .map(|(&t, &w)| (t, (w / w0).ln()))
            .collect();
        let c_hat = logs.iter().map(|(t, l)| l / t).fold(0.0, f64::max);
        let stt: f64 = logs.iter().map(|(t, _)| t * t).sum();
        let stl: f64 = logs.iter().map(|(t, l)| t * l).sum();
        (Some(c_hat), (stt > 0.0).then(|| stl / stt))
    } else {
        (None, None)
    };
    Ok(GronwallReport {
        epsilon: spec.epsilon,
        final_w_h1: w_h1_sq.last().copied().unwrap_or(0.0).sqrt(),
        times,
        w_h1_sq,
        c_hat,
        growth_rate,
        within_hypotheses,
    })
}
