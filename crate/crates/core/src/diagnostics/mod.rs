//! Functionals along trajectories: mass, kinetic and potential energy, `K`,
//! the space-time accumulator, the dissipation and mass identities, virial
//! quantities, trapping margins and the bubble fit.

mod bubble;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::ground_state::{critical_exponent, nonlinearity_power, GroundStateRefs};
use crate::integrator::Flow;
use crate::spectral::{self, ComplexField, Space};

pub use bubble::{bubble_fit, bubble_fit_with, BubbleFit, BubbleFitOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("series lengths differ: {records} records vs {estimates} time-derivative estimates")]
    LengthMismatch { records: usize, estimates: usize },
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("trapping hypothesis violated at t=0: {0}")]
    Precondition(String),
}

/// Snapshot of every tracked functional at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `‖u‖²_{L²}`
    pub mass: f64,
    /// `‖∇u‖²_{L²}`
    pub kinetic: f64,
    /// `‖u‖^{2d/(d-2)}_{L^{2d/(d-2)}}`
    pub potential: f64,
    pub energy: f64,
    pub k_functional: f64,
    /// `∫₀ᵗ ∫|u|^{2(d+2)/(d-2)}` by the trapezoid rule over records.
    pub s_accumulator: f64,
    /// Space integral `∫|u(t)|^{2(d+2)/(d-2)}` at this record.
    pub s_integrand: f64,
    pub sup_abs: f64,
    pub bubble: Option<BubbleFit>,
    pub boundary_mass_fraction: f64,
}

/// `E = kinetic/2 - (d-2)/(2d) potential` for the focusing equation.
pub fn energy_from_parts(d: usize, kinetic: f64, potential: f64) -> f64 {
    let df = d as f64;
    0.5 * kinetic - (df - 2.0) / (2.0 * df) * potential
}

/// Running trapezoid state of the space-time accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SAccumulator {
    /// Time of the last sample.
    pub t: f64,
    pub value: f64,
    /// Space integral at the last sample.
    pub integrand: f64,
}

impl SAccumulator {
    pub fn from_record(r: &DiagnosticsRecord) -> Self {
        Self {
            t: r.t,
            value: r.s_accumulator,
            integrand: r.s_integrand,
        }
    }
}

/// Builds a record from both representations of the same state.
pub fn record_parts(
    t: f64,
    physical: &ComplexField,
    spectral_form: &ComplexField,
    prev: Option<SAccumulator>,
) -> DiagnosticsRecord {
    debug_assert_eq!(physical.space(), Space::Physical);
    debug_assert_eq!(spectral_form.space(), Space::Spectral);
    let d = physical.grid().dim();
    let mass = spectral::mass(physical);
    let kinetic = spectral::grad_norm_sq(spectral_form);
    let potential = spectral::lebesgue_integral(physical, critical_exponent(d));
    let s_exponent = 2.0 * (d as f64 + 2.0) / (d as f64 - 2.0);
    let s_integrand = spectral::lebesgue_integral(physical, s_exponent);
    let s_accumulator = match prev {
        Some(p) => p.value + 0.5 * (t - p.t) * (p.integrand + s_integrand),
        None => 0.0,
    };
    DiagnosticsRecord {
        t,
        mass,
        kinetic,
        potential,
        energy: energy_from_parts(d, kinetic, potential),
        k_functional: kinetic - potential,
        s_accumulator,
        s_integrand,
        sup_abs: physical.sup_abs(),
        bubble: None,
        boundary_mass_fraction: spectral::boundary_mass_fraction(physical),
    }
}

/// Record of `u` (either space) at time `t`.
pub fn record(u: &ComplexField, t: f64, prev: Option<&DiagnosticsRecord>) -> DiagnosticsRecord {
    let physical = u.to_space(Space::Physical);
    let spectral_form = u.to_space(Space::Spectral);
    record_parts(
        t,
        &physical,
        &spectral_form,
        prev.map(SAccumulator::from_record),
    )
}

/// `∂_t u = z(Δu + c|u|^{4/(d-2)}u)` evaluated from the right-hand side, physical space.
pub fn time_derivative(u: &ComplexField, flow: &Flow) -> ComplexField {
    let physical = u.to_space(Space::Physical);
    let q = nonlinearity_power(u.grid().dim());
    let mut out = spectral::laplacian(&physical);
    let z = flow.z.as_complex();
    let c = flow.coupling;
    out.values_mut()
        .par_iter_mut()
        .zip(physical.values().par_iter())
        .for_each(|(lap, v)| {
            let nl: Complex64 = v * v.norm_sqr().powf(q / 2.0) * c;
            *lap = z * (*lap + nl);
        });
    out
}

pub fn time_derivative_norm_sq(u: &ComplexField, flow: &Flow) -> f64 {
    spectral::mass(&time_derivative(u, flow))
}

/// `E(s) - E(t) - Re z ∫ₛᵗ ‖∂_τ u‖²` with `s` the first record, relative to `|E(s)|`.
///
/// Energy is recomputed with the flow's coupling so linear runs use `‖∇u‖²/2`.
pub fn dissipation_residual(
    records: &[DiagnosticsRecord],
    ut_norm_sq: &[f64],
    flow: &Flow,
    d: usize,
) -> Result<Vec<f64>, DiagnosticsError> {
    if records.len() != ut_norm_sq.len() {
        return Err(DiagnosticsError::LengthMismatch {
            records: records.len(),
            estimates: ut_norm_sq.len(),
        });
    }
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let energy = |r: &DiagnosticsRecord| flow.energy(d, r.kinetic, r.potential);
    let e0 = energy(&records[0]);
    let scale = if e0 != 0.0 { e0.abs() } else { 1.0 };
    let re = flow.z.re();
    let mut integral = 0.0;
    let mut out = Vec::with_capacity(records.len());
    out.push(0.0);
    for i in 1..records.len() {
        let dt = records[i].t - records[i - 1].t;
        integral += 0.5 * dt * (ut_norm_sq[i] + ut_norm_sq[i - 1]);
        out.push((e0 - energy(&records[i]) - re * integral) / scale);
    }
    Ok(out)
}

/// Pointwise residual of `d/dt ‖u‖² + 2 Re z K(u)` at interior records.
///
/// The mass derivative is the second-order three-point difference on the
/// (possibly uneven) record times. Returns `(t, residual)` pairs.
pub fn mass_identity_residual(
    records: &[DiagnosticsRecord],
    flow: &Flow,
) -> Result<Vec<(f64, f64)>, DiagnosticsError> {
    if records.len() < 3 {
        return Err(DiagnosticsError::TooFewRecords {
            needed: 3,
            got: records.len(),
        });
    }
    let re = flow.z.re();
    Ok(records
        .windows(3)
        .map(|w| {
            let (a, b, c) = (&w[0], &w[1], &w[2]);
            let h0 = b.t - a.t;
            let h1 = c.t - b.t;
            let dm = -h1 / (h0 * (h0 + h1)) * a.mass
                + (h1 - h0) / (h0 * h1) * b.mass
                + h0 / (h1 * (h0 + h1)) * c.mass;
            let k = flow.k_functional(b.kinetic, b.potential);
            (b.t, dm + 2.0 * re * k)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirialSeries {
    pub t: Vec<f64>,
    /// `I(t) = ½∫₀ᵗ ‖u‖²`
    pub i: Vec<f64>,
    /// `I'(t) = ½‖u(t)‖²`
    pub i_prime: Vec<f64>,
    /// `I''(t) = -Re z K(u(t))`
    pub i_second: Vec<f64>,
    /// `I I'' / (I' - I'(0))²`, absent while the denominator vanishes.
    pub concavity_ratio: Vec<Option<f64>>,
    /// `d/(d-2)`, the lower bound the ratio is compared against.
    pub concavity_bound: f64,
}

pub fn virial_series(records: &[DiagnosticsRecord], flow: &Flow, d: usize) -> VirialSeries {
    let re = flow.z.re();
    let mut t = Vec::with_capacity(records.len());
    let mut i = Vec::with_capacity(records.len());
    let mut i_prime = Vec::with_capacity(records.len());
    let mut i_second = Vec::with_capacity(records.len());
    let mut ratio = Vec::with_capacity(records.len());
    let mut acc = 0.0;
    let i0_prime = records.first().map(|r| 0.5 * r.mass).unwrap_or(0.0);
    for (idx, r) in records.iter().enumerate() {
        if idx > 0 {
            let p = &records[idx - 1];
            acc += 0.5 * (r.t - p.t) * 0.5 * (r.mass + p.mass);
        }
        let ip = 0.5 * r.mass;
        let is = -re * flow.k_functional(r.kinetic, r.potential);
        let growth = ip - i0_prime;
        let denom = growth * growth;
        t.push(r.t);
        i.push(acc);
        i_prime.push(ip);
        i_second.push(is);
        ratio.push(if denom > f64::EPSILON * ip * ip && denom > 0.0 {
            Some(acc * is / denom)
        } else {
            None
        });
    }
    VirialSeries {
        t,
        i,
        i_prime,
        i_second,
        concavity_ratio: ratio,
        concavity_bound: d as f64 / (d as f64 - 2.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrappingSide {
    /// `E < E(W)`, `‖∇u₀‖² < ‖∇W‖²`
    Subcritical,
    /// `E < E(W)`, `‖∇u₀‖² > ‖∇W‖²`
    Supercritical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrappingReport {
    pub side: TrappingSide,
    /// `min_t (1 - kinetic/‖∇W‖²)`
    pub min_margin_kinetic: f64,
    /// `min_t K/kinetic`
    pub min_margin_k: f64,
    pub energy_nonneg: bool,
    /// `min(min_margin_kinetic, min_margin_k)`
    pub measured_delta_bar: f64,
    /// `min_t (-K)`, supercritical side only.
    pub measured_delta3: Option<f64>,
    /// Human-readable description of each record breaking the trapped picture.
    pub violations: Vec<String>,
}

impl TrappingReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn trapping_report(
    records: &[DiagnosticsRecord],
    refs: &GroundStateRefs,
) -> Result<TrappingReport, DiagnosticsError> {
    let first = records
        .first()
        .ok_or(DiagnosticsError::TooFewRecords { needed: 1, got: 0 })?;
    let g = refs.grad_norm_sq_w;
    if !(first.energy < refs.energy_w) {
        return Err(DiagnosticsError::Precondition(format!(
            "E(u0) = {} is not below E(W) = {}",
            first.energy, refs.energy_w
        )));
    }
    let side = if first.kinetic < g {
        TrappingSide::Subcritical
    } else if first.kinetic > g {
        TrappingSide::Supercritical
    } else {
        return Err(DiagnosticsError::Precondition(format!(
            "kinetic(u0) = {} equals ||grad W||^2",
            first.kinetic
        )));
    };
    let mut min_margin_kinetic = f64::INFINITY;
    let mut min_margin_k = f64::INFINITY;
    let mut min_neg_k = f64::INFINITY;
    let mut energy_nonneg = true;
    let mut violations = Vec::new();
    for r in records {
        min_margin_kinetic = min_margin_kinetic.min(1.0 - r.kinetic / g);
        if r.kinetic > 0.0 {
            min_margin_k = min_margin_k.min(r.k_functional / r.kinetic);
        }
        min_neg_k = min_neg_k.min(-r.k_functional);
        energy_nonneg &= r.energy >= 0.0;
        match side {
            TrappingSide::Subcritical => {
                if !(r.kinetic < g) {
                    violations.push(format!("t={}: kinetic {} >= {}", r.t, r.kinetic, g));
                }
                if !(r.k_functional > 0.0) && r.kinetic > 0.0 {
                    violations.push(format!("t={}: K = {} <= 0", r.t, r.k_functional));
                }
                if !(r.energy >= 0.0) {
                    violations.push(format!("t={}: E = {} < 0", r.t, r.energy));
                }
            }
            TrappingSide::Supercritical => {
                if !(r.kinetic > g) {
                    violations.push(format!("t={}: kinetic {} <= {}", r.t, r.kinetic, g));
                }
                if !(r.k_functional < 0.0) {
                    violations.push(format!("t={}: K = {} >= 0", r.t, r.k_functional));
                }
            }
        }
    }
    Ok(TrappingReport {
        side,
        min_margin_kinetic,
        min_margin_k,
        energy_nonneg,
        measured_delta_bar: min_margin_kinetic.min(min_margin_k),
        measured_delta3: (side == TrappingSide::Supercritical).then_some(min_neg_k),
        violations,
    })
}
