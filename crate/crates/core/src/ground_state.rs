//! The stationary profile `W(x) = (1 + |x|²/(d(d-2)))^{-(d-2)/2}` and the
//! thresholds `‖∇W‖²` and `E(W)`, computed by radial quadrature.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::spectral::{self, ComplexField, Grid, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundStateError {
    #[error("dimension must be 3 or 4, got {0}")]
    UnsupportedDimension(usize),
    #[error("radial quadrature did not converge: relative change {change:e} under refinement (tolerance {tolerance:e})")]
    NotConverged { change: f64, tolerance: f64 },
    #[error("cutoff {cutoff} + taper {taper} must be below the box half-length {half_length}")]
    TruncationTooWide {
        cutoff: f64,
        taper: f64,
        half_length: f64,
    },
    #[error("taper width and cutoff must be positive")]
    InvalidTaper,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Composite Gauss–Legendre resolution for radial integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub panels: usize,
    pub order: usize,
    /// Maximum relative change allowed when the panel count is doubled.
    pub tolerance: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            panels: 32,
            order: 12,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureReport {
    pub panels: usize,
    pub order: usize,
    pub refinement_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateRefs {
    pub d: usize,
    pub grad_norm_sq_w: f64,
    /// `‖W‖^{2d/(d-2)}_{L^{2d/(d-2)}}`; equals `grad_norm_sq_w` for a critical point.
    pub potential_w: f64,
    pub energy_w: f64,
    pub quadrature: QuadratureReport,
}

fn check_dim(d: usize) -> Result<(), GroundStateError> {
    if d == 3 || d == 4 {
        Ok(())
    } else {
        Err(GroundStateError::UnsupportedDimension(d))
    }
}

/// Energy-critical exponent `2d/(d-2)`.
pub fn critical_exponent(d: usize) -> f64 {
    2.0 * d as f64 / (d as f64 - 2.0)
}

/// Nonlinearity power `4/(d-2)` in `f(u) = |u|^{4/(d-2)} u`.
pub fn nonlinearity_power(d: usize) -> f64 {
    4.0 / (d as f64 - 2.0)
}

/// Area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => panic!("unsupported dimension {d}"),
    }
}

pub fn w_radial(r: f64, d: usize) -> f64 {
    let df = d as f64;
    (1.0 + r * r / (df * (df - 2.0))).powf(-(df - 2.0) / 2.0)
}

pub fn w_radial_derivative(r: f64, d: usize) -> f64 {
    let df = d as f64;
    let a = df * (df - 2.0);
    -(df - 2.0) / a * r * (1.0 + r * r / a).powf(-df / 2.0)
}

/// `W(x)`, with the dimension taken from `x.len()`.
pub fn eval_w(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    w_radial(r2.sqrt(), x.len())
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let deriv = order as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, deriv)
}

fn composite_gauss(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            acc += w * f(mid + 0.5 * width * x);
        }
        total += 0.5 * width * acc;
    }
    total
}

/// `|S^{d-1}| ∫_0^∞ g(r) r^{d-1} dr` via `r = a·tan φ`, with a refinement check.
///
/// Returns the value and the relative change against half the panel count.
pub fn radial_integral(
    d: usize,
    g: impl Fn(f64) -> f64,
    scale: f64,
    quad: Quadrature,
) -> Result<(f64, f64), GroundStateError> {
    check_dim(d)?;
    let integrand = |phi: f64| {
        if phi >= FRAC_PI_2 {
            return 0.0;
        }
        let t = phi.tan();
        let r = scale * t;
        let jac = scale * (1.0 + t * t);
        let v = g(r) * r.powi(d as i32 - 1) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let fine = composite_gauss(&integrand, 0.0, FRAC_PI_2, quad.panels, quad.order);
    let coarse = composite_gauss(
        &integrand,
        0.0,
        FRAC_PI_2,
        (quad.panels / 2).max(1),
        quad.order,
    );
    let change = ((fine - coarse) / fine).abs();
    if !(change <= quad.tolerance) {
        return Err(GroundStateError::NotConverged {
            change,
            tolerance: quad.tolerance,
        });
    }
    Ok((sphere_area(d) * fine, change))
}

/// `|S^{d-1}| ∫_a^b g(r) r^{d-1} dr` by composite Gauss–Legendre.
pub fn radial_integral_finite(
    d: usize,
    g: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    quad: Quadrature,
) -> f64 {
    let integrand = |r: f64| g(r) * r.powi(d as i32 - 1);
    sphere_area(d) * composite_gauss(&integrand, a, b, quad.panels, quad.order)
}

pub fn compute_thresholds(d: usize, quad: Quadrature) -> Result<GroundStateRefs, GroundStateError> {
    check_dim(d)?;
    let scale = ((d * (d - 2)) as f64).sqrt();
    let p = critical_exponent(d);
    let (grad, change_g) = radial_integral(d, |r| w_radial_derivative(r, d).powi(2), scale, quad)?;
    let (potential, change_p) = radial_integral(d, |r| w_radial(r, d).powf(p), scale, quad)?;
    let df = d as f64;
    let energy = 0.5 * grad - (df - 2.0) / (2.0 * df) * potential;
    Ok(GroundStateRefs {
        d,
        grad_norm_sq_w: grad,
        potential_w: potential,
        energy_w: energy,
        quadrature: QuadratureReport {
            panels: quad.panels,
            order: quad.order,
            refinement_change: change_g.max(change_p),
        },
    })
}

/// Thresholds at the default quadrature, computed once per dimension.
pub fn thresholds(d: usize) -> Result<&'static GroundStateRefs, GroundStateError> {
    static D3: OnceLock<GroundStateRefs> = OnceLock::new();
    static D4: OnceLock<GroundStateRefs> = OnceLock::new();
    let cell = match d {
        3 => &D3,
        4 => &D4,
        _ => return Err(GroundStateError::UnsupportedDimension(d)),
    };
    if let Some(refs) = cell.get() {
        return Ok(refs);
    }
    let refs = compute_thresholds(d, Quadrature::default())?;
    Ok(cell.get_or_init(|| refs))
}

/// Smoothstep cutoff: 1 on `[0, R]`, `1 - (3s² - 2s³)` on `[R, R+w]`, 0 beyond.
pub fn taper(r: f64, cutoff: f64, width: f64) -> f64 {
    if r <= cutoff {
        1.0
    } else if r >= cutoff + width {
        0.0
    } else {
        let s = (r - cutoff) / width;
        1.0 - s * s * (3.0 - 2.0 * s)
    }
}

pub fn taper_derivative(r: f64, cutoff: f64, width: f64) -> f64 {
    if r <= cutoff || r >= cutoff + width {
        0.0
    } else {
        let s = (r - cutoff) / width;
        -6.0 * s * (1.0 - s) / width
    }
}

/// Rescaled, translated and optionally tapered profile
/// `λ^{-(d-2)/2} W((x - x₀)/λ) χ(|x - x₀|)` sampled with minimum-image distances.
#[derive(Debug, Clone, PartialEq)]
pub struct BubbleProfile {
    pub lambda: f64,
    pub center: Vec<f64>,
    /// `(cutoff, width)` of the smoothstep taper, in physical units.
    pub taper: Option<(f64, f64)>,
}

impl BubbleProfile {
    pub fn centered(d: usize) -> Self {
        Self {
            lambda: 1.0,
            center: vec![0.0; d],
            taper: None,
        }
    }

    pub fn sample(&self, grid: &Grid) -> ComplexField {
        let d = grid.dim();
        let amp = self.lambda.powf(-(d as f64 - 2.0) / 2.0);
        ComplexField::from_fn(grid, |x| {
            let r2: f64 = (0..d)
                .map(|j| grid.periodic_displacement(x[j], self.center[j]).powi(2))
                .sum();
            let r = r2.sqrt();
            let chi = match self.taper {
                Some((cutoff, width)) => taper(r, cutoff, width),
                None => 1.0,
            };
            Complex64::new(amp * w_radial(r / self.lambda, d) * chi, 0.0)
        })
    }
}

/// `W` on `|x| ≤ R`, smoothstep-tapered to zero at `|x| = R + w`.
pub fn truncated_w(
    grid: &Grid,
    cutoff: f64,
    taper_width: f64,
) -> Result<ComplexField, GroundStateError> {
    if !(cutoff > 0.0 && taper_width > 0.0) {
        return Err(GroundStateError::InvalidTaper);
    }
    if cutoff + taper_width >= grid.half_length() {
        return Err(GroundStateError::TruncationTooWide {
            cutoff,
            taper: taper_width,
            half_length: grid.half_length(),
        });
    }
    let profile = BubbleProfile {
        taper: Some((cutoff, taper_width)),
        ..BubbleProfile::centered(grid.dim())
    };
    Ok(profile.sample(grid))
}

/// `‖ΔW + |W|^{4/(d-2)} W‖_{L²}` for the untapered `W` sampled on the box.
///
/// `W` is stationary on `R^d`; on a finite periodic box this residual is the
/// measured departure from stationarity.
pub fn stationary_residual(grid: &Grid) -> f64 {
    let w = BubbleProfile::centered(grid.dim()).sample(grid);
    let q = nonlinearity_power(grid.dim());
    let mut rhs = spectral::laplacian(&w);
    rhs.values_mut()
        .iter_mut()
        .zip(w.values())
        .for_each(|(r, v)| *r += v * v.norm().powf(q));
    spectral::lebesgue_norm(&rhs, 2.0)
}
