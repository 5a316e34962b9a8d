//! Grids, fields, unitary transforms, norms and the linear semigroup `e^{tzΔ}`.
//!
//! Integrals use the quadrature weight `h^d`. The transform is unitary, so
//! `h^d Σ|f|² = h^d Σ|f̂|²` and spectral integrals carry the same weight.

mod fft;
mod field;
mod grid;

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

pub use field::{ComplexField, Space};
pub use grid::Grid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field is in {found:?} space, expected {expected:?}")]
    WrongSpace { expected: Space, found: Space },
    #[error("value count {found} does not match grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("semigroup time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("theta must lie in (0, pi/2], got {0}")]
    InvalidTheta(f64),
}

/// Unit-modulus coefficient `z = e^{iθ}`, θ ∈ (0, π/2].
///
/// θ = π/2 is the Schrödinger limit; there `re()` is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZParameter {
    theta: f64,
}

impl ZParameter {
    pub fn new(theta: f64) -> Result<Self, SpectralError> {
        if !(theta > 0.0 && theta <= FRAC_PI_2) {
            return Err(SpectralError::InvalidTheta(theta));
        }
        Ok(Self { theta })
    }

    pub fn nls() -> Self {
        Self { theta: FRAC_PI_2 }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_nls(&self) -> bool {
        self.theta == FRAC_PI_2
    }

    pub fn re(&self) -> f64 {
        if self.is_nls() {
            0.0
        } else {
            self.theta.cos()
        }
    }

    pub fn im(&self) -> f64 {
        if self.is_nls() {
            1.0
        } else {
            self.theta.sin()
        }
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.re(), self.im())
    }
}

/// Forward unitary transform.
pub fn dft(f: &ComplexField) -> Result<ComplexField, SpectralError> {
    let mut out = f.clone();
    out.forward_in_place()?;
    Ok(out)
}

/// Inverse unitary transform.
pub fn idft(f: &ComplexField) -> Result<ComplexField, SpectralError> {
    let mut out = f.clone();
    out.inverse_in_place()?;
    Ok(out)
}

/// Precomputed spectral multiplier `e^{-t z |k|²}` for a fixed step.
#[derive(Debug, Clone)]
pub struct SemigroupMultiplier {
    factors: Vec<Complex64>,
    t: f64,
}

impl SemigroupMultiplier {
    pub fn new(grid: &Grid, z: ZParameter, t: f64) -> Result<Self, SpectralError> {
        if !(t >= 0.0) {
            return Err(SpectralError::NegativeTime(t));
        }
        let (re, im) = (z.re(), z.im());
        let factors = grid
            .k_squared()
            .par_iter()
            .map(|&k2| {
                let s = t * k2;
                Complex64::from_polar((-s * re).exp(), -s * im)
            })
            .collect();
        Ok(Self { factors, t })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Multiplies spectral coefficients in place.
    pub fn apply_spectral(&self, f: &mut ComplexField) -> Result<(), SpectralError> {
        f.expect_space(Space::Spectral)?;
        if f.values().len() != self.factors.len() {
            return Err(SpectralError::GridMismatch);
        }
        f.values_mut()
            .par_iter_mut()
            .zip(self.factors.par_iter())
            .for_each(|(v, m)| *v *= m);
        Ok(())
    }
}

/// `e^{tzΔ} f`, returned in the same space as `f`.
pub fn apply_semigroup(
    f: &ComplexField,
    z: ZParameter,
    t: f64,
) -> Result<ComplexField, SpectralError> {
    let multiplier = SemigroupMultiplier::new(f.grid(), z, t)?;
    let space = f.space();
    let mut out = f.to_space(Space::Spectral);
    multiplier.apply_spectral(&mut out)?;
    out.convert_to(space);
    Ok(out)
}

/// Parallel sum whose rounding does not depend on the thread count.
pub(crate) fn chunked_sum<T: Sync>(values: &[T], f: impl Fn(usize, &T) -> f64 + Sync) -> f64 {
    const CHUNK: usize = 4096;
    let partial: Vec<f64> = values
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            chunk
                .iter()
                .enumerate()
                .map(|(i, v)| f(c * CHUNK + i, v))
                .sum()
        })
        .collect();
    partial.iter().sum()
}

/// `h^d Σ|f|²`, valid in either space.
pub fn mass(f: &ComplexField) -> f64 {
    chunked_sum(f.values(), |_, v| v.norm_sqr()) * f.grid().cell_volume()
}

/// `‖∇f‖²_{L²}` from spectral coefficients.
pub fn grad_norm_sq(f: &ComplexField) -> f64 {
    match f.space() {
        Space::Spectral => grad_norm_sq_spectral(f),
        Space::Physical => grad_norm_sq_spectral(&f.to_space(Space::Spectral)),
    }
}

fn grad_norm_sq_spectral(f: &ComplexField) -> f64 {
    let k2 = f.grid().k_squared();
    chunked_sum(f.values(), |i, v| k2[i] * v.norm_sqr()) * f.grid().cell_volume()
}

/// `∫|f|^p` (no root). Integer `p/2` uses repeated multiplication.
pub fn lebesgue_integral(f: &ComplexField, p: f64) -> f64 {
    assert!(p >= 1.0, "Lebesgue exponent must be >= 1, got {p}");
    let phys;
    let values = match f.space() {
        Space::Physical => f.values(),
        Space::Spectral => {
            phys = f.to_space(Space::Physical);
            phys.values()
        }
    };
    let half = p / 2.0;
    let sum: f64 = if half.fract() == 0.0 {
        let k = half as i32;
        chunked_sum(values, |_, v| v.norm_sqr().powi(k))
    } else {
        chunked_sum(values, |_, v| v.norm_sqr().powf(half))
    };
    sum * f.grid().cell_volume()
}

/// `(∫|f|^p)^{1/p}`.
pub fn lebesgue_norm(f: &ComplexField, p: f64) -> f64 {
    lebesgue_integral(f, p).powf(1.0 / p)
}

/// Spectral `Δf`, returned in the same space as `f`.
pub fn laplacian(f: &ComplexField) -> ComplexField {
    let space = f.space();
    let mut out = f.to_space(Space::Spectral);
    let k2 = f.grid().k_squared();
    out.values_mut()
        .par_iter_mut()
        .zip(k2.par_iter())
        .for_each(|(v, k2)| *v *= -k2);
    out.convert_to(space);
    out
}

/// Spectral partial derivatives `∂_j f`, in physical space.
pub fn gradient(f: &ComplexField) -> Vec<ComplexField> {
    let grid = f.grid().clone();
    let spectral = f.to_space(Space::Spectral);
    let ks = grid.wavenumbers();
    (0..grid.dim())
        .map(|axis| {
            let mut comp = spectral.clone();
            comp.values_mut()
                .iter_mut()
                .enumerate()
                .for_each(|(flat, v)| {
                    let k = ks[grid.axis_index(flat, axis)];
                    *v *= Complex64::new(0.0, k);
                });
            comp.convert_to(Space::Physical);
            comp
        })
        .collect()
}

/// Share of `‖f‖²` carried by samples with `max_j |x_j| >= 0.9 L`.
pub fn boundary_mass_fraction(f: &ComplexField) -> f64 {
    let phys = f.to_space(Space::Physical);
    let grid = phys.grid();
    let cut = 0.9 * grid.half_length();
    let n = grid.n_per_axis();
    let near_edge: Vec<bool> = (0..n).map(|i| grid.coordinate(i).abs() >= cut).collect();
    let mut edge = 0.0;
    let mut total = 0.0;
    for (flat, v) in phys.values().iter().enumerate() {
        let m = v.norm_sqr();
        total += m;
        if (0..grid.dim()).any(|axis| near_edge[grid.axis_index(flat, axis)]) {
            edge += m;
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

/// Share of spectral mass with some `|m_j| > n/3` (outside the 2/3 band).
pub fn spectral_tail_fraction(f: &ComplexField) -> f64 {
    let spec = f.to_space(Space::Spectral);
    let grid = spec.grid();
    let n = grid.n_per_axis();
    let band = n / 3;
    let outside: Vec<bool> = (0..n)
        .map(|i| {
            let m = if i < n / 2 { i } else { n - i };
            m > band
        })
        .collect();
    let mut tail = 0.0;
    let mut total = 0.0;
    for (flat, v) in spec.values().iter().enumerate() {
        let m = v.norm_sqr();
        total += m;
        if (0..grid.dim()).any(|axis| outside[grid.axis_index(flat, axis)]) {
            tail += m;
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}
