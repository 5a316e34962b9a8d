use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::SpectralError;

/// Uniform periodic grid on the box `[-L, L)^d`.
///
/// Cloning is cheap: the wavenumber tables live behind an `Arc`.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridData>,
}

struct GridData {
    dim: usize,
    n: usize,
    half_length: f64,
    spacing: f64,
    /// Per-axis wavenumbers in FFT storage order: m = 0, 1, .., n/2-1, -n/2, .., -1.
    wavenumbers: Vec<f64>,
    /// |k|^2 for every flat spectral index.
    k_squared: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, n_per_axis: usize, half_length: f64) -> Result<Self, SpectralError> {
        if dim != 3 && dim != 4 {
            return Err(SpectralError::InvalidGrid(format!(
                "dimension must be 3 or 4, got {dim}"
            )));
        }
        if n_per_axis < 8 || !n_per_axis.is_multiple_of(2) {
            return Err(SpectralError::InvalidGrid(format!(
                "n_per_axis must be even and >= 8, got {n_per_axis}"
            )));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(SpectralError::InvalidGrid(format!(
                "half_length must be positive and finite, got {half_length}"
            )));
        }
        let n = n_per_axis;
        let spacing = 2.0 * half_length / n as f64;
        let wavenumbers: Vec<f64> = (0..n)
            .map(|i| {
                let m = if i < n / 2 {
                    i as i64
                } else {
                    i as i64 - n as i64
                };
                PI * m as f64 / half_length
            })
            .collect();
        let k2_axis: Vec<f64> = wavenumbers.iter().map(|k| k * k).collect();
        let total = n.pow(dim as u32);
        let mut k_squared = vec![0.0; total];
        let mut idx = vec![0usize; dim];
        for slot in k_squared.iter_mut() {
            *slot = idx.iter().map(|&i| k2_axis[i]).sum();
            advance_multi_index(&mut idx, n);
        }
        Ok(Self {
            inner: Arc::new(GridData {
                dim,
                n,
                half_length,
                spacing,
                wavenumbers,
                k_squared,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.inner.n
    }

    pub fn half_length(&self) -> f64 {
        self.inner.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.inner.spacing
    }

    /// Per-axis wavenumbers in FFT storage order (Nyquist stored as `-n/2`).
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    /// |k|^2 at every flat spectral index.
    pub fn k_squared(&self) -> &[f64] {
        &self.inner.k_squared
    }

    /// Total number of samples, `n^d`.
    pub fn len(&self) -> usize {
        self.inner.k_squared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    /// `(2L)^d`.
    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_length()).powi(self.dim() as i32)
    }

    /// Physical coordinate of the `i`-th sample along any axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_length() + i as f64 * self.spacing()
    }

    /// Index along `axis` of the flat row-major index `flat`.
    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        let n = self.n_per_axis();
        (flat / n.pow((self.dim() - 1 - axis) as u32)) % n
    }

    /// Largest wavenumber magnitude resolved per axis.
    pub fn k_max(&self) -> f64 {
        PI * (self.n_per_axis() / 2) as f64 / self.half_length()
    }

    /// Calls `f(flat_index, position)` for every sample, in storage order.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let d = self.dim();
        let n = self.n_per_axis();
        let mut idx = vec![0usize; d];
        let mut x: Vec<f64> = vec![self.coordinate(0); d];
        for flat in 0..self.len() {
            f(flat, &x);
            // odometer, last axis fastest
            for axis in (0..d).rev() {
                idx[axis] += 1;
                if idx[axis] < n {
                    x[axis] = self.coordinate(idx[axis]);
                    break;
                }
                idx[axis] = 0;
                x[axis] = self.coordinate(0);
            }
        }
    }

    /// Positions of all samples, `len() * dim()` values, row-major.
    pub fn positions(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; self.len() * d];
        self.for_each_point(|flat, x| out[flat * d..(flat + 1) * d].copy_from_slice(x));
        out
    }

    /// Minimum-image displacement `x - center` on the periodic box.
    pub fn periodic_displacement(&self, x: f64, center: f64) -> f64 {
        let period = 2.0 * self.half_length();
        let mut dx = x - center;
        dx -= period * (dx / period).round();
        dx
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self == other
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim()
            && self.n_per_axis() == other.n_per_axis()
            && self.half_length() == other.half_length()
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim())
            .field("n_per_axis", &self.n_per_axis())
            .field("half_length", &self.half_length())
            .finish()
    }
}

fn advance_multi_index(idx: &mut [usize], n: usize) {
    for slot in idx.iter_mut().rev() {
        *slot += 1;
        if *slot < n {
            return;
        }
        *slot = 0;
    }
}
