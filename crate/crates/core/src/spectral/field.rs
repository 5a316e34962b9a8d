use num_complex::Complex64;
use rayon::prelude::*;

use super::{fft, Grid, SpectralError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Physical,
    Spectral,
}

/// Complex samples on a [`Grid`], in physical or spectral representation.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
    space: Space,
}

impl ComplexField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            space: Space::Physical,
        }
    }

    pub fn from_values(
        grid: &Grid,
        values: Vec<Complex64>,
        space: Space,
    ) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            space,
        })
    }

    /// Samples `f(x)` at every grid point (physical space).
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        grid.for_each_point(|_, x| values.push(f(x)));
        Self {
            grid: grid.clone(),
            values,
            space: Space::Physical,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, a: f64) {
        self.values.par_iter_mut().for_each(|v| *v *= a);
    }

    pub fn scaled(mut self, a: f64) -> Self {
        self.scale(a);
        self
    }

    /// `self + a * other`, both in the same space on the same grid.
    pub fn axpy(&mut self, a: Complex64, other: &ComplexField) -> Result<(), SpectralError> {
        self.check_compatible(other)?;
        self.values
            .par_iter_mut()
            .zip(other.values.par_iter())
            .for_each(|(v, w)| *v += a * w);
        Ok(())
    }

    pub fn check_compatible(&self, other: &ComplexField) -> Result<(), SpectralError> {
        if !self.grid.same_as(&other.grid) {
            return Err(SpectralError::GridMismatch);
        }
        if self.space != other.space {
            return Err(SpectralError::WrongSpace {
                expected: self.space,
                found: other.space,
            });
        }
        Ok(())
    }

    /// In-place forward transform; requires physical space.
    pub fn forward_in_place(&mut self) -> Result<(), SpectralError> {
        self.expect_space(Space::Physical)?;
        fft::transform(
            &mut self.values,
            self.grid.n_per_axis(),
            self.grid.dim(),
            true,
        );
        self.space = Space::Spectral;
        Ok(())
    }

    /// In-place inverse transform; requires spectral space.
    pub fn inverse_in_place(&mut self) -> Result<(), SpectralError> {
        self.expect_space(Space::Spectral)?;
        fft::transform(
            &mut self.values,
            self.grid.n_per_axis(),
            self.grid.dim(),
            false,
        );
        self.space = Space::Physical;
        Ok(())
    }

    /// Returns a copy in the requested representation.
    pub fn to_space(&self, space: Space) -> ComplexField {
        let mut out = self.clone();
        out.convert_to(space);
        out
    }

    pub fn convert_to(&mut self, space: Space) {
        if self.space == space {
            return;
        }
        let forward = space == Space::Spectral;
        fft::transform(
            &mut self.values,
            self.grid.n_per_axis(),
            self.grid.dim(),
            forward,
        );
        self.space = space;
    }

    pub(crate) fn expect_space(&self, space: Space) -> Result<(), SpectralError> {
        if self.space != space {
            return Err(SpectralError::WrongSpace {
                expected: space,
                found: self.space,
            });
        }
        Ok(())
    }
}
