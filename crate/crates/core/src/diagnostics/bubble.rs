//! Modulation fit of `∇W_{x₀,λ}` against `∇u` inside a ball around `x₀`.
//!
//! The score is `|⟨∇u, ∇W_{x₀,λ}⟩_B| / (‖∇u‖_B ‖∇W_{x₀,λ}‖_B)` with
//! `B = B(x₀, R)`. Grid-point centres on a log-spaced λ lattice are scored all
//! at once with FFT cross-correlations, then λ and each centre coordinate are
//! refined by golden-section search on direct sums.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::ground_state::w_radial_derivative;
use crate::spectral::{self, ComplexField, Grid, Space};

#[derive(Debug, Clone, PartialEq)]
pub struct BubbleFit {
    pub lambda: f64,
    pub center: Vec<f64>,
    /// Normalized `Ḣ¹` correlation in `[0, 1]`.
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BubbleFitOptions {
    pub lambda_points: usize,
    /// Defaults to the grid spacing.
    pub lambda_min: Option<f64>,
    /// Defaults to `L/4`.
    pub lambda_max: Option<f64>,
    /// Fit ball radius; defaults to `L/2`.
    pub window_radius: Option<f64>,
    /// Rounds of coordinate-wise golden-section refinement.
    pub refine_rounds: usize,
}

impl Default for BubbleFitOptions {
    fn default() -> Self {
        Self {
            lambda_points: 24,
            lambda_min: None,
            lambda_max: None,
            window_radius: None,
            refine_rounds: 2,
        }
    }
}

pub fn bubble_fit(u: &ComplexField) -> Option<BubbleFit> {
    bubble_fit_with(u, &BubbleFitOptions::default())
}

/// Template gradient `∇W_λ` at displacement `x` (from the bubble centre).
fn template_gradient(x: &[f64], lambda: f64, out: &mut [f64]) {
    let d = x.len();
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let amp = lambda.powf(-(d as f64 - 2.0) / 2.0) / lambda;
    let radial = amp * w_radial_derivative(r / lambda, d) / r;
    for (o, xi) in out.iter_mut().zip(x) {
        *o = radial * xi;
    }
}

struct FitContext<'a> {
    grid: &'a Grid,
    grads: Vec<ComplexField>,
    window: f64,
}

impl FitContext<'_> {
    /// Direct evaluation at a continuous centre.
    fn score(&self, center: &[f64], lambda: f64) -> f64 {
        let grid = self.grid;
        let d = grid.dim();
        let n = grid.n_per_axis();
        let w2 = self.window * self.window;
        let offsets: Vec<Vec<f64>> = (0..d)
            .map(|axis| {
                (0..n)
                    .map(|i| grid.periodic_displacement(grid.coordinate(i), center[axis]))
                    .collect()
            })
            .collect();
        // fixed chunks keep the rounding independent of the thread count
        let partial: Vec<(Complex64, f64, f64)> = (0..grid.len())
            .collect::<Vec<_>>()
            .par_chunks(4096)
            .map(|chunk| {
                let (mut cross, mut uu, mut ww) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
                let (mut x, mut tg) = (vec![0.0; d], vec![0.0; d]);
                for &flat in chunk {
                    for axis in 0..d {
                        x[axis] = offsets[axis][grid.axis_index(flat, axis)];
                    }
                    if x.iter().map(|v| v * v).sum::<f64>() <= w2 {
                        template_gradient(&x, lambda, &mut tg);
                        for axis in 0..d {
                            let g = self.grads[axis].values()[flat];
                            cross += g.conj() * tg[axis];
                            uu += g.norm_sqr();
                            ww += tg[axis] * tg[axis];
                        }
                    }
                }
                (cross, uu, ww)
            })
            .collect();
        let (cross, uu, ww) = partial
            .iter()
            .fold((Complex64::new(0.0, 0.0), 0.0, 0.0), |a, b| {
                (a.0 + b.0, a.1 + b.1, a.2 + b.2)
            });
        if uu <= 0.0 || ww <= 0.0 {
            0.0
        } else {
            cross.norm() / (uu * ww).sqrt()
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Circular cross-correlation `Σ_x a(x) b(x - x₀)` for every grid shift `x₀`,
/// given unitary spectra `â` and `b̂` of `a` and real `b`.
fn accumulate_cross(acc: &mut [Complex64], a_hat: &ComplexField, b_hat: &ComplexField) {
    acc.par_iter_mut()
        .zip(a_hat.values().par_iter().zip(b_hat.values().par_iter()))
        .for_each(|(s, (a, b))| *s += a * b.conj());
}

pub fn bubble_fit_with(u: &ComplexField, opts: &BubbleFitOptions) -> Option<BubbleFit> {
    let grid = u.grid().clone();
    let d = grid.dim();
    let kinetic = spectral::grad_norm_sq(u);
    let mass = spectral::mass(u);
    if !(kinetic > 1e-24 * mass.max(1.0)) || !kinetic.is_finite() {
        return None;
    }
    let window = opts.window_radius.unwrap_or(0.5 * grid.half_length());
    let lambda_min = opts.lambda_min.unwrap_or(grid.spacing());
    let lambda_max = opts.lambda_max.unwrap_or(0.25 * grid.half_length());
    let ctx = FitContext {
        grid: &grid,
        grads: spectral::gradient(u),
        window,
    };
    let sqrt_n = (grid.len() as f64).sqrt();
    let n = grid.n_per_axis();

    // displacement of each flat index from index 0, per axis
    let disp: Vec<f64> = (0..n)
        .map(|i| grid.periodic_displacement(grid.coordinate(i), grid.coordinate(0)))
        .collect();
    let in_window = |flat: usize| -> bool {
        (0..d)
            .map(|a| disp[grid.axis_index(flat, a)].powi(2))
            .sum::<f64>()
            <= window * window
    };

    // spectra of conj(∂_j u)
    let grad_hats: Vec<ComplexField> = ctx
        .grads
        .iter()
        .map(|g| {
            let mut c = g.clone();
            c.values_mut().iter_mut().for_each(|v| *v = v.conj());
            c.to_space(Space::Spectral)
        })
        .collect();

    // local ‖∇u‖²_B for every grid centre
    let local_energy: Vec<f64> = {
        let mut gsq = ComplexField::zeros(&grid);
        for g in &ctx.grads {
            gsq.values_mut()
                .iter_mut()
                .zip(g.values())
                .for_each(|(s, v)| *s += v.norm_sqr());
        }
        let indicator = ComplexField::from_values(
            &grid,
            (0..grid.len())
                .map(|f| Complex64::new(if in_window(f) { 1.0 } else { 0.0 }, 0.0))
                .collect(),
            Space::Physical,
        )
        .ok()?;
        let mut acc = ComplexField::from_values(
            &grid,
            vec![Complex64::new(0.0, 0.0); grid.len()],
            Space::Spectral,
        )
        .ok()?;
        accumulate_cross(
            acc.values_mut(),
            &gsq.to_space(Space::Spectral),
            &indicator.to_space(Space::Spectral),
        );
        acc.convert_to(Space::Physical);
        acc.values().iter().map(|v| v.re * sqrt_n).collect()
    };

    let lattice: Vec<f64> = (0..opts.lambda_points)
        .map(|i| {
            let s = if opts.lambda_points > 1 {
                i as f64 / (opts.lambda_points - 1) as f64
            } else {
                0.0
            };
            lambda_min * (lambda_max / lambda_min).powf(s)
        })
        .collect();

    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    for (li, &lambda) in lattice.iter().enumerate() {
        let mut comps: Vec<Vec<Complex64>> = vec![Vec::with_capacity(grid.len()); d];
        let mut tg = vec![0.0; d];
        let mut x = vec![0.0; d];
        let mut template_norm = 0.0;
        for flat in 0..grid.len() {
            for a in 0..d {
                x[a] = disp[grid.axis_index(flat, a)];
            }
            if x.iter().map(|v| v * v).sum::<f64>() <= window * window {
                template_gradient(&x, lambda, &mut tg);
            } else {
                tg.iter_mut().for_each(|v| *v = 0.0);
            }
            for a in 0..d {
                comps[a].push(Complex64::new(tg[a], 0.0));
                template_norm += tg[a] * tg[a];
            }
        }
        if template_norm <= 0.0 {
            continue;
        }
        let mut acc = ComplexField::from_values(
            &grid,
            vec![Complex64::new(0.0, 0.0); grid.len()],
            Space::Spectral,
        )
        .ok()?;
        for (a, comp) in comps.into_iter().enumerate() {
            let t_hat = ComplexField::from_values(&grid, comp, Space::Physical)
                .ok()?
                .to_space(Space::Spectral);
            accumulate_cross(acc.values_mut(), &grad_hats[a], &t_hat);
        }
        acc.convert_to(Space::Physical);
        for (flat, c) in acc.values().iter().enumerate() {
            let e = local_energy[flat];
            if e <= 1e-14 * kinetic {
                continue;
            }
            let score = (c * sqrt_n).norm() / (e * template_norm).sqrt();
            if score > best.2 {
                best = (li, flat, score);
            }
        }
    }
    if !best.2.is_finite() {
        return None;
    }

    let (li, flat, _) = best;
    let mut center: Vec<f64> = (0..d)
        .map(|a| grid.coordinate(grid.axis_index(flat, a)))
        .collect();
    let mut lambda = lattice[li];
    let lo = if li > 0 {
        lattice[li - 1]
    } else {
        lattice[0] * 0.5
    };
    let hi = if li + 1 < lattice.len() {
        lattice[li + 1]
    } else {
        lattice[li] * 2.0
    };
    let h = grid.spacing();
    let mut score = ctx.score(&center, lambda);
    for round in 0..opts.refine_rounds {
        let (a, b) = if round == 0 {
            (lo, hi)
        } else {
            (lambda * 0.9, lambda * 1.1)
        };
        let (log_l, s_new) = golden_max(|l| ctx.score(&center, l.exp()), a.ln(), b.ln(), 30);
        if s_new >= score {
            lambda = log_l.exp();
            score = s_new;
        }
        let span = if round == 0 { h } else { 0.25 * h };
        for axis in 0..d {
            let base = center[axis];
            let (c_new, s_new) = golden_max(
                |c| {
                    let mut trial = center.clone();
                    trial[axis] = c;
                    ctx.score(&trial, lambda)
                },
                base - span,
                base + span,
                25,
            );
            if s_new >= score {
                center[axis] = c_new;
                score = s_new;
            }
        }
    }
    wrap_center(&grid, &mut center);
    Some(BubbleFit {
        lambda,
        center,
        correlation: score.min(1.0),
    })
}

/// Wraps centre coordinates back into `[-L, L)`.
fn wrap_center(grid: &Grid, center: &mut [f64]) {
    let l = grid.half_length();
    for c in center.iter_mut() {
        *c = (*c + l).rem_euclid(2.0 * l) - l;
    }
}
