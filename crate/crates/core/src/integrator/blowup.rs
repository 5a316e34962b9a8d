//! Blow-up time extrapolation from a mass history.
//!
//! Near a finite-time singularity `‖u‖²` grows like `(t* - t)^{-1/α}`, so
//! `M^{-α}` is affine in `t` and vanishes at `t*`. The exponent is chosen to
//! make the tail of the history as straight as possible.

use super::IntegratorError;

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupEstimate {
    /// Last time in the history.
    pub t_raw: f64,
    /// Extrapolated singular time, absent when the tail is not growing.
    pub t_estimate: Option<f64>,
    /// Fitted exponent.
    pub alpha: Option<f64>,
    /// `min I''` over the history, with `I'' = ½ dM/dt` by finite differences.
    pub i_second_min: f64,
}

const MIN_SAMPLES: usize = 10;

/// Least-squares line through `(x, y)`; returns (slope, intercept, r²).
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        0.0
    };
    (slope, my - slope * mx, r2)
}

fn fit_quality(t: &[f64], mass: &[f64], alpha: f64) -> f64 {
    let y: Vec<f64> = mass.iter().map(|m| m.powf(-alpha)).collect();
    linear_fit(t, &y).2
}

/// Estimates the singular time from `(t, ‖u(t)‖²)` samples.
pub fn detect_blowup_time(t: &[f64], mass: &[f64]) -> Result<BlowupEstimate, IntegratorError> {
    if t.len() != mass.len() || t.len() < MIN_SAMPLES {
        return Err(IntegratorError::InsufficientHistory(
            t.len().min(mass.len()),
        ));
    }
    let n = t.len();
    let mut i_second_min = f64::INFINITY;
    for i in 1..n - 1 {
        let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        let dm = -h1 / (h0 * (h0 + h1)) * mass[i - 1]
            + (h1 - h0) / (h0 * h1) * mass[i]
            + h0 / (h1 * (h0 + h1)) * mass[i + 1];
        i_second_min = i_second_min.min(0.5 * dm);
    }
    let t_raw = t[n - 1];

    // tail: last half of the history
    let tail = n / 2;
    let (tt, mm) = (&t[tail..], &mass[tail..]);
    let growing = mm.windows(2).all(|w| w[1] > w[0]) && mm[0] > 0.0;
    if !growing || mm[mm.len() - 1] < mm[0] * (1.0 + 1e-9) {
        return Ok(BlowupEstimate {
            t_raw,
            t_estimate: None,
            alpha: None,
            i_second_min,
        });
    }

    // coarse log-spaced scan, then golden-section refinement in ln α
    let scan: Vec<f64> = (0..=60)
        .map(|i| (0.05f64.ln() + i as f64 * (20.0f64.ln() - 0.05f64.ln()) / 60.0).exp())
        .collect();
    let (mut best_i, mut best_q) = (0, f64::NEG_INFINITY);
    for (i, &a) in scan.iter().enumerate() {
        let q = fit_quality(tt, mm, a);
        if q > best_q {
            best_q = q;
            best_i = i;
        }
    }
    let lo = scan[best_i.saturating_sub(1)].ln();
    let hi = scan[(best_i + 1).min(scan.len() - 1)].ln();
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..60 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if fit_quality(tt, mm, c.exp()) >= fit_quality(tt, mm, d.exp()) {
            b = d;
        } else {
            a = c;
        }
    }
    let alpha = (0.5 * (a + b)).exp();
    let y: Vec<f64> = mm.iter().map(|m| m.powf(-alpha)).collect();
    let (slope, intercept, _) = linear_fit(tt, &y);
    let t_estimate = (slope < 0.0)
        .then(|| -intercept / slope)
        .filter(|v| v.is_finite());
    Ok(BlowupEstimate {
        t_raw,
        t_estimate,
        alpha: Some(alpha),
        i_second_min,
    })
}
