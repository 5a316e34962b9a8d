//! Unitary multi-dimensional FFT on cubic row-major arrays.
//!
//! The last axis is contiguous and transformed in place. Every other axis is
//! handled by gathering a few columns at a time into a line-major buffer,
//! transforming, and scattering back.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry((n, forward))
        .or_insert_with(|| {
            let dir = if forward {
                FftDirection::Forward
            } else {
                FftDirection::Inverse
            };
            FftPlanner::new().plan_fft(n, dir)
        })
        .clone()
}

/// Lines handed to one rayon task on the contiguous axis.
const LINES_PER_TASK: usize = 64;
/// Columns gathered together on strided axes.
const COLUMNS: usize = 16;

/// In-place unitary transform of an `n^d` array.
pub(crate) fn transform(values: &mut [Complex64], n: usize, dim: usize, forward: bool) {
    let fft = plan(n, forward);
    debug_assert_eq!(values.len(), n.pow(dim as u32));
    values.par_chunks_mut(n * LINES_PER_TASK).for_each(|chunk| {
        let mut work = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(chunk, &mut work);
    });
    for axis in 0..dim - 1 {
        let stride = n.pow((dim - 1 - axis) as u32);
        values.par_chunks_mut(n * stride).for_each(|block| {
            strided_block(block, n, stride, fft.as_ref());
        });
    }
    let scale = 1.0 / (values.len() as f64).sqrt();
    values.par_iter_mut().for_each(|v| *v *= scale);
}

/// Transforms every column of an `[n][stride]` block along its first index.
fn strided_block(block: &mut [Complex64], n: usize, stride: usize, fft: &dyn Fft<f64>) {
    let zero = Complex64::new(0.0, 0.0);
    let mut buf = vec![zero; n * COLUMNS];
    let mut work = vec![zero; fft.get_inplace_scratch_len()];
    let mut c0 = 0;
    while c0 < stride {
        let width = COLUMNS.min(stride - c0);
        for i in 0..n {
            let row = &block[i * stride + c0..i * stride + c0 + width];
            for (b, &v) in row.iter().enumerate() {
                buf[b * n + i] = v;
            }
        }
        fft.process_with_scratch(&mut buf[..width * n], &mut work);
        for i in 0..n {
            let row = &mut block[i * stride + c0..i * stride + c0 + width];
            for (b, v) in row.iter_mut().enumerate() {
                *v = buf[b * n + i];
            }
        }
        c0 += width;
    }
}
