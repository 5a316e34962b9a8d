//! Binary checkpoint of a [`RunState`].
//!
//! All integers and floats are little-endian. Layout, in order:
//!
//! | bytes | type | field |
//! |------:|------|-------|
//! | 8 | `[u8; 8]` | magic `ECGLCKPT` |
//! | 4 | u32 | format version (1) |
//! | 4 | u32 | d |
//! | 4 | u32 | n_per_axis |
//! | 4 | u32 | status: 0 Running, 1 Decayed, 2 BlownUp, 3 MaxTimeReached, 4 StepFailure |
//! | 8 | f64 | L (half box length) |
//! | 8 | f64 | θ |
//! | 8 | f64 | nonlinearity coupling |
//! | 8 | f64 | t |
//! | 8 | u64 | step_index |
//! | 8 | f64 | current dt |
//! | 8 | u64 | clean steps since the last dt change |
//! | 4 | u32 | 1 if an accumulator follows, else 0 |
//! | 24 | 3 × f64 | accumulator: last record time, value, integrand (zeros if absent) |
//! | 8 | f64 | blow-up time estimate (NaN unless BlownUp) |
//! | 8 | u64 | failing step index (0 unless StepFailure) |
//! | 16·n^d | n^d × (f64, f64) | physical samples `(re, im)` in row-major order |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{Flow, IntegratorError, RunState, RunStatus};
use crate::diagnostics::SAccumulator;
use crate::spectral::{ComplexField, Grid, Space, ZParameter};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ECGLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub state: RunState,
    pub flow: Flow,
}

fn io_err(e: std::io::Error) -> IntegratorError {
    IntegratorError::Checkpoint(e.to_string())
}

pub fn write_checkpoint(path: &Path, state: &RunState, flow: &Flow) -> Result<(), IntegratorError> {
    let grid = state.u.grid();
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let (code, t_event, fail_step) = match state.status {
        RunStatus::Running => (0u32, f64::NAN, 0u64),
        RunStatus::Decayed => (1, f64::NAN, 0),
        RunStatus::BlownUp { t_estimate } => (2, t_estimate, 0),
        RunStatus::MaxTimeReached => (3, f64::NAN, 0),
        RunStatus::StepFailure { step_index } => (4, f64::NAN, step_index),
    };
    let acc = state.accumulator.unwrap_or_default();
    let mut header = Vec::with_capacity(160);
    header.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [
        CHECKPOINT_VERSION,
        grid.dim() as u32,
        grid.n_per_axis() as u32,
        code,
    ] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    for v in [grid.half_length(), flow.z.theta(), flow.coupling, state.t] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    header.extend_from_slice(&state.step_index.to_le_bytes());
    header.extend_from_slice(&state.dt.to_le_bytes());
    header.extend_from_slice(&state.clean_steps.to_le_bytes());
    header.extend_from_slice(&(state.accumulator.is_some() as u32).to_le_bytes());
    for v in [acc.t, acc.value, acc.integrand, t_event] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    header.extend_from_slice(&fail_step.to_le_bytes());
    w.write_all(&header).map_err(io_err)?;

    let physical = state.u.to_space(Space::Physical);
    let mut buf = Vec::with_capacity(16 * physical.values().len());
    for v in physical.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)?;
    w.flush().map_err(io_err)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], IntegratorError> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| IntegratorError::Checkpoint("truncated file".into()))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length checked"))
    }

    fn u32(&mut self) -> Result<u32, IntegratorError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64, IntegratorError> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64, IntegratorError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, IntegratorError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(io_err)?)
        .read_to_end(&mut bytes)
        .map_err(io_err)?;
    let mut c = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if &c.take::<8>()? != CHECKPOINT_MAGIC {
        return Err(IntegratorError::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(IntegratorError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let d = c.u32()? as usize;
    let n = c.u32()? as usize;
    let code = c.u32()?;
    let half_length = c.f64()?;
    let theta = c.f64()?;
    let coupling = c.f64()?;
    let t = c.f64()?;
    let step_index = c.u64()?;
    let dt = c.f64()?;
    let clean_steps = c.u64()?;
    let has_acc = c.u32()? != 0;
    let acc = SAccumulator {
        t: c.f64()?,
        value: c.f64()?,
        integrand: c.f64()?,
    };
    let t_event = c.f64()?;
    let fail_step = c.u64()?;
    let status = match code {
        0 => RunStatus::Running,
        1 => RunStatus::Decayed,
        2 => RunStatus::BlownUp {
            t_estimate: t_event,
        },
        3 => RunStatus::MaxTimeReached,
        4 => RunStatus::StepFailure {
            step_index: fail_step,
        },
        other => {
            return Err(IntegratorError::Checkpoint(format!(
                "unknown status code {other}"
            )))
        }
    };
    let grid = Grid::new(d, n, half_length)?;
    let remaining = bytes.len() - c.pos;
    if remaining != 16 * grid.len() {
        return Err(IntegratorError::Checkpoint(format!(
            "expected {} sample bytes, found {remaining}",
            16 * grid.len()
        )));
    }
    let values = (0..grid.len())
        .map(|_| Ok(Complex64::new(c.f64()?, c.f64()?)))
        .collect::<Result<Vec<_>, IntegratorError>>()?;
    let u = ComplexField::from_values(&grid, values, Space::Physical)?.to_space(Space::Spectral);
    Ok(Checkpoint {
        state: RunState {
            t,
            u,
            step_index,
            status,
            dt,
            clean_steps,
            accumulator: has_acc.then_some(acc),
        },
        flow: Flow {
            z: ZParameter::new(theta)?,
            coupling,
        },
    })
}
