#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod diagnostics;
pub mod experiments;
pub mod ground_state;
pub mod integrator;
pub mod io;
pub mod spectral;
