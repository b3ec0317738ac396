#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::single_range_in_vec_init)]

pub mod backtest;
pub mod data;
pub mod dist;
pub mod error;
pub mod estimation;
pub mod exec;
pub mod garch;
pub mod io;
pub mod lp;
pub mod optim;
pub mod pcc;
pub mod portfolio;
pub mod simulate;
pub mod structure;
pub mod synth;
pub mod tcopula;

pub use data::{CopulaParams, Dag, DagCopula, FittedModel, GarchParams, ReturnPanel};
pub use error::{Error, Result};
