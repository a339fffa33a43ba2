#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::field_reassign_with_default))]

pub mod channel;
pub mod cli;
pub mod constellation;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod receiver;
pub mod scenario;
pub mod theory;
pub mod txchain;

pub use error::{Error, Result};
