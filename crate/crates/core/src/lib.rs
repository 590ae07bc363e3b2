pub mod error;
pub mod operator;
pub mod campaign;
pub mod cli;
pub mod coding_sim;
pub mod hypotest;
pub mod naimark;
pub mod second_order;
pub mod union_bound;

pub use error::{Error, Result};
