pub mod cli;
pub mod config;
pub mod error;
pub mod fock;
pub mod noise;
pub mod pattern;
pub mod performance;
pub mod protocol;
pub mod verify;

pub use error::{Error, Result};
