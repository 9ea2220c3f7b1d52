pub mod band;
pub mod basis;
pub mod error;
pub mod expansion;
pub mod nullspace;
pub mod operator;
pub mod oracle;
pub mod reconstruct;

pub use error::{Error, Result};
