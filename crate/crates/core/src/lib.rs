pub mod bfv;
pub mod compression;
pub mod error;
pub mod protocol;
pub mod ring;
pub mod seeds;
pub mod shamir;
pub mod trainer;
pub mod transport;

pub use error::{Error, Result};
