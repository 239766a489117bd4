//! Online change-point detection for regression and mean streams under local
//! differential privacy, with non-private baselines.
//!
//! Each observation is privatized on its own by a Laplace channel
//! ([`privacy`]), summarized into per-bin running sums ([`estimation`]) and
//! scanned by a CUSUM detector ([`detection`]). [`simulation`] generates
//! synthetic streams and runs replicated experiments.

pub mod detection;
pub mod error;
pub mod estimation;
pub mod noise;
pub mod privacy;
pub mod simulation;

pub use error::{Error, Result};
