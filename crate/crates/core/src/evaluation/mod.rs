//! Training losses and depth metrics.

mod losses;
mod metrics;

pub use losses::*;
pub use metrics::*;
