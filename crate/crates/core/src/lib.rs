pub mod ensembles;
pub mod error;
pub mod exact;
pub mod limits;
pub mod process;
pub mod sampling;
pub mod testfn;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use sampling::{Beta, HaarMatrix};
pub use seed::Seed;
