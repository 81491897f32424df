pub mod certify;
pub mod config;
pub mod error;
pub mod funnel;
pub mod lp;
pub mod oracle;
pub mod plants;
pub mod poly;
pub mod sampler;
pub mod sim;
pub mod sop;
pub mod task;
pub mod tube;
mod weibull;

pub use error::{Error, Result};
