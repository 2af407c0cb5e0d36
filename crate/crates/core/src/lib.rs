//! Mixed discrete/continuous black-box optimization through learned variable
//! graphs.

pub mod bandit;
pub mod bench;
pub mod engine;
pub mod error;
pub mod gpbo;
pub mod graphmold;
pub mod neural;
pub mod space;

pub use error::{Error, Result};
