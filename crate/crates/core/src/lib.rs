//! Rate-outage analysis and energy-constrained power allocation for
//! incremental-MIMO links using ARQ, CC-HARQ and IR-HARQ over Rayleigh block
//! fading.

pub mod cli;
pub mod error;
pub mod montecarlo;
pub mod optimize;
pub mod outage;
pub mod specfun;

pub use error::{Error, Result};
pub use outage::{OutageMethod, OutageProfile, PowerSchedule, Scheme, SystemConfig};
