//! Short-range particle interactions on a simulated SIMT device.
//!
//! The engine bins particles into a uniform grid (counts, prefix offsets,
//! stable reorder), then runs cutoff pair kernels under seven execution
//! strategies ranging from one-thread-per-particle to staged shared-memory
//! schemes (whole sub-boxes, X-pencils, and a register-latched pencil
//! variant). Every strategy executes against a device model that counts
//! global and shared record traffic, barriers, idle lanes, and coalesced
//! transactions instead of measuring time, and every strategy's outputs are
//! checked against an all-pairs double-precision reference.

pub mod binning;
pub mod error;
pub mod gpumodel;
pub mod grid;
pub mod kernels;
pub mod launchcfg;
pub mod oracle;
pub mod particles;
pub mod prefixsum;
pub mod report;
pub mod scenario;
pub mod strategies;

pub use error::{Error, Result};
