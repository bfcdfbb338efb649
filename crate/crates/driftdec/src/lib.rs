//! MAP decoding of synchronization-error-correcting codes over the binary
//! substitution/insertion/deletion (BSID) channel.
//!
//! The decoder runs the forward-backward algorithm over the channel drift,
//! with the per-symbol receiver metric computed by a corridor-constrained
//! lattice recursion, batched over all drift endpoints.  Two storage
//! schedules are provided: *global*, where all transition metrics for a
//! frame are materialized before the forward/backward passes, and *local*,
//! where transition metrics are recomputed per index and only a small ring
//! of slabs is held.  Both schedules, and the serial and worker-pool
//! engines driving them, produce bitwise-identical posteriors.
//!
//! An execution planner selects tile and grid sizes for the worker-pool
//! engine against an abstract device model, and a simulation harness
//! ([`sim`], driven by the `driftdec` binary) runs seeded Monte Carlo
//! error-rate sweeps and benchmarks.
//!
//! See the `examples/` directory for runnable walkthroughs of each
//! capability.

pub mod bits;
pub mod channel;
pub mod cli;
pub mod codebook;
pub mod decoder;
mod error;
pub mod lattice;
pub mod numeric;
pub mod oracle;
pub mod planner;
pub mod sim;

pub use error::{Error, Result};
