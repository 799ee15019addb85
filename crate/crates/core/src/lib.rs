//! Averaged-model simulator of a multi-module input-parallel output-parallel
//! AC-DC-DC supply with PI, LADRC and adaptive LADRC control, duty-cycle
//! ripple compensation and hierarchical delay current sharing.

pub mod analysis;
pub mod control;
pub mod engine;
pub mod hdcsc;
pub mod plant;
pub mod scenario;

pub use engine::{run_simulation, SimOutput, Trace};
pub use scenario::Scenario;
