//! Spatial behavior programs for a small-sided soccer arena: a behavior
//! language, its state machine runtime, spatial constraint fields, the
//! simulator, and the synthesis / repair loop that turns narrated
//! demonstrations into programs.

pub mod constraint;
pub mod domain;
pub mod dsl;
pub mod fixtures;
pub mod fsm;
pub mod grounding;
pub mod manufacturing;
pub mod metrics;
pub mod sim;
pub mod synth;
