//! Versioned typed story graphs with causal and reader-affect physics.

pub mod world;
pub mod version;
pub mod ego;
pub mod amwn;
pub mod intervention;
pub mod causal;
pub mod narrative;
pub mod directive;
pub mod engine;
