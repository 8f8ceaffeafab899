//! A finite-horizon workbench for effective numberings of the partial
//! computable functions: descriptors, a reference machine, ceers, rule-table
//! numberings, the Friedberg and tying constructions, and three stage
//! constructions with trace checking and rendering.

pub mod aux;
pub mod ceer;
pub mod cli;
pub mod config;
pub mod engines;
pub mod geometry;
pub mod kernel;
pub mod lazyset;
pub mod machine;
pub mod numbering;
pub mod reductions;
pub mod scenarios;
pub mod trace;
