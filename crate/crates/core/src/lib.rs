//! Personal food model engine.

pub mod canonical;
pub mod chronicle;
pub mod enrichment;
pub mod taste;
pub mod time;
pub mod config;
pub mod mining;
pub mod model;
pub mod recommend;
pub mod synth;
pub mod store;
pub mod api;
