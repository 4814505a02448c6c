//! Battery hybrid-modeling toolkit.
//!
//! Combines two physics-based lithium-ion battery models — a single particle
//! model with thermal dynamics (SPMT) and the nonlinear double capacitor
//! equivalent circuit (NDC) — with a small feedforward neural network into
//! the HYBRID-1 (residual correction) and HYBRID-2 (direct voltage)
//! frameworks, including an aging-aware variant that feeds state-of-health
//! to the network.
//!
//! Sign convention used throughout: positive current = discharge.

pub mod cli;
pub mod config;
pub mod core;
pub mod datagen;
pub mod error;
pub mod fnn;
pub mod hybrid;
pub mod interp;
pub mod ndc;
pub mod spmt;
pub mod svg;

pub use error::{Error, Result};
