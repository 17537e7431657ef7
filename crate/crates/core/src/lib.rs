//! Simulation and analysis of maximally entangled spatial qudits carried by
//! down-converted photon pairs sent through D-slit apertures.
//!
//! The crate is organized around the stages of the experiment:
//!
//! - [`geometry`]: physical parameters and slit labelling shared by every stage.
//! - [`state_prep`]: ideal, classically correlated and numerically projected two-qudit states.
//! - [`far_field`]: fourth-order (coincidence) interference behind lenses.
//! - [`experiment`]: near-field coincidence scans, histograms, reconstruction and fidelity.
//! - [`diagnostics`]: entanglement measures and the conditional-fringe witness.
//! - [`cli`]: the `biphoton-qudit-sim` command-line front end.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod far_field;
pub mod geometry;
pub mod io;
pub mod quadrature;
pub mod state_prep;
pub mod svg;

pub use error::{Error, Result};
pub use geometry::{slit_indices, ExperimentGeometry, GeometryConfig, SlitIndex};
