//! Multi-task learning over facet lattices.
//!
//! The crate is `no_std` (with `alloc`) and holds everything that is pure
//! computation: dense networks and Adam, the switcher family (shared-bottom,
//! MMOE, CGC, PLE), construction and validation of flat, hierarchical,
//! multi-faceted and biasnet task graphs, the training engine with routing
//! masks and metrics, and the dataset model with label derivation, region
//! assignment, splitting and a synthetic generator. File formats and the
//! command line live in the `mfh-workbench` crate.
#![no_std]
extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod activation;
pub mod adam;
pub mod data;
pub mod engine;
pub mod error;
pub mod lattice;
pub mod matrix;
pub mod mlp;
pub mod params;
pub mod presets;
pub mod seed;
pub mod switcher;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use params::Parameters;
