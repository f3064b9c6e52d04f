//! Deterministic grid-world exploration engine.
//!
//! Occupancy grids and a ray-cast sensor, an incrementally grown roadmap,
//! capped community partitioning with a sparse global graph, local and global
//! routing guideposts, a privileged coverage expert and the episode driver
//! that ties them together. Everything here is `no_std` + `alloc`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod community;
pub mod env;
pub mod error;
pub mod expert;
pub mod grid;
pub mod mapgen;
pub mod policy;
pub mod roadmap;
pub mod routing;
pub mod tsp;

pub use error::{Error, Result};
