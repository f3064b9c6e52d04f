//! File formats, the stepping protocol server, episode logs and batch runs
//! on top of `explore-core`.

pub mod clock;
pub mod dump;
pub mod log;
pub mod pgm;
pub mod plot;
pub mod protocol;
pub mod runner;

pub use explore_core;
