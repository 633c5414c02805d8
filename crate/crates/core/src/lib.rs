//! Heat equation on convex rings: an embedded-boundary solver, smooth
//! space-time evaluation of the solution, analytic oracles, and the
//! two-point convexity checks built on top of them.

pub mod cli;
pub mod convexity;
pub mod dump;
pub mod error;
pub mod field;
pub mod geometry;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{Point, SpaceTimePoint};
