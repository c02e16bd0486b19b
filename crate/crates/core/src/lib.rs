//! Interdependent power grid, cellular network and road traffic model, with a
//! leader-follower game for placing backup power against stealthy attacks.

pub mod coverage;
pub mod error;
pub mod experiment;
pub mod game;
pub mod geom;
pub mod grid;
pub mod impact;
pub mod its;
pub mod linalg;
pub mod scenario;

pub use error::{Error, Result};
