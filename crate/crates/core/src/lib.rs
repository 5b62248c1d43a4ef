//! Elliptic determinantal process of type A on a circle: theta-function machinery,
//! drift fields, determinant identities, transition densities, correlation kernels
//! and SDE simulation.

pub mod drift;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod oracles;
pub mod process;
pub mod quad;
pub mod sde;
pub mod verify;
pub mod special;

pub use error::{EdpaError, Result};
