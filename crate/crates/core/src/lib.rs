//! Small-noise diffusions near heteroclinic networks.
//!
//! The crate is organised around four layers:
//!
//! * [`model`]: network specifications (saddles, affine eigen-charts,
//!   connections, exit leaves), validation and the shipped systems.
//! * [`flow`]: deterministic RK4 flow and variational equations, connection
//!   geometry and the Gaussian transport of fluctuations along orbits.
//! * [`exitmap`]: the limiting entrance/exit map at a saddle, the sequence
//!   tree with its probabilities, and exit-measure prediction.
//! * [`sde`]: Euler–Maruyama simulation with saddle-passage detection and
//!   seeded Monte Carlo ensembles.
//!
//! [`curve`] implements space-time curves, jump curves and the
//! reparametrisation-invariant distance used to compare the two.

pub mod curve;
pub mod error;
pub mod exitmap;
pub mod field;
pub mod flow;
pub mod linalg;
pub mod model;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use model::{NetworkSpec, Sign};
