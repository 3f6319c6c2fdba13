//! Physics-informed neural state estimation for transmission grids.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: case description, case-file parsers and the bus admittance matrix.
//! - [`powerflow`]: Newton-Raphson AC power flow used as the ground-truth generator.
//! - [`scenario`]: dataset synthesis (load profiles, disturbances, quasi-static
//!   faults), measurement noise, preprocessing and data-manipulation attacks.
//! - [`neural`]: a dense tanh MLP with hand-written reverse-mode gradients,
//!   Glorot initialisation, Adam and early stopping.
//! - [`pinn`]: the composite data / physics / constants loss.
//! - [`estimator`]: a scenario prepared for training and the shared fit/score path.
//! - [`hpo`]: loss-weight simplex enumeration with TPE-guided trials.

pub mod error;
pub mod estimator;
pub mod grid;
pub mod hpo;
pub mod linalg;
pub mod neural;
pub mod pinn;
pub mod powerflow;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use num_complex::Complex64;
