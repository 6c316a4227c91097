//! Step-response driven PID self-tuning.
//!
//! The pipeline has three stages:
//!
//! 1. [`sim`] runs closed-loop step tests of LTI and nonlinear plants.
//! 2. [`metrics`] turns a response into the indicator vector
//!    `[overshoot, steady-state error, rise time, settling time]` and a
//!    weighted cost against a target response.
//! 3. [`policy`] learns a map from indicators to gain increments from
//!    simulated expert data, and [`learner`] iterates step test, cost,
//!    prediction and gain update until the cost threshold is met.
//!
//! [`certifier`] checks learned gains against the three-dimensional
//! stability region for second-order plants with Lipschitz nonlinearities.

pub mod certifier;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod policy;
pub mod presets;
pub mod sim;

pub use error::{Error, Result};
