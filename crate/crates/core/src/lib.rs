//! Selling information in symmetric quadratic-Gaussian games.
//!
//! A designer who observes the common state recommends actions to `n` players
//! with private types, sells the recommendation for a payment, and chooses the
//! joint Gaussian law of (actions, types, state). This crate characterizes the
//! implementable mechanisms, computes welfare- and revenue-optimal ones in closed
//! form, and ships brute-force and Monte Carlo oracles to check them.

pub mod design;
pub mod error;
pub mod game;
pub mod incentives;
pub mod jn;
pub mod mechanism;
pub mod oracle;
mod roots;

pub use design::{Branch, NashBenchmark, Objective, SolveReport};
pub use error::{Error, Result};
pub use game::{GameSpec, PresetKind, Prior};
pub use incentives::{IncentiveReport, PaymentSchedule};
pub use mechanism::{FullMechanism, LinearRepresentation, PsdMargins, SymMechanism};
