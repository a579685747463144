//! Rashomon-set enumeration of sparse binary decision trees and the
//! query-by-committee active-learning strategies built on top of it.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`] loads, splits and corrupts binarized classification data.
//! * [`tree`] holds the sparse tree model, its regularized objective and a
//!   canonical key used for deduplication and ordering.
//! * [`enumerator`] finds the optimal tree and enumerates every tree within
//!   `epsilon` of it, with a brute-force oracle for small instances.
//! * [`patterns`] groups trees that classify a reference set identically.
//! * [`committee`] does vote accounting, vote entropy and majority voting.
//! * [`learners`] trains the random-forest baseline committee.
//! * [`active`] runs the pool-based active-learning loop (UNREAL, DUREAL,
//!   random-forest QBC and passive sampling).
//! * [`analysis`] has the metrics, the threshold sweep and the Wilcoxon
//!   signed-rank test.
//! * [`synthetic`] generates the MONK-1 problem and other test data.

pub mod active;
pub mod analysis;
pub mod bitset;
pub mod committee;
pub mod dataset;
pub mod enumerator;
pub mod error;
pub mod learners;
pub mod patterns;
pub mod rng;
pub mod synthetic;
pub mod tree;

pub use error::{Error, Result};
