//! l-diversity anonymization of tabular microdata by suppression.
//!
//! The core is a three-phase tuple-minimization engine ([`tp::run_tp`]) that
//! partitions a table into star-free QI-groups plus a suppressed residue set,
//! with provable bounds on the number of suppressed tuples. Around it:
//!
//! * [`optimal`] — exact solvers (assignment-based matching for two SA
//!   values, brute-force oracles) used to validate the bounds;
//! * [`baseline`] — a Hilbert-curve partitioning baseline and the hybrid
//!   that refines the engine's residue with it;
//! * [`metrics`] — suppression materialization, star/tuple counts and
//!   KL-divergence;
//! * [`gadget`] — a matching-based hard-instance generator;
//! * [`cli`] — CSV ingestion, job running, reports and a synthetic
//!   data generator.

pub mod baseline;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod gadget;
pub mod metrics;
pub mod model;
pub mod optimal;
pub mod tp;

pub use error::{Error, Result};
