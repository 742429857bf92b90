//! Adaptive generalized measurements on optical Fock-space states.
//!
//! A measurement is a chain of steps. Each step splits off part of the
//! system light onto a vacuum ancilla, applies a parametrized unitary to the
//! tapped mode and detects it; the outcome history selects the setting of
//! the next step. The resulting decision tree is scored by how well its leaf
//! statistics separate a pool of candidate states.
//!
//! Module map:
//! - [`fock`]: dense complex matrices and density matrices.
//! - [`elements`]: candidate pools, unitaries, beam splitters, detectors.
//! - [`channel`]: per-step Kraus operators and conditional states.
//! - [`tree`]: the decision tree and its leaf tables.
//! - [`merit`]: figures of merit.
//! - [`optimize`]: greedy and exhaustive parameter search.
//! - [`experiment`]: configs, batch runs and artifacts.

pub mod channel;
pub mod elements;
pub mod experiment;
pub mod fock;
pub mod merit;
pub mod optimize;
mod quadrature;
pub mod tree;

pub use channel::{Branch, ChannelError, MeasurementStep};
pub use elements::{CandidatePool, DetectorKind, PovmFamily, UnitaryFamily, UnitaryKind};
pub use experiment::{Experiment, ExperimentConfig, ExperimentError};
pub use fock::{ComplexMatrix, DensityMatrix, FockError};
pub use merit::MeritReport;
pub use optimize::{Objective, RefinePolicy, SweepGrid};
pub use tree::{DecisionTree, LeafTable, NodeKind, TreeNode};
