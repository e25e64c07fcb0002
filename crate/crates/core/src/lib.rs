//! Resilience-engineering toolkit.
//!
//! Library modules cover temporal and epistemic logic, network motifs,
//! replication walks, copulas, persistent homology, rate adaptation,
//! sheaf Laplacians and active inference. Each use-case simulation lives
//! next to the math it exercises, and [`harness`] drives them from JSON
//! configs with deterministic seeded output.

pub mod actinf;
pub mod copula;
pub mod error;
pub mod graph;
pub mod harness;
pub mod kripke;
pub mod motifnet;
pub mod ratelink;
pub mod rng;
pub mod series;
pub mod sheaf;
pub mod stats;
pub mod stl;
pub mod swarm;
pub mod tda;
pub mod walks;
pub mod wncs;

pub use error::{Error, Result};
pub use graph::Graph;
pub use series::Series;
pub use stl::{Formula, Signal};
pub use tda::PersistenceDiagram;
pub use harness::{ExperimentConfig, UseCase};
