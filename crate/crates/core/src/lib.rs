//! Incremental reputation over a time-sliced interaction graph.
//!
//! Events (votes, comments, payments, ...) are bucketed into per-period
//! evidence subgraphs. Each period's evidence is reduced to pairwise
//! ratings, weighted by the rater's prior reputation and by the size of
//! any money involved, normalized against the period's best performer,
//! and blended into the previous state with a decay factor. Scores live
//! in [0, 1]; accounts nobody has rated sit at the default.
//!
//! The update is incremental by construction: period N's state depends
//! only on period N's evidence and period N-1's state, so a run needs
//! at most one evidence subgraph and two states in memory no matter how
//! long the history is. States and evidence serialize to canonical
//! per-period files, and replaying any range from those files lands on
//! byte-identical states.
//!
//! Module map: [`graph`] holds the temporal graph and residency
//! bookkeeping, [`ontology`] parses and projects events and derives
//! ratings, [`engine`] owns the update pipeline, [`persist`] the file
//! formats and stores, [`sim`] the synthetic-cohort harness, and
//! [`decimal`] exact monetary amounts.

pub mod decimal;
pub mod engine;
pub mod graph;
pub mod ontology;
pub mod persist;
pub mod sim;

pub use decimal::Decimal;
pub use engine::{EngineError, EngineParams, ReputationState};
pub use graph::{GraphStore, NodeId, PeriodId, TemporalSubgraph};
pub use persist::{EvidenceStore, FsStore, MemStore, PersistError, StateStore};
