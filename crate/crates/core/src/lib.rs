//! Compression of extensional table constraints with maximal frequent
//! itemsets, and GAC propagation over plain and compressed tables.
pub mod compression;
pub mod harness;
pub mod io;
pub mod mining;
pub mod model;
pub mod propagation;
mod reversible;
pub mod search;

pub use compression::{
    compress_table, compression_stats, decompress, CompressedTable, CompressionConfig, CompressionStats, Entry,
    Metric, SminStrategy,
};
pub use io::{CompressedModel, GenParams, IoError, SeededRng, StatsRow};
pub use mining::{Itemset, Literal, MinedPattern, TidSet, TransactionDB};
pub use model::{Assignment, Instance, ModelError, TableConstraint, Value, VarId};
pub use propagation::{DomainState, PropagationOutcome, PropagationStatus, Propagator, UnderflowError};
pub use search::{
    solve, PropagatorKind, SearchMode, SolveConfig, SolveResult, SolveStats, SolveStatus, VarHeuristic,
};
