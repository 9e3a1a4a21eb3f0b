//! Decision-tree extraction with fault injection and a path-length side
//! channel, plus the tooling around it: a victim model and oracle, a
//! fault-free top-down baseline, tree generators and equivalence checks.

pub mod baseline;
pub mod equivalence;
pub mod error;
pub mod experiment;
pub mod extract;
pub mod oracle;
pub mod tree;
pub mod treegen;

pub use baseline::{baseline_extract, BaselineExtraction, LeafConstraintBox};
pub use equivalence::{functionally_equivalent, grid_mismatches, EquivalenceReport};
pub use error::{Error, Result};
pub use extract::{tree_ext, Extraction, ExtractionConfig, LeafKey, RecoveredNode, RecoveredPath};
pub use oracle::{FaultSpec, GlitchMode, GlitchModel, Oracle, QueryLedger, VictimOracle};
pub use tree::{Branch, FeatureSpec, LeafLabel, Task, TreeBuilder, VictimTree};
