//! Journal citation environments.
//!
//! Pipeline: [`ingest`] a citing-by-cited count matrix, carve out the
//! [`environment`] of a seed journal, connect its members by cosine
//! similarity ([`simgraph`]), analyze citing patterns with rotated principal
//! components ([`factors`]), and [`export`] maps and tables.

pub mod cli;
pub mod environment;
pub mod export;
pub mod factors;
pub mod ingest;
pub mod simgraph;

pub use environment::{
    build_environment, cn_values, pearson_r, self_cite_rate, Direction, Environment, NodeGeometry,
};
pub use factors::{ComponentCount, FactorModel, FactorOptions, LoadingsTable};
pub use ingest::{parse_matrix, parse_metadata, validate_matrix, CitationMatrix, JournalMeta, MatrixFormat};
pub use simgraph::{build_graph, cosine, similarity_matrix, DiagonalPolicy, SimilarityGraph};
