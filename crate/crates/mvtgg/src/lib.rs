//! Joint transformation and synchronization engine for version histories of
//! typed graphs.

pub mod bench;
pub mod delta;
pub mod error;
pub mod formats;
pub mod generator;
pub mod graph;
pub mod ids;
pub mod iso;
pub mod matcher;
pub mod morphism;
pub mod mvm;
pub mod oracle;
pub mod rule;
pub mod samples;
pub mod svm;
pub mod tgg;
pub mod typegraph;
