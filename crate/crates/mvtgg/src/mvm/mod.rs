//! Multi-version models: version DAGs and histories, the single-graph
//! encoding of all versions at once, rule adaptation to that encoding,
//! joint translation, per-version projection, and incremental
//! synchronization of the translated model under history modifications.

pub mod adapt;
pub mod history;
pub mod model;
pub mod sync;
pub mod versions;
