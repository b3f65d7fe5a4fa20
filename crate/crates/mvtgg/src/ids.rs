//! Opaque identifiers for graph elements and versions.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Stable identifier of a graph element (node or edge).
///
/// Ids are opaque 64-bit values. They are assigned once and never reused or
/// renumbered, so serialized references stay valid across engine runs.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u64);

impl fmt::Debug for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifier of a version in a version history.
///
/// Versions are numbered densely from 1 in creation order; the cap keeps
/// version sets representable as fixed-stride bitsets.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VersionId(pub u32);

/// Hard upper bound on the number of versions a history may contain.
pub const MAX_VERSIONS: u32 = 1 << 20;

impl fmt::Debug for VersionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for VersionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
