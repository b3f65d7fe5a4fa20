//! Version identifiers, version DAGs, and sets of versions.
//!
//! Versions are dense 1-based ids assigned in creation order, which makes
//! `1..=n` a topological order of the DAG. A [`VersionSet`] is a bitset over
//! version ids; its compact on-disk form is the entry/exit encoding produced
//! by [`materialize`]: instead of every member, only the versions where
//! membership begins (relative to the DAG's predecessor relation) and the
//! versions where it ends are stored. [`dematerialize`] reconstructs the
//! exact set by one forward pass over the DAG.

use crate::error::{Error, Result};
use crate::ids::VersionId;
use fixedbitset::FixedBitSet;
use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

/// A set of versions, backed by a bitset indexed by version id.
#[derive(Clone, Debug, Default)]
pub struct VersionSet {
    bits: FixedBitSet,
}

impl VersionSet {
    pub fn new() -> Self {
        VersionSet { bits: FixedBitSet::new() }
    }

    /// An empty set pre-sized for versions `1..=n`.
    pub fn with_versions(n: usize) -> Self {
        VersionSet { bits: FixedBitSet::with_capacity(n + 1) }
    }

    pub fn singleton(v: VersionId) -> Self {
        let mut s = VersionSet::new();
        s.insert(v);
        s
    }

    pub fn from_iter(vs: impl IntoIterator<Item = VersionId>) -> Self {
        let mut s = VersionSet::new();
        for v in vs {
            s.insert(v);
        }
        s
    }

    fn idx(v: VersionId) -> usize {
        v.0 as usize
    }

    pub fn insert(&mut self, v: VersionId) {
        let i = Self::idx(v);
        if i >= self.bits.len() {
            self.bits.grow(i + 1);
        }
        self.bits.insert(i);
    }

    pub fn remove(&mut self, v: VersionId) {
        let i = Self::idx(v);
        if i < self.bits.len() {
            self.bits.remove(i);
        }
    }

    pub fn contains(&self, v: VersionId) -> bool {
        self.bits.contains(Self::idx(v))
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = VersionId> + '_ {
        self.bits.ones().map(|i| VersionId(i as u32))
    }

    pub fn union_with(&mut self, other: &VersionSet) {
        self.bits.union_with(&other.bits);
    }

    pub fn intersect_with(&mut self, other: &VersionSet) {
        self.bits.intersect_with(&other.bits);
    }

    pub fn subtract(&mut self, other: &VersionSet) {
        self.bits.difference_with(&other.bits);
    }

    pub fn is_subset(&self, other: &VersionSet) -> bool {
        self.bits.is_subset(&other.bits)
    }
}

impl PartialEq for VersionSet {
    fn eq(&self, other: &Self) -> bool {
        // Compare membership, not capacity.
        self.bits.is_subset(&other.bits) && other.bits.is_subset(&self.bits)
    }
}
impl Eq for VersionSet {}

impl FromIterator<VersionId> for VersionSet {
    fn from_iter<I: IntoIterator<Item = VersionId>>(iter: I) -> Self {
        VersionSet::from_iter(iter)
    }
}

impl Serialize for VersionSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let vs: Vec<VersionId> = self.iter().collect();
        vs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VersionSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let vs: Vec<VersionId> = Vec::deserialize(deserializer)?;
        Ok(VersionSet::from_iter(vs))
    }
}

/// A directed acyclic graph of versions with dense 1-based ids.
///
/// Ids are assigned in creation order, so every predecessor of a version has
/// a smaller id and `1..=n` is a topological order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VersionDag {
    /// preds[v.0 as usize]; index 0 is unused.
    preds: Vec<Vec<VersionId>>,
    succ_count: Vec<u32>,
}

impl VersionDag {
    /// A DAG with a single root version 1.
    pub fn new_root() -> Self {
        VersionDag { preds: vec![Vec::new(), Vec::new()], succ_count: vec![0, 0] }
    }

    /// Builds a DAG from per-version predecessor lists (`preds[0]` belongs to
    /// version 1). Predecessors must have smaller ids; duplicates are
    /// rejected.
    pub fn from_preds(pred_lists: Vec<Vec<VersionId>>) -> Result<Self> {
        let mut dag = VersionDag { preds: vec![Vec::new()], succ_count: vec![0] };
        for (i, ps) in pred_lists.into_iter().enumerate() {
            let v = VersionId(i as u32 + 1);
            dag.push_version(v, ps)?;
        }
        Ok(dag)
    }

    fn push_version(&mut self, v: VersionId, ps: Vec<VersionId>) -> Result<()> {
        let mut seen = Vec::new();
        for &p in &ps {
            if p.0 == 0 || p >= v {
                return Err(Error::input(format!(
                    "version {v} lists predecessor {p}, which is not an earlier version"
                )));
            }
            if seen.contains(&p) {
                return Err(Error::input(format!("version {v} lists predecessor {p} twice")));
            }
            seen.push(p);
        }
        for &p in &ps {
            self.succ_count[p.0 as usize] += 1;
        }
        self.preds.push(ps);
        self.succ_count.push(0);
        Ok(())
    }

    /// Adds a version with the given predecessors; returns its id.
    pub fn add_version(&mut self, preds: Vec<VersionId>) -> Result<VersionId> {
        let v = VersionId(self.version_count() as u32 + 1);
        self.push_version(v, preds)?;
        Ok(v)
    }

    pub fn version_count(&self) -> usize {
        self.preds.len() - 1
    }

    pub fn contains(&self, v: VersionId) -> bool {
        v.0 >= 1 && (v.0 as usize) < self.preds.len()
    }

    /// All versions in ascending (= topological) order.
    pub fn versions(&self) -> impl Iterator<Item = VersionId> {
        (1..self.preds.len() as u32).map(VersionId)
    }

    pub fn preds(&self, v: VersionId) -> &[VersionId] {
        &self.preds[v.0 as usize]
    }

    pub fn is_leaf(&self, v: VersionId) -> bool {
        self.succ_count[v.0 as usize] == 0
    }

    pub fn leaves(&self) -> Vec<VersionId> {
        self.versions().filter(|&v| self.is_leaf(v)).collect()
    }

    pub fn roots(&self) -> Vec<VersionId> {
        self.versions().filter(|&v| self.preds(v).is_empty()).collect()
    }

    /// The full version set `{1..n}`.
    pub fn all_versions(&self) -> VersionSet {
        let mut s = VersionSet::with_versions(self.version_count());
        for v in self.versions() {
            s.insert(v);
        }
        s
    }
}

/// Compact encoding of a version set relative to a DAG: the versions where
/// membership starts and where it stops.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct MaterializedSet {
    /// Versions in the set whose predecessors are not all in the set (or
    /// that have no predecessors).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cv: Vec<VersionId>,
    /// Versions outside the set with at least one predecessor in the set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dv: Vec<VersionId>,
}

/// Encodes `set` as entry/exit versions relative to `dag`.
pub fn materialize(set: &VersionSet, dag: &VersionDag) -> MaterializedSet {
    let mut cv = Vec::new();
    let mut dv = Vec::new();
    for v in dag.versions() {
        let inside = set.contains(v);
        let preds = dag.preds(v);
        if inside {
            if preds.is_empty() || !preds.iter().all(|&p| set.contains(p)) {
                cv.push(v);
            }
        } else if preds.iter().any(|&p| set.contains(p)) {
            dv.push(v);
        }
    }
    MaterializedSet { cv, dv }
}

/// Reconstructs the exact version set from its entry/exit encoding by one
/// pass in topological order: a version is in the set iff it is not an exit
/// and is either an entry or continues membership from some predecessor.
pub fn dematerialize(m: &MaterializedSet, dag: &VersionDag) -> VersionSet {
    let n = dag.version_count();
    let cv = VersionSet::from_iter(m.cv.iter().copied());
    let dv = VersionSet::from_iter(m.dv.iter().copied());
    let mut out = VersionSet::with_versions(n);
    for v in dag.versions() {
        if dv.contains(v) {
            continue;
        }
        if cv.contains(v) || dag.preds(v).iter().any(|&p| out.contains(p)) {
            out.insert(v);
        }
    }
    out
}
