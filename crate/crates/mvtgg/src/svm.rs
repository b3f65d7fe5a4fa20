//! Copy-based per-version baseline: one fully translated triplet per
//! version. A version-creating modification copies the base version's
//! whole triplet; an element-level modification becomes a local delta
//! synchronized through the single-version engine.
//!
//! Modifications address elements by their history-level (original) ids,
//! while each triplet mints its own correspondence and target ids, so the
//! two id spaces can collide. Every version therefore keeps a map from
//! original ids to its local ids, covering exactly the source elements it
//! contains; new local ids are minted past everything in use.

use crate::delta::{Delta, DeltaOp};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ids::{ElementId, VersionId};
use crate::matcher::TypeIndex;
use crate::mvm::history::{replay, History};
use crate::mvm::sync::Modification;
use crate::oracle::EvolvingSources;
use crate::tgg::triplet::{
    init_translation, run_fixpoint, synchronize, Schedule, SyncOutcome, TransformState,
};
use crate::tgg::Grammar;
use crate::typegraph::{ElementKind, TypeGraph};
use std::collections::BTreeMap;
use std::sync::Arc;

/// One version's triplet plus the bookkeeping that keeps it addressable.
#[derive(Clone)]
pub struct SvmVersion {
    pub state: TransformState,
    pub index: TypeIndex,
    /// Original (history-level) id -> local id, for the source elements
    /// present in this version.
    pub map: BTreeMap<ElementId, ElementId>,
    /// Next free local id.
    pub next_local: u64,
}

impl SvmVersion {
    /// Translates one source model from scratch; original and local ids
    /// coincide for its source elements.
    pub fn translate(source: &Graph, grammar: &Grammar, schedule: &Schedule) -> Result<(Self, usize)> {
        let state = init_translation(source, grammar)?;
        let index = TypeIndex::build(&state.graph);
        let map = source.elements().map(|e| (e.id, e.id)).collect();
        let mut v = SvmVersion { state, index, map, next_local: 0 };
        let applications = run_fixpoint(&mut v.state, grammar, &mut v.index, schedule)?;
        v.bump_next_local();
        Ok((v, applications))
    }

    /// Raises `next_local` past every id currently in the triplet.
    pub fn bump_next_local(&mut self) {
        let max = self.state.graph.elements().map(|e| e.id.0).max().unwrap_or(0);
        self.next_local = self.next_local.max(max + 1);
    }

    fn mint_local(&mut self) -> ElementId {
        let id = ElementId(self.next_local);
        self.next_local += 1;
        id
    }

    fn local(&self, original: ElementId) -> Result<ElementId> {
        self.map.get(&original).copied().ok_or_else(|| {
            Error::contract(format!("element {original} is not present in this version"))
        })
    }

    /// Builds the local-id delta turning `from`'s source content into
    /// `to`'s (both in original-id space), minting local ids for additions
    /// and updating the map.
    fn delta_between(&mut self, from: &Graph, to: &Graph) -> Result<Delta> {
        let mut ops = Vec::new();
        for e in from.elements() {
            if !to.contains(e.id) {
                let local = self.local(e.id)?;
                self.map.remove(&e.id);
                ops.push(DeltaOp::Remove { id: local });
            }
        }
        // Additions in dependency rounds: an edge may only be added once
        // both endpoints have local ids.
        let mut pending: Vec<ElementId> =
            to.elements().filter(|e| !from.contains(e.id)).map(|e| e.id).collect();
        while !pending.is_empty() {
            let before = pending.len();
            let mut next = Vec::new();
            for id in pending {
                let e = to.get(id)?;
                match e.kind() {
                    ElementKind::Node => {
                        let local = self.mint_local();
                        self.map.insert(id, local);
                        ops.push(DeltaOp::AddNode { id: local, ty: to.type_name(id)?.into() });
                    }
                    ElementKind::Edge => {
                        let (src, tgt) = (e.src.expect("edge"), e.tgt.expect("edge"));
                        if self.map.contains_key(&src) && self.map.contains_key(&tgt) {
                            let local = self.mint_local();
                            let op = DeltaOp::AddEdge {
                                id: local,
                                ty: to.type_name(id)?.into(),
                                src: self.map[&src],
                                tgt: self.map[&tgt],
                            };
                            self.map.insert(id, local);
                            ops.push(op);
                        } else {
                            next.push(id);
                        }
                    }
                }
            }
            if next.len() == before {
                return Err(Error::contract(format!(
                    "merge delta cannot order edge {} after its endpoints",
                    next[0]
                )));
            }
            pending = next;
        }
        Ok(Delta { ops })
    }
}

/// All versions' triplets plus an independently maintained copy of the
/// source models (in original-id space) that merges are computed against.
#[derive(Clone)]
pub struct SvmWorld {
    pub mirror: EvolvingSources,
    pub versions: BTreeMap<VersionId, SvmVersion>,
}

impl SvmWorld {
    /// Translates every version of a history from scratch.
    pub fn transform(history: &History, grammar: &Grammar, schedule: &Schedule) -> Result<(Self, usize)> {
        let tg: Arc<TypeGraph> = Arc::new(grammar.source_type_graph().clone());
        let replayed = replay(history, &tg)?;
        let mirror = EvolvingSources::new(history, &tg)?;
        let mut versions = BTreeMap::new();
        let mut applications = 0;
        for v in replayed.dag.versions() {
            let (sv, apps) = SvmVersion::translate(replayed.graph(v), grammar, schedule)?;
            applications += apps;
            versions.insert(v, sv);
        }
        Ok((SvmWorld { mirror, versions }, applications))
    }

    /// Synchronizes one modification across the per-version triplets.
    pub fn apply(&mut self, m: &Modification, grammar: &Grammar, schedule: &Schedule) -> Result<SyncOutcome> {
        self.mirror.apply(m)?;
        match m {
            Modification::VersionCreate { base } => {
                let new_v = VersionId(self.mirror.dag.version_count() as u32);
                let copy = self.versions.get(base).expect("mirror validated the base").clone();
                let complete = copy.state.is_complete();
                self.versions.insert(new_v, copy);
                Ok(SyncOutcome { revoked: 0, applications: 0, complete })
            }
            Modification::ElementCreate { version, id, ty, src, tgt } => {
                let sv = self.versions.get_mut(version).expect("mirror validated the version");
                let local = sv.mint_local();
                let op = match (src, tgt) {
                    (None, None) => DeltaOp::AddNode { id: local, ty: ty.clone() },
                    (Some(s), Some(t)) => DeltaOp::AddEdge {
                        id: local,
                        ty: ty.clone(),
                        src: sv.local(*s)?,
                        tgt: sv.local(*t)?,
                    },
                    _ => {
                        return Err(Error::input(format!("element {id} has half an endpoint pair")))
                    }
                };
                let delta = Delta { ops: vec![op] };
                let out = synchronize(&mut sv.state, &delta, grammar, &mut sv.index, schedule)?;
                sv.map.insert(*id, local);
                sv.bump_next_local();
                Ok(out)
            }
            Modification::ElementDelete { version, id } => {
                let sv = self.versions.get_mut(version).expect("mirror validated the version");
                let local = sv.local(*id)?;
                sv.map.remove(id);
                let delta = Delta { ops: vec![DeltaOp::Remove { id: local }] };
                synchronize(&mut sv.state, &delta, grammar, &mut sv.index, schedule)
            }
            Modification::Merge { bases, .. } => {
                let new_v = VersionId(self.mirror.dag.version_count() as u32);
                let mut sv =
                    self.versions.get(&bases[0]).expect("mirror validated the bases").clone();
                let delta =
                    sv.delta_between(self.mirror.graph(bases[0]), self.mirror.graph(new_v))?;
                let out = synchronize(&mut sv.state, &delta, grammar, &mut sv.index, schedule)?;
                sv.bump_next_local();
                self.versions.insert(new_v, sv);
                Ok(out)
            }
        }
    }
}
