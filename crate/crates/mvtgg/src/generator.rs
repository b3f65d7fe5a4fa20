//! Seeded random histories and modification sequences over the built-in
//! example domain, used by the oracles, the benchmark, and the CLI.
//!
//! Generation is pattern-aware: it produces classes and complete field
//! chains (declaration, access, and type edges) so the translation rules
//! actually fire, injects deliberately incomplete chains at a configurable
//! rate so untranslatable remainders occur, and keeps every generated
//! artifact valid by construction — replays and modification sequences
//! never dangle, merge removals never orphan edges, and element ids stay
//! in the source half of the id space.

use crate::error::Result;
use crate::ids::{ElementId, VersionId};
use crate::mvm::history::{History, VersionOp};
use crate::mvm::sync::Modification;
use crate::oracle::EvolvingSources;
use crate::delta::{Delta, DeltaOp};
use crate::typegraph::{ElementKind, TypeGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::sync::Arc;

/// Shape parameters for a generated history.
#[derive(Clone, Debug)]
pub struct HistoryConfig {
    /// Number of versions, including the root.
    pub versions: usize,
    /// Classes in the root version.
    pub root_classes: usize,
    /// Field chains in the root version.
    pub root_chains: usize,
    /// Delta operations (class or chain granularity) per change version.
    pub change_ops: usize,
    /// Chance that a change starts a new branch instead of extending a
    /// leaf.
    pub branch_probability: f64,
    /// Chance that a version merges two earlier versions.
    pub merge_probability: f64,
    /// Chance that an added chain is left incomplete (untranslatable).
    pub untranslatable_rate: f64,
    /// Chance that a change op removes content instead of adding it.
    pub removal_probability: f64,
}

impl Default for HistoryConfig {
    fn default() -> Self {
        HistoryConfig {
            versions: 6,
            root_classes: 3,
            root_chains: 2,
            change_ops: 3,
            branch_probability: 0.35,
            merge_probability: 0.25,
            untranslatable_rate: 0.05,
            removal_probability: 0.2,
        }
    }
}

/// A field chain: the field and access nodes with their three edges. An
/// incomplete chain lacks the type edge and can never be translated.
#[derive(Clone, PartialEq, Eq, Debug)]
struct Chain {
    field: u64,
    access: u64,
    decl_edge: u64,
    access_edge: u64,
    type_edge: Option<u64>,
    src_class: u64,
    tgt_class: u64,
}

impl Chain {
    fn ids(&self) -> Vec<u64> {
        let mut out = vec![self.field, self.access, self.decl_edge, self.access_edge];
        out.extend(self.type_edge);
        out
    }
}

/// What one version contains, tracked alongside generation.
#[derive(Clone, Default)]
struct Content {
    classes: BTreeSet<u64>,
    chains: Vec<Chain>,
}

impl Content {
    fn merge_with(&self, other: &Content) -> Content {
        let mut out = self.clone();
        out.classes.extend(other.classes.iter().copied());
        for c in &other.chains {
            if !out.chains.iter().any(|x| x.field == c.field) {
                out.chains.push(c.clone());
            }
        }
        out
    }

    fn class_unreferenced(&self, class: u64) -> bool {
        !self.chains.iter().any(|c| c.src_class == class || c.tgt_class == class)
    }
}

struct Gen {
    rng: ChaCha8Rng,
    next_id: u64,
}

impl Gen {
    fn id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        &xs[self.rng.gen_range(0..xs.len())]
    }

    fn add_class(&mut self, content: &mut Content, ops: &mut Vec<DeltaOp>) {
        let id = self.id();
        ops.push(DeltaOp::AddNode { id: ElementId(id), ty: "ClassDecl".into() });
        content.classes.insert(id);
    }

    fn add_chain(&mut self, content: &mut Content, ops: &mut Vec<DeltaOp>, complete: bool) {
        let classes: Vec<u64> = content.classes.iter().copied().collect();
        if classes.len() < 2 {
            self.add_class(content, ops);
            return;
        }
        let src = *self.pick(&classes);
        let tgt = loop {
            let t = *self.pick(&classes);
            if t != src {
                break t;
            }
        };
        let chain = Chain {
            field: self.id(),
            access: self.id(),
            decl_edge: self.id(),
            access_edge: self.id(),
            type_edge: complete.then(|| self.id()),
            src_class: src,
            tgt_class: tgt,
        };
        ops.push(DeltaOp::AddNode { id: ElementId(chain.field), ty: "FieldDecl".into() });
        ops.push(DeltaOp::AddNode { id: ElementId(chain.access), ty: "TypeAccess".into() });
        ops.push(DeltaOp::AddEdge {
            id: ElementId(chain.decl_edge),
            ty: "declaration".into(),
            src: ElementId(src),
            tgt: ElementId(chain.field),
        });
        ops.push(DeltaOp::AddEdge {
            id: ElementId(chain.access_edge),
            ty: "access".into(),
            src: ElementId(chain.field),
            tgt: ElementId(chain.access),
        });
        if let Some(te) = chain.type_edge {
            ops.push(DeltaOp::AddEdge {
                id: ElementId(te),
                ty: "type".into(),
                src: ElementId(chain.access),
                tgt: ElementId(tgt),
            });
        }
        content.chains.push(chain);
    }

    fn change_op(&mut self, cfg: &HistoryConfig, content: &mut Content, ops: &mut Vec<DeltaOp>) {
        if self.rng.gen_bool(cfg.removal_probability) {
            // Remove a whole chain, or an unreferenced class.
            if !content.chains.is_empty() && self.rng.gen_bool(0.7) {
                let i = self.rng.gen_range(0..content.chains.len());
                let chain = content.chains.remove(i);
                for id in chain.ids() {
                    ops.push(DeltaOp::Remove { id: ElementId(id) });
                }
                return;
            }
            let frees: Vec<u64> = content
                .classes
                .iter()
                .copied()
                .filter(|&c| content.class_unreferenced(c))
                .collect();
            if content.classes.len() > 2 {
                if let Some(&c) = frees.first() {
                    content.classes.remove(&c);
                    ops.push(DeltaOp::Remove { id: ElementId(c) });
                    return;
                }
            }
        }
        if self.rng.gen_bool(0.4) {
            self.add_class(content, ops);
        } else {
            let complete = !self.rng.gen_bool(cfg.untranslatable_rate);
            self.add_chain(content, ops, complete);
        }
    }
}

/// Generates a valid history with the given shape, deterministically from
/// the seed.
pub fn generate_history(cfg: &HistoryConfig, seed: u64) -> History {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), next_id: 1 };
    let mut versions: Vec<VersionOp> = Vec::new();
    let mut contents: Vec<Content> = Vec::new();

    let mut root = Content::default();
    let mut ops = Vec::new();
    for _ in 0..cfg.root_classes.max(1) {
        g.add_class(&mut root, &mut ops);
    }
    for _ in 0..cfg.root_chains {
        let complete = !g.rng.gen_bool(cfg.untranslatable_rate);
        g.add_chain(&mut root, &mut ops, complete);
    }
    versions.push(VersionOp::Root { delta: Delta { ops } });
    contents.push(root);

    while versions.len() < cfg.versions.max(1) {
        let existing = contents.len();
        let is_merge = existing >= 2 && g.rng.gen_bool(cfg.merge_probability);
        if is_merge {
            let a = g.rng.gen_range(0..existing);
            let b = loop {
                let b = g.rng.gen_range(0..existing);
                if b != a {
                    break b;
                }
            };
            let mut merged = contents[a].merge_with(&contents[b]);
            let mut remove = Vec::new();
            if !merged.chains.is_empty() && g.rng.gen_bool(cfg.removal_probability) {
                let i = g.rng.gen_range(0..merged.chains.len());
                let chain = merged.chains.remove(i);
                remove.extend(chain.ids().into_iter().map(ElementId));
            }
            versions.push(VersionOp::Merge {
                bases: vec![VersionId(a as u32 + 1), VersionId(b as u32 + 1)],
                remove,
            });
            contents.push(merged);
        } else {
            let base = if g.rng.gen_bool(cfg.branch_probability) {
                g.rng.gen_range(0..existing)
            } else {
                existing - 1
            };
            let mut content = contents[base].clone();
            let mut ops = Vec::new();
            for _ in 0..cfg.change_ops.max(1) {
                g.change_op(cfg, &mut content, &mut ops);
            }
            versions.push(VersionOp::Change {
                base: VersionId(base as u32 + 1),
                delta: Delta { ops },
            });
            contents.push(content);
        }
    }
    History { versions }
}

/// Shape parameters for a generated modification sequence.
#[derive(Clone, Debug)]
pub struct ModsConfig {
    /// Number of modifications to produce.
    pub count: usize,
    /// Chance of creating a new version (copy of a random base).
    pub version_probability: f64,
    /// Chance of merging two versions.
    pub merge_probability: f64,
    /// Chance of deleting an element instead of adding one.
    pub delete_probability: f64,
    /// Chance that an added chain is left incomplete.
    pub untranslatable_rate: f64,
}

impl Default for ModsConfig {
    fn default() -> Self {
        ModsConfig {
            count: 8,
            version_probability: 0.15,
            merge_probability: 0.15,
            delete_probability: 0.3,
            untranslatable_rate: 0.1,
        }
    }
}

/// Generates a valid modification sequence against the history,
/// deterministically from the seed. Every modification is checked against
/// an independently evolved copy of the per-version sources, so the
/// sequence applies cleanly to a model translated from the same history.
pub fn generate_modifications(
    history: &History,
    type_graph: &Arc<TypeGraph>,
    cfg: &ModsConfig,
    seed: u64,
) -> Result<Vec<Modification>> {
    let mut sources = EvolvingSources::new(history, type_graph)?;
    let max_id = crate::mvm::history::replay(history, type_graph)?.max_element_id();
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), next_id: max_id + 1 };
    let mut mods: Vec<Modification> = Vec::new();

    while mods.len() < cfg.count {
        let versions: Vec<VersionId> = sources.dag.versions().collect();
        let leaves = sources.dag.leaves();
        let roll: f64 = g.rng.gen();
        let m = if roll < cfg.version_probability {
            Modification::VersionCreate { base: *g.pick(&versions) }
        } else if roll < cfg.version_probability + cfg.merge_probability && versions.len() >= 2 {
            let a = *g.pick(&versions);
            let b = loop {
                let b = *g.pick(&versions);
                if b != a {
                    break b;
                }
            };
            // Occasionally drop one element nothing refers to.
            let mut remove = Vec::new();
            if g.rng.gen_bool(0.5) {
                let candidates: Vec<ElementId> = [a, b]
                    .iter()
                    .flat_map(|&v| sources.graph(v).elements().map(|e| e.id).collect::<Vec<_>>())
                    .filter(|&id| {
                        [a, b].iter().all(|&v| {
                            match sources.graph(v).element(id) {
                                None => true,
                                Some(e) => {
                                    e.kind() == ElementKind::Edge
                                        || sources.graph(v).incident_edges(id).is_empty()
                                }
                            }
                        })
                    })
                    .collect();
                if !candidates.is_empty() {
                    remove.push(*g.pick(&candidates));
                    remove.dedup();
                }
            }
            Modification::Merge { bases: vec![a, b], remove }
        } else if g.rng.gen_bool(cfg.delete_probability) {
            // Delete one element no present edge refers to, in a leaf.
            let v = *g.pick(&leaves);
            let deletable: Vec<ElementId> = sources
                .graph(v)
                .elements()
                .filter(|e| {
                    e.kind() == ElementKind::Edge
                        || sources.graph(v).incident_edges(e.id).is_empty()
                })
                .map(|e| e.id)
                .collect();
            if deletable.is_empty() {
                continue;
            }
            Modification::ElementDelete { version: v, id: *g.pick(&deletable) }
        } else {
            let v = *g.pick(&leaves);
            let classes: Vec<ElementId> = sources
                .graph(v)
                .elements()
                .filter(|e| sources.graph(v).type_name(e.id).unwrap() == "ClassDecl")
                .map(|e| e.id)
                .collect();
            if classes.len() >= 2 && g.rng.gen_bool(0.6) {
                // A chain, element by element; incomplete ones simply stop
                // before the type edge.
                let src = *g.pick(&classes);
                let tgt = loop {
                    let t = *g.pick(&classes);
                    if t != src {
                        break t;
                    }
                };
                let field = ElementId(g.id());
                let access = ElementId(g.id());
                let complete = !g.rng.gen_bool(cfg.untranslatable_rate);
                let mut chain = vec![
                    Modification::ElementCreate {
                        version: v,
                        id: field,
                        ty: "FieldDecl".into(),
                        src: None,
                        tgt: None,
                    },
                    Modification::ElementCreate {
                        version: v,
                        id: access,
                        ty: "TypeAccess".into(),
                        src: None,
                        tgt: None,
                    },
                    Modification::ElementCreate {
                        version: v,
                        id: ElementId(g.id()),
                        ty: "declaration".into(),
                        src: Some(src),
                        tgt: Some(field),
                    },
                    Modification::ElementCreate {
                        version: v,
                        id: ElementId(g.id()),
                        ty: "access".into(),
                        src: Some(field),
                        tgt: Some(access),
                    },
                ];
                if complete {
                    chain.push(Modification::ElementCreate {
                        version: v,
                        id: ElementId(g.id()),
                        ty: "type".into(),
                        src: Some(access),
                        tgt: Some(tgt),
                    });
                }
                for m in chain {
                    sources.apply(&m)?;
                    mods.push(m);
                }
                continue;
            }
            Modification::ElementCreate {
                version: v,
                id: ElementId(g.id()),
                ty: "ClassDecl".into(),
                src: None,
                tgt: None,
            }
        };
        sources.apply(&m)?;
        mods.push(m);
    }
    mods.truncate(cfg.count);
    Ok(mods)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvm::history::replay;
    use crate::samples;

    #[test]
    fn generated_histories_replay_cleanly() {
        let tg = Arc::new(samples::ast_type_graph());
        for seed in 0..30 {
            let h = generate_history(&HistoryConfig::default(), seed);
            let r = replay(&h, &tg).expect("generated history must replay");
            assert_eq!(r.dag.version_count(), 6);
        }
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let cfg = HistoryConfig::default();
        assert_eq!(generate_history(&cfg, 7), generate_history(&cfg, 7));
        assert_ne!(generate_history(&cfg, 7), generate_history(&cfg, 8));
    }

    #[test]
    fn generated_modifications_apply_to_evolving_sources() {
        let tg = Arc::new(samples::ast_type_graph());
        for seed in 0..20 {
            let h = generate_history(&HistoryConfig::default(), seed);
            let mods = generate_modifications(
                &h,
                &tg,
                &ModsConfig { count: 10, ..ModsConfig::default() },
                seed ^ 0x5eed,
            )
            .unwrap();
            assert_eq!(mods.len(), 10);
            let mut sources = EvolvingSources::new(&h, &tg).unwrap();
            for m in &mods {
                sources.apply(m).expect("generated modification must apply");
            }
        }
    }

    #[test]
    fn generated_artifacts_satisfy_the_equivalence_oracles() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let tg = Arc::new(grammar.source_type_graph().clone());
        for seed in [1u64, 2, 3] {
            let h = generate_history(&HistoryConfig::default(), seed);
            let batch = crate::oracle::check_batch_equivalence(&h, &grammar, &crate::tgg::triplet::Schedule::default()).unwrap();
            assert!(batch.ok(), "seed {seed}: {:?}", batch.mismatches().collect::<Vec<_>>());
            let mods = generate_modifications(
                &h,
                &tg,
                &ModsConfig { count: 6, ..ModsConfig::default() },
                seed,
            )
            .unwrap();
            let sync = crate::oracle::check_sync_equivalence(&h, &mods, &grammar, &crate::tgg::triplet::Schedule::default()).unwrap();
            assert!(sync.ok(), "seed {seed}: {:?}", sync.mismatches().collect::<Vec<_>>());
        }
    }

    #[test]
    fn sharing_heavy_config_keeps_versions_mostly_identical() {
        let tg = Arc::new(samples::ast_type_graph());
        let cfg = HistoryConfig {
            versions: 10,
            root_classes: 20,
            root_chains: 10,
            change_ops: 1,
            branch_probability: 0.2,
            merge_probability: 0.1,
            untranslatable_rate: 0.0,
            removal_probability: 0.1,
        };
        let h = generate_history(&cfg, 42);
        let r = replay(&h, &tg).unwrap();
        let root_elements = r.graph(VersionId(1)).element_count();
        for v in r.dag.versions() {
            let n = r.graph(v).element_count();
            let shared = r
                .graph(v)
                .elements()
                .filter(|e| r.graph(VersionId(1)).contains(e.id))
                .count();
            assert!(n > 0);
            assert!(
                shared as f64 >= 0.9 * root_elements as f64,
                "version {v} shares only {shared}/{root_elements}"
            );
        }
    }
}
