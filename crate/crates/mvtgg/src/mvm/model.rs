//! The multi-version model: one graph encoding every version of a source
//! model together with its correspondence and target elements, plus the
//! per-element version sets that say where each element is present and
//! where it still awaits translation.
//!
//! Translation applies the adapted forward rules directly on this encoding:
//! a structural match is executed for the version set where all matched
//! elements are present, the translation image is still untranslated, and
//! no context element is untranslated. Created elements receive that
//! version set as their presence; the translation image loses it from its
//! untranslated set. One application therefore serves every version in the
//! set at once.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ids::{ElementId, VersionId};
use crate::matcher::{find_matches, TypeIndex};
use crate::morphism::Morphism;
use crate::mvm::adapt::{MvGrammar, MvRule, MvSchema};
use crate::mvm::history::ReplayedHistory;
use crate::mvm::versions::{VersionDag, VersionSet};
use crate::rule::apply_rule;
use crate::tgg::{Domain, Grammar};
use crate::typegraph::ElementKind;
use crate::tgg::triplet::Schedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// One recorded rule application on the multi-version model.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MvTrace {
    pub rule_name: String,
    /// Pattern id -> host id.
    pub match_image: BTreeMap<ElementId, ElementId>,
    /// Created host elements in creation order (nodes and edges).
    pub created: Vec<ElementId>,
    /// The created correspondence node (host id).
    pub created_corr: ElementId,
    /// Correspondence nodes the match required (host ids).
    pub required_corr: BTreeSet<ElementId>,
    /// Source elements this application translated (host ids).
    pub covered_sources: BTreeSet<ElementId>,
    /// The version set the application was executed for.
    pub p_at_creation: VersionSet,
}

/// A multi-version source model with its (partially) translated
/// correspondence and target parts.
#[derive(Clone, Debug)]
pub struct MultiVersionModel {
    pub graph: Graph,
    pub dag: VersionDag,
    /// Presence set of every encoding node.
    pub presence: BTreeMap<ElementId, VersionSet>,
    /// Untranslated set of every source-domain encoding node.
    pub untranslated: BTreeMap<ElementId, VersionSet>,
    /// Encoding node -> id in the per-version (projected) id space.
    pub origin_of: BTreeMap<ElementId, ElementId>,
    pub mv_of_origin: BTreeMap<ElementId, ElementId>,
    generated: u64,
    pub traces: Vec<MvTrace>,
}

/// Generated correspondence and target elements receive original ids in
/// the upper half of the id space, so source-model ids — which must stay
/// below this base — can be chosen freely without ever colliding.
pub const GENERATED_ID_BASE: u64 = 1 << 63;

impl MultiVersionModel {
    /// Encodes a replayed history: every element that ever existed becomes
    /// an encoding node whose untranslated set starts equal to its presence.
    pub fn init(replayed: &ReplayedHistory, mv: &MvGrammar) -> Result<Self> {
        let mut graph = Graph::new(mv.schema.type_graph.clone());
        for (&id, def) in &replayed.defs {
            graph.add_node_with_id(id, &def.ty)?;
        }
        for (&id, def) in &replayed.defs {
            if def.kind != ElementKind::Edge {
                continue;
            }
            let (src_ty, tgt_ty) = super::adapt::ref_type_names(&def.ty);
            graph.add_edge(&src_ty, id, def.src.expect("edge"))?;
            graph.add_edge(&tgt_ty, id, def.tgt.expect("edge"))?;
        }
        let presence = replayed.presence();
        let untranslated = presence.clone();
        let origin_of: BTreeMap<ElementId, ElementId> =
            replayed.defs.keys().map(|&id| (id, id)).collect();
        let mv_of_origin = origin_of.clone();
        Ok(MultiVersionModel {
            graph,
            dag: replayed.dag.clone(),
            presence,
            untranslated,
            origin_of,
            mv_of_origin,
            generated: 0,
            traces: Vec::new(),
        })
    }

    pub fn mint_origin_id(&mut self) -> ElementId {
        let id = ElementId(GENERATED_ID_BASE + self.generated);
        self.generated += 1;
        id
    }

    /// How many generated original ids have been minted.
    pub fn generated_ids(&self) -> u64 {
        self.generated
    }

    /// Reassembles a model from deserialized parts (snapshot loading).
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        graph: Graph,
        dag: VersionDag,
        presence: BTreeMap<ElementId, VersionSet>,
        untranslated: BTreeMap<ElementId, VersionSet>,
        origin_of: BTreeMap<ElementId, ElementId>,
        mv_of_origin: BTreeMap<ElementId, ElementId>,
        generated: u64,
        traces: Vec<MvTrace>,
    ) -> Self {
        MultiVersionModel {
            graph,
            dag,
            presence,
            untranslated,
            origin_of,
            mv_of_origin,
            generated,
            traces,
        }
    }

    /// Versions in which every present element is translated.
    pub fn complete_versions(&self) -> VersionSet {
        let mut out = self.dag.all_versions();
        for u in self.untranslated.values() {
            out.subtract(u);
        }
        out
    }

    pub fn presence_of(&self, mv_id: ElementId) -> Result<&VersionSet> {
        self.presence
            .get(&mv_id)
            .ok_or_else(|| Error::contract(format!("element {mv_id} has no presence set")))
    }

    /// Removes every element whose presence set is empty — elements
    /// deleted from all versions, and creations of fully withdrawn
    /// applications — together with their reference and link edges, and
    /// drops the applications that created them. Any type index over the
    /// graph must be rebuilt afterwards. Returns the number of removed
    /// graph elements.
    pub fn compact(&mut self) -> Result<usize> {
        let dead: BTreeSet<ElementId> = self
            .presence
            .iter()
            .filter(|(_, p)| p.is_empty())
            .map(|(&id, _)| id)
            .collect();
        if dead.is_empty() {
            return Ok(0);
        }
        let mut removed = 0usize;
        for &id in &dead {
            for e in self.graph.incident_edges(id) {
                if self.graph.contains(e) {
                    self.graph.remove_element(e)?;
                    removed += 1;
                }
            }
        }
        for &id in &dead {
            self.graph.remove_element(id)?;
            removed += 1;
            self.presence.remove(&id);
            self.untranslated.remove(&id);
            let origin = self.origin_of.remove(&id).expect("origin");
            self.mv_of_origin.remove(&origin);
        }
        self.traces.retain(|t| !dead.contains(&t.created_corr));
        Ok(removed)
    }

    /// Structural and set invariants; used by tests and after loading.
    pub fn validate(&self, schema: &MvSchema) -> Result<()> {
        self.graph.validate()?;
        let mut ref_count: BTreeMap<ElementId, (bool, bool)> = BTreeMap::new();
        for e in self.graph.elements() {
            match e.kind() {
                ElementKind::Node => {
                    let p = self.presence_of(e.id)?;
                    let role = schema.role_of(&self.graph, e.id)?;
                    let u = self.untranslated.get(&e.id);
                    match role.domain() {
                        Domain::Source => {
                            let u = u.ok_or_else(|| {
                                Error::contract(format!("source element {} lacks an untranslated set", e.id))
                            })?;
                            if !u.is_subset(p) {
                                return Err(Error::contract(format!(
                                    "element {}: untranslated set exceeds presence",
                                    e.id
                                )));
                            }
                        }
                        _ => {
                            if u.is_some() {
                                return Err(Error::contract(format!(
                                    "non-source element {} carries an untranslated set",
                                    e.id
                                )));
                            }
                        }
                    }
                    if !self.origin_of.contains_key(&e.id) {
                        return Err(Error::contract(format!("element {} has no original id", e.id)));
                    }
                    if role.encoded_edge().is_some() {
                        ref_count.entry(e.id).or_insert((false, false));
                    }
                }
                ElementKind::Edge => {
                    let ty = self.graph.type_name(e.id)?;
                    if let Some((_, is_src)) = schema.ref_kind(ty) {
                        let entry = ref_count.entry(e.src.expect("edge")).or_insert((false, false));
                        let slot = if is_src { &mut entry.0 } else { &mut entry.1 };
                        if *slot {
                            return Err(Error::contract(format!(
                                "encoded edge {} has duplicate `{}` references",
                                e.src.expect("edge"),
                                ty
                            )));
                        }
                        *slot = true;
                    } else if schema.link_types.contains(ty) {
                        // Correspondence presence never exceeds the linked
                        // element's presence.
                        let pc = self.presence_of(e.src.expect("edge"))?;
                        let px = self.presence_of(e.tgt.expect("edge"))?;
                        if !pc.is_subset(px) {
                            return Err(Error::contract(format!(
                                "link {}: correspondence presence exceeds linked element's",
                                e.id
                            )));
                        }
                    }
                }
            }
        }
        for (id, (has_src, has_tgt)) in ref_count {
            if !has_src || !has_tgt {
                return Err(Error::contract(format!(
                    "encoded edge {id} lacks a src or tgt reference"
                )));
            }
        }
        for (o, m) in &self.mv_of_origin {
            if self.origin_of.get(m) != Some(o) {
                return Err(Error::contract("original-id maps are not mutually inverse"));
            }
        }
        Ok(())
    }
}

/// The version set an application of `mvr` at `m` would serve: versions
/// where every matched element is present and the translation image is
/// untranslated, minus versions where any matched context source element is
/// still untranslated.
pub fn compute_p(
    mvr: &MvRule,
    m: &Morphism,
    dag: &VersionDag,
    presence: &BTreeMap<ElementId, VersionSet>,
    untranslated: &BTreeMap<ElementId, VersionSet>,
) -> VersionSet {
    let mut p = dag.all_versions();
    for l in &mvr.p_carrying {
        let img = m.get(*l).expect("total match");
        match presence.get(&img) {
            Some(set) => p.intersect_with(set),
            None => return VersionSet::new(),
        }
    }
    for t in &mvr.translation_image {
        let img = m.get(*t).expect("total match");
        match untranslated.get(&img) {
            Some(set) => p.intersect_with(set),
            None => return VersionSet::new(),
        }
    }
    for c in &mvr.context_source {
        let img = m.get(*c).expect("total match");
        if let Some(set) = untranslated.get(&img) {
            p.subtract(set);
        }
    }
    p
}

/// Applies an adapted rule for version set `p` and records the trace.
pub fn apply_mv_rule(
    model: &mut MultiVersionModel,
    mvr: &MvRule,
    m: &Morphism,
    p: VersionSet,
    index: &mut TypeIndex,
) -> Result<()> {
    if p.is_empty() {
        return Err(Error::not_applicable(format!(
            "rule `{}`: empty version set",
            mvr.rule.name
        )));
    }
    let app = apply_rule(&mvr.rule, &mut model.graph, m, Some(index))?;
    for &rid in &mvr.created_p_carriers {
        let host = app.comatch.get(rid).ok_or_else(|| {
            Error::contract("created node missing from comatch")
        })?;
        model.presence.insert(host, p.clone());
        let origin = model.mint_origin_id();
        model.origin_of.insert(host, origin);
        model.mv_of_origin.insert(origin, host);
    }
    let match_image: BTreeMap<ElementId, ElementId> = m.pairs().collect();
    let mut covered_sources = BTreeSet::new();
    for t in &mvr.translation_image {
        let img = match_image[t];
        model
            .untranslated
            .get_mut(&img)
            .ok_or_else(|| Error::contract(format!("element {img} has no untranslated set")))?
            .subtract(&p);
        covered_sources.insert(img);
    }
    let created_corr = app.comatch.get(mvr.created_corr).expect("created");
    let required_corr = mvr.required_corr.iter().map(|id| match_image[id]).collect();
    model.traces.push(MvTrace {
        rule_name: mvr.rule.name.clone(),
        match_image,
        created: app.created,
        created_corr,
        required_corr,
        covered_sources,
        p_at_creation: p,
    });
    Ok(())
}

/// Applies adapted rules until no application serves a nonempty version
/// set. The total untranslated mass strictly shrinks with every
/// application, so the run terminates.
pub fn run_mv_fixpoint(
    model: &mut MultiVersionModel,
    mv: &MvGrammar,
    index: &mut TypeIndex,
    schedule: &Schedule,
) -> Result<usize> {
    let mut applications = 0usize;
    let mut rng = schedule.seed.map(ChaCha8Rng::seed_from_u64);
    loop {
        let picked: Option<(usize, Morphism, VersionSet)> = {
            let MultiVersionModel { graph, dag, presence, untranslated, .. } = &*model;
            match rng.as_mut() {
                None => {
                    let mut found = None;
                    for (ri, mvr) in mv.rules.iter().enumerate() {
                        let filter = |m: &Morphism| {
                            !compute_p(mvr, m, dag, presence, untranslated).is_empty()
                        };
                        let ms = find_matches(&mvr.rule.lhs, graph, index, Some(&filter))?;
                        if let Some(m) = ms.into_iter().next() {
                            let p = compute_p(mvr, &m, dag, presence, untranslated);
                            found = Some((ri, m, p));
                            break;
                        }
                    }
                    found
                }
                Some(rng) => {
                    let mut all: Vec<(usize, Morphism, VersionSet)> = Vec::new();
                    for (ri, mvr) in mv.rules.iter().enumerate() {
                        let filter = |m: &Morphism| {
                            !compute_p(mvr, m, dag, presence, untranslated).is_empty()
                        };
                        let ms = find_matches(&mvr.rule.lhs, graph, index, Some(&filter))?;
                        all.extend(ms.into_iter().map(|m| {
                            let p = compute_p(mvr, &m, dag, presence, untranslated);
                            (ri, m, p)
                        }));
                    }
                    if all.is_empty() {
                        None
                    } else {
                        let i = rng.gen_range(0..all.len());
                        Some(all.swap_remove(i))
                    }
                }
            }
        };
        let (ri, m, p) = match picked {
            Some(x) => x,
            None => break,
        };
        apply_mv_rule(model, &mv.rules[ri], &m, p, index)?;
        applications += 1;
    }
    Ok(applications)
}

/// Translates a whole history in one run over the multi-version encoding.
pub fn transform_history(
    replayed: &ReplayedHistory,
    mv: &MvGrammar,
    schedule: &Schedule,
) -> Result<(MultiVersionModel, usize)> {
    let mut model = MultiVersionModel::init(replayed, mv)?;
    let mut index = TypeIndex::build(&model.graph);
    let applications = run_mv_fixpoint(&mut model, mv, &mut index, schedule)?;
    Ok((model, applications))
}

/// Projects one version out of the model as a combined
/// source/correspondence/target graph with bookkeeping: elements present at
/// `v` appear under their original ids, and every source element
/// untranslated at `v` carries a bookkeeping edge.
pub fn project_version(
    model: &MultiVersionModel,
    grammar: &Grammar,
    schema: &MvSchema,
    v: VersionId,
) -> Result<Graph> {
    if !model.dag.contains(v) {
        return Err(Error::input(format!("unknown version {v}")));
    }
    let mut out = Graph::new(grammar.merged.clone());
    // Endpoints of encoded edges, collected from reference edges.
    let mut endpoints: BTreeMap<ElementId, (Option<ElementId>, Option<ElementId>)> =
        BTreeMap::new();
    for e in model.graph.elements() {
        if e.kind() != ElementKind::Edge {
            continue;
        }
        if let Some((_, is_src)) = schema.ref_kind(model.graph.type_name(e.id)?) {
            let entry = endpoints.entry(e.src.expect("edge")).or_default();
            let slot = if is_src { &mut entry.0 } else { &mut entry.1 };
            *slot = Some(e.tgt.expect("edge"));
        }
    }
    // Present nodes first, then encoded edges (in rounds, since an encoded
    // edge may point at another edge), then links.
    let mut pending_edges: Vec<ElementId> = Vec::new();
    for e in model.graph.elements() {
        if e.kind() != ElementKind::Node {
            continue;
        }
        if !model.presence_of(e.id)?.contains(v) {
            continue;
        }
        let role = schema.role_of(&model.graph, e.id)?;
        let origin = model.origin_of[&e.id];
        match role.encoded_edge() {
            None => out.add_node_with_id(origin, model.graph.type_name(e.id)?)?,
            Some(_) => pending_edges.push(e.id),
        }
    }
    while !pending_edges.is_empty() {
        let before = pending_edges.len();
        let mut rest = Vec::new();
        for id in pending_edges {
            let (src_mv, tgt_mv) = endpoints
                .get(&id)
                .and_then(|(s, t)| s.zip(*t))
                .ok_or_else(|| Error::contract(format!("encoded edge {id} lacks references")))?;
            let src_o = model.origin_of[&src_mv];
            let tgt_o = model.origin_of[&tgt_mv];
            if out.contains(src_o) && out.contains(tgt_o) {
                out.add_edge_with_id(model.origin_of[&id], model.graph.type_name(id)?, src_o, tgt_o)?;
            } else {
                rest.push(id);
            }
        }
        if rest.len() == before {
            return Err(Error::contract(
                "projection stuck: encoded edges reference absent elements",
            ));
        }
        pending_edges = rest;
    }
    // Correspondence links: present wherever their correspondence node is.
    for e in model.graph.elements() {
        if e.kind() != ElementKind::Edge {
            continue;
        }
        let ty = model.graph.type_name(e.id)?;
        if !schema.link_types.contains(ty) {
            continue;
        }
        let (c, x) = (e.src.expect("edge"), e.tgt.expect("edge"));
        if model.presence_of(c)?.contains(v) && model.presence_of(x)?.contains(v) {
            out.add_edge(ty, model.origin_of[&c], model.origin_of[&x])?;
        }
    }
    out.ensure_bookkeeping_node();
    for (id, u) in &model.untranslated {
        if u.contains(v) {
            out.mark(model.origin_of[id])?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvm::history::replay;
    use crate::samples;
    use std::sync::Arc;

    #[test]
    fn diamond_history_translates_in_four_applications() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let mv = MvGrammar::new(&grammar).unwrap();
        let tg = Arc::new(samples::ast_type_graph());
        let replayed = replay(&samples::diamond_history(), &tg).unwrap();
        let (model, applications) =
            transform_history(&replayed, &mv, &Schedule::default()).unwrap();
        assert_eq!(applications, 4);
        let full: Vec<VersionId> = (1..=4).map(VersionId).collect();
        assert_eq!(model.complete_versions(), VersionSet::from_iter(full.clone()));
        let ps: Vec<Vec<u32>> = model
            .traces
            .iter()
            .map(|t| t.p_at_creation.iter().map(|v| v.0).collect())
            .collect();
        assert_eq!(ps, vec![vec![1, 2, 3, 4], vec![1, 2, 3, 4], vec![3, 4], vec![2, 4]]);
        model.validate(&mv.schema).unwrap();
    }

    #[test]
    fn initial_model_presence_mirrors_the_history() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let mv = MvGrammar::new(&grammar).unwrap();
        let tg = Arc::new(samples::ast_type_graph());
        let replayed = replay(&samples::diamond_history(), &tg).unwrap();
        let model = MultiVersionModel::init(&replayed, &mv).unwrap();
        // 8 encoding nodes (5 source nodes + 3 encoded edges), 6 reference
        // edges.
        assert_eq!(model.graph.node_count(), 8);
        assert_eq!(model.graph.edge_count(), 6);
        let p_field: Vec<u32> = model.presence[&ElementId(3)].iter().map(|v| v.0).collect();
        assert_eq!(p_field, vec![2, 4]);
        assert_eq!(model.presence[&ElementId(3)], model.untranslated[&ElementId(3)]);
        model.validate(&mv.schema).unwrap();
    }

    #[test]
    fn projection_restores_per_version_sources_with_marks() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let mv = MvGrammar::new(&grammar).unwrap();
        let tg = Arc::new(samples::ast_type_graph());
        let replayed = replay(&samples::diamond_history(), &tg).unwrap();
        let model = MultiVersionModel::init(&replayed, &mv).unwrap();
        for v in replayed.dag.versions() {
            let proj = project_version(&model, &grammar, &mv.schema, v).unwrap();
            let expected = replayed.graph(v);
            assert_eq!(proj.element_count(), expected.element_count(), "version {v}");
            // Nothing translated yet: everything is marked.
            assert_eq!(proj.marked_count(), proj.element_count(), "version {v}");
            for e in expected.elements() {
                assert!(proj.contains(e.id));
            }
            proj.validate().unwrap();
        }
    }

    #[test]
    fn compact_reclaims_elements_absent_from_every_version() {
        use crate::delta::{Delta, DeltaOp};
        use crate::mvm::history::{History, VersionOp};
        use crate::mvm::sync::element_delete;
        let grammar = samples::class_diagram_grammar().unwrap();
        let mv = MvGrammar::new(&grammar).unwrap();
        let tg = Arc::new(samples::ast_type_graph());
        let ops = samples::two_classes_one_field()
            .elements()
            .map(|e| match e.kind() {
                ElementKind::Node => DeltaOp::AddNode {
                    id: e.id,
                    ty: samples::two_classes_one_field().type_name(e.id).unwrap().into(),
                },
                ElementKind::Edge => DeltaOp::AddEdge {
                    id: e.id,
                    ty: samples::two_classes_one_field().type_name(e.id).unwrap().into(),
                    src: e.src.unwrap(),
                    tgt: e.tgt.unwrap(),
                },
            })
            .collect();
        let history = History {
            versions: vec![VersionOp::Root { delta: Delta { ops } }],
        };
        let replayed = replay(&history, &tg).unwrap();
        let (mut model, apps) = transform_history(&replayed, &mv, &Schedule::default()).unwrap();
        assert_eq!(apps, 3);
        assert_eq!(model.graph.element_count(), 37);
        // Deleting the `type` edge from the only version leaves the field
        // translation present nowhere, and the edge itself absent
        // everywhere.
        element_delete(&mut model, &mv.schema, VersionId(1), ElementId(7)).unwrap();
        let removed = model.compact().unwrap();
        // The encoded edge with its 2 references, plus the withdrawn
        // application's 4 created nodes, their 4 references and 8 links.
        assert_eq!(removed, 19);
        assert_eq!(model.graph.element_count(), 18);
        assert_eq!(model.traces.len(), 2);
        assert!(!model.mv_of_origin.contains_key(&ElementId(7)));
        model.validate(&mv.schema).unwrap();
        let proj = project_version(&model, &grammar, &mv.schema, VersionId(1)).unwrap();
        assert_eq!(proj.marked_count(), 4);
    }

    #[test]
    fn projection_after_translation_carries_correspondence_and_target() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let mv = MvGrammar::new(&grammar).unwrap();
        let tg = Arc::new(samples::ast_type_graph());
        let replayed = replay(&samples::diamond_history(), &tg).unwrap();
        let (model, _) = transform_history(&replayed, &mv, &Schedule::default()).unwrap();
        // Version 2: classes A, B + field chain -> 2 Class + Association +
        // from/to, 3 corr nodes, 2 + 8 links; everything translated.
        let proj = project_version(&model, &grammar, &mv.schema, VersionId(2)).unwrap();
        assert_eq!(proj.marked_count(), 0);
        let count_of = |ty: &str, kind: ElementKind| {
            proj.elements()
                .filter(|e| e.kind() == kind && proj.type_name(e.id).unwrap() == ty)
                .count()
        };
        assert_eq!(count_of("Class", ElementKind::Node), 2);
        assert_eq!(count_of("Association", ElementKind::Node), 1);
        assert_eq!(count_of("CorrClass", ElementKind::Node), 2);
        assert_eq!(count_of("CorrField", ElementKind::Node), 1);
        assert_eq!(count_of("from", ElementKind::Edge), 1);
        assert_eq!(count_of("CorrField__type", ElementKind::Edge), 1);
        proj.validate().unwrap();
        // Version 1 has no field: no association, one corr per class.
        let proj1 = project_version(&model, &grammar, &mv.schema, VersionId(1)).unwrap();
        let assoc = proj1
            .elements()
            .filter(|e| proj1.type_name(e.id).unwrap() == "Association")
            .count();
        assert_eq!(assoc, 0);
        assert_eq!(proj1.marked_count(), 0);
    }
}
