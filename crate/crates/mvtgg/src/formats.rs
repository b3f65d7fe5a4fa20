//! JSON file formats for graphs, grammars, histories, modification
//! sequences, and model snapshots.
//!
//! Every format carries an explicit `schema` tag and serializes
//! canonically: object keys sorted, unordered collections in ascending id
//! order, two-space indentation, trailing newline. Parsing what was
//! serialized and re-serializing it reproduces the bytes exactly.
//! Sequences whose order is meaningful — delta operations, modification
//! lists, application traces — keep their order.

use crate::bench::{BenchReport, BENCH_REPORT_SCHEMA};
use crate::delta::{Delta, DeltaOp};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ids::{ElementId, VersionId};
use crate::mvm::history::{History, VersionOp};
use crate::mvm::model::{MultiVersionModel, MvTrace};
use crate::mvm::sync::Modification;
use crate::mvm::versions::{dematerialize, materialize, MaterializedSet, VersionDag};
use crate::oracle::EvolvingSources;
use crate::svm::{SvmVersion, SvmWorld};
use crate::tgg::triplet::{ApplicationTrace, TransformState};
use crate::tgg::{Domain, Grammar, LinkEdgeType, TggRule, TripleTypeGraph};
use crate::typegraph::{EdgeTypeDef, ElementKind, TypeGraph};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

pub const GRAPH_SCHEMA: &str = "mvtgg-graph/1";
pub const TGG_SCHEMA: &str = "mvtgg-tgg/1";
pub const HISTORY_SCHEMA: &str = "mvtgg-history/1";
pub const MODS_SCHEMA: &str = "mvtgg-mods/1";
pub const SNAPSHOT_SCHEMA: &str = "mvtgg-snapshot/1";
pub const SVM_STATE_SCHEMA: &str = "mvtgg-svm-state/1";
pub const VERIFY_REPORT_SCHEMA: &str = "mvtgg-verify-report/1";

/// Serializes any value canonically: keys sorted by routing the value
/// through a tree representation, pretty-printed, trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)
        .map_err(|e| Error::format(format!("serialization failed: {e}")))?;
    let mut out = serde_json::to_string_pretty(&tree)
        .map_err(|e| Error::format(format!("serialization failed: {e}")))?;
    out.push('\n');
    Ok(out)
}

fn parse_json<T: DeserializeOwned>(s: &str, what: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::format(format!("malformed {what} file: {e}")))
}

#[derive(Deserialize)]
struct SchemaProbe {
    #[serde(default)]
    schema: String,
}

/// Reads a file's schema tag without parsing the rest, for callers that
/// accept more than one kind of state file.
pub fn schema_of(s: &str) -> Result<String> {
    let probe: SchemaProbe = parse_json(s, "state")?;
    Ok(probe.schema)
}

/// Checks the file's schema tag before attempting the full parse, so a
/// file of the wrong kind reports the kind mismatch, not a missing field.
fn expect_schema(s: &str, want: &str, what: &str) -> Result<()> {
    let probe: SchemaProbe = parse_json(s, what)?;
    if probe.schema == want {
        Ok(())
    } else {
        Err(Error::format(format!("expected schema `{want}`, found `{}`", probe.schema)))
    }
}

/// One graph element as written to disk.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ElementRecord {
    pub id: ElementId,
    pub kind: ElementKind,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<ElementId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tgt: Option<ElementId>,
}

fn element_records(g: &Graph) -> Result<Vec<ElementRecord>> {
    g.elements()
        .map(|e| {
            Ok(ElementRecord {
                id: e.id,
                kind: e.kind(),
                ty: g.type_name(e.id)?.to_string(),
                src: e.src,
                tgt: e.tgt,
            })
        })
        .collect()
}

/// Inserts records into the graph: nodes first, then edges in rounds so
/// edges may reference other edges once those exist.
fn insert_elements(g: &mut Graph, records: &[ElementRecord]) -> Result<()> {
    let mut pending = Vec::new();
    for r in records {
        match r.kind {
            ElementKind::Node => {
                if r.src.is_some() || r.tgt.is_some() {
                    return Err(Error::format(format!("node {} carries endpoints", r.id)));
                }
                g.add_node_with_id(r.id, &r.ty)?;
            }
            ElementKind::Edge => pending.push(r),
        }
    }
    while !pending.is_empty() {
        let mut next = Vec::new();
        let before = pending.len();
        for r in pending {
            let (src, tgt) = match (r.src, r.tgt) {
                (Some(s), Some(t)) => (s, t),
                _ => return Err(Error::format(format!("edge {} lacks endpoints", r.id))),
            };
            if g.contains(src) && g.contains(tgt) {
                g.add_edge_with_id(r.id, &r.ty, src, tgt)?;
            } else {
                next.push(r);
            }
        }
        if next.len() == before {
            return Err(Error::format(format!(
                "edge {} references elements not in the file",
                next[0].id
            )));
        }
        pending = next;
    }
    Ok(())
}

/// Bookkeeping machinery as written to disk: the bookkeeping node id and
/// the mark edges, ascending by marked element.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct BookkeepingRecord {
    pub node: ElementId,
    pub marks: Vec<MarkRecord>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct MarkRecord {
    pub target: ElementId,
    pub edge: ElementId,
}

fn bookkeeping_record(g: &Graph) -> Option<BookkeepingRecord> {
    g.bookkeeping_node().map(|node| BookkeepingRecord {
        node,
        marks: g
            .bookkeeping_edges()
            .iter()
            .map(|(&target, &edge)| MarkRecord { target, edge })
            .collect(),
    })
}

fn restore_bookkeeping(g: &mut Graph, record: Option<BookkeepingRecord>) -> Result<()> {
    let (node, edges) = match record {
        None => (None, BTreeMap::new()),
        Some(r) => (Some(r.node), r.marks.into_iter().map(|m| (m.target, m.edge)).collect()),
    };
    g.restore_bookkeeping(node, edges)
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    schema: String,
    elements: Vec<ElementRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bookkeeping: Option<BookkeepingRecord>,
}

/// Serializes a graph (elements plus bookkeeping marks).
pub fn graph_to_json(g: &Graph) -> Result<String> {
    canonical_json(&GraphFile {
        schema: GRAPH_SCHEMA.into(),
        elements: element_records(g)?,
        bookkeeping: bookkeeping_record(g),
    })
}

/// Parses a graph over the given type graph.
pub fn graph_from_json(s: &str, tg: &Arc<TypeGraph>) -> Result<Graph> {
    expect_schema(s, GRAPH_SCHEMA, "graph")?;
    let f: GraphFile = parse_json(s, "graph")?;
    let mut g = Graph::new(tg.clone());
    insert_elements(&mut g, &f.elements)?;
    restore_bookkeeping(&mut g, f.bookkeeping)?;
    g.validate()?;
    Ok(g)
}

#[derive(Serialize, Deserialize)]
struct TypeGraphRecord {
    nodes: Vec<String>,
    edges: Vec<EdgeTypeDef>,
}

impl TypeGraphRecord {
    fn of(tg: &TypeGraph) -> Self {
        TypeGraphRecord {
            nodes: tg.node_type_names().to_vec(),
            edges: tg.edge_type_defs().to_vec(),
        }
    }

    fn build(self) -> Result<TypeGraph> {
        TypeGraph::new(self.nodes, self.edges)
    }
}

/// One rule element: the shared record plus its domain tag and whether
/// the rule creates it.
#[derive(Serialize, Deserialize)]
struct RuleElementRecord {
    #[serde(flatten)]
    element: ElementRecord,
    domain: Domain,
    created: bool,
}

#[derive(Serialize, Deserialize)]
struct RuleRecord {
    name: String,
    elements: Vec<RuleElementRecord>,
}

#[derive(Serialize, Deserialize)]
struct TggFile {
    schema: String,
    source: TypeGraphRecord,
    corr: TypeGraphRecord,
    target: TypeGraphRecord,
    links: Vec<LinkEdgeType>,
    rules: Vec<RuleRecord>,
}

/// Serializes a grammar: the three type graphs, link declarations, and
/// every rule's elements with domain tags and created flags.
pub fn grammar_to_json(grammar: &Grammar) -> Result<String> {
    let mut rules = Vec::new();
    for r in &grammar.rules {
        let created = r.created_ids();
        let mut elements = Vec::new();
        for record in element_records(&r.rule.rhs)? {
            let domain = grammar.element_domain(&r.rule.rhs, record.id)?;
            let created = created.contains(&record.id);
            elements.push(RuleElementRecord { element: record, domain, created });
        }
        rules.push(RuleRecord { name: r.name().to_string(), elements });
    }
    canonical_json(&TggFile {
        schema: TGG_SCHEMA.into(),
        source: TypeGraphRecord::of(&grammar.ttg.source),
        corr: TypeGraphRecord::of(&grammar.ttg.corr),
        target: TypeGraphRecord::of(&grammar.ttg.target),
        links: grammar.ttg.links.clone(),
        rules,
    })
}

/// Parses a grammar and re-derives its forward rules.
pub fn grammar_from_json(s: &str) -> Result<Grammar> {
    expect_schema(s, TGG_SCHEMA, "grammar")?;
    let f: TggFile = parse_json(s, "grammar")?;
    let ttg = TripleTypeGraph {
        source: f.source.build()?,
        corr: f.corr.build()?,
        target: f.target.build()?,
        links: f.links,
    };
    let (merged, _) = ttg.merged()?;
    let mut rules = Vec::new();
    for r in f.rules {
        let context: Vec<ElementRecord> =
            r.elements.iter().filter(|e| !e.created).map(|e| e.element.clone()).collect();
        let all: Vec<ElementRecord> = r.elements.iter().map(|e| e.element.clone()).collect();
        let mut lhs = Graph::new(merged.clone());
        insert_elements(&mut lhs, &context)?;
        let mut rhs = Graph::new(merged.clone());
        insert_elements(&mut rhs, &all)?;
        rules.push((TggRule::new(r.name, lhs, rhs)?, r.elements));
    }
    let grammar = Grammar::new(ttg, rules.iter().map(|(r, _)| r.clone()).collect())?;
    for (rule, elements) in &rules {
        for e in elements {
            let actual = grammar.element_domain(&rule.rule.rhs, e.element.id)?;
            if actual != e.domain {
                return Err(Error::format(format!(
                    "rule `{}` tags element {} as {:?}, but its type belongs to {:?}",
                    rule.name(),
                    e.element.id,
                    e.domain,
                    actual
                )));
            }
        }
    }
    Ok(grammar)
}

/// One history version as written to disk: its id (always the position in
/// the list, starting at 1), base versions, added elements in application
/// order, and removed element ids.
#[derive(Serialize, Deserialize)]
struct VersionRecord {
    id: VersionId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    bases: Vec<VersionId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    added: Vec<ElementRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    removed: Vec<ElementId>,
}

#[derive(Serialize, Deserialize)]
struct HistoryFile {
    schema: String,
    versions: Vec<VersionRecord>,
}

/// Splits a delta into added elements and removed ids. An id both added
/// and removed within the same delta cancels out and is omitted: such a
/// pair is a net no-op on the base version either way around, since ids
/// keep one definition for the whole history.
fn delta_records(delta: &Delta) -> (Vec<ElementRecord>, Vec<ElementId>) {
    let added_ids: std::collections::BTreeSet<ElementId> = delta
        .ops
        .iter()
        .filter_map(|op| match op {
            DeltaOp::AddNode { id, .. } | DeltaOp::AddEdge { id, .. } => Some(*id),
            DeltaOp::Remove { .. } => None,
        })
        .collect();
    let removed_ids: std::collections::BTreeSet<ElementId> = delta
        .ops
        .iter()
        .filter_map(|op| match op {
            DeltaOp::Remove { id } => Some(*id),
            _ => None,
        })
        .collect();
    let mut added = Vec::new();
    let mut removed = Vec::new();
    for op in &delta.ops {
        let id = match op {
            DeltaOp::AddNode { id, .. } | DeltaOp::AddEdge { id, .. } => *id,
            DeltaOp::Remove { id } => *id,
        };
        if added_ids.contains(&id) && removed_ids.contains(&id) {
            continue;
        }
        match op {
            DeltaOp::AddNode { id, ty } => added.push(ElementRecord {
                id: *id,
                kind: ElementKind::Node,
                ty: ty.clone(),
                src: None,
                tgt: None,
            }),
            DeltaOp::AddEdge { id, ty, src, tgt } => added.push(ElementRecord {
                id: *id,
                kind: ElementKind::Edge,
                ty: ty.clone(),
                src: Some(*src),
                tgt: Some(*tgt),
            }),
            DeltaOp::Remove { id } => removed.push(*id),
        }
    }
    (added, removed)
}

fn delta_from_records(added: Vec<ElementRecord>, removed: Vec<ElementId>) -> Result<Delta> {
    let mut ops = Vec::new();
    for r in added {
        match r.kind {
            ElementKind::Node => {
                if r.src.is_some() || r.tgt.is_some() {
                    return Err(Error::format(format!("node {} carries endpoints", r.id)));
                }
                ops.push(DeltaOp::AddNode { id: r.id, ty: r.ty });
            }
            ElementKind::Edge => {
                let (src, tgt) = match (r.src, r.tgt) {
                    (Some(s), Some(t)) => (s, t),
                    _ => return Err(Error::format(format!("edge {} lacks endpoints", r.id))),
                };
                ops.push(DeltaOp::AddEdge { id: r.id, ty: r.ty, src, tgt });
            }
        }
    }
    ops.extend(removed.into_iter().map(|id| DeltaOp::Remove { id }));
    Ok(Delta { ops })
}

/// Serializes a history as a list of versions with bases, added elements,
/// and removed ids.
pub fn history_to_json(h: &History) -> Result<String> {
    let mut versions = Vec::new();
    for (i, op) in h.versions.iter().enumerate() {
        let id = VersionId(i as u32 + 1);
        let record = match op {
            VersionOp::Root { delta } => {
                let (added, removed) = delta_records(delta);
                VersionRecord { id, bases: Vec::new(), added, removed }
            }
            VersionOp::Change { base, delta } => {
                let (added, removed) = delta_records(delta);
                VersionRecord { id, bases: vec![*base], added, removed }
            }
            VersionOp::Merge { bases, remove } => VersionRecord {
                id,
                bases: bases.clone(),
                added: Vec::new(),
                removed: remove.clone(),
            },
        };
        versions.push(record);
    }
    canonical_json(&HistoryFile { schema: HISTORY_SCHEMA.into(), versions })
}

/// Parses a history. Version ids must be the positions in the list; a
/// version without bases is the root (first only), one base is a change,
/// several are a merge (which cannot add elements).
pub fn history_from_json(s: &str) -> Result<History> {
    expect_schema(s, HISTORY_SCHEMA, "history")?;
    let f: HistoryFile = parse_json(s, "history")?;
    let mut versions = Vec::new();
    for (i, r) in f.versions.into_iter().enumerate() {
        let expect = VersionId(i as u32 + 1);
        if r.id != expect {
            return Err(Error::format(format!(
                "version entry {} carries id {}, expected {expect}",
                i + 1,
                r.id
            )));
        }
        let op = match r.bases.len() {
            0 => {
                if i != 0 {
                    return Err(Error::format(format!("version {expect} has no bases")));
                }
                VersionOp::Root { delta: delta_from_records(r.added, r.removed)? }
            }
            1 => VersionOp::Change {
                base: r.bases[0],
                delta: delta_from_records(r.added, r.removed)?,
            },
            _ => {
                if !r.added.is_empty() {
                    return Err(Error::format(format!("merge version {expect} adds elements")));
                }
                VersionOp::Merge { bases: r.bases, remove: r.removed }
            }
        };
        versions.push(op);
    }
    Ok(History { versions })
}

#[derive(Serialize, Deserialize)]
struct ModsFile {
    schema: String,
    modifications: Vec<Modification>,
}

/// Serializes a modification sequence (order preserved).
pub fn mods_to_json(mods: &[Modification]) -> Result<String> {
    canonical_json(&ModsFile { schema: MODS_SCHEMA.into(), modifications: mods.to_vec() })
}

/// Parses a modification sequence.
pub fn mods_from_json(s: &str) -> Result<Vec<Modification>> {
    expect_schema(s, MODS_SCHEMA, "modifications")?;
    let f: ModsFile = parse_json(s, "modifications")?;
    Ok(f.modifications)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DagVersionRecord {
    id: VersionId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    bases: Vec<VersionId>,
}

fn dag_records(dag: &VersionDag) -> Vec<DagVersionRecord> {
    dag.versions().map(|v| DagVersionRecord { id: v, bases: dag.preds(v).to_vec() }).collect()
}

fn dag_from_records(records: &[DagVersionRecord]) -> Result<VersionDag> {
    let mut preds = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let expect = VersionId(i as u32 + 1);
        if r.id != expect {
            return Err(Error::format(format!(
                "version entry {} carries id {}, expected {expect}",
                i + 1,
                r.id
            )));
        }
        preds.push(r.bases.clone());
    }
    VersionDag::from_preds(preds)
}

/// One model element: the shared record plus its presence set, its
/// untranslated set (source elements only), and the original id it
/// projects to. Version sets are stored as the versions where membership
/// begins (`cv`) and ends (`dv`) relative to the version DAG. Reference
/// edges carry none of these.
#[derive(Serialize, Deserialize)]
struct SnapshotElementRecord {
    #[serde(flatten)]
    element: ElementRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<MaterializedSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u: Option<MaterializedSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<ElementId>,
}

/// One recorded rule application, with its version set materialized.
#[derive(Serialize, Deserialize)]
struct TraceRecord {
    rule: String,
    #[serde(rename = "match")]
    match_image: BTreeMap<ElementId, ElementId>,
    created: Vec<ElementId>,
    created_corr: ElementId,
    required_corr: Vec<ElementId>,
    covered: Vec<ElementId>,
    p: MaterializedSet,
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    schema: String,
    dag: Vec<DagVersionRecord>,
    generated: u64,
    elements: Vec<SnapshotElementRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bookkeeping: Option<BookkeepingRecord>,
    traces: Vec<TraceRecord>,
}

/// Serializes the complete state of a multi-version model.
pub fn snapshot_to_json(m: &MultiVersionModel) -> Result<String> {
    let dag = dag_records(&m.dag);
    let mut elements = Vec::new();
    for record in element_records(&m.graph)? {
        let id = record.id;
        elements.push(SnapshotElementRecord {
            element: record,
            p: m.presence.get(&id).map(|s| materialize(s, &m.dag)),
            u: m.untranslated.get(&id).map(|s| materialize(s, &m.dag)),
            origin: m.origin_of.get(&id).copied(),
        });
    }
    let traces = m
        .traces
        .iter()
        .map(|t| TraceRecord {
            rule: t.rule_name.clone(),
            match_image: t.match_image.clone(),
            created: t.created.clone(),
            created_corr: t.created_corr,
            required_corr: t.required_corr.iter().copied().collect(),
            covered: t.covered_sources.iter().copied().collect(),
            p: materialize(&t.p_at_creation, &m.dag),
        })
        .collect();
    canonical_json(&SnapshotFile {
        schema: SNAPSHOT_SCHEMA.into(),
        dag,
        generated: m.generated_ids(),
        elements,
        bookkeeping: bookkeeping_record(&m.graph),
        traces,
    })
}

/// Parses a model snapshot over the given (encoding) type graph.
pub fn snapshot_from_json(s: &str, tg: &Arc<TypeGraph>) -> Result<MultiVersionModel> {
    expect_schema(s, SNAPSHOT_SCHEMA, "snapshot")?;
    let f: SnapshotFile = parse_json(s, "snapshot")?;
    let dag = dag_from_records(&f.dag)?;
    let mut graph = Graph::new(tg.clone());
    let records: Vec<ElementRecord> = f.elements.iter().map(|e| e.element.clone()).collect();
    insert_elements(&mut graph, &records)?;
    restore_bookkeeping(&mut graph, f.bookkeeping)?;
    graph.validate()?;
    let mut presence = BTreeMap::new();
    let mut untranslated = BTreeMap::new();
    let mut origin_of = BTreeMap::new();
    let mut mv_of_origin = BTreeMap::new();
    for e in &f.elements {
        let id = e.element.id;
        if let Some(p) = &e.p {
            presence.insert(id, dematerialize(p, &dag));
        }
        if let Some(u) = &e.u {
            untranslated.insert(id, dematerialize(u, &dag));
        }
        if let Some(origin) = e.origin {
            if let Some(&other) = mv_of_origin.get(&origin) {
                return Err(Error::format(format!(
                    "elements {other} and {id} both claim original id {origin}"
                )));
            }
            origin_of.insert(id, origin);
            mv_of_origin.insert(origin, id);
        }
    }
    let traces = f
        .traces
        .into_iter()
        .map(|t| MvTrace {
            rule_name: t.rule,
            match_image: t.match_image,
            created: t.created,
            created_corr: t.created_corr,
            required_corr: t.required_corr.into_iter().collect(),
            covered_sources: t.covered.into_iter().collect(),
            p_at_creation: dematerialize(&t.p, &dag),
        })
        .collect();
    Ok(MultiVersionModel::from_parts(
        graph,
        dag,
        presence,
        untranslated,
        origin_of,
        mv_of_origin,
        f.generated,
        traces,
    ))
}

/// One rule application of the single-version engine, as written to disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct SvmTraceRecord {
    rule: String,
    #[serde(rename = "match")]
    match_image: BTreeMap<ElementId, ElementId>,
    created: Vec<ElementId>,
    created_corr: ElementId,
    required_corr: Vec<ElementId>,
    translated: Vec<ElementId>,
}

/// One element of a per-version triplet. `origin` is the history-level id
/// of a source element whose local id differs from it; correspondence and
/// target elements never carry one.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct SvmElementRecord {
    #[serde(flatten)]
    element: ElementRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<ElementId>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SvmVersionRecord {
    id: VersionId,
    next_local: u64,
    elements: Vec<SvmElementRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bookkeeping: Option<BookkeepingRecord>,
    traces: Vec<SvmTraceRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SvmStateFile {
    schema: String,
    dag: Vec<DagVersionRecord>,
    versions: Vec<SvmVersionRecord>,
}

/// Serializes the complete state of the copy-based per-version baseline.
pub fn svm_state_to_json(world: &SvmWorld) -> Result<String> {
    let mut versions = Vec::new();
    for (&v, sv) in &world.versions {
        // local id -> original id, for marking renamed source elements.
        let originals: BTreeMap<ElementId, ElementId> =
            sv.map.iter().map(|(&orig, &local)| (local, orig)).collect();
        let elements = element_records(&sv.state.graph)?
            .into_iter()
            .map(|element| {
                let origin = originals.get(&element.id).copied().filter(|&o| o != element.id);
                SvmElementRecord { element, origin }
            })
            .collect();
        let traces = sv
            .state
            .traces
            .iter()
            .map(|t| SvmTraceRecord {
                rule: t.rule_name.clone(),
                match_image: t.match_image.clone(),
                created: t.created.clone(),
                created_corr: t.created_corr,
                required_corr: t.required_corr.iter().copied().collect(),
                translated: t.translated.iter().copied().collect(),
            })
            .collect();
        versions.push(SvmVersionRecord {
            id: v,
            next_local: sv.next_local,
            elements,
            bookkeeping: bookkeeping_record(&sv.state.graph),
            traces,
        });
    }
    canonical_json(&SvmStateFile {
        schema: SVM_STATE_SCHEMA.into(),
        dag: dag_records(&world.mirror.dag),
        versions,
    })
}

/// Parses a baseline state over the given grammar, whose merged type graph
/// types the triplets and whose domain tags identify the source elements
/// that modifications address by original id.
pub fn svm_state_from_json(s: &str, grammar: &Grammar) -> Result<SvmWorld> {
    expect_schema(s, SVM_STATE_SCHEMA, "baseline state")?;
    let f: SvmStateFile = parse_json(s, "baseline state")?;
    let dag = dag_from_records(&f.dag)?;
    if f.versions.len() != dag.version_count() {
        return Err(Error::format(format!(
            "{} triplets for {} versions",
            f.versions.len(),
            dag.version_count()
        )));
    }
    let source_tg = Arc::new(grammar.source_type_graph().clone());
    let mut versions = BTreeMap::new();
    let mut source_graphs = Vec::new();
    for (i, record) in f.versions.iter().enumerate() {
        let v = VersionId(i as u32 + 1);
        if record.id != v {
            return Err(Error::format(format!(
                "triplet entry {} carries version {}, expected {v}",
                i + 1,
                record.id
            )));
        }
        let mut graph = Graph::new(grammar.merged.clone());
        let records: Vec<ElementRecord> =
            record.elements.iter().map(|e| e.element.clone()).collect();
        insert_elements(&mut graph, &records)?;
        restore_bookkeeping(&mut graph, record.bookkeeping.clone())?;
        graph.validate()?;

        // Rebuild the original-id map from the domain tags.
        let mut map = BTreeMap::new();
        for e in &record.elements {
            let domain = grammar.element_domain(&graph, e.element.id)?;
            if domain == Domain::Source {
                let orig = e.origin.unwrap_or(e.element.id);
                if let Some(other) = map.insert(orig, e.element.id) {
                    return Err(Error::format(format!(
                        "elements {other} and {} both claim original id {orig} in version {v}",
                        e.element.id
                    )));
                }
            } else if let Some(origin) = e.origin {
                return Err(Error::format(format!(
                    "element {} carries original id {origin} but is not a source element",
                    e.element.id
                )));
            }
        }

        // Extract this version's source model back into original-id space.
        let originals: BTreeMap<ElementId, ElementId> =
            map.iter().map(|(&orig, &local)| (local, orig)).collect();
        let mut source_records = Vec::new();
        for e in &record.elements {
            if let Some(&orig) = originals.get(&e.element.id) {
                let endpoint = |end: Option<ElementId>| -> Result<Option<ElementId>> {
                    end.map(|local| {
                        originals.get(&local).copied().ok_or_else(|| {
                            Error::format(format!(
                                "source edge {} has a non-source endpoint {local}",
                                e.element.id
                            ))
                        })
                    })
                    .transpose()
                };
                source_records.push(ElementRecord {
                    id: orig,
                    kind: e.element.kind,
                    ty: e.element.ty.clone(),
                    src: endpoint(e.element.src)?,
                    tgt: endpoint(e.element.tgt)?,
                });
            }
        }
        let mut source_graph = Graph::new(source_tg.clone());
        insert_elements(&mut source_graph, &source_records)?;
        source_graph.validate()?;
        source_graphs.push(source_graph);

        let traces = record
            .traces
            .iter()
            .map(|t| ApplicationTrace {
                rule_name: t.rule.clone(),
                match_image: t.match_image.clone(),
                created: t.created.clone(),
                created_corr: t.created_corr,
                required_corr: t.required_corr.iter().copied().collect(),
                translated: t.translated.iter().copied().collect(),
            })
            .collect();
        let state = TransformState { graph, traces };
        let index = crate::matcher::TypeIndex::build(&state.graph);
        let mut sv = SvmVersion { state, index, map, next_local: record.next_local };
        sv.bump_next_local();
        versions.insert(v, sv);
    }
    let mirror = EvolvingSources::from_parts(dag, source_graphs)?;
    Ok(SvmWorld { mirror, versions })
}

/// Serializes a benchmark report.
pub fn bench_report_to_json(report: &BenchReport) -> Result<String> {
    canonical_json(report)
}

/// Parses a benchmark report.
pub fn bench_report_from_json(s: &str) -> Result<BenchReport> {
    expect_schema(s, BENCH_REPORT_SCHEMA, "benchmark report")?;
    parse_json(s, "benchmark report")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iso::equal_including_bookkeeping;
    use crate::mvm::adapt::MvGrammar;
    use crate::mvm::history::replay;
    use crate::mvm::model::{project_version, transform_history};
    use crate::mvm::sync::{apply_modification, MvSyncOutcome};
    use crate::matcher::TypeIndex;
    use crate::samples;
    use crate::tgg::triplet::{transform, Schedule};

    fn diamond_model() -> (MultiVersionModel, Grammar, MvGrammar) {
        let grammar = samples::class_diagram_grammar().unwrap();
        let mv = MvGrammar::new(&grammar).unwrap();
        let tg = Arc::new(grammar.source_type_graph().clone());
        let replayed = replay(&samples::diamond_history(), &tg).unwrap();
        let (model, _) = transform_history(&replayed, &mv, &Schedule::default()).unwrap();
        (model, grammar, mv)
    }

    #[test]
    fn graph_round_trips_byte_identically() {
        let (model, grammar, mv) = diamond_model();
        for v in model.dag.versions() {
            let projected = project_version(&model, &grammar, &mv.schema, v).unwrap();
            let json = graph_to_json(&projected).unwrap();
            let reloaded = graph_from_json(&json, projected.type_graph()).unwrap();
            assert!(equal_including_bookkeeping(&projected, &reloaded));
            assert_eq!(graph_to_json(&reloaded).unwrap(), json);
        }
    }

    #[test]
    fn grammar_round_trips_and_still_translates() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let json = grammar_to_json(&grammar).unwrap();
        let reloaded = grammar_from_json(&json).unwrap();
        assert_eq!(grammar_to_json(&reloaded).unwrap(), json);
        let source = samples::two_classes_one_field();
        let (state, outcome) = transform(&source, &reloaded, &Schedule::default()).unwrap();
        assert_eq!(outcome.applications, 3);
        assert!(state.is_complete());
    }

    #[test]
    fn history_round_trips_byte_identically() {
        let h = samples::diamond_history();
        let json = history_to_json(&h).unwrap();
        let parsed = history_from_json(&json).unwrap();
        assert_eq!(parsed, h);
        assert_eq!(history_to_json(&parsed).unwrap(), json);
    }

    #[test]
    fn generated_histories_round_trip_up_to_cancelled_ops() {
        // A generated delta may add a chain and remove it again within the
        // same version; the file omits the pair, so compare replays.
        let tg = Arc::new(samples::ast_type_graph());
        for seed in [5u64, 11, 23] {
            let h = crate::generator::generate_history(
                &crate::generator::HistoryConfig::default(),
                seed,
            );
            let json = history_to_json(&h).unwrap();
            let parsed = history_from_json(&json).unwrap();
            assert_eq!(history_to_json(&parsed).unwrap(), json);
            let a = replay(&h, &tg).unwrap();
            let b = replay(&parsed, &tg).unwrap();
            for v in a.dag.versions() {
                assert_eq!(
                    element_records(a.graph(v)).unwrap(),
                    element_records(b.graph(v)).unwrap(),
                    "seed {seed}, version {v}"
                );
            }
        }
    }

    #[test]
    fn non_canonical_input_is_reserialized_canonically() {
        let h = samples::diamond_history();
        let canonical = history_to_json(&h).unwrap();
        let compact: String = canonical.split_whitespace().collect::<Vec<_>>().join(" ");
        let parsed = history_from_json(&compact).unwrap();
        assert_eq!(history_to_json(&parsed).unwrap(), canonical);
    }

    #[test]
    fn mods_round_trip() {
        let mods = vec![
            Modification::VersionCreate { base: VersionId(4) },
            Modification::ElementCreate {
                version: VersionId(5),
                id: ElementId(100),
                ty: "ClassDecl".into(),
                src: None,
                tgt: None,
            },
            Modification::ElementDelete { version: VersionId(5), id: ElementId(100) },
            Modification::Merge { bases: vec![VersionId(4), VersionId(5)], remove: vec![] },
        ];
        let json = mods_to_json(&mods).unwrap();
        let parsed = mods_from_json(&json).unwrap();
        assert_eq!(parsed, mods);
        assert_eq!(mods_to_json(&parsed).unwrap(), json);
    }

    #[test]
    fn snapshot_round_trips_and_resumes_synchronization() {
        let (model, grammar, mv) = diamond_model();
        let json = snapshot_to_json(&model).unwrap();
        let mut reloaded = snapshot_from_json(&json, &mv.schema.type_graph).unwrap();
        assert_eq!(snapshot_to_json(&reloaded).unwrap(), json);
        for v in model.dag.versions() {
            let a = project_version(&model, &grammar, &mv.schema, v).unwrap();
            let b = project_version(&reloaded, &grammar, &mv.schema, v).unwrap();
            assert!(equal_including_bookkeeping(&a, &b), "projection differs at {v}");
        }

        // The reloaded model accepts further modifications exactly like
        // the original: traces drive revocation, the generated counter
        // keeps minted ids fresh.
        let mut original = model;
        let mut index = TypeIndex::build(&original.graph);
        let mut reloaded_index = TypeIndex::build(&reloaded.graph);
        let m = Modification::ElementDelete { version: VersionId(4), id: ElementId(7) };
        let a: MvSyncOutcome =
            apply_modification(&mut original, &mv, &mut index, &m, &Schedule::default()).unwrap();
        let b =
            apply_modification(&mut reloaded, &mv, &mut reloaded_index, &m, &Schedule::default())
                .unwrap();
        assert_eq!(a.revocations, 1);
        assert_eq!(b.revocations, 1);
        assert_eq!(
            snapshot_to_json(&original).unwrap(),
            snapshot_to_json(&reloaded).unwrap()
        );
    }

    #[test]
    fn baseline_state_round_trips_and_resumes_synchronization() {
        let grammar = samples::class_diagram_grammar().unwrap();
        let schedule = Schedule::default();
        let (mut world, _) =
            crate::svm::SvmWorld::transform(&samples::diamond_history(), &grammar, &schedule)
                .unwrap();
        // Grow state whose local ids diverge from original ids: a create
        // that collides with a minted id, a branch, and a merge.
        let mods = [
            Modification::ElementCreate {
                version: VersionId(1),
                id: ElementId(9),
                ty: "ClassDecl".into(),
                src: None,
                tgt: None,
            },
            Modification::VersionCreate { base: VersionId(4) },
            Modification::Merge { bases: vec![VersionId(1), VersionId(5)], remove: vec![] },
        ];
        for m in &mods {
            world.apply(m, &grammar, &schedule).unwrap();
        }

        let json = svm_state_to_json(&world).unwrap();
        let mut reloaded = svm_state_from_json(&json, &grammar).unwrap();
        assert_eq!(svm_state_to_json(&reloaded).unwrap(), json);
        for (v, sv) in &world.versions {
            assert!(
                equal_including_bookkeeping(&sv.state.graph, &reloaded.versions[v].state.graph),
                "triplet differs at {v}"
            );
            assert_eq!(sv.map, reloaded.versions[v].map, "id map differs at {v}");
        }

        // The reloaded world synchronizes further modifications exactly
        // like the original: traces drive revocation, maps keep original
        // ids addressable, counters keep minted ids fresh.
        let m = Modification::ElementDelete { version: VersionId(6), id: ElementId(7) };
        let a = world.apply(&m, &grammar, &schedule).unwrap();
        let b = reloaded.apply(&m, &grammar, &schedule).unwrap();
        assert_eq!(a.revoked, b.revoked);
        assert!(a.revoked >= 1);
        assert_eq!(svm_state_to_json(&world).unwrap(), svm_state_to_json(&reloaded).unwrap());
    }

    #[test]
    fn schema_tags_are_enforced() {
        let h = samples::diamond_history();
        let json = history_to_json(&h).unwrap();
        let err = mods_from_json(&json).unwrap_err();
        assert!(err.to_string().contains("mvtgg-mods/1"), "{err}");
    }

    #[test]
    fn history_files_with_wrong_ids_are_rejected() {
        let h = samples::diamond_history();
        let json = history_to_json(&h).unwrap().replace("\"id\": 2", "\"id\": 9");
        let err = history_from_json(&json).unwrap_err();
        assert!(err.to_string().contains("expected 2"), "{err}");
    }
}
