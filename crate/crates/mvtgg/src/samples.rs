//! Built-in example grammar, sources, and histories used by tests, the
//! benchmark, and the history generator.
//!
//! The running example translates a tiny abstract-syntax model (class
//! declarations with typed fields) into a class-diagram model (classes with
//! associations). One rule translates a class declaration into a class;
//! the other translates a field declaration — together with its access and
//! type chain between two already-translated classes — into an association.

use crate::delta::{Delta, DeltaOp};
use crate::error::Result;
use crate::graph::Graph;
use crate::ids::{ElementId, VersionId};
use crate::mvm::history::{History, VersionOp};
use crate::tgg::{Grammar, LinkEdgeType, TggRule, TripleTypeGraph};
use crate::typegraph::{EdgeTypeDef, TypeGraph, TypeRef};
use std::sync::Arc;

/// Source domain: class declarations, field declarations, type accesses.
pub fn ast_type_graph() -> TypeGraph {
    TypeGraph::new(
        vec!["ClassDecl".into(), "FieldDecl".into(), "TypeAccess".into()],
        vec![
            EdgeTypeDef {
                name: "declaration".into(),
                source: "ClassDecl".into(),
                target: TypeRef::node("FieldDecl"),
            },
            EdgeTypeDef {
                name: "access".into(),
                source: "FieldDecl".into(),
                target: TypeRef::node("TypeAccess"),
            },
            EdgeTypeDef {
                name: "type".into(),
                source: "TypeAccess".into(),
                target: TypeRef::node("ClassDecl"),
            },
        ],
    )
    .expect("static declarations")
}

/// Target domain: classes and associations.
pub fn class_diagram_type_graph() -> TypeGraph {
    TypeGraph::new(
        vec!["Class".into(), "Association".into()],
        vec![
            EdgeTypeDef {
                name: "from".into(),
                source: "Association".into(),
                target: TypeRef::node("Class"),
            },
            EdgeTypeDef {
                name: "to".into(),
                source: "Association".into(),
                target: TypeRef::node("Class"),
            },
        ],
    )
    .expect("static declarations")
}

fn corr_type_graph() -> TypeGraph {
    TypeGraph::new(vec!["CorrClass".into(), "CorrField".into()], vec![]).expect("static")
}

fn links() -> Vec<LinkEdgeType> {
    let link = |name: &str, corr: &str, linked: TypeRef| LinkEdgeType {
        name: name.into(),
        corr_node_type: corr.into(),
        linked,
    };
    vec![
        link("CorrClass__ClassDecl", "CorrClass", TypeRef::node("ClassDecl")),
        link("CorrClass__Class", "CorrClass", TypeRef::node("Class")),
        link("CorrField__FieldDecl", "CorrField", TypeRef::node("FieldDecl")),
        link("CorrField__TypeAccess", "CorrField", TypeRef::node("TypeAccess")),
        link("CorrField__declaration", "CorrField", TypeRef::edge("declaration")),
        link("CorrField__access", "CorrField", TypeRef::edge("access")),
        link("CorrField__type", "CorrField", TypeRef::edge("type")),
        link("CorrField__Association", "CorrField", TypeRef::node("Association")),
        link("CorrField__from", "CorrField", TypeRef::edge("from")),
        link("CorrField__to", "CorrField", TypeRef::edge("to")),
    ]
}

/// The class-diagram grammar: `ClassRule` (a class declaration becomes a
/// class) and `FieldRule` (a field chain between two translated classes
/// becomes an association).
pub fn class_diagram_grammar() -> Result<Grammar> {
    let ttg = TripleTypeGraph {
        source: ast_type_graph(),
        corr: corr_type_graph(),
        target: class_diagram_type_graph(),
        links: links(),
    };
    let (merged, _) = ttg.merged()?;

    // ClassRule: nothing required; creates ClassDecl <- CorrClass -> Class.
    let class_rule = {
        let lhs = Graph::new(merged.clone());
        let mut rhs = Graph::new(merged.clone());
        rhs.add_node_with_id(ElementId(1), "ClassDecl")?;
        rhs.add_node_with_id(ElementId(2), "CorrClass")?;
        rhs.add_node_with_id(ElementId(3), "Class")?;
        rhs.add_edge_with_id(ElementId(4), "CorrClass__ClassDecl", ElementId(2), ElementId(1))?;
        rhs.add_edge_with_id(ElementId(5), "CorrClass__Class", ElementId(2), ElementId(3))?;
        TggRule::new("ClassRule", lhs, rhs)?
    };

    // FieldRule: two translated classes required; creates the field chain
    // (field, type access, three edges) and an association between the
    // corresponding classes.
    let field_rule = {
        let mut lhs = Graph::new(merged.clone());
        lhs.add_node_with_id(ElementId(1), "ClassDecl")?;
        lhs.add_node_with_id(ElementId(2), "ClassDecl")?;
        lhs.add_node_with_id(ElementId(3), "CorrClass")?;
        lhs.add_node_with_id(ElementId(4), "CorrClass")?;
        lhs.add_node_with_id(ElementId(5), "Class")?;
        lhs.add_node_with_id(ElementId(6), "Class")?;
        lhs.add_edge_with_id(ElementId(7), "CorrClass__ClassDecl", ElementId(3), ElementId(1))?;
        lhs.add_edge_with_id(ElementId(8), "CorrClass__Class", ElementId(3), ElementId(5))?;
        lhs.add_edge_with_id(ElementId(9), "CorrClass__ClassDecl", ElementId(4), ElementId(2))?;
        lhs.add_edge_with_id(ElementId(10), "CorrClass__Class", ElementId(4), ElementId(6))?;
        let mut rhs = lhs.clone();
        rhs.add_node_with_id(ElementId(11), "FieldDecl")?;
        rhs.add_node_with_id(ElementId(12), "TypeAccess")?;
        rhs.add_edge_with_id(ElementId(13), "declaration", ElementId(1), ElementId(11))?;
        rhs.add_edge_with_id(ElementId(14), "access", ElementId(11), ElementId(12))?;
        rhs.add_edge_with_id(ElementId(15), "type", ElementId(12), ElementId(2))?;
        rhs.add_node_with_id(ElementId(16), "CorrField")?;
        rhs.add_node_with_id(ElementId(17), "Association")?;
        rhs.add_edge_with_id(ElementId(18), "from", ElementId(17), ElementId(5))?;
        rhs.add_edge_with_id(ElementId(19), "to", ElementId(17), ElementId(6))?;
        rhs.add_edge_with_id(ElementId(20), "CorrField__FieldDecl", ElementId(16), ElementId(11))?;
        rhs.add_edge_with_id(ElementId(21), "CorrField__TypeAccess", ElementId(16), ElementId(12))?;
        rhs.add_edge_with_id(ElementId(22), "CorrField__declaration", ElementId(16), ElementId(13))?;
        rhs.add_edge_with_id(ElementId(23), "CorrField__access", ElementId(16), ElementId(14))?;
        rhs.add_edge_with_id(ElementId(24), "CorrField__type", ElementId(16), ElementId(15))?;
        rhs.add_edge_with_id(ElementId(25), "CorrField__Association", ElementId(16), ElementId(17))?;
        rhs.add_edge_with_id(ElementId(26), "CorrField__from", ElementId(16), ElementId(18))?;
        rhs.add_edge_with_id(ElementId(27), "CorrField__to", ElementId(16), ElementId(19))?;
        TggRule::new("FieldRule", lhs, rhs)?
    };

    Grammar::new(ttg, vec![class_rule, field_rule])
}

/// Two classes where the first declares a field typed by the second:
/// nodes 1 (ClassDecl), 2 (ClassDecl), 3 (FieldDecl), 4 (TypeAccess) and
/// edges 5 (declaration 1->3), 6 (access 3->4), 7 (type 4->2).
pub fn two_classes_one_field() -> Graph {
    let mut g = Graph::new(Arc::new(ast_type_graph()));
    g.add_node_with_id(ElementId(1), "ClassDecl").unwrap();
    g.add_node_with_id(ElementId(2), "ClassDecl").unwrap();
    g.add_node_with_id(ElementId(3), "FieldDecl").unwrap();
    g.add_node_with_id(ElementId(4), "TypeAccess").unwrap();
    g.add_edge_with_id(ElementId(5), "declaration", ElementId(1), ElementId(3)).unwrap();
    g.add_edge_with_id(ElementId(6), "access", ElementId(3), ElementId(4)).unwrap();
    g.add_edge_with_id(ElementId(7), "type", ElementId(4), ElementId(2)).unwrap();
    g
}

/// A four-version history over the syntax-tree source model: a root with
/// two classes, one branch adding a field of the second class's type to the
/// first, a sibling branch adding a third class, and a merge of both.
pub fn diamond_history() -> History {
    let add_node = |id: u64, ty: &str| DeltaOp::AddNode { id: ElementId(id), ty: ty.into() };
    let add_edge = |id: u64, ty: &str, src: u64, tgt: u64| DeltaOp::AddEdge {
        id: ElementId(id),
        ty: ty.into(),
        src: ElementId(src),
        tgt: ElementId(tgt),
    };
    History {
        versions: vec![
            VersionOp::Root {
                delta: Delta { ops: vec![add_node(1, "ClassDecl"), add_node(2, "ClassDecl")] },
            },
            VersionOp::Change {
                base: VersionId(1),
                delta: Delta {
                    ops: vec![
                        add_node(3, "FieldDecl"),
                        add_node(4, "TypeAccess"),
                        add_edge(5, "declaration", 1, 3),
                        add_edge(6, "access", 3, 4),
                        add_edge(7, "type", 4, 2),
                    ],
                },
            },
            VersionOp::Change {
                base: VersionId(1),
                delta: Delta { ops: vec![add_node(8, "ClassDecl")] },
            },
            VersionOp::Merge { bases: vec![VersionId(2), VersionId(3)], remove: vec![] },
        ],
    }
}

/// A grammar whose result depends on rule application order: a class
/// declaration may become either a class or an association, so different
/// schedules produce structurally different targets.
pub fn ambiguous_grammar() -> Result<Grammar> {
    let corr = TypeGraph::new(vec!["CorrClass".into()], vec![])?;
    let link = |name: &str, linked: TypeRef| LinkEdgeType {
        name: name.into(),
        corr_node_type: "CorrClass".into(),
        linked,
    };
    let ttg = TripleTypeGraph {
        source: ast_type_graph(),
        corr,
        target: class_diagram_type_graph(),
        links: vec![
            link("CorrClass__ClassDecl", TypeRef::node("ClassDecl")),
            link("CorrClass__Class", TypeRef::node("Class")),
            link("CorrClass__Association", TypeRef::node("Association")),
        ],
    };
    let (merged, _) = ttg.merged()?;
    let make_axiom = |name: &str, target_ty: &str, link_ty: &str| -> Result<TggRule> {
        let lhs = Graph::new(merged.clone());
        let mut rhs = Graph::new(merged.clone());
        rhs.add_node_with_id(ElementId(1), "ClassDecl")?;
        rhs.add_node_with_id(ElementId(2), "CorrClass")?;
        rhs.add_node_with_id(ElementId(3), target_ty)?;
        rhs.add_edge_with_id(ElementId(4), "CorrClass__ClassDecl", ElementId(2), ElementId(1))?;
        rhs.add_edge_with_id(ElementId(5), link_ty, ElementId(2), ElementId(3))?;
        TggRule::new(name, lhs, rhs)
    };
    Grammar::new(
        ttg,
        vec![
            make_axiom("ClassAsClass", "Class", "CorrClass__Class")?,
            make_axiom("ClassAsAssociation", "Association", "CorrClass__Association")?,
        ],
    )
}
