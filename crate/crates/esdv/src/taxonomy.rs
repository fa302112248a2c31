//! Cascade-graph model and classification rules.
//!
//! The cascade runs ecosystem structure → function → (dis)service →
//! negative effect → value change. Disservices carry a tier: final
//! disservices cause direct negative effects and may be valued; intermediate
//! disservices act only through final disservices or suppressed services,
//! so valuing them double-counts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Node kinds along the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    EcosystemStructure,
    EcosystemFunction,
    Service,
    Disservice,
    NegativeEffect,
    ValueChange,
}

/// Whether a disservice affects wellbeing directly (final) or only through
/// other disservices and services (intermediate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisserviceTier {
    Final,
    Intermediate,
}

/// Functional classification shared by services and disservices.
/// Supporting is deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalClass {
    Provisioning,
    Regulating,
    Cultural,
}

/// A node in the cascade graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeNode {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<DisserviceTier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<FunctionalClass>,
    pub label: String,
}

/// Typed DAG of cascade nodes with directed edges.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CascadeGraph {
    nodes: BTreeMap<String, CascadeNode>,
    edges: BTreeSet<(String, String)>,
}

/// Stable violation codes emitted by the validators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationCode {
    #[serde(rename = "E-CASCADE-A")]
    FinalWithoutEffect,
    #[serde(rename = "E-CASCADE-B")]
    IntermediateDirectEffect,
    #[serde(rename = "E-CASCADE-C")]
    IntermediateUnreachable,
    #[serde(rename = "E-CASCADE-D")]
    ForbiddenEdge,
    #[serde(rename = "E-CASCADE-E")]
    ForwardCycle,
    #[serde(rename = "E-DOUBLECOUNT")]
    DoubleCount,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::FinalWithoutEffect => "E-CASCADE-A",
            ViolationCode::IntermediateDirectEffect => "E-CASCADE-B",
            ViolationCode::IntermediateUnreachable => "E-CASCADE-C",
            ViolationCode::ForbiddenEdge => "E-CASCADE-D",
            ViolationCode::ForwardCycle => "E-CASCADE-E",
            ViolationCode::DoubleCount => "E-DOUBLECOUNT",
        }
    }
}

/// A validation finding. Violations are data, not errors, so a linter pass
/// can list all of them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub nodes: Vec<String>,
    pub message: String,
}

/// Structural problems that prevent validation from running at all.
#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("edge references unknown node id `{0}`")]
    DanglingNode(String),
    #[error("node `{0}` of kind Disservice is missing a tier")]
    MissingTier(String),
    #[error("line item `{item}` references unknown node `{node}`")]
    UnknownItemNode { item: String, node: String },
}

impl CascadeGraph {
    pub fn new() -> CascadeGraph {
        CascadeGraph::default()
    }

    pub fn add_node(&mut self, node: CascadeNode) {
        self.nodes.insert(node.id.clone(), node);
    }

    pub fn add_edge(&mut self, from: &str, to: &str) {
        self.edges.insert((from.to_string(), to.to_string()));
    }

    pub fn node(&self, id: &str) -> Option<&CascadeNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CascadeNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &(String, String)> {
        self.edges.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// True for the one permitted backward edge kind: the Function→Structure
    /// feedback. It closes no valuation path and is excluded from the
    /// acyclicity check.
    fn is_feedback_edge(&self, from: &str, to: &str) -> bool {
        matches!(
            (self.nodes[from].kind, self.nodes[to].kind),
            (NodeKind::EcosystemFunction, NodeKind::EcosystemStructure)
        )
    }

    fn edge_permitted(from: NodeKind, to: NodeKind) -> bool {
        use NodeKind::*;
        matches!(
            (from, to),
            (EcosystemStructure, EcosystemFunction)
                | (EcosystemFunction, Service)
                | (EcosystemFunction, Disservice)
                | (EcosystemFunction, EcosystemStructure)
                | (Service, ValueChange)
                | (Disservice, NegativeEffect)
                | (Disservice, Disservice)
                | (Disservice, Service)
                | (NegativeEffect, ValueChange)
        )
    }
}

/// Validates the cascade structure. Returns the full list of violations
/// (empty = valid); structural errors (dangling ids, missing tiers) abort
/// instead.
pub fn validate_cascade(g: &CascadeGraph) -> Result<Vec<Violation>, TaxonomyError> {
    for (from, to) in &g.edges {
        for id in [from, to] {
            if !g.nodes.contains_key(id) {
                return Err(TaxonomyError::DanglingNode(id.clone()));
            }
        }
    }
    for node in g.nodes.values() {
        if node.kind == NodeKind::Disservice && node.tier.is_none() {
            return Err(TaxonomyError::MissingTier(node.id.clone()));
        }
    }

    let mut violations = Vec::new();

    // (d) edge kinds outside the cascade order
    for (from, to) in &g.edges {
        let fk = g.nodes[from].kind;
        let tk = g.nodes[to].kind;
        if !CascadeGraph::edge_permitted(fk, tk) {
            violations.push(Violation {
                code: ViolationCode::ForbiddenEdge,
                nodes: vec![from.clone(), to.clone()],
                message: format!("edge {from} -> {to} ({fk:?} -> {tk:?}) is outside the cascade order"),
            });
        }
    }

    // (a)/(b) per-disservice tier rules
    for node in g.nodes.values() {
        if node.kind != NodeKind::Disservice {
            continue;
        }
        let to_effect = g
            .edges
            .iter()
            .any(|(f, t)| f == &node.id && g.nodes.get(t).map(|n| n.kind) == Some(NodeKind::NegativeEffect));
        match node.tier {
            Some(DisserviceTier::Final) if !to_effect => violations.push(Violation {
                code: ViolationCode::FinalWithoutEffect,
                nodes: vec![node.id.clone()],
                message: format!("final disservice `{}` has no edge to a negative effect", node.id),
            }),
            Some(DisserviceTier::Intermediate) if to_effect => violations.push(Violation {
                code: ViolationCode::IntermediateDirectEffect,
                nodes: vec![node.id.clone()],
                message: format!("intermediate disservice `{}` has a direct edge to a negative effect", node.id),
            }),
            _ => {}
        }
    }

    // (c) intermediate disservices must reach a final disservice or a service
    for node in g.nodes.values() {
        if node.kind != NodeKind::Disservice || node.tier != Some(DisserviceTier::Intermediate) {
            continue;
        }
        if !reaches_final_or_service(g, &node.id) {
            violations.push(Violation {
                code: ViolationCode::IntermediateUnreachable,
                nodes: vec![node.id.clone()],
                message: format!(
                    "intermediate disservice `{}` reaches no final disservice or service",
                    node.id
                ),
            });
        }
    }

    // (e) cycles among forward edges
    if let Some(cycle) = find_forward_cycle(g) {
        violations.push(Violation {
            code: ViolationCode::ForwardCycle,
            nodes: cycle.clone(),
            message: format!("cycle among forward edges: {}", cycle.join(" -> ")),
        });
    }

    violations.sort();
    Ok(violations)
}

fn reaches_final_or_service(g: &CascadeGraph, start: &str) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start.to_string()];
    while let Some(id) = stack.pop() {
        if !seen.insert(id.clone()) {
            continue;
        }
        let node = &g.nodes[&id];
        if id != start {
            match node.kind {
                NodeKind::Service => return true,
                NodeKind::Disservice if node.tier == Some(DisserviceTier::Final) => return true,
                _ => {}
            }
        }
        for (f, t) in &g.edges {
            if f == &id && !g.is_feedback_edge(f, t) {
                stack.push(t.clone());
            }
        }
    }
    false
}

/// DFS cycle detection over forward edges; returns the node ids on the first
/// cycle found, in a deterministic order.
fn find_forward_cycle(g: &CascadeGraph) -> Option<Vec<String>> {
    #[derive(PartialEq, Clone, Copy)]
    enum State {
        InProgress,
        Done,
    }
    let mut state: BTreeMap<String, State> = BTreeMap::new();

    fn visit(
        g: &CascadeGraph,
        id: &str,
        state: &mut BTreeMap<String, State>,
        path: &mut Vec<String>,
    ) -> Option<Vec<String>> {
        match state.get(id) {
            Some(State::Done) => return None,
            Some(State::InProgress) => {
                let start = path.iter().position(|p| p == id).unwrap_or(0);
                return Some(path[start..].to_vec());
            }
            None => {}
        }
        state.insert(id.to_string(), State::InProgress);
        path.push(id.to_string());
        for (f, t) in &g.edges {
            if f == id && !g.is_feedback_edge(f, t) {
                if let Some(cycle) = visit(g, t, state, path) {
                    return Some(cycle);
                }
            }
        }
        path.pop();
        state.insert(id.to_string(), State::Done);
        None
    }

    let ids: Vec<String> = g.nodes.keys().cloned().collect();
    let mut path = Vec::new();
    for id in ids {
        if let Some(cycle) = visit(g, &id, &mut state, &mut path) {
            return Some(cycle);
        }
    }
    None
}

/// A line item's linkage to the cascade, as seen by the double-counting
/// guard: which node it values.
pub trait ValuedItem {
    fn item_id(&self) -> &str;
    fn node_id(&self) -> &str;
}

/// Emits one violation per line item that values an intermediate
/// disservice; final disservices and services are always permitted.
pub fn check_double_counting<I: ValuedItem>(
    g: &CascadeGraph,
    items: &[I],
) -> Result<Vec<Violation>, TaxonomyError> {
    let mut violations = Vec::new();
    for item in items {
        let node = g.nodes.get(item.node_id()).ok_or_else(|| TaxonomyError::UnknownItemNode {
            item: item.item_id().to_string(),
            node: item.node_id().to_string(),
        })?;
        if node.kind == NodeKind::Disservice && node.tier == Some(DisserviceTier::Intermediate) {
            violations.push(Violation {
                code: ViolationCode::DoubleCount,
                nodes: vec![node.id.clone()],
                message: format!(
                    "item `{}` values intermediate disservice `{}`; its value embeds in final disservices and services",
                    item.item_id(),
                    node.id
                ),
            });
        }
    }
    violations.sort();
    Ok(violations)
}
