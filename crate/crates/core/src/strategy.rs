//! Adaptive strategy trees: tracing, expected-cost evaluation, feasibility and DOT export.
//!
//! A tree starts at the instance root implicitly. Each `Observe` node travels to its vertex and
//! branches on whether that vertex carries demand; `Waypoint` nodes travel without observing.
//! The cost of a traced path is the closed walk `r, seq..., r`; its latency is the sum of
//! first-arrival times of the demand vertices along `r, seq...`.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{CoverInstance, Objective};
use crate::metric::prefix_lengths;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyNode {
    Observe {
        vertex: usize,
        yes: Box<StrategyNode>,
        no: Box<StrategyNode>,
    },
    Waypoint {
        vertex: usize,
        next: Box<StrategyNode>,
    },
    Leaf {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scenario: Option<usize>,
    },
}

impl StrategyNode {
    pub fn leaf(scenario: Option<usize>) -> Self {
        StrategyNode::Leaf { scenario }
    }

    pub fn observe(vertex: usize, yes: StrategyNode, no: StrategyNode) -> Self {
        StrategyNode::Observe { vertex, yes: Box::new(yes), no: Box::new(no) }
    }

    pub fn waypoint(vertex: usize, next: StrategyNode) -> Self {
        StrategyNode::Waypoint { vertex, next: Box::new(next) }
    }

    /// Prepends a chain of waypoints ending in `tail`.
    pub fn waypoints(vertices: &[usize], tail: StrategyNode) -> Self {
        vertices.iter().rev().fold(tail, |acc, &v| StrategyNode::waypoint(v, acc))
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, StrategyNode::Leaf { .. })
    }

    pub fn node_count(&self) -> usize {
        let mut count = 0;
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            count += 1;
            match node {
                StrategyNode::Observe { yes, no, .. } => {
                    stack.push(yes);
                    stack.push(no);
                }
                StrategyNode::Waypoint { next, .. } => stack.push(next),
                StrategyNode::Leaf { .. } => {}
            }
        }
        count
    }

    /// Number of `Observe` nodes on the longest root-leaf path.
    pub fn observe_depth(&self) -> usize {
        match self {
            StrategyNode::Observe { yes, no, .. } => 1 + yes.observe_depth().max(no.observe_depth()),
            StrategyNode::Waypoint { next, .. } => next.observe_depth(),
            StrategyNode::Leaf { .. } => 0,
        }
    }

    /// Largest vertex index mentioned anywhere in the tree.
    pub fn max_vertex(&self) -> Option<usize> {
        match self {
            StrategyNode::Observe { vertex, yes, no } => {
                [Some(*vertex), yes.max_vertex(), no.max_vertex()].into_iter().flatten().max()
            }
            StrategyNode::Waypoint { vertex, next } => {
                [Some(*vertex), next.max_vertex()].into_iter().flatten().max()
            }
            StrategyNode::Leaf { .. } => None,
        }
    }
}

/// The path followed for one demand set.
#[derive(Clone, Debug, PartialEq)]
pub struct TracedPath {
    /// Vertices of the `Observe` and `Waypoint` nodes passed, in order (the implicit start at
    /// the root is not included).
    pub sequence: Vec<usize>,
    /// `(vertex, demand seen)` for every observation made.
    pub observations: Vec<(usize, bool)>,
    /// Label of the terminal leaf.
    pub leaf: Option<usize>,
    /// Preorder index of the terminal leaf; identifies the leaf node.
    pub leaf_index: usize,
}

/// Follows the tree for demand set `demand` (sorted).
pub fn trace(tree: &StrategyNode, demand: &[usize]) -> TracedPath {
    let mut sequence = Vec::new();
    let mut observations = Vec::new();
    let mut node = tree;
    let mut index = 0;
    loop {
        match node {
            StrategyNode::Observe { vertex, yes, no } => {
                let seen = demand.binary_search(vertex).is_ok();
                sequence.push(*vertex);
                observations.push((*vertex, seen));
                if seen {
                    index += 1;
                    node = yes;
                } else {
                    index += 1 + yes.node_count();
                    node = no;
                }
            }
            StrategyNode::Waypoint { vertex, next } => {
                sequence.push(*vertex);
                index += 1;
                node = next;
            }
            StrategyNode::Leaf { scenario } => {
                return TracedPath { sequence, observations, leaf: *scenario, leaf_index: index };
            }
        }
    }
}

/// A feasibility violation, naming the scenarios and vertices involved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    VertexOutOfRange { vertex: usize, n: usize },
    SharedLeaf { first: usize, second: usize },
    WrongLeafLabel { scenario: usize, label: usize },
    MissedDemand { scenario: usize, vertex: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VertexOutOfRange { vertex, n } => {
                write!(f, "tree names vertex {vertex} but the metric has {n} vertices")
            }
            Violation::SharedLeaf { first, second } => {
                write!(f, "scenarios {first} and {second} end at the same leaf")
            }
            Violation::WrongLeafLabel { scenario, label } => {
                write!(f, "scenario {scenario} ends at a leaf labeled {label}")
            }
            Violation::MissedDemand { scenario, vertex } => {
                write!(f, "scenario {scenario} never visits its demand vertex {vertex}")
            }
        }
    }
}

/// Non-fatal findings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Warning {
    /// A vertex observed twice on one root-leaf path; the second observation is determined.
    RepeatedObservation { vertex: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::RepeatedObservation { vertex } => {
                write!(f, "vertex {vertex} is observed twice on one path")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

fn repeated_observations(tree: &StrategyNode) -> Vec<Warning> {
    fn walk(node: &StrategyNode, seen: &mut Vec<usize>, out: &mut Vec<usize>) {
        match node {
            StrategyNode::Observe { vertex, yes, no } => {
                if seen.contains(vertex) && !out.contains(vertex) {
                    out.push(*vertex);
                }
                seen.push(*vertex);
                walk(yes, seen, out);
                walk(no, seen, out);
                seen.pop();
            }
            StrategyNode::Waypoint { next, .. } => walk(next, seen, out),
            StrategyNode::Leaf { .. } => {}
        }
    }
    let mut out = Vec::new();
    walk(tree, &mut Vec::new(), &mut out);
    out.sort_unstable();
    out.into_iter().map(|vertex| Warning::RepeatedObservation { vertex }).collect()
}

/// Checks the tree against the instance for the given objective.
///
/// Isolation: the traced leaves are pairwise distinct and any label on a reached leaf names its
/// scenario. AdapTSP / AdapTRP: every demand vertex lies on its scenario's traced path.
pub fn check_feasible(inst: &CoverInstance, tree: &StrategyNode, objective: Objective) -> FeasibilityReport {
    let n = inst.metric.len();
    let mut report = FeasibilityReport { violations: Vec::new(), warnings: repeated_observations(tree) };
    if let Some(v) = tree.max_vertex().filter(|&v| v >= n) {
        report.violations.push(Violation::VertexOutOfRange { vertex: v, n });
        return report;
    }
    let paths: Vec<TracedPath> = inst.dist.scenarios().iter().map(|s| trace(tree, s)).collect();
    match objective {
        Objective::Isolation => {
            for (i, p) in paths.iter().enumerate() {
                if let Some(first) = paths[..i].iter().position(|q| q.leaf_index == p.leaf_index) {
                    report.violations.push(Violation::SharedLeaf { first, second: i });
                }
                if let Some(label) = p.leaf.filter(|&l| l != i) {
                    report.violations.push(Violation::WrongLeafLabel { scenario: i, label });
                }
            }
        }
        Objective::AdapTsp | Objective::AdapTrp => {
            for (i, p) in paths.iter().enumerate() {
                for &v in inst.dist.scenario(i) {
                    if v != inst.root && !p.sequence.contains(&v) {
                        report.violations.push(Violation::MissedDemand { scenario: i, vertex: v });
                    }
                }
            }
        }
    }
    report
}

/// Length of the closed walk `r, path..., r`.
pub fn path_cost(inst: &CoverInstance, path: &TracedPath) -> f64 {
    let mut walk = Vec::with_capacity(path.sequence.len() + 2);
    walk.push(inst.root);
    walk.extend_from_slice(&path.sequence);
    walk.push(inst.root);
    inst.metric.walk_length(&walk)
}

/// Sum over `demand` of the first-arrival time along `r, path...` (unvisited vertices are
/// charged the full path length).
pub fn path_latency(inst: &CoverInstance, path: &TracedPath, demand: &[usize]) -> f64 {
    let mut walk = Vec::with_capacity(path.sequence.len() + 1);
    walk.push(inst.root);
    walk.extend_from_slice(&path.sequence);
    let prefix = prefix_lengths(&inst.metric, &walk);
    let total = *prefix.last().unwrap();
    demand
        .iter()
        .map(|v| walk.iter().position(|u| u == v).map_or(total, |k| prefix[k]))
        .sum()
}

/// Per-scenario cost (tour length, or latency for AdapTRP) without any feasibility check.
pub fn scenario_costs(inst: &CoverInstance, tree: &StrategyNode, objective: Objective) -> Vec<f64> {
    inst.dist
        .scenarios()
        .iter()
        .map(|s| {
            let path = trace(tree, s);
            match objective {
                Objective::Isolation | Objective::AdapTsp => path_cost(inst, &path),
                Objective::AdapTrp => path_latency(inst, &path, s),
            }
        })
        .collect()
}

/// Expected cost for `objective`; errors if the tree is infeasible.
pub fn evaluate(inst: &CoverInstance, tree: &StrategyNode, objective: Objective) -> Result<f64> {
    let report = check_feasible(inst, tree, objective);
    if !report.is_feasible() {
        let msg = report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        return Err(Error::Infeasible(msg));
    }
    Ok(scenario_costs(inst, tree, objective)
        .iter()
        .zip(inst.dist.probs())
        .map(|(c, p)| c * p)
        .sum())
}

pub fn eval_isolation(inst: &CoverInstance, tree: &StrategyNode) -> Result<f64> {
    evaluate(inst, tree, Objective::Isolation)
}

pub fn eval_adaptsp(inst: &CoverInstance, tree: &StrategyNode) -> Result<f64> {
    evaluate(inst, tree, Objective::AdapTsp)
}

pub fn eval_adaptrp(inst: &CoverInstance, tree: &StrategyNode) -> Result<f64> {
    evaluate(inst, tree, Objective::AdapTrp)
}

/// DOT text with preorder node numbering; observe edges are labeled `yes` / `no`.
/// Vertex names come from `labels` when given.
pub fn export_dot(tree: &StrategyNode, labels: Option<&[String]>) -> String {
    let name = |v: usize| match labels {
        Some(l) if v < l.len() => l[v].clone(),
        _ => v.to_string(),
    };
    let mut out = String::from("digraph strategy {\n  node [fontname=\"monospace\"];\n");
    let mut next_id = 0usize;
    let mut stack: Vec<(&StrategyNode, Option<(usize, &'static str)>)> = vec![(tree, None)];
    while let Some((node, parent)) = stack.pop() {
        let id = next_id;
        next_id += 1;
        let (label, shape) = match node {
            StrategyNode::Observe { vertex, .. } => (format!("observe {}", name(*vertex)), "ellipse"),
            StrategyNode::Waypoint { vertex, .. } => (format!("via {}", name(*vertex)), "plaintext"),
            StrategyNode::Leaf { scenario: Some(i) } => (format!("scenario {i}"), "box"),
            StrategyNode::Leaf { scenario: None } => ("end".to_string(), "box"),
        };
        let _ = writeln!(out, "  n{id} [label=\"{label}\", shape={shape}];");
        if let Some((p, edge)) = parent {
            if edge.is_empty() {
                let _ = writeln!(out, "  n{p} -> n{id};");
            } else {
                let _ = writeln!(out, "  n{p} -> n{id} [label=\"{edge}\"];");
            }
        }
        match node {
            StrategyNode::Observe { yes, no, .. } => {
                stack.push((no, Some((id, "no"))));
                stack.push((yes, Some((id, "yes"))));
            }
            StrategyNode::Waypoint { next, .. } => stack.push((next, Some((id, "")))),
            StrategyNode::Leaf { .. } => {}
        }
    }
    out.push_str("}\n");
    out
}

/// Distinct vertices visited anywhere in the tree.
pub fn visited_vertices(tree: &StrategyNode) -> HashSet<usize> {
    let mut out = HashSet::new();
    let mut stack = vec![tree];
    while let Some(node) = stack.pop() {
        match node {
            StrategyNode::Observe { vertex, yes, no } => {
                out.insert(*vertex);
                stack.push(yes);
                stack.push(no);
            }
            StrategyNode::Waypoint { vertex, next } => {
                out.insert(*vertex);
                stack.push(next);
            }
            StrategyNode::Leaf { .. } => {}
        }
    }
    out
}
