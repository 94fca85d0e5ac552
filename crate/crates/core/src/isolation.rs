//! Isolation by recursive partitioning, and the adaptive TSP composition on top of it.

use crate::error::{Error, Result};
use crate::gso::GsoOracle;
use crate::instances::{CoverInstance, SubInstance};
use crate::lpgst::{latency, lpgst_solve, LpgstConfig, LpgstInstance, LpgstSolution};
use crate::metric::{tsp_tour, Tour};
use crate::strategy::StrategyNode;

/// Per-vertex `D_v` and per-scenario `X_i` for a sub-instance.
#[derive(Clone, Debug, PartialEq)]
pub struct FlipSets {
    /// `d_sets[v]`: scenario ids (subset of the members) in `D_v`, ascending.
    pub d_sets: Vec<Vec<usize>>,
    /// `flipped[v]`: `D_v = M \ F_v` rather than `F_v`.
    pub flipped: Vec<bool>,
    /// `x_groups[k]`: vertices `v` with the `k`-th member in `D_v`.
    pub x_groups: Vec<Vec<usize>>,
}

/// `D_v = F_v` when `2|F_v| <= |M|`, else `M \ F_v`.
pub fn flip_sets(inst: &CoverInstance, sub: &SubInstance) -> FlipSets {
    let n = inst.metric.len();
    let members = sub.members();
    let mut d_sets = Vec::with_capacity(n);
    let mut flipped = Vec::with_capacity(n);
    for v in 0..n {
        let f: Vec<usize> = members.iter().copied().filter(|&i| inst.dist.contains(i, v)).collect();
        if 2 * f.len() <= members.len() {
            d_sets.push(f);
            flipped.push(false);
        } else {
            let rest: Vec<usize> = members.iter().copied().filter(|i| !f.contains(i)).collect();
            d_sets.push(rest);
            flipped.push(true);
        }
    }
    for d in &mut d_sets {
        d.sort_unstable();
    }
    let x_groups = members
        .iter()
        .map(|i| (0..n).filter(|&v| d_sets[v].binary_search(i).is_ok()).collect())
        .collect();
    FlipSets { d_sets, flipped, x_groups }
}

/// Tour, stops and parts produced for one sub-instance.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionResult {
    /// The LPGST tour.
    pub tour: Tour,
    /// Informative stops `v_1..v_{t-1}` in traversal order (first occurrences whose part is
    /// non-empty; the root counts when `D_r` is non-empty).
    pub stops: Vec<usize>,
    /// `parts[k]` for `k < stops.len()` is `P_{k+1}`; the last entry is the remainder `P_t`
    /// (possibly empty).
    pub parts: Vec<Vec<usize>>,
    /// `q'_k` aligned with `parts`.
    pub masses: Vec<f64>,
    /// Whether observing a stop certifies its part on the yes branch (`D_v = F_v`).
    pub certify_on_yes: Vec<bool>,
    pub lpgst: LpgstSolution,
}

/// LPGST on groups `X_i` with weights `q_i` and target `|M| - 1`, then the part split along
/// the tour.
pub fn partition(
    inst: &CoverInstance,
    sub: &SubInstance,
    oracle: &dyn GsoOracle,
    config: &LpgstConfig,
) -> Result<PartitionResult> {
    if sub.len() < 2 {
        return Err(Error::Malformed("partition needs at least two scenarios".into()));
    }
    let flips = flip_sets(inst, sub);
    let lp = LpgstInstance {
        metric: &inst.metric,
        root: inst.root,
        groups: &flips.x_groups,
        weights: sub.weights().to_vec(),
        target: sub.len() - 1,
    };
    let sol = lpgst_solve(&lp, oracle, config).map_err(|e| match e {
        Error::Infeasible(msg) => Error::Infeasible(format!(
            "partition of {} scenarios {:?}: {msg}",
            sub.len(),
            sub.members()
        )),
        other => other,
    })?;
    let mut assigned: Vec<usize> = Vec::new();
    let mut stops = Vec::new();
    let mut parts = Vec::new();
    let mut certify_on_yes = Vec::new();
    let mut seen = Vec::new();
    for &v in &sol.tour.vertices()[..sol.tour.vertices().len() - 1] {
        if seen.contains(&v) {
            continue;
        }
        seen.push(v);
        let part: Vec<usize> = flips.d_sets[v].iter().copied().filter(|i| !assigned.contains(i)).collect();
        if part.is_empty() {
            continue;
        }
        assigned.extend_from_slice(&part);
        stops.push(v);
        parts.push(part);
        certify_on_yes.push(!flips.flipped[v]);
    }
    let rest: Vec<usize> = sub.members().iter().copied().filter(|i| !assigned.contains(i)).collect();
    parts.push(rest);
    let masses = parts.iter().map(|p| sub.mass(p)).collect();
    Ok(PartitionResult { tour: sol.tour.clone(), stops, parts, masses, certify_on_yes, lpgst: sol })
}

/// One partition step, recorded for analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseRecord {
    pub depth: usize,
    pub sub: SubInstance,
    pub part_sizes: Vec<usize>,
    pub parts: Vec<Vec<usize>>,
    /// LPGST latency of the partition tour for the `X_i` groups with weights `q_i`.
    pub tour_latency: f64,
    /// Expected distance travelled in this step (out along the stops and back to the root),
    /// under the sub-instance's probabilities.
    pub expected_traversal: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsolationRun {
    pub tree: StrategyNode,
    pub phases: Vec<PhaseRecord>,
}

fn traversal(inst: &CoverInstance, part: &PartitionResult) -> f64 {
    let r = inst.root;
    let d = |a: usize, b: usize| inst.metric.d(a, b);
    let mut out = 0.0;
    let mut travelled = 0.0;
    let mut at = r;
    for (k, &v) in part.stops.iter().enumerate() {
        travelled += d(at, v);
        at = v;
        out += part.masses[k] * (travelled + d(v, r));
    }
    let rest = part.masses.last().copied().unwrap_or(0.0);
    out += rest * (travelled + d(at, r));
    out
}

fn build(
    inst: &CoverInstance,
    sub: &SubInstance,
    oracle: &dyn GsoOracle,
    config: &LpgstConfig,
    depth: usize,
    phases: &mut Vec<PhaseRecord>,
) -> Result<StrategyNode> {
    if sub.len() == 1 {
        return Ok(StrategyNode::leaf(Some(sub.members()[0])));
    }
    let part = partition(inst, sub, oracle, config)?;
    if part.parts.iter().any(|p| p.len() == sub.len()) {
        return Err(Error::Infeasible(format!(
            "partition made no progress on scenarios {:?}",
            sub.members()
        )));
    }
    let flips = flip_sets(inst, sub);
    phases.push(PhaseRecord {
        depth,
        sub: sub.clone(),
        part_sizes: part.parts.iter().map(Vec::len).collect(),
        parts: part.parts.clone(),
        tour_latency: latency(&inst.metric, &part.tour, &flips.x_groups, sub.weights()),
        expected_traversal: traversal(inst, &part),
    });
    let hang = |p: &[usize], phases: &mut Vec<PhaseRecord>| -> Result<StrategyNode> {
        if p.is_empty() {
            return Ok(StrategyNode::leaf(None));
        }
        let child = build(inst, &sub.restrict(p), oracle, config, depth + 1, phases)?;
        Ok(if child.is_leaf() { child } else { StrategyNode::waypoint(inst.root, child) })
    };
    let mut node = hang(part.parts.last().unwrap(), phases)?;
    let mut branches = Vec::with_capacity(part.stops.len());
    for k in 0..part.stops.len() {
        branches.push(hang(&part.parts[k], phases)?);
    }
    for k in (0..part.stops.len()).rev() {
        let certified = branches.pop().unwrap();
        node = if part.certify_on_yes[k] {
            StrategyNode::observe(part.stops[k], certified, node)
        } else {
            StrategyNode::observe(part.stops[k], node, certified)
        };
    }
    Ok(node)
}

/// Recursive isolation with per-phase records.
pub fn iso_solve_traced(inst: &CoverInstance, oracle: &dyn GsoOracle, config: &LpgstConfig) -> Result<IsolationRun> {
    inst.validate().map_err(Error::InvalidInstance)?;
    let mut phases = Vec::new();
    let tree = build(inst, &SubInstance::full(&inst.dist), oracle, config, 0, &mut phases)?;
    Ok(IsolationRun { tree, phases })
}

/// Isolation strategy tree: every scenario reaches its own labeled leaf.
pub fn iso_solve(inst: &CoverInstance, oracle: &dyn GsoOracle, config: &LpgstConfig) -> Result<StrategyNode> {
    Ok(iso_solve_traced(inst, oracle, config)?.tree)
}

/// Appends, at each labeled leaf, a walk over the scenario's not yet visited vertices in TSP
/// order, starting from the current position.
pub fn complete_with_tours(inst: &CoverInstance, tree: &StrategyNode) -> StrategyNode {
    fn walk(inst: &CoverInstance, node: &StrategyNode, visited: &mut Vec<usize>) -> StrategyNode {
        match node {
            StrategyNode::Observe { vertex, yes, no } => {
                visited.push(*vertex);
                let y = walk(inst, yes, visited);
                let n = walk(inst, no, visited);
                visited.pop();
                StrategyNode::observe(*vertex, y, n)
            }
            StrategyNode::Waypoint { vertex, next } => {
                visited.push(*vertex);
                let t = walk(inst, next, visited);
                visited.pop();
                StrategyNode::waypoint(*vertex, t)
            }
            StrategyNode::Leaf { scenario: None } => node.clone(),
            StrategyNode::Leaf { scenario: Some(k) } => {
                let todo: Vec<usize> = inst
                    .dist
                    .scenario(*k)
                    .iter()
                    .copied()
                    .filter(|v| *v != inst.root && !visited.contains(v))
                    .collect();
                let tour = tsp_tour(&inst.metric, inst.root, &todo);
                StrategyNode::waypoints(tour.interior(), node.clone())
            }
        }
    }
    walk(inst, tree, &mut Vec::new())
}

/// Adaptive TSP: isolate, then tour the realized scenario's remaining vertices.
pub fn adaptsp_solve(inst: &CoverInstance, oracle: &dyn GsoOracle, config: &LpgstConfig) -> Result<StrategyNode> {
    let tree = iso_solve(inst, oracle, config)?;
    Ok(complete_with_tours(inst, &tree))
}
