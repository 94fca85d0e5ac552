//! Adaptive traveling repairman: partitions that interleave isolation with visiting frequent
//! vertices, recursion with visited-vertex removal, and a min-latency base case.

use crate::error::{Error, Result};
use crate::gso::GsoOracle;
use crate::instances::{CoverInstance, DemandDistribution, SubInstance};
use crate::lpgst::{latency, latency_gst_solve, LpgstConfig};
use crate::metric::{min_latency_path, path_latency, Tour};
use crate::strategy::StrategyNode;

/// Scenario sets of the current sub-instance, after removal of already visited vertices.
/// `ids[k]` is the original scenario id of `sets[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrpState {
    pub ids: Vec<usize>,
    pub sets: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl TrpState {
    fn len(&self) -> usize {
        self.ids.len()
    }

    fn contains(&self, k: usize, v: usize) -> bool {
        self.sets[k].binary_search(&v).is_ok()
    }
}

/// Vertex classes and groups of the latency group Steiner instance built for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrpGroups {
    /// Vertices occurring in at most half of the scenarios.
    pub low: Vec<usize>,
    /// Vertices occurring in more than half.
    pub high: Vec<usize>,
    /// Main group vertex set per scenario position, `(S_L ∩ S_i) ∪ (S_H \ S_i)`.
    pub main: Vec<Vec<usize>>,
    /// All groups handed to the solver (zero-weight main groups dropped).
    pub groups: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

pub fn trp_groups(state: &TrpState) -> TrpGroups {
    let m = state.len();
    let mut union: Vec<usize> = state.sets.iter().flatten().copied().collect();
    union.sort_unstable();
    union.dedup();
    let (mut low, mut high) = (Vec::new(), Vec::new());
    for &u in &union {
        let f = (0..m).filter(|&k| state.contains(k, u)).count();
        if 2 * f <= m {
            low.push(u);
        } else {
            high.push(u);
        }
    }
    let mut main = Vec::with_capacity(m);
    let mut groups = Vec::new();
    let mut weights = Vec::new();
    for k in 0..m {
        let mut x: Vec<usize> = low.iter().copied().filter(|&u| state.contains(k, u)).collect();
        let n_low = x.len();
        x.extend(high.iter().copied().filter(|&u| !state.contains(k, u)));
        x.sort_unstable();
        if n_low > 0 {
            groups.push(x.clone());
            weights.push(n_low as f64 * state.weights[k]);
        }
        for &v in high.iter().filter(|&&v| state.contains(k, v)) {
            let mut y = x.clone();
            y.push(v);
            y.sort_unstable();
            groups.push(y);
            weights.push(state.weights[k]);
        }
        main.push(x);
    }
    TrpGroups { low, high, main, groups, weights }
}

/// One step of the traversal: a vertex of the truncated tour, observed or passed through.
#[derive(Clone, Debug, PartialEq)]
pub enum TrpStop {
    /// Observe; the realized scenario lies in `part` (positions) when the outcome equals
    /// `stop_on_demand`.
    Observe { vertex: usize, stop_on_demand: bool, part: Vec<usize> },
    Pass { vertex: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrpPartition {
    /// The latency group Steiner tour `τ'`.
    pub full_tour: Tour,
    /// First occurrences along `τ'` up to and including the truncation vertex.
    pub steps: Vec<TrpStop>,
    /// Positions still uncovered after the truncation vertex (`P_t`).
    pub rest: Vec<usize>,
    /// Objective of `τ'` for the groups it was built for.
    pub gst_latency: f64,
    /// Set when fewer than half never became uncovered and the whole tour was used.
    pub truncation_fallback: bool,
    pub groups: TrpGroups,
}

/// Builds the group instance, solves it with full coverage, and splits the scenarios by their
/// first covering vertex along the tour, truncating once fewer than half remain uncovered.
pub fn partn_lat(inst: &CoverInstance, state: &TrpState, oracle: &dyn GsoOracle, beta: f64) -> Result<TrpPartition> {
    let m = state.len();
    if m < 2 {
        return Err(Error::Malformed("partition needs at least two scenarios".into()));
    }
    let groups = trp_groups(state);
    let full_tour = latency_gst_solve(&inst.metric, inst.root, &groups.groups, &groups.weights, oracle, beta)?;
    let gst_latency = latency(&inst.metric, &full_tour, &groups.groups, &groups.weights);
    let mut uncovered: Vec<usize> = (0..m).collect();
    let mut steps = Vec::new();
    let mut seen = Vec::new();
    let mut truncated = false;
    for &v in &full_tour.vertices()[..full_tour.vertices().len() - 1] {
        if seen.contains(&v) {
            continue;
        }
        seen.push(v);
        let part: Vec<usize> = uncovered.iter().copied().filter(|&k| groups.main[k].contains(&v)).collect();
        let is_low = groups.low.binary_search(&v).is_ok();
        let is_high = groups.high.binary_search(&v).is_ok();
        if part.is_empty() || !(is_low || is_high) {
            if v != inst.root {
                steps.push(TrpStop::Pass { vertex: v });
            }
            continue;
        }
        uncovered.retain(|k| !part.contains(k));
        steps.push(TrpStop::Observe { vertex: v, stop_on_demand: is_low, part });
        if 2 * uncovered.len() < m {
            truncated = true;
            break;
        }
    }
    if !truncated {
        while matches!(steps.last(), Some(TrpStop::Pass { .. })) {
            steps.pop();
        }
    }
    if uncovered.len() == m {
        return Err(Error::Infeasible(format!(
            "the repairman partition covered none of scenarios {:?}",
            state.ids
        )));
    }
    Ok(TrpPartition { full_tour, steps, rest: uncovered, gst_latency, truncation_fallback: !truncated, groups })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrpPhaseRecord {
    pub depth: usize,
    pub state: TrpState,
    pub part_sizes: Vec<usize>,
    pub gst_latency: f64,
    /// Expected latency accrued in this step by the current scenarios' vertices: visited ones
    /// pay their arrival time, the rest the walk until the stop plus the return to the root.
    pub step_latency: f64,
    pub truncation_fallback: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrpRun {
    pub tree: StrategyNode,
    pub phases: Vec<TrpPhaseRecord>,
}

fn restrict(state: &TrpState, positions: &[usize], visited: &[usize]) -> TrpState {
    let mut ids = Vec::new();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut raw = Vec::new();
    for &k in positions {
        let s: Vec<usize> = state.sets[k].iter().copied().filter(|v| !visited.contains(v)).collect();
        // identical leftovers are served identically; keep the first id
        if let Some(j) = sets.iter().position(|t| *t == s) {
            raw[j] += state.weights[k];
            continue;
        }
        ids.push(state.ids[k]);
        sets.push(s);
        raw.push(state.weights[k]);
    }
    let total: f64 = raw.iter().sum();
    TrpState { ids, sets, weights: raw.iter().map(|w| w / total).collect() }
}

fn step_latency(inst: &CoverInstance, state: &TrpState, part: &TrpPartition) -> f64 {
    let d = |a: usize, b: usize| inst.metric.d(a, b);
    let r = inst.root;
    let mut walk = vec![r];
    let mut stop_at = vec![None; state.len()];
    for step in &part.steps {
        match step {
            TrpStop::Observe { vertex, part, .. } => {
                walk.push(*vertex);
                for &k in part {
                    stop_at[k] = Some(walk.len() - 1);
                }
            }
            TrpStop::Pass { vertex } => walk.push(*vertex),
        }
    }
    let last = walk.len() - 1;
    let mut prefix = vec![0.0; walk.len()];
    for i in 1..walk.len() {
        prefix[i] = prefix[i - 1] + d(walk[i - 1], walk[i]);
    }
    (0..state.len())
        .map(|k| {
            let end = stop_at[k].unwrap_or(last);
            let back = prefix[end] + d(walk[end], r);
            let cost: f64 = state.sets[k]
                .iter()
                .map(|v| walk[..=end].iter().position(|u| u == v).map_or(back, |i| prefix[i]))
                .sum();
            state.weights[k] * cost
        })
        .sum()
}

fn base_case(inst: &CoverInstance, set: &[usize], label: usize) -> StrategyNode {
    let (order, _) = min_latency_path(&inst.metric, inst.root, set);
    StrategyNode::waypoints(&order, StrategyNode::leaf(Some(label)))
}

fn build(
    inst: &CoverInstance,
    state: &TrpState,
    oracle: &dyn GsoOracle,
    beta: f64,
    depth: usize,
    phases: &mut Vec<TrpPhaseRecord>,
) -> Result<StrategyNode> {
    if state.len() == 1 {
        let set: Vec<usize> = state.sets[0].iter().copied().filter(|&v| v != inst.root).collect();
        phases.push(TrpPhaseRecord {
            depth,
            state: state.clone(),
            part_sizes: vec![1],
            gst_latency: 0.0,
            step_latency: path_latency(&inst.metric, inst.root, &min_latency_path(&inst.metric, inst.root, &set).0),
            truncation_fallback: false,
        });
        return Ok(base_case(inst, &set, state.ids[0]));
    }
    let part = partn_lat(inst, state, oracle, beta)?;
    let mut sizes: Vec<usize> = part
        .steps
        .iter()
        .filter_map(|s| match s {
            TrpStop::Observe { part, .. } => Some(part.len()),
            TrpStop::Pass { .. } => None,
        })
        .collect();
    sizes.push(part.rest.len());
    phases.push(TrpPhaseRecord {
        depth,
        state: state.clone(),
        part_sizes: sizes,
        gst_latency: part.gst_latency,
        step_latency: step_latency(inst, state, &part),
        truncation_fallback: part.truncation_fallback,
    });

    let mut visited = vec![inst.root];
    let mut prefix_visited = Vec::with_capacity(part.steps.len());
    for step in &part.steps {
        let v = match step {
            TrpStop::Observe { vertex, .. } | TrpStop::Pass { vertex } => *vertex,
        };
        visited.push(v);
        prefix_visited.push(visited.clone());
    }
    let mut hang = |positions: &[usize], seen: &[usize]| -> Result<StrategyNode> {
        if positions.is_empty() {
            return Ok(StrategyNode::leaf(None));
        }
        let child_state = restrict(state, positions, seen);
        let child = build(inst, &child_state, oracle, beta, depth + 1, phases)?;
        Ok(if child.is_leaf() { child } else { StrategyNode::waypoint(inst.root, child) })
    };
    let mut node = hang(&part.rest, &visited)?;
    let mut certified = Vec::with_capacity(part.steps.len());
    for (i, step) in part.steps.iter().enumerate() {
        certified.push(match step {
            TrpStop::Observe { part, .. } => Some(hang(part, &prefix_visited[i])?),
            TrpStop::Pass { .. } => None,
        });
    }
    for (i, step) in part.steps.iter().enumerate().rev() {
        let cert = certified[i].take();
        node = match step {
            TrpStop::Pass { vertex } => StrategyNode::waypoint(*vertex, node),
            TrpStop::Observe { vertex, stop_on_demand, .. } => {
                let cert = cert.expect("observe step has a certified branch");
                if *stop_on_demand {
                    StrategyNode::observe(*vertex, cert, node)
                } else {
                    StrategyNode::observe(*vertex, node, cert)
                }
            }
        };
    }
    Ok(node)
}

/// The repairman strategy with per-step records.
pub fn adaptrp_solve_traced(inst: &CoverInstance, oracle: &dyn GsoOracle, config: &LpgstConfig) -> Result<TrpRun> {
    inst.validate().map_err(Error::InvalidInstance)?;
    config.validate()?;
    let state = TrpState {
        ids: (0..inst.num_scenarios()).collect(),
        sets: inst.dist.scenarios().to_vec(),
        weights: inst.dist.probs().to_vec(),
    };
    let mut phases = Vec::new();
    let tree = build(inst, &state, oracle, config.beta, 0, &mut phases)?;
    Ok(TrpRun { tree, phases })
}

pub fn adaptrp_solve(inst: &CoverInstance, oracle: &dyn GsoOracle, config: &LpgstConfig) -> Result<StrategyNode> {
    Ok(adaptrp_solve_traced(inst, oracle, config)?.tree)
}

impl TrpState {
    /// The state as a stand-alone instance (scenario sets as currently reduced).
    pub fn to_instance(&self, inst: &CoverInstance) -> CoverInstance {
        CoverInstance {
            metric: inst.metric.clone(),
            root: inst.root,
            dist: DemandDistribution::new(self.sets.clone(), self.weights.clone()),
            objective: inst.objective,
        }
    }

    pub fn as_sub(&self) -> SubInstance {
        SubInstance::new(self.ids.clone(), self.weights.clone()).expect("non-empty state")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gso::{ExactGso, StarGso};
    use crate::instances::{gen_trp_star, Objective};
    use crate::metric::Metric;
    use crate::strategy::{check_feasible, eval_adaptrp};

    #[test]
    fn single_scenario_on_path() {
        let m = Metric::closure(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let inst = CoverInstance::new(
            m,
            0,
            DemandDistribution::new(vec![vec![1, 2]], vec![1.0]),
            Objective::AdapTrp,
        )
        .unwrap();
        let tree = adaptrp_solve(&inst, &ExactGso::default(), &LpgstConfig::default()).unwrap();
        assert_eq!(eval_adaptrp(&inst, &tree).unwrap(), 3.0);
    }

    #[test]
    fn groups_for_trp_star() {
        let inst = gen_trp_star(4).unwrap();
        let state = TrpState {
            ids: (0..5).collect(),
            sets: inst.dist.scenarios().to_vec(),
            weights: inst.dist.probs().to_vec(),
        };
        let g = trp_groups(&state);
        assert_eq!(g.high, vec![1]);
        assert_eq!(g.low, vec![2, 3, 4, 5]);
        assert!(g.main[0].is_empty());
        let part = partn_lat(&inst, &state, &StarGso::default(), 1.25).unwrap();
        assert_eq!(part.full_tour.interior()[0], 1);
    }

    #[test]
    fn trp_star_is_sublinear() {
        let inst = gen_trp_star(16).unwrap();
        let tree = adaptrp_solve(&inst, &StarGso::default(), &LpgstConfig::default()).unwrap();
        assert!(check_feasible(&inst, &tree, Objective::AdapTrp).is_feasible());
        assert!(eval_adaptrp(&inst, &tree).unwrap() <= 8.0);
    }

    #[test]
    fn two_scenarios_fallback() {
        let m = Metric::star(&[1.0, 2.0]).unwrap();
        let inst = CoverInstance::new(
            m,
            0,
            DemandDistribution::new(vec![vec![1], vec![1, 2]], vec![0.5, 0.5]),
            Objective::AdapTrp,
        )
        .unwrap();
        let run = adaptrp_solve_traced(&inst, &ExactGso::default(), &LpgstConfig::default()).unwrap();
        assert!(check_feasible(&inst, &run.tree, Objective::AdapTrp).is_feasible());
        assert!(run.phases[0].truncation_fallback);
    }
}
