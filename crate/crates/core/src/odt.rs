//! Optimal decision trees via the star reduction to isolation.
//!
//! Test `j` becomes a leaf at distance `c_j / 2` from the center; a multiway test with `l`
//! outcomes becomes `l` zero-distance copies, copy `k` carrying demand exactly for the diseases
//! in part `k`. A disease's scenario is the set of test vertices that report it.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gso::OracleChoice;
use crate::instances::{random_probs, CoverInstance, DemandDistribution, InstanceIssue, Objective, ProbSkew};
use crate::isolation::iso_solve;
use crate::lpgst::LpgstConfig;
use crate::metric::{approx_eq, Metric};
use crate::strategy::StrategyNode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// Positive (outcome 1) exactly for these diseases, negative (outcome 0) otherwise.
    Subset(Vec<usize>),
    /// Outcome `k` for the diseases of part `k`.
    Partition(Vec<Vec<usize>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdtTest {
    pub cost: f64,
    #[serde(flatten)]
    pub kind: TestKind,
}

impl OdtTest {
    pub fn binary(cost: f64, subset: Vec<usize>) -> Self {
        OdtTest { cost, kind: TestKind::Subset(subset) }
    }

    pub fn multiway(cost: f64, parts: Vec<Vec<usize>>) -> Self {
        OdtTest { cost, kind: TestKind::Partition(parts) }
    }

    pub fn outcome(&self, disease: usize) -> usize {
        match &self.kind {
            TestKind::Subset(s) => usize::from(s.contains(&disease)),
            TestKind::Partition(parts) => parts.iter().position(|p| p.contains(&disease)).unwrap_or(usize::MAX),
        }
    }

    pub fn outcomes(&self) -> usize {
        match &self.kind {
            TestKind::Subset(_) => 2,
            TestKind::Partition(parts) => parts.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdtInstance {
    /// Prior of each disease.
    pub priors: Vec<f64>,
    pub tests: Vec<OdtTest>,
}

impl OdtInstance {
    pub fn new(priors: Vec<f64>, tests: Vec<OdtTest>) -> Result<Self> {
        let inst = OdtInstance { priors, tests };
        inst.validate().map_err(Error::InvalidInstance)?;
        Ok(inst)
    }

    pub fn diseases(&self) -> usize {
        self.priors.len()
    }

    /// Outcomes of every test for one disease.
    pub fn signature(&self, disease: usize) -> Vec<usize> {
        self.tests.iter().map(|t| t.outcome(disease)).collect()
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<InstanceIssue>> {
        let m = self.priors.len();
        let mut issues = Vec::new();
        if m == 0 {
            issues.push(InstanceIssue::NoScenarios);
        }
        for (index, &prob) in self.priors.iter().enumerate() {
            if !(prob > 0.0) || !prob.is_finite() {
                issues.push(InstanceIssue::NonPositiveProb { index, prob });
            }
        }
        let sum: f64 = self.priors.iter().sum();
        if m > 0 && !approx_eq(sum, 1.0) {
            issues.push(InstanceIssue::ProbSum { sum });
        }
        for (j, t) in self.tests.iter().enumerate() {
            if !(t.cost >= 0.0) || !t.cost.is_finite() {
                issues.push(InstanceIssue::NegativeCost { test: j, cost: t.cost });
            }
            let named: Vec<usize> = match &t.kind {
                TestKind::Subset(s) => s.clone(),
                TestKind::Partition(parts) => parts.iter().flatten().copied().collect(),
            };
            for &d in &named {
                if d >= m {
                    issues.push(InstanceIssue::DiseaseOutOfRange { test: j, disease: d });
                }
            }
            if let TestKind::Partition(parts) = &t.kind {
                let mut all = named.clone();
                all.sort_unstable();
                all.dedup();
                if all.len() != named.len() || all != (0..m).collect::<Vec<_>>() || parts.iter().any(Vec::is_empty) {
                    issues.push(InstanceIssue::NotAPartition { test: j });
                }
            }
        }
        if issues.is_empty() {
            let sigs: Vec<Vec<usize>> = (0..m).map(|i| self.signature(i)).collect();
            for i in 0..m {
                for k in 0..i {
                    if sigs[k] == sigs[i] {
                        issues.push(InstanceIssue::Unseparable { first: k, second: i });
                    }
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

/// What a vertex of the reduced star stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexRole {
    Center,
    /// A test vertex; `part` is the outcome index of a multiway copy.
    Test { test: usize, part: Option<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub instance: CoverInstance,
    pub roles: Vec<VertexRole>,
}

/// The isolation instance on the test star.
pub fn odt_to_isolation(odt: &OdtInstance) -> Result<Reduction> {
    odt.validate().map_err(Error::InvalidInstance)?;
    let mut weights = Vec::new();
    let mut roles = vec![VertexRole::Center];
    for (j, t) in odt.tests.iter().enumerate() {
        match &t.kind {
            TestKind::Subset(_) => {
                weights.push(t.cost / 2.0);
                roles.push(VertexRole::Test { test: j, part: None });
            }
            TestKind::Partition(parts) => {
                for k in 0..parts.len() {
                    weights.push(t.cost / 2.0);
                    roles.push(VertexRole::Test { test: j, part: Some(k) });
                }
            }
        }
    }
    // star distances, except that copies of one test sit at the same point
    let test_of = |v: usize| match roles[v] {
        VertexRole::Test { test, .. } => Some(test),
        VertexRole::Center => None,
    };
    let radius = |v: usize| if v == 0 { 0.0 } else { weights[v - 1] };
    let k = roles.len();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|u| {
            (0..k)
                .map(|v| match (u == v, test_of(u).is_some() && test_of(u) == test_of(v)) {
                    (true, _) | (false, true) => 0.0,
                    _ => radius(u) + radius(v),
                })
                .collect()
        })
        .collect();
    let metric = Metric::new(rows)?;
    let scenarios: Vec<Vec<usize>> = (0..odt.diseases())
        .map(|i| {
            (1..roles.len())
                .filter(|&v| match roles[v] {
                    VertexRole::Test { test, part: None } => odt.tests[test].outcome(i) == 1,
                    VertexRole::Test { test, part: Some(k) } => odt.tests[test].outcome(i) == k,
                    VertexRole::Center => false,
                })
                .collect()
        })
        .collect();
    let instance = CoverInstance::new(
        metric,
        0,
        DemandDistribution::new(scenarios, odt.priors.clone()),
        Objective::Isolation,
    )?;
    Ok(Reduction { instance, roles })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestBranch {
    pub outcome: usize,
    pub node: TestNode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestNode {
    Test { test: usize, branches: Vec<TestBranch> },
    Leaf {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        disease: Option<usize>,
    },
}

impl TestNode {
    pub fn node_count(&self) -> usize {
        match self {
            TestNode::Test { branches, .. } => 1 + branches.iter().map(|b| b.node.node_count()).sum::<usize>(),
            TestNode::Leaf { .. } => 1,
        }
    }
}

/// Maps an isolation tree over the reduced star back to a test strategy. Each maximal run of
/// visits to the vertices of one test becomes one test node.
pub fn strategy_from_isolation(tree: &StrategyNode, odt: &OdtInstance, red: &Reduction) -> Result<TestNode> {
    if let Some(v) = tree.max_vertex().filter(|&v| v >= red.roles.len()) {
        return Err(Error::Malformed(format!("tree observes vertex {v}, which the reduction does not have")));
    }
    let all: Vec<usize> = (0..odt.diseases()).collect();
    Ok(convert(tree, odt, red, &all, None))
}

fn matches(role: VertexRole, outcome: usize) -> bool {
    match role {
        VertexRole::Center => false,
        VertexRole::Test { part: None, .. } => outcome == 1,
        VertexRole::Test { part: Some(k), .. } => outcome == k,
    }
}

fn perform(
    test: usize,
    odt: &OdtInstance,
    consistent: &[usize],
    mut continue_with: impl FnMut(usize, &[usize]) -> TestNode,
) -> TestNode {
    let mut outcomes: Vec<usize> = consistent.iter().map(|&i| odt.tests[test].outcome(i)).collect();
    outcomes.sort_unstable();
    outcomes.dedup();
    let branches = outcomes
        .into_iter()
        .map(|o| {
            let sub: Vec<usize> = consistent.iter().copied().filter(|&i| odt.tests[test].outcome(i) == o).collect();
            TestBranch { outcome: o, node: continue_with(o, &sub) }
        })
        .collect();
    TestNode::Test { test, branches }
}

fn convert(
    node: &StrategyNode,
    odt: &OdtInstance,
    red: &Reduction,
    consistent: &[usize],
    at: Option<(usize, usize)>,
) -> TestNode {
    match node {
        StrategyNode::Leaf { scenario } => {
            let disease = if consistent.len() == 1 { Some(consistent[0]) } else { *scenario };
            TestNode::Leaf { disease }
        }
        StrategyNode::Observe { vertex, yes, no } => match red.roles[*vertex] {
            VertexRole::Center => convert(no, odt, red, consistent, None),
            role @ VertexRole::Test { test, .. } => match at {
                Some((j, o)) if j == test => {
                    let child = if matches(role, o) { yes } else { no };
                    convert(child, odt, red, consistent, at)
                }
                _ => perform(test, odt, consistent, |o, sub| {
                    let child = if matches(role, o) { yes } else { no };
                    convert(child, odt, red, sub, Some((test, o)))
                }),
            },
        },
        StrategyNode::Waypoint { vertex, next } => match red.roles[*vertex] {
            VertexRole::Center => convert(next, odt, red, consistent, None),
            VertexRole::Test { test, .. } => match at {
                Some((j, _)) if j == test => convert(next, odt, red, consistent, at),
                _ => perform(test, odt, consistent, |o, sub| convert(next, odt, red, sub, Some((test, o)))),
            },
        },
    }
}

/// Per-disease test cost along its root-leaf path, plus every problem found on the way
/// (missing branches, unknown tests, wrong leaf labels).
pub fn test_strategy_costs(odt: &OdtInstance, strategy: &TestNode) -> (Vec<f64>, Vec<String>) {
    let mut costs = Vec::with_capacity(odt.diseases());
    let mut problems = Vec::new();
    for i in 0..odt.diseases() {
        let mut node = strategy;
        let mut cost = 0.0;
        loop {
            match node {
                TestNode::Leaf { disease } => {
                    if *disease != Some(i) {
                        problems.push(format!("disease {i} ends at a leaf labeled {disease:?}"));
                    }
                    break;
                }
                TestNode::Test { test, branches } => {
                    let Some(t) = odt.tests.get(*test) else {
                        problems.push(format!("strategy uses unknown test {test}"));
                        break;
                    };
                    cost += t.cost;
                    let o = t.outcome(i);
                    match branches.iter().find(|b| b.outcome == o) {
                        Some(b) => node = &b.node,
                        None => {
                            problems.push(format!("test {test} has no branch for outcome {o} of disease {i}"));
                            break;
                        }
                    }
                }
            }
        }
        costs.push(cost);
    }
    (costs, problems)
}

/// Expected test cost; errors when some disease reaches a missing branch or a wrong leaf.
pub fn eval_test_strategy(odt: &OdtInstance, strategy: &TestNode) -> Result<f64> {
    let (costs, problems) = test_strategy_costs(odt, strategy);
    if !problems.is_empty() {
        return Err(Error::Infeasible(problems.join("; ")));
    }
    Ok(costs.iter().zip(&odt.priors).map(|(c, p)| c * p).sum())
}

/// DOT text for a test strategy; edges carry outcome labels.
pub fn export_test_dot(strategy: &TestNode) -> String {
    let mut out = String::from("digraph test_strategy {\n  node [fontname=\"monospace\"];\n");
    let mut next_id = 0usize;
    let mut stack: Vec<(&TestNode, Option<(usize, usize)>)> = vec![(strategy, None)];
    while let Some((node, parent)) = stack.pop() {
        let id = next_id;
        next_id += 1;
        let (label, shape) = match node {
            TestNode::Test { test, .. } => (format!("test {test}"), "ellipse"),
            TestNode::Leaf { disease: Some(d) } => (format!("disease {d}"), "box"),
            TestNode::Leaf { disease: None } => ("end".to_string(), "box"),
        };
        let _ = writeln!(out, "  n{id} [label=\"{label}\", shape={shape}];");
        if let Some((p, outcome)) = parent {
            let _ = writeln!(out, "  n{p} -> n{id} [label=\"{outcome}\"];");
        }
        if let TestNode::Test { branches, .. } = node {
            for b in branches.iter().rev() {
                stack.push((&b.node, Some((id, b.outcome))));
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Outcome of `odt_solve`: the test strategy and the isolation tree it was mapped from.
#[derive(Clone, Debug, PartialEq)]
pub struct OdtRun {
    pub strategy: TestNode,
    pub tree: StrategyNode,
    pub reduction: Reduction,
}

/// Reduction, isolation on the star, and mapping back.
pub fn odt_solve(odt: &OdtInstance, oracle: OracleChoice, config: &LpgstConfig) -> Result<OdtRun> {
    let reduction = odt_to_isolation(odt)?;
    let oracle = oracle.build();
    let tree = iso_solve(&reduction.instance, oracle.as_ref(), config)?;
    let strategy = strategy_from_isolation(&tree, odt, &reduction)?;
    Ok(OdtRun { strategy, tree, reduction })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdtRandomParams {
    /// Integer costs drawn from `0..=max_cost` (zero only when `allow_free`).
    pub max_cost: u32,
    pub allow_free: bool,
    /// Probability that a test is multiway.
    pub multiway: f64,
    /// Largest number of outcomes of a multiway test.
    pub max_outcomes: usize,
    pub skew: ProbSkew,
}

impl Default for OdtRandomParams {
    fn default() -> Self {
        OdtRandomParams { max_cost: 10, allow_free: false, multiway: 0.3, max_outcomes: 4, skew: ProbSkew::Random }
    }
}

/// Random separable instance with `m` diseases and `n` tests; retries draws until every pair
/// of diseases is separated.
pub fn gen_odt_random(seed: u64, m: usize, n: usize, params: &OdtRandomParams) -> Result<OdtInstance> {
    if m == 0 {
        return Err(Error::Malformed("an ODT instance needs at least one disease".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let low = if params.allow_free { 0 } else { 1 };
    for _ in 0..10_000 {
        let tests: Vec<OdtTest> = (0..n)
            .map(|_| {
                let cost = rng.gen_range(low..=params.max_cost.max(1)) as f64;
                if params.max_outcomes >= 3 && rng.gen_bool(params.multiway.clamp(0.0, 1.0)) {
                    let l = rng.gen_range(3..=params.max_outcomes.min(m.max(3)));
                    let mut parts = vec![Vec::new(); l];
                    for d in 0..m {
                        parts[rng.gen_range(0..l)].push(d);
                    }
                    parts.retain(|p| !p.is_empty());
                    OdtTest::multiway(cost, parts)
                } else {
                    OdtTest::binary(cost, (0..m).filter(|_| rng.gen_bool(0.5)).collect())
                }
            })
            .collect();
        let priors = random_probs(&mut rng, m, params.skew);
        let inst = OdtInstance { priors, tests };
        if inst.validate().is_ok() {
            return Ok(inst);
        }
    }
    Err(Error::Infeasible(format!("could not draw {n} tests separating {m} diseases")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::eval_isolation;

    fn three() -> OdtInstance {
        OdtInstance::new(
            vec![0.8, 0.1, 0.1],
            vec![OdtTest::binary(1.0, vec![0]), OdtTest::binary(1.0, vec![1])],
        )
        .unwrap()
    }

    #[test]
    fn reduction_shapes() {
        let odt = OdtInstance::new(vec![0.5, 0.5], vec![OdtTest::binary(4.0, vec![0])]).unwrap();
        let red = odt_to_isolation(&odt).unwrap();
        assert_eq!(red.instance.metric.d(0, 1), 2.0);
        assert_eq!(red.instance.dist.scenarios(), &[vec![1], vec![]]);
        let odt = OdtInstance::new(vec![0.5, 0.25, 0.25], vec![OdtTest::multiway(6.0, vec![vec![0], vec![1], vec![2]])])
            .unwrap();
        let red = odt_to_isolation(&odt).unwrap();
        assert_eq!(red.instance.metric.len(), 4);
        assert_eq!(red.instance.metric.d(1, 3), 0.0);
        assert_eq!(red.instance.metric.d(0, 2), 3.0);
    }

    #[test]
    fn unseparable_pair_is_reported() {
        let err = OdtInstance::new(vec![0.5, 0.5], vec![OdtTest::binary(1.0, vec![0, 1])]).unwrap_err();
        assert!(err.to_string().contains("no test separates diseases 0 and 1"));
    }

    #[test]
    fn forced_single_test() {
        let odt = OdtInstance::new(vec![0.9, 0.1], vec![OdtTest::binary(3.0, vec![1])]).unwrap();
        let run = odt_solve(&odt, OracleChoice::Star, &LpgstConfig::default()).unwrap();
        assert_eq!(eval_test_strategy(&odt, &run.strategy).unwrap(), 3.0);
    }

    #[test]
    fn skewed_priors_test_order() {
        let odt = three();
        let run = odt_solve(&odt, OracleChoice::Star, &LpgstConfig::default()).unwrap();
        let cost = eval_test_strategy(&odt, &run.strategy).unwrap();
        assert!((cost - 1.2).abs() < 1e-12);
        assert_eq!(cost, eval_isolation(&run.reduction.instance, &run.tree).unwrap());
    }

    #[test]
    fn zero_cost_tests() {
        let odt = OdtInstance::new(
            vec![0.5, 0.25, 0.25],
            vec![OdtTest::binary(0.0, vec![0]), OdtTest::binary(0.0, vec![1])],
        )
        .unwrap();
        let run = odt_solve(&odt, OracleChoice::Auto, &LpgstConfig::default()).unwrap();
        assert_eq!(eval_test_strategy(&odt, &run.strategy).unwrap(), 0.0);
    }

    #[test]
    fn multiway_collapse() {
        let odt = OdtInstance::new(
            vec![0.4, 0.3, 0.3],
            vec![OdtTest::multiway(2.0, vec![vec![0], vec![1], vec![2]])],
        )
        .unwrap();
        let red = odt_to_isolation(&odt).unwrap();
        let leaf = |i| StrategyNode::leaf(Some(i));
        let tree = StrategyNode::observe(1, leaf(0), StrategyNode::observe(2, leaf(1), leaf(2)));
        let strat = strategy_from_isolation(&tree, &odt, &red).unwrap();
        assert_eq!(strat.node_count(), 4);
        assert_eq!(eval_test_strategy(&odt, &strat).unwrap(), 2.0);
        assert_eq!(eval_isolation(&red.instance, &tree).unwrap(), 2.0);
    }

    #[test]
    fn waypoints_at_center_are_free() {
        let odt = three();
        let red = odt_to_isolation(&odt).unwrap();
        let leaf = |i| StrategyNode::leaf(Some(i));
        let plain = StrategyNode::observe(1, leaf(0), StrategyNode::observe(2, leaf(1), leaf(2)));
        let with_return = StrategyNode::observe(
            1,
            leaf(0),
            StrategyNode::waypoint(0, StrategyNode::observe(2, leaf(1), leaf(2))),
        );
        let a = strategy_from_isolation(&plain, &odt, &red).unwrap();
        let b = strategy_from_isolation(&with_return, &odt, &red).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            eval_isolation(&red.instance, &plain).unwrap(),
            eval_isolation(&red.instance, &with_return).unwrap()
        );
    }

    #[test]
    fn random_generator_is_separable_and_deterministic() {
        let p = OdtRandomParams::default();
        let a = gen_odt_random(3, 5, 5, &p).unwrap();
        assert_eq!(a, gen_odt_random(3, 5, 5, &p).unwrap());
        assert!(a.validate().is_ok());
    }

    #[test]
    fn serde_test_shape() {
        let t = OdtTest::binary(2.0, vec![1]);
        assert_eq!(serde_json::to_string(&t).unwrap(), r#"{"cost":2.0,"subset":[1]}"#);
        let back: OdtTest = serde_json::from_str(r#"{"cost":3,"partition":[[0],[1]]}"#).unwrap();
        assert_eq!(back, OdtTest::multiway(3.0, vec![vec![0], vec![1]]));
    }
}
