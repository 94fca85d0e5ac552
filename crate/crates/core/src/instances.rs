//! Demand distributions, instance bundles and instance generators.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{approx_eq, Metric, TOLERANCE};

/// Which adaptive covering objective an instance is meant for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Isolation,
    #[serde(rename = "adaptsp")]
    AdapTsp,
    #[serde(rename = "adaptrp")]
    AdapTrp,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Isolation => "isolation",
            Objective::AdapTsp => "adaptsp",
            Objective::AdapTrp => "adaptrp",
        })
    }
}

/// A validation finding, carrying the indices involved.
#[derive(Clone, Debug, PartialEq)]
pub enum InstanceIssue {
    NoScenarios,
    RootOutOfRange { root: usize, n: usize },
    LengthMismatch { scenarios: usize, probs: usize },
    DuplicateScenario { first: usize, second: usize },
    NonPositiveProb { index: usize, prob: f64 },
    ProbSum { sum: f64 },
    VertexOutOfRange { scenario: usize, vertex: usize },
    EmptyGroup { group: usize },
    DuplicateGroup { first: usize, second: usize },
    NegativeCost { test: usize, cost: f64 },
    DiseaseOutOfRange { test: usize, disease: usize },
    NotAPartition { test: usize },
    Unseparable { first: usize, second: usize },
}

impl fmt::Display for InstanceIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceIssue::NoScenarios => write!(f, "no scenarios"),
            InstanceIssue::RootOutOfRange { root, n } => {
                write!(f, "root {root} out of range for {n} vertices")
            }
            InstanceIssue::LengthMismatch { scenarios, probs } => {
                write!(f, "{scenarios} scenarios but {probs} probabilities")
            }
            InstanceIssue::DuplicateScenario { first, second } => {
                write!(f, "scenarios {first} and {second} are identical")
            }
            InstanceIssue::NonPositiveProb { index, prob } => {
                write!(f, "probability {index} is {prob}, must be positive")
            }
            InstanceIssue::ProbSum { sum } => write!(f, "probabilities sum to {sum}, not 1"),
            InstanceIssue::VertexOutOfRange { scenario, vertex } => {
                write!(f, "scenario {scenario} names vertex {vertex} which is out of range")
            }
            InstanceIssue::EmptyGroup { group } => write!(f, "group {group} is empty"),
            InstanceIssue::DuplicateGroup { first, second } => {
                write!(f, "groups {first} and {second} are identical")
            }
            InstanceIssue::NegativeCost { test, cost } => {
                write!(f, "test {test} has cost {cost}, must be finite and non-negative")
            }
            InstanceIssue::DiseaseOutOfRange { test, disease } => {
                write!(f, "test {test} names disease {disease} which is out of range")
            }
            InstanceIssue::NotAPartition { test } => {
                write!(f, "the outcomes of test {test} do not partition the diseases")
            }
            InstanceIssue::Unseparable { first, second } => {
                write!(f, "no test separates diseases {first} and {second}")
            }
        }
    }
}

fn normalize_set(mut s: Vec<usize>) -> Vec<usize> {
    s.sort_unstable();
    s.dedup();
    s
}

/// `m` explicit scenarios (sorted vertex lists) with their probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandDistribution {
    scenarios: Vec<Vec<usize>>,
    probs: Vec<f64>,
}

impl DemandDistribution {
    /// Stores the scenarios in canonical (sorted, deduplicated) form. Validation is done by
    /// [`CoverInstance::validate`].
    pub fn new(scenarios: Vec<Vec<usize>>, probs: Vec<f64>) -> Self {
        DemandDistribution {
            scenarios: scenarios.into_iter().map(normalize_set).collect(),
            probs,
        }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn scenario(&self, i: usize) -> &[usize] {
        &self.scenarios[i]
    }

    pub fn scenarios(&self) -> &[Vec<usize>] {
        &self.scenarios
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn contains(&self, i: usize, v: usize) -> bool {
        self.scenarios[i].binary_search(&v).is_ok()
    }
}

/// A sub-instance `<M, {q_i}>`: a subset of scenario ids with renormalized probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct SubInstance {
    members: Vec<usize>,
    weights: Vec<f64>,
}

impl SubInstance {
    /// The whole instance, `M = [m]`, `q = p`.
    pub fn full(dist: &DemandDistribution) -> Self {
        SubInstance {
            members: (0..dist.len()).collect(),
            weights: dist.probs().to_vec(),
        }
    }

    /// Builds a sub-instance from ids and unnormalized weights.
    pub fn new(members: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if members.is_empty() || members.len() != weights.len() {
            return Err(Error::Malformed("sub-instance needs matching non-empty members and weights".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w <= 0.0) || total <= 0.0 {
            return Err(Error::Malformed("sub-instance weights must be positive".into()));
        }
        Ok(SubInstance {
            members,
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// `q_i` aligned with [`SubInstance::members`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weight_of(&self, id: usize) -> f64 {
        let k = self.members.iter().position(|&i| i == id).expect("id not in sub-instance");
        self.weights[k]
    }

    /// `q'` of a subset of the members.
    pub fn mass(&self, part: &[usize]) -> f64 {
        part.iter().map(|&i| self.weight_of(i)).sum()
    }

    /// `<P, {q_i / q'}>` for a non-empty subset `P` of the members.
    pub fn restrict(&self, part: &[usize]) -> SubInstance {
        let weights: Vec<f64> = part.iter().map(|&i| self.weight_of(i)).collect();
        SubInstance::new(part.to_vec(), weights).expect("restricting to an empty part")
    }
}

/// Metric, root and demand distribution, tagged with the objective it is solved for.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverInstance {
    pub metric: Metric,
    pub root: usize,
    pub dist: DemandDistribution,
    pub objective: Objective,
}

impl CoverInstance {
    /// Builds and validates.
    pub fn new(
        metric: Metric,
        root: usize,
        dist: DemandDistribution,
        objective: Objective,
    ) -> Result<Self> {
        let inst = CoverInstance { metric, root, dist, objective };
        inst.validate().map_err(Error::InvalidInstance)?;
        Ok(inst)
    }

    pub fn num_scenarios(&self) -> usize {
        self.dist.len()
    }

    pub fn with_objective(&self, objective: Objective) -> Self {
        CoverInstance { objective, ..self.clone() }
    }

    /// Checks every type invariant and reports all issues found.
    pub fn validate(&self) -> std::result::Result<(), Vec<InstanceIssue>> {
        let mut issues = Vec::new();
        let n = self.metric.len();
        let m = self.dist.len();
        if self.root >= n {
            issues.push(InstanceIssue::RootOutOfRange { root: self.root, n });
        }
        if m == 0 {
            issues.push(InstanceIssue::NoScenarios);
        }
        if self.dist.probs.len() != m {
            issues.push(InstanceIssue::LengthMismatch { scenarios: m, probs: self.dist.probs.len() });
            return Err(issues);
        }
        for (i, s) in self.dist.scenarios.iter().enumerate() {
            for &v in s {
                if v >= n {
                    issues.push(InstanceIssue::VertexOutOfRange { scenario: i, vertex: v });
                }
            }
            for j in 0..i {
                if self.dist.scenarios[j] == *s {
                    issues.push(InstanceIssue::DuplicateScenario { first: j, second: i });
                }
            }
        }
        for (index, &prob) in self.dist.probs.iter().enumerate() {
            if !(prob > 0.0) || !prob.is_finite() {
                issues.push(InstanceIssue::NonPositiveProb { index, prob });
            }
        }
        let sum: f64 = self.dist.probs.iter().sum();
        if m > 0 && !approx_eq(sum, 1.0) {
            issues.push(InstanceIssue::ProbSum { sum });
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    /// The instance restricted to a sub-instance: scenarios re-indexed in member order,
    /// probabilities replaced by `q`.
    pub fn restricted(&self, sub: &SubInstance) -> CoverInstance {
        let scenarios = sub.members().iter().map(|&i| self.dist.scenario(i).to_vec()).collect();
        CoverInstance {
            metric: self.metric.clone(),
            root: self.root,
            dist: DemandDistribution::new(scenarios, sub.weights().to_vec()),
            objective: self.objective,
        }
    }
}

/// Group Steiner tree input: find a shortest r-tour touching every group.
#[derive(Clone, Debug, PartialEq)]
pub struct GstInstance {
    pub metric: Metric,
    pub root: usize,
    pub groups: Vec<Vec<usize>>,
}

impl GstInstance {
    pub fn new(metric: Metric, root: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let inst = GstInstance {
            metric,
            root,
            groups: groups.into_iter().map(normalize_set).collect(),
        };
        inst.validate().map_err(Error::InvalidInstance)?;
        Ok(inst)
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<InstanceIssue>> {
        let n = self.metric.len();
        let mut issues = Vec::new();
        if self.root >= n {
            issues.push(InstanceIssue::RootOutOfRange { root: self.root, n });
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.is_empty() {
                issues.push(InstanceIssue::EmptyGroup { group: i });
            }
            for &v in g {
                if v >= n {
                    issues.push(InstanceIssue::VertexOutOfRange { scenario: i, vertex: v });
                }
            }
            for j in 0..i {
                if self.groups[j] == *g {
                    issues.push(InstanceIssue::DuplicateGroup { first: j, second: i });
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

/// Star with leaves `v_i` at distance `2^i` (i = 1..n-1), scenarios `{v_i}` with probability
/// `2^-i` and the empty scenario with probability `2^-(n-1)`.
pub fn gen_paper_star(n: usize) -> Result<CoverInstance> {
    if n < 2 {
        return Err(Error::Malformed("paper star needs n >= 2".into()));
    }
    let weights: Vec<f64> = (1..n).map(|i| 2f64.powi(i as i32)).collect();
    let metric = Metric::star(&weights)?;
    let mut scenarios: Vec<Vec<usize>> = (1..n).map(|i| vec![i]).collect();
    scenarios.push(Vec::new());
    let mut probs: Vec<f64> = (1..n).map(|i| 0.5f64.powi(i as i32)).collect();
    probs.push(0.5f64.powi(n as i32 - 1));
    CoverInstance::new(metric, 0, DemandDistribution::new(scenarios, probs), Objective::Isolation)
}

/// The repairman star: `u_1..u_n` at unit distance, `v` at distance `sqrt(n)`; scenario
/// `{v}` with probability `1 - 1/n` and `{v, u_i}` with probability `1/n^2` each.
///
/// Vertex layout: 0 = root, 1 = `v`, `1 + i` = `u_i`.
pub fn gen_trp_star(n: usize) -> Result<CoverInstance> {
    if n == 0 {
        return Err(Error::Malformed("repairman star needs n >= 1".into()));
    }
    let nf = n as f64;
    let mut weights = vec![nf.sqrt()];
    weights.extend(std::iter::repeat_n(1.0, n));
    let metric = Metric::star(&weights)?;
    let mut scenarios = vec![vec![1]];
    let mut probs = vec![1.0 - 1.0 / nf];
    for i in 1..=n {
        scenarios.push(vec![1, 1 + i]);
        probs.push(1.0 / (nf * nf));
    }
    CoverInstance::new(metric, 0, DemandDistribution::new(scenarios, probs), Objective::AdapTrp)
}

/// Default `L` for [`gst_to_adaptsp`]: `10 * 2n * max d` (at least `20n` on zero metrics).
pub fn default_hardness_scale(gst: &GstInstance) -> f64 {
    let n = gst.metric.len() as f64;
    10.0 * 2.0 * n * gst.metric.max_distance().max(1.0)
}

/// Reduction from group Steiner tree to adaptive TSP. Adds a vertex `s` (index `n`) that is a
/// zero-distance copy of the root; scenarios `X_i ∪ {s}` with probability `1/(gL)` and `{s}`
/// with probability `1 - 1/L`.
pub fn gst_to_adaptsp(gst: &GstInstance, scale: Option<f64>) -> Result<CoverInstance> {
    gst.validate().map_err(Error::InvalidInstance)?;
    let n = gst.metric.len();
    let g = gst.groups.len();
    if g == 0 {
        return Err(Error::Malformed("group Steiner instance has no groups".into()));
    }
    let scale = scale.unwrap_or_else(|| default_hardness_scale(gst));
    let floor = 2.0 * n as f64 * gst.metric.max_distance();
    if !(scale >= floor) || scale <= 1.0 {
        return Err(Error::Malformed(format!(
            "L = {scale} is too small; need L >= 2 n max d = {floor} and L > 1"
        )));
    }
    let metric = gst.metric.add_zero_copies(gst.root, 1);
    let s = n;
    let mut scenarios: Vec<Vec<usize>> = gst
        .groups
        .iter()
        .map(|x| x.iter().copied().chain(std::iter::once(s)).collect())
        .collect();
    scenarios.push(vec![s]);
    let mut probs = vec![1.0 / (g as f64 * scale); g];
    probs.push(1.0 - 1.0 / scale);
    CoverInstance::new(metric, gst.root, DemandDistribution::new(scenarios, probs), Objective::AdapTsp)
}

/// How scenario probabilities are drawn by [`gen_random`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbSkew {
    Uniform,
    /// Integer weights in `1..=10`, normalized.
    Random,
    /// `p_i ∝ 2^-i` over a shuffled scenario order.
    Exponential,
}

/// Shape of the random metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricShape {
    /// Shortest-path closure of a random connected graph with integer weights.
    Graph,
    /// Weighted star centered at the root with integer leaf weights.
    Star,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub shape: MetricShape,
    /// Integer edge weights are drawn from `1..=max_weight`.
    pub max_weight: u32,
    /// Probability of each extra (non-tree) edge.
    pub extra_edges: f64,
    /// Probability that a vertex belongs to a scenario.
    pub demand: f64,
    pub skew: ProbSkew,
    pub objective: Objective,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            shape: MetricShape::Graph,
            max_weight: 10,
            extra_edges: 0.3,
            demand: 0.4,
            skew: ProbSkew::Random,
            objective: Objective::Isolation,
        }
    }
}

/// Deterministic (per seed) random instance with `n` vertices and `m` distinct scenarios over
/// all vertices. Requires `m <= 2^n`.
pub fn gen_random(seed: u64, n: usize, m: usize, params: &RandomParams) -> Result<CoverInstance> {
    if n == 0 || m == 0 {
        return Err(Error::Malformed("random instance needs n >= 1 and m >= 1".into()));
    }
    if n < 64 && m as u128 > 1u128 << n {
        return Err(Error::Malformed(format!("cannot draw {m} distinct scenarios over {n} vertices")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let metric = random_metric(&mut rng, n, params)?;
    let scenarios = random_scenarios(&mut rng, n, m, params.demand);
    let probs = random_probs(&mut rng, m, params.skew);
    CoverInstance::new(metric, 0, DemandDistribution::new(scenarios, probs), params.objective)
}

pub(crate) fn random_metric(rng: &mut ChaCha8Rng, n: usize, params: &RandomParams) -> Result<Metric> {
    let w = params.max_weight.max(1);
    match params.shape {
        MetricShape::Star => {
            let weights: Vec<f64> = (1..n).map(|_| rng.gen_range(1..=w) as f64).collect();
            Metric::star(&weights)
        }
        MetricShape::Graph => {
            let mut edges = Vec::new();
            for v in 1..n {
                let u = rng.gen_range(0..v);
                edges.push((u, v, rng.gen_range(1..=w) as f64));
            }
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(params.extra_edges.clamp(0.0, 1.0)) {
                        edges.push((u, v, rng.gen_range(1..=w) as f64));
                    }
                }
            }
            Metric::closure(n, &edges)
        }
    }
}

fn random_scenarios(rng: &mut ChaCha8Rng, n: usize, m: usize, demand: f64) -> Vec<Vec<usize>> {
    let to_set = |mask: u64| (0..n).filter(|&v| mask >> v & 1 == 1).collect::<Vec<_>>();
    if n <= 20 && (m as u64) * 2 > (1u64 << n) {
        let mut all: Vec<u64> = (0..1u64 << n).collect();
        all.shuffle(rng);
        return all[..m].iter().map(|&mask| to_set(mask)).collect();
    }
    let p = demand.clamp(0.0, 1.0);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let s: Vec<usize> = (0..n).filter(|_| rng.gen_bool(p)).collect();
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

pub(crate) fn random_probs(rng: &mut ChaCha8Rng, m: usize, skew: ProbSkew) -> Vec<f64> {
    let raw: Vec<f64> = match skew {
        ProbSkew::Uniform => vec![1.0; m],
        ProbSkew::Random => (0..m).map(|_| rng.gen_range(1..=10) as f64).collect(),
        ProbSkew::Exponential => {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(rng);
            order.iter().map(|&k| 0.5f64.powi(k as i32)).collect()
        }
    };
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Probability-sum tolerance, exposed for callers that renormalize.
pub const PROB_TOLERANCE: f64 = TOLERANCE;
