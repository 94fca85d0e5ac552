//! Exact optima for small instances, with witness strategies.
//!
//! The adaptive searches memoize over (current vertex, consistent scenario set, visited set).
//! They only move to vertices that can still matter: informative ones for isolation, unvisited
//! vertices of the consistent scenarios otherwise. [`unrestricted_value`] drops that
//! restriction and solves the full state space by fixed-point iteration, for cross-checking.
//!
//! Values are expected costs `Σ p_i · cost_i`. The root is observed at time zero.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gso::GsoInstance;
use crate::instances::{CoverInstance, GstInstance, Objective};
use crate::lpgst::{covered_groups, LpgstInstance};
use crate::metric::{approx_eq, approx_le, held_karp, Tour};
use crate::odt::{OdtInstance, TestBranch, TestNode};
use crate::strategy::StrategyNode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_vertices: usize,
    pub max_scenarios: usize,
    pub time_budget: Duration,
}

impl OracleLimits {
    pub fn new(max_vertices: usize, max_scenarios: usize, time_budget: Duration) -> Result<Self> {
        if max_vertices == 0 || max_scenarios == 0 || time_budget.is_zero() {
            return Err(Error::Malformed("oracle limits must be positive".into()));
        }
        Ok(OracleLimits { max_vertices, max_scenarios, time_budget })
    }

    pub fn isolation() -> Self {
        OracleLimits { max_vertices: 10, max_scenarios: 10, time_budget: Duration::from_secs(60) }
    }

    pub fn adaptsp() -> Self {
        OracleLimits { max_vertices: 8, max_scenarios: 6, time_budget: Duration::from_secs(60) }
    }

    pub fn adaptrp() -> Self {
        OracleLimits { max_vertices: 7, max_scenarios: 4, time_budget: Duration::from_secs(60) }
    }

    /// Tour enumeration for GSO / LPGST; `max_scenarios` bounds the number of groups.
    pub fn tours() -> Self {
        OracleLimits { max_vertices: 7, max_scenarios: 64, time_budget: Duration::from_secs(60) }
    }

    /// Decision trees: vertices bound the tests, scenarios the diseases.
    pub fn odt() -> Self {
        OracleLimits { max_vertices: 10, max_scenarios: 10, time_budget: Duration::from_secs(60) }
    }

    pub fn for_objective(objective: Objective) -> Self {
        match objective {
            Objective::Isolation => Self::isolation(),
            Objective::AdapTsp => Self::adaptsp(),
            Objective::AdapTrp => Self::adaptrp(),
        }
    }

    fn check(&self, n: usize, m: usize, what: &str) -> Result<()> {
        if n > self.max_vertices || m > self.max_scenarios {
            return Err(Error::LimitsExceeded(format!(
                "{what} oracle allows n <= {} and m <= {}, got n = {n}, m = {m}",
                self.max_vertices, self.max_scenarios
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub tree: StrategyNode,
}

struct Clock {
    deadline: Instant,
    budget: Duration,
    ticks: u32,
}

impl Clock {
    fn new(budget: Duration) -> Self {
        Clock { deadline: Instant::now() + budget, budget, ticks: 0 }
    }

    fn tick(&mut self) -> Result<()> {
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks.is_multiple_of(1024) && Instant::now() > self.deadline {
            return Err(Error::LimitsExceeded(format!("oracle time budget of {:?} exhausted", self.budget)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
enum Move {
    Stop,
    Visit(usize),
}

struct Search<'a> {
    inst: &'a CoverInstance,
    objective: Objective,
    /// Per vertex: scenarios containing it.
    holders: Vec<u32>,
    /// Per scenario: its vertex set.
    sets: Vec<u64>,
    probs: Vec<f64>,
    memo: HashMap<(usize, u32, u64), (f64, Move)>,
    clock: Clock,
}

impl<'a> Search<'a> {
    fn new(inst: &'a CoverInstance, objective: Objective, budget: Duration) -> Self {
        let n = inst.metric.len();
        let m = inst.num_scenarios();
        let mut holders = vec![0u32; n];
        let mut sets = vec![0u64; m];
        for i in 0..m {
            for &v in inst.dist.scenario(i) {
                holders[v] |= 1 << i;
                sets[i] |= 1 << v;
            }
        }
        Search {
            inst,
            objective,
            holders,
            sets,
            probs: inst.dist.probs().to_vec(),
            memo: HashMap::new(),
            clock: Clock::new(budget),
        }
    }

    fn mass(&self, c: u32) -> f64 {
        (0..self.probs.len()).filter(|i| c >> i & 1 == 1).map(|i| self.probs[i]).sum()
    }

    fn pending(&self, c: u32, w: u64) -> f64 {
        (0..self.probs.len())
            .filter(|i| c >> i & 1 == 1)
            .map(|i| self.probs[i] * (self.sets[i] & !w).count_ones() as f64)
            .sum()
    }

    fn union(&self, c: u32) -> u64 {
        (0..self.sets.len()).filter(|i| c >> i & 1 == 1).fold(0, |acc, i| acc | self.sets[i])
    }

    fn terminal(&self, u: usize, c: u32, w: u64) -> Option<f64> {
        let r = self.inst.root;
        match self.objective {
            Objective::Isolation => (c.count_ones() == 1).then(|| self.mass(c) * self.inst.metric.d(u, r)),
            Objective::AdapTsp => (c.count_ones() == 1 && self.union(c) & !w == 0)
                .then(|| self.mass(c) * self.inst.metric.d(u, r)),
            Objective::AdapTrp => (self.union(c) & !w == 0).then_some(0.0),
        }
    }

    /// Travel multiplier while the consistent set is `c` and `w` has been visited.
    fn rate(&self, c: u32, w: u64) -> f64 {
        match self.objective {
            Objective::AdapTrp => self.pending(c, w),
            _ => self.mass(c),
        }
    }

    fn split(&self, v: usize, c: u32) -> [u32; 2] {
        [c & self.holders[v], c & !self.holders[v]]
    }

    fn value(&mut self, u: usize, c: u32, w: u64) -> Result<f64> {
        let key = (u, c, if self.objective == Objective::Isolation { 0 } else { w });
        if let Some(&(v, _)) = self.memo.get(&key) {
            return Ok(v);
        }
        self.clock.tick()?;
        let mut best = (f64::INFINITY, Move::Stop);
        if let Some(t) = self.terminal(u, c, w) {
            best = (t, Move::Stop);
        } else {
            let n = self.inst.metric.len();
            let candidates: Vec<usize> = match self.objective {
                Objective::Isolation => (0..n)
                    .filter(|&v| {
                        let [a, b] = self.split(v, c);
                        a != 0 && b != 0
                    })
                    .collect(),
                _ => {
                    let open = self.union(c) & !w;
                    (0..n).filter(|&v| open >> v & 1 == 1).collect()
                }
            };
            let rate = self.rate(c, w);
            for v in candidates {
                let mut total = rate * self.inst.metric.d(u, v);
                let w2 = w | 1 << v;
                for part in self.split(v, c) {
                    if part != 0 {
                        total += self.value(v, part, w2)?;
                    }
                }
                if total < best.0 && !approx_eq(total, best.0) {
                    best = (total, Move::Visit(v));
                }
            }
            if best.0.is_infinite() {
                return Err(Error::Infeasible(format!(
                    "scenario set {c:#b} cannot be separated; are two scenarios identical?"
                )));
            }
        }
        self.memo.insert(key, best);
        Ok(best.0)
    }

    fn witness(&self, u: usize, c: u32, w: u64) -> StrategyNode {
        let key = (u, c, if self.objective == Objective::Isolation { 0 } else { w });
        match self.memo[&key].1 {
            Move::Stop => {
                let label = (c.count_ones() == 1).then(|| c.trailing_zeros() as usize);
                StrategyNode::leaf(label)
            }
            Move::Visit(v) => self.branch(v, c, w | 1 << v),
        }
    }

    /// Node for observing `v` with consistent set `c` (already including `v` in `w`).
    fn branch(&self, v: usize, c: u32, w: u64) -> StrategyNode {
        let [yes, no] = self.split(v, c);
        match (yes != 0, no != 0) {
            (true, true) => StrategyNode::observe(v, self.witness(v, yes, w), self.witness(v, no, w)),
            (true, false) => StrategyNode::waypoint(v, self.witness(v, yes, w)),
            _ => StrategyNode::waypoint(v, self.witness(v, no, w)),
        }
    }

    fn solve(&mut self) -> Result<OracleResult> {
        let r = self.inst.root;
        let all: u32 = if self.probs.len() == 32 { u32::MAX } else { (1u32 << self.probs.len()) - 1 };
        let w = 1u64 << r;
        let [yes, no] = self.split(r, all);
        if yes != 0 && no != 0 {
            let value = self.value(r, yes, w)? + self.value(r, no, w)?;
            let tree = StrategyNode::observe(r, self.witness(r, yes, w), self.witness(r, no, w));
            Ok(OracleResult { value, tree })
        } else {
            let value = self.value(r, all, w)?;
            Ok(OracleResult { value, tree: self.witness(r, all, w) })
        }
    }
}

fn run(inst: &CoverInstance, objective: Objective, limits: &OracleLimits, what: &str) -> Result<OracleResult> {
    inst.validate().map_err(Error::InvalidInstance)?;
    let n = inst.metric.len();
    let m = inst.num_scenarios();
    limits.check(n, m, what)?;
    if n > 64 || m > 32 {
        return Err(Error::LimitsExceeded("exact search supports at most 64 vertices and 32 scenarios".into()));
    }
    Search::new(inst, objective, limits.time_budget).solve()
}

pub fn opt_isolation_exact(inst: &CoverInstance, limits: &OracleLimits) -> Result<OracleResult> {
    run(inst, Objective::Isolation, limits, "isolation")
}

pub fn opt_adaptsp_exact(inst: &CoverInstance, limits: &OracleLimits) -> Result<OracleResult> {
    run(inst, Objective::AdapTsp, limits, "adaptive TSP")
}

pub fn opt_adaptrp_exact(inst: &CoverInstance, limits: &OracleLimits) -> Result<OracleResult> {
    run(inst, Objective::AdapTrp, limits, "adaptive repairman")
}

pub fn opt_exact(inst: &CoverInstance, objective: Objective, limits: &OracleLimits) -> Result<OracleResult> {
    run(inst, objective, limits, "exact")
}

/// Optimal value over the unrestricted state space: any vertex may be visited at any time,
/// revisits and uninformative visits included. Values only; meant for `n <= 5`, `m <= 3`.
pub fn unrestricted_value(inst: &CoverInstance, objective: Objective) -> Result<f64> {
    inst.validate().map_err(Error::InvalidInstance)?;
    let n = inst.metric.len();
    let m = inst.num_scenarios();
    if n > 8 || m > 6 {
        return Err(Error::LimitsExceeded(format!(
            "unrestricted search allows n <= 8 and m <= 6, got n = {n}, m = {m}"
        )));
    }
    let s = Search::new(inst, objective, Duration::from_secs(3600));
    let full_w = 1usize << n;
    let idx = |u: usize, w: u64| u * full_w + w as usize;
    let mut solved: HashMap<u32, Vec<f64>> = HashMap::new();
    let mut sets: Vec<u32> = (1..1u32 << m).collect();
    sets.sort_by_key(|c| c.count_ones());
    for c in sets {
        let mut val = vec![f64::INFINITY; n * full_w];
        for u in 0..n {
            for w in 0..full_w as u64 {
                if let Some(t) = s.terminal(u, c, w) {
                    val[idx(u, w)] = t;
                }
            }
        }
        // informative moves only depend on smaller sets, so they are fixed up front
        let rate: Vec<f64> = (0..full_w as u64).map(|w| s.rate(c, w)).collect();
        loop {
            let mut changed = false;
            for u in 0..n {
                for w in 0..full_w as u64 {
                    let mut best = val[idx(u, w)];
                    for v in 0..n {
                        if v == u {
                            continue;
                        }
                        let w2 = w | 1 << v;
                        let [a, b] = s.split(v, c);
                        let rest = if a != 0 && b != 0 {
                            solved[&a][idx(v, w2)] + solved[&b][idx(v, w2)]
                        } else {
                            val[idx(v, w2)]
                        };
                        let total = rate[w as usize] * inst.metric.d(u, v) + rest;
                        if total < best && !approx_eq(total, best) {
                            best = total;
                        }
                    }
                    if best < val[idx(u, w)] {
                        val[idx(u, w)] = best;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        solved.insert(c, val);
    }
    let r = inst.root;
    let all = (1u32 << m) - 1;
    let w = 1u64 << r;
    let [yes, no] = s.split(r, all);
    Ok(if yes != 0 && no != 0 {
        solved[&yes][idx(r, w)] + solved[&no][idx(r, w)]
    } else {
        solved[&all][idx(r, w)]
    })
}

fn enumerate_tours(n: usize, root: usize, clock: &mut Clock, f: &mut impl FnMut(&[usize]) -> bool) -> Result<()> {
    fn rec(
        n: usize,
        root: usize,
        seq: &mut Vec<usize>,
        used: u64,
        clock: &mut Clock,
        f: &mut impl FnMut(&[usize]) -> bool,
    ) -> Result<()> {
        clock.tick()?;
        if !f(seq) {
            return Ok(());
        }
        for v in 0..n {
            if v == root || used >> v & 1 == 1 {
                continue;
            }
            seq.push(v);
            rec(n, root, seq, used | 1 << v, clock, f)?;
            seq.pop();
        }
        Ok(())
    }
    rec(n, root, &mut Vec::new(), 0, clock, f)
}

/// Best GSO tour by enumeration of all r-tours without repeated vertices. The closure returns
/// `false` to prune extensions once the closed length exceeds the budget.
pub fn opt_gso_exact(inst: &GsoInstance, limits: &OracleLimits) -> Result<(f64, Tour)> {
    inst.validate()?;
    let n = inst.metric.len();
    limits.check(n, inst.groups.len(), "GSO")?;
    let r = inst.root;
    let mut clock = Clock::new(limits.time_budget);
    let mut best: (f64, f64, Vec<usize>) = (f64::NEG_INFINITY, 0.0, Vec::new());
    enumerate_tours(n, r, &mut clock, &mut |seq| {
        let tour = Tour::through(r, seq.iter().copied());
        let len = tour.length(inst.metric);
        if !approx_le(len, inst.budget) {
            return false;
        }
        let p = crate::gso::profit(inst, &tour);
        let better = if approx_eq(p, best.0) { len < best.1 && !approx_eq(len, best.1) } else { p > best.0 };
        if better {
            best = (p, len, seq.to_vec());
        }
        true
    })?;
    Ok((best.0, Tour::through(r, best.2)))
}

/// Least-latency tour covering at least `target` groups, by enumeration.
pub fn opt_lpgst_exact(inst: &LpgstInstance, limits: &OracleLimits) -> Result<(f64, Tour)> {
    let n = inst.metric.len();
    limits.check(n, inst.groups.len(), "LPGST")?;
    let r = inst.root;
    let mut clock = Clock::new(limits.time_budget);
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    enumerate_tours(n, r, &mut clock, &mut |seq| {
        let tour = Tour::through(r, seq.iter().copied());
        let count = covered_groups(&tour, inst.groups).iter().filter(|&&c| c).count();
        if count >= inst.target {
            let lat = crate::lpgst::latency(inst.metric, &tour, inst.groups, &inst.weights);
            let len = tour.length(inst.metric);
            let better = match &best {
                None => true,
                Some(b) => {
                    if approx_eq(lat, b.0) {
                        len < b.1 && !approx_eq(len, b.1)
                    } else {
                        lat < b.0
                    }
                }
            };
            if better {
                best = Some((lat, len, seq.to_vec()));
            }
        }
        true
    })?;
    let (lat, _, seq) = best.ok_or_else(|| Error::Infeasible(format!("no tour covers {} groups", inst.target)))?;
    Ok((lat, Tour::through(r, seq)))
}

/// Shortest r-tour touching every group (exhaustive over vertex subsets).
pub fn opt_gst_exact(gst: &GstInstance, limits: &OracleLimits) -> Result<(f64, Tour)> {
    gst.validate().map_err(Error::InvalidInstance)?;
    let n = gst.metric.len();
    limits.check(n, gst.groups.len(), "group Steiner")?;
    let r = gst.root;
    let others: Vec<usize> = (0..n).filter(|&v| v != r).collect();
    let mut clock = Clock::new(limits.time_budget);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u64..1 << others.len() {
        clock.tick()?;
        let set: Vec<usize> = (0..others.len()).filter(|j| mask >> j & 1 == 1).map(|j| others[j]).collect();
        let hits = gst.groups.iter().all(|g| g.iter().any(|v| *v == r || set.contains(v)));
        if !hits {
            continue;
        }
        let (order, len) = held_karp(&gst.metric, r, &set);
        if best.as_ref().is_none_or(|b| len < b.0 && !approx_eq(len, b.0)) {
            best = Some((len, order));
        }
    }
    let (len, order) = best.expect("the full vertex set touches every non-empty group");
    Ok((len, Tour::through(r, order)))
}

/// Optimal test strategy by memoized recursion over consistent disease sets.
pub fn opt_odt_exact(odt: &OdtInstance, limits: &OracleLimits) -> Result<(f64, TestNode)> {
    odt.validate().map_err(Error::InvalidInstance)?;
    let m = odt.diseases();
    limits.check(odt.tests.len(), m, "decision tree")?;
    if m > 32 {
        return Err(Error::LimitsExceeded("at most 32 diseases".into()));
    }
    struct Odt<'a> {
        odt: &'a OdtInstance,
        memo: HashMap<u32, (f64, Option<usize>)>,
        clock: Clock,
    }
    impl Odt<'_> {
        fn parts(&self, j: usize, c: u32) -> Vec<(usize, u32)> {
            let mut out: Vec<(usize, u32)> = Vec::new();
            for i in 0..self.odt.diseases() {
                if c >> i & 1 == 0 {
                    continue;
                }
                let o = self.odt.tests[j].outcome(i);
                match out.iter_mut().find(|(k, _)| *k == o) {
                    Some((_, mask)) => *mask |= 1 << i,
                    None => out.push((o, 1 << i)),
                }
            }
            out.sort_unstable();
            out
        }

        fn value(&mut self, c: u32) -> Result<f64> {
            if c.count_ones() <= 1 {
                return Ok(0.0);
            }
            if let Some(&(v, _)) = self.memo.get(&c) {
                return Ok(v);
            }
            self.clock.tick()?;
            let mass: f64 = (0..self.odt.diseases()).filter(|i| c >> i & 1 == 1).map(|i| self.odt.priors[i]).sum();
            let mut best = (f64::INFINITY, None);
            for j in 0..self.odt.tests.len() {
                let parts = self.parts(j, c);
                if parts.len() < 2 {
                    continue;
                }
                let mut total = self.odt.tests[j].cost * mass;
                for (_, p) in parts {
                    total += self.value(p)?;
                }
                if total < best.0 && !approx_eq(total, best.0) {
                    best = (total, Some(j));
                }
            }
            self.memo.insert(c, best);
            Ok(best.0)
        }

        fn witness(&self, c: u32) -> TestNode {
            if c.count_ones() == 1 {
                return TestNode::Leaf { disease: Some(c.trailing_zeros() as usize) };
            }
            let j = self.memo[&c].1.expect("separable instance");
            let branches = self
                .parts(j, c)
                .into_iter()
                .map(|(outcome, p)| TestBranch { outcome, node: self.witness(p) })
                .collect();
            TestNode::Test { test: j, branches }
        }
    }
    let mut search = Odt { odt, memo: HashMap::new(), clock: Clock::new(limits.time_budget) };
    let all = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let value = search.value(all)?;
    Ok((value, search.witness(all)))
}
