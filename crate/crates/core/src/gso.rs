//! Group Steiner orienteering: pick an r-tour of length at most `B` maximizing the profit of
//! the groups it touches.
//!
//! Two oracles are provided. [`ExactGso`] solves small instances exactly with a subset DP over
//! closed-tour lengths. [`StarGso`] handles weighted stars, where the problem is monotone
//! submodular maximization under a knapsack constraint, with partial enumeration plus density
//! greedy.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{approx_eq, approx_le, held_karp, Metric, Tour, TOLERANCE};

/// Borrowed GSO input. Groups may be empty; profits must be non-negative.
#[derive(Clone, Debug)]
pub struct GsoInstance<'a> {
    pub metric: &'a Metric,
    pub root: usize,
    pub groups: &'a [Vec<usize>],
    pub profits: Vec<f64>,
    pub budget: f64,
}

impl GsoInstance<'_> {
    pub fn validate(&self) -> Result<()> {
        let n = self.metric.len();
        if self.root >= n {
            return Err(Error::Malformed(format!("root {} out of range", self.root)));
        }
        if self.groups.len() != self.profits.len() {
            return Err(Error::Malformed("one profit per group is required".into()));
        }
        if let Some(v) = self.groups.iter().flatten().find(|&&v| v >= n) {
            return Err(Error::Malformed(format!("group vertex {v} out of range")));
        }
        if self.profits.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Malformed("profits must be finite and non-negative".into()));
        }
        if !(self.budget >= 0.0) {
            return Err(Error::Malformed("budget must be non-negative".into()));
        }
        Ok(())
    }
}

/// Total profit of the groups touched by `tour`.
pub fn profit(inst: &GsoInstance, tour: &Tour) -> f64 {
    inst.groups
        .iter()
        .zip(&inst.profits)
        .filter(|(g, _)| g.iter().any(|v| tour.visits(*v)))
        .map(|(_, p)| p)
        .sum()
}

/// An `(a, b)`-bicriteria GSO solver: profit at least `1/a` of optimal, length at most `b·B`.
pub trait GsoOracle: Send + Sync {
    fn solve(&self, inst: &GsoInstance) -> Result<Tour>;
    /// `(a, b)`.
    fn factors(&self) -> (f64, f64);
    fn name(&self) -> &'static str;
}

/// Oracle selection by name.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleChoice {
    Exact,
    Star,
    #[default]
    Auto,
}

impl FromStr for OracleChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(OracleChoice::Exact),
            "star" => Ok(OracleChoice::Star),
            "auto" => Ok(OracleChoice::Auto),
            other => Err(Error::Malformed(format!("unknown oracle {other:?}; use exact, star or auto"))),
        }
    }
}

impl fmt::Display for OracleChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleChoice::Exact => "exact",
            OracleChoice::Star => "star",
            OracleChoice::Auto => "auto",
        })
    }
}

impl OracleChoice {
    pub fn build(self) -> Box<dyn GsoOracle> {
        match self {
            OracleChoice::Exact => Box::new(ExactGso::default()),
            OracleChoice::Star => Box::new(StarGso::default()),
            OracleChoice::Auto => Box::new(AutoGso::default()),
        }
    }
}

fn better(profit: f64, len: f64, best_profit: f64, best_len: f64) -> Option<bool> {
    if approx_eq(profit, best_profit) {
        if approx_eq(len, best_len) {
            None
        } else {
            Some(len < best_len)
        }
    } else {
        Some(profit > best_profit)
    }
}

type TableKey = (usize, Vec<u64>);

/// Exact GSO: profits are maximized over all vertex subsets whose shortest closed tour fits the
/// budget. Ties go to the shorter tour, then fewer vertices, then the lower subset index.
pub struct ExactGso {
    /// Largest number of non-root vertices the exact DP accepts.
    pub max_vertices: usize,
    tables: Mutex<HashMap<TableKey, Arc<Vec<f64>>>>,
}

impl Default for ExactGso {
    fn default() -> Self {
        ExactGso::new(16)
    }
}

impl ExactGso {
    pub fn new(max_vertices: usize) -> Self {
        ExactGso { max_vertices, tables: Mutex::new(HashMap::new()) }
    }

    /// `table[mask]` = shortest closed root tour through exactly the non-root vertices in
    /// `mask` (bit `j` is the `j`-th non-root vertex).
    fn table(&self, metric: &Metric, root: usize) -> Arc<Vec<f64>> {
        let n = metric.len();
        let key: TableKey = (
            root,
            (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).map(|(u, v)| metric.d(u, v).to_bits()).collect(),
        );
        if let Some(t) = self.tables.lock().unwrap().get(&key) {
            return Arc::clone(t);
        }
        let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
        let k = others.len();
        let full = 1usize << k;
        let mut path = vec![f64::INFINITY; full * k.max(1)];
        for j in 0..k {
            path[(1 << j) * k + j] = metric.d(root, others[j]);
        }
        let mut closed = vec![f64::INFINITY; full];
        closed[0] = 0.0;
        for mask in 1..full {
            for last in 0..k {
                let c = path[mask * k + last];
                if c.is_infinite() {
                    continue;
                }
                let ret = c + metric.d(others[last], root);
                if ret < closed[mask] {
                    closed[mask] = ret;
                }
                for next in 0..k {
                    if mask >> next & 1 == 1 {
                        continue;
                    }
                    let m2 = mask | 1 << next;
                    let nc = c + metric.d(others[last], others[next]);
                    if nc < path[m2 * k + next] {
                        path[m2 * k + next] = nc;
                    }
                }
            }
        }
        let table = Arc::new(closed);
        self.tables.lock().unwrap().insert(key, Arc::clone(&table));
        table
    }
}

impl GsoOracle for ExactGso {
    fn solve(&self, inst: &GsoInstance) -> Result<Tour> {
        inst.validate()?;
        let n = inst.metric.len();
        let root = inst.root;
        if n - 1 > self.max_vertices {
            return Err(Error::LimitsExceeded(format!(
                "exact GSO handles at most {} non-root vertices, got {}",
                self.max_vertices,
                n - 1
            )));
        }
        let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
        let pos = |v: usize| if v < root { v } else { v - 1 };
        // groups that matter: positive profit, not already covered by the root
        let mut base = 0.0;
        let mut live: Vec<(u64, f64)> = Vec::new();
        let mut relevant = 0u64;
        for (g, &p) in inst.groups.iter().zip(&inst.profits) {
            if p <= 0.0 || g.is_empty() {
                continue;
            }
            if g.contains(&root) {
                base += p;
                continue;
            }
            let mask = g.iter().fold(0u64, |m, &v| m | 1 << pos(v));
            relevant |= mask;
            live.push((mask, p));
        }
        if live.is_empty() {
            return Ok(Tour::trivial(root));
        }
        let table = self.table(inst.metric, root);
        let mut best = (base, 0.0, 0u32, 0u64);
        // enumerate submasks of the relevant vertices
        let mut sub = relevant;
        loop {
            let len = table[sub as usize];
            if sub != 0 && approx_le(len, inst.budget) {
                let p = base + live.iter().filter(|(m, _)| m & sub != 0).map(|(_, p)| p).sum::<f64>();
                let cnt = sub.count_ones();
                let take = match better(p, len, best.0, best.1) {
                    Some(b) => b,
                    None => cnt < best.2 || (cnt == best.2 && sub < best.3),
                };
                if take {
                    best = (p, len, cnt, sub);
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & relevant;
        }
        if best.3 == 0 {
            return Ok(Tour::trivial(root));
        }
        let set: Vec<usize> = (0..others.len()).filter(|j| best.3 >> j & 1 == 1).map(|j| others[j]).collect();
        let (order, _) = held_karp(inst.metric, root, &set);
        Ok(Tour::through(root, order))
    }

    fn factors(&self) -> (f64, f64) {
        (1.0, 1.0)
    }

    fn name(&self) -> &'static str {
        "exact"
    }
}

/// Zero-distance classes of a star centered at `root`: `Some(classes)` when every pair of
/// vertices is either at distance zero or at the sum of their root distances. The first class
/// is the root's.
pub fn star_classes(metric: &Metric, root: usize) -> Option<Vec<Vec<usize>>> {
    let n = metric.len();
    let zero = |u: usize, v: usize| approx_eq(metric.d(u, v) + 1.0, 1.0) || metric.d(u, v) <= TOLERANCE;
    for u in 0..n {
        for v in u + 1..n {
            if zero(u, v) {
                continue;
            }
            if !approx_eq(metric.d(u, v), metric.d(root, u) + metric.d(root, v)) {
                return None;
            }
        }
    }
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = vec![Vec::new()];
    for v in 0..n {
        if zero(root, v) {
            class_of[v] = 0;
            classes[0].push(v);
        }
    }
    for v in 0..n {
        if class_of[v] != usize::MAX {
            continue;
        }
        let id = classes.len();
        let members: Vec<usize> = (v..n).filter(|&u| class_of[u] == usize::MAX && zero(u, v)).collect();
        for &u in &members {
            class_of[u] = id;
        }
        classes.push(members);
    }
    Some(classes)
}

/// Is the metric a weighted star centered at `root` (zero-distance twins allowed)?
pub fn is_star(metric: &Metric, root: usize) -> bool {
    star_classes(metric, root).is_some()
}

/// The star oracle: every seed set of at most `seed_size` leaves is completed greedily by
/// marginal profit per unit round-trip cost; the best completion wins. With `seed_size >= 3`
/// the profit is at least `(1 - 1/e)` of optimal; tours never exceed the budget.
pub struct StarGso {
    pub seed_size: usize,
}

impl Default for StarGso {
    fn default() -> Self {
        StarGso { seed_size: 3 }
    }
}

struct Knapsack {
    /// Round-trip cost per item.
    costs: Vec<f64>,
    /// Per item: bitset (as sorted group ids) of the live groups it touches.
    covers: Vec<Vec<usize>>,
    profits: Vec<f64>,
    base: f64,
}

impl Knapsack {
    fn gain(&self, item: usize, covered: &[bool]) -> f64 {
        self.covers[item].iter().filter(|&&g| !covered[g]).map(|&g| self.profits[g]).sum()
    }

    fn take(&self, item: usize, covered: &mut [bool]) -> f64 {
        let mut gained = 0.0;
        for &g in &self.covers[item] {
            if !covered[g] {
                covered[g] = true;
                gained += self.profits[g];
            }
        }
        gained
    }

    /// Greedy completion of `seed`. Returns `(profit, cost, items)`.
    fn complete(&self, seed: &[usize], budget: f64) -> Option<(f64, f64, Vec<usize>)> {
        let cost: f64 = seed.iter().map(|&i| self.costs[i]).sum();
        if !approx_le(cost, budget) {
            return None;
        }
        let mut covered = vec![false; self.profits.len()];
        let mut value = self.base;
        let mut spent = cost;
        for &i in seed {
            value += self.take(i, &mut covered);
        }
        let mut chosen = seed.to_vec();
        let mut open: Vec<usize> = (0..self.costs.len()).filter(|i| !seed.contains(i)).collect();
        loop {
            let mut pick: Option<(usize, f64)> = None;
            for (k, &i) in open.iter().enumerate() {
                let g = self.gain(i, &covered);
                if g <= 0.0 {
                    continue;
                }
                let density = g / self.costs[i];
                if pick.is_none_or(|(_, d)| density > d * (1.0 + TOLERANCE)) {
                    pick = Some((k, density));
                }
            }
            let Some((k, _)) = pick else { break };
            let i = open.remove(k);
            if approx_le(spent + self.costs[i], budget) {
                spent += self.costs[i];
                value += self.take(i, &mut covered);
                chosen.push(i);
            }
        }
        chosen.sort_unstable();
        Some((value, spent, chosen))
    }
}

fn for_each_seed(items: usize, max: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, items: usize, max: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        f(cur);
        if cur.len() == max {
            return;
        }
        for i in start..items {
            cur.push(i);
            rec(i + 1, items, max, cur, f);
            cur.pop();
        }
    }
    rec(0, items, max, &mut Vec::new(), f);
}

impl GsoOracle for StarGso {
    fn solve(&self, inst: &GsoInstance) -> Result<Tour> {
        inst.validate()?;
        let root = inst.root;
        let classes = star_classes(inst.metric, root).ok_or_else(|| {
            Error::Malformed(format!("the star oracle needs a weighted star centered at vertex {root}"))
        })?;
        let n = inst.metric.len();
        let mut class_of = vec![0; n];
        for (c, members) in classes.iter().enumerate() {
            for &v in members {
                class_of[v] = c;
            }
        }
        let in_group: Vec<bool> = {
            let mut flags = vec![false; n];
            for &v in inst.groups.iter().flatten() {
                flags[v] = true;
            }
            flags
        };
        // items are the leaf classes; live groups have positive profit and miss the root class
        let leaf_classes = classes.len() - 1;
        let mut base = 0.0;
        let mut profits = Vec::new();
        let mut covers = vec![Vec::new(); leaf_classes];
        for (g, &p) in inst.groups.iter().zip(&inst.profits) {
            if p <= 0.0 || g.is_empty() {
                continue;
            }
            if g.iter().any(|&v| class_of[v] == 0) {
                base += p;
                continue;
            }
            let id = profits.len();
            profits.push(p);
            let mut cs: Vec<usize> = g.iter().map(|&v| class_of[v] - 1).collect();
            cs.sort_unstable();
            cs.dedup();
            for c in cs {
                covers[c].push(id);
            }
        }
        let costs: Vec<f64> = classes[1..].iter().map(|c| 2.0 * inst.metric.d(root, c[0])).collect();
        let ks = Knapsack { costs, covers, profits, base };
        let mut best: Option<(f64, f64, Vec<usize>)> = None;
        for_each_seed(leaf_classes, self.seed_size, &mut |seed| {
            if let Some(cand) = ks.complete(seed, inst.budget) {
                let take = match &best {
                    None => true,
                    Some(b) => better(cand.0, cand.1, b.0, b.1).unwrap_or(false),
                };
                if take {
                    best = Some(cand);
                }
            }
        });
        let chosen = best.map(|b| b.2).unwrap_or_default();
        let mut stops: Vec<usize> = classes[0].iter().copied().filter(|&v| v != root && in_group[v]).collect();
        for c in chosen {
            stops.extend(classes[c + 1].iter().copied().filter(|&v| in_group[v]));
        }
        if stops.is_empty() {
            return Ok(Tour::trivial(root));
        }
        Ok(Tour::through(root, stops))
    }

    fn factors(&self) -> (f64, f64) {
        if self.seed_size >= 3 {
            (std::f64::consts::E / (std::f64::consts::E - 1.0), 1.0)
        } else {
            (2.0 * std::f64::consts::E / (std::f64::consts::E - 1.0), 1.0)
        }
    }

    fn name(&self) -> &'static str {
        "star"
    }
}

/// Uses the star oracle when the metric is a star centered at the root, the exact one otherwise.
#[derive(Default)]
pub struct AutoGso {
    pub exact: ExactGso,
    pub star: StarGso,
}

impl GsoOracle for AutoGso {
    fn solve(&self, inst: &GsoInstance) -> Result<Tour> {
        if is_star(inst.metric, inst.root) {
            self.star.solve(inst)
        } else {
            self.exact.solve(inst)
        }
    }

    fn factors(&self) -> (f64, f64) {
        self.star.factors()
    }

    fn name(&self) -> &'static str {
        "auto"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Metric {
        Metric::closure(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn profit_rules() {
        let m = Metric::star(&[1.0, 1.0]).unwrap();
        let groups = vec![vec![0], vec![1], vec![2]];
        let inst = GsoInstance { metric: &m, root: 0, groups: &groups, profits: vec![1.0, 2.0, 4.0], budget: 0.0 };
        assert_eq!(profit(&inst, &Tour::trivial(0)), 1.0);
        assert_eq!(profit(&inst, &Tour::through(0, [1])), 3.0);
        assert_eq!(profit(&inst, &Tour::through(0, [1, 2])), 7.0);
    }

    #[test]
    fn exact_small_cases() {
        let m = path3();
        let groups = vec![vec![1], vec![2]];
        let oracle = ExactGso::default();
        let mk = |budget| GsoInstance { metric: &m, root: 0, groups: &groups, profits: vec![1.0, 10.0], budget };
        assert_eq!(oracle.solve(&mk(0.0)).unwrap(), Tour::trivial(0));
        let t = oracle.solve(&mk(2.0)).unwrap();
        assert_eq!(t.vertices(), &[0, 1, 0]);
        assert_eq!(profit(&mk(2.0), &t), 1.0);
        let t = oracle.solve(&mk(100.0)).unwrap();
        assert_eq!(profit(&mk(100.0), &t), 11.0);
        // vertex 2 costs a round trip of 4, and the walk passes vertex 1 on the way
        let t = oracle.solve(&mk(4.0)).unwrap();
        assert_eq!(profit(&mk(4.0), &t), 11.0);
        let t = oracle.solve(&mk(3.5)).unwrap();
        assert_eq!(profit(&mk(3.5), &t), 1.0);
    }

    #[test]
    fn star_detection() {
        let star = Metric::star(&[1.0, 2.0]).unwrap().add_zero_copies(1, 2);
        let classes = star_classes(&star, 0).unwrap();
        assert_eq!(classes, vec![vec![0], vec![1, 3, 4], vec![2]]);
        assert!(!is_star(&path3(), 0));
        assert!(is_star(&path3(), 1));
    }

    #[test]
    fn star_oracle_basics() {
        let m = Metric::star(&[1.0, 2.0, 3.0]).unwrap();
        let groups = vec![vec![1], vec![2], vec![3]];
        let oracle = StarGso::default();
        let inst = GsoInstance { metric: &m, root: 0, groups: &groups, profits: vec![1.0, 1.0, 1.0], budget: 2.0 };
        assert_eq!(oracle.solve(&inst).unwrap().vertices(), &[0, 1, 0]);
        let inst = GsoInstance { budget: 0.0, ..inst };
        assert_eq!(oracle.solve(&inst).unwrap(), Tour::trivial(0));
        let inst = GsoInstance { budget: 10.0, profits: vec![1.0, 5.0, 5.0], ..inst };
        let t = oracle.solve(&inst).unwrap();
        assert_eq!(t.vertices(), &[0, 2, 3, 0]);
        assert!(t.length(&m) <= 10.0);
        assert!(oracle.solve(&GsoInstance { metric: &path3(), ..inst }).is_err());
    }

    #[test]
    fn star_copies_count_together() {
        let m = Metric::star(&[1.0]).unwrap().add_zero_copies(1, 2);
        let groups = vec![vec![1], vec![2], vec![3]];
        let inst = GsoInstance { metric: &m, root: 0, groups: &groups, profits: vec![1.0, 1.0, 1.0], budget: 2.0 };
        let t = StarGso::default().solve(&inst).unwrap();
        assert_eq!(t.vertices(), &[0, 1, 2, 3, 0]);
        assert_eq!(t.length(&m), 2.0);
    }

    #[test]
    fn oracle_choice_parses() {
        assert_eq!("star".parse::<OracleChoice>().unwrap(), OracleChoice::Star);
        assert!("lp".parse::<OracleChoice>().is_err());
        assert_eq!(OracleChoice::Exact.build().name(), "exact");
    }
}
