//! Finite metric spaces, r-tours and the tour primitives shared by every solver.
//!
//! Distances are `f64`. All comparisons go through [`approx_le`] / [`approx_eq`], which use a
//! relative tolerance of [`TOLERANCE`]; integer-valued inputs stay exact.

use std::fmt;

use crate::error::{Error, Result};

/// Relative tolerance used for every distance and probability comparison.
pub const TOLERANCE: f64 = 1e-9;

/// Largest vertex set solved exactly by [`tsp_tour`] and [`min_latency_path`].
pub const EXACT_TOUR_LIMIT: usize = 10;

fn slack(a: f64, b: f64) -> f64 {
    TOLERANCE * 1f64.max(a.abs()).max(b.abs())
}

/// `a <= b` up to the relative tolerance.
pub fn approx_le(a: f64, b: f64) -> bool {
    if !(a.is_finite() && b.is_finite()) {
        return a <= b;
    }
    a <= b + slack(a, b)
}

/// `a == b` up to the relative tolerance.
pub fn approx_eq(a: f64, b: f64) -> bool {
    if !(a.is_finite() && b.is_finite()) {
        return a == b;
    }
    (a - b).abs() <= slack(a, b)
}

/// One violated metric axiom, with the offending indices.
#[derive(Clone, Debug, PartialEq)]
pub enum MetricViolation {
    NotSquare { row: usize, len: usize, n: usize },
    NonFinite { u: usize, v: usize },
    Negative { u: usize, v: usize },
    NonzeroDiagonal { u: usize },
    Asymmetric { u: usize, v: usize },
    /// `d(from, to) > d(from, via) + d(via, to)`.
    Triangle { from: usize, to: usize, via: usize },
}

impl fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MetricViolation::NotSquare { row, len, n } => {
                write!(f, "row {row} has {len} entries, expected {n}")
            }
            MetricViolation::NonFinite { u, v } => write!(f, "non-finite distance at ({u},{v})"),
            MetricViolation::Negative { u, v } => write!(f, "negative distance at ({u},{v})"),
            MetricViolation::NonzeroDiagonal { u } => write!(f, "nonzero diagonal at ({u},{u})"),
            MetricViolation::Asymmetric { u, v } => write!(f, "asymmetric at ({u},{v})"),
            MetricViolation::Triangle { from, to, via } => {
                write!(f, "triangle violated on ({from},{to},{via})")
            }
        }
    }
}

/// A validated finite metric `(V, d)` on vertices `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    n: usize,
    dist: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl Metric {
    /// Checks a square matrix against all metric axioms and returns every violation found.
    pub fn validate(rows: &[Vec<f64>]) -> std::result::Result<Metric, Vec<MetricViolation>> {
        let n = rows.len();
        let mut violations = Vec::new();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                violations.push(MetricViolation::NotSquare { row, len: r.len(), n });
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        for u in 0..n {
            for v in 0..n {
                let d = rows[u][v];
                if !d.is_finite() {
                    violations.push(MetricViolation::NonFinite { u, v });
                } else if d < 0.0 {
                    violations.push(MetricViolation::Negative { u, v });
                }
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        for u in 0..n {
            if rows[u][u] != 0.0 {
                violations.push(MetricViolation::NonzeroDiagonal { u });
            }
            for v in u + 1..n {
                if !approx_eq(rows[u][v], rows[v][u]) {
                    violations.push(MetricViolation::Asymmetric { u, v });
                }
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        for from in 0..n {
            for to in from + 1..n {
                for via in 0..n {
                    if via == from || via == to {
                        continue;
                    }
                    if !approx_le(rows[from][to], rows[from][via] + rows[via][to]) {
                        violations.push(MetricViolation::Triangle { from, to, via });
                    }
                }
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        Ok(Metric {
            n,
            dist: rows.iter().flatten().copied().collect(),
            labels: None,
        })
    }

    /// Same as [`Metric::validate`] but folds the violations into the crate error.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Metric> {
        Metric::validate(&rows).map_err(Error::InvalidMetric)
    }

    /// All-pairs shortest-path closure of an undirected weighted graph (Floyd-Warshall).
    pub fn closure(n: usize, edges: &[(usize, usize, f64)]) -> Result<Metric> {
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (u, row) in d.iter_mut().enumerate() {
            row[u] = 0.0;
        }
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Malformed(format!("edge ({u},{v}) out of range for n={n}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Malformed(format!("edge ({u},{v}) has invalid weight {w}")));
            }
            if w < d[u][v] {
                d[u][v] = w;
                d[v][u] = w;
            }
        }
        for k in 0..n {
            for i in 0..n {
                let dik = d[i][k];
                if dik.is_infinite() {
                    continue;
                }
                for j in 0..n {
                    let via = dik + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        for u in 0..n {
            for v in u + 1..n {
                if d[u][v].is_infinite() {
                    return Err(Error::Malformed(format!(
                        "graph is disconnected: vertices {u} and {v} are unreachable"
                    )));
                }
            }
        }
        Metric::new(d)
    }

    /// Metric induced by a weighted star: vertex 0 is the center, leaf `j + 1` sits at
    /// distance `weights[j]`.
    pub fn star(weights: &[f64]) -> Result<Metric> {
        if let Some(j) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Malformed(format!("star weight {j} is negative or non-finite")));
        }
        let n = weights.len() + 1;
        let radius = |v: usize| if v == 0 { 0.0 } else { weights[v - 1] };
        let rows = (0..n)
            .map(|u| {
                (0..n)
                    .map(|v| if u == v { 0.0 } else { radius(u) + radius(v) })
                    .collect()
            })
            .collect();
        Metric::new(rows)
    }

    /// Appends `count` vertices at distance zero from `source`. New vertices take indices
    /// `n..n + count`.
    pub fn add_zero_copies(&self, source: usize, count: usize) -> Metric {
        assert!(source < self.n, "source vertex {source} out of range");
        let n = self.n + count;
        let origin = |v: usize| if v < self.n { v } else { source };
        let mut dist = Vec::with_capacity(n * n);
        for u in 0..n {
            for v in 0..n {
                dist.push(if u == v { 0.0 } else { self.d(origin(u), origin(v)) });
            }
        }
        let labels = self.labels.as_ref().map(|l| {
            let mut l = l.clone();
            for k in 0..count {
                l.push(format!("{}'{}", l[source], k + 1));
            }
            l
        });
        Metric { n, dist, labels }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Metric> {
        if labels.len() != self.n {
            return Err(Error::Malformed(format!(
                "{} labels for {} vertices",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, u: usize, v: usize) -> f64 {
        self.dist[u * self.n + v]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.dist.chunks(self.n.max(1)).take(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn max_distance(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest strictly positive distance, if any.
    pub fn min_positive_distance(&self) -> Option<f64> {
        self.dist
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.min(d))))
    }

    /// Sum of `d(u, v)` over unordered pairs.
    pub fn total_distance(&self) -> f64 {
        (0..self.n)
            .flat_map(|u| (u + 1..self.n).map(move |v| (u, v)))
            .map(|(u, v)| self.d(u, v))
            .sum()
    }

    /// Length of the walk visiting `seq` in order (no implicit return).
    pub fn walk_length(&self, seq: &[usize]) -> f64 {
        seq.windows(2).map(|w| self.d(w[0], w[1])).sum()
    }
}

/// An r-tour: starts and ends at the same root vertex.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tour {
    vertices: Vec<usize>,
}

impl Tour {
    /// Builds a tour from a vertex list. Appends the root if the list does not return to it.
    pub fn new(mut vertices: Vec<usize>) -> Tour {
        assert!(!vertices.is_empty(), "a tour needs at least its root");
        if vertices.len() == 1 || vertices.first() != vertices.last() {
            vertices.push(vertices[0]);
        }
        Tour { vertices }
    }

    /// The tour `(r, r)`.
    pub fn trivial(root: usize) -> Tour {
        Tour { vertices: vec![root, root] }
    }

    /// Tour `r, stops..., r`.
    pub fn through(root: usize, stops: impl IntoIterator<Item = usize>) -> Tour {
        let mut vertices = vec![root];
        vertices.extend(stops);
        vertices.push(root);
        Tour { vertices }
    }

    pub fn root(&self) -> usize {
        self.vertices[0]
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Vertices strictly between the two root endpoints.
    pub fn interior(&self) -> &[usize] {
        &self.vertices[1..self.vertices.len() - 1]
    }

    pub fn length(&self, metric: &Metric) -> f64 {
        metric.walk_length(&self.vertices)
    }

    pub fn visits(&self, v: usize) -> bool {
        self.vertices.contains(&v)
    }

    /// `self ∘ other`: traverse `self`, then `other` (both r-tours on the same root).
    pub fn concat(&self, other: &Tour) -> Tour {
        assert_eq!(self.root(), other.root(), "concatenated tours must share a root");
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices[1..]);
        vertices.dedup();
        if vertices.len() == 1 {
            vertices.push(vertices[0]);
        }
        Tour { vertices }
    }
}

/// Per target set: length of the shortest tour prefix that reaches it, or the full tour
/// length if the tour never does (empty targets count as never reached).
pub fn arrival_times(metric: &Metric, tour: &Tour, targets: &[Vec<usize>]) -> Vec<f64> {
    let prefix = prefix_lengths(metric, tour.vertices());
    let total = *prefix.last().unwrap();
    targets
        .iter()
        .map(|target| {
            tour.vertices()
                .iter()
                .position(|v| target.contains(v))
                .map_or(total, |k| prefix[k])
        })
        .collect()
}

/// `prefix[k]` is the walk length from `seq[0]` to `seq[k]`.
pub fn prefix_lengths(metric: &Metric, seq: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(seq.len());
    let mut acc = 0.0;
    for (k, &v) in seq.iter().enumerate() {
        if k > 0 {
            acc += metric.d(seq[k - 1], v);
        }
        out.push(acc);
    }
    out
}

fn distinct_targets(root: usize, vertices: &[usize]) -> Vec<usize> {
    let mut set: Vec<usize> = vertices.iter().copied().filter(|&v| v != root).collect();
    set.sort_unstable();
    set.dedup();
    set
}

/// An r-tour through `vertices`: Held-Karp (exact) for at most [`EXACT_TOUR_LIMIT`] vertices,
/// MST doubling (factor 2) beyond.
pub fn tsp_tour(metric: &Metric, root: usize, vertices: &[usize]) -> Tour {
    let set = distinct_targets(root, vertices);
    if set.len() <= EXACT_TOUR_LIMIT {
        let (order, _) = held_karp(metric, root, &set);
        Tour::through(root, order)
    } else {
        Tour::through(root, mst_preorder(metric, root, &set))
    }
}

/// Exact minimum r-tour through `set` (which must not contain `root`). Exponential in
/// `set.len()`; callers bound the size. Ties go to the lexicographically first order found.
pub fn held_karp(metric: &Metric, root: usize, set: &[usize]) -> (Vec<usize>, f64) {
    let k = set.len();
    if k == 0 {
        return (Vec::new(), 0.0);
    }
    let full = (1usize << k) - 1;
    let mut cost = vec![f64::INFINITY; (full + 1) * k];
    let mut parent = vec![usize::MAX; (full + 1) * k];
    for j in 0..k {
        cost[(1 << j) * k + j] = metric.d(root, set[j]);
    }
    for mask in 1..=full {
        for last in 0..k {
            let c = cost[mask * k + last];
            if mask & (1 << last) == 0 || c.is_infinite() {
                continue;
            }
            for next in 0..k {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let m2 = mask | (1 << next);
                let nc = c + metric.d(set[last], set[next]);
                if nc < cost[m2 * k + next] {
                    cost[m2 * k + next] = nc;
                    parent[m2 * k + next] = last;
                }
            }
        }
    }
    let (mut last, mut best) = (0, f64::INFINITY);
    for j in 0..k {
        let c = cost[full * k + j] + metric.d(set[j], root);
        if c < best {
            best = c;
            last = j;
        }
    }
    let mut order = Vec::with_capacity(k);
    let mut mask = full;
    loop {
        order.push(set[last]);
        let p = parent[mask * k + last];
        mask &= !(1 << last);
        if p == usize::MAX {
            break;
        }
        last = p;
    }
    order.reverse();
    (order, best)
}

/// Preorder walk of a minimum spanning tree on `{root} ∪ set`, children by ascending index.
fn mst_preorder(metric: &Metric, root: usize, set: &[usize]) -> Vec<usize> {
    let nodes: Vec<usize> = std::iter::once(root).chain(set.iter().copied()).collect();
    let k = nodes.len();
    let mut in_tree = vec![false; k];
    let mut best = vec![f64::INFINITY; k];
    let mut link = vec![0usize; k];
    let mut children = vec![Vec::new(); k];
    best[0] = 0.0;
    for _ in 0..k {
        let u = (0..k)
            .filter(|&i| !in_tree[i])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .unwrap();
        in_tree[u] = true;
        if u != 0 {
            children[link[u]].push(u);
        }
        for v in 0..k {
            if !in_tree[v] {
                let d = metric.d(nodes[u], nodes[v]);
                if d < best[v] {
                    best[v] = d;
                    link[v] = u;
                }
            }
        }
    }
    let mut order = Vec::with_capacity(k - 1);
    let mut stack = vec![0];
    while let Some(u) = stack.pop() {
        if u != 0 {
            order.push(nodes[u]);
        }
        let mut kids = children[u].clone();
        kids.sort_by_key(|&c| std::cmp::Reverse(nodes[c]));
        stack.extend(kids);
    }
    order
}

/// Visiting order of `vertices` from `start` minimizing the sum of arrival times (no return
/// leg). Exact subset DP up to [`EXACT_TOUR_LIMIT`] vertices, nearest neighbour beyond.
/// Vertices equal to `start` are dropped (arrival zero).
pub fn min_latency_path(metric: &Metric, start: usize, vertices: &[usize]) -> (Vec<usize>, f64) {
    let set = distinct_targets(start, vertices);
    let k = set.len();
    if k == 0 {
        return (Vec::new(), 0.0);
    }
    if k > EXACT_TOUR_LIMIT {
        let mut order = Vec::with_capacity(k);
        let mut left = set;
        let mut at = start;
        while !left.is_empty() {
            let (i, _) = left
                .iter()
                .enumerate()
                .min_by(|a, b| metric.d(at, *a.1).total_cmp(&metric.d(at, *b.1)))
                .unwrap();
            at = left.remove(i);
            order.push(at);
        }
        let lat = path_latency(metric, start, &order);
        return (order, lat);
    }
    // cost[mask][last]: each traversed edge is paid once per vertex still waiting.
    let full = (1usize << k) - 1;
    let mut cost = vec![f64::INFINITY; (full + 1) * k];
    let mut parent = vec![usize::MAX; (full + 1) * k];
    for j in 0..k {
        cost[(1 << j) * k + j] = metric.d(start, set[j]) * k as f64;
    }
    for mask in 1..=full {
        let waiting = (k - mask.count_ones() as usize) as f64;
        for last in 0..k {
            let c = cost[mask * k + last];
            if mask & (1 << last) == 0 || c.is_infinite() {
                continue;
            }
            for next in 0..k {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let m2 = mask | (1 << next);
                let nc = c + metric.d(set[last], set[next]) * waiting;
                if nc < cost[m2 * k + next] {
                    cost[m2 * k + next] = nc;
                    parent[m2 * k + next] = last;
                }
            }
        }
    }
    let mut last = 0;
    for j in 1..k {
        if cost[full * k + j] < cost[full * k + last] {
            last = j;
        }
    }
    let mut order = Vec::with_capacity(k);
    let mut mask = full;
    loop {
        order.push(set[last]);
        let p = parent[mask * k + last];
        mask &= !(1 << last);
        if p == usize::MAX {
            break;
        }
        last = p;
    }
    order.reverse();
    let lat = path_latency(metric, start, &order);
    (order, lat)
}

/// Sum of arrival times along `start, order...`.
pub fn path_latency(metric: &Metric, start: usize, order: &[usize]) -> f64 {
    let mut t = 0.0;
    let mut at = start;
    let mut total = 0.0;
    for &v in order {
        t += metric.d(at, v);
        total += t;
        at = v;
    }
    total
}
