//! Partial latency group Steiner and its full-coverage variant, built on a GSO oracle.
//!
//! Budgets are measured in units of the smallest positive distance `u`: phase `i` uses length
//! bound `u·β^(i+1)` and the final unit-profit run for guess `l` uses `u·β^l`. Every `l` in the
//! range is tried and the coverage-feasible result of least latency is kept.

use crate::error::{Error, Result};
use crate::gso::{GsoInstance, GsoOracle};
use crate::metric::{approx_le, arrival_times, Metric, Tour};

#[derive(Clone, Debug)]
pub struct LpgstInstance<'a> {
    pub metric: &'a Metric,
    pub root: usize,
    pub groups: &'a [Vec<usize>],
    pub weights: Vec<f64>,
    /// Number of groups that must be covered.
    pub target: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpgstConfig {
    pub beta: f64,
    /// Length factor used in the padding accounting; `None` takes the oracle's `b`.
    pub rho: Option<f64>,
    /// Overrides the largest `l` tried.
    pub max_l: Option<usize>,
}

impl Default for LpgstConfig {
    fn default() -> Self {
        LpgstConfig { beta: 1.25, rho: None, max_l: None }
    }
}

impl LpgstConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 1.0) || !self.beta.is_finite() {
            return Err(Error::Malformed(format!("beta must exceed 1, got {}", self.beta)));
        }
        if let Some(rho) = self.rho {
            if !(rho >= 1.0) {
                return Err(Error::Malformed(format!("rho must be at least 1, got {rho}")));
            }
        }
        Ok(())
    }
}

/// Weighted latency of a tour: covered groups pay their arrival time, uncovered ones the
/// tour length.
pub fn latency(metric: &Metric, tour: &Tour, groups: &[Vec<usize>], weights: &[f64]) -> f64 {
    arrival_times(metric, tour, groups).iter().zip(weights).map(|(a, w)| a * w).sum()
}

pub fn covered_groups(tour: &Tour, groups: &[Vec<usize>]) -> Vec<bool> {
    groups.iter().map(|g| g.iter().any(|&v| tour.visits(v))).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpgstSolution {
    pub tour: Tour,
    /// Latency of the emitted tour.
    pub latency: f64,
    /// Latency with `τ` padded to `ρ·u·β^l` before `σ`; never below `latency`.
    pub accounted_latency: f64,
    pub l: usize,
    pub covered: usize,
}

fn unit(metric: &Metric) -> f64 {
    metric.min_positive_distance().unwrap_or(1.0)
}

fn max_level(metric: &Metric, beta: f64) -> usize {
    let u = unit(metric);
    let span = (2.0 * metric.total_distance() / u).max(1.0);
    (span.ln() / beta.ln()).ceil() as usize + 1
}

/// Coverage the oracle is guaranteed to reach when some tour covers `target` groups.
pub fn required_coverage(target: usize, profit_factor: f64) -> usize {
    if target == 0 {
        return 0;
    }
    ((target as f64 / profit_factor) - 1e-9).ceil().max(1.0) as usize
}

fn accounted(metric: &Metric, tau: &Tour, sigma: &Tour, pad: f64, groups: &[Vec<usize>], weights: &[f64]) -> f64 {
    let len_tau = tau.length(metric).max(pad);
    let a_tau = arrival_times(metric, tau, groups);
    let a_sigma = arrival_times(metric, sigma, groups);
    let cov_tau = covered_groups(tau, groups);
    let cov_sigma = covered_groups(sigma, groups);
    (0..groups.len())
        .map(|i| {
            let t = if cov_tau[i] {
                a_tau[i]
            } else if cov_sigma[i] {
                len_tau + a_sigma[i]
            } else {
                len_tau + sigma.length(metric)
            };
            weights[i] * t
        })
        .sum()
}

/// Runs the phase-and-unit-profit scheme for every `l` and keeps the least-latency tour that
/// covers at least [`required_coverage`] groups (ties go to the smaller `l`).
pub fn lpgst_solve(inst: &LpgstInstance, oracle: &dyn GsoOracle, config: &LpgstConfig) -> Result<LpgstSolution> {
    config.validate()?;
    let g = inst.groups.len();
    if inst.weights.len() != g {
        return Err(Error::Malformed("one weight per group is required".into()));
    }
    if inst.target > g {
        return Err(Error::Malformed(format!("target {} exceeds the {} groups", inst.target, g)));
    }
    let root = inst.root;
    let metric = inst.metric;
    if inst.target == 0 {
        let tour = Tour::trivial(root);
        let lat = latency(metric, &tour, inst.groups, &inst.weights);
        let covered = covered_groups(&tour, inst.groups).iter().filter(|&&c| c).count();
        return Ok(LpgstSolution { tour, latency: lat, accounted_latency: lat, l: 0, covered });
    }
    let (a, b) = oracle.factors();
    let rho = config.rho.unwrap_or(b);
    let need = required_coverage(inst.target, a);
    let u = unit(metric);
    let top = config.max_l.unwrap_or_else(|| max_level(metric, config.beta));
    let positive: Vec<bool> = inst.weights.iter().map(|&w| w > 0.0).collect();

    // tau_prefix[l] = tau^(1) ∘ ... ∘ tau^(l); phase budgets do not depend on l
    let mut tau_prefix = vec![Tour::trivial(root)];
    let mut covered = covered_groups(&tau_prefix[0], inst.groups);
    for i in 1..=top {
        let prev = tau_prefix[i - 1].clone();
        let done = (0..g).all(|k| covered[k] || !positive[k]);
        if done {
            tau_prefix.push(prev);
            continue;
        }
        let profits: Vec<f64> = (0..g).map(|k| if covered[k] { 0.0 } else { inst.weights[k] }).collect();
        let phase = oracle.solve(&GsoInstance {
            metric,
            root,
            groups: inst.groups,
            profits,
            budget: u * config.beta.powi(i as i32 + 1),
        })?;
        for (k, c) in covered_groups(&phase, inst.groups).into_iter().enumerate() {
            covered[k] |= c;
        }
        tau_prefix.push(prev.concat(&phase));
    }

    let mut best: Option<LpgstSolution> = None;
    for l in 0..=top {
        let budget = u * config.beta.powi(l as i32);
        let sigma = oracle.solve(&GsoInstance {
            metric,
            root,
            groups: inst.groups,
            profits: vec![1.0; g],
            budget,
        })?;
        let tau = &tau_prefix[l];
        let pi = tau.concat(&sigma);
        let count = covered_groups(&pi, inst.groups).iter().filter(|&&c| c).count();
        if count < need {
            continue;
        }
        let lat = latency(metric, &pi, inst.groups, &inst.weights);
        let acc = accounted(metric, tau, &sigma, rho * budget, inst.groups, &inst.weights);
        let improves = match &best {
            None => true,
            Some(b) => lat < b.latency && !approx_le(b.latency, lat),
        };
        if improves {
            best = Some(LpgstSolution { tour: pi, latency: lat, accounted_latency: acc.max(lat), l, covered: count });
        }
    }
    best.ok_or_else(|| {
        Error::Infeasible(format!(
            "no guess l in 0..={top} produced a tour covering {need} of {g} groups (target {})",
            inst.target
        ))
    })
}

/// Full-coverage latency group Steiner: phases with growing budgets until every group is
/// covered. Positive-weight groups are pursued by weight, zero-weight groups afterwards by
/// unit profit. The first budget level is swept and the least-latency tour kept (ties go to
/// the lower level); levels whose first phase already covers everything end the sweep.
pub fn latency_gst_solve(
    metric: &Metric,
    root: usize,
    groups: &[Vec<usize>],
    weights: &[f64],
    oracle: &dyn GsoOracle,
    beta: f64,
) -> Result<Tour> {
    if groups.len() != weights.len() {
        return Err(Error::Malformed("one weight per group is required".into()));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::Infeasible(format!("group {i} is empty and cannot be reached")));
    }
    if !(beta > 1.0) {
        return Err(Error::Malformed(format!("beta must exceed 1, got {beta}")));
    }
    let mut best: Option<(f64, Tour)> = None;
    for start in 1..=max_level(metric, beta) as i32 {
        let (tour, one_phase) = doubling_from(metric, root, groups, weights, oracle, beta, start)?;
        let lat = latency(metric, &tour, groups, weights);
        if best.as_ref().is_none_or(|(b, _)| lat < *b && !approx_le(*b, lat)) {
            best = Some((lat, tour));
        }
        if one_phase {
            break;
        }
    }
    Ok(best.expect("at least one level is tried").1)
}

/// Doubling phases with budgets `u·β^(start+1)`, `u·β^(start+2)`, ...; also reports whether
/// a single phase sufficed.
fn doubling_from(
    metric: &Metric,
    root: usize,
    groups: &[Vec<usize>],
    weights: &[f64],
    oracle: &dyn GsoOracle,
    beta: f64,
    start: i32,
) -> Result<(Tour, bool)> {
    let g = groups.len();
    let u = unit(metric);
    let saturate = 2.0 * metric.total_distance() + u;
    let mut tour = Tour::trivial(root);
    let mut covered = covered_groups(&tour, groups);
    let mut phases = 0;
    let mut i = start;
    loop {
        let pending_weighted = (0..g).any(|k| !covered[k] && weights[k] > 0.0);
        let pending = covered.iter().any(|c| !c);
        if !pending {
            return Ok((tour, phases <= 1));
        }
        let budget = u * beta.powi(i + 1);
        let profits: Vec<f64> = (0..g)
            .map(|k| match (covered[k], pending_weighted) {
                (true, _) => 0.0,
                (false, true) => weights[k],
                (false, false) => 1.0,
            })
            .collect();
        let phase = oracle.solve(&GsoInstance { metric, root, groups, profits, budget })?;
        let hit = covered_groups(&phase, groups);
        if budget > 4.0 * saturate && hit.iter().all(|c| !c) {
            return Err(Error::Infeasible("the oracle stopped making progress on the remaining groups".into()));
        }
        for (k, c) in hit.into_iter().enumerate() {
            covered[k] |= c;
        }
        tour = tour.concat(&phase);
        phases += 1;
        i += 1;
    }
}
