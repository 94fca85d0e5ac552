//! Ratio bounds with measured per-phase constants.
//!
//! The asymptotic guarantees hide their constants, so the bounds here plug in constants
//! measured on the run itself against exact optima of each phase's sub-instance.

use crate::adaptrp::TrpRun;
use crate::error::Result;
use crate::instances::{CoverInstance, Objective};
use crate::isolation::IsolationRun;
use crate::metric::approx_eq;
use crate::oracle::{opt_exact, OracleLimits};

/// `value / opt`, with `0 / 0 = 1`.
pub fn ratio(value: f64, opt: f64) -> f64 {
    if approx_eq(opt, 0.0) {
        if approx_eq(value, 0.0) {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        value / opt
    }
}

/// Number of halvings by 7/8 needed to get from `m` scenarios down to one.
pub fn log_eighths(m: usize) -> f64 {
    (m.max(1) as f64).ln() / (8.0f64 / 7.0).ln()
}

/// Isolation bound `2·ρ·log_{8/7}(m)`.
pub fn isolation_bound(rho: f64, m: usize) -> f64 {
    2.0 * rho * log_eighths(m)
}

/// Repairman bound `c·(⌈log₂ m⌉ + 1)`: one term per halving level plus the base case.
pub fn trp_bound(c: f64, m: usize) -> f64 {
    let levels = (m.max(1) as f64).log2().ceil();
    c * (levels + 1.0)
}

/// Largest ratio of a partition tour's latency to the isolation optimum of the sub-instance
/// it was built for; at least 1.
pub fn isolation_phase_constant(inst: &CoverInstance, run: &IsolationRun, limits: &OracleLimits) -> Result<f64> {
    let mut worst = 1.0f64;
    for phase in &run.phases {
        let sub = inst.restricted(&phase.sub).with_objective(Objective::Isolation);
        let opt = opt_exact(&sub, Objective::Isolation, limits)?.value;
        worst = worst.max(ratio(phase.tour_latency, opt));
    }
    Ok(worst)
}

/// Largest ratio of a step's accrued latency to the repairman optimum of its state; at least 1.
pub fn trp_phase_constant(inst: &CoverInstance, run: &TrpRun, limits: &OracleLimits) -> Result<f64> {
    let mut worst = 1.0f64;
    for phase in &run.phases {
        let state = phase.state.to_instance(inst).with_objective(Objective::AdapTrp);
        let opt = opt_exact(&state, Objective::AdapTrp, limits)?.value;
        worst = worst.max(ratio(phase.step_latency, opt));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert_eq!(ratio(0.0, 0.0), 1.0);
        assert_eq!(ratio(1.0, 0.0), f64::INFINITY);
        assert_eq!(isolation_bound(1.0, 1), 0.0);
        assert!((log_eighths(8) * (8.0f64 / 7.0).ln() - 8.0f64.ln()).abs() < 1e-12);
        assert_eq!(trp_bound(2.0, 1), 2.0);
        assert_eq!(trp_bound(2.0, 4), 6.0);
        assert_eq!(trp_bound(1.0, 5), 4.0);
    }
}
