//! Benchmark fixtures: fixed seeded instances shared by the criterion benches.

use adaptcover::instances::{MetricShape, ProbSkew};
use adaptcover::odt::OdtRandomParams;
use adaptcover::{gen_odt_random, gen_random, CoverInstance, Objective, OdtInstance, RandomParams};

/// Seeded random cover instance for `objective` on `n` vertices with `m` scenarios.
pub fn cover(seed: u64, n: usize, m: usize, objective: Objective, star: bool) -> CoverInstance {
    let params = RandomParams {
        shape: if star { MetricShape::Star } else { MetricShape::Graph },
        skew: ProbSkew::Random,
        objective,
        ..RandomParams::default()
    };
    gen_random(seed, n, m, &params).expect("fixture parameters are valid")
}

/// Seeded random decision tree instance with some multiway tests.
pub fn odt(seed: u64, diseases: usize, tests: usize) -> OdtInstance {
    gen_odt_random(seed, diseases, tests, &OdtRandomParams::default()).expect("fixture parameters are valid")
}

/// `(label, n, m)` sizes used by the solver benches.
pub const SIZES: &[(&str, usize, usize)] = &[("n8_m6", 8, 6), ("n12_m10", 12, 10), ("n16_m16", 16, 16)];
