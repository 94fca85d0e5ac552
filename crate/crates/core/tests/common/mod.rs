#![allow(dead_code)]

use std::io::Write;

use adaptcover::instances::{MetricShape, ProbSkew, RandomParams};
use adaptcover::{gen_random, CoverInstance, Objective};

/// Writes straight to stderr so the line shows even when the harness captures output.
pub fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

pub fn skew_for(seed: u64) -> ProbSkew {
    match seed % 3 {
        0 => ProbSkew::Random,
        1 => ProbSkew::Exponential,
        _ => ProbSkew::Uniform,
    }
}

/// Seeded random instance with `n` in `lo_n..=hi_n` and `m` in `lo_m..=hi_m`, clamped so that
/// `m <= 2^n`.
pub fn random_instance(
    seed: u64,
    (lo_n, hi_n): (usize, usize),
    (lo_m, hi_m): (usize, usize),
    objective: Objective,
) -> CoverInstance {
    let n = lo_n + (seed as usize * 7 + 3) % (hi_n - lo_n + 1);
    let m = (lo_m + (seed as usize * 5 + 1) % (hi_m - lo_m + 1)).min(1 << n);
    let params = RandomParams {
        shape: if seed % 5 == 4 { MetricShape::Star } else { MetricShape::Graph },
        skew: skew_for(seed),
        objective,
        ..RandomParams::default()
    };
    gen_random(seed, n, m, &params).expect("valid random parameters")
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        (xs[k / 2 - 1] + xs[k / 2]) / 2.0
    }
}
