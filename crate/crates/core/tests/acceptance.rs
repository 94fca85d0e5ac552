//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line and then asserts.

mod common;

use std::time::{Duration, Instant};

use adaptcover::analysis::{isolation_bound, isolation_phase_constant, ratio, trp_bound, trp_phase_constant};
use adaptcover::gso::{profit, ExactGso, GsoInstance, GsoOracle, StarGso};
use adaptcover::instances::{gst_to_adaptsp, MetricShape, ProbSkew, RandomParams};
use adaptcover::metric::held_karp;
use adaptcover::odt::{odt_to_isolation, strategy_from_isolation, OdtRandomParams};
use adaptcover::oracle::{
    opt_adaptrp_exact, opt_adaptsp_exact, opt_exact, opt_gst_exact, opt_isolation_exact, opt_odt_exact,
    unrestricted_value,
};
use adaptcover::{
    adaptrp_solve_traced, adaptsp_solve, check_feasible, eval_adaptrp, eval_adaptsp, eval_isolation,
    eval_test_strategy, evaluate, gen_odt_random, gen_random, gen_trp_star, iso_solve_traced, odt_solve, GstInstance,
    LpgstConfig, Metric, Objective, OdtInstance, OdtTest, OracleChoice, OracleLimits,
};
use common::{median, random_instance, report};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn verdict(id: u32, name: &str, failures: &[String], detail: &str, elapsed: Duration, limit: Duration) {
    let ok = failures.is_empty() && elapsed < limit;
    report(&format!(
        "[{}] criterion {id:>2} {name}: {detail} ({:.2} s, limit {} s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    ));
    for f in failures.iter().take(5) {
        report(&format!("       {f}"));
    }
    assert!(failures.is_empty(), "{} failures, first: {}", failures.len(), failures[0]);
    assert!(elapsed < limit, "took {elapsed:?}, limit {limit:?}");
}

fn config() -> LpgstConfig {
    LpgstConfig::default()
}

#[test]
fn c01_partition_parts_shrink_by_seven_eighths() {
    let start = Instant::now();
    let oracle = OracleChoice::Auto.build();
    let mut failures = Vec::new();
    let mut checked = 0usize;
    for seed in 0..200 {
        let inst = random_instance(seed, (3, 10), (2, 8), Objective::Isolation);
        let run = match iso_solve_traced(&inst, oracle.as_ref(), &config()) {
            Ok(run) => run,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        for phase in &run.phases {
            let cap = (7 * phase.sub.len()).div_ceil(8);
            for &size in &phase.part_sizes {
                checked += 1;
                if size > cap {
                    failures.push(format!("seed {seed}: part of size {size} from {} scenarios", phase.sub.len()));
                }
            }
        }
    }
    verdict(
        1,
        "partition size bound",
        &failures,
        &format!("200 instances, {checked} parts"),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn c02_isolation_ratio_within_measured_bound() {
    let start = Instant::now();
    let exact = ExactGso::default();
    let limits = OracleLimits::isolation();
    let mut failures = Vec::new();
    let mut ratios = Vec::new();
    let mut worst_rho = 1.0f64;
    for seed in 0..100 {
        let inst = random_instance(1000 + seed, (3, 8), (1, 6), Objective::Isolation);
        let run = iso_solve_traced(&inst, &exact, &config()).unwrap();
        let value = eval_isolation(&inst, &run.tree).unwrap();
        let opt = opt_isolation_exact(&inst, &limits).unwrap().value;
        let rho = isolation_phase_constant(&inst, &run, &limits).unwrap();
        worst_rho = worst_rho.max(rho);
        let r = ratio(value, opt);
        let m = inst.num_scenarios();
        let bound = isolation_bound(rho, m);
        if m > 1 {
            ratios.push(r);
        }
        if m > 1 && r > bound + TOL {
            failures.push(format!("seed {seed}: ratio {r:.4} > bound {bound:.4} (rho {rho:.3}, m {m})"));
        }
        if m == 1 && value > TOL {
            failures.push(format!("seed {seed}: single scenario costs {value}"));
        }
    }
    let med = median(ratios.clone());
    if med > 4.0 {
        failures.push(format!("median ratio {med:.4} exceeds 4"));
    }
    let max = ratios.iter().copied().fold(1.0, f64::max);
    verdict(
        2,
        "isolation ratio",
        &failures,
        &format!("100 instances, median ratio {med:.4}, max ratio {max:.4}, max rho_eff {worst_rho:.3}"),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn c03_isolation_below_adaptsp_and_solver_above_optimum() {
    let start = Instant::now();
    let oracle = OracleChoice::Auto.build();
    let mut failures = Vec::new();
    let mut feasible = 0;
    for seed in 0..100 {
        let inst = random_instance(1000 + seed, (3, 8), (1, 6), Objective::AdapTsp);
        let iso = opt_isolation_exact(&inst, &OracleLimits::isolation()).unwrap().value;
        let tsp = opt_adaptsp_exact(&inst, &OracleLimits::adaptsp()).unwrap().value;
        if iso > tsp + TOL * tsp.max(1.0) {
            failures.push(format!("seed {seed}: isolation optimum {iso} above adaptive TSP optimum {tsp}"));
        }
        let lower: f64 = (0..inst.num_scenarios())
            .map(|i| {
                let set: Vec<usize> = inst.dist.scenario(i).iter().copied().filter(|&v| v != inst.root).collect();
                inst.dist.prob(i) * held_karp(&inst.metric, inst.root, &set).1
            })
            .sum();
        if lower > tsp + TOL * tsp.max(1.0) {
            failures.push(format!("seed {seed}: per-scenario tour bound {lower} above optimum {tsp}"));
        }
        let tree = adaptsp_solve(&inst, oracle.as_ref(), &config()).unwrap();
        if check_feasible(&inst, &tree, Objective::AdapTsp).is_feasible() {
            feasible += 1;
        }
        match eval_adaptsp(&inst, &tree) {
            Ok(v) if v < tsp - TOL => failures.push(format!("seed {seed}: solver {v} beats optimum {tsp}")),
            Ok(_) => {}
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    verdict(
        3,
        "isolation vs adaptive TSP ordering",
        &failures,
        &format!("100 instances, feasibility {feasible}/100"),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn c04_subadditivity_over_produced_partitions() {
    let start = Instant::now();
    let oracle = OracleChoice::Auto.build();
    let limits = OracleLimits::isolation();
    let mut failures = Vec::new();
    let mut phases = 0;
    for seed in 0..50 {
        let inst = random_instance(2000 + seed, (3, 8), (2, 6), Objective::Isolation);
        let run = iso_solve_traced(&inst, oracle.as_ref(), &config()).unwrap();
        for phase in &run.phases {
            phases += 1;
            let whole = opt_isolation_exact(&inst.restricted(&phase.sub), &limits).unwrap().value;
            let mut sum = 0.0;
            for part in phase.parts.iter().filter(|p| !p.is_empty()) {
                let q = phase.sub.mass(part);
                let sub = phase.sub.restrict(part);
                sum += q * opt_isolation_exact(&inst.restricted(&sub), &limits).unwrap().value;
            }
            if sum > whole + TOL {
                failures.push(format!("seed {seed} depth {}: parts {sum} > whole {whole}", phase.depth));
            }
        }
    }
    verdict(
        4,
        "subadditivity",
        &failures,
        &format!("50 instances, {phases} partitions"),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn c05_star_gso_reaches_one_minus_inverse_e() {
    let start = Instant::now();
    let star = StarGso::default();
    let exact = ExactGso::default();
    let factor = 1.0 - (-1.0f64).exp();
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..100 {
        let leaves = rng.gen_range(1..=12);
        let weights: Vec<f64> = (0..leaves).map(|_| rng.gen_range(1..=10) as f64).collect();
        let metric = Metric::star(&weights).unwrap();
        let n = leaves + 1;
        let groups: Vec<Vec<usize>> = (0..rng.gen_range(1..=6))
            .map(|_| {
                let mut g: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
                if g.is_empty() {
                    g.push(rng.gen_range(1..n));
                }
                g
            })
            .collect();
        let profits: Vec<f64> = groups.iter().map(|_| rng.gen_range(1..=10) as f64).collect();
        let total: f64 = weights.iter().sum();
        let budget = rng.gen_range(0.0..=2.0 * total).round();
        let inst = GsoInstance { metric: &metric, root: 0, groups: &groups, profits, budget };
        let got = star.solve(&inst).unwrap();
        let best = exact.solve(&inst).unwrap();
        if got.length(&metric) > budget + TOL * budget.max(1.0) {
            failures.push(format!("instance {k}: star tour exceeds the budget"));
        }
        let (p, opt) = (profit(&inst, &got), profit(&inst, &best));
        if opt > 0.0 {
            worst = worst.min(p / opt);
        }
        if p < factor * opt - TOL {
            failures.push(format!("instance {k}: profit {p} < (1-1/e)·{opt}"));
        }
    }
    verdict(
        5,
        "star GSO guarantee",
        &failures,
        &format!("100 stars, worst profit ratio {worst:.4}"),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn c06_odt_gap_within_measured_bound() {
    let start = Instant::now();
    let limits = OracleLimits { max_vertices: 64, ..OracleLimits::isolation() };
    let mut failures = Vec::new();
    let mut ratios = Vec::new();
    let mut worst_rho = 1.0f64;
    for seed in 0..100u64 {
        let m = 2 + seed as usize % 5;
        let n = 2 + (seed as usize / 5) % 5;
        let params = OdtRandomParams {
            skew: match seed % 3 {
                0 => ProbSkew::Exponential,
                1 => ProbSkew::Random,
                _ => ProbSkew::Uniform,
            },
            ..OdtRandomParams::default()
        };
        let Ok(odt) = gen_odt_random(seed, m, n.max(m.ilog2() as usize + 1), &params) else {
            failures.push(format!("seed {seed}: generator failed"));
            continue;
        };
        let red = odt_to_isolation(&odt).unwrap();
        let run = iso_solve_traced(&red.instance, OracleChoice::Auto.build().as_ref(), &config()).unwrap();
        let strategy = strategy_from_isolation(&run.tree, &odt, &red).unwrap();
        let value = eval_test_strategy(&odt, &strategy).unwrap();
        let (opt, _) = opt_odt_exact(&odt, &OracleLimits::odt()).unwrap();
        let rho = isolation_phase_constant(&red.instance, &run, &limits).unwrap();
        worst_rho = worst_rho.max(rho);
        let r = ratio(value, opt);
        ratios.push(r);
        let bound = isolation_bound(rho, m);
        if r > bound + TOL {
            failures.push(format!("seed {seed}: ratio {r:.4} > bound {bound:.4}"));
        }
    }
    // the ODT analogue of the three-vertex paper star: leaves at 2 and 4 become tests of cost 4 and 8
    let star = OdtInstance::new(
        vec![0.5, 0.25, 0.25],
        vec![OdtTest::binary(4.0, vec![0]), OdtTest::binary(8.0, vec![1])],
    )
    .unwrap();
    let run = odt_solve(&star, OracleChoice::Auto, &config()).unwrap();
    let star_value = eval_test_strategy(&star, &run.strategy).unwrap();
    let star_opt = opt_odt_exact(&star, &OracleLimits::odt()).unwrap().0;
    if star_value != 8.0 || star_opt != 8.0 {
        failures.push(format!("paper-star analogue: solver {star_value}, oracle {star_opt}, expected 8"));
    }
    let med = median(ratios.clone());
    let max = ratios.iter().copied().fold(1.0, f64::max);
    verdict(
        6,
        "ODT optimality gap",
        &failures,
        &format!("100 instances, median ratio {med:.4}, max ratio {max:.4}, max rho_star {worst_rho:.3}, star analogue {star_value}"),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn c07_reduction_preserves_cost_exactly() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut multiway = 0;
    for seed in 0..100u64 {
        let m = 2 + seed as usize % 7;
        let n = 3 + (seed as usize / 7) % 5;
        let params = OdtRandomParams { multiway: 0.5, max_outcomes: 4, ..OdtRandomParams::default() };
        let odt = gen_odt_random(7000 + seed, m, n, &params).unwrap();
        if odt.tests.iter().any(|t| t.outcomes() > 2) {
            multiway += 1;
        }
        let run = odt_solve(&odt, OracleChoice::Auto, &config()).unwrap();
        let iso = eval_isolation(&run.reduction.instance, &run.tree).unwrap();
        let test = eval_test_strategy(&odt, &run.strategy).unwrap();
        if iso != test {
            failures.push(format!("seed {seed}: isolation {iso} vs test strategy {test}"));
        }
    }
    verdict(
        7,
        "reduction cost identity",
        &failures,
        &format!("100 reductions, {multiway} with multiway tests"),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn c08_hardness_sandwich() {
    let start = Instant::now();
    let tol = 1e-6;
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_gap = 0.0f64;
    for k in 0..25u64 {
        let n = rng.gen_range(3..=6);
        let params = RandomParams { shape: MetricShape::Graph, max_weight: 5, ..RandomParams::default() };
        let metric = gen_random(800 + k, n, 1, &params).unwrap().metric;
        let g = rng.gen_range(1..=3);
        let mut groups: Vec<Vec<usize>> = Vec::new();
        while groups.len() < g {
            let grp: Vec<usize> = (1..n).filter(|_| rng.gen_bool(0.4)).collect();
            if !grp.is_empty() && !groups.contains(&grp) {
                groups.push(grp);
            }
        }
        let gst = GstInstance::new(metric, 0, groups).unwrap();
        let opt = opt_gst_exact(&gst, &OracleLimits::tours()).unwrap().0;
        for scale in [None, Some(1e9)] {
            let red = gst_to_adaptsp(&gst, scale).unwrap();
            let l = 1.0 / red.dist.probs().last().map(|p| 1.0 - p).unwrap();
            let reduced = opt_adaptsp_exact(&red, &OracleLimits::adaptsp()).unwrap().value;
            // the lower side holds up to the mass 1/L of the group scenarios
            let lower = if scale.is_some() { opt } else { (1.0 - 1.0 / l) * opt };
            if reduced < lower - tol || reduced > opt + 1.0 + tol {
                failures.push(format!("instance {k} (L = {l:.3e}): {opt} vs reduced {reduced}"));
            }
            worst_gap = worst_gap.max(reduced - opt);
        }
    }
    verdict(
        8,
        "hardness sandwich",
        &failures,
        &format!("25 instances, largest Opt' - Opt {worst_gap:.4}"),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn c09_adaptrp_star_and_measured_bound() {
    let start = Instant::now();
    let oracle = OracleChoice::Auto.build();
    let mut failures = Vec::new();
    let star = gen_trp_star(16).unwrap();
    let run = adaptrp_solve_traced(&star, oracle.as_ref(), &config()).unwrap();
    let star_value = eval_adaptrp(&star, &run.tree).unwrap();
    if star_value > 8.0 {
        failures.push(format!("repairman star value {star_value} > 8"));
    }
    let limits = OracleLimits::adaptrp();
    let mut feasible = 0;
    let mut worst = 0.0f64;
    let total = 100;
    for seed in 0..total {
        let inst = random_instance(9000 + seed, (3, 7), (1, 4), Objective::AdapTrp);
        let run = adaptrp_solve_traced(&inst, oracle.as_ref(), &config()).unwrap();
        if check_feasible(&inst, &run.tree, Objective::AdapTrp).is_feasible() {
            feasible += 1;
        } else {
            failures.push(format!("seed {seed}: infeasible strategy"));
            continue;
        }
        let value = eval_adaptrp(&inst, &run.tree).unwrap();
        let opt = opt_adaptrp_exact(&inst, &limits).unwrap().value;
        let c = trp_phase_constant(&inst, &run, &limits).unwrap();
        let r = ratio(value, opt);
        worst = worst.max(r / trp_bound(c, inst.num_scenarios()));
        if r > trp_bound(c, inst.num_scenarios()) + TOL {
            failures.push(format!("seed {seed}: ratio {r:.4} > bound {:.4}", trp_bound(c, inst.num_scenarios())));
        }
    }
    verdict(
        9,
        "adaptive repairman",
        &failures,
        &format!(
            "star(16) value {star_value:.4}, feasibility {feasible}/{total}, largest ratio/bound {worst:.3}"
        ),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn c10_oracle_closed_loop() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut compared = 0;
    let mut exact_checked = 0;
    for seed in 0..120u64 {
        let objective = [Objective::Isolation, Objective::AdapTsp, Objective::AdapTrp][seed as usize % 3];
        let dyadic = seed % 4 == 0;
        let inst = if dyadic {
            let n = 2 + seed as usize % 4;
            let m = [1usize, 2, 4][seed as usize % 3].min(1 << n);
            let params = RandomParams { skew: ProbSkew::Uniform, objective, ..RandomParams::default() };
            gen_random(10_000 + seed, n, m, &params).unwrap()
        } else {
            random_instance(10_000 + seed, (2, 6), (1, 4), objective)
        };
        let limits = OracleLimits::for_objective(objective);
        let res = opt_exact(&inst, objective, &limits).unwrap();
        let report = check_feasible(&inst, &res.tree, objective);
        if !report.is_feasible() {
            failures.push(format!("seed {seed}: witness infeasible for {objective}"));
            continue;
        }
        let back = evaluate(&inst, &res.tree, objective).unwrap();
        if dyadic {
            exact_checked += 1;
            if back != res.value {
                failures.push(format!("seed {seed}: witness {back} != oracle {} ({objective})", res.value));
            }
        } else if (back - res.value).abs() > TOL * res.value.abs().max(1.0) {
            failures.push(format!("seed {seed}: witness {back} vs oracle {} ({objective})", res.value));
        }
        if inst.metric.len() <= 5 && inst.num_scenarios() <= 3 {
            compared += 1;
            let free = unrestricted_value(&inst, objective).unwrap();
            if (free - res.value).abs() > TOL * res.value.abs().max(1.0) {
                failures.push(format!("seed {seed}: unrestricted {free} vs restricted {} ({objective})", res.value));
            }
        }
    }
    for seed in 0..40u64 {
        let params = OdtRandomParams::default();
        let odt = gen_odt_random(11_000 + seed, 2 + seed as usize % 5, 4, &params).unwrap();
        let (value, tree) = opt_odt_exact(&odt, &OracleLimits::odt()).unwrap();
        let back = eval_test_strategy(&odt, &tree).unwrap();
        if (back - value).abs() > TOL * value.max(1.0) {
            failures.push(format!("odt seed {seed}: witness {back} vs oracle {value}"));
        }
    }
    verdict(
        10,
        "oracle closed loop",
        &failures,
        &format!("120 cover + 40 ODT oracles, {exact_checked} bit-exact, {compared} unrestricted comparisons"),
        start.elapsed(),
        Duration::from_secs(120),
    );
}
