//! Property tests over seeded random instances.

mod common;

use adaptcover::format::{CoverDoc, StrategyDoc};
use adaptcover::gso::{ExactGso, GsoOracle};
use adaptcover::instances::{MetricShape, ProbSkew, RandomParams};
use adaptcover::metric::held_karp;
use adaptcover::odt::{odt_to_isolation, OdtRandomParams};
use adaptcover::oracle::{opt_gso_exact, opt_lpgst_exact, opt_odt_exact};
use adaptcover::{
    adaptrp_solve_traced, adaptsp_solve, check_feasible, eval_adaptrp, eval_adaptsp, eval_isolation,
    eval_test_strategy, gen_odt_random, gen_random, iso_solve_traced, lpgst_solve, odt_solve, CoverInstance,
    Document, GsoInstance, LpgstConfig, LpgstInstance, Metric, Objective, OracleChoice, OracleLimits,
};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn instance(seed: u64, n: usize, m: usize, objective: Objective, star: bool) -> CoverInstance {
    let params = RandomParams {
        shape: if star { MetricShape::Star } else { MetricShape::Graph },
        skew: common::skew_for(seed),
        objective,
        ..RandomParams::default()
    };
    gen_random(seed, n, m.min(1 << n), &params).unwrap()
}

fn config() -> LpgstConfig {
    LpgstConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closure_is_a_metric(n in 1usize..9, edges in prop::collection::vec((0usize..9, 0usize..9, 1u32..20), 0..20)) {
        let mut all: Vec<(usize, usize, f64)> = (1..n).map(|v| (v - 1, v, 5.0)).collect();
        all.extend(edges.into_iter().filter(|e| e.0 < n && e.1 < n).map(|(a, b, w)| (a, b, w as f64)));
        let metric = Metric::closure(n, &all).unwrap();
        prop_assert!(Metric::validate(&metric.rows()).is_ok());
    }

    #[test]
    fn held_karp_beats_every_order(seed in any::<u64>(), n in 2usize..7) {
        let inst = instance(seed, n, 1, Objective::AdapTsp, false);
        let set: Vec<usize> = (1..n).collect();
        let (order, len) = held_karp(&inst.metric, 0, &set);
        let mut walk = vec![0];
        walk.extend(&order);
        walk.push(0);
        prop_assert!((inst.metric.walk_length(&walk) - len).abs() <= TOL * len.max(1.0));
        let mut plain = vec![0];
        plain.extend(&set);
        plain.push(0);
        prop_assert!(len <= inst.metric.walk_length(&plain) + TOL);
    }

    #[test]
    fn isolation_partitions_and_feasibility(seed in any::<u64>(), n in 2usize..9, m in 1usize..8, star in any::<bool>()) {
        let inst = instance(seed, n, m, Objective::Isolation, star);
        let oracle = OracleChoice::Auto.build();
        let run = iso_solve_traced(&inst, oracle.as_ref(), &config()).unwrap();
        for phase in &run.phases {
            let mut all: Vec<usize> = phase.parts.concat();
            all.sort_unstable();
            let mut members = phase.sub.members().to_vec();
            members.sort_unstable();
            prop_assert_eq!(all, members);
        }
        prop_assert!(check_feasible(&inst, &run.tree, Objective::Isolation).is_feasible());
        let value = eval_isolation(&inst, &run.tree).unwrap();
        let opt = adaptcover::oracle::opt_isolation_exact(&inst, &OracleLimits::isolation()).unwrap().value;
        prop_assert!(value >= opt - TOL * opt.max(1.0));
    }

    #[test]
    fn adaptsp_within_isolation_plus_tours(seed in any::<u64>(), n in 2usize..9, m in 1usize..7) {
        let inst = instance(seed, n, m, Objective::AdapTsp, seed % 2 == 0);
        let oracle = OracleChoice::Auto.build();
        let iso = adaptcover::iso_solve(&inst, oracle.as_ref(), &config()).unwrap();
        let tsp = adaptsp_solve(&inst, oracle.as_ref(), &config()).unwrap();
        prop_assert!(check_feasible(&inst, &tsp, Objective::AdapTsp).is_feasible());
        let tours: f64 = (0..inst.num_scenarios())
            .map(|i| {
                let set: Vec<usize> = inst.dist.scenario(i).iter().copied().filter(|&v| v != 0).collect();
                inst.dist.prob(i) * held_karp(&inst.metric, 0, &set).1
            })
            .sum();
        let bound = eval_isolation(&inst, &iso).unwrap() + tours;
        prop_assert!(eval_adaptsp(&inst, &tsp).unwrap() <= bound + TOL * bound.max(1.0));
    }

    #[test]
    fn adaptrp_halves_and_is_feasible(seed in any::<u64>(), n in 2usize..8, m in 1usize..9) {
        let inst = instance(seed, n, m, Objective::AdapTrp, seed % 3 == 0);
        let oracle = OracleChoice::Auto.build();
        let run = adaptrp_solve_traced(&inst, oracle.as_ref(), &config()).unwrap();
        prop_assert!(check_feasible(&inst, &run.tree, Objective::AdapTrp).is_feasible());
        for phase in run.phases.iter().filter(|p| !p.truncation_fallback) {
            let cap = phase.state.sets.len().div_ceil(2);
            prop_assert!(phase.part_sizes.iter().all(|&s| s <= cap), "{:?}", phase.part_sizes);
        }
        prop_assert!(eval_adaptrp(&inst, &run.tree).unwrap() >= 0.0);
    }

    #[test]
    fn odt_solver_matches_reduction_and_oracle(seed in any::<u64>(), m in 1usize..7, n in 3usize..7) {
        let params = OdtRandomParams { skew: ProbSkew::Exponential, ..OdtRandomParams::default() };
        let odt = gen_odt_random(seed, m, n, &params).unwrap();
        let run = odt_solve(&odt, OracleChoice::Auto, &config()).unwrap();
        let value = eval_test_strategy(&odt, &run.strategy).unwrap();
        prop_assert_eq!(value, eval_isolation(&odt_to_isolation(&odt).unwrap().instance, &run.tree).unwrap());
        let (opt, _) = opt_odt_exact(&odt, &OracleLimits::odt()).unwrap();
        prop_assert!(value >= opt - TOL * opt.max(1.0));
    }

    #[test]
    fn exact_gso_matches_enumeration(seed in any::<u64>(), n in 2usize..7, budget in 0u32..40) {
        let inst = instance(seed, n, 3, Objective::Isolation, seed % 2 == 1);
        let groups = inst.dist.scenarios().to_vec();
        let profits: Vec<f64> = (0..groups.len()).map(|k| (k + 1) as f64).collect();
        let g = GsoInstance { metric: &inst.metric, root: 0, groups: &groups, profits, budget: budget as f64 };
        let tour = ExactGso::default().solve(&g).unwrap();
        let (best, _) = opt_gso_exact(&g, &OracleLimits::tours()).unwrap();
        prop_assert!(tour.length(&inst.metric) <= budget as f64 + TOL);
        prop_assert!((adaptcover::gso::profit(&g, &tour) - best).abs() <= TOL);
    }

    #[test]
    fn lpgst_covers_target_and_respects_optimum(seed in any::<u64>(), n in 2usize..7, target in 0usize..4) {
        let inst = instance(seed, n, 4, Objective::Isolation, false);
        let groups: Vec<Vec<usize>> = inst.dist.scenarios().iter().filter(|s| !s.is_empty()).cloned().collect();
        let target = target.min(groups.len());
        let lp = LpgstInstance {
            metric: &inst.metric,
            root: 0,
            groups: &groups,
            weights: inst.dist.probs()[..groups.len()].to_vec(),
            target,
        };
        let sol = lpgst_solve(&lp, &ExactGso::default(), &config()).unwrap();
        prop_assert!(sol.covered >= target);
        prop_assert!(sol.accounted_latency >= sol.latency - TOL);
        let (opt, _) = opt_lpgst_exact(&lp, &OracleLimits::tours()).unwrap();
        prop_assert!(sol.latency >= opt - TOL * opt.max(1.0));
    }

    #[test]
    fn documents_round_trip(seed in any::<u64>(), n in 1usize..8, m in 1usize..6) {
        let inst = instance(seed, n, m, Objective::Isolation, false);
        let text = Document::from(CoverDoc::from_instance(&inst)).to_json();
        let Document::Cover(back) = Document::parse(&text).unwrap() else { panic!("kind changed") };
        prop_assert_eq!(back.to_instance().unwrap(), inst.clone());
        let tree = adaptcover::iso_solve(&inst, OracleChoice::Auto.build().as_ref(), &config()).unwrap();
        let doc = Document::from(StrategyDoc { schema: 1, objective: Some(Objective::Isolation), tree: tree.clone() });
        let Document::Strategy(back) = Document::parse(&doc.to_json()).unwrap() else { panic!("kind changed") };
        prop_assert_eq!(back.tree, tree);
    }

    #[test]
    fn solvers_are_deterministic(seed in any::<u64>(), n in 2usize..8, m in 1usize..6) {
        let a = instance(seed, n, m, Objective::AdapTrp, false);
        let b = instance(seed, n, m, Objective::AdapTrp, false);
        prop_assert_eq!(&a, &b);
        let oracle = OracleChoice::Auto.build();
        let t1 = adaptrp_solve_traced(&a, oracle.as_ref(), &config()).unwrap().tree;
        let t2 = adaptrp_solve_traced(&b, oracle.as_ref(), &config()).unwrap().tree;
        prop_assert_eq!(t1, t2);
    }

    #[test]
    fn isolation_optimum_scales_with_distances(seed in any::<u64>(), n in 2usize..7, m in 1usize..6, lambda in 1u32..6) {
        let inst = instance(seed, n, m, Objective::Isolation, false);
        let rows: Vec<Vec<f64>> = inst.metric.rows().iter().map(|r| r.iter().map(|d| d * lambda as f64).collect()).collect();
        let scaled = CoverInstance { metric: Metric::new(rows).unwrap(), ..inst.clone() };
        let limits = OracleLimits::isolation();
        let a = adaptcover::oracle::opt_isolation_exact(&inst, &limits).unwrap().value;
        let b = adaptcover::oracle::opt_isolation_exact(&scaled, &limits).unwrap().value;
        prop_assert!((b - lambda as f64 * a).abs() <= TOL * b.max(1.0));
    }
}
