//! `adaptcover`: solve, evaluate, generate and walk adaptive covering instances.

mod walk;

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use adaptcover::analysis::{isolation_bound, isolation_phase_constant, ratio, trp_bound, trp_phase_constant};
use adaptcover::format::{CoverDoc, OdtDoc, StrategyDoc, TestStrategyDoc};
use adaptcover::instances::{default_hardness_scale, MetricShape, ProbSkew};
use adaptcover::metric::EXACT_TOUR_LIMIT;
use adaptcover::odt::{export_test_dot, test_strategy_costs, OdtInstance, OdtRandomParams};
use adaptcover::oracle::{opt_exact, opt_odt_exact};
use adaptcover::strategy::{export_dot, scenario_costs};
use adaptcover::{
    adaptrp_solve_traced, adaptsp_solve, check_feasible, gen_odt_random, gen_paper_star, gen_random, gen_trp_star,
    gst_to_adaptsp, iso_solve_traced, odt_solve, CoverInstance, Document, Error, LpgstConfig, Objective,
    OracleChoice, OracleLimits, RandomParams, RunReport, StrategyNode, SCHEMA_VERSION,
};
use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "adaptcover", version, about = "Adaptive covering solvers and exact oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Goal {
    Isolation,
    Adaptsp,
    Adaptrp,
    Odt,
}

impl Goal {
    fn cover(self) -> Option<Objective> {
        match self {
            Goal::Isolation => Some(Objective::Isolation),
            Goal::Adaptsp => Some(Objective::AdapTsp),
            Goal::Adaptrp => Some(Objective::AdapTrp),
            Goal::Odt => None,
        }
    }
}

#[derive(clap::Args)]
struct CheckArgs {
    /// Run the exact oracle and report ratio and bound.
    #[arg(long)]
    exact_check: bool,
    /// Oracle limits, e.g. `vertices=8,scenarios=6,seconds=30`; unset keys keep the defaults.
    #[arg(long, env = "ADAPTCOVER_LIMITS")]
    limits: Option<String>,
    /// Write the report here (atomically) in addition to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print a report.
    Solve {
        instance: PathBuf,
        /// Defaults to the objective stored in the instance.
        #[arg(long, value_enum)]
        objective: Option<Goal>,
        #[arg(long, default_value = "auto")]
        oracle: OracleChoice,
        #[arg(long, default_value_t = 1.25)]
        beta: f64,
        /// Recorded in the report.
        #[arg(long)]
        seed: Option<u64>,
        /// Strategy output file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Graphviz rendering of the strategy.
        #[arg(long)]
        dot_out: Option<PathBuf>,
        /// Include wall time in the report (makes it run-dependent).
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        check: CheckArgs,
    },
    /// Evaluate a strategy on an instance.
    Eval {
        instance: PathBuf,
        strategy: PathBuf,
        #[arg(long, value_enum)]
        objective: Option<Goal>,
        #[arg(long)]
        dot_out: Option<PathBuf>,
        #[command(flatten)]
        check: CheckArgs,
    },
    /// Generate an instance document.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
        /// Output file; stdout when absent.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Execute a strategy step by step, reading answers from a script or stdin.
    Walk {
        instance: PathBuf,
        strategy: PathBuf,
        #[arg(long, value_enum)]
        objective: Option<Goal>,
        /// One answer per line; stdin when absent.
        #[arg(long)]
        script: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Graph,
    Star,
}

#[derive(Clone, Copy, ValueEnum)]
enum Skew {
    Uniform,
    Random,
    Exponential,
}

impl From<Skew> for ProbSkew {
    fn from(s: Skew) -> Self {
        match s {
            Skew::Uniform => ProbSkew::Uniform,
            Skew::Random => ProbSkew::Random,
            Skew::Exponential => ProbSkew::Exponential,
        }
    }
}

#[derive(Subcommand)]
enum GenKind {
    /// Star with leaves at distance 2^i and singleton scenarios of probability 2^-i.
    PaperStar { n: usize },
    /// Repairman star with n unit leaves and one far leaf.
    TrpStar { n: usize },
    /// Seeded random cover instance.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "isolation")]
        objective: Goal,
        #[arg(long, value_enum, default_value = "graph")]
        shape: Shape,
        #[arg(long, value_enum, default_value = "random")]
        skew: Skew,
        #[arg(long, default_value_t = 10)]
        max_weight: u32,
        #[arg(long, default_value_t = 0.4)]
        demand: f64,
    },
    /// Adaptive TSP instance built from a group Steiner tree file.
    Hardness {
        gst: PathBuf,
        /// `auto` or a number at least `2 n max d`.
        #[arg(long, default_value = "auto")]
        scale: String,
    },
    /// Seeded random optimal decision tree instance.
    OdtRandom {
        #[arg(long)]
        diseases: usize,
        #[arg(long)]
        tests: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Probability that a test is multiway.
        #[arg(long, default_value_t = 0.3)]
        multiway: f64,
        #[arg(long, default_value_t = 4)]
        max_outcomes: usize,
        #[arg(long, default_value_t = 10)]
        max_cost: u32,
        #[arg(long, value_enum, default_value = "random")]
        skew: Skew,
    },
}

/// A failure with its process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidMetric(_) | Error::InvalidInstance(_) | Error::Malformed(_) => 2,
            Error::Infeasible(_) => 3,
            Error::LimitsExceeded(_) => 4,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure { code: 1, message: format!("{}: {e}", path.display()) }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { instance, objective, oracle, beta, seed, out, dot_out, timing, check } => {
            let opts = SolveOptions { objective, oracle, beta, seed, out, dot_out, timing };
            cmd_solve(&instance, &opts, &check)
        }
        Command::Eval { instance, strategy, objective, dot_out, check } => {
            cmd_eval(&instance, &strategy, objective, dot_out.as_deref(), &check)
        }
        Command::Gen { kind, out } => cmd_gen(kind, out.as_deref()),
        Command::Walk { instance, strategy, objective, script } => {
            cmd_walk(&instance, &strategy, objective, script.as_deref())
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_document(path: &Path) -> CliResult<Document> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    Document::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Writes through a sibling temporary file and a rename so readers never see a partial file.
fn write_atomic(path: &Path, text: &str) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| usage(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, text).map_err(|e| io_failure(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_failure(path, e)
    })
}

fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => write_atomic(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn digest(doc: &Document) -> String {
    hex::encode(Sha256::digest(doc.to_json().as_bytes()))
}

fn parse_limits(spec: Option<&str>, mut limits: OracleLimits) -> CliResult<OracleLimits> {
    let Some(spec) = spec else { return Ok(limits) };
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item.split_once('=').ok_or_else(|| usage(format!("limit {item:?} is not key=value")))?;
        let bad = || usage(format!("limit {key} has bad value {value:?}"));
        match key.trim() {
            "vertices" => limits.max_vertices = value.trim().parse().map_err(|_| bad())?,
            "scenarios" => limits.max_scenarios = value.trim().parse().map_err(|_| bad())?,
            "seconds" => {
                let s: f64 = value.trim().parse().map_err(|_| bad())?;
                limits.time_budget = Duration::try_from_secs_f64(s).map_err(|_| bad())?;
            }
            other => return Err(usage(format!("unknown limit {other:?}; use vertices, scenarios or seconds"))),
        }
    }
    Ok(OracleLimits::new(limits.max_vertices, limits.max_scenarios, limits.time_budget)?)
}

/// A parsed instance of either family.
enum Problem {
    Cover(CoverInstance),
    Odt(OdtInstance),
}

fn load_problem(path: &Path) -> CliResult<(Problem, String)> {
    let doc = read_document(path)?;
    let problem = match &doc {
        Document::Cover(d) => Problem::Cover(d.to_instance()?),
        Document::Odt(d) => Problem::Odt(d.to_instance()?),
        other => {
            return Err(usage(format!("{} holds a {} document, not an instance", path.display(), other.kind())))
        }
    };
    let canonical = match &problem {
        Problem::Cover(inst) => Document::from(CoverDoc::from_instance(inst)),
        Problem::Odt(odt) => Document::from(OdtDoc::from_instance(odt)),
    };
    Ok((problem, digest(&canonical)))
}

fn cover_objective(inst: &CoverInstance, goal: Option<Goal>) -> CliResult<Objective> {
    match goal {
        None => Ok(inst.objective),
        Some(g) => g.cover().ok_or_else(|| usage("objective odt needs an odt instance")),
    }
}

fn check_odt_goal(goal: Option<Goal>) -> CliResult<()> {
    match goal {
        None | Some(Goal::Odt) => Ok(()),
        Some(_) => Err(usage("an odt instance only supports objective odt")),
    }
}

fn base_report(digest: String, solver: &str, objective: String, value: f64) -> RunReport {
    RunReport {
        schema: SCHEMA_VERSION,
        instance_digest: digest,
        solver: solver.into(),
        objective,
        value,
        oracle_value: None,
        ratio: None,
        bound: None,
        wall_time_ms: None,
        seed: None,
        feasible: true,
        violations: Vec::new(),
        warnings: Vec::new(),
    }
}

fn publish(report: RunReport, path: Option<&Path>) -> CliResult<()> {
    let text = Document::Report(report).to_json();
    if let Some(p) = path {
        write_atomic(p, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn with_oracle(report: &mut RunReport, opt: f64, bound: Option<f64>) {
    report.oracle_value = Some(opt);
    report.ratio = Some(ratio(report.value, opt));
    report.bound = bound;
}

struct SolveOptions {
    objective: Option<Goal>,
    oracle: OracleChoice,
    beta: f64,
    seed: Option<u64>,
    out: Option<PathBuf>,
    dot_out: Option<PathBuf>,
    timing: bool,
}

fn cmd_solve(path: &Path, opts: &SolveOptions, check: &CheckArgs) -> CliResult<u8> {
    let (problem, digest) = load_problem(path)?;
    let config = LpgstConfig { beta: opts.beta, ..LpgstConfig::default() };
    config.validate()?;
    let oracle = opts.oracle.build();
    let started = Instant::now();
    let mut report = match problem {
        Problem::Cover(inst) => {
            let objective = cover_objective(&inst, opts.objective)?;
            let inst = inst.with_objective(objective);
            let limits = parse_limits(check.limits.as_deref(), OracleLimits::for_objective(objective))?;
            let m = inst.num_scenarios();
            // (tree, solver name, bound computed lazily from the traced run)
            let (tree, solver, bound): (StrategyNode, &str, Box<dyn Fn() -> CliResult<f64>>) = match objective {
                Objective::Isolation => {
                    let run = iso_solve_traced(&inst, oracle.as_ref(), &config)?;
                    let tree = run.tree.clone();
                    let inst = inst.clone();
                    let bound = move || Ok(isolation_bound(isolation_phase_constant(&inst, &run, &limits)?, m));
                    (tree, "iso_solve", Box::new(bound))
                }
                Objective::AdapTsp => {
                    let tree = adaptsp_solve(&inst, oracle.as_ref(), &config)?;
                    let run = iso_solve_traced(&inst, oracle.as_ref(), &config)?;
                    let tour_factor =
                        if inst.dist.scenarios().iter().any(|s| s.len() > EXACT_TOUR_LIMIT) { 2.0 } else { 1.0 };
                    let inst = inst.clone();
                    let bound = move || {
                        Ok(isolation_bound(isolation_phase_constant(&inst, &run, &limits)?, m) + tour_factor)
                    };
                    (tree, "adaptsp_solve", Box::new(bound))
                }
                Objective::AdapTrp => {
                    let run = adaptrp_solve_traced(&inst, oracle.as_ref(), &config)?;
                    let tree = run.tree.clone();
                    let inst = inst.clone();
                    let bound = move || Ok(trp_bound(trp_phase_constant(&inst, &run, &limits)?, m));
                    (tree, "adaptrp_solve", Box::new(bound))
                }
            };
            let value = adaptcover::evaluate(&inst, &tree, objective)?;
            let elapsed = started.elapsed();
            let mut report = base_report(digest, solver, objective.to_string(), value);
            report.warnings =
                check_feasible(&inst, &tree, objective).warnings.iter().map(|w| w.to_string()).collect();
            if check.exact_check {
                let opt = opt_exact(&inst, objective, &limits)?.value;
                with_oracle(&mut report, opt, Some(bound()?));
            }
            if let Some(p) = &opts.dot_out {
                write_atomic(p, &export_dot(&tree, inst.metric.labels()))?;
            }
            if let Some(p) = &opts.out {
                let doc = StrategyDoc { schema: SCHEMA_VERSION, objective: Some(objective), tree };
                write_atomic(p, &Document::from(doc).to_json())?;
            }
            report.wall_time_ms = opts.timing.then_some(elapsed.as_secs_f64() * 1e3);
            report
        }
        Problem::Odt(odt) => {
            check_odt_goal(opts.objective)?;
            let limits = parse_limits(check.limits.as_deref(), OracleLimits::odt())?;
            let run = odt_solve(&odt, opts.oracle, &config)?;
            let value = adaptcover::eval_test_strategy(&odt, &run.strategy)?;
            let elapsed = started.elapsed();
            let mut report = base_report(digest, "odt_solve", "odt".into(), value);
            if check.exact_check {
                let (opt, _) = opt_odt_exact(&odt, &limits)?;
                // the reduced star has one vertex per (test, outcome) pair
                let wide = OracleLimits::new(limits.max_vertices.max(64), limits.max_scenarios, limits.time_budget)?;
                let red = &run.reduction.instance;
                let traced = iso_solve_traced(red, oracle.as_ref(), &config)?;
                let rho = isolation_phase_constant(red, &traced, &wide)?;
                with_oracle(&mut report, opt, Some(isolation_bound(rho, odt.diseases())));
            }
            if let Some(p) = &opts.dot_out {
                write_atomic(p, &export_test_dot(&run.strategy))?;
            }
            if let Some(p) = &opts.out {
                let doc = TestStrategyDoc { schema: SCHEMA_VERSION, tree: run.strategy };
                write_atomic(p, &Document::from(doc).to_json())?;
            }
            report.wall_time_ms = opts.timing.then_some(elapsed.as_secs_f64() * 1e3);
            report
        }
    };
    report.seed = opts.seed;
    publish(report, check.report.as_deref())?;
    Ok(0)
}

fn cmd_eval(
    instance: &Path,
    strategy: &Path,
    goal: Option<Goal>,
    dot_out: Option<&Path>,
    check: &CheckArgs,
) -> CliResult<u8> {
    let (problem, digest) = load_problem(instance)?;
    let strategy_doc = read_document(strategy)?;
    let report = match (problem, strategy_doc) {
        (Problem::Cover(inst), Document::Strategy(doc)) => {
            let objective = match goal {
                Some(_) => cover_objective(&inst, goal)?,
                None => doc.objective.unwrap_or(inst.objective),
            };
            let feas = check_feasible(&inst, &doc.tree, objective);
            let costs = scenario_costs(&inst, &doc.tree, objective);
            let value = costs.iter().zip(inst.dist.probs()).map(|(c, p)| c * p).sum();
            let mut report = base_report(digest, "eval", objective.to_string(), value);
            report.feasible = feas.is_feasible();
            report.violations = feas.violations.iter().map(|v| v.to_string()).collect();
            report.warnings = feas.warnings.iter().map(|w| w.to_string()).collect();
            if check.exact_check && report.feasible {
                let limits = parse_limits(check.limits.as_deref(), OracleLimits::for_objective(objective))?;
                with_oracle(&mut report, opt_exact(&inst, objective, &limits)?.value, None);
            }
            if let Some(p) = dot_out {
                write_atomic(p, &export_dot(&doc.tree, inst.metric.labels()))?;
            }
            report
        }
        (Problem::Odt(odt), Document::TestStrategy(doc)) => {
            check_odt_goal(goal)?;
            let (costs, problems) = test_strategy_costs(&odt, &doc.tree);
            let value = costs.iter().zip(&odt.priors).map(|(c, p)| c * p).sum();
            let mut report = base_report(digest, "eval", "odt".into(), value);
            report.feasible = problems.is_empty();
            report.violations = problems;
            if check.exact_check && report.feasible {
                let limits = parse_limits(check.limits.as_deref(), OracleLimits::odt())?;
                with_oracle(&mut report, opt_odt_exact(&odt, &limits)?.0, None);
            }
            if let Some(p) = dot_out {
                write_atomic(p, &export_test_dot(&doc.tree))?;
            }
            report
        }
        (_, other) => {
            return Err(usage(format!(
                "{} holds a {} document, which does not match the instance",
                strategy.display(),
                other.kind()
            )))
        }
    };
    let code = if report.feasible { 0 } else { 3 };
    if !report.feasible {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
    }
    publish(report, check.report.as_deref())?;
    Ok(code)
}

fn cmd_gen(kind: GenKind, out: Option<&Path>) -> CliResult<u8> {
    let doc: Document = match kind {
        GenKind::PaperStar { n } => CoverDoc::from_instance(&gen_paper_star(n)?).into(),
        GenKind::TrpStar { n } => CoverDoc::from_instance(&gen_trp_star(n)?).into(),
        GenKind::Random { n, m, seed, objective, shape, skew, max_weight, demand } => {
            let objective = objective.cover().ok_or_else(|| usage("use odt-random for odt instances"))?;
            let params = RandomParams {
                shape: match shape {
                    Shape::Graph => MetricShape::Graph,
                    Shape::Star => MetricShape::Star,
                },
                max_weight,
                demand,
                skew: skew.into(),
                objective,
                ..RandomParams::default()
            };
            CoverDoc::from_instance(&gen_random(seed, n, m, &params)?).into()
        }
        GenKind::Hardness { gst, scale } => {
            let gst = match read_document(&gst)? {
                Document::Gst(d) => d.to_instance()?,
                other => return Err(usage(format!("expected a gst document, found {}", other.kind()))),
            };
            let scale = match scale.as_str() {
                "auto" => default_hardness_scale(&gst),
                s => s.parse().map_err(|_| usage(format!("scale must be auto or a number, got {s:?}")))?,
            };
            CoverDoc::from_instance(&gst_to_adaptsp(&gst, Some(scale))?).into()
        }
        GenKind::OdtRandom { diseases, tests, seed, multiway, max_outcomes, max_cost, skew } => {
            let params = OdtRandomParams { max_cost, multiway, max_outcomes, skew: skew.into(), ..Default::default() };
            OdtDoc::from_instance(&gen_odt_random(seed, diseases, tests, &params)?).into()
        }
    };
    emit(out, &doc.to_json())?;
    Ok(0)
}

fn cmd_walk(instance: &Path, strategy: &Path, goal: Option<Goal>, script: Option<&Path>) -> CliResult<u8> {
    let (problem, _) = load_problem(instance)?;
    let strategy_doc = read_document(strategy)?;
    let mut input: Box<dyn BufRead> = match script {
        Some(p) => Box::new(BufReader::new(fs::File::open(p).map_err(|e| io_failure(p, e))?)),
        None => Box::new(io::stdin().lock()),
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match (problem, strategy_doc) {
        (Problem::Cover(inst), Document::Strategy(doc)) => {
            let objective = match goal {
                Some(_) => cover_objective(&inst, goal)?,
                None => doc.objective.unwrap_or(inst.objective),
            };
            walk::walk_cover(&inst, &doc.tree, objective, &mut input, &mut out)?;
        }
        (Problem::Odt(odt), Document::TestStrategy(doc)) => {
            check_odt_goal(goal)?;
            walk::walk_tests(&odt, &doc.tree, &mut input, &mut out)?;
        }
        (_, other) => {
            return Err(usage(format!(
                "{} holds a {} document, which does not match the instance",
                strategy.display(),
                other.kind()
            )))
        }
    }
    out.flush().map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    Ok(0)
}
