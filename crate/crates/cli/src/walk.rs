//! Step-by-step execution of a strategy with answers read from a line source.

use std::io::{BufRead, Write};

use adaptcover::odt::{OdtInstance, TestNode};
use adaptcover::strategy::{path_cost, path_latency, TracedPath};
use adaptcover::{CoverInstance, Error, Objective, Result, StrategyNode};

struct Prompter<'a, R, W> {
    input: &'a mut R,
    out: &'a mut W,
}

impl<R: BufRead, W: Write> Prompter<'_, R, W> {
    fn say(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}").map_err(io)
    }

    /// Asks until `parse` accepts a line; end of input is an error.
    fn ask<T>(&mut self, question: &str, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
        loop {
            write!(self.out, "{question} ").map_err(io)?;
            self.out.flush().map_err(io)?;
            let mut line = String::new();
            if self.input.read_line(&mut line).map_err(io)? == 0 {
                writeln!(self.out).map_err(io)?;
                return Err(Error::Malformed("input ended before the walk reached a leaf".into()));
            }
            let answer = line.trim();
            writeln!(self.out, "{answer}").map_err(io)?;
            match parse(answer) {
                Some(v) => return Ok(v),
                None => self.say(&format!("  invalid answer {answer:?}, try again"))?,
            }
        }
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Malformed(format!("i/o error: {e}"))
}

fn yes_no(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "y" | "yes" | "1" | "true" => Some(true),
        "n" | "no" | "0" | "false" => Some(false),
        _ => None,
    }
}

/// Result of a finished walk.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkOutcome {
    /// Scenario or disease the walk identified, when determined.
    pub identified: Option<usize>,
    pub cost: Option<f64>,
}

pub fn walk_cover<R: BufRead, W: Write>(
    inst: &CoverInstance,
    tree: &StrategyNode,
    objective: Objective,
    input: &mut R,
    out: &mut W,
) -> Result<WalkOutcome> {
    let mut p = Prompter { input, out };
    let name = |v: usize| match inst.metric.labels() {
        Some(l) => l[v].clone(),
        None => v.to_string(),
    };
    let mut at = inst.root;
    let mut travelled = 0.0;
    let mut sequence = Vec::new();
    let mut observations: Vec<(usize, bool)> = Vec::new();
    let mut node = tree;
    p.say(&format!("start at root {} ({objective})", name(at)))?;
    let label = loop {
        match node {
            StrategyNode::Observe { vertex, yes, no } => {
                travelled += inst.metric.d(at, *vertex);
                at = *vertex;
                sequence.push(at);
                let seen = p.ask(&format!("[{travelled}] at {}: demand here? (y/n)", name(at)), yes_no)?;
                observations.push((at, seen));
                node = if seen { yes } else { no };
            }
            StrategyNode::Waypoint { vertex, next } => {
                travelled += inst.metric.d(at, *vertex);
                at = *vertex;
                sequence.push(at);
                p.say(&format!("[{travelled}] pass through {}", name(at)))?;
                node = next;
            }
            StrategyNode::Leaf { scenario } => break *scenario,
        }
    };
    let consistent: Vec<usize> = (0..inst.num_scenarios())
        .filter(|&i| observations.iter().all(|&(v, seen)| inst.dist.contains(i, v) == seen))
        .collect();
    let identified = label.or(if consistent.len() == 1 { Some(consistent[0]) } else { None });
    let path = TracedPath { sequence, observations, leaf: label, leaf_index: 0 };
    let cost = identified.map(|i| match objective {
        Objective::Isolation | Objective::AdapTsp => path_cost(inst, &path),
        Objective::AdapTrp => path_latency(inst, &path, inst.dist.scenario(i)),
    });
    match (identified, cost) {
        (Some(i), Some(c)) => {
            if !consistent.contains(&i) {
                p.say(&format!("warning: the answers do not match scenario {i}"))?;
            }
            p.say(&format!("leaf: scenario {i} {:?}", inst.dist.scenario(i)))?;
            p.say(&format!("cost: {c}"))?;
        }
        _ => {
            p.say(&format!("leaf: unlabeled, consistent scenarios {consistent:?}"))?;
            p.say(&format!("distance travelled: {}", travelled + inst.metric.d(at, inst.root)))?;
        }
    }
    Ok(WalkOutcome { identified, cost })
}

pub fn walk_tests<R: BufRead, W: Write>(
    odt: &OdtInstance,
    strategy: &TestNode,
    input: &mut R,
    out: &mut W,
) -> Result<WalkOutcome> {
    let mut p = Prompter { input, out };
    let mut node = strategy;
    let mut cost = 0.0;
    loop {
        match node {
            TestNode::Leaf { disease } => {
                match disease {
                    Some(d) => p.say(&format!("leaf: disease {d}"))?,
                    None => p.say("leaf: unlabeled")?,
                }
                p.say(&format!("cost: {cost}"))?;
                return Ok(WalkOutcome { identified: *disease, cost: Some(cost) });
            }
            TestNode::Test { test, branches } => {
                let t = odt
                    .tests
                    .get(*test)
                    .ok_or_else(|| Error::Malformed(format!("strategy uses unknown test {test}")))?;
                cost += t.cost;
                let outcomes: Vec<usize> = branches.iter().map(|b| b.outcome).collect();
                let question = format!("[{cost}] test {test} (cost {}): outcome? {outcomes:?}", t.cost);
                let o = p.ask(&question, |s| s.parse::<usize>().ok().filter(|o| outcomes.contains(o)))?;
                node = &branches.iter().find(|b| b.outcome == o).expect("validated outcome").node;
            }
        }
    }
}
