//! Adaptive covering on finite metrics.
//!
//! A random demand set is drawn from an explicit list of scenarios; a strategy walks from the
//! root, observes at each visited vertex whether it carries demand, and branches on the answer.
//! This crate provides approximation algorithms for identifying the scenario (isolation),
//! covering it with minimum expected tour length (adaptive TSP) or minimum expected latency
//! (adaptive traveling repairman), plus optimal decision trees through a star reduction, and
//! exact oracles for small instances.

// `!(x > 0.0)` rejects NaN on purpose; matrix code indexes by vertex.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adaptrp;
pub mod analysis;
pub mod error;
pub mod format;
pub mod gso;
pub mod instances;
pub mod isolation;
pub mod lpgst;
pub mod metric;
pub mod odt;
pub mod oracle;
pub mod strategy;

pub use adaptrp::{adaptrp_solve, adaptrp_solve_traced, TrpRun};
pub use error::{Error, Result};
pub use format::{Document, RunReport, SCHEMA_VERSION};
pub use gso::{GsoInstance, GsoOracle, OracleChoice};
pub use instances::{
    gen_paper_star, gen_random, gen_trp_star, gst_to_adaptsp, CoverInstance, DemandDistribution, GstInstance,
    Objective, RandomParams, SubInstance,
};
pub use isolation::{adaptsp_solve, iso_solve, iso_solve_traced, IsolationRun};
pub use lpgst::{lpgst_solve, LpgstConfig, LpgstInstance};
pub use metric::{Metric, Tour};
pub use odt::{eval_test_strategy, gen_odt_random, odt_solve, OdtInstance, OdtTest, TestNode};
pub use oracle::{OracleLimits, OracleResult};
pub use strategy::{check_feasible, eval_adaptrp, eval_adaptsp, eval_isolation, evaluate, StrategyNode};
