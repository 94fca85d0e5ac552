use thiserror::Error;

use crate::instances::InstanceIssue;
use crate::metric::MetricViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid metric: {}", join(.0))]
    InvalidMetric(Vec<MetricViolation>),

    #[error("invalid instance: {}", join(.0))]
    InvalidInstance(Vec<InstanceIssue>),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("limits exceeded: {0}")]
    LimitsExceeded(String),

    #[error("malformed input: {0}")]
    Malformed(String),
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
