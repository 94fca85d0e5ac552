//! Self-describing JSON documents for instances, strategies and run reports.
//!
//! Every document carries `"schema": 1` and a `"kind"` tag. Metrics are given either as a full
//! `dist` matrix or as weighted `edges`, whose shortest-path closure is taken.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{CoverInstance, DemandDistribution, GstInstance, Objective};
use crate::metric::Metric;
use crate::odt::{OdtInstance, OdtTest, TestNode};
use crate::strategy::StrategyNode;

pub const SCHEMA_VERSION: u32 = 1;

fn schema() -> u32 {
    SCHEMA_VERSION
}

/// Metric given by matrix or by edge list over `n` vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl MetricSpec {
    pub fn from_metric(metric: &Metric) -> Self {
        MetricSpec {
            n: metric.len(),
            dist: Some(metric.rows()),
            edges: None,
            labels: metric.labels().map(<[String]>::to_vec),
        }
    }

    pub fn build(&self) -> Result<Metric> {
        let metric = match (&self.dist, &self.edges) {
            (Some(rows), None) => {
                if rows.len() != self.n {
                    return Err(Error::Malformed(format!("n = {} but dist has {} rows", self.n, rows.len())));
                }
                Metric::new(rows.clone())?
            }
            (None, Some(edges)) => Metric::closure(self.n, edges)?,
            _ => return Err(Error::Malformed("exactly one of `dist` and `edges` is required".into())),
        };
        match &self.labels {
            Some(labels) => metric.with_labels(labels.clone()),
            None => Ok(metric),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverDoc {
    #[serde(default = "schema")]
    pub schema: u32,
    #[serde(flatten)]
    pub metric: MetricSpec,
    pub root: usize,
    pub scenarios: Vec<Vec<usize>>,
    pub probs: Vec<f64>,
    pub objective: Objective,
}

impl CoverDoc {
    pub fn from_instance(inst: &CoverInstance) -> Self {
        CoverDoc {
            schema: SCHEMA_VERSION,
            metric: MetricSpec::from_metric(&inst.metric),
            root: inst.root,
            scenarios: inst.dist.scenarios().to_vec(),
            probs: inst.dist.probs().to_vec(),
            objective: inst.objective,
        }
    }

    pub fn to_instance(&self) -> Result<CoverInstance> {
        CoverInstance::new(
            self.metric.build()?,
            self.root,
            DemandDistribution::new(self.scenarios.clone(), self.probs.clone()),
            self.objective,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GstDoc {
    #[serde(default = "schema")]
    pub schema: u32,
    #[serde(flatten)]
    pub metric: MetricSpec,
    pub root: usize,
    pub groups: Vec<Vec<usize>>,
}

impl GstDoc {
    pub fn from_instance(gst: &GstInstance) -> Self {
        GstDoc {
            schema: SCHEMA_VERSION,
            metric: MetricSpec::from_metric(&gst.metric),
            root: gst.root,
            groups: gst.groups.clone(),
        }
    }

    pub fn to_instance(&self) -> Result<GstInstance> {
        GstInstance::new(self.metric.build()?, self.root, self.groups.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdtDoc {
    #[serde(default = "schema")]
    pub schema: u32,
    /// Disease priors.
    pub diseases: Vec<f64>,
    pub tests: Vec<OdtTest>,
}

impl OdtDoc {
    pub fn from_instance(odt: &OdtInstance) -> Self {
        OdtDoc { schema: SCHEMA_VERSION, diseases: odt.priors.clone(), tests: odt.tests.clone() }
    }

    pub fn to_instance(&self) -> Result<OdtInstance> {
        OdtInstance::new(self.diseases.clone(), self.tests.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyDoc {
    #[serde(default = "schema")]
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
    pub tree: StrategyNode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestStrategyDoc {
    #[serde(default = "schema")]
    pub schema: u32,
    pub tree: TestNode,
}

/// Outcome of one solver or evaluation run. Wall time is only present when requested so that
/// reports stay byte-identical across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(default = "schema")]
    pub schema: u32,
    /// Hex SHA-256 of the canonical instance document.
    pub instance_digest: String,
    pub solver: String,
    pub objective: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub feasible: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Document {
    Cover(CoverDoc),
    Gst(GstDoc),
    Odt(OdtDoc),
    Strategy(StrategyDoc),
    TestStrategy(TestStrategyDoc),
    Report(RunReport),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Cover(_) => "cover",
            Document::Gst(_) => "gst",
            Document::Odt(_) => "odt",
            Document::Strategy(_) => "strategy",
            Document::TestStrategy(_) => "test_strategy",
            Document::Report(_) => "report",
        }
    }

    fn schema(&self) -> u32 {
        match self {
            Document::Cover(d) => d.schema,
            Document::Gst(d) => d.schema,
            Document::Odt(d) => d.schema,
            Document::Strategy(d) => d.schema,
            Document::TestStrategy(d) => d.schema,
            Document::Report(d) => d.schema,
        }
    }

    pub fn parse(text: &str) -> Result<Document> {
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let doc = Document::deserialize(&mut de).map_err(|e| Error::Malformed(e.to_string()))?;
        de.end().map_err(|e| Error::Malformed(e.to_string()))?;
        if doc.schema() != SCHEMA_VERSION {
            return Err(Error::Malformed(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                doc.schema()
            )));
        }
        Ok(doc)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents serialize");
        s.push('\n');
        s
    }
}

impl From<CoverDoc> for Document {
    fn from(d: CoverDoc) -> Self {
        Document::Cover(d)
    }
}

impl From<GstDoc> for Document {
    fn from(d: GstDoc) -> Self {
        Document::Gst(d)
    }
}

impl From<OdtDoc> for Document {
    fn from(d: OdtDoc) -> Self {
        Document::Odt(d)
    }
}

impl From<StrategyDoc> for Document {
    fn from(d: StrategyDoc) -> Self {
        Document::Strategy(d)
    }
}

impl From<TestStrategyDoc> for Document {
    fn from(d: TestStrategyDoc) -> Self {
        Document::TestStrategy(d)
    }
}

impl From<RunReport> for Document {
    fn from(d: RunReport) -> Self {
        Document::Report(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::gen_paper_star;

    #[test]
    fn cover_round_trip() {
        let inst = gen_paper_star(3).unwrap();
        let doc: Document = CoverDoc::from_instance(&inst).into();
        let text = doc.to_json();
        assert!(text.contains("\"kind\": \"cover\""));
        assert!(text.contains("\"schema\": 1"));
        let Document::Cover(back) = Document::parse(&text).unwrap() else { panic!("kind changed") };
        assert_eq!(back.to_instance().unwrap(), inst);
    }

    #[test]
    fn edges_are_closed() {
        let text = r#"{"kind":"gst","schema":1,"n":3,"edges":[[0,1,1.0],[1,2,2.0]],"root":0,"groups":[[2]]}"#;
        let Document::Gst(doc) = Document::parse(text).unwrap() else { panic!() };
        assert_eq!(doc.to_instance().unwrap().metric.d(0, 2), 3.0);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(Document::parse(r#"{"kind":"odt","schema":2,"diseases":[1.0],"tests":[]}"#).is_err());
        assert!(Document::parse(r#"{"kind":"nope"}"#).is_err());
        let both = r#"{"kind":"gst","n":1,"dist":[[0]],"edges":[],"root":0,"groups":[[0]]}"#;
        let Document::Gst(doc) = Document::parse(both).unwrap() else { panic!() };
        assert!(doc.to_instance().is_err());
    }
}
