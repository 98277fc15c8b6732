use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use weil_core::TwistReport;

use crate::config::{RunConfig, Suite};
use crate::format::{error_witness, witness_json};

/// Bumped whenever the JSON layout changes; see `docs/report-schema.json`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub suite: Suite,
    pub name: String,
    pub params: BTreeMap<String, String>,
    pub pass: bool,
    /// Number of probe functions the identity was checked on.
    pub probes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    pub timing_ms: u64,
}

impl Record {
    pub fn from_twist(suite: Suite, r: TwistReport, extra: &[(&str, String)], timing_ms: u64) -> Self {
        let mut params: BTreeMap<String, String> = r.params.into_iter().collect();
        params.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
        Record {
            suite,
            name: r.name,
            params,
            pass: r.pass,
            probes: r.probes,
            witness: r.witness.as_ref().map(witness_json),
            timing_ms,
        }
    }

    pub fn error(suite: Suite, name: &str, params: &[(&str, String)], message: &str, timing_ms: u64) -> Self {
        Record {
            suite,
            name: name.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            pass: false,
            probes: 0,
            witness: Some(error_witness(message)),
            timing_ms,
        }
    }

    fn sort_key(&self) -> (String, Suite, String) {
        (self.name.clone(), self.suite, serde_json::to_string(&self.params).expect("string map"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteCount {
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub suites: BTreeMap<Suite, SuiteCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub artifact_version: String,
    pub schema_version: u32,
    pub config: RunConfig,
    pub records: Vec<Record>,
    pub summary: Summary,
}

impl Report {
    pub fn new(config: RunConfig, mut records: Vec<Record>) -> Self {
        records.sort_by_key(Record::sort_key);
        let mut suites: BTreeMap<Suite, SuiteCount> = BTreeMap::new();
        for r in &records {
            let c = suites.entry(r.suite).or_insert(SuiteCount { passed: 0, failed: 0 });
            if r.pass {
                c.passed += 1;
            } else {
                c.failed += 1;
            }
        }
        let passed = records.iter().filter(|r| r.pass).count();
        let summary = Summary { total: records.len(), passed, failed: records.len() - passed, suites };
        Report {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            config,
            records,
            summary,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn records_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The JSON form with every timing field zeroed, for comparing runs.
    pub fn to_json_without_timing(&self) -> String {
        let mut copy = self.clone();
        for r in &mut copy.records {
            r.timing_ms = 0;
        }
        copy.to_json()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let cells: Vec<String> = c.cells.iter().map(|(j, k)| format!("({j},{k})")).collect();
        let _ = writeln!(out, "p = {}  n = {}  N = {}  cells {}  seed {}", c.p, c.n, c.depth, cells.join(" "), c.seed);
        for r in &self.records {
            let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let verdict = if r.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{verdict} {:<18} {} [{}] {}", r.suite.tag(), r.name, params.join(" "), r.probes);
            if let Some(w) = &r.witness {
                let _ = writeln!(out, "     witness: {w}");
            }
        }
        for (suite, count) in &self.summary.suites {
            let _ = writeln!(out, "{:<18} {} passed, {} failed", suite.tag(), count.passed, count.failed);
        }
        let _ = writeln!(out, "total {} passed, {} failed", self.summary.passed, self.summary.failed);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(name: &str, pass: bool, t: u64) -> Record {
        Record {
            suite: Suite::Measures,
            name: name.into(),
            params: BTreeMap::from([("k".to_string(), "1".to_string())]),
            pass,
            probes: 1,
            witness: (!pass).then(|| error_witness("x")),
            timing_ms: t,
        }
    }

    #[test]
    fn records_are_sorted_and_counted() {
        let r = Report::new(RunConfig::default(), vec![rec("b", true, 3), rec("a", false, 1)]);
        assert_eq!(r.records[0].name, "a");
        assert_eq!((r.summary.passed, r.summary.failed), (1, 1));
        assert!(!r.all_passed());
        assert!(r.to_text().contains("FAIL measures"));
    }

    #[test]
    fn timing_is_ignored_when_comparing() {
        let a = Report::new(RunConfig::default(), vec![rec("a", true, 1)]);
        let b = Report::new(RunConfig::default(), vec![rec("a", true, 99)]);
        assert_ne!(a.to_json(), b.to_json());
        assert_eq!(a.to_json_without_timing(), b.to_json_without_timing());
    }
}
