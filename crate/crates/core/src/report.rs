//! The machine-readable report shared by the CLI commands:
//! `{ command, config, items: [{ name, status, details, witness? }] }`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::ConditionReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportItem {
    pub name: String,
    pub status: Status,
    pub details: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Value>,
}

impl ReportItem {
    pub fn pass(name: impl Into<String>, details: impl Into<String>) -> ReportItem {
        ReportItem { name: name.into(), status: Status::Pass, details: details.into(), witness: None }
    }

    pub fn fail(name: impl Into<String>, details: impl Into<String>) -> ReportItem {
        ReportItem { name: name.into(), status: Status::Fail, details: details.into(), witness: None }
    }

    pub fn from_result(name: impl Into<String>, r: Result<String, String>) -> ReportItem {
        match r {
            Ok(d) => ReportItem::pass(name, d),
            Err(d) => ReportItem::fail(name, d),
        }
    }

    pub fn with_witness(mut self, w: Value) -> ReportItem {
        self.witness = Some(w);
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

impl From<&ConditionReport> for ReportItem {
    fn from(r: &ConditionReport) -> ReportItem {
        let details = format!(
            "{} on {}: {} cases, |S| ≤ {}, fibers ≤ {}{}",
            r.condition.name(),
            r.instance,
            r.cases,
            r.bounds.max_index,
            r.bounds.max_fiber,
            r.witness.as_ref().map(|w| format!("; {}", w.detail)).unwrap_or_default()
        );
        ReportItem {
            name: r.condition.name().to_string(),
            status: if r.pass { Status::Pass } else { Status::Fail },
            details,
            witness: r.witness.as_ref().map(|w| serde_json::to_value(w).expect("witness serialises")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: Value,
    pub items: Vec<ReportItem>,
}

impl Report {
    pub fn new(command: impl Into<String>, config: Value) -> Report {
        Report { command: command.into(), config, items: Vec::new() }
    }

    pub fn push(&mut self, item: ReportItem) {
        self.items.push(item);
    }

    pub fn passed(&self) -> bool {
        self.items.iter().all(ReportItem::passed)
    }

    /// 0 when every item passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn human(&self) -> String {
        let mut out = String::new();
        for it in &self.items {
            let tag = if it.passed() { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {}: {}\n", it.name, it.details));
        }
        let failed = self.items.iter().filter(|i| !i.passed()).count();
        out.push_str(&format!("{}: {} items, {} failed\n", self.command, self.items.len(), failed));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_exit_code() {
        let mut r = Report::new("theorems", serde_json::json!({ "seed": 3 }));
        r.push(ReportItem::pass("a", "ok"));
        assert_eq!(r.exit_code(), 0);
        r.push(ReportItem::fail("b", "bad").with_witness(serde_json::json!([1, 2])));
        assert_eq!(r.exit_code(), 1);
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_json().contains("\"status\": \"fail\""));
    }
}
