use std::fmt::Write as _;

use glutos::axioms::{Status, Verdict};
use glutos::fincat::FinCategory;
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA: &str = "glutos-report/1";

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: String,
    pub status: Status,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

impl Check {
    pub fn new(id: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Check { id: id.into(), status: if ok { Status::Pass } else { Status::Fail }, detail: detail.into(), witness: None }
    }

    pub fn from_verdict(v: &Verdict, c: &FinCategory) -> Self {
        let mut detail = format!("{} instances, {}", v.checked, v.bound_note());
        if let Some(w) = &v.witness {
            if !w.note.is_empty() {
                detail += &format!("; {}", w.note);
            }
        }
        Check { id: v.axiom.clone(), status: v.status, detail, witness: v.witness.as_ref().map(|w| w.to_json(c)) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Section {
    pub title: String,
    pub target: String,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub data: Value,
}

impl Section {
    pub fn new(title: impl Into<String>, target: impl Into<String>) -> Self {
        Section { title: title.into(), target: target.into(), checks: Vec::new(), data: Value::Null }
    }

    pub fn verdicts<'a>(&mut self, vs: impl IntoIterator<Item = &'a Verdict>, c: &FinCategory) {
        self.checks.extend(vs.into_iter().map(|v| Check::from_verdict(v, c)));
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub params: Value,
    pub sections: Vec<Section>,
    pub passed: bool,
}

impl Report {
    pub fn new(command: &str, params: Value, sections: Vec<Section>, allow_proxy: bool) -> Self {
        let passed = sections.iter().flat_map(|s| &s.checks).all(|c| c.status.is_pass(allow_proxy));
        Report { schema: SCHEMA, command: command.into(), params, sections, passed }
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.schema, self.command, self.params);
        let (mut total, mut ok) = (0, 0);
        for sec in &self.sections {
            let _ = writeln!(s, "\n== {} [{}] ==", sec.title, sec.target);
            for c in &sec.checks {
                total += 1;
                ok += usize::from(c.status == Status::Pass);
                let line = format!("  {:<28} {:<12} {}", c.id, c.status.to_string(), c.detail);
                let _ = writeln!(s, "{}", line.trim_end());
                if let (Some(w), false) = (&c.witness, c.status == Status::Pass) {
                    let _ = writeln!(s, "    witness: {w}");
                }
            }
            if !sec.data.is_null() {
                let _ = writeln!(s, "  data: {}", sec.data);
            }
        }
        let _ = writeln!(s, "\n{ok}/{total} checks pass; overall {}", if self.passed { "pass" } else { "fail" });
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(status: Status) -> Vec<Section> {
        let mut s = Section::new("t", "x");
        s.checks.push(Check::new("a", true, ""));
        s.checks.push(Check { id: "b".into(), status, detail: String::new(), witness: None });
        vec![s]
    }

    #[test]
    fn proxy_passes_count_only_when_allowed() {
        assert!(!Report::new("c", Value::Null, with(Status::ProxyPass), false).passed);
        assert!(Report::new("c", Value::Null, with(Status::ProxyPass), true).passed);
        assert!(!Report::new("c", Value::Null, with(Status::Inapplicable), true).passed);
    }

    #[test]
    fn text_report_ends_with_summary() {
        let t = Report::new("c", Value::Null, with(Status::Fail), false).text();
        assert!(t.trim_end().ends_with("1/2 checks pass; overall fail"));
    }
}
