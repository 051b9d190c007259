//! Machine-readable reports. Everything here serializes deterministically:
//! fixed field order, sorted collections, exact values rendered as
//! `num/2^exp` strings, and no timing or machine-specific data, so a run
//! with the same inputs produces byte-identical files regardless of the
//! worker count.

use serde::Serialize;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::parity::{AuditReport, ParityFailure};
use crate::protocol::ProtocolSpec;
use crate::solver::{SolveOutcome, VerifyReport};

/// One solved and verified instance.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub instance: String,
    pub protocol: String,
    pub truth: String,
    pub pass: bool,
    pub root_value: String,
    pub argmax: Vec<String>,
    pub decisions: Vec<String>,
    pub delta_exact: String,
    pub delta_declared: Option<String>,
    pub node_count: u64,
    pub branches: u64,
    /// Serialized transcripts of maximizing branches that claimed a wrong
    /// value, when any exist.
    pub witnesses: Vec<String>,
}

impl RunRecord {
    pub fn new(
        instance: impl Into<String>,
        spec: &ProtocolSpec,
        input: &str,
        outcome: &SolveOutcome,
        verify: &VerifyReport,
    ) -> Self {
        RunRecord {
            instance: instance.into(),
            protocol: spec.name().to_string(),
            truth: verify.truth.clone(),
            pass: verify.pass,
            root_value: outcome.root_value.to_string(),
            argmax: outcome.root_argmax.iter().map(|m| m.to_string()).collect(),
            decisions: verify.decisions.iter().cloned().collect(),
            delta_exact: outcome.delta().render(),
            delta_declared: spec.declared_delta(input).map(|d| d.to_string()),
            node_count: outcome.node_count,
            branches: verify.branches,
            witnesses: verify
                .witnesses
                .iter()
                .map(|t| t.to_input_string())
                .collect(),
        }
    }
}

/// A batch of run records under one protocol kind.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub kind: String,
    pub pass: bool,
    pub instances: Vec<RunRecord>,
}

impl RunReport {
    pub fn new(kind: impl Into<String>, instances: Vec<RunRecord>) -> Self {
        RunReport {
            kind: kind.into(),
            pass: instances.iter().all(|r| r.pass),
            instances,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        render_json(self)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "instance",
            "protocol",
            "truth",
            "pass",
            "root_value",
            "argmax",
            "decisions",
            "delta_exact",
            "delta_declared",
            "node_count",
            "branches",
        ])
        .map_err(csv_err)?;
        for r in &self.instances {
            w.write_record([
                r.instance.as_str(),
                r.protocol.as_str(),
                r.truth.as_str(),
                if r.pass { "1" } else { "0" },
                r.root_value.as_str(),
                &r.argmax.join(";"),
                &r.decisions.join(";"),
                r.delta_exact.as_str(),
                r.delta_declared.as_deref().unwrap_or(""),
                &r.node_count.to_string(),
                &r.branches.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }
}

/// A message's reward polynomial, low-degree coefficient first.
#[derive(Clone, Debug, Serialize)]
pub struct PolyRow {
    pub m: u64,
    pub coeffs: Vec<String>,
}

/// One audited grid point: the maximizing messages at `p = k/2^n` and
/// whether they all claim `k`'s parity.
#[derive(Clone, Debug, Serialize)]
pub struct GridRow {
    pub k: u64,
    pub parity: u8,
    pub argmax: Vec<u64>,
    pub correct: bool,
}

/// The serializable form of a parity audit, with the full grid rendered for
/// plotting.
#[derive(Clone, Debug, Serialize)]
pub struct AuditFile {
    pub name: String,
    pub n: u32,
    pub msg_bits: u8,
    /// Message budget fraction the width was derived from, when one was
    /// given.
    pub alpha: Option<String>,
    /// Set when alpha is at least one half: the audit result carries no
    /// claim about that regime.
    pub alpha_note: Option<String>,
    pub pass: bool,
    pub failures: Vec<ParityFailure>,
    pub polynomials: Vec<PolyRow>,
    pub grid: Vec<GridRow>,
}

impl AuditFile {
    pub fn new(report: &AuditReport, alpha: Option<&Dyadic>) -> Self {
        let polynomials: Vec<PolyRow> = report
            .polynomials
            .iter()
            .map(|(m, q)| PolyRow {
                m: *m,
                coeffs: q.coeffs().iter().map(|c| c.to_string()).collect(),
            })
            .collect();
        let mut grid = Vec::with_capacity(1 << report.n);
        for k in 0..1u64 << report.n {
            let p = Dyadic::new(k, report.n);
            let values: Vec<Dyadic> = report
                .polynomials
                .values()
                .map(|q| q.eval(&p))
                .collect();
            let best = values.iter().max().expect("at least one message");
            let argmax: Vec<u64> = report
                .polynomials
                .keys()
                .zip(&values)
                .filter(|(_, v)| *v == best)
                .map(|(m, _)| *m)
                .collect();
            grid.push(GridRow {
                k,
                parity: (k & 1) as u8,
                argmax,
                correct: !report.failures.iter().any(|f| f.k == k),
            });
        }
        let half = Dyadic::new(1, 1);
        AuditFile {
            name: report.name.clone(),
            n: report.n,
            msg_bits: report.msg_bits,
            alpha: alpha.map(|a| a.to_string()),
            alpha_note: alpha.and_then(|a| {
                (*a >= half).then(|| {
                    "message budget fraction is at least 1/2; the audit makes \
                     no claim in this regime"
                        .to_string()
                })
            }),
            pass: report.passes(),
            failures: report.failures.clone(),
            polynomials,
            grid,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        render_json(self)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["record", "key", "data", "parity", "correct"])
            .map_err(csv_err)?;
        for p in &self.polynomials {
            w.write_record([
                "polynomial",
                &p.m.to_string(),
                &p.coeffs.join(";"),
                "",
                "",
            ])
            .map_err(csv_err)?;
        }
        for g in &self.grid {
            let argmax: Vec<String> = g.argmax.iter().map(u64::to_string).collect();
            w.write_record([
                "grid",
                &g.k.to_string(),
                &argmax.join(";"),
                &g.parity.to_string(),
                if g.correct { "1" } else { "0" },
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }
}

/// One input to a merged summary.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryEntry {
    pub source: String,
    pub kind: String,
    pub pass: bool,
    /// Headline value rows pulled from the report: (label, value).
    pub values: Vec<(String, String)>,
}

/// Aggregation of several report files.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub reports: usize,
    pub passed: usize,
    pub verdict: String,
    pub entries: Vec<SummaryEntry>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.passed == self.reports
    }

    pub fn to_json(&self) -> Result<String> {
        render_json(self)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "kind", "pass", "values"])
            .map_err(csv_err)?;
        for e in &self.entries {
            let values: Vec<String> = e.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
            w.write_record([
                e.source.as_str(),
                e.kind.as_str(),
                if e.pass { "1" } else { "0" },
                &values.join(";"),
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }
}

/// Merges parsed report files (run reports or audit files) into a summary.
/// Inputs are (source label, parsed JSON) pairs; a file that carries no
/// recognizable report shape is an error.
pub fn summarize(inputs: &[(String, serde_json::Value)]) -> Result<Summary> {
    if inputs.is_empty() {
        return Err(Error::Report("no report files to summarize".into()));
    }
    let mut entries = Vec::with_capacity(inputs.len());
    for (source, value) in inputs {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Report(format!("{source}: not a JSON object")))?;
        let pass = obj
            .get("pass")
            .and_then(serde_json::Value::as_bool)
            .ok_or_else(|| Error::Report(format!("{source}: missing boolean `pass`")))?;
        let (kind, values) = if let Some(instances) = obj.get("instances") {
            let rows = instances
                .as_array()
                .ok_or_else(|| Error::Report(format!("{source}: `instances` is not a list")))?;
            let mut values = Vec::with_capacity(rows.len());
            for row in rows {
                let name = row
                    .get("instance")
                    .and_then(serde_json::Value::as_str)
                    .unwrap_or("?");
                let root = row
                    .get("root_value")
                    .and_then(serde_json::Value::as_str)
                    .unwrap_or("?");
                values.push((name.to_string(), root.to_string()));
            }
            let kind = obj
                .get("kind")
                .and_then(serde_json::Value::as_str)
                .unwrap_or("run")
                .to_string();
            (kind, values)
        } else if let Some(failures) = obj.get("failures") {
            let count = failures
                .as_array()
                .ok_or_else(|| Error::Report(format!("{source}: `failures` is not a list")))?
                .len();
            let name = obj
                .get("name")
                .and_then(serde_json::Value::as_str)
                .unwrap_or("audit");
            (
                "parity-audit".to_string(),
                vec![(name.to_string(), format!("{count} failures"))],
            )
        } else {
            return Err(Error::Report(format!(
                "{source}: neither a run report nor an audit file"
            )));
        };
        entries.push(SummaryEntry {
            source: source.clone(),
            kind,
            pass,
            values,
        });
    }
    let passed = entries.iter().filter(|e| e.pass).count();
    Ok(Summary {
        reports: entries.len(),
        passed,
        verdict: format!("{passed}/{} pass", entries.len()),
        entries,
    })
}

fn render_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Report(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Report(format!("csv: {e}"))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Report(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(format!("csv: {e}")))
}
