//! Comparison tables, JSON reports and advice transcripts.

use std::fmt::Write as _;

use serde::ser::Serializer;
use serde::Serialize;
use serde_json::value::RawValue;

use crate::advisor::CounterfactualAdvice;
use crate::checker::{SafetyMeasurement, ViolationRecord};
use crate::model::Mdp;
use crate::prob::format_f64_17;
use crate::repair::{OverrideSource, RepairReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

/// Double serialized with 17 significant digits.
#[derive(Debug, Clone, Copy)]
struct F17(f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawValue::from_string(format_f64_17(self.0))
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }
}

fn table_value(v: f64) -> String {
    format!("{:.3}", v.max(0.0))
}

fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            let _ = write!(line, "{cell:<w$}", w = widths[c]);
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn describe(m: &SafetyMeasurement) -> String {
    let mut s = match &m.exact {
        Some(q) => format!("{} = {}", q, m.value),
        None => format!("{}", m.value),
    };
    let _ = write!(s, " ({}, {}", m.mode.as_str(), m.solver.as_str());
    if let Some(it) = m.iterations {
        let _ = write!(s, ", {it} sweeps");
    }
    s.push(')');
    s
}

/// Text report: one row per property, `Original` then one column per method,
/// followed by per-run details.
pub fn render_text(reports: &[RepairReport]) -> String {
    let mut methods = Vec::new();
    let mut props = Vec::new();
    for r in reports {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
        if !props.contains(&&r.property) {
            props.push(&r.property);
        }
    }
    let mut header = vec!["Property".to_string(), "Original".to_string()];
    header.extend(methods.iter().map(|m| m.column().to_string()));
    let mut rows = vec![header];
    let mut any_note = false;
    for p in &props {
        let runs: Vec<&RepairReport> = reports.iter().filter(|r| &&r.property == p).collect();
        let mut row = vec![p.short(), table_value(runs[0].original.value)];
        for m in &methods {
            row.push(match runs.iter().find(|r| r.method == *m) {
                Some(r) => table_value(r.repaired.value),
                None => "-".to_string(),
            });
        }
        let mut notes = Vec::new();
        if runs.iter().all(|r| r.no_repair_needed()) {
            notes.push("no repair needed".to_string());
        }
        for r in &runs {
            if !r.improved() {
                notes.push(format!("worse after {} repair", r.method));
            }
        }
        if !notes.is_empty() {
            any_note = true;
            row.push(notes.join("; "));
        }
        rows.push(row);
    }
    if any_note {
        rows[0].push("Notes".to_string());
    }

    let mut out = render_table(&rows);
    for r in reports {
        let c = &r.counts;
        let _ = writeln!(out, "\n{} / {}", r.property.short(), r.method.column());
        let _ = writeln!(out, "  original: {}", describe(&r.original));
        let _ = writeln!(out, "  repaired: {}", describe(&r.repaired));
        let _ = writeln!(out, "  reachable states: {} -> {}", r.states_before, r.states_after);
        let _ = writeln!(
            out,
            "  frontier: {}; advice: {} ok, {} format_error, {} disabled_action, {} no_alternative",
            r.frontier_size, c.ok, c.format_error, c.disabled_action, c.no_alternative
        );
        let _ = writeln!(out, "  overrides: {}", r.overrides.len());
        for o in &r.overrides {
            let via = match o.source {
                OverrideSource::Advisor => "",
                OverrideSource::BaselineFallback => " (baseline fallback)",
            };
            let _ = writeln!(out, "    {}: {} -> {}{}", o.rendered, o.from, o.to, via);
        }
        for w in &r.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
    }
    out
}

#[derive(Serialize)]
struct MeasurementJson<'a> {
    value: F17,
    exact: Option<String>,
    mode: &'a str,
    solver: &'a str,
    iterations: Option<u64>,
    residual: Option<F17>,
    states: usize,
}

impl<'a> From<&'a SafetyMeasurement> for MeasurementJson<'a> {
    fn from(m: &'a SafetyMeasurement) -> Self {
        MeasurementJson {
            value: F17(m.value),
            exact: m.exact.as_ref().map(ToString::to_string),
            mode: m.mode.as_str(),
            solver: m.solver.as_str(),
            iterations: m.iterations,
            residual: m.residual.map(F17),
            states: m.states,
        }
    }
}

#[derive(Serialize)]
struct CountsJson {
    ok: usize,
    format_error: usize,
    disabled_action: usize,
    no_alternative: usize,
}

#[derive(Serialize)]
struct OverrideJson<'a> {
    pass: usize,
    state: &'a [i64],
    rendered: &'a str,
    from: &'a str,
    to: &'a str,
    source: &'a str,
}

#[derive(Serialize)]
struct RunJson<'a> {
    property: String,
    method: &'a str,
    original: MeasurementJson<'a>,
    repaired: MeasurementJson<'a>,
    improved: bool,
    frontier_size: usize,
    counts: CountsJson,
    states_before: usize,
    states_after: usize,
    passes: usize,
    overrides: Vec<OverrideJson<'a>>,
    new_frontier_states: &'a [String],
    warnings: &'a [String],
}

#[derive(Serialize)]
struct ReportJson<'a> {
    runs: Vec<RunJson<'a>>,
}

pub fn render_json(reports: &[RepairReport]) -> String {
    let runs = reports
        .iter()
        .map(|r| RunJson {
            property: r.property.to_string(),
            method: r.method.as_str(),
            original: (&r.original).into(),
            repaired: (&r.repaired).into(),
            improved: r.improved(),
            frontier_size: r.frontier_size,
            counts: CountsJson {
                ok: r.counts.ok,
                format_error: r.counts.format_error,
                disabled_action: r.counts.disabled_action,
                no_alternative: r.counts.no_alternative,
            },
            states_before: r.states_before,
            states_after: r.states_after,
            passes: r.passes.len(),
            overrides: r
                .overrides
                .iter()
                .map(|o| OverrideJson {
                    pass: o.pass,
                    state: o.state.features(),
                    rendered: &o.rendered,
                    from: &o.from,
                    to: &o.to,
                    source: match o.source {
                        OverrideSource::Advisor => "advisor",
                        OverrideSource::BaselineFallback => "baseline-fallback",
                    },
                })
                .collect(),
            new_frontier_states: &r.new_frontier,
            warnings: &r.warnings,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&ReportJson { runs }).expect("report serializes");
    s.push('\n');
    s
}

pub fn render_report(reports: &[RepairReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(reports),
        ReportFormat::Json => render_json(reports),
    }
}

#[derive(Serialize)]
pub struct ViolationJson<'a> {
    pub index: usize,
    pub state: &'a [i64],
    pub rendered: String,
    pub action: &'a str,
    pub one_step_prob: f64,
    pub one_step_exact: Option<String>,
    pub successor: &'a [i64],
}

impl<'a> ViolationJson<'a> {
    pub fn new(r: &'a ViolationRecord, mdp: &Mdp) -> Self {
        ViolationJson {
            index: r.state_index,
            state: r.state.features(),
            rendered: mdp.render_state(&r.state),
            action: &r.action,
            one_step_prob: r.one_step_prob.to_f64(),
            one_step_exact: r.one_step_prob.is_exact().then(|| r.one_step_prob.to_string()),
            successor: r.successor.features(),
        }
    }
}

/// One frontier record per line, `"key": value` spacing.
pub fn frontier_json_line(r: &ViolationRecord, mdp: &Mdp) -> String {
    spaced_json(&ViolationJson::new(r, mdp))
}

#[derive(Serialize)]
struct AdviceJson<'a> {
    method: &'a str,
    pass: usize,
    #[serde(flatten)]
    record: ViolationJson<'a>,
    status: &'a str,
    alternative: Option<&'a str>,
    explanation: &'a str,
    raw: &'a str,
    prompt_hash: Option<&'a str>,
}

fn advice_line(method: &str, pass: usize, a: &CounterfactualAdvice, mdp: &Mdp) -> String {
    spaced_json(&AdviceJson {
        method,
        pass,
        record: ViolationJson::new(&a.record, mdp),
        status: a.status.as_str(),
        alternative: a.alternative.as_deref(),
        explanation: &a.explanation,
        raw: &a.raw,
        prompt_hash: a.prompt_hash.as_deref(),
    })
}

/// JSON-lines transcript of every advice, raw responses included.
pub fn render_advice_jsonl(reports: &[RepairReport], mdp: &Mdp) -> String {
    let mut out = String::new();
    for r in reports {
        for p in &r.passes {
            for a in &p.advice {
                out.push_str(&advice_line(r.method.as_str(), p.pass, a, mdp));
                out.push('\n');
            }
        }
    }
    out
}

/// Compact single-line JSON with a space after `:` and `,`.
pub fn spaced_json<T: Serialize>(value: &T) -> String {
    struct Spaced;
    impl serde_json::ser::Formatter for Spaced {
        fn begin_object_key<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
            if first {
                Ok(())
            } else {
                w.write_all(b", ")
            }
        }
        fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
            w.write_all(b": ")
        }
        fn begin_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
            if first {
                Ok(())
            } else {
                w.write_all(b", ")
            }
        }
    }
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Spaced);
    value.serialize(&mut ser).expect("value serializes");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}
