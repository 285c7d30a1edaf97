//! PRISM-subset frontend: single-module `mdp` models with bounded integer
//! variables, labelled commands, labels and opaque reward blocks.

mod lexer;
mod parser;

use std::fmt::{self, Write as _};
use std::path::Path;

pub use parser::parse_model;

use crate::model::Mdp;

#[derive(Debug, Clone)]
pub struct ModelSource {
    pub text: String,
    pub origin: String,
}

impl ModelSource {
    pub fn inline(text: impl Into<String>) -> Self {
        ModelSource {
            text: text.into(),
            origin: "<inline>".into(),
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(ModelSource {
            text: std::fs::read_to_string(path)?,
            origin: path.display().to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

/// Canonical text for a model. Parsing the output yields an equal [`Mdp`].
pub fn emit_normalized(mdp: &Mdp) -> String {
    let mut out = String::from("mdp\n\n");
    if !mdp.constants.is_empty() {
        for c in &mdp.constants {
            let _ = writeln!(out, "const int {} = {};", c.name, c.value);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "module {}", mdp.module_name);
    for v in &mdp.variables {
        let _ = writeln!(out, "  {} : [{}..{}] init {};", v.name, v.lower, v.upper, v.init);
    }
    if !mdp.commands.is_empty() {
        out.push('\n');
    }
    for cmd in &mdp.commands {
        let branches: Vec<String> = cmd
            .updates
            .iter()
            .map(|u| {
                let body = if u.assignments.is_empty() {
                    "true".to_string()
                } else {
                    u.assignments
                        .iter()
                        .map(|(var, rhs)| format!("({}'={})", mdp.variables[*var].name, rhs))
                        .collect::<Vec<_>>()
                        .join(" & ")
                };
                format!("{}:{}", u.prob, body)
            })
            .collect();
        let _ = writeln!(
            out,
            "  [{}] {} -> {};",
            mdp.action_name(cmd.action),
            cmd.guard,
            branches.join(" + ")
        );
    }
    out.push_str("endmodule\n");
    if !mdp.labels.is_empty() {
        out.push('\n');
        for (name, e) in &mdp.labels {
            let _ = writeln!(out, "label \"{name}\" = {e};");
        }
    }
    for block in &mdp.rewards {
        out.push('\n');
        match &block.name {
            Some(n) => {
                let _ = writeln!(out, "rewards \"{n}\"");
            }
            None => out.push_str("rewards\n"),
        }
        for line in &block.lines {
            let _ = writeln!(out, "  {line}");
        }
        out.push_str("endrewards\n");
    }
    out
}

pub const TRUNCATION_MARKER: &str = "... (truncated)";

/// Normalized model text cut at a statement boundary so that the result,
/// marker included, fits in `budget` characters.
pub fn model_excerpt_for_prompt(mdp: &Mdp, budget: usize) -> String {
    let text = emit_normalized(mdp);
    if text.chars().count() <= budget {
        return text;
    }
    let room = budget.saturating_sub(TRUNCATION_MARKER.len() + 1);
    let mut cut = None;
    let mut used = 0;
    for line in text.split_inclusive('\n') {
        used += line.chars().count();
        if used > room {
            break;
        }
        if line.trim_end().ends_with(';') {
            cut = Some(used);
        }
    }
    let prefix: String = match cut {
        Some(n) => text.chars().take(n).collect(),
        None => format!("{}\n", text.lines().next().unwrap_or("mdp")),
    };
    format!("{prefix}{TRUNCATION_MARKER}\n")
}
