//! Prompt text for counterfactual questions.

use crate::checker::ViolationRecord;
use crate::model::{Mdp, ModelError};

/// `p` with three significant digits, trailing zeros dropped.
pub fn format_likelihood(p: f64) -> String {
    if p == 0.0 || !p.is_finite() {
        return format!("{p}");
    }
    let magnitude = p.abs().log10().floor() as i32;
    let decimals = (2 - magnitude).max(0) as usize;
    let mut s = format!("{p:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// The question asked about one violation record.
pub fn question(record: &ViolationRecord, mdp: &Mdp) -> String {
    format!(
        "What went wrong with likelihood {} in the state {} with action {} ending up in {}. Explain it to me.",
        format_likelihood(record.one_step_prob.to_f64()),
        mdp.render_state(&record.state),
        record.action,
        mdp.render_state(&record.successor),
    )
}

pub fn build_prompt(env_text: &str, record: &ViolationRecord, mdp: &Mdp) -> Result<String, ModelError> {
    let enabled: Vec<&str> = mdp
        .enabled_actions(&record.state)?
        .into_iter()
        .map(|a| mdp.action_name(a))
        .collect();
    Ok(format!(
        "{}\n\n{}\n\nEnd your answer with a single line: ALTERNATIVE: <one of: {}>\n",
        env_text.trim_end(),
        question(record, mdp),
        enabled.join(", ")
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_significant_digits() {
        assert_eq!(format_likelihood(0.5), "0.5");
        assert_eq!(format_likelihood(1.0 / 3.0), "0.333");
        assert_eq!(format_likelihood(0.265), "0.265");
        assert_eq!(format_likelihood(0.000_123_45), "0.000123");
        assert_eq!(format_likelihood(1.0), "1");
        assert_eq!(format_likelihood(0.9999), "1");
        assert_eq!(format_likelihood(0.25), "0.25");
    }
}
