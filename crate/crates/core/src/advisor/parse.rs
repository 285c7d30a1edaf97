//! Extraction of the proposed alternative action from raw advice text.

use crate::checker::ViolationRecord;
use crate::model::{Mdp, ModelError};

use super::{AdviceStatus, CounterfactualAdvice};

const PROTOCOL_TAG: &str = "ALTERNATIVE:";

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Strips markdown decoration around a protocol line or token.
fn strip_decoration(s: &str) -> &str {
    s.trim_matches(|c: char| c.is_whitespace() || "*_`'\"#>-.,;:!()[]<>".contains(c))
}

/// Index and token of the last `ALTERNATIVE: <token>` line.
fn protocol_line(raw: &str) -> Option<(usize, String)> {
    let lines: Vec<&str> = raw.lines().collect();
    lines.iter().enumerate().rev().find_map(|(i, line)| {
        let line = line.trim_start_matches(|c: char| c.is_whitespace() || "*_#>-".contains(c));
        let head = line.get(..PROTOCOL_TAG.len())?;
        if !head.eq_ignore_ascii_case(PROTOCOL_TAG) {
            return None;
        }
        Some((i, strip_decoration(&line[PROTOCOL_TAG.len()..]).to_string()))
    })
}

fn mentions(text: &str, name: &str) -> bool {
    let hay = text.to_lowercase();
    let needle = name.to_lowercase();
    hay.match_indices(&needle).any(|(at, _)| {
        let before = hay[..at].chars().next_back();
        let after = hay[at + needle.len()..].chars().next();
        !before.is_some_and(is_word_char) && !after.is_some_and(is_word_char)
    })
}

pub fn parse_advice(
    raw: &str,
    record: &ViolationRecord,
    mdp: &Mdp,
) -> Result<CounterfactualAdvice, ModelError> {
    let enabled: Vec<&str> = mdp
        .enabled_actions(&record.state)?
        .into_iter()
        .map(|a| mdp.action_name(a))
        .collect();

    let protocol = protocol_line(raw);
    let explanation = match &protocol {
        Some((skip, _)) => raw
            .lines()
            .enumerate()
            .filter(|(i, _)| i != skip)
            .map(|(_, l)| l)
            .collect::<Vec<_>>()
            .join("\n")
            .trim()
            .to_string(),
        None => raw.trim().to_string(),
    };
    let advice = |status, alternative: Option<&str>| CounterfactualAdvice {
        record: record.clone(),
        explanation: explanation.clone(),
        alternative: alternative.map(str::to_string),
        status,
        raw: raw.to_string(),
        prompt_hash: None,
    };

    if let Some((_, token)) = &protocol {
        if token.eq_ignore_ascii_case("none") {
            return Ok(advice(AdviceStatus::NoAlternative, None));
        }
        if let Some(name) = mdp.actions.iter().find(|a| a.eq_ignore_ascii_case(token)) {
            return Ok(classify(name, &enabled, record, advice));
        }
    }

    let mut found: Vec<&str> = enabled.iter().copied().filter(|a| mentions(raw, a)).collect();
    if found.len() > 1 {
        found.retain(|a| *a != record.action);
    }
    Ok(match found.as_slice() {
        [name] => classify(name, &enabled, record, advice),
        _ => advice(AdviceStatus::FormatError, None),
    })
}

fn classify(
    name: &str,
    enabled: &[&str],
    record: &ViolationRecord,
    advice: impl Fn(AdviceStatus, Option<&str>) -> CounterfactualAdvice,
) -> CounterfactualAdvice {
    if !enabled.contains(&name) {
        advice(AdviceStatus::DisabledAction, Some(name))
    } else if name == record.action {
        advice(AdviceStatus::NoAlternative, Some(name))
    } else {
        advice(AdviceStatus::Ok, Some(name))
    }
}
