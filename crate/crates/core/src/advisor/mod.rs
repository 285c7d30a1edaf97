//! Counterfactual advice for violation-frontier states: an explanation and
//! an alternative action, from an LLM, the second-best baseline or a script.

mod client;
mod parse;
mod prompt;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::checker::ViolationRecord;
use crate::model::{FeatureState, Mdp, ModelError};
use crate::policy::{PolicyEngine, PolicyError};
use crate::prism::model_excerpt_for_prompt;

pub use client::{
    cache_key, completions_url, ChatTransport, ClientSettings, DiskCache, HttpTransport, LlmClient,
    TransportError, TransportResponse,
};
pub use parse::parse_advice;
pub use prompt::{build_prompt, format_likelihood, question};

pub const DEFAULT_API_KEY_ENV: &str = "CF_SAFE_API_KEY";
pub const BASELINE_EXPLANATION: &str = "second-ranked action by policy score";

#[derive(Debug, Error)]
pub enum AdvisorError {
    #[error("advisor configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cache directory is locked by another run ({0}); remove the lock file if no run is active")]
    CacheLocked(PathBuf),
    #[error("environment variable {0} holding the API key is not set")]
    AuthMissing(String),
    #[error("request failed after {attempts} attempt(s): {detail}")]
    Http { attempts: u32, detail: String },
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("script file: {0}")]
    Script(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl AdvisorError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        AdvisorError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdvisorKind {
    LlmDescription,
    LlmPrism,
    Baseline,
    Scripted,
}

impl AdvisorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AdvisorKind::LlmDescription => "llm-desc",
            AdvisorKind::LlmPrism => "llm-prism",
            AdvisorKind::Baseline => "baseline",
            AdvisorKind::Scripted => "scripted",
        }
    }

    /// Column heading in comparison tables.
    pub fn column(self) -> &'static str {
        match self {
            AdvisorKind::LlmDescription => "LLM Desc.",
            AdvisorKind::LlmPrism => "LLM PRISM",
            AdvisorKind::Baseline => "Baseline",
            AdvisorKind::Scripted => "Scripted",
        }
    }

    pub fn is_llm(self) -> bool {
        matches!(self, AdvisorKind::LlmDescription | AdvisorKind::LlmPrism)
    }
}

impl fmt::Display for AdvisorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdvisorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm-desc" | "llm-description" => Ok(AdvisorKind::LlmDescription),
            "llm-prism" => Ok(AdvisorKind::LlmPrism),
            "baseline" => Ok(AdvisorKind::Baseline),
            "scripted" => Ok(AdvisorKind::Scripted),
            _ => Err(format!(
                "unknown advisor `{s}` (expected baseline, scripted, llm-desc or llm-prism)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdvisorConfig {
    pub kind: AdvisorKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: String,
    pub description: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
    /// Character budget for the model text in llm-prism prompts.
    pub prompt_budget: usize,
}

impl AdvisorConfig {
    pub fn new(kind: AdvisorKind) -> Self {
        AdvisorConfig {
            kind,
            endpoint: None,
            model: None,
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            description: None,
            script: None,
            cache_dir: None,
            timeout: Duration::from_secs(60),
            max_retries: 5,
            backoff_base: Duration::from_secs(1),
            prompt_budget: 12_000,
        }
    }

    pub fn validate(&self) -> Result<(), AdvisorError> {
        let missing = |what: &str| {
            Err(AdvisorError::Config(format!(
                "advisor {} requires {what}",
                self.kind
            )))
        };
        if self.kind.is_llm() {
            if self.endpoint.is_none() {
                return missing("an endpoint");
            }
            if self.model.is_none() {
                return missing("a model identifier");
            }
            if self.api_key_env.is_empty() {
                return missing("an API key variable name");
            }
        }
        if self.kind == AdvisorKind::LlmDescription && self.description.is_none() {
            return missing("a description file");
        }
        if self.kind == AdvisorKind::Scripted && self.script.is_none() {
            return missing("a script file");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdviceStatus {
    Ok,
    FormatError,
    DisabledAction,
    NoAlternative,
}

impl AdviceStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AdviceStatus::Ok => "ok",
            AdviceStatus::FormatError => "format_error",
            AdviceStatus::DisabledAction => "disabled_action",
            AdviceStatus::NoAlternative => "no_alternative",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualAdvice {
    pub record: ViolationRecord,
    pub explanation: String,
    /// `None` renders as `none`.
    pub alternative: Option<String>,
    pub status: AdviceStatus,
    pub raw: String,
    pub prompt_hash: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptEntry {
    state: Vec<i64>,
    action: String,
}

/// State → action mapping loaded from a scripted-advice file.
#[derive(Debug, Clone, Default)]
pub struct AdviceScript(HashMap<FeatureState, String>);

impl AdviceScript {
    pub fn from_json(text: &str) -> Result<Self, AdvisorError> {
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(text).map_err(|e| AdvisorError::Script(e.to_string()))?;
        let mut map = HashMap::new();
        for e in entries {
            let state = FeatureState::from(e.state);
            if map.insert(state.clone(), e.action).is_some() {
                return Err(AdvisorError::Script(format!("duplicate entry for state {state}")));
            }
        }
        Ok(AdviceScript(map))
    }

    pub fn load(path: &Path) -> Result<Self, AdvisorError> {
        let text = std::fs::read_to_string(path).map_err(|e| AdvisorError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn get(&self, s: &FeatureState) -> Option<&str> {
        self.0.get(s).map(String::as_str)
    }
}

enum Source {
    Baseline,
    Script(AdviceScript),
    Llm { env_text: Option<String>, client: LlmClient },
}

/// A configured advisor ready to answer violation records.
pub struct Advisor {
    kind: AdvisorKind,
    prompt_budget: usize,
    source: Source,
}

impl Advisor {
    /// Builds the advisor with the real HTTP transport.
    pub fn from_config(cfg: &AdvisorConfig) -> Result<Self, AdvisorError> {
        Self::with_transport(cfg, Box::new(HttpTransport::default()))
    }

    pub fn with_transport(cfg: &AdvisorConfig, transport: Box<dyn ChatTransport>) -> Result<Self, AdvisorError> {
        cfg.validate()?;
        let source = match cfg.kind {
            AdvisorKind::Baseline => Source::Baseline,
            AdvisorKind::Scripted => {
                Source::Script(AdviceScript::load(cfg.script.as_deref().expect("validated"))?)
            }
            AdvisorKind::LlmDescription | AdvisorKind::LlmPrism => {
                let env_text = match &cfg.description {
                    Some(p) if cfg.kind == AdvisorKind::LlmDescription => {
                        Some(std::fs::read_to_string(p).map_err(|e| AdvisorError::io(p, e))?)
                    }
                    _ => None,
                };
                let cache = cfg.cache_dir.as_deref().map(DiskCache::open).transpose()?;
                let settings = ClientSettings {
                    endpoint: cfg.endpoint.clone().expect("validated"),
                    model: cfg.model.clone().expect("validated"),
                    api_key_env: cfg.api_key_env.clone(),
                    timeout: cfg.timeout,
                    max_retries: cfg.max_retries,
                    backoff_base: cfg.backoff_base,
                };
                Source::Llm {
                    env_text,
                    client: LlmClient::new(settings, transport, cache),
                }
            }
        };
        Ok(Advisor {
            kind: cfg.kind,
            prompt_budget: cfg.prompt_budget,
            source,
        })
    }

    pub fn kind(&self) -> AdvisorKind {
        self.kind
    }

    /// Advice for each record, in input order.
    pub fn advise(
        &self,
        engine: &PolicyEngine<'_>,
        records: &[ViolationRecord],
    ) -> Result<Vec<CounterfactualAdvice>, AdvisorError> {
        let mdp = engine.mdp();
        let mut out = Vec::with_capacity(records.len());
        let prism_text = match &self.source {
            Source::Llm { env_text: None, .. } if !records.is_empty() => {
                Some(model_excerpt_for_prompt(mdp, self.prompt_budget))
            }
            _ => None,
        };
        for r in records {
            let advice = match &self.source {
                Source::Baseline => baseline_advice(engine, r)?,
                Source::Script(script) => scripted_advice(script, mdp, r)?,
                Source::Llm { env_text, client } => {
                    let env = env_text.as_deref().or(prism_text.as_deref()).unwrap_or_default();
                    let prompt = build_prompt(env, r, mdp)?;
                    let raw = client.request(&prompt)?;
                    let mut advice = parse_advice(&raw, r, mdp)?;
                    advice.prompt_hash = Some(cache_key(client.model(), &prompt));
                    advice
                }
            };
            debug_assert!(advice.status != AdviceStatus::Ok || advice.alternative.as_deref() != Some(r.action.as_str()));
            out.push(advice);
        }
        Ok(out)
    }
}

pub fn baseline_advice(
    engine: &PolicyEngine<'_>,
    record: &ViolationRecord,
) -> Result<CounterfactualAdvice, AdvisorError> {
    let second = engine.second_best(&record.state)?;
    let (status, alternative) = if second.no_alternative {
        (AdviceStatus::NoAlternative, None)
    } else {
        (
            AdviceStatus::Ok,
            Some(engine.mdp().action_name(second.action).to_string()),
        )
    };
    Ok(CounterfactualAdvice {
        record: record.clone(),
        explanation: BASELINE_EXPLANATION.to_string(),
        alternative,
        status,
        raw: String::new(),
        prompt_hash: None,
    })
}

fn scripted_advice(
    script: &AdviceScript,
    mdp: &Mdp,
    record: &ViolationRecord,
) -> Result<CounterfactualAdvice, AdvisorError> {
    let mut advice = CounterfactualAdvice {
        record: record.clone(),
        explanation: String::new(),
        alternative: None,
        status: AdviceStatus::FormatError,
        raw: String::new(),
        prompt_hash: None,
    };
    let Some(name) = script.get(&record.state) else {
        advice.explanation = "no scripted action for this state".into();
        return Ok(advice);
    };
    advice.raw = name.to_string();
    advice.explanation = "scripted".into();
    let Some(id) = mdp.action_id(name) else {
        return Ok(advice);
    };
    advice.alternative = Some(name.to_string());
    advice.status = if !mdp.is_enabled(&record.state, id)? {
        AdviceStatus::DisabledAction
    } else if name == record.action {
        AdviceStatus::NoAlternative
    } else {
        AdviceStatus::Ok
    };
    Ok(advice)
}
