//! `cfsafe` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use cfsafe::advisor::{Advisor, AdvisorConfig, AdvisorError, AdvisorKind, DEFAULT_API_KEY_ENV};
use cfsafe::builder::{build_induced, BuildError, BuildOptions};
use cfsafe::checker::{check, extract_frontier, CheckError, CheckOptions, NumericMode, SolverChoice};
use cfsafe::policy::{OverrideMap, PolicyEngine, PolicyError, PolicyModel, PolicyOptions};
use cfsafe::prism::{parse_model, ModelSource};
use cfsafe::property::SafetyProperty;
use cfsafe::repair::{run_pipeline, RepairError, RepairOptions};
use cfsafe::report::{frontier_json_line, render_advice_jsonl, render_json, render_text};
use cfsafe::Mdp;

#[derive(Parser)]
#[command(name = "cfsafe", version, about = "Verify, explain and repair RL policies on PRISM MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute P=? [ F "label" ] on the policy-induced chain.
    Check(CheckArgs),
    /// Print the violation frontier as JSON lines.
    Extract(ExtractArgs),
    /// Run verify, advise, patch and re-verify; write report files.
    Repair(Box<RepairArgs>),
}

#[derive(Args)]
struct Inputs {
    /// PRISM MDP file.
    model: PathBuf,
    /// Policy JSON file.
    policy: PathBuf,
    /// Property, e.g. 'P=? [ F "bad" ]'.
    property: String,
    /// JSON config file; flags take precedence over its keys.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Auto,
    Exact,
    Float,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SolverArg {
    Elimination,
    GaussSeidel,
}

#[derive(Args)]
struct EngineArgs {
    /// Numeric mode of the reachability solve.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Linear solver; Gauss–Seidel is also the fallback when elimination runs out of memory.
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Convergence threshold for Gauss–Seidel.
    #[arg(long)]
    tol: Option<f64>,
    /// Sweep cap for Gauss–Seidel.
    #[arg(long)]
    max_sweeps: Option<u64>,
    /// Abort when the induced chain exceeds this many states.
    #[arg(long)]
    state_limit: Option<usize>,
    /// Fail when the policy's unmasked top action is disabled.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Write the induced chain in explicit form.
    #[arg(long)]
    emit_dtmc: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct RepairArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    engine: EngineArgs,
    /// baseline, scripted, llm-desc or llm-prism; repeat or comma-separate for several columns.
    #[arg(long, value_delimiter = ',')]
    advisor: Vec<AdvisorKind>,
    /// Natural-language environment description (llm-desc).
    #[arg(long)]
    desc: Option<PathBuf>,
    /// Scripted advice file (scripted).
    #[arg(long)]
    script: Option<PathBuf>,
    /// OpenAI-compatible endpoint base URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model identifier sent to the endpoint.
    #[arg(long = "model", id = "llm_model", value_name = "NAME")]
    llm_model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    api_key_env: Option<String>,
    /// Response cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Request timeout in seconds.
    #[arg(long)]
    timeout: Option<u64>,
    /// Retries on rate limits, server errors and timeouts.
    #[arg(long)]
    max_retries: Option<u32>,
    /// Character budget for model text in llm-prism prompts.
    #[arg(long)]
    prompt_budget: Option<usize>,
    /// Repair rounds; later rounds never overwrite earlier patches.
    #[arg(long)]
    passes: Option<usize>,
    /// Patch with the second-best action where advice failed.
    #[arg(long)]
    fallback_baseline: bool,
    /// Directory for report files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Report file prefix; defaults to the model file stem.
    #[arg(long)]
    run_name: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(untagged)]
enum OneOrMany {
    #[default]
    None,
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ConfigFile {
    mode: Option<ModeArg>,
    solver: Option<SolverArg>,
    tol: Option<f64>,
    max_sweeps: Option<u64>,
    state_limit: Option<usize>,
    strict: Option<bool>,
    emit_dtmc: Option<PathBuf>,
    #[serde(default)]
    advisor: OneOrMany,
    desc: Option<PathBuf>,
    script: Option<PathBuf>,
    endpoint: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    cache: Option<PathBuf>,
    timeout: Option<u64>,
    max_retries: Option<u32>,
    prompt_budget: Option<usize>,
    passes: Option<usize>,
    fallback_baseline: Option<bool>,
    out_dir: Option<PathBuf>,
    run_name: Option<String>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<(Self, PathBuf), Failure> {
        let Some(path) = path else {
            return Ok((ConfigFile::default(), PathBuf::new()));
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg = serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }
}

enum Failure {
    Usage(String),
    Model(String),
    /// Positioned parse diagnostics, already prefixed with their severity.
    Diagnostics(String),
    Advisor(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Model(_) | Failure::Diagnostics(_) => 2,
            Failure::Advisor(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Model(m) | Failure::Diagnostics(m) | Failure::Advisor(m) => m,
        }
    }
}

impl From<PolicyError> for Failure {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Model(e.to_string()),
        }
    }
}

impl From<BuildError> for Failure {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Policy(p) => p.into(),
            _ => Failure::Model(e.to_string()),
        }
    }
}

impl From<CheckError> for Failure {
    fn from(e: CheckError) -> Self {
        Failure::Model(e.to_string())
    }
}

impl From<AdvisorError> for Failure {
    fn from(e: AdvisorError) -> Self {
        match e {
            AdvisorError::Config(_) | AdvisorError::Io { .. } | AdvisorError::Script(_) => {
                Failure::Usage(e.to_string())
            }
            AdvisorError::Policy(p) => p.into(),
            AdvisorError::Model(_) => Failure::Model(e.to_string()),
            _ => Failure::Advisor(e.to_string()),
        }
    }
}

impl From<RepairError> for Failure {
    fn from(e: RepairError) -> Self {
        match e {
            RepairError::NoPasses => Failure::Usage(e.to_string()),
            RepairError::Policy(p) => p.into(),
            RepairError::Build(b) => b.into(),
            RepairError::Check(c) => c.into(),
            RepairError::Advisor(a) => a.into(),
        }
    }
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

struct Loaded {
    mdp: Mdp,
    policy: PolicyModel,
    property: SafetyProperty,
}

fn load_inputs(inputs: &Inputs) -> Result<Loaded, Failure> {
    let property = SafetyProperty::parse(&inputs.property).map_err(|e| Failure::Usage(e.to_string()))?;
    let source = ModelSource::from_file(&inputs.model)
        .map_err(|e| Failure::Usage(format!("cannot read model {}: {e}", inputs.model.display())))?;
    let mdp = parse_model(&source).map_err(|diags| {
        let lines: Vec<String> = diags
            .iter()
            .map(|d| format!("{}:{d}", inputs.model.display()))
            .collect();
        Failure::Diagnostics(lines.join("\n"))
    })?;
    let policy = PolicyModel::load(&inputs.policy).map_err(|e| match e {
        PolicyError::Io(io) => Failure::Usage(format!("cannot read policy {}: {io}", inputs.policy.display())),
        other => Failure::Model(format!("{}: {other}", inputs.policy.display())),
    })?;
    Ok(Loaded {
        mdp,
        policy,
        property,
    })
}

fn engine_options(args: &EngineArgs, cfg: &ConfigFile) -> (PolicyOptions, BuildOptions, CheckOptions) {
    let mut check = CheckOptions::default();
    if let Some(m) = args.mode.or(cfg.mode) {
        check.mode = match m {
            ModeArg::Auto => NumericMode::Auto,
            ModeArg::Exact => NumericMode::Exact,
            ModeArg::Float => NumericMode::Float,
        };
    }
    if let Some(s) = args.solver.or(cfg.solver) {
        check.solver = match s {
            SolverArg::Elimination => SolverChoice::Elimination,
            SolverArg::GaussSeidel => SolverChoice::GaussSeidel,
        };
    }
    if let Some(t) = args.tol.or(cfg.tol) {
        check.tol = t;
    }
    if let Some(m) = args.max_sweeps.or(cfg.max_sweeps) {
        check.max_sweeps = m;
    }
    let mut build = BuildOptions::default();
    if let Some(l) = args.state_limit.or(cfg.state_limit) {
        build.state_limit = l;
    }
    let policy = PolicyOptions {
        strict: args.strict || cfg.strict.unwrap_or(false),
    };
    (policy, build, check)
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_check(args: CheckArgs) -> Result<(), Failure> {
    let (cfg, base) = ConfigFile::load(args.inputs.config.as_deref())?;
    let loaded = load_inputs(&args.inputs)?;
    let (popts, bopts, copts) = engine_options(&args.engine, &cfg);
    let engine = PolicyEngine::new(&loaded.policy, &loaded.mdp, popts)?;
    let chain = build_induced(&engine, &OverrideMap::new(), &bopts)?;
    warn_all(chain.warnings());
    let emit = args.emit_dtmc.or(cfg.emit_dtmc.map(|p| resolve(&base, p)));
    if let Some(path) = emit {
        std::fs::write(&path, chain.to_explicit_text())
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    let m = check(&chain, &loaded.property, &copts)?;
    println!("{}", m.value);
    let mut details = format!("{}: ", m.property);
    if let Some(q) = &m.exact {
        details.push_str(&format!("exact {q}, "));
    }
    details.push_str(&format!(
        "{}, {}, {} states, {} transitions",
        m.mode.as_str(),
        m.solver.as_str(),
        chain.reachable_count(),
        chain.transition_count()
    ));
    if let (Some(it), Some(res)) = (m.iterations, m.residual) {
        details.push_str(&format!(", {it} sweeps, residual {res:e}"));
    }
    println!("{details}");
    Ok(())
}

fn cmd_extract(args: ExtractArgs) -> Result<(), Failure> {
    let (cfg, _) = ConfigFile::load(args.inputs.config.as_deref())?;
    let loaded = load_inputs(&args.inputs)?;
    let (popts, bopts, _) = engine_options(&args.engine, &cfg);
    let engine = PolicyEngine::new(&loaded.policy, &loaded.mdp, popts)?;
    let chain = build_induced(&engine, &OverrideMap::new(), &bopts)?;
    warn_all(chain.warnings());
    for r in extract_frontier(&chain, &loaded.property)? {
        println!("{}", frontier_json_line(&r, &loaded.mdp));
    }
    Ok(())
}

fn cmd_repair(args: RepairArgs) -> Result<(), Failure> {
    let (cfg, base) = ConfigFile::load(args.inputs.config.as_deref())?;
    let kinds: Vec<AdvisorKind> = if !args.advisor.is_empty() {
        args.advisor.clone()
    } else {
        let names = match &cfg.advisor {
            OneOrMany::None => Vec::new(),
            OneOrMany::One(s) => vec![s.clone()],
            OneOrMany::Many(v) => v.clone(),
        };
        names
            .iter()
            .map(|s| s.parse().map_err(Failure::Usage))
            .collect::<Result<_, _>>()?
    };
    if kinds.is_empty() {
        return Err(Failure::Usage("repair needs --advisor".into()));
    }
    let path_opt = |flag: &Option<PathBuf>, key: &Option<PathBuf>| {
        flag.clone().or_else(|| key.clone().map(|p| resolve(&base, p)))
    };
    let mut template = AdvisorConfig::new(AdvisorKind::Baseline);
    template.endpoint = args.endpoint.clone().or(cfg.endpoint.clone());
    template.model = args.llm_model.clone().or(cfg.model.clone());
    template.api_key_env = args
        .api_key_env
        .clone()
        .or(cfg.api_key_env.clone())
        .unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_string());
    template.description = path_opt(&args.desc, &cfg.desc);
    template.script = path_opt(&args.script, &cfg.script);
    template.cache_dir = path_opt(&args.cache, &cfg.cache);
    if let Some(t) = args.timeout.or(cfg.timeout) {
        template.timeout = Duration::from_secs(t);
    }
    if let Some(r) = args.max_retries.or(cfg.max_retries) {
        template.max_retries = r;
    }
    if let Some(b) = args.prompt_budget.or(cfg.prompt_budget) {
        template.prompt_budget = b;
    }
    let configs: Vec<AdvisorConfig> = kinds
        .iter()
        .map(|&kind| AdvisorConfig {
            kind,
            ..template.clone()
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }

    let loaded = load_inputs(&args.inputs)?;
    let (policy, build, check) = engine_options(&args.engine, &cfg);
    let options = RepairOptions {
        passes: args.passes.or(cfg.passes).unwrap_or(1),
        fallback_baseline: args.fallback_baseline || cfg.fallback_baseline.unwrap_or(false),
        policy,
        build,
        check,
    };
    let out_dir = path_opt(&args.out_dir, &cfg.out_dir).unwrap_or_else(|| PathBuf::from("."));
    let run_name = args.run_name.clone().or(cfg.run_name.clone()).unwrap_or_else(|| {
        args.inputs
            .model
            .file_stem()
            .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
    });

    let mut reports = Vec::new();
    for c in &configs {
        let advisor = Advisor::from_config(c)?;
        reports.push(run_pipeline(&loaded.mdp, &loaded.policy, &loaded.property, &advisor, &options)?);
    }
    for r in &reports {
        warn_all(&r.warnings);
    }
    let text = render_text(&reports);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", out_dir.display())))?;
    let outputs = [
        ("report.txt", text.clone()),
        ("report.json", render_json(&reports)),
        ("advice.jsonl", render_advice_jsonl(&reports, &loaded.mdp)),
    ];
    for (ext, body) in outputs {
        let path = out_dir.join(format!("{run_name}.{ext}"));
        std::fs::write(&path, body).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Repair(a) => cmd_repair(*a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match f {
                Failure::Diagnostics(_) => eprintln!("{}", f.message()),
                _ => eprintln!("error: {}", f.message()),
            }
            ExitCode::from(f.code())
        }
    }
}
