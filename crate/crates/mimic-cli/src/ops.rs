//! Single-target commands (generate, evaluate, stats, baseline) plus the
//! loading, gateway construction, and error-classification helpers shared
//! with the batch runner.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mimic::baseline::{generate_omniscient, BaselineError};
use mimic::evaluation::{compute_stats, judge_transcript, write_report, EvaluationError, JudgeReport};
use mimic::gateway::{
    Gateway, GatewayConfig, GatewayError, HttpBackend, HttpBackendConfig, ScriptedBackend,
};
use mimic::model::{parse_transcript, serialize_transcript, KnowledgeSource, MeetingConfig, Stats};
use mimic::pipeline::{run_meeting, PipelineError};
use mimic::postproduction::PostproductionError;
use mimic::preproduction::{brainstorm, PreproductionError};
use mimic::production::ProductionError;
use mimic::prompts::PromptLibrary;
use mimic::StageContext;

/// Token target for omniscient baseline transcripts, roughly matching the
/// length of a full multi-scene meeting.
pub const BASELINE_TARGET_TOKENS: u64 = 20_000;

// === Errors and exit codes ===

/// Command failure carrying its exit-code class: 1 for unusable inputs,
/// 2 for backend trouble (including exhausted budgets), 3 for generation
/// or evaluation failures.
#[derive(Debug)]
pub enum CmdError {
    Config(String),
    Backend(String),
    Pipeline(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 1,
            CmdError::Backend(_) => 2,
            CmdError::Pipeline(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CmdError::Config(m) | CmdError::Backend(m) | CmdError::Pipeline(m) => m,
        }
    }
}

fn classify_gateway(e: &GatewayError) -> CmdError {
    match e {
        GatewayError::Transport { .. } | GatewayError::Budget { .. } => {
            CmdError::Backend(e.to_string())
        }
        GatewayError::Malformed { .. } => CmdError::Pipeline(e.to_string()),
    }
}

pub fn classify_pipeline(e: &PipelineError) -> CmdError {
    let gateway = match e {
        PipelineError::Preproduction(PreproductionError::Gateway(g)) => Some(g),
        PipelineError::Production(ProductionError::Gateway(g)) => Some(g),
        PipelineError::Postproduction(PostproductionError::Gateway(g)) => Some(g),
        _ => None,
    };
    match gateway {
        Some(g) => classify_gateway(g),
        None => CmdError::Pipeline(e.to_string()),
    }
}

fn classify_preproduction(e: &PreproductionError) -> CmdError {
    match e {
        PreproductionError::Gateway(g) => classify_gateway(g),
        other => CmdError::Pipeline(other.to_string()),
    }
}

fn classify_baseline(e: &BaselineError) -> CmdError {
    match e {
        BaselineError::Gateway(g) => classify_gateway(g),
        other => CmdError::Pipeline(other.to_string()),
    }
}

fn classify_evaluation(e: &EvaluationError) -> CmdError {
    match e {
        EvaluationError::Gateway(g) => classify_gateway(g),
        other => CmdError::Pipeline(other.to_string()),
    }
}

/// Scrubs the live API key out of operator-facing text so no error path can
/// leak it to stderr.
pub fn redact(message: &str) -> String {
    match std::env::var("MIMIC_API_KEY") {
        Ok(key) if !key.trim().is_empty() => message.replace(&key, "[redacted]"),
        _ => message.to_string(),
    }
}

// === Input loading ===

/// Reads a meeting config, applies CLI overrides, and checks its
/// invariants. Unknown keys are rejected to fail fast on typos.
pub fn load_config(
    path: &Path,
    seed: Option<u64>,
    lang: Option<&str>,
) -> Result<MeetingConfig, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut config: MeetingConfig = serde_json::from_str(&text)
        .map_err(|e| CmdError::Config(format!("invalid config {}: {e}", path.display())))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(lang) = lang {
        config.language = lang.parse().map_err(CmdError::Config)?;
    }
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(CmdError::Config(format!(
            "invalid config {}: {}",
            path.display(),
            problems.join("; ")
        )));
    }
    Ok(config)
}

pub fn load_source(path: &Path) -> Result<KnowledgeSource, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::Config(format!("cannot read source {}: {e}", path.display())))?;
    let source: KnowledgeSource = serde_json::from_str(&text)
        .map_err(|e| CmdError::Config(format!("invalid source {}: {e}", path.display())))?;
    if source.id.trim().is_empty() {
        return Err(CmdError::Config(format!(
            "source {} has an empty id",
            path.display()
        )));
    }
    if source.paragraphs.is_empty() {
        return Err(CmdError::Config(format!(
            "source {} has no paragraphs",
            path.display()
        )));
    }
    Ok(source)
}

pub fn load_transcript(path: &Path) -> Result<mimic::model::Transcript, CmdError> {
    let bytes = fs::read(path)
        .map_err(|e| CmdError::Config(format!("cannot read meeting {}: {e}", path.display())))?;
    parse_transcript(&bytes)
        .map_err(|e| CmdError::Config(format!("invalid meeting {}: {e}", path.display())))
}

// === Gateway construction and output writing ===

/// Builds the completion gateway: a scripted replay when a fixture is given,
/// otherwise a live HTTP backend configured from the environment. Live runs
/// enable the request cache; scripted runs keep it off so call counts stay
/// exact.
pub fn build_gateway(
    scripted: Option<&Path>,
    budget_usd: Option<f64>,
) -> Result<Gateway, CmdError> {
    let mut gw_config = GatewayConfig::default();
    gw_config.budget_usd = budget_usd;
    match scripted {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CmdError::Config(format!("cannot read scripted fixture {}: {e}", path.display()))
            })?;
            let responses: Vec<String> = serde_json::from_str(&text).map_err(|e| {
                CmdError::Config(format!(
                    "scripted fixture {} is not a JSON list of strings: {e}",
                    path.display()
                ))
            })?;
            Ok(Gateway::new(
                Arc::new(ScriptedBackend::new(responses)),
                gw_config,
            ))
        }
        None => {
            let http_config = HttpBackendConfig::from_env().map_err(CmdError::Backend)?;
            let backend =
                HttpBackend::new(http_config).map_err(|e| CmdError::Backend(e.to_string()))?;
            gw_config.cache_enabled = true;
            Ok(Gateway::new(Arc::new(backend), gw_config))
        }
    }
}

pub fn ensure_out_dir(path: &Path) -> Result<(), CmdError> {
    fs::create_dir_all(path)
        .map_err(|e| CmdError::Config(format!("cannot create output dir {}: {e}", path.display())))
}

/// Writes through a sibling temp file and a rename so readers never observe
/// a half-written document.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Persists the timed call trace beside the transcript. Called on both
/// success and failure so an aborted run still leaves its partial trace.
pub fn write_trace(out: &Path, id: &str, gateway: &Gateway) -> Result<PathBuf, CmdError> {
    let path = out.join(format!("{id}.trace.json"));
    let mut bytes =
        serde_json::to_vec_pretty(&gateway.timed_trace()).expect("trace serialization is infallible");
    bytes.push(b'\n');
    write_atomic(&path, &bytes)
        .map_err(|e| CmdError::Pipeline(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_meeting(out: &Path, transcript: &mimic::model::Transcript) -> Result<PathBuf, CmdError> {
    let path = out.join(format!("{}.meeting.json", transcript.source_id));
    write_atomic(&path, &serialize_transcript(transcript))
        .map_err(|e| CmdError::Pipeline(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

// === Commands ===

fn supported_types_help() -> String {
    let names: Vec<&str> = mimic::model::catalog::MEETING_TYPES
        .iter()
        .map(|m| m.name)
        .collect();
    format!("Supported meeting types:\n  {}", names.join("\n  "))
}

#[derive(clap::Args)]
#[command(after_help = supported_types_help())]
pub struct GenerateArgs {
    /// Meeting configuration: flat JSON mirroring the config fields.
    #[arg(long)]
    pub config: PathBuf,
    /// Knowledge source: JSON article with id'd paragraphs.
    #[arg(long)]
    pub source: PathBuf,
    /// Output directory for the transcript and trace files.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the config's random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config's language (en or de).
    #[arg(long)]
    pub lang: Option<String>,
    /// Replay completions from a JSON list of scripted responses instead of
    /// calling a live backend.
    #[arg(long)]
    pub scripted: Option<PathBuf>,
    /// Abort once the estimated spend reaches this many USD.
    #[arg(long)]
    pub budget_usd: Option<f64>,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CmdError> {
    let config = load_config(&args.config, args.seed, args.lang.as_deref())?;
    let source = load_source(&args.source)?;
    ensure_out_dir(&args.out)?;
    let gateway = build_gateway(args.scripted.as_deref(), args.budget_usd)?;
    let prompts = PromptLibrary::builtin(config.language);
    let ctx = StageContext {
        gateway: &gateway,
        prompts: &prompts,
        config: &config,
    };

    let result = run_meeting(&ctx, &source);
    // The trace survives failed runs — a budget abort still documents every
    // call that was made.
    let trace_path = write_trace(&args.out, &source.id, &gateway)?;
    let transcript = result.map_err(|e| classify_pipeline(&e))?;
    let meeting_path = write_meeting(&args.out, &transcript)?;

    let stats = transcript.stats_cache.as_ref().expect("pipeline embeds stats");
    println!(
        "wrote {} ({} scenes, {} turns, {} words)",
        meeting_path.display(),
        transcript.scenes.len(),
        stats.n_turns,
        stats.n_words
    );
    println!(
        "wrote {} ({} calls, ${:.4} estimated spend)",
        trace_path.display(),
        transcript.trace.len(),
        gateway.spent_usd()
    );
    Ok(())
}

#[derive(clap::Args)]
pub struct EvaluateArgs {
    /// Transcript to judge (a .meeting.json file).
    #[arg(long)]
    pub meeting: PathBuf,
    /// Output directory for the score report.
    #[arg(long)]
    pub out: PathBuf,
    /// Replay judge completions from a JSON list of scripted responses.
    #[arg(long)]
    pub scripted: Option<PathBuf>,
    /// Abort once the estimated spend reaches this many USD.
    #[arg(long)]
    pub budget_usd: Option<f64>,
}

fn mean_score<'a>(scores: impl Iterator<Item = &'a Option<u8>>) -> (f64, usize) {
    let mut sum = 0u32;
    let mut n = 0usize;
    let mut unscored = 0usize;
    for s in scores {
        match s {
            Some(v) => {
                sum += u32::from(*v);
                n += 1;
            }
            None => unscored += 1,
        }
    }
    let mean = if n == 0 { f64::NAN } else { f64::from(sum) / n as f64 };
    (mean, unscored)
}

fn report_summary(report: &JudgeReport) -> String {
    let (auth, u1) = mean_score(report.authenticity.iter().map(|s| &s.score));
    let (beh, u2) = mean_score(report.behavior.iter().map(|s| &s.score));
    let (cha, u3) = mean_score(report.challenges.iter().map(|s| &s.score));
    let unscored = u1 + u2 + u3;
    format!(
        "authenticity {auth:.2}, behavior {beh:.2}, challenges {cha:.2}, {unscored} unscored"
    )
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CmdError> {
    let transcript = load_transcript(&args.meeting)?;
    ensure_out_dir(&args.out)?;
    let gateway = build_gateway(args.scripted.as_deref(), args.budget_usd)?;
    let prompts = PromptLibrary::builtin(transcript.config.language);
    let ctx = StageContext {
        gateway: &gateway,
        prompts: &prompts,
        config: &transcript.config,
    };
    let report = judge_transcript(&ctx, &transcript).map_err(|e| classify_evaluation(&e))?;
    let path = write_report(&report, &args.out).map_err(|e| classify_evaluation(&e))?;
    println!("wrote {} ({})", path.display(), report_summary(&report));
    Ok(())
}

#[derive(clap::Args)]
pub struct StatsArgs {
    /// Transcript to measure (a .meeting.json file).
    #[arg(long)]
    pub meeting: PathBuf,
    /// The knowledge source the transcript was generated from.
    #[arg(long)]
    pub source: PathBuf,
}

/// Renders the corpus-statistics table: a header line plus one row.
pub fn stats_table(id: &str, stats: &Stats) -> String {
    let header = format!(
        "{:<20} {:>8} {:>6} {:>6} {:>7} {:>7} {:>13} {:>7} {:>13}",
        "id", "speakers", "roles", "turns", "words", "vocab", "4gram_overlap", "effects", "summary_words"
    );
    let row = format!(
        "{:<20} {:>8} {:>6} {:>6} {:>7} {:>7} {:>13.4} {:>7} {:>13}",
        id,
        stats.n_speakers,
        stats.n_unique_roles,
        stats.n_turns,
        stats.n_words,
        stats.vocab_size,
        stats.token_overlap,
        stats.n_effect_events,
        stats.summary_word_count
    );
    format!("{header}\n{row}")
}

pub fn cmd_stats(args: &StatsArgs) -> Result<(), CmdError> {
    let transcript = load_transcript(&args.meeting)?;
    let source = load_source(&args.source)?;
    // Always recomputed from the document — the embedded cache is advisory.
    let stats = compute_stats(&transcript, &source);
    println!("{}", stats_table(&transcript.source_id, &stats));
    Ok(())
}

#[derive(clap::Args)]
#[command(after_help = supported_types_help())]
pub struct BaselineArgs {
    /// Meeting configuration: flat JSON mirroring the config fields.
    #[arg(long)]
    pub config: PathBuf,
    /// Knowledge source: JSON article with id'd paragraphs.
    #[arg(long)]
    pub source: PathBuf,
    /// Output directory for the transcript and trace files. Use a separate
    /// directory to keep baseline and staged runs apart — both write
    /// <id>.meeting.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the config's random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config's language (en or de).
    #[arg(long)]
    pub lang: Option<String>,
    /// Replay completions from a JSON list of scripted responses.
    #[arg(long)]
    pub scripted: Option<PathBuf>,
    /// Abort once the estimated spend reaches this many USD.
    #[arg(long)]
    pub budget_usd: Option<f64>,
}

/// Single-writer comparison condition: brainstorm the same target summary
/// the staged pipeline would use, then let one model write the whole meeting
/// from the full article.
pub fn cmd_baseline(args: &BaselineArgs) -> Result<(), CmdError> {
    let config = load_config(&args.config, args.seed, args.lang.as_deref())?;
    let source = load_source(&args.source)?;
    ensure_out_dir(&args.out)?;
    let gateway = build_gateway(args.scripted.as_deref(), args.budget_usd)?;
    let prompts = PromptLibrary::builtin(config.language);
    let ctx = StageContext {
        gateway: &gateway,
        prompts: &prompts,
        config: &config,
    };

    let result = brainstorm(&ctx, &source, &mut Vec::new())
        .map_err(|e| classify_preproduction(&e))
        .and_then(|(summary, _tags)| {
            generate_omniscient(&ctx, &source, &summary, BASELINE_TARGET_TOKENS)
                .map_err(|e| classify_baseline(&e))
        });
    let trace_path = write_trace(&args.out, &source.id, &gateway)?;
    let transcript = result?;
    let meeting_path = write_meeting(&args.out, &transcript)?;

    let stats = transcript.stats_cache.as_ref().expect("baseline embeds stats");
    println!(
        "wrote {} ({} turns, {} words)",
        meeting_path.display(),
        stats.n_turns,
        stats.n_words
    );
    println!(
        "wrote {} ({} calls, ${:.4} estimated spend)",
        trace_path.display(),
        transcript.trace.len(),
        gateway.spent_usd()
    );
    Ok(())
}

// =============================================================================
