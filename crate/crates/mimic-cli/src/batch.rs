//! Batch generation: one meeting per source file, with per-source sampled
//! meeting types and cast sizes, bounded parallelism, and an atomically
//! updated run manifest.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mimic::model::{catalog, KnowledgeSource, MeetingConfig};
use mimic::pipeline::run_meeting;
use mimic::prompts::PromptLibrary;
use mimic::StageContext;

use crate::ops::{self, CmdError};

#[derive(clap::Args)]
#[command(long_about = "Generate one meeting per source file in a directory.\n\n\
    Each source's meeting type is sampled uniformly over the 14-entry catalog \
    and its cast size uniformly from 3 through 8, keyed only by the master seed \
    and the source id — results never depend on file order or parallelism. \
    Uniform sampling is a stated assumption, not a calibrated distribution.")]
pub struct BatchArgs {
    /// Base meeting configuration; meeting type, cast size, and seed are
    /// re-sampled per source.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory of knowledge-source JSON files (every *.json inside).
    #[arg(long)]
    pub source: PathBuf,
    /// Output directory for transcripts, traces, and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed; overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Meetings generated concurrently.
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// Replay completions from a JSON list of scripted responses (each
    /// meeting replays the same list from the top).
    #[arg(long)]
    pub scripted: Option<PathBuf>,
    /// Per-meeting spend cap in USD.
    #[arg(long)]
    pub budget_usd: Option<f64>,
    /// Override the config's language (en or de).
    #[arg(long)]
    pub lang: Option<String>,
}

// === Manifest ===

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeetingStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeetingEntry {
    pub source_id: String,
    pub source_path: String,
    pub meeting_type: String,
    pub num_participants: u32,
    pub seed: u64,
    pub status: MeetingStatus,
    pub cost_usd: f64,
    pub wall_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Totals {
    pub done: usize,
    pub failed: usize,
    pub cost_usd: f64,
    pub wall_ms: u64,
}

/// On-disk record of one batch run: the sampled plan up front, then per-
/// meeting outcomes as they land. Rewritten atomically after every update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub master_seed: u64,
    pub config: MeetingConfig,
    pub meetings: Vec<MeetingEntry>,
    pub totals: Totals,
}

impl RunManifest {
    fn recompute_totals(&mut self) {
        let mut totals = Totals::default();
        for m in &self.meetings {
            match m.status {
                MeetingStatus::Done => totals.done += 1,
                MeetingStatus::Failed => totals.failed += 1,
                MeetingStatus::Pending => {}
            }
            totals.cost_usd += m.cost_usd;
            totals.wall_ms += m.wall_ms;
        }
        self.totals = totals;
    }
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), CmdError> {
    let mut bytes =
        serde_json::to_vec_pretty(manifest).expect("manifest serialization is infallible");
    bytes.push(b'\n');
    ops::write_atomic(path, &bytes)
        .map_err(|e| CmdError::Pipeline(format!("cannot write {}: {e}", path.display())))
}

// === Per-source sampling ===

/// Stable 64-bit digest of (tag, master seed, source id) — the only inputs,
/// so the draw is identical on every platform, ordering, and thread count.
fn derive_u64(tag: &str, master_seed: u64, source_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    hasher.update([0u8]);
    hasher.update(master_seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(source_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest holds at least 8 bytes"))
}

/// Derives one source's meeting config from the base: meeting type uniform
/// over the catalog, cast size uniform in [3, 8], and a fresh seed.
pub fn sampled_config(base: &MeetingConfig, master_seed: u64, source_id: &str) -> MeetingConfig {
    let types = catalog::MEETING_TYPES;
    let type_index =
        (derive_u64("meeting-type", master_seed, source_id) % types.len() as u64) as usize;
    MeetingConfig {
        meeting_type: types[type_index].name.to_string(),
        num_participants: 3 + (derive_u64("cast-size", master_seed, source_id) % 6) as u32,
        seed: derive_u64("seed", master_seed, source_id),
        ..base.clone()
    }
}

// === Runner ===

struct Job {
    entry_index: usize,
    source: KnowledgeSource,
    config: MeetingConfig,
}

fn run_job(
    job: &Job,
    fixture: Option<&Vec<String>>,
    budget_usd: Option<f64>,
    out: &Path,
) -> Result<f64, CmdError> {
    let gateway = match fixture {
        Some(responses) => {
            let mut gw_config = mimic::gateway::GatewayConfig::default();
            gw_config.budget_usd = budget_usd;
            mimic::gateway::Gateway::new(
                std::sync::Arc::new(mimic::gateway::ScriptedBackend::new(responses.clone())),
                gw_config,
            )
        }
        None => ops::build_gateway(None, budget_usd)?,
    };
    let prompts = PromptLibrary::builtin(job.config.language);
    let ctx = StageContext {
        gateway: &gateway,
        prompts: &prompts,
        config: &job.config,
    };
    let result = run_meeting(&ctx, &job.source);
    ops::write_trace(out, &job.source.id, &gateway)?;
    let transcript = result.map_err(|e| ops::classify_pipeline(&e))?;
    let path = out.join(format!("{}.meeting.json", transcript.source_id));
    ops::write_atomic(&path, &mimic::model::serialize_transcript(&transcript))
        .map_err(|e| CmdError::Pipeline(format!("cannot write {}: {e}", path.display())))?;
    Ok(gateway.spent_usd())
}

pub fn cmd_batch(args: &BatchArgs) -> Result<(), CmdError> {
    if args.parallelism == 0 {
        return Err(CmdError::Config("--parallelism must be at least 1".into()));
    }
    let base = ops::load_config(&args.config, args.seed, args.lang.as_deref())?;
    let master_seed = base.seed;

    let mut files: Vec<PathBuf> = fs::read_dir(&args.source)
        .map_err(|e| {
            CmdError::Config(format!("cannot read source dir {}: {e}", args.source.display()))
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CmdError::Config(format!(
            "no .json source files in {}",
            args.source.display()
        )));
    }
    ops::ensure_out_dir(&args.out)?;

    let fixture: Option<Vec<String>> = match &args.scripted {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CmdError::Config(format!("cannot read scripted fixture {}: {e}", path.display()))
            })?;
            Some(serde_json::from_str(&text).map_err(|e| {
                CmdError::Config(format!(
                    "scripted fixture {} is not a JSON list of strings: {e}",
                    path.display()
                ))
            })?)
        }
        None => None,
    };

    // Plan every meeting up front; unreadable sources become failed entries
    // without stopping the rest.
    let mut meetings: Vec<MeetingEntry> = Vec::new();
    let mut jobs: Vec<Job> = Vec::new();
    for path in &files {
        let entry_index = meetings.len();
        match ops::load_source(path) {
            Ok(source) => {
                let config = sampled_config(&base, master_seed, &source.id);
                meetings.push(MeetingEntry {
                    source_id: source.id.clone(),
                    source_path: path.display().to_string(),
                    meeting_type: config.meeting_type.clone(),
                    num_participants: config.num_participants,
                    seed: config.seed,
                    status: MeetingStatus::Pending,
                    cost_usd: 0.0,
                    wall_ms: 0,
                    error: None,
                });
                jobs.push(Job {
                    entry_index,
                    source,
                    config,
                });
            }
            Err(e) => {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                meetings.push(MeetingEntry {
                    source_id: stem,
                    source_path: path.display().to_string(),
                    meeting_type: base.meeting_type.clone(),
                    num_participants: base.num_participants,
                    seed: master_seed,
                    status: MeetingStatus::Failed,
                    cost_usd: 0.0,
                    wall_ms: 0,
                    error: Some(ops::redact(e.message())),
                });
            }
        }
    }

    let mut manifest = RunManifest {
        run_id: format!("batch-{master_seed:016x}"),
        master_seed,
        config: base,
        meetings,
        totals: Totals::default(),
    };
    manifest.recompute_totals();
    let manifest_path = args.out.join("manifest.json");
    write_manifest(&manifest_path, &manifest)?;

    let manifest = Mutex::new(manifest);
    let queue: Mutex<VecDeque<usize>> = Mutex::new((0..jobs.len()).collect());
    let workers = args.parallelism.min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let next = queue.lock().unwrap().pop_front();
                let Some(index) = next else { break };
                let job = &jobs[index];
                let started = Instant::now();
                let outcome = run_job(job, fixture.as_ref(), args.budget_usd, &args.out);
                let wall_ms = started.elapsed().as_millis() as u64;
                let mut manifest = manifest.lock().unwrap();
                let entry = &mut manifest.meetings[job.entry_index];
                entry.wall_ms = wall_ms;
                match outcome {
                    Ok(cost) => {
                        entry.status = MeetingStatus::Done;
                        entry.cost_usd = cost;
                        println!("done {} ({}, {} participants)", entry.source_id,
                            entry.meeting_type, entry.num_participants);
                    }
                    Err(e) => {
                        entry.status = MeetingStatus::Failed;
                        entry.error = Some(ops::redact(e.message()));
                        eprintln!("failed {}: {}", entry.source_id, ops::redact(e.message()));
                    }
                }
                manifest.recompute_totals();
                if let Err(e) = write_manifest(&manifest_path, &manifest) {
                    eprintln!("warning: {}", ops::redact(e.message()));
                }
            });
        }
    });

    let manifest = manifest.into_inner().unwrap();
    println!(
        "batch: {} done, {} failed, ${:.4} estimated spend; manifest at {}",
        manifest.totals.done,
        manifest.totals.failed,
        manifest.totals.cost_usd,
        manifest_path.display()
    );
    if manifest.totals.done >= 1 {
        Ok(())
    } else {
        Err(CmdError::Pipeline("no meeting in the batch succeeded".into()))
    }
}

// =============================================================================
