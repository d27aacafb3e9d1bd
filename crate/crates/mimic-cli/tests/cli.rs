//! End-to-end tests of the `mimic` binary: exit codes, file layout, and
//! output format, all driven through scripted completions.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mimic::evaluation::compute_stats;
use mimic::model::{parse_transcript, KnowledgeSource, TranscriptOrigin};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mimic"));
    // Keep the host environment out of scripted runs.
    cmd.env_remove("MIMIC_API_KEY")
        .env_remove("MIMIC_API_BASE")
        .env_remove("MIMIC_MODEL");
    cmd
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process exited normally")
}

/// Runs a scripted `generate` into `out_dir` and returns the process output.
fn scripted_generate(out_dir: &Path) -> Output {
    bin()
        .args(["generate", "--config"])
        .arg(fixture("sample_config.json"))
        .arg("--source")
        .arg(fixture("sample_source.json"))
        .arg("--scripted")
        .arg(fixture("scripted_meeting.json"))
        .arg("--out")
        .arg(out_dir)
        .output()
        .expect("binary runs")
}

// === generate ===

#[test]
fn generate_writes_a_valid_transcript_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = scripted_generate(dir.path());
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let meeting_path = dir.path().join("coldchain-demo.meeting.json");
    let trace_path = dir.path().join("coldchain-demo.trace.json");
    let transcript =
        parse_transcript(&fs::read(&meeting_path).unwrap()).expect("transcript file parses clean");
    assert_eq!(transcript.origin, TranscriptOrigin::Mimic);
    assert_eq!(transcript.scenes.len(), 2);
    assert_eq!(
        transcript.scenes.iter().map(|s| s.turns.len()).sum::<usize>(),
        8
    );

    let trace: Vec<serde_json::Value> =
        serde_json::from_slice(&fs::read(&trace_path).unwrap()).unwrap();
    assert_eq!(trace.len(), 35, "one record per completion call");
    for record in &trace {
        assert!(record.get("stage").is_some());
        assert!(record.get("wall_time_ms").is_some());
        assert!(record.get("cost_usd").is_some());
    }

    let stdout = stdout_of(&out);
    assert!(stdout.contains("coldchain-demo.meeting.json"), "{stdout}");
    assert!(stdout.contains("coldchain-demo.trace.json"), "{stdout}");
}

#[test]
fn generate_missing_source_exits_one_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["generate", "--config"])
        .arg(fixture("sample_config.json"))
        .args(["--source", "/nonexistent/gone.json"])
        .arg("--scripted")
        .arg(fixture("scripted_meeting.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("/nonexistent/gone.json"));
}

#[test]
fn generate_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let mut config: serde_json::Value =
        serde_json::from_slice(&fs::read(fixture("sample_config.json")).unwrap()).unwrap();
    config["surprise_knob"] = serde_json::json!(true);
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, serde_json::to_vec(&config).unwrap()).unwrap();

    let out = bin()
        .arg("generate")
        .arg("--config")
        .arg(&config_path)
        .arg("--source")
        .arg(fixture("sample_source.json"))
        .arg("--scripted")
        .arg(fixture("scripted_meeting.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("surprise_knob"), "{}", stderr_of(&out));
}

#[test]
fn generate_rejects_unknown_language_flag_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["generate", "--config"])
        .arg(fixture("sample_config.json"))
        .arg("--source")
        .arg(fixture("sample_source.json"))
        .arg("--scripted")
        .arg(fixture("scripted_meeting.json"))
        .arg("--out")
        .arg(dir.path())
        .args(["--lang", "fr"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1, "stderr: {}", stderr_of(&out));
}

#[test]
fn generate_budget_abort_exits_two_and_keeps_the_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["generate", "--config"])
        .arg(fixture("sample_config.json"))
        .arg("--source")
        .arg(fixture("sample_source.json"))
        .arg("--scripted")
        .arg(fixture("scripted_meeting.json"))
        .arg("--out")
        .arg(dir.path())
        .args(["--budget-usd", "0.0001"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("budget"), "{}", stderr_of(&out));
    assert!(
        dir.path().join("coldchain-demo.trace.json").exists(),
        "aborted runs still persist the call trace"
    );
    assert!(
        !dir.path().join("coldchain-demo.meeting.json").exists(),
        "no transcript is written for an aborted run"
    );
}

#[test]
fn generate_without_api_key_or_script_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["generate", "--config"])
        .arg(fixture("sample_config.json"))
        .arg("--source")
        .arg(fixture("sample_source.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("MIMIC_API_KEY"));
}

#[test]
fn api_key_is_redacted_from_error_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["generate", "--config"])
        .arg(fixture("sample_config.json"))
        .arg("--source")
        .arg(fixture("sample_source.json"))
        .arg("--out")
        .arg(dir.path())
        .env("MIMIC_API_KEY", "sk-sentinel-9876")
        .env("MIMIC_API_BASE", "http://127.0.0.1:1")
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    let stderr = stderr_of(&out);
    assert!(!stderr.contains("sk-sentinel-9876"), "key leaked: {stderr}");
    assert!(!stdout_of(&out).contains("sk-sentinel-9876"));
}

// === stats ===

#[test]
fn stats_prints_the_recomputed_table_row() {
    let dir = tempfile::tempdir().unwrap();
    let gen = scripted_generate(dir.path());
    assert_eq!(exit_code(&gen), 0);
    let meeting_path = dir.path().join("coldchain-demo.meeting.json");

    let out = bin()
        .arg("stats")
        .arg("--meeting")
        .arg(&meeting_path)
        .arg("--source")
        .arg(fixture("sample_source.json"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let transcript = parse_transcript(&fs::read(&meeting_path).unwrap()).unwrap();
    let source: KnowledgeSource =
        serde_json::from_slice(&fs::read(fixture("sample_source.json")).unwrap()).unwrap();
    let stats = compute_stats(&transcript, &source);
    let expected_row = format!(
        "{:<20} {:>8} {:>6} {:>6} {:>7} {:>7} {:>13.4} {:>7} {:>13}",
        "coldchain-demo",
        stats.n_speakers,
        stats.n_unique_roles,
        stats.n_turns,
        stats.n_words,
        stats.vocab_size,
        stats.token_overlap,
        stats.n_effect_events,
        stats.summary_word_count
    );
    let stdout = stdout_of(&out);
    assert!(stdout.contains("4gram_overlap"), "header present: {stdout}");
    assert!(stdout.contains(&expected_row), "row matches: {stdout}");
}

// === evaluate ===

#[test]
fn evaluate_scripted_judging_writes_a_full_report() {
    let dir = tempfile::tempdir().unwrap();
    let gen = scripted_generate(dir.path());
    assert_eq!(exit_code(&gen), 0);

    // One verdict per instrument item: 4 authenticity + 18 behavior + 7 challenges.
    let verdicts: Vec<String> = (0..29)
        .map(|_| r#"{"score": 4, "rationale": "holds up"}"#.to_string())
        .collect();
    let judge_path = dir.path().join("judge_responses.json");
    fs::write(&judge_path, serde_json::to_vec(&verdicts).unwrap()).unwrap();

    let out = bin()
        .arg("evaluate")
        .arg("--meeting")
        .arg(dir.path().join("coldchain-demo.meeting.json"))
        .arg("--scripted")
        .arg(&judge_path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("coldchain-demo.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["authenticity"].as_array().unwrap().len(), 4);
    assert_eq!(report["behavior"].as_array().unwrap().len(), 18);
    assert_eq!(report["challenges"].as_array().unwrap().len(), 7);
    for section in ["authenticity", "behavior", "challenges"] {
        for item in report[section].as_array().unwrap() {
            assert_eq!(item["score"], 4, "{section}: {item}");
        }
    }
    let stdout = stdout_of(&out);
    assert!(stdout.contains("authenticity 4.00"), "{stdout}");
    assert!(stdout.contains("0 unscored"), "{stdout}");
}

// === baseline ===

#[test]
fn baseline_scripted_run_is_flagged_partial_at_the_completion_cap() {
    let dir = tempfile::tempdir().unwrap();
    // Brainstorm (summary + tags) followed by the opening chunk and nine
    // continuations; each chunk is far too short to reach the token target.
    let mut responses = vec![
        "A short briefing on vaccine cold-chain logistics.".to_string(),
        r#"["cold chain", "vaccines", "logistics", "refrigeration", "clinics"]"#.to_string(),
    ];
    for i in 0..10 {
        responses.push(format!(
            ">>Host: Point {i} on the cold chain.\n>>Analyst: Noted, moving on."
        ));
    }
    let script_path = dir.path().join("baseline_responses.json");
    fs::write(&script_path, serde_json::to_vec(&responses).unwrap()).unwrap();

    let out = bin()
        .args(["baseline", "--config"])
        .arg(fixture("sample_config.json"))
        .arg("--source")
        .arg(fixture("sample_source.json"))
        .arg("--scripted")
        .arg(&script_path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let transcript =
        parse_transcript(&fs::read(dir.path().join("coldchain-demo.meeting.json")).unwrap())
            .unwrap();
    assert_eq!(transcript.origin, TranscriptOrigin::Omniscient);
    assert!(!transcript.scenes.is_empty());
    assert!(transcript.scenes.iter().any(|s| !s.turns.is_empty()));
    assert!(
        transcript.warnings.iter().any(|w| w.contains("partial")),
        "completion cap leaves a partial-output warning: {:?}",
        transcript.warnings
    );
    assert!(dir.path().join("coldchain-demo.trace.json").exists());
}

// === batch ===

fn write_batch_sources(dir: &Path, ids: &[&str]) {
    let mut source: serde_json::Value =
        serde_json::from_slice(&fs::read(fixture("sample_source.json")).unwrap()).unwrap();
    for id in ids {
        source["id"] = serde_json::json!(id);
        fs::write(
            dir.join(format!("{id}.json")),
            serde_json::to_vec_pretty(&source).unwrap(),
        )
        .unwrap();
    }
}

fn run_batch(sources: &Path, out: &Path, parallelism: u32) -> Output {
    bin()
        .args(["batch", "--config"])
        .arg(fixture("sample_config.json"))
        .arg("--source")
        .arg(sources)
        .arg("--out")
        .arg(out)
        .args(["--seed", "42"])
        .args(["--parallelism", &parallelism.to_string()])
        .arg("--scripted")
        .arg(fixture("scripted_meeting.json"))
        .output()
        .unwrap()
}

fn manifest_assignments(out: &Path) -> Vec<(String, String, u64, u64, String)> {
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    manifest["meetings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| {
            (
                m["source_id"].as_str().unwrap().to_string(),
                m["meeting_type"].as_str().unwrap().to_string(),
                m["num_participants"].as_u64().unwrap(),
                m["seed"].as_u64().unwrap(),
                m["status"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn batch_sampling_is_identical_across_runs_and_parallelism() {
    let sources = tempfile::tempdir().unwrap();
    // These ids all sample a three-person cast under master seed 42, which is
    // what the scripted fixture can replay.
    write_batch_sources(sources.path(), &["src-21", "src-42", "src-45"]);

    let out_serial = tempfile::tempdir().unwrap();
    let out_parallel = tempfile::tempdir().unwrap();
    let serial = run_batch(sources.path(), out_serial.path(), 1);
    let parallel = run_batch(sources.path(), out_parallel.path(), 3);
    assert_eq!(exit_code(&serial), 0, "stderr: {}", stderr_of(&serial));
    assert_eq!(exit_code(&parallel), 0, "stderr: {}", stderr_of(&parallel));

    let a = manifest_assignments(out_serial.path());
    let b = manifest_assignments(out_parallel.path());
    assert_eq!(a, b, "per-meeting sampling ignores worker count");
    assert_eq!(a.len(), 3);
    for (source_id, _, num_participants, _, status) in &a {
        assert_eq!(*num_participants, 3, "{source_id}");
        assert_eq!(status, "done", "{source_id}");
    }
    let seeds: std::collections::BTreeSet<u64> = a.iter().map(|m| m.3).collect();
    assert_eq!(seeds.len(), 3, "per-source seeds differ");

    for id in ["src-21", "src-42", "src-45"] {
        for suffix in ["meeting", "trace"] {
            assert!(
                out_serial.path().join(format!("{id}.{suffix}.json")).exists(),
                "{id}.{suffix}.json"
            );
        }
    }
    assert!(stdout_of(&serial).contains("3 done, 0 failed"));
}

#[test]
fn batch_isolates_a_bad_source_and_still_succeeds() {
    let sources = tempfile::tempdir().unwrap();
    write_batch_sources(sources.path(), &["src-21", "src-42"]);
    fs::write(sources.path().join("src-99.json"), b"{ not json").unwrap();

    let out_dir = tempfile::tempdir().unwrap();
    let out = run_batch(sources.path(), out_dir.path(), 2);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let assignments = manifest_assignments(out_dir.path());
    assert_eq!(assignments.len(), 3);
    let failed: Vec<_> = assignments.iter().filter(|m| m.4 == "failed").collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].0, "src-99");
    assert!(stdout_of(&out).contains("2 done, 1 failed"));
}

#[test]
fn batch_rejects_zero_parallelism() {
    let sources = tempfile::tempdir().unwrap();
    write_batch_sources(sources.path(), &["src-21"]);
    let out_dir = tempfile::tempdir().unwrap();
    let out = run_batch(sources.path(), out_dir.path(), 0);
    assert_eq!(exit_code(&out), 1);
}
