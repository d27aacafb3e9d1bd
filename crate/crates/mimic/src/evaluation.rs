//! LLM-judge instruments and deterministic corpus statistics.
//!
//! Three judging instruments ship as data files so they can be audited and
//! extended without touching code: a four-dimension authenticity rubric, an
//! 18-item group-behavior questionnaire (each item tagged with a behavior
//! category), and seven summarization-difficulty challenges. Every item is
//! scored by its own completion; a score outside the declared range is
//! re-prompted once and then left unscored — never clamped.
//!
//! Statistics are pure functions over the transcript value. The token-overlap
//! metric is defined here as the fraction of the transcript's distinct
//! 4-grams that also occur in the source: it measures verbatim copying, and
//! its absolute values are not comparable to externally published
//! token-overlap numbers computed by other formulas.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::{CompletionRequest, Gateway, GatewayError, Shape};
use crate::model::lines::render_dialogue;
use crate::model::{KnowledgeSource, Stats, Transcript, TurnFlag};
use crate::production::cast_roster;
use crate::prompts::PromptError;
use crate::StageContext;

#[derive(Debug, thiserror::Error)]
pub enum EvaluationError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] PromptError),
    #[error("failed to write report {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

// === Instruments ===

/// One authenticity dimension (coherence, consistency, ...).
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthenticityItem {
    pub key: String,
    pub name: String,
    pub description: String,
}

/// Behavior categories of the 18-item questionnaire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorCategory {
    Knowledge,
    Power,
    Conflict,
    Status,
    Trust,
    Support,
    Similarity,
    Fun,
}

impl BehaviorCategory {
    pub fn name(self) -> &'static str {
        match self {
            BehaviorCategory::Knowledge => "knowledge",
            BehaviorCategory::Power => "power",
            BehaviorCategory::Conflict => "conflict",
            BehaviorCategory::Status => "status",
            BehaviorCategory::Trust => "trust",
            BehaviorCategory::Support => "support",
            BehaviorCategory::Similarity => "similarity",
            BehaviorCategory::Fun => "fun",
        }
    }
}

/// One item of the behavior questionnaire (Q1..Q18).
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorItem {
    pub id: String,
    pub name: String,
    pub category: BehaviorCategory,
    pub description: String,
}

/// One summarization-difficulty challenge.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChallengeItem {
    pub key: String,
    pub name: String,
    pub definition: String,
    pub guiding_questions: Vec<String>,
}

#[derive(Deserialize)]
struct ItemsFile<T> {
    items: Vec<T>,
}

fn parse_items<T: for<'de> Deserialize<'de>>(raw: &str) -> Vec<T> {
    serde_json::from_str::<ItemsFile<T>>(raw)
        .expect("bundled instrument file is valid")
        .items
}

pub fn authenticity_items() -> &'static [AuthenticityItem] {
    static ITEMS: OnceLock<Vec<AuthenticityItem>> = OnceLock::new();
    ITEMS.get_or_init(|| parse_items(include_str!("../assets/instruments/authenticity.json")))
}

pub fn behavior_items() -> &'static [BehaviorItem] {
    static ITEMS: OnceLock<Vec<BehaviorItem>> = OnceLock::new();
    ITEMS.get_or_init(|| parse_items(include_str!("../assets/instruments/behavior.json")))
}

pub fn challenge_items() -> &'static [ChallengeItem] {
    static ITEMS: OnceLock<Vec<ChallengeItem>> = OnceLock::new();
    ITEMS.get_or_init(|| parse_items(include_str!("../assets/instruments/challenges.json")))
}

// === Reports ===

/// Verdict for one rubric item. `score: None` means the judge never produced
/// a usable in-range integer; the report stays partial rather than guessing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedScore {
    pub key: String,
    pub name: String,
    pub score: Option<u8>,
    #[serde(default)]
    pub rationale: String,
}

/// Verdict for one behavior item, keeping the questionnaire position and
/// category tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorScore {
    pub id: String,
    pub name: String,
    pub category: BehaviorCategory,
    pub score: Option<u8>,
    #[serde(default)]
    pub rationale: String,
}

/// Full judging output for one transcript. Item order follows the
/// instrument files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeReport {
    pub transcript_id: String,
    pub authenticity: Vec<NamedScore>,
    pub behavior: Vec<BehaviorScore>,
    pub challenges: Vec<NamedScore>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// The 18 (axis label, score) pairs in questionnaire order, ready for a
/// radar plot. Unscored items export as `None`.
pub fn radar_axes(report: &JudgeReport) -> Vec<(String, Option<u8>)> {
    report
        .behavior
        .iter()
        .map(|b| (b.name.clone(), b.score))
        .collect()
}

/// Writes `<transcript_id>.report.json` into `dir` and returns the path.
pub fn write_report(report: &JudgeReport, dir: &Path) -> Result<PathBuf, EvaluationError> {
    let path = dir.join(format!("{}.report.json", report.transcript_id));
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serialization is infallible");
    bytes.push(b'\n');
    std::fs::write(&path, bytes).map_err(|source| EvaluationError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

// === Judging ===

/// Judge-facing text of a transcript: every scene's dialogue in order, in
/// the canonical `>>role:` line format.
pub fn transcript_text(t: &Transcript) -> String {
    let roster = cast_roster(&t.cast);
    t.scenes
        .iter()
        .map(|s| render_dialogue(&s.turns, &roster))
        .collect::<Vec<_>>()
        .join("\n")
}

enum ScoreOutcome {
    Valid(u8, String),
    Invalid(String),
}

fn integer_of(v: &Value) -> Option<i64> {
    v.as_i64()
        .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
        .or_else(|| v.as_str().and_then(|s| s.trim().parse().ok()))
}

fn attempt_score(
    ctx: &StageContext,
    req: &CompletionRequest,
    range: &RangeInclusive<i64>,
) -> Result<ScoreOutcome, EvaluationError> {
    match ctx
        .gateway
        .complete_structured(req, &Shape::JsonObject, Gateway::DEFAULT_MAX_RETRIES)
    {
        Ok(value) => {
            let obj = value.into_object().expect("object shape parses to an object");
            let rationale = obj
                .get("rationale")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            match obj.get("score").and_then(integer_of) {
                Some(score) if range.contains(&score) => {
                    Ok(ScoreOutcome::Valid(score as u8, rationale))
                }
                Some(score) => Ok(ScoreOutcome::Invalid(format!(
                    "score {score} is outside {}..{}",
                    range.start(),
                    range.end()
                ))),
                None => Ok(ScoreOutcome::Invalid(
                    "reply carried no integer score".to_string(),
                )),
            }
        }
        Err(GatewayError::Malformed { .. }) => Ok(ScoreOutcome::Invalid(
            "reply was never a readable JSON object".to_string(),
        )),
        Err(e) => Err(e.into()),
    }
}

/// Scores one rubric item: one judging call, then at most one explicit
/// correction round for an out-of-range or unreadable score. Returns
/// `(None, "")` when both rounds fail, recording a warning.
fn score_item(
    ctx: &StageContext,
    label: &str,
    template: &str,
    vars: &[(&str, &str)],
    range: RangeInclusive<i64>,
    warnings: &mut Vec<String>,
) -> Result<(Option<u8>, String), EvaluationError> {
    let req = ctx.request(label, template, vars)?;
    let first = attempt_score(ctx, &req, &range)?;
    let reason = match first {
        ScoreOutcome::Valid(score, rationale) => return Ok((Some(score), rationale)),
        ScoreOutcome::Invalid(reason) => reason,
    };
    let mut corrected = req.clone();
    corrected.user_text = format!(
        "{}\n\nYour previous reply could not be used: {reason}. Respond again with the same \
         JSON shape and an integer score between {} and {}.",
        req.user_text,
        range.start(),
        range.end()
    );
    match attempt_score(ctx, &corrected, &range)? {
        ScoreOutcome::Valid(score, rationale) => Ok((Some(score), rationale)),
        ScoreOutcome::Invalid(reason) => {
            warnings.push(format!("{label}: {reason}; item left unscored"));
            Ok((None, String::new()))
        }
    }
}

/// Scores the four authenticity dimensions, one completion per dimension.
pub fn judge_authenticity(
    ctx: &StageContext,
    transcript: &Transcript,
    warnings: &mut Vec<String>,
) -> Result<Vec<NamedScore>, EvaluationError> {
    let text = transcript_text(transcript);
    let mut out = Vec::new();
    for item in authenticity_items() {
        let label = format!("judge.authenticity.{}", item.key);
        let (score, rationale) = score_item(
            ctx,
            &label,
            "judge_authenticity",
            &[
                ("item_name", item.name.as_str()),
                ("item_description", item.description.as_str()),
                ("transcript", text.as_str()),
            ],
            1..=5,
            warnings,
        )?;
        out.push(NamedScore {
            key: item.key.clone(),
            name: item.name.clone(),
            score,
            rationale,
        });
    }
    Ok(out)
}

/// Scores the 18 behavior items in questionnaire order, one completion per
/// item, carrying each item's category tag into the result.
pub fn judge_behavior(
    ctx: &StageContext,
    transcript: &Transcript,
    warnings: &mut Vec<String>,
) -> Result<Vec<BehaviorScore>, EvaluationError> {
    let text = transcript_text(transcript);
    let mut out = Vec::new();
    for item in behavior_items() {
        let label = format!("judge.behavior.{}", item.id);
        let (score, rationale) = score_item(
            ctx,
            &label,
            "judge_behavior",
            &[
                ("item_id", item.id.as_str()),
                ("item_name", item.name.as_str()),
                ("category", item.category.name()),
                ("item_description", item.description.as_str()),
                ("transcript", text.as_str()),
            ],
            1..=5,
            warnings,
        )?;
        out.push(BehaviorScore {
            id: item.id.clone(),
            name: item.name.clone(),
            category: item.category,
            score,
            rationale,
        });
    }
    Ok(out)
}

/// Scores the seven summarization challenges (0 = absent, 5 = severe), one
/// completion per challenge, embedding the definition and guiding questions.
pub fn judge_challenges(
    ctx: &StageContext,
    transcript: &Transcript,
    warnings: &mut Vec<String>,
) -> Result<Vec<NamedScore>, EvaluationError> {
    let text = transcript_text(transcript);
    let mut out = Vec::new();
    for item in challenge_items() {
        let label = format!("judge.challenges.{}", item.key);
        let questions = item
            .guiding_questions
            .iter()
            .map(|q| format!("- {q}"))
            .collect::<Vec<_>>()
            .join("\n");
        let (score, rationale) = score_item(
            ctx,
            &label,
            "judge_challenge",
            &[
                ("challenge_name", item.name.as_str()),
                ("definition", item.definition.as_str()),
                ("guiding_questions", questions.as_str()),
                ("transcript", text.as_str()),
            ],
            0..=5,
            warnings,
        )?;
        out.push(NamedScore {
            key: item.key.clone(),
            name: item.name.clone(),
            score,
            rationale,
        });
    }
    Ok(out)
}

/// Runs all three instruments and assembles the full report.
pub fn judge_transcript(
    ctx: &StageContext,
    transcript: &Transcript,
) -> Result<JudgeReport, EvaluationError> {
    let mut warnings = Vec::new();
    let authenticity = judge_authenticity(ctx, transcript, &mut warnings)?;
    let behavior = judge_behavior(ctx, transcript, &mut warnings)?;
    let challenges = judge_challenges(ctx, transcript, &mut warnings)?;
    Ok(JudgeReport {
        transcript_id: transcript.source_id.clone(),
        authenticity,
        behavior,
        challenges,
        warnings,
    })
}

// === Statistics ===

/// Canonical tokenization: lowercase, split on whitespace, strip leading and
/// trailing punctuation from each token, drop tokens with nothing left.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.to_lowercase()
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_string()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Fraction of the transcript's distinct 4-grams that also occur in the
/// source; 0 when the transcript has fewer than four tokens. Measures
/// verbatim copying, not semantic reuse.
pub fn token_overlap(transcript_text: &str, source_text: &str) -> f64 {
    let t = tokenize(transcript_text);
    if t.len() < 4 {
        return 0.0;
    }
    let grams: BTreeSet<&[String]> = t.windows(4).collect();
    let s = tokenize(source_text);
    let source_grams: BTreeSet<&[String]> = s.windows(4).collect();
    let matches = grams.iter().filter(|g| source_grams.contains(*g)).count();
    matches as f64 / grams.len() as f64
}

/// Dialogue-only text of a transcript: turn texts, no speaker labels, no
/// stage directions. This is what n_words, vocab_size and the stats-level
/// token overlap are computed over.
fn dialogue_text(t: &Transcript) -> String {
    t.scenes
        .iter()
        .flat_map(|s| s.turns.iter())
        .map(|turn| turn.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Computes the per-transcript statistics row. Pure and deterministic.
pub fn compute_stats(t: &Transcript, source: &KnowledgeSource) -> Stats {
    let mut speakers: BTreeSet<u32> = BTreeSet::new();
    let mut vocab: BTreeSet<String> = BTreeSet::new();
    let mut n_turns = 0u32;
    let mut n_words = 0u32;
    let mut n_effect_events = 0u32;
    for scene in &t.scenes {
        // Effect runs do not continue across a scene boundary.
        let mut in_run = false;
        for turn in &scene.turns {
            n_turns += 1;
            speakers.insert(turn.speaker_index);
            let tokens = tokenize(&turn.text);
            n_words += tokens.len() as u32;
            vocab.extend(tokens);
            let flagged = turn.annotations.contains(&TurnFlag::EffectInjected);
            if flagged && !in_run {
                n_effect_events += 1;
            }
            in_run = flagged;
        }
    }
    let roles: BTreeSet<String> = t.cast.iter().map(|p| p.role.to_lowercase()).collect();
    Stats {
        n_speakers: speakers.len() as u32,
        n_unique_roles: roles.len() as u32,
        n_turns,
        n_words,
        vocab_size: vocab.len() as u32,
        token_overlap: token_overlap(&dialogue_text(t), &source.full_text()),
        n_effect_events,
        summary_word_count: t.target_summary.word_count,
    }
}

/// Field-wise means across per-meeting rows: the corpus-table aggregation
/// (each meeting weighs the same regardless of its length).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanStats {
    pub n_meetings: usize,
    pub n_speakers: f64,
    pub n_unique_roles: f64,
    pub n_turns: f64,
    pub n_words: f64,
    pub vocab_size: f64,
    pub token_overlap: f64,
    pub n_effect_events: f64,
    pub summary_word_count: f64,
}

pub fn mean_stats(rows: &[Stats]) -> Option<MeanStats> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&Stats) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Some(MeanStats {
        n_meetings: rows.len(),
        n_speakers: mean(&|s| f64::from(s.n_speakers)),
        n_unique_roles: mean(&|s| f64::from(s.n_unique_roles)),
        n_turns: mean(&|s| f64::from(s.n_turns)),
        n_words: mean(&|s| f64::from(s.n_words)),
        vocab_size: mean(&|s| f64::from(s.vocab_size)),
        token_overlap: mean(&|s| s.token_overlap),
        n_effect_events: mean(&|s| f64::from(s.n_effect_events)),
        summary_word_count: mean(&|s| f64::from(s.summary_word_count)),
    })
}

// =============================================================================
