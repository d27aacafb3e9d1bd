//! Single-model omniscient baseline: one writer sees the whole article and
//! produces the entire meeting, chunk by chunk, with no casting, scripting,
//! or per-participant knowledge boundaries.
//!
//! The result is a regular [`Transcript`] (origin `omniscient`, one scene)
//! so evaluation and statistics treat both generation modes identically.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::evaluation::compute_stats;
use crate::gateway::{estimate_tokens, GatewayError};
use crate::model::lines::parse_dialogue_discover;
use crate::model::{
    KnowledgeSource, ParticipantProfile, PersonalizedVocabulary, Scene, SceneSpec, SceneStatus,
    SpeakingStyle, TargetSummary, Transcript, TranscriptOrigin,
};
use crate::prompts::PromptError;
use crate::StageContext;

/// Hard cap on completions per baseline transcript (first call included).
/// Reaching it before the token target leaves the transcript flagged partial.
pub const MAX_COMPLETIONS: u32 = 10;

/// Lines of already-written transcript echoed into a continuation prompt.
const TAIL_LINES: usize = 5;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] PromptError),
    /// The model produced no parseable `>>role:` lines at all.
    #[error("baseline output contained no dialogue lines")]
    NoDialogue,
}

fn first_sentence(text: &str) -> String {
    let trimmed = text.trim();
    match trimmed.find(['.', '!', '?']) {
        Some(i) => trimmed[..=i].to_string(),
        None => trimmed.to_string(),
    }
}

/// Generates an omniscient baseline transcript: one full-meeting prompt,
/// then continuation prompts (each echoing the last [`TAIL_LINES`] lines)
/// until the estimated token count reaches `target_tokens` or the completion
/// cap is hit.
pub fn generate_omniscient(
    ctx: &StageContext,
    source: &KnowledgeSource,
    summary: &TargetSummary,
    target_tokens: u64,
) -> Result<Transcript, BaselineError> {
    debug_assert!(target_tokens >= 1, "token target must be positive");
    let mut warnings: Vec<String> = Vec::new();

    let num_participants = ctx.config.num_participants.to_string();
    let article = source.full_text();
    let first = ctx.request(
        "baseline.full",
        "omniscient",
        &[
            ("language", ctx.config.language.name()),
            ("meeting_type", &ctx.config.meeting_type),
            ("num_participants", &num_participants),
            ("article_title", &source.title),
            ("article", &article),
            ("summary", &summary.text),
        ],
    )?;
    let mut text = ctx.gateway.complete(&first)?;
    let mut completions = 1u32;

    while estimate_tokens(&text) < target_tokens && completions < MAX_COMPLETIONS {
        let tail = text
            .lines()
            .rev()
            .take(TAIL_LINES)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect::<Vec<_>>()
            .join("\n");
        let req = ctx.request(
            &format!("baseline.continue.{completions}"),
            "omniscient_continue",
            &[("language", ctx.config.language.name()), ("tail", &tail)],
        )?;
        let chunk = ctx.gateway.complete(&req)?;
        text.push('\n');
        text.push_str(&chunk);
        completions += 1;
    }
    if estimate_tokens(&text) < target_tokens {
        warnings.push(format!(
            "baseline: stopped at {} of {} target tokens after {} completions; transcript is partial",
            estimate_tokens(&text),
            target_tokens,
            completions
        ));
    }

    let (parsed, roster) = parse_dialogue_discover(&text);
    for w in parsed.warnings {
        warnings.push(format!("baseline: {w}"));
    }
    if parsed.turns.is_empty() {
        return Err(BaselineError::NoDialogue);
    }

    let cast: Vec<ParticipantProfile> = roster
        .iter()
        .map(|(index, role)| ParticipantProfile {
            index: *index,
            role: role.clone(),
            description: String::new(),
            expertise_area: String::new(),
            perspective: String::new(),
            speaking_style: SpeakingStyle::default(),
            personalized_vocabulary: PersonalizedVocabulary::default(),
            assigned_paragraph_ids: BTreeSet::new(),
        })
        .collect();

    let spec = SceneSpec {
        ordinal: 1,
        title: format!("Full meeting: {}", source.title),
        tldr: first_sentence(&summary.text),
        bullets: vec![
            "Cover the article's main topics".to_string(),
            "Reach the outcomes described in the target summary".to_string(),
        ],
    };
    let scene = Scene {
        tldr_after: spec.tldr.clone(),
        spec,
        behavior_assignments: Vec::new(),
        turns: parsed.turns,
        director_history: Vec::new(),
        votes: Vec::new(),
        status: SceneStatus::Accepted,
        warnings: Vec::new(),
    };

    let mut transcript = Transcript {
        config: ctx.config.clone(),
        source_id: source.id.clone(),
        origin: TranscriptOrigin::Omniscient,
        target_summary: summary.clone(),
        cast,
        scenes: vec![scene],
        trace: ctx.gateway.transcript_trace(),
        stats_cache: None,
        warnings,
    };
    transcript.stats_cache = Some(compute_stats(&transcript, source));
    Ok(transcript)
}

// =============================================================================
