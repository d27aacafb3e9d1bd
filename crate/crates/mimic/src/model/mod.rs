//! Domain types and invariants shared by every pipeline stage, plus the
//! on-disk transcript format.
//!
//! All values here are plain immutable data: stages construct new values
//! rather than mutating shared state, so everything is `Clone + Send + Sync`
//! by construction. Collections with identity semantics use `BTreeMap` /
//! `BTreeSet` so that serialization is byte-stable across runs and platforms.

pub mod catalog;
pub mod lines;
mod transcript;

pub use transcript::{
    parse_transcript, serialize_transcript, validate_transcript, ModelError, Violation,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Meeting language. The pipeline prompts are parameterized on the language
/// name, so adding a variant here is enough to extend coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Language {
    English,
    German,
}

impl Language {
    /// Full name substituted into prompt templates ("English" / "German").
    pub fn name(self) -> &'static str {
        match self {
            Language::English => "English",
            Language::German => "German",
        }
    }

    /// Two-letter code used by CLI flags and file naming.
    pub fn code(self) -> &'static str {
        match self {
            Language::English => "en",
            Language::German => "de",
        }
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" | "eng" | "english" => Ok(Language::English),
            "de" | "ger" | "deu" | "german" => Ok(Language::German),
            other => Err(format!("unsupported language '{other}' (expected en or de)")),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_effect_probability() -> f64 {
    0.25
}
fn default_max_refilm_cycles() -> u32 {
    3
}
fn default_vote_reminder_turn() -> u32 {
    50
}
fn default_hard_turn_cap() -> u32 {
    60
}
fn default_summary_word_limit() -> u32 {
    250
}
fn default_temperature() -> f64 {
    1.0
}

/// Per-meeting generation settings.
///
/// The turn-economy knobs encode the scene termination policy: participants
/// are nudged to wrap up once a scene reaches `vote_reminder_turn` turns and
/// the scene is force-ended at `hard_turn_cap` even if no vote ever passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeetingConfig {
    pub language: Language,
    /// Must name an entry of [`catalog::MEETING_TYPES`].
    pub meeting_type: String,
    pub num_participants: u32,
    pub seed: u64,
    /// Chance that a scene receives a naturalistic-disruption rewrite.
    #[serde(default = "default_effect_probability")]
    pub effect_probability: f64,
    /// Additional filming attempts the director may demand per scene.
    #[serde(default = "default_max_refilm_cycles")]
    pub max_refilm_cycles: u32,
    /// Turn index at which participants start being reminded to vote.
    #[serde(default = "default_vote_reminder_turn")]
    pub vote_reminder_turn: u32,
    /// Turn index at which a scene is force-ended. Must exceed the reminder.
    #[serde(default = "default_hard_turn_cap")]
    pub hard_turn_cap: u32,
    /// Upper bound on the target-summary length, in words.
    #[serde(default = "default_summary_word_limit")]
    pub summary_word_limit: u32,
    /// Sampling temperature applied to every completion unless overridden.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Optional per-stage temperature overrides keyed by stage-label prefix.
    #[serde(default)]
    pub stage_temperatures: BTreeMap<String, f64>,
}

impl MeetingConfig {
    /// Checks the config-level invariants, returning one message per problem.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if catalog::meeting_type(&self.meeting_type).is_none() {
            problems.push(format!(
                "meeting_type '{}' is not in the supported catalog",
                self.meeting_type
            ));
        }
        if self.num_participants < 2 {
            problems.push(format!(
                "num_participants must be at least 2, got {}",
                self.num_participants
            ));
        }
        if !(0.0..=1.0).contains(&self.effect_probability) {
            problems.push(format!(
                "effect_probability must lie in [0, 1], got {}",
                self.effect_probability
            ));
        }
        if self.vote_reminder_turn < 1 {
            problems.push("vote_reminder_turn must be at least 1".to_string());
        }
        if self.hard_turn_cap <= self.vote_reminder_turn {
            problems.push(format!(
                "hard_turn_cap ({}) must exceed vote_reminder_turn ({})",
                self.hard_turn_cap, self.vote_reminder_turn
            ));
        }
        if self.summary_word_limit < 1 {
            problems.push("summary_word_limit must be at least 1".to_string());
        }
        problems
    }

    /// Temperature for a call, honoring the longest matching stage override.
    pub fn temperature_for(&self, stage_label: &str) -> f64 {
        self.stage_temperatures
            .iter()
            .filter(|(prefix, _)| stage_label.starts_with(prefix.as_str()))
            .max_by_key(|(prefix, _)| prefix.len())
            .map(|(_, t)| *t)
            .unwrap_or(self.temperature)
    }
}

/// One paragraph of source material with a stable id used for knowledge
/// distribution and the non-omniscience audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paragraph {
    pub id: String,
    pub text: String,
}

/// The article a meeting is grounded in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeSource {
    pub id: String,
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
    /// Exactly 5 topic tags once brainstorming has run; empty before that.
    #[serde(default)]
    pub tags: Vec<String>,
}

impl KnowledgeSource {
    pub fn paragraph(&self, id: &str) -> Option<&Paragraph> {
        self.paragraphs.iter().find(|p| p.id == id)
    }

    /// Full article body with paragraphs separated by blank lines.
    pub fn full_text(&self) -> String {
        self.paragraphs
            .iter()
            .map(|p| p.text.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// The dense summary the meeting is steered to converge toward.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSummary {
    pub text: String,
    pub language: Language,
    pub word_count: u32,
}

/// How a participant talks; filled by the style-generation step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeakingStyle {
    pub tone: String,
    pub language_complexity: String,
    pub communication_style: String,
    pub sentence_structure: String,
    pub formality: String,
    pub other_traits: String,
}

/// Signature phrases that individualize a participant's voice.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PersonalizedVocabulary {
    pub filler_words: Vec<String>,
    pub catchphrases: Vec<String>,
    pub speech_patterns: Vec<String>,
    pub emotional_expressions: Vec<String>,
}

/// A cast member. `assigned_paragraph_ids` is the participant's private
/// slice of the source: prompts for this participant may quote those
/// paragraphs and no others.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantProfile {
    /// 1-based position in the cast; used as the speaker index in turns.
    pub index: u32,
    pub role: String,
    pub description: String,
    pub expertise_area: String,
    pub perspective: String,
    #[serde(default)]
    pub speaking_style: SpeakingStyle,
    #[serde(default)]
    pub personalized_vocabulary: PersonalizedVocabulary,
    #[serde(default)]
    pub assigned_paragraph_ids: BTreeSet<String>,
}

/// Per-scene social roles for one participant, with the catalog descriptions
/// that get embedded into that participant's prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorAssignment {
    pub participant_index: u32,
    pub social_roles: Vec<String>,
    pub role_descriptions: Vec<String>,
}

/// One planned scene from the meeting outline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// 1-based position in the outline.
    pub ordinal: u32,
    pub title: String,
    pub tldr: String,
    pub bullets: Vec<String>,
}

impl SceneSpec {
    /// Text block describing the scene for prompt embedding; also the
    /// outline slice the scene reviewer judges against.
    pub fn description_block(&self) -> String {
        let mut out = format!("{}\nTLDR: {}", self.title, self.tldr);
        for bullet in &self.bullets {
            out.push_str("\n- ");
            out.push_str(bullet);
        }
        out
    }
}

/// Marker attached to a turn by later pipeline stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnFlag {
    /// Turn was introduced or altered by the disruption-injection stage.
    EffectInjected,
    /// Turn text was rewritten during editing/humanizing.
    Edited,
    /// Turn at which the wrap-up reminder kicked in.
    ReminderTriggered,
}

/// A single utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub speaker_index: u32,
    pub text: String,
    /// Speaker proposed ending the scene with this turn.
    #[serde(default)]
    pub wants_vote: bool,
    /// Speaker's pick for who talks next; repaired to a valid peer index.
    #[serde(default)]
    pub nominated_next: Option<u32>,
    #[serde(default)]
    pub annotations: BTreeSet<TurnFlag>,
    /// Non-verbal context (e.g. a phone ringing) preceding this turn.
    #[serde(default)]
    pub stage_directions: Vec<String>,
}

impl Turn {
    pub fn new(speaker_index: u32, text: impl Into<String>) -> Self {
        Turn {
            speaker_index,
            text: text.into(),
            wants_vote: false,
            nominated_next: None,
            annotations: BTreeSet::new(),
            stage_directions: Vec::new(),
        }
    }

    pub fn with_flag(mut self, flag: TurnFlag) -> Self {
        self.annotations.insert(flag);
        self
    }
}

/// Scene-reviewer output: whether the scene may proceed and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectorVerdict {
    pub explanation: String,
    pub accept_scene: bool,
}

/// Outcome of one end-scene poll. The proposer's own ballot is always yes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteRecord {
    pub proposer_index: u32,
    /// 1-based turn count within the scene when the vote was held.
    pub at_turn: u32,
    pub ballots: BTreeMap<u32, bool>,
    pub yes_count: u32,
    pub passed: bool,
}

/// Whether the reviewer ultimately accepted the scene or the pipeline kept
/// the last attempt after exhausting re-filming cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneStatus {
    Accepted,
    Fallback,
}

/// One filmed (and possibly post-processed) scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub spec: SceneSpec,
    /// Per-scene social roles; empty for single-prompt baseline transcripts.
    #[serde(default)]
    pub behavior_assignments: Vec<BehaviorAssignment>,
    pub turns: Vec<Turn>,
    /// Short recap carried into later scenes as shared memory.
    pub tldr_after: String,
    #[serde(default)]
    pub director_history: Vec<DirectorVerdict>,
    #[serde(default)]
    pub votes: Vec<VoteRecord>,
    pub status: SceneStatus,
    /// Repair events observed while producing this scene.
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// How a transcript was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptOrigin {
    /// Staged multi-agent pipeline.
    Mimic,
    /// Single-model baseline that sees the whole source at once.
    Omniscient,
}

/// One logical completion call, as embedded in the transcript. Durations are
/// deliberately excluded so transcripts are byte-identical across runs; the
/// side-channel trace file carries wall times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub stage: String,
    /// Hex digest of (system_text, user_text, params).
    pub prompt_hash: String,
    pub request_tokens: u64,
    pub response_tokens: u64,
    pub cost_usd: f64,
    /// Served from the request cache instead of the backend.
    pub cached: bool,
}

/// Corpus statistics for a single transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stats {
    pub n_speakers: u32,
    pub n_unique_roles: u32,
    pub n_turns: u32,
    /// Dialogue tokens only — speaker labels and stage directions excluded.
    pub n_words: u32,
    pub vocab_size: u32,
    /// Fraction of the transcript's distinct 4-grams present in the source.
    pub token_overlap: f64,
    /// Count of contiguous runs of effect-injected turns.
    pub n_effect_events: u32,
    pub summary_word_count: u32,
}

/// A complete synthesized meeting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcript {
    pub config: MeetingConfig,
    pub source_id: String,
    pub origin: TranscriptOrigin,
    pub target_summary: TargetSummary,
    pub cast: Vec<ParticipantProfile>,
    pub scenes: Vec<Scene>,
    #[serde(default)]
    pub trace: Vec<TraceRecord>,
    #[serde(default)]
    pub stats_cache: Option<Stats>,
    /// Meeting-level repair events (tag truncation, casting re-prompts, …).
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Transcript {
    pub fn participant(&self, index: u32) -> Option<&ParticipantProfile> {
        self.cast.iter().find(|p| p.index == index)
    }

    /// Total estimated spend across all recorded calls.
    pub fn total_cost_usd(&self) -> f64 {
        self.trace.iter().map(|r| r.cost_usd).sum()
    }
}

/// Number of whitespace-separated words in a text.
pub fn count_words(text: &str) -> u32 {
    text.split_whitespace().count() as u32
}
