//! Stages 4–5: filming (turn loop with private memory, nomination, and
//! end-scene voting) and scene review with bounded re-filming.
//!
//! Participants are non-omniscient: every prompt is rendered from a
//! [`ParticipantView`] holding exactly the information channels that
//! participant is entitled to — never the full source. The turn loop is
//! bounded by `hard_turn_cap` regardless of model behavior, and every repair
//! (malformed turn, invalid nomination, unreadable ballot) is recorded as a
//! scene warning.

use serde_json::Value;

use crate::gateway::repair::Shape;
use crate::gateway::{CompletionRequest, Gateway, GatewayError};
use crate::model::lines::render_dialogue;
use crate::model::{
    BehaviorAssignment, DirectorVerdict, KnowledgeSource, ParticipantProfile, Scene, SceneSpec,
    SceneStatus, Turn, TurnFlag, VoteRecord,
};
use crate::prompts::{roster_lines, PromptError};
use crate::StageContext;

/// Nudge appended to every participant view once the scene passes the
/// configured reminder turn without a successful end-scene vote.
pub const REMINDER_LINE: &str = "**Reminder:** This scene has been running for a long time. \
    Work toward wrapping up the discussion, and consider proposing a vote to end the scene.";

/// Placed text of a turn the speaker failed to produce (malformed response
/// after retries): an audible pass that keeps the rotation moving.
pub const PASS_TURN_TEXT: &str = "…";

#[derive(Debug, thiserror::Error)]
pub enum ProductionError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] PromptError),
}

/// Inter-scene memory available while filming one scene: everything earlier
/// scenes left behind, plus the source the cast draws private knowledge from.
pub struct SceneMemory<'a> {
    pub source: &'a KnowledgeSource,
    /// `tldr_after` of every completed scene, in order.
    pub prev_scene_tldrs: &'a [String],
    /// Turns of the immediately previous scene (views clamp to the last 3).
    pub prev_scene_turns: &'a [Turn],
}

/// Snapshot of the meeting at one instant of filming, from which a
/// participant's private view is cut.
pub struct MeetingState<'a> {
    pub source: &'a KnowledgeSource,
    pub cast: &'a [ParticipantProfile],
    pub behaviors: &'a [BehaviorAssignment],
    pub scene_spec: &'a SceneSpec,
    pub prev_scene_tldrs: &'a [String],
    pub prev_scene_turns: &'a [Turn],
    pub current_turns: &'a [Turn],
    pub director_feedback: Option<&'a str>,
    pub reminder_active: bool,
}

/// What one participant is allowed to see when speaking: their own profile,
/// behavior, and paragraphs, the shared scene context, and the peer roster.
/// Nothing else from the source ever enters a participant prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantView {
    pub own_profile: ParticipantProfile,
    pub own_behavior_assignment: BehaviorAssignment,
    /// Texts of the paragraphs assigned to this participant, in id order.
    pub own_paragraphs: Vec<String>,
    pub prev_scene_tldrs: Vec<String>,
    /// At most the final 3 turns of the previous scene.
    pub last_turns_prev_scene: Vec<Turn>,
    pub current_scene_turns: Vec<Turn>,
    pub scene_spec: SceneSpec,
    pub director_feedback: Option<String>,
    /// (index, role) of every *other* participant — the nomination choices.
    pub peer_roster: Vec<(u32, String)>,
    pub reminder_active: bool,
}

/// Cuts one participant's private view out of the full meeting state.
pub fn build_view(participant: &ParticipantProfile, state: &MeetingState) -> ParticipantView {
    let own_behavior_assignment = state
        .behaviors
        .iter()
        .find(|b| b.participant_index == participant.index)
        .cloned()
        .unwrap_or_else(|| BehaviorAssignment {
            participant_index: participant.index,
            social_roles: Vec::new(),
            role_descriptions: Vec::new(),
        });
    let own_paragraphs = participant
        .assigned_paragraph_ids
        .iter()
        .filter_map(|id| state.source.paragraph(id))
        .map(|p| p.text.clone())
        .collect();
    let last_turns_prev_scene = state
        .prev_scene_turns
        .iter()
        .rev()
        .take(3)
        .rev()
        .cloned()
        .collect();
    let peer_roster = state
        .cast
        .iter()
        .filter(|p| p.index != participant.index)
        .map(|p| (p.index, p.role.clone()))
        .collect();
    ParticipantView {
        own_profile: participant.clone(),
        own_behavior_assignment,
        own_paragraphs,
        prev_scene_tldrs: state.prev_scene_tldrs.to_vec(),
        last_turns_prev_scene,
        current_scene_turns: state.current_turns.to_vec(),
        scene_spec: state.scene_spec.clone(),
        director_feedback: state.director_feedback.map(str::to_string),
        peer_roster,
        reminder_active: state.reminder_active,
    }
}

/// Full (index, role) roster including the viewer, for rendering dialogue.
fn view_roster(view: &ParticipantView) -> Vec<(u32, String)> {
    let mut roster = view.peer_roster.clone();
    roster.push((view.own_profile.index, view.own_profile.role.clone()));
    roster.sort_by_key(|(index, _)| *index);
    roster
}

pub(crate) fn cast_roster(cast: &[ParticipantProfile]) -> Vec<(u32, String)> {
    cast.iter().map(|p| (p.index, p.role.clone())).collect()
}

fn join_or(items: &[String], sep: &str, empty: &str) -> String {
    if items.is_empty() {
        empty.to_string()
    } else {
        items.join(sep)
    }
}

/// Renders a participant view into the turn-taking completion request.
fn turn_request(
    ctx: &StageContext,
    view: &ParticipantView,
    label: &str,
) -> Result<CompletionRequest, ProductionError> {
    let p = &view.own_profile;
    let style = &p.speaking_style;
    let vocab = &p.personalized_vocabulary;
    let behavior = &view.own_behavior_assignment;
    let roster = view_roster(view);

    let scene_description = view.scene_spec.description_block();
    let director_comments = view
        .director_feedback
        .clone()
        .unwrap_or_else(|| "None.".to_string());
    let current_scene = if view.current_scene_turns.is_empty() {
        "(No dialogue yet — you open the scene.)".to_string()
    } else {
        render_dialogue(&view.current_scene_turns, &roster)
    };
    let prev_scene = if view.prev_scene_tldrs.is_empty() {
        "None.".to_string()
    } else {
        view.prev_scene_tldrs
            .iter()
            .enumerate()
            .map(|(i, tldr)| format!("Scene {}: {tldr}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let additional_input = if view.own_paragraphs.is_empty() {
        "None.".to_string()
    } else {
        view.own_paragraphs.join("\n\n")
    };
    let last_dialogue = if view.last_turns_prev_scene.is_empty() {
        "None.".to_string()
    } else {
        render_dialogue(&view.last_turns_prev_scene, &roster)
    };
    let reminder = if view.reminder_active {
        REMINDER_LINE.to_string()
    } else {
        String::new()
    };

    let req = ctx.request(
        label,
        "participant_turn",
        &[
            ("persona", &p.role),
            ("role", &p.role),
            ("language", ctx.config.language.name()),
            ("expertise", &p.expertise_area),
            ("perspective", &p.perspective),
            ("social_roles", &join_or(&behavior.social_roles, ", ", "None")),
            (
                "social_roles_descr",
                &join_or(&behavior.role_descriptions, " ", "None"),
            ),
            ("tone", &style.tone),
            ("language_complexity", &style.language_complexity),
            ("communication_style", &style.communication_style),
            ("sentence_structure", &style.sentence_structure),
            ("formality", &style.formality),
            ("other_traits", &style.other_traits),
            ("filler_words", &join_or(&vocab.filler_words, ", ", "None")),
            ("catchphrases", &join_or(&vocab.catchphrases, ", ", "None")),
            ("speech_patterns", &join_or(&vocab.speech_patterns, ", ", "None")),
            (
                "emotional_expressions",
                &join_or(&vocab.emotional_expressions, ", ", "None"),
            ),
            ("sceneDescription", &scene_description),
            ("directorComments", &director_comments),
            ("currentScene", &current_scene),
            ("prevScene", &prev_scene),
            ("additionalInput", &additional_input),
            ("lastDialogue", &last_dialogue),
            ("availableParticipants", &roster_lines(&view.peer_roster)),
            ("reminder", &reminder),
        ],
    )?;
    Ok(req)
}

// === Turn taking ===

fn parse_bool(value: &Value) -> Option<bool> {
    match value {
        Value::Bool(b) => Some(*b),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "yes" => Some(true),
            "false" | "no" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

fn parse_int(value: &Value) -> Option<i64> {
    match value {
        Value::Number(n) => n.as_i64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Next participant after `speaker` in index order, wrapping around.
fn round_robin_successor(speaker: u32, indices: &[u32]) -> u32 {
    indices
        .iter()
        .copied()
        .find(|&i| i > speaker)
        .or_else(|| indices.first().copied())
        .unwrap_or(speaker)
}

/// Number of sentence-ending punctuation runs; the 1–3 range is a soft
/// expectation, so this only needs to be roughly right.
fn sentence_count(text: &str) -> usize {
    text.split(['.', '!', '?'])
        .filter(|part| !part.trim().is_empty())
        .count()
}

/// Produces one turn for the viewing participant. Malformed responses after
/// retries degrade to a synthetic pass turn so the rotation never stalls;
/// invalid or self nominations are repaired to the round-robin successor.
pub fn take_turn(
    ctx: &StageContext,
    view: &ParticipantView,
    label: &str,
    warnings: &mut Vec<String>,
) -> Result<Turn, ProductionError> {
    let speaker = view.own_profile.index;
    let mut indices: Vec<u32> = view.peer_roster.iter().map(|(i, _)| *i).collect();
    indices.push(speaker);
    indices.sort_unstable();

    let req = turn_request(ctx, view, label)?;
    let obj = match ctx
        .gateway
        .complete_structured(&req, &Shape::JsonObject, Gateway::DEFAULT_MAX_RETRIES)
    {
        Ok(value) => value.into_object().unwrap_or_default(),
        Err(GatewayError::Malformed { .. }) => {
            warnings.push(format!(
                "{label}: malformed turn response after retries; inserted a synthetic pass turn"
            ));
            let mut turn = Turn::new(speaker, PASS_TURN_TEXT);
            turn.nominated_next = Some(round_robin_successor(speaker, &indices));
            return Ok(turn);
        }
        Err(e) => return Err(e.into()),
    };

    let text = obj
        .get("turn")
        .and_then(Value::as_str)
        .map(str::trim)
        .unwrap_or("")
        .to_string();
    let text = if text.is_empty() {
        warnings.push(format!(
            "{label}: turn response had no dialogue text; inserted a synthetic pass turn"
        ));
        PASS_TURN_TEXT.to_string()
    } else {
        let sentences = sentence_count(&text);
        if !(1..=3).contains(&sentences) {
            warnings.push(format!(
                "{label}: turn has {sentences} sentences, outside the expected 1-3"
            ));
        }
        text
    };

    let wants_vote = match obj.get("wants_vote").and_then(parse_bool) {
        Some(b) => b,
        None => {
            warnings.push(format!("{label}: missing or non-boolean wants_vote; assuming false"));
            false
        }
    };

    let raw_nominee = obj.get("next_speaker").and_then(parse_int);
    let nominee = raw_nominee
        .and_then(|n| u32::try_from(n).ok())
        .filter(|n| *n != speaker && indices.contains(n));
    let nominee = match nominee {
        Some(n) => n,
        None => {
            let repaired = round_robin_successor(speaker, &indices);
            warnings.push(format!(
                "{label}: nomination {:?} invalid for speaker {speaker}; \
                 using round-robin successor {repaired}",
                raw_nominee
            ));
            repaired
        }
    };

    let mut turn = Turn::new(speaker, text);
    turn.wants_vote = wants_vote;
    turn.nominated_next = Some(nominee);
    Ok(turn)
}

// === Starter selection ===

/// Picks which participant opens the scene: a single-integer completion,
/// re-prompted once when out of range, then falling back to participant 1.
pub fn select_starter(
    ctx: &StageContext,
    spec: &SceneSpec,
    cast: &[ParticipantProfile],
    behaviors: &[BehaviorAssignment],
    prev_tldr: Option<&str>,
    label: &str,
    warnings: &mut Vec<String>,
) -> Result<u32, ProductionError> {
    let n = cast.len() as i64;
    let num_agents = n.to_string();
    let agent_list = cast
        .iter()
        .map(|p| {
            let roles = behaviors
                .iter()
                .find(|b| b.participant_index == p.index)
                .map(|b| join_or(&b.social_roles, ", ", "none"))
                .unwrap_or_else(|| "none".to_string());
            format!(
                "{}: {} (expertise: {}; social roles: {roles})",
                p.index, p.role, p.expertise_area
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let scene_description = spec.description_block();
    let prev_scene = prev_tldr.unwrap_or("None (this is the first scene).");
    let req = ctx.request(
        label,
        "select_starter",
        &[
            ("num_agents", num_agents.as_str()),
            ("scene_description", &scene_description),
            ("agent_list", &agent_list),
            ("prev_scene", prev_scene),
        ],
    )?;

    let first = match ctx
        .gateway
        .complete_structured(&req, &Shape::Integer, Gateway::DEFAULT_MAX_RETRIES)
    {
        Ok(value) => value.into_integer(),
        Err(GatewayError::Malformed { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    if let Some(i) = first {
        if (1..=n).contains(&i) {
            return Ok(i as u32);
        }
        // Out of range: one explicit re-prompt before the fallback.
        let mut retry = req.clone();
        retry.user_text = format!(
            "{}\n\nYour previous answer {i} is out of range. Answer with a single \
             integer between 1 and {n}.",
            req.user_text
        );
        let second = match ctx
            .gateway
            .complete_structured(&retry, &Shape::Integer, Gateway::DEFAULT_MAX_RETRIES)
        {
            Ok(value) => value.into_integer(),
            Err(GatewayError::Malformed { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        if let Some(j) = second {
            if (1..=n).contains(&j) {
                return Ok(j as u32);
            }
        }
    }
    warnings.push(format!(
        "{label}: no usable starter index; defaulting to participant 1"
    ));
    Ok(cast.first().map(|p| p.index).unwrap_or(1))
}

// === Voting ===

/// Polls every non-proposer with one structured yes/no completion. The
/// proposer's ballot is always yes; the vote passes on a strict majority.
pub fn run_vote(
    ctx: &StageContext,
    state: &MeetingState,
    proposer_index: u32,
    at_turn: u32,
    label_prefix: &str,
    warnings: &mut Vec<String>,
) -> Result<VoteRecord, ProductionError> {
    let roster = cast_roster(state.cast);
    let scene_description = state.scene_spec.description_block();
    let current_scene = render_dialogue(state.current_turns, &roster);
    let proposer_role = state
        .cast
        .iter()
        .find(|p| p.index == proposer_index)
        .map(|p| p.role.clone())
        .unwrap_or_else(|| format!("Participant {proposer_index}"));

    let mut ballots = std::collections::BTreeMap::new();
    ballots.insert(proposer_index, true);
    for voter in state.cast.iter().filter(|p| p.index != proposer_index) {
        let label = format!("{label_prefix}.ballot.p{}", voter.index);
        let req = ctx.request(
            &label,
            "ballot",
            &[
                ("persona", voter.role.as_str()),
                ("scene_description", &scene_description),
                ("current_scene", &current_scene),
                ("proposer", &proposer_role),
            ],
        )?;
        let agree = match ctx
            .gateway
            .complete_structured(&req, &Shape::JsonObject, Gateway::DEFAULT_MAX_RETRIES)
        {
            Ok(value) => value
                .into_object()
                .unwrap_or_default()
                .get("agree")
                .and_then(parse_bool),
            Err(GatewayError::Malformed { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let agree = match agree {
            Some(b) => b,
            None => {
                warnings.push(format!("{label}: unreadable ballot; counted as no"));
                false
            }
        };
        ballots.insert(voter.index, agree);
    }

    let yes_count = ballots.values().filter(|b| **b).count() as u32;
    let passed = yes_count as usize * 2 > state.cast.len();
    Ok(VoteRecord {
        proposer_index,
        at_turn,
        ballots,
        yes_count,
        passed,
    })
}

// === Scene filming ===

/// Films one scene attempt: starter selection, then the nominee chain, with
/// end-scene votes after any turn whose speaker proposes one. Bounded by the
/// reminder turn (nudge + flag) and the hard cap (forced end + warning).
pub fn film_scene(
    ctx: &StageContext,
    spec: &SceneSpec,
    cast: &[ParticipantProfile],
    behaviors: &[BehaviorAssignment],
    memory: &SceneMemory,
    feedback: Option<&str>,
    attempt: u32,
) -> Result<Scene, ProductionError> {
    let prefix = format!("stage4.s{}.a{attempt}", spec.ordinal);
    let mut warnings = Vec::new();
    let mut speaker = select_starter(
        ctx,
        spec,
        cast,
        behaviors,
        memory.prev_scene_tldrs.last().map(String::as_str),
        &format!("{prefix}.starter"),
        &mut warnings,
    )?;
    let mut turns: Vec<Turn> = Vec::new();
    let mut votes: Vec<VoteRecord> = Vec::new();
    let mut reminder_active = false;

    loop {
        let k = turns.len() as u32 + 1;
        let participant = cast
            .iter()
            .find(|p| p.index == speaker)
            .expect("speaker index always comes from the cast");
        let state = MeetingState {
            source: memory.source,
            cast,
            behaviors,
            scene_spec: spec,
            prev_scene_tldrs: memory.prev_scene_tldrs,
            prev_scene_turns: memory.prev_scene_turns,
            current_turns: &turns,
            director_feedback: feedback,
            reminder_active,
        };
        let view = build_view(participant, &state);
        let turn = take_turn(ctx, &view, &format!("{prefix}.turn{k}.p{speaker}"), &mut warnings)?;
        let nominee = turn
            .nominated_next
            .expect("take_turn always repairs the nominee");
        let wants_vote = turn.wants_vote;
        turns.push(turn);

        if wants_vote {
            let state = MeetingState {
                source: memory.source,
                cast,
                behaviors,
                scene_spec: spec,
                prev_scene_tldrs: memory.prev_scene_tldrs,
                prev_scene_turns: memory.prev_scene_turns,
                current_turns: &turns,
                director_feedback: feedback,
                reminder_active,
            };
            let vote = run_vote(ctx, &state, speaker, k, &prefix, &mut warnings)?;
            let passed = vote.passed;
            votes.push(vote);
            if passed {
                break;
            }
        }
        if k >= ctx.config.hard_turn_cap {
            warnings.push(format!(
                "{prefix}: scene force-ended at the hard cap of {} turns",
                ctx.config.hard_turn_cap
            ));
            break;
        }
        if k == ctx.config.vote_reminder_turn {
            reminder_active = true;
            turns
                .last_mut()
                .expect("at least one turn placed")
                .annotations
                .insert(TurnFlag::ReminderTriggered);
        }
        speaker = nominee;
    }

    Ok(Scene {
        spec: spec.clone(),
        behavior_assignments: behaviors.to_vec(),
        turns,
        tldr_after: String::new(),
        director_history: Vec::new(),
        votes,
        status: SceneStatus::Accepted,
        warnings,
    })
}

// === Review and re-filming ===

/// Asks the reviewer whether the filmed scene realizes its outline slice.
/// Unreadable verdicts fail open: the scene is accepted with a warning.
pub fn review_scene(
    ctx: &StageContext,
    scene: &Scene,
    cast: &[ParticipantProfile],
    label: &str,
    warnings: &mut Vec<String>,
) -> Result<DirectorVerdict, ProductionError> {
    let sub_meeting = render_dialogue(&scene.turns, &cast_roster(cast));
    let sub_summary = scene.spec.description_block();
    let req = ctx.request(
        label,
        "director",
        &[
            ("language", ctx.config.language.name()),
            ("sub_meeting", &sub_meeting),
            ("sub_summary", &sub_summary),
        ],
    )?;
    let obj = match ctx
        .gateway
        .complete_structured(&req, &Shape::JsonObject, Gateway::DEFAULT_MAX_RETRIES)
    {
        Ok(value) => value.into_object().unwrap_or_default(),
        Err(GatewayError::Malformed { .. }) => {
            warnings.push(format!(
                "{label}: unreadable review verdict; accepting the scene by default"
            ));
            return Ok(DirectorVerdict {
                explanation: "(review unavailable; scene accepted by default)".to_string(),
                accept_scene: true,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let explanation = obj
        .get("explanation")
        .and_then(Value::as_str)
        .unwrap_or("")
        .trim()
        .to_string();
    let accept_scene = match obj.get("accept_scene").and_then(parse_bool) {
        Some(b) => b,
        None => {
            warnings.push(format!(
                "{label}: verdict missing accept_scene; accepting the scene by default"
            ));
            true
        }
    };
    Ok(DirectorVerdict {
        explanation,
        accept_scene,
    })
}

/// Films a scene under review: on rejection, re-films with all feedback so
/// far, up to `max_refilm_cycles` extra attempts. If every attempt is
/// rejected, the last one is kept with `status = fallback` — it incorporated
/// the most feedback.
pub fn film_with_qa(
    ctx: &StageContext,
    spec: &SceneSpec,
    cast: &[ParticipantProfile],
    behaviors: &[BehaviorAssignment],
    memory: &SceneMemory,
) -> Result<Scene, ProductionError> {
    let max_attempts = 1 + ctx.config.max_refilm_cycles;
    let mut history: Vec<DirectorVerdict> = Vec::new();
    let mut feedback_notes: Vec<String> = Vec::new();
    let mut last: Option<Scene> = None;

    for attempt in 1..=max_attempts {
        let feedback = if feedback_notes.is_empty() {
            None
        } else {
            Some(feedback_notes.join("\n\n"))
        };
        let mut scene = film_scene(ctx, spec, cast, behaviors, memory, feedback.as_deref(), attempt)?;
        let label = format!("stage5.s{}.a{attempt}.review", spec.ordinal);
        let mut review_warnings = Vec::new();
        let verdict = review_scene(ctx, &scene, cast, &label, &mut review_warnings)?;
        scene.warnings.extend(review_warnings);
        let accepted = verdict.accept_scene;
        let explanation = verdict.explanation.clone();
        history.push(verdict);
        if accepted {
            scene.director_history = history;
            scene.status = SceneStatus::Accepted;
            return Ok(scene);
        }
        feedback_notes.push(explanation);
        last = Some(scene);
    }

    let mut scene = last.expect("at least one filming attempt always runs");
    scene.warnings.push(format!(
        "stage5.s{}: all {max_attempts} filming attempts rejected; keeping the last",
        spec.ordinal
    ));
    scene.director_history = history;
    scene.status = SceneStatus::Fallback;
    Ok(scene)
}

/// Condenses an accepted scene into the 1–3 sentence recap later scenes see.
/// Review already gated the scene, so failures here degrade to the planned
/// TLDR rather than aborting the meeting; only budget exhaustion propagates.
pub fn summarize_scene(
    ctx: &StageContext,
    scene: &Scene,
    cast: &[ParticipantProfile],
    warnings: &mut Vec<String>,
) -> Result<String, ProductionError> {
    let label = format!("stage5.s{}.tldr", scene.spec.ordinal);
    let rendered = render_dialogue(&scene.turns, &cast_roster(cast));
    let req = ctx.request(
        &label,
        "scene_tldr",
        &[
            ("language", ctx.config.language.name()),
            ("scene", &rendered),
        ],
    )?;
    match ctx.gateway.complete(&req) {
        Ok(text) if !text.trim().is_empty() => Ok(text.trim().to_string()),
        Ok(_) => {
            warnings.push(format!(
                "{label}: empty summary response; using the planned TLDR"
            ));
            Ok(scene.spec.tldr.clone())
        }
        Err(e @ GatewayError::Budget { .. }) => Err(e.into()),
        Err(e) => {
            warnings.push(format!(
                "{label}: summary unavailable ({e}); using the planned TLDR"
            ));
            Ok(scene.spec.tldr.clone())
        }
    }
}

// =============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedBackend;
    use crate::model::tests::base_config;
    use crate::model::{MeetingConfig, Paragraph, PersonalizedVocabulary, SpeakingStyle};
    use crate::prompts::PromptLibrary;
    use std::collections::BTreeSet;

    fn cast_fixture(n: u32) -> Vec<ParticipantProfile> {
        (1..=n)
            .map(|i| ParticipantProfile {
                index: i,
                role: format!("Role{i}"),
                description: format!("Participant {i}."),
                expertise_area: format!("Area{i}"),
                perspective: format!("Perspective{i}"),
                speaking_style: SpeakingStyle::default(),
                personalized_vocabulary: PersonalizedVocabulary::default(),
                assigned_paragraph_ids: BTreeSet::from([format!("p{i}")]),
            })
            .collect()
    }

    fn behaviors_fixture(n: u32) -> Vec<BehaviorAssignment> {
        (1..=n)
            .map(|i| BehaviorAssignment {
                participant_index: i,
                social_roles: vec![if i == 1 { "Blocker" } else { "Follower" }.to_string()],
                role_descriptions: vec!["...".to_string()],
            })
            .collect()
    }

    fn source_fixture(n: u32) -> KnowledgeSource {
        KnowledgeSource {
            id: "src".into(),
            title: "Source".into(),
            paragraphs: (1..=n)
                .map(|i| Paragraph {
                    id: format!("p{i}"),
                    text: format!("Private background text number {i}."),
                })
                .collect(),
            tags: Vec::new(),
        }
    }

    fn spec_fixture() -> SceneSpec {
        SceneSpec {
            ordinal: 1,
            title: "Opening".into(),
            tldr: "The team opens the discussion.".into(),
            bullets: vec!["Kick things off".into()],
        }
    }

    fn run<T>(
        responses: &[&str],
        config: &MeetingConfig,
        f: impl FnOnce(&StageContext, &mut Vec<String>) -> T,
    ) -> (T, Vec<String>, ScriptedBackend) {
        let backend = ScriptedBackend::from_strs(responses);
        let gateway = Gateway::scripted(backend.clone());
        let prompts = PromptLibrary::builtin(crate::model::Language::English);
        let ctx = StageContext {
            gateway: &gateway,
            prompts: &prompts,
            config,
        };
        let mut warnings = Vec::new();
        let value = f(&ctx, &mut warnings);
        (value, warnings, backend)
    }

    fn turn_json(text: &str, wants_vote: bool, next: u32) -> String {
        serde_json::json!({"turn": text, "wants_vote": wants_vote, "next_speaker": next})
            .to_string()
    }

    // === select_starter ===

    #[test]
    fn starter_accepts_in_range_integer() {
        let cfg = base_config();
        let cast = cast_fixture(4);
        let (idx, warnings, backend) = run(&["3"], &cfg, |ctx, w| {
            select_starter(ctx, &spec_fixture(), &cast, &behaviors_fixture(4), None, "t.starter", w)
                .unwrap()
        });
        assert_eq!(idx, 3);
        assert!(warnings.is_empty());
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn starter_out_of_range_reprompts_once() {
        let cfg = base_config();
        let cast = cast_fixture(4);
        let (idx, warnings, backend) = run(&["9", "2"], &cfg, |ctx, w| {
            select_starter(ctx, &spec_fixture(), &cast, &behaviors_fixture(4), None, "t.starter", w)
                .unwrap()
        });
        assert_eq!(idx, 2);
        assert!(warnings.is_empty());
        assert_eq!(backend.calls(), 2);

        let (idx, warnings, backend) = run(&["9", "9"], &cfg, |ctx, w| {
            select_starter(ctx, &spec_fixture(), &cast, &behaviors_fixture(4), None, "t.starter", w)
                .unwrap()
        });
        assert_eq!(idx, 1);
        assert!(warnings.iter().any(|w| w.contains("defaulting")));
        assert_eq!(backend.calls(), 2);
    }

    // === build_view ===

    fn state_fixture<'a>(
        source: &'a KnowledgeSource,
        cast: &'a [ParticipantProfile],
        behaviors: &'a [BehaviorAssignment],
        spec: &'a SceneSpec,
        prev_tldrs: &'a [String],
        prev_turns: &'a [Turn],
        current: &'a [Turn],
    ) -> MeetingState<'a> {
        MeetingState {
            source,
            cast,
            behaviors,
            scene_spec: spec,
            prev_scene_tldrs: prev_tldrs,
            prev_scene_turns: prev_turns,
            current_turns: current,
            director_feedback: None,
            reminder_active: false,
        }
    }

    #[test]
    fn view_boundaries_and_privacy() {
        let source = source_fixture(3);
        let cast = cast_fixture(3);
        let behaviors = behaviors_fixture(3);
        let spec = spec_fixture();

        // First turn of the first scene: everything empty.
        let state = state_fixture(&source, &cast, &behaviors, &spec, &[], &[], &[]);
        let view = build_view(&cast[0], &state);
        assert!(view.last_turns_prev_scene.is_empty());
        assert!(view.prev_scene_tldrs.is_empty());
        assert_eq!(view.own_paragraphs, vec!["Private background text number 1."]);
        assert_eq!(
            view.peer_roster,
            vec![(2, "Role2".to_string()), (3, "Role3".to_string())]
        );

        // Previous scene had 7 turns: the view keeps exactly the last 3.
        let prev: Vec<Turn> = (1..=7).map(|i| Turn::new(1, format!("turn {i}"))).collect();
        let tldrs = vec!["Earlier recap.".to_string()];
        let state = state_fixture(&source, &cast, &behaviors, &spec, &tldrs, &prev, &[]);
        let view = build_view(&cast[1], &state);
        let texts: Vec<&str> = view
            .last_turns_prev_scene
            .iter()
            .map(|t| t.text.as_str())
            .collect();
        assert_eq!(texts, vec!["turn 5", "turn 6", "turn 7"]);
        assert_eq!(view.own_paragraphs, vec!["Private background text number 2."]);
    }

    #[test]
    fn rendered_prompt_contains_only_own_paragraphs() {
        let cfg = base_config();
        let source = source_fixture(3);
        let cast = cast_fixture(3);
        let behaviors = behaviors_fixture(3);
        let spec = spec_fixture();
        let state = state_fixture(&source, &cast, &behaviors, &spec, &[], &[], &[]);
        let view = build_view(&cast[1], &state);
        let (_, _, backend) = run(&[&turn_json("Fine by me.", false, 3)], &cfg, |ctx, w| {
            take_turn(ctx, &view, "t.turn", w).unwrap()
        });
        let recorded = backend.recorded();
        assert!(recorded[0].user_text.contains("Private background text number 2."));
        assert!(!recorded[0].user_text.contains("Private background text number 1."));
        assert!(!recorded[0].user_text.contains("Private background text number 3."));
        assert!(!recorded[0].system_text.contains("Private background"));
    }

    // === take_turn ===

    #[test]
    fn turn_parses_wire_shape() {
        let cfg = base_config();
        let source = source_fixture(3);
        let cast = cast_fixture(3);
        let behaviors = behaviors_fixture(3);
        let spec = spec_fixture();
        let state = state_fixture(&source, &cast, &behaviors, &spec, &[], &[], &[]);
        let view = build_view(&cast[0], &state);
        let (turn, warnings, _) = run(&[&turn_json("I agree.", false, 2)], &cfg, |ctx, w| {
            take_turn(ctx, &view, "t.turn", w).unwrap()
        });
        assert_eq!(turn.speaker_index, 1);
        assert_eq!(turn.text, "I agree.");
        assert!(!turn.wants_vote);
        assert_eq!(turn.nominated_next, Some(2));
        assert!(warnings.is_empty());
    }

    #[test]
    fn self_nomination_repairs_to_round_robin_successor() {
        let cfg = base_config();
        let source = source_fixture(3);
        let cast = cast_fixture(3);
        let behaviors = behaviors_fixture(3);
        let spec = spec_fixture();
        let state = state_fixture(&source, &cast, &behaviors, &spec, &[], &[], &[]);

        let view = build_view(&cast[1], &state);
        let (turn, warnings, _) = run(&[&turn_json("Me again.", false, 2)], &cfg, |ctx, w| {
            take_turn(ctx, &view, "t.turn", w).unwrap()
        });
        assert_eq!(turn.nominated_next, Some(3));
        assert!(warnings.iter().any(|w| w.contains("round-robin")));

        // Wrap-around: speaker 3 nominating out-of-range goes back to 1.
        let view = build_view(&cast[2], &state);
        let (turn, _, _) = run(&[&turn_json("Onward.", false, 99)], &cfg, |ctx, w| {
            take_turn(ctx, &view, "t.turn", w).unwrap()
        });
        assert_eq!(turn.nominated_next, Some(1));
    }

    #[test]
    fn malformed_turn_becomes_synthetic_pass() {
        let cfg = base_config();
        let source = source_fixture(2);
        let cast = cast_fixture(2);
        let behaviors = behaviors_fixture(2);
        let spec = spec_fixture();
        let state = state_fixture(&source, &cast, &behaviors, &spec, &[], &[], &[]);
        let view = build_view(&cast[0], &state);
        let (turn, warnings, backend) =
            run(&["nonsense", "still not json", "nope"], &cfg, |ctx, w| {
                take_turn(ctx, &view, "t.turn", w).unwrap()
            });
        assert_eq!(backend.calls(), 3);
        assert_eq!(turn.text, PASS_TURN_TEXT);
        assert!(!turn.wants_vote);
        assert_eq!(turn.nominated_next, Some(2));
        assert!(warnings.iter().any(|w| w.contains("synthetic pass turn")));
    }

    #[test]
    fn sentence_count_outside_range_is_a_soft_warning() {
        let cfg = base_config();
        let source = source_fixture(2);
        let cast = cast_fixture(2);
        let behaviors = behaviors_fixture(2);
        let spec = spec_fixture();
        let state = state_fixture(&source, &cast, &behaviors, &spec, &[], &[], &[]);
        let view = build_view(&cast[0], &state);
        let long = "One. Two. Three. Four. Five.";
        let (turn, warnings, _) = run(&[&turn_json(long, false, 2)], &cfg, |ctx, w| {
            take_turn(ctx, &view, "t.turn", w).unwrap()
        });
        assert_eq!(turn.text, long);
        assert!(warnings.iter().any(|w| w.contains("outside the expected 1-3")));
    }

    // === run_vote ===

    fn vote_with(
        cfg: &MeetingConfig,
        n: u32,
        proposer: u32,
        responses: &[&str],
    ) -> (VoteRecord, Vec<String>, ScriptedBackend) {
        let source = source_fixture(n);
        let cast = cast_fixture(n);
        let behaviors = behaviors_fixture(n);
        let spec = spec_fixture();
        let turns = vec![Turn::new(proposer, "Shall we wrap up?")];
        let state = state_fixture(&source, &cast, &behaviors, &spec, &[], &[], &turns);
        run(responses, cfg, |ctx, w| {
            run_vote(ctx, &state, proposer, 1, "t", w).unwrap()
        })
    }

    #[test]
    fn strict_majority_decides() {
        let cfg = base_config();
        // 5 participants: proposer + 2 yes vs 2 no → 3 > 2.5 passes.
        let yes = r#"{"agree": true}"#;
        let no = r#"{"agree": false}"#;
        let (vote, warnings, _) = vote_with(&cfg, 5, 1, &[yes, yes, no, no]);
        assert!(vote.passed);
        assert_eq!(vote.yes_count, 3);
        assert_eq!(vote.ballots.len(), 5);
        assert!(warnings.is_empty());

        // 4 participants: 2 yes vs 2 no → 2 ≯ 2 fails (strict majority).
        let (vote, _, _) = vote_with(&cfg, 4, 1, &[yes, no, no]);
        assert!(!vote.passed);
        assert_eq!(vote.yes_count, 2);
    }

    #[test]
    fn unreadable_ballot_counts_as_no() {
        let cfg = base_config();
        // Voter 2's three attempts all fail to parse; voter 3 agrees.
        let (vote, warnings, backend) = vote_with(
            &cfg,
            3,
            1,
            &["huh", "what", "no json here", r#"{"agree": true}"#],
        );
        assert_eq!(backend.calls(), 4);
        assert_eq!(vote.ballots[&2], false);
        assert_eq!(vote.ballots[&3], true);
        assert_eq!(vote.yes_count, 2);
        assert!(vote.passed);
        assert!(warnings.iter().any(|w| w.contains("counted as no")));
    }

    #[test]
    fn exhaustive_vote_oracle_small() {
        let cfg = base_config();
        for n in 2u32..=5 {
            for pattern in 0u32..(1 << (n - 1)) {
                let responses: Vec<String> = (0..n - 1)
                    .map(|bit| {
                        let agree = pattern & (1 << bit) != 0;
                        format!("{{\"agree\": {agree}}}")
                    })
                    .collect();
                let refs: Vec<&str> = responses.iter().map(String::as_str).collect();
                let (vote, _, _) = vote_with(&cfg, n, 1, &refs);
                let expected_yes = 1 + pattern.count_ones();
                assert_eq!(vote.yes_count, expected_yes);
                assert_eq!(vote.passed, expected_yes * 2 > n, "n={n} pattern={pattern:b}");
                assert_eq!(vote.ballots.len(), n as usize);
                assert_eq!(vote.ballots[&1], true);
            }
        }
    }

    // === film_scene ===

    #[test]
    fn scene_ends_when_vote_passes() {
        let cfg = base_config();
        let source = source_fixture(2);
        let cast = cast_fixture(2);
        let behaviors = behaviors_fixture(2);
        let spec = spec_fixture();
        let memory = SceneMemory {
            source: &source,
            prev_scene_tldrs: &[],
            prev_scene_turns: &[],
        };
        let responses = [
            "1",
            &turn_json("Hello there.", false, 2),
            &turn_json("Hi, good to see you.", false, 1),
            &turn_json("Let us get into the agenda.", false, 2),
            &turn_json("Shall we wrap up?", true, 1),
            r#"{"agree": true}"#,
        ];
        let (scene, backend) = {
            let (scene, _, backend) = run(&responses, &cfg, |ctx, _| {
                film_scene(ctx, &spec, &cast, &behaviors, &memory, None, 1).unwrap()
            });
            (scene, backend)
        };
        assert_eq!(scene.turns.len(), 4);
        assert_eq!(scene.votes.len(), 1);
        assert!(scene.votes[0].passed);
        assert_eq!(scene.votes[0].proposer_index, 2);
        assert_eq!(scene.votes[0].at_turn, 4);
        assert!(scene.warnings.is_empty());

        // Speaker chain: each turn's speaker is the previous turn's nominee.
        let speakers: Vec<u32> = scene.turns.iter().map(|t| t.speaker_index).collect();
        assert_eq!(speakers, vec![1, 2, 1, 2]);
        for pair in scene.turns.windows(2) {
            assert_eq!(pair[0].nominated_next, Some(pair[1].speaker_index));
        }

        // The third turn's view contains the first two turns as dialogue.
        let recorded = backend.recorded();
        assert_eq!(recorded[0].stage_label, "stage4.s1.a1.starter");
        assert_eq!(recorded[3].stage_label, "stage4.s1.a1.turn3.p1");
        assert!(recorded[3].user_text.contains(">>Role1: Hello there."));
        assert!(recorded[3].user_text.contains(">>Role2: Hi, good to see you."));
        assert_eq!(recorded[5].stage_label, "stage4.s1.a1.ballot.p1");
    }

    #[test]
    fn failed_vote_continues_the_scene() {
        let cfg = base_config();
        let source = source_fixture(3);
        let cast = cast_fixture(3);
        let behaviors = behaviors_fixture(3);
        let spec = spec_fixture();
        let memory = SceneMemory {
            source: &source,
            prev_scene_tldrs: &[],
            prev_scene_turns: &[],
        };
        let yes = r#"{"agree": true}"#;
        let no = r#"{"agree": false}"#;
        let responses = [
            "2",
            &turn_json("Should we stop already?", true, 3),
            no,
            no,
            &turn_json("Not yet; one more point.", false, 1),
            &turn_json("Agreed, now we can close.", true, 2),
            yes,
            yes,
        ];
        let (scene, _, _) = run(&responses, &cfg, |ctx, _| {
            film_scene(ctx, &spec, &cast, &behaviors, &memory, None, 1).unwrap()
        });
        assert_eq!(scene.turns.len(), 3);
        assert_eq!(scene.votes.len(), 2);
        assert!(!scene.votes[0].passed);
        assert_eq!(scene.votes[0].yes_count, 1);
        assert!(scene.votes[1].passed);
        assert_eq!(scene.votes[1].at_turn, 3);
    }

    #[test]
    fn reminder_then_forced_end_bound_the_scene() {
        let mut cfg = base_config();
        cfg.num_participants = 2;
        cfg.vote_reminder_turn = 3;
        cfg.hard_turn_cap = 5;
        let source = source_fixture(2);
        let cast = cast_fixture(2);
        let behaviors = behaviors_fixture(2);
        let spec = spec_fixture();
        let memory = SceneMemory {
            source: &source,
            prev_scene_tldrs: &[],
            prev_scene_turns: &[],
        };
        // A cast that never votes: alternating speakers, five turns filmed.
        let t = |i: u32, next: u32| turn_json(&format!("Turn number {i}."), false, next);
        let responses = [
            "1",
            &t(1, 2),
            &t(2, 1),
            &t(3, 2),
            &t(4, 1),
            &t(5, 2),
        ];
        let (scene, backend) = {
            let (scene, _, backend) = run(&responses, &cfg, |ctx, _| {
                film_scene(ctx, &spec, &cast, &behaviors, &memory, None, 1).unwrap()
            });
            (scene, backend)
        };
        assert_eq!(scene.turns.len(), 5);
        assert!(scene.turns[2].annotations.contains(&TurnFlag::ReminderTriggered));
        assert!(!scene.turns[1].annotations.contains(&TurnFlag::ReminderTriggered));
        assert!(scene.warnings.iter().any(|w| w.contains("force-ended")));
        assert!(scene.votes.is_empty());

        // Views up to the reminder turn have no nudge; later ones do.
        let recorded = backend.recorded();
        // recorded[0] is the starter; recorded[k] is turn k's request.
        for k in 1..=3usize {
            assert!(!recorded[k].user_text.contains("**Reminder:**"), "turn {k}");
        }
        for k in 4..=5usize {
            assert!(recorded[k].user_text.contains("**Reminder:**"), "turn {k}");
        }
    }

    // === review_scene / film_with_qa / summarize_scene ===

    fn filmed_scene(cast: &[ParticipantProfile]) -> Scene {
        Scene {
            spec: spec_fixture(),
            behavior_assignments: behaviors_fixture(cast.len() as u32),
            turns: vec![
                Turn::new(1, "We open the meeting."),
                Turn::new(2, "And we cover the agenda."),
            ],
            tldr_after: String::new(),
            director_history: Vec::new(),
            votes: Vec::new(),
            status: SceneStatus::Accepted,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn review_parses_verdict_and_fails_open() {
        let cfg = base_config();
        let cast = cast_fixture(2);
        let scene = filmed_scene(&cast);

        let accept = r#"{"explanation": "covers all facts", "accept_scene": true}"#;
        let (verdict, warnings, backend) = run(&[accept], &cfg, |ctx, w| {
            review_scene(ctx, &scene, &cast, "t.review", w).unwrap()
        });
        assert!(verdict.accept_scene);
        assert_eq!(verdict.explanation, "covers all facts");
        assert!(warnings.is_empty());
        let recorded = backend.recorded();
        assert!(recorded[0].user_text.contains(">>Role1: We open the meeting."));
        assert!(recorded[0].user_text.contains("TLDR: The team opens the discussion."));

        let reject = r#"{"explanation": "misses the agenda entirely", "accept_scene": false}"#;
        let (verdict, _, _) = run(&[reject], &cfg, |ctx, w| {
            review_scene(ctx, &scene, &cast, "t.review", w).unwrap()
        });
        assert!(!verdict.accept_scene);
        assert_eq!(verdict.explanation, "misses the agenda entirely");

        let (verdict, warnings, _) = run(&["busted", "busted", "busted"], &cfg, |ctx, w| {
            review_scene(ctx, &scene, &cast, "t.review", w).unwrap()
        });
        assert!(verdict.accept_scene);
        assert!(warnings.iter().any(|w| w.contains("accepting the scene by default")));
    }

    /// One filming attempt for a 2-cast scene that votes to end after a
    /// single turn: starter, one turn, one ballot.
    fn one_turn_attempt(text: &str) -> Vec<String> {
        vec![
            "1".to_string(),
            turn_json(text, true, 2),
            r#"{"agree": true}"#.to_string(),
        ]
    }

    #[test]
    fn qa_refilms_until_accepted_and_carries_feedback() {
        let cfg = base_config();
        let source = source_fixture(2);
        let cast = cast_fixture(2);
        let behaviors = behaviors_fixture(2);
        let spec = spec_fixture();
        let memory = SceneMemory {
            source: &source,
            prev_scene_tldrs: &[],
            prev_scene_turns: &[],
        };
        let mut responses = one_turn_attempt("First try at the scene.");
        responses.push(r#"{"explanation": "needs more agenda detail", "accept_scene": false}"#.into());
        responses.extend(one_turn_attempt("Second try, with agenda detail."));
        responses.push(r#"{"explanation": "much better", "accept_scene": true}"#.into());
        let refs: Vec<&str> = responses.iter().map(String::as_str).collect();
        let (scene, backend) = {
            let (scene, _, backend) = run(&refs, &cfg, |ctx, _| {
                film_with_qa(ctx, &spec, &cast, &behaviors, &memory).unwrap()
            });
            (scene, backend)
        };
        assert_eq!(scene.status, SceneStatus::Accepted);
        assert_eq!(scene.director_history.len(), 2);
        assert!(!scene.director_history[0].accept_scene);
        assert!(scene.director_history[1].accept_scene);
        assert_eq!(scene.turns[0].text, "Second try, with agenda detail.");

        let recorded = backend.recorded();
        // First attempt's turn prompt has no feedback; the re-film carries
        // the rejection explanation into every participant view.
        assert!(recorded[1].user_text.contains("**Director's Comments & Feedback**: None."));
        let refilm_turn = recorded
            .iter()
            .find(|r| r.stage_label == "stage4.s1.a2.turn1.p1")
            .unwrap();
        assert!(refilm_turn.user_text.contains("needs more agenda detail"));
    }

    #[test]
    fn qa_keeps_last_attempt_after_exhausting_refilms() {
        let mut cfg = base_config();
        cfg.max_refilm_cycles = 3;
        let source = source_fixture(2);
        let cast = cast_fixture(2);
        let behaviors = behaviors_fixture(2);
        let spec = spec_fixture();
        let memory = SceneMemory {
            source: &source,
            prev_scene_tldrs: &[],
            prev_scene_turns: &[],
        };
        let mut responses: Vec<String> = Vec::new();
        for attempt in 1..=4 {
            responses.extend(one_turn_attempt(&format!("Attempt number {attempt}.")));
            responses.push(format!(
                "{{\"explanation\": \"rejection {attempt}\", \"accept_scene\": false}}"
            ));
        }
        let refs: Vec<&str> = responses.iter().map(String::as_str).collect();
        let (scene, _, backend) = run(&refs, &cfg, |ctx, _| {
            film_with_qa(ctx, &spec, &cast, &behaviors, &memory).unwrap()
        });
        assert_eq!(scene.status, SceneStatus::Fallback);
        assert_eq!(scene.director_history.len(), 4);
        assert_eq!(scene.turns[0].text, "Attempt number 4.");
        assert!(scene.warnings.iter().any(|w| w.contains("keeping the last")));
        assert_eq!(backend.calls(), 16);
        assert_eq!(backend.remaining(), 0);

        // Accumulated feedback: the final attempt sees every prior rejection.
        let last_turn = backend
            .recorded()
            .into_iter()
            .find(|r| r.stage_label == "stage4.s1.a4.turn1.p1")
            .unwrap();
        for i in 1..=3 {
            assert!(last_turn.user_text.contains(&format!("rejection {i}")));
        }
    }

    #[test]
    fn accepted_first_try_means_single_filming_without_feedback() {
        let cfg = base_config();
        let source = source_fixture(2);
        let cast = cast_fixture(2);
        let behaviors = behaviors_fixture(2);
        let spec = spec_fixture();
        let memory = SceneMemory {
            source: &source,
            prev_scene_tldrs: &[],
            prev_scene_turns: &[],
        };
        let mut responses = one_turn_attempt("Only attempt.");
        responses.push(r#"{"explanation": "fine", "accept_scene": true}"#.into());
        let refs: Vec<&str> = responses.iter().map(String::as_str).collect();
        let (scene, _, backend) = run(&refs, &cfg, |ctx, _| {
            film_with_qa(ctx, &spec, &cast, &behaviors, &memory).unwrap()
        });
        assert_eq!(scene.status, SceneStatus::Accepted);
        assert_eq!(scene.director_history.len(), 1);
        for r in backend.recorded() {
            if r.stage_label.contains(".turn") {
                assert!(r.user_text.contains("**Director's Comments & Feedback**: None."));
            }
        }
    }

    #[test]
    fn scene_summary_with_fallback() {
        let cfg = base_config();
        let cast = cast_fixture(2);
        let scene = filmed_scene(&cast);
        let (tldr, warnings, _) = run(&["They agreed on X."], &cfg, |ctx, w| {
            summarize_scene(ctx, &scene, &cast, w).unwrap()
        });
        assert_eq!(tldr, "They agreed on X.");
        assert!(warnings.is_empty());

        // Exhausted script = transport failure → planned TLDR, with warning.
        let (tldr, warnings, _) = run(&[], &cfg, |ctx, w| {
            summarize_scene(ctx, &scene, &cast, w).unwrap()
        });
        assert_eq!(tldr, "The team opens the discussion.");
        assert!(warnings.iter().any(|w| w.contains("planned TLDR")));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            // Quantified over arbitrary participant behavior: the scene
            // always terminates within the hard cap, the speaker chain
            // follows (repaired) nominations, and ballots cover the cast.
            #[test]
            fn filming_is_bounded_and_chained(
                behavior in proptest::collection::vec(
                    (any::<bool>(), 0u32..5, proptest::collection::vec(any::<bool>(), 2)),
                    1..12),
                n in 2u32..4,
                cap in 2u32..8,
            ) {
                let mut cfg = base_config();
                cfg.num_participants = n;
                cfg.vote_reminder_turn = cap.max(2) - 1;
                cfg.hard_turn_cap = cap;
                let source = source_fixture(n);
                let cast = cast_fixture(n);
                let behaviors = behaviors_fixture(n);
                let spec = spec_fixture();
                let memory = SceneMemory {
                    source: &source,
                    prev_scene_tldrs: &[],
                    prev_scene_turns: &[],
                };
                // Simulate consumption to build a matching response stream.
                let mut responses = vec!["1".to_string()];
                let mut k = 0u32;
                for (wants_vote, nominee, ballots) in &behavior {
                    k += 1;
                    if k > cap { break; }
                    responses.push(turn_json(&format!("Turn {k}."), *wants_vote, *nominee));
                    if *wants_vote {
                        let mut yes = 1u32;
                        for agree in ballots.iter().take(n as usize - 1) {
                            responses.push(format!("{{\"agree\": {agree}}}"));
                            if *agree { yes += 1; }
                        }
                        if yes * 2 > n { break; }
                    }
                }
                // Pad with non-voting turns so the stream never runs dry.
                let supplied = behavior.len() as u32;
                for k in supplied + 1..=cap {
                    responses.push(turn_json(&format!("Filler {k}."), false, 0));
                }
                let refs: Vec<&str> = responses.iter().map(String::as_str).collect();
                let (scene, _, _) = run(&refs, &cfg, |ctx, _| {
                    film_scene(ctx, &spec, &cast, &behaviors, &memory, None, 1).unwrap()
                });
                prop_assert!(scene.turns.len() as u32 <= cap);
                prop_assert!(!scene.turns.is_empty());
                for pair in scene.turns.windows(2) {
                    prop_assert_eq!(pair[0].nominated_next, Some(pair[1].speaker_index));
                }
                for vote in &scene.votes {
                    prop_assert_eq!(vote.ballots.len(), n as usize);
                    prop_assert_eq!(
                        vote.passed,
                        vote.yes_count as usize * 2 > n as usize
                    );
                }
            }
        }
    }
}
