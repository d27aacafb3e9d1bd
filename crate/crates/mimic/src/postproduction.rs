//! Stages 6–7: probabilistic special-effects injection, then the editorial
//! chain (refinement, synthetic-cue detection, humanizing revision).
//!
//! Both stages rewrite scene text wholesale and re-parse it through the
//! canonical `>>role:` grammar, so every operation here is defensive: a
//! rewrite that cannot be parsed, loses too much dialogue, or misses its
//! delimiter leaves the scene as it was and records a warning. Turns the
//! rewrite keeps verbatim retain their vote/nomination state and earlier
//! flags; everything else is marked as rewritten.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gateway::{Gateway, GatewayError, Shape};
use crate::model::lines::{parse_dialogue, render_dialogue};
use crate::model::{BehaviorAssignment, ParticipantProfile, Scene, Turn, TurnFlag};
use crate::production::cast_roster;
use crate::prompts::{self, PromptError};
use crate::StageContext;

/// One kind of naturalistic meeting disruption the effects stage may add.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EffectKind {
    pub name: &'static str,
    pub description: &'static str,
}

/// The disruption repertoire. A single effects rewrite introduces at most
/// one of these; the list is also the menu embedded in the effects prompt.
pub const EFFECT_CATALOG: &[EffectKind] = &[
    EffectKind {
        name: "polite interruption",
        description: "Polite interruptions to add a point or seek clarification.",
    },
    EffectKind {
        name: "overlapping speech",
        description: "Participants briefly speaking over each other.",
    },
    EffectKind {
        name: "side comment",
        description: "Side comments or asides related to the main topic.",
    },
    EffectKind {
        name: "off-topic remark",
        description: "Brief off-topic remarks or questions.",
    },
    EffectKind {
        name: "confusion",
        description: "Moments of confusion requiring clarification.",
    },
    EffectKind {
        name: "laughter",
        description: "Laughter or reactions to a humorous comment.",
    },
    EffectKind {
        name: "time check",
        description: "Time-checks or agenda reminders.",
    },
    EffectKind {
        name: "banter",
        description: "Casual side comments or friendly banter.",
    },
    EffectKind {
        name: "rapid-fire ideas",
        description: "Rapid-fire idea contributions.",
    },
    EffectKind {
        name: "instructional interruption",
        description: "Instructional interruptions to provide examples.",
    },
    EffectKind {
        name: "joke",
        description: "Light-hearted jokes or humorous reactions.",
    },
    EffectKind {
        name: "strategic question",
        description: "Strategic questions about project goals.",
    },
    EffectKind {
        name: "feedback request",
        description: "Feedback requests on presented material.",
    },
    EffectKind {
        name: "technical difficulty",
        description: "Technical difficulties (e.g., \"You're on mute.\").",
    },
    EffectKind {
        name: "schedule mention",
        description: "Checking the time or mentioning scheduling constraints.",
    },
    EffectKind {
        name: "misunderstanding",
        description: "Misunderstandings that are quickly resolved.",
    },
    EffectKind {
        name: "external disruption",
        description: "External disruptions such as phone calls or notifications.",
    },
];

#[derive(Debug, thiserror::Error)]
pub enum PostproductionError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] PromptError),
}

/// Bernoulli source for one scene: an independent, reproducible stream per
/// scene ordinal off the run seed, so draws do not depend on how many calls
/// any other scene made or on batch execution order.
pub fn scene_rng(seed: u64, scene_ordinal: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(scene_ordinal));
    rng
}

/// Compact per-participant JSON lines for editor-facing prompts. Includes
/// the per-scene social roles when assignments are available.
fn participants_info(cast: &[ParticipantProfile], assignments: &[BehaviorAssignment]) -> String {
    cast.iter()
        .map(|p| {
            let mut obj = serde_json::Map::new();
            obj.insert("role".to_string(), p.role.clone().into());
            obj.insert("description".to_string(), p.description.clone().into());
            obj.insert("expertise_area".to_string(), p.expertise_area.clone().into());
            obj.insert("perspective".to_string(), p.perspective.clone().into());
            if !p.personalized_vocabulary.catchphrases.is_empty() {
                obj.insert(
                    "catchphrases".to_string(),
                    p.personalized_vocabulary.catchphrases.clone().into(),
                );
            }
            if let Some(a) = assignments.iter().find(|a| a.participant_index == p.index) {
                obj.insert("social_roles".to_string(), a.social_roles.clone().into());
            }
            serde_json::Value::Object(obj).to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Drops a leading line of bare asterisks — the residue left when a bold
/// `**Heading:**` delimiter is matched on its unbolded text.
fn strip_bold_residue(text: &str) -> &str {
    let trimmed = text.trim_start();
    match trimmed.split_once('\n') {
        Some((first, rest)) if !first.trim().is_empty() && first.trim().chars().all(|c| c == '*') => {
            rest.trim_start()
        }
        _ => trimmed,
    }
}

/// Matches rewritten turns against the originals by (speaker, text). A
/// verbatim match inherits the original's flags and vote/nomination state;
/// anything else was produced by the rewrite and carries `flag`.
fn adopt_turns(original: &[Turn], rewritten: Vec<Turn>, flag: TurnFlag) -> Vec<Turn> {
    let mut unclaimed: Vec<Option<&Turn>> = original.iter().map(Some).collect();
    rewritten
        .into_iter()
        .map(|mut turn| {
            let claimed = unclaimed.iter_mut().find_map(|slot| match slot {
                Some(orig)
                    if orig.speaker_index == turn.speaker_index && orig.text == turn.text =>
                {
                    slot.take()
                }
                _ => None,
            });
            match claimed {
                Some(orig) => {
                    turn.wants_vote = orig.wants_vote;
                    turn.nominated_next = orig.nominated_next;
                    turn.annotations = orig.annotations.clone();
                }
                None => {
                    turn.annotations.insert(flag);
                }
            }
            turn
        })
        .collect()
}

/// Re-parses a rewrite and swaps it into the scene. Returns false (scene
/// untouched) when the rewrite contains no parseable dialogue. Lines from
/// speakers outside the roster were already dropped by the parser; their
/// warnings are recorded under `label`.
fn apply_rewrite(
    scene: &mut Scene,
    rewrite: &str,
    roster: &[(u32, String)],
    flag: TurnFlag,
    label: &str,
) -> bool {
    let parsed = parse_dialogue(strip_bold_residue(rewrite), roster);
    for w in parsed.warnings {
        scene.warnings.push(format!("{label}: {w}"));
    }
    if parsed.turns.is_empty() {
        scene.warnings.push(format!(
            "{label}: rewrite had no parseable dialogue lines; keeping the previous scene text"
        ));
        return false;
    }
    scene.turns = adopt_turns(&scene.turns, parsed.turns, flag);
    true
}

// === Stage 6: special effects ===

/// Rolls the per-scene disruption chance and, on success, asks for a single
/// naturalistic-effect rewrite of the scene. Returns whether a rewrite was
/// actually applied.
///
/// The rewrite is rejected (scene kept, warning recorded) when it loses more
/// than 20% of the original turns: the prompt forbids changing the key
/// points, and scene size is the testable proxy for that.
pub fn maybe_inject_effects(
    ctx: &StageContext,
    scene: &mut Scene,
    cast: &[ParticipantProfile],
    rng: &mut impl Rng,
    p: f64,
) -> Result<bool, PostproductionError> {
    debug_assert!((0.0..=1.0).contains(&p), "effect probability {p} out of range");
    if !rng.gen_bool(p.clamp(0.0, 1.0)) {
        return Ok(false);
    }

    let label = format!("stage6.s{}.effects", scene.spec.ordinal);
    let roster = cast_roster(cast);
    let scene_text = render_dialogue(&scene.turns, &roster);
    let info = participants_info(cast, &scene.behavior_assignments);
    let req = ctx.request(
        &label,
        "special_effects",
        &[
            ("language", ctx.config.language.name()),
            ("meeting_type", &ctx.config.meeting_type),
            ("scene", &scene_text),
            ("participants_info", &info),
        ],
    )?;
    let shape = Shape::heading("Modified Scene:");
    let rewrite = match ctx
        .gateway
        .complete_structured(&req, &shape, Gateway::DEFAULT_MAX_RETRIES)
    {
        Ok(value) => value.into_text().expect("heading shape parses to text"),
        Err(GatewayError::Malformed { .. }) => {
            scene.warnings.push(format!(
                "{label}: rewrite never produced the delimiter; keeping the original scene"
            ));
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };

    let parsed = parse_dialogue(strip_bold_residue(&rewrite), &roster);
    for w in parsed.warnings {
        scene.warnings.push(format!("{label}: {w}"));
    }
    // Shrink guard: keep at least 80% of the original turns.
    if parsed.turns.len() * 5 < scene.turns.len() * 4 {
        scene.warnings.push(format!(
            "{label}: rewrite kept only {} of {} turns; keeping the original scene",
            parsed.turns.len(),
            scene.turns.len()
        ));
        return Ok(false);
    }
    scene.turns = adopt_turns(&scene.turns, parsed.turns, TurnFlag::EffectInjected);
    Ok(true)
}

// === Stage 7: editor, detector, humanizer ===

/// Editorial refinement pass. When `director_feedback` is present the scene
/// reached the editor rejected, and the prompt gains the special-instructions
/// block carrying that feedback. A rewrite that misses the delimiter after
/// retries, or parses to nothing, leaves the scene unchanged with a warning.
pub fn edit_scene(
    ctx: &StageContext,
    scene: &mut Scene,
    cast: &[ParticipantProfile],
    previous_tldr: Option<&str>,
    director_feedback: Option<&str>,
) -> Result<(), PostproductionError> {
    let label = format!("stage7.s{}.edit", scene.spec.ordinal);
    let rejected_block = match director_feedback {
        Some(feedback) => prompts::fill(
            &ctx.prompts.raw("editor_rejected_block")?,
            &[("director_feedback", feedback)],
        ),
        None => String::new(),
    };
    let roster = cast_roster(cast);
    let scene_text = render_dialogue(&scene.turns, &roster);
    let info = participants_info(cast, &scene.behavior_assignments);
    let description = scene.spec.description_block();
    let req = ctx.request(
        &label,
        "editor",
        &[
            ("language", ctx.config.language.name()),
            ("meeting_type", &ctx.config.meeting_type),
            ("rejected_block", &rejected_block),
            ("scene_description", &description),
            ("previous_tldr", previous_tldr.unwrap_or("None.")),
            ("participants_info", &info),
            ("scene", &scene_text),
        ],
    )?;
    let shape = Shape::heading("Refined Scene:");
    match ctx
        .gateway
        .complete_structured(&req, &shape, Gateway::DEFAULT_MAX_RETRIES)
    {
        Ok(value) => {
            let rewrite = value.into_text().expect("heading shape parses to text");
            apply_rewrite(scene, &rewrite, &roster, TurnFlag::Edited, &label);
            Ok(())
        }
        Err(GatewayError::Malformed { .. }) => {
            scene.warnings.push(format!(
                "{label}: refined scene never produced the delimiter; keeping the original scene"
            ));
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

/// Asks the synthetic-cue detector for feedback on the scene. Empty feedback
/// means the scene reads as human. Missing feedback tags after retries are
/// treated as clean, with a warning.
pub fn detect_synthetic(
    ctx: &StageContext,
    scene: &mut Scene,
    cast: &[ParticipantProfile],
) -> Result<String, PostproductionError> {
    let label = format!("stage7.s{}.detect", scene.spec.ordinal);
    let scene_text = render_dialogue(&scene.turns, &cast_roster(cast));
    let req = ctx.request(
        &label,
        "detector",
        &[
            ("language", ctx.config.language.name()),
            ("scene_text", &scene_text),
        ],
    )?;
    match ctx
        .gateway
        .complete_structured(&req, &Shape::tag("feedback"), Gateway::DEFAULT_MAX_RETRIES)
    {
        Ok(value) => Ok(value.into_text().expect("tag shape parses to text")),
        Err(GatewayError::Malformed { .. }) => {
            scene.warnings.push(format!(
                "{label}: no feedback tags after retries; treating the scene as clean"
            ));
            Ok(String::new())
        }
        Err(e) => Err(e.into()),
    }
}

/// Applies detector feedback with a humanizing rewrite. Skipped entirely —
/// zero gateway calls — when the feedback is empty.
pub fn humanize(
    ctx: &StageContext,
    scene: &mut Scene,
    cast: &[ParticipantProfile],
    feedback: &str,
) -> Result<(), PostproductionError> {
    if feedback.trim().is_empty() {
        return Ok(());
    }
    let label = format!("stage7.s{}.humanize", scene.spec.ordinal);
    let roster = cast_roster(cast);
    let scene_text = render_dialogue(&scene.turns, &roster);
    let req = ctx.request(
        &label,
        "humanizer",
        &[
            ("language", ctx.config.language.name()),
            ("scene_text", &scene_text),
            ("feedback", feedback),
        ],
    )?;
    match ctx
        .gateway
        .complete_structured(&req, &Shape::tag("final_scene"), Gateway::DEFAULT_MAX_RETRIES)
    {
        Ok(value) => {
            let rewrite = value.into_text().expect("tag shape parses to text");
            apply_rewrite(scene, &rewrite, &roster, TurnFlag::Edited, &label);
            Ok(())
        }
        Err(GatewayError::Malformed { .. }) => {
            scene.warnings.push(format!(
                "{label}: no final scene tags after retries; keeping the edited scene"
            ));
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

/// The full editorial chain for one scene: refine, detect synthetic cues,
/// and — only when the detector found issues — humanize.
pub fn refine_scene(
    ctx: &StageContext,
    scene: &mut Scene,
    cast: &[ParticipantProfile],
    previous_tldr: Option<&str>,
    director_feedback: Option<&str>,
) -> Result<(), PostproductionError> {
    edit_scene(ctx, scene, cast, previous_tldr, director_feedback)?;
    let feedback = detect_synthetic(ctx, scene, cast)?;
    humanize(ctx, scene, cast, &feedback)
}

// =============================================================================
