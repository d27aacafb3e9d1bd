//! Stages 1–3: target summary and tags, participant casting with styles and
//! private knowledge, scene outline, and per-scene social-role assignment.
//!
//! Every operation here is LLM-backed but defends its postconditions with
//! deterministic repair: tag lists are truncated or re-requested to exactly
//! five, duplicate roles are re-prompted once, empty knowledge assignments
//! are round-robin filled, and social-role assignments are made
//! contradiction-free with a guaranteed conflict role per scene.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{Map, Value};

use crate::gateway::repair::Shape;
use crate::gateway::{Gateway, GatewayError};
use crate::model::catalog::{self, CONFLICT_ROLES, CONTRADICTORY_ROLE_PAIRS};
use crate::model::{
    count_words, BehaviorAssignment, KnowledgeSource, ParticipantProfile, PersonalizedVocabulary,
    SceneSpec, SpeakingStyle, TargetSummary,
};
use crate::prompts::PromptError;
use crate::StageContext;

pub const TAG_COUNT: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum PreproductionError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] PromptError),
    #[error("tag list has {got} entries after repair; need exactly {TAG_COUNT}")]
    TagCount { got: usize },
    #[error("participant role {role:?} duplicates an earlier profile after re-prompt")]
    DuplicateRole { role: String },
    #[error("outline rejected: {reason}")]
    OutlineShape { reason: String },
    #[error("outline scene {scene_number} rejected: {reason} (in {snippet:?})")]
    OutlineParse {
        scene_number: u32,
        reason: String,
        snippet: String,
    },
}

// === Stage 1: brainstorm ===

/// Produces the target summary (bounded by the configured word limit) and
/// exactly five topic tags for the source.
pub fn brainstorm(
    ctx: &StageContext,
    source: &KnowledgeSource,
    warnings: &mut Vec<String>,
) -> Result<(TargetSummary, Vec<String>), PreproductionError> {
    let exemplars = ctx.prompts.raw("qmsum_examples")?;
    let num_words = ctx.config.summary_word_limit.to_string();
    let content = source.full_text();
    let req = ctx.request(
        "stage1.summary",
        "target_summary",
        &[
            ("language", ctx.config.language.name()),
            ("num_words", &num_words),
            ("meeting_type", &ctx.config.meeting_type),
            ("article_title", &source.title),
            ("content", &content),
            ("qmsum_examples", &exemplars),
        ],
    )?;
    let mut text = ctx.gateway.complete(&req)?.trim().to_string();
    let words = count_words(&text);
    if words > ctx.config.summary_word_limit {
        text = truncate_words(&text, ctx.config.summary_word_limit as usize);
        warnings.push(format!(
            "stage1.summary: {words}-word response truncated to the {}-word limit",
            ctx.config.summary_word_limit
        ));
    }
    let summary = TargetSummary {
        word_count: count_words(&text),
        text,
        language: ctx.config.language,
    };
    let tags = fetch_tags(ctx, source, warnings)?;
    Ok((summary, tags))
}

fn truncate_words(text: &str, limit: usize) -> String {
    text.split_whitespace()
        .take(limit)
        .collect::<Vec<_>>()
        .join(" ")
}

fn fetch_tags(
    ctx: &StageContext,
    source: &KnowledgeSource,
    warnings: &mut Vec<String>,
) -> Result<Vec<String>, PreproductionError> {
    let article = source.full_text();
    let req = ctx.request("stage1.tags", "article_tags", &[("article", &article)])?;
    let list = ctx
        .gateway
        .complete_structured(&req, &Shape::JsonList, Gateway::DEFAULT_MAX_RETRIES)?
        .into_list()
        .unwrap_or_default();
    let mut tags = to_string_list(&list);
    if tags.len() > TAG_COUNT {
        warnings.push(format!(
            "stage1.tags: {} tags returned; keeping the first {TAG_COUNT}",
            tags.len()
        ));
        tags.truncate(TAG_COUNT);
    } else if tags.len() < TAG_COUNT {
        // Well-formed but short: one explicit correction pass, then give up.
        let mut retry = req.clone();
        retry.user_text = format!(
            "{}\n\nYour previous list had only {} tag(s). Respond again with a \
             Python list of exactly five tags.",
            req.user_text,
            tags.len()
        );
        let list = ctx
            .gateway
            .complete_structured(&retry, &Shape::JsonList, Gateway::DEFAULT_MAX_RETRIES)?
            .into_list()
            .unwrap_or_default();
        tags = to_string_list(&list);
        if tags.len() > TAG_COUNT {
            warnings.push(format!(
                "stage1.tags: {} tags returned on retry; keeping the first {TAG_COUNT}",
                tags.len()
            ));
            tags.truncate(TAG_COUNT);
        }
        if tags.len() != TAG_COUNT {
            return Err(PreproductionError::TagCount { got: tags.len() });
        }
    }
    Ok(tags)
}

// === Stage 2: casting ===

/// Generates the cast one profile at a time (each casting prompt embeds all
/// earlier profiles), then extends every profile with a speaking style (each
/// style prompt embeds all earlier styles).
pub fn cast(
    ctx: &StageContext,
    source: &KnowledgeSource,
    tags: &[String],
    warnings: &mut Vec<String>,
) -> Result<Vec<ParticipantProfile>, PreproductionError> {
    let article = source.full_text();
    let tags_joined = tags.join(", ");
    let mut profiles: Vec<ParticipantProfile> = Vec::new();

    for i in 1..=ctx.config.num_participants {
        let already = if profiles.is_empty() {
            "Already Generated Participants: none yet.".to_string()
        } else {
            let lines: Vec<String> = profiles.iter().map(profile_json_line).collect();
            format!("Already Generated Participants:\n{}", lines.join("\n"))
        };
        let label = format!("stage2.profile.{i}");
        let req = ctx.request(
            &label,
            "participant",
            &[
                ("article_title", &source.title),
                ("article", &article),
                ("tags", &tags_joined),
                ("language", ctx.config.language.name()),
                ("meeting_type", &ctx.config.meeting_type),
                ("already_generated", &already),
            ],
        )?;
        let mut obj = ctx
            .gateway
            .complete_structured(&req, &Shape::JsonObject, Gateway::DEFAULT_MAX_RETRIES)?
            .into_object()
            .unwrap_or_default();
        let mut role = string_field(&obj, "role");
        if role.is_empty() {
            role = format!("Participant {i}");
            warnings.push(format!("{label}: profile had no role; named it {role:?}"));
        }
        if has_role(&profiles, &role) {
            let mut retry = req.clone();
            retry.user_text = format!(
                "{}\n\nThe role {role:?} has already been generated. Generate a \
                 different participant with a distinct role.",
                req.user_text
            );
            obj = ctx
                .gateway
                .complete_structured(&retry, &Shape::JsonObject, Gateway::DEFAULT_MAX_RETRIES)?
                .into_object()
                .unwrap_or_default();
            let retry_role = string_field(&obj, "role");
            if retry_role.is_empty() || has_role(&profiles, &retry_role) {
                return Err(PreproductionError::DuplicateRole { role: retry_role });
            }
            warnings.push(format!(
                "{label}: duplicate role {role:?} replaced by {retry_role:?} after re-prompt"
            ));
            role = retry_role;
        }
        profiles.push(ParticipantProfile {
            index: i,
            role,
            description: string_field(&obj, "description"),
            expertise_area: string_field(&obj, "expertise_area"),
            perspective: string_field(&obj, "perspective"),
            speaking_style: SpeakingStyle::default(),
            personalized_vocabulary: PersonalizedVocabulary::default(),
            assigned_paragraph_ids: BTreeSet::new(),
        });
    }

    for i in 0..profiles.len() {
        let prior = if i == 0 {
            "none yet".to_string()
        } else {
            profiles[..i]
                .iter()
                .map(style_json_line)
                .collect::<Vec<_>>()
                .join("\n")
        };
        let label = format!("stage2.style.{}", i + 1);
        let req = ctx.request(
            &label,
            "speaking_style",
            &[
                ("meeting_type", &ctx.config.meeting_type),
                ("language", ctx.config.language.name()),
                ("participants_info", &prior),
                ("role", &profiles[i].role),
                ("description", &profiles[i].description),
            ],
        )?;
        let obj = ctx
            .gateway
            .complete_structured(&req, &Shape::JsonObject, Gateway::DEFAULT_MAX_RETRIES)?
            .into_object()
            .unwrap_or_default();
        let (style, vocabulary) = parse_style(&obj, &label, warnings);
        profiles[i].speaking_style = style;
        profiles[i].personalized_vocabulary = vocabulary;
    }
    Ok(profiles)
}

fn has_role(profiles: &[ParticipantProfile], role: &str) -> bool {
    profiles
        .iter()
        .any(|p| p.role.eq_ignore_ascii_case(role.trim()))
}

fn profile_json_line(p: &ParticipantProfile) -> String {
    serde_json::json!({
        "role": p.role,
        "description": p.description,
        "expertise_area": p.expertise_area,
        "perspective": p.perspective,
    })
    .to_string()
}

fn style_json_line(p: &ParticipantProfile) -> String {
    serde_json::json!({
        "role": p.role,
        "speaking_style": p.speaking_style,
        "personalized_vocabulary": p.personalized_vocabulary,
    })
    .to_string()
}

fn parse_style(
    obj: &Map<String, Value>,
    label: &str,
    warnings: &mut Vec<String>,
) -> (SpeakingStyle, PersonalizedVocabulary) {
    let style_obj = obj.get("speaking_style").and_then(Value::as_object);
    let vocab_obj = obj.get("personalized_vocabulary").and_then(Value::as_object);
    if style_obj.is_none() || vocab_obj.is_none() {
        warnings.push(format!(
            "{label}: style response missing speaking_style/personalized_vocabulary; \
             using empty defaults for the missing part"
        ));
    }
    let s = |key: &str| {
        style_obj
            .and_then(|m| m.get(key))
            .map(value_to_string)
            .unwrap_or_default()
    };
    let v = |key: &str| {
        vocab_obj
            .and_then(|m| m.get(key))
            .map(|val| match val {
                Value::Array(items) => to_string_list(items),
                other => vec![value_to_string(other)],
            })
            .unwrap_or_default()
    };
    (
        SpeakingStyle {
            tone: s("tone"),
            language_complexity: s("language_complexity"),
            communication_style: s("communication_style"),
            sentence_structure: s("sentence_structure"),
            formality: s("formality"),
            other_traits: s("other_traits"),
        },
        PersonalizedVocabulary {
            filler_words: v("filler_words"),
            catchphrases: v("catchphrases"),
            speech_patterns: v("speech_patterns"),
            emotional_expressions: v("emotional_expressions"),
        },
    )
}

// === Stage 2: knowledge distribution ===

/// Asks the model to match paragraphs to expertise, then repairs the result
/// so every participant holds at least one paragraph. Writes the assignment
/// into the profiles and returns it.
pub fn distribute_knowledge(
    ctx: &StageContext,
    source: &KnowledgeSource,
    cast: &mut [ParticipantProfile],
    warnings: &mut Vec<String>,
) -> Result<BTreeMap<u32, BTreeSet<String>>, PreproductionError> {
    let participants_info = cast
        .iter()
        .map(|p| format!("- {}: {} — {}", p.index, p.role, p.expertise_area))
        .collect::<Vec<_>>()
        .join("\n");
    let paragraphs = source
        .paragraphs
        .iter()
        .map(|p| format!("[{}] {}", p.id, p.text))
        .collect::<Vec<_>>()
        .join("\n\n");
    let req = ctx.request(
        "stage2.knowledge",
        "knowledge_distribution",
        &[
            ("participants_info", &participants_info),
            ("paragraphs", &paragraphs),
        ],
    )?;
    let obj = ctx
        .gateway
        .complete_structured(&req, &Shape::JsonObject, Gateway::DEFAULT_MAX_RETRIES)?
        .into_object()
        .unwrap_or_default();

    let mut assignment: BTreeMap<u32, BTreeSet<String>> =
        cast.iter().map(|p| (p.index, BTreeSet::new())).collect();
    for (key, value) in &obj {
        let Some(index) = parse_participant_key(key) else {
            warnings.push(format!("stage2.knowledge: unknown participant key {key:?}"));
            continue;
        };
        let Some(slot) = assignment.get_mut(&index) else {
            warnings.push(format!(
                "stage2.knowledge: participant index {index} outside the cast"
            ));
            continue;
        };
        let items = match value {
            Value::Array(items) => items.clone(),
            other => vec![other.clone()],
        };
        for item in &items {
            match resolve_paragraph_id(item, source) {
                Some(id) => {
                    slot.insert(id);
                }
                None => warnings.push(format!(
                    "stage2.knowledge: unknown paragraph reference {item} for participant {index}"
                )),
            }
        }
    }

    // Round-robin fill: every empty participant takes the currently
    // least-assigned paragraph (ties break in source order).
    let mut holders: BTreeMap<&str, usize> = source
        .paragraphs
        .iter()
        .map(|p| (p.id.as_str(), 0))
        .collect();
    for ids in assignment.values() {
        for id in ids {
            if let Some(count) = holders.get_mut(id.as_str()) {
                *count += 1;
            }
        }
    }
    for p in cast.iter() {
        let slot = assignment.get_mut(&p.index).expect("seeded above");
        if !slot.is_empty() {
            continue;
        }
        let least = source
            .paragraphs
            .iter()
            .min_by_key(|para| holders.get(para.id.as_str()).copied().unwrap_or(0))
            .expect("knowledge source has at least one paragraph");
        slot.insert(least.id.clone());
        *holders.get_mut(least.id.as_str()).unwrap() += 1;
        warnings.push(format!(
            "stage2.knowledge: participant {} had no paragraphs; assigned {:?}",
            p.index, least.id
        ));
    }

    for p in cast.iter_mut() {
        p.assigned_paragraph_ids = assignment[&p.index].clone();
    }
    Ok(assignment)
}

fn parse_participant_key(key: &str) -> Option<u32> {
    let trimmed = key.trim();
    if let Ok(n) = trimmed.parse::<u32>() {
        return Some(n);
    }
    // Accept forms like "participant 2" or "Participant_2".
    let digits: String = trimmed.chars().filter(|c| c.is_ascii_digit()).collect();
    if !digits.is_empty() && trimmed.to_ascii_lowercase().contains("participant") {
        return digits.parse().ok();
    }
    None
}

fn resolve_paragraph_id(item: &Value, source: &KnowledgeSource) -> Option<String> {
    let by_position = |n: i64| -> Option<String> {
        if n >= 1 && (n as usize) <= source.paragraphs.len() {
            Some(source.paragraphs[n as usize - 1].id.clone())
        } else {
            None
        }
    };
    match item {
        Value::Number(n) => n.as_i64().and_then(by_position),
        Value::String(s) => {
            let s = s.trim();
            if let Some(p) = source
                .paragraphs
                .iter()
                .find(|p| p.id.eq_ignore_ascii_case(s))
            {
                return Some(p.id.clone());
            }
            s.parse::<i64>().ok().and_then(by_position)
        }
        _ => None,
    }
}

// === Stage 3: scripting ===

/// Plans the meeting as a list of scenes. The planner's wire format is a
/// Python-style list of strings, each holding a title line, a `TLDR:` line,
/// and `-` bullet items.
pub fn script(
    ctx: &StageContext,
    source: &KnowledgeSource,
    summary: &TargetSummary,
    tags: &[String],
    cast: &[ParticipantProfile],
) -> Result<Vec<SceneSpec>, PreproductionError> {
    let info = catalog::meeting_type(&ctx.config.meeting_type);
    let objectives = info.map(|m| m.objectives.join("; ")).unwrap_or_default();
    let outcomes = info
        .map(|m| m.expected_outcomes.join("; "))
        .unwrap_or_default();
    let participants = cast
        .iter()
        .map(|p| format!("{}: {} ({})", p.index, p.role, p.expertise_area))
        .collect::<Vec<_>>()
        .join("; ");
    let tags_joined = tags.join(", ");
    let req = ctx.request(
        "stage3.outline",
        "meeting_planner",
        &[
            ("meeting_type", &ctx.config.meeting_type),
            ("objectives", &objectives),
            ("expected_outcomes", &outcomes),
            ("article_title", &source.title),
            ("summary", &summary.text),
            ("tags", &tags_joined),
            ("participants", &participants),
        ],
    )?;
    let list = ctx
        .gateway
        .complete_structured(&req, &Shape::JsonList, Gateway::DEFAULT_MAX_RETRIES)?
        .into_list()
        .unwrap_or_default();

    if list.len() < 2 {
        return Err(PreproductionError::OutlineShape {
            reason: format!("{} scene(s) returned; a meeting needs at least 2", list.len()),
        });
    }
    let mut outline = Vec::with_capacity(list.len());
    for (i, item) in list.iter().enumerate() {
        let text = value_to_string(item);
        outline.push(parse_scene_spec(i as u32 + 1, &text)?);
    }
    Ok(outline)
}

/// Parses one planner scene string: first non-empty line is the title
/// (optionally prefixed `'Scene N':`), a `TLDR:` line is required, and `-`
/// lines are the content bullets.
fn parse_scene_spec(scene_number: u32, text: &str) -> Result<SceneSpec, PreproductionError> {
    let snippet = |t: &str| t.chars().take(80).collect::<String>();
    let mut title = String::new();
    let mut tldr: Option<String> = None;
    let mut bullets = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lower = trimmed.to_ascii_lowercase();
        if lower.starts_with("tldr:") || lower.starts_with("tl;dr:") {
            let after = &trimmed[trimmed.find(':').unwrap() + 1..];
            tldr = Some(after.trim().to_string());
        } else if let Some(b) = trimmed
            .strip_prefix("- ")
            .or_else(|| trimmed.strip_prefix('-'))
            .or_else(|| trimmed.strip_prefix("* "))
        {
            bullets.push(b.trim().to_string());
        } else if title.is_empty() {
            title = parse_scene_title(trimmed);
        }
        // Later prose lines outside the grammar are ignored.
    }
    if title.is_empty() {
        return Err(PreproductionError::OutlineParse {
            scene_number,
            reason: "missing title line".into(),
            snippet: snippet(text),
        });
    }
    let Some(tldr) = tldr else {
        return Err(PreproductionError::OutlineParse {
            scene_number,
            reason: "missing TLDR line".into(),
            snippet: snippet(text),
        });
    };
    if bullets.is_empty() {
        return Err(PreproductionError::OutlineParse {
            scene_number,
            reason: "no bullet items".into(),
            snippet: snippet(text),
        });
    }
    Ok(SceneSpec {
        ordinal: scene_number,
        title,
        tldr,
        bullets,
    })
}

/// Strips the `'Scene N':` marker from a title line when present.
fn parse_scene_title(line: &str) -> String {
    let unquoted = line.trim().trim_matches('\'').trim_matches('"');
    let lower = unquoted.to_ascii_lowercase();
    if lower.starts_with("scene") || lower.starts_with("'scene") {
        if let Some(colon) = unquoted.find(':') {
            let after = unquoted[colon + 1..].trim();
            let after = after.trim_matches('\'').trim_matches('"').trim();
            if !after.is_empty() {
                return after.to_string();
            }
        }
    }
    unquoted.trim().to_string()
}

// === Behavior assignment (consumed per scene while filming) ===

/// Assigns social/group roles to every participant for one scene, then
/// repairs the result: contradictory pairs trigger one re-prompt before the
/// disruptive member is dropped, absent participants default to Follower,
/// and at least one participant is guaranteed a conflict-oriented role.
pub fn assign_behaviors(
    ctx: &StageContext,
    cast: &[ParticipantProfile],
    scene: &SceneSpec,
    prev_tldrs: &[String],
    warnings: &mut Vec<String>,
) -> Result<Vec<BehaviorAssignment>, PreproductionError> {
    let participants_info = cast
        .iter()
        .map(|p| {
            format!(
                "- {}: {} — {} (expertise: {})",
                p.index, p.role, p.description, p.expertise_area
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let social_roles_info = catalog::SOCIAL_ROLES
        .iter()
        .map(|r| format!("- {}: {}", r.name, r.description))
        .collect::<Vec<_>>()
        .join("\n");
    let scene_description = scene.description_block();
    let prev = if prev_tldrs.is_empty() {
        "None (this is the first scene).".to_string()
    } else {
        prev_tldrs
            .iter()
            .enumerate()
            .map(|(i, t)| format!("Scene {}: {t}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let label = format!("stage4.s{}.behaviors", scene.ordinal);
    let req = ctx.request(
        &label,
        "assign_roles",
        &[
            ("participants_info", &participants_info),
            ("social_roles_info", &social_roles_info),
            ("scene_description", &scene_description),
            ("previous_scenes_tldr", &prev),
        ],
    )?;
    let list = ctx
        .gateway
        .complete_structured(&req, &Shape::JsonList, Gateway::DEFAULT_MAX_RETRIES)?
        .into_list()
        .unwrap_or_default();
    let mut assigned = parse_assignments(&list, cast, &label, warnings);

    let conflicts = contradictions(&assigned);
    if !conflicts.is_empty() {
        let listed = conflicts
            .iter()
            .map(|(idx, a, b)| format!("participant {idx} has both {a:?} and {b:?}"))
            .collect::<Vec<_>>()
            .join("; ");
        let mut retry = req.clone();
        retry.user_text = format!(
            "{}\n\nYour previous assignment contained contradictory roles: {listed}. \
             Respond again without assigning contradictory roles to the same participant.",
            req.user_text
        );
        let list = ctx
            .gateway
            .complete_structured(&retry, &Shape::JsonList, Gateway::DEFAULT_MAX_RETRIES)?
            .into_list()
            .unwrap_or_default();
        assigned = parse_assignments(&list, cast, &label, warnings);
        for (idx, a, b) in contradictions(&assigned) {
            let roles = assigned.get_mut(&idx).expect("index from contradictions");
            roles.retain(|r| r != b);
            warnings.push(format!(
                "{label}: participant {idx} kept contradictory roles {a:?}/{b:?} \
                 after re-prompt; dropped {b:?}"
            ));
        }
    }

    for p in cast {
        if assigned.get(&p.index).is_none_or(|roles| roles.is_empty()) {
            assigned.insert(p.index, vec!["Follower".to_string()]);
            warnings.push(format!(
                "{label}: participant {} missing from assignment; defaulted to Follower",
                p.index
            ));
        }
    }

    let has_conflict_role = assigned
        .values()
        .flatten()
        .any(|r| CONFLICT_ROLES.contains(&r.as_str()));
    if !has_conflict_role {
        let calming = ["Harmonizer", "Encourager"];
        let target = cast
            .iter()
            .map(|p| p.index)
            .find(|idx| !assigned[idx].iter().any(|r| calming.contains(&r.as_str())))
            .unwrap_or_else(|| cast[0].index);
        let roles = assigned.get_mut(&target).expect("all indices seeded");
        // Blocker contradicts Initiator-Contributor; yield to the guarantee.
        roles.retain(|r| r != "Initiator-Contributor");
        roles.push("Blocker".to_string());
        warnings.push(format!(
            "{label}: no conflict-oriented role assigned; appended Blocker to participant {target}"
        ));
    }

    Ok(cast
        .iter()
        .map(|p| {
            let social_roles = assigned[&p.index].clone();
            let role_descriptions = social_roles
                .iter()
                .map(|r| {
                    catalog::social_role(r)
                        .map(|info| info.description.to_string())
                        .unwrap_or_default()
                })
                .collect();
            BehaviorAssignment {
                participant_index: p.index,
                social_roles,
                role_descriptions,
            }
        })
        .collect())
}

/// Extracts participant → social-role lists from the wire-format list,
/// canonicalizing role spellings against the catalog and dropping entries
/// that match no participant or no catalog role.
fn parse_assignments(
    list: &[Value],
    cast: &[ParticipantProfile],
    label: &str,
    warnings: &mut Vec<String>,
) -> BTreeMap<u32, Vec<String>> {
    let mut assigned: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for item in list {
        let Some(obj) = item.as_object() else {
            warnings.push(format!("{label}: non-object entry in assignment list"));
            continue;
        };
        let who = obj.get("role").map(value_to_string).unwrap_or_default();
        let Some(index) = resolve_participant(&who, cast) else {
            warnings.push(format!("{label}: assignment names unknown participant {who:?}"));
            continue;
        };
        let roles = match obj.get("social_roles") {
            Some(Value::Array(items)) => to_string_list(items),
            Some(other) => vec![value_to_string(other)],
            None => Vec::new(),
        };
        let slot = assigned.entry(index).or_default();
        for role in roles {
            match catalog::social_role(&role) {
                Some(info) => {
                    if !slot.iter().any(|r| r == info.name) {
                        slot.push(info.name.to_string());
                    }
                }
                None => warnings.push(format!(
                    "{label}: unknown social role {role:?} for participant {index}; dropped"
                )),
            }
        }
    }
    assigned
}

fn resolve_participant(who: &str, cast: &[ParticipantProfile]) -> Option<u32> {
    let trimmed = who.trim();
    if let Some(p) = cast.iter().find(|p| p.role.eq_ignore_ascii_case(trimmed)) {
        return Some(p.index);
    }
    let index: u32 = parse_participant_key(trimmed)?;
    cast.iter().find(|p| p.index == index).map(|p| p.index)
}

/// All (participant, kept role, disruptive role) contradictions present.
fn contradictions(assigned: &BTreeMap<u32, Vec<String>>) -> Vec<(u32, &'static str, &'static str)> {
    let mut found = Vec::new();
    for (idx, roles) in assigned {
        for (a, b) in CONTRADICTORY_ROLE_PAIRS {
            if roles.iter().any(|r| r == a) && roles.iter().any(|r| r == b) {
                found.push((*idx, *a, *b));
            }
        }
    }
    found
}

// === Shared value coercion ===

fn value_to_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.trim().to_string(),
        other => other.to_string(),
    }
}

fn string_field(obj: &Map<String, Value>, key: &str) -> String {
    obj.get(key).map(value_to_string).unwrap_or_default()
}

fn to_string_list(items: &[Value]) -> Vec<String> {
    items
        .iter()
        .map(value_to_string)
        .filter(|s| !s.is_empty())
        .collect()
}

// =============================================================================
