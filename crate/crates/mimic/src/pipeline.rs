//! End-to-end orchestration: wires the staged operations into one run, from
//! brainstorming the target summary to the final humanized transcript.
//!
//! Stage order per meeting: summary/tags → cast → knowledge split → outline,
//! then per scene filming under director review (with recap threading), then
//! per scene the chance-gated effect injection and the editor → detector →
//! humanizer chain. The finished transcript embeds the full call trace and
//! corpus statistics and is validated before being returned.

use thiserror::Error;

use crate::evaluation::compute_stats;
use crate::model::{
    validate_transcript, KnowledgeSource, Scene, SceneStatus, Transcript, TranscriptOrigin,
};
use crate::postproduction::{maybe_inject_effects, refine_scene, scene_rng, PostproductionError};
use crate::preproduction::{self, PreproductionError};
use crate::production::{film_with_qa, summarize_scene, ProductionError, SceneMemory};
use crate::StageContext;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preproduction(#[from] PreproductionError),
    #[error(transparent)]
    Production(#[from] ProductionError),
    #[error(transparent)]
    Postproduction(#[from] PostproductionError),
    /// The assembled transcript failed its own consistency checks — always a
    /// bug in the pipeline, never the backend's fault.
    #[error("generated transcript violates its own invariants: {}", violations.join("; "))]
    Invalid { violations: Vec<String> },
}

/// Runs the complete pipeline over one source and returns the finished,
/// validated transcript. All model traffic goes through `ctx.gateway`, so a
/// scripted backend makes the whole run deterministic.
pub fn run_meeting(
    ctx: &StageContext,
    source: &KnowledgeSource,
) -> Result<Transcript, PipelineError> {
    let mut warnings = Vec::new();

    // Summary, tags, cast, knowledge split, outline.
    let (summary, tags) = preproduction::brainstorm(ctx, source, &mut warnings)?;
    let mut source = source.clone();
    source.tags = tags.clone();
    let mut cast = preproduction::cast(ctx, &source, &tags, &mut warnings)?;
    preproduction::distribute_knowledge(ctx, &source, &mut cast, &mut warnings)?;
    let outline = preproduction::script(ctx, &source, &summary, &tags, &cast)?;

    // Film every scene under review, threading each finished scene's recap
    // and closing turns into the next scene's private views.
    let mut scenes: Vec<Scene> = Vec::new();
    let mut prev_tldrs: Vec<String> = Vec::new();
    for spec in &outline {
        let mut scene_warnings = Vec::new();
        let behaviors =
            preproduction::assign_behaviors(ctx, &cast, spec, &prev_tldrs, &mut scene_warnings)?;
        let memory = SceneMemory {
            source: &source,
            prev_scene_tldrs: &prev_tldrs,
            prev_scene_turns: scenes.last().map(|s| s.turns.as_slice()).unwrap_or(&[]),
        };
        let mut scene = film_with_qa(ctx, spec, &cast, &behaviors, &memory)?;
        let mut recap_warnings = Vec::new();
        scene.tldr_after = summarize_scene(ctx, &scene, &cast, &mut recap_warnings)?;
        // Keep the scene's warning log chronological: behavior assignment
        // happened before filming, the recap after.
        scene_warnings.extend(std::mem::take(&mut scene.warnings));
        scene_warnings.extend(recap_warnings);
        scene.warnings = scene_warnings;
        prev_tldrs.push(scene.tldr_after.clone());
        scenes.push(scene);
    }

    // Post-production per scene: maybe inject a disruption, then refine.
    // Scenes kept against the director's judgment carry the last rejection
    // into the editor as special instructions.
    let recaps: Vec<String> = scenes.iter().map(|s| s.tldr_after.clone()).collect();
    for (i, scene) in scenes.iter_mut().enumerate() {
        let mut rng = scene_rng(ctx.config.seed, scene.spec.ordinal);
        maybe_inject_effects(ctx, scene, &cast, &mut rng, ctx.config.effect_probability)?;
        let previous_tldr = i.checked_sub(1).map(|j| recaps[j].as_str());
        let feedback = match scene.status {
            SceneStatus::Fallback => scene.director_history.last().map(|v| v.explanation.clone()),
            SceneStatus::Accepted => None,
        };
        refine_scene(ctx, scene, &cast, previous_tldr, feedback.as_deref())?;
    }

    let mut transcript = Transcript {
        config: ctx.config.clone(),
        source_id: source.id.clone(),
        origin: TranscriptOrigin::Mimic,
        target_summary: summary,
        cast,
        scenes,
        trace: ctx.gateway.transcript_trace(),
        stats_cache: None,
        warnings,
    };
    transcript.stats_cache = Some(compute_stats(&transcript, &source));

    let violations = validate_transcript(&transcript);
    if violations.is_empty() {
        Ok(transcript)
    } else {
        Err(PipelineError::Invalid {
            violations: violations.iter().map(|v| v.to_string()).collect(),
        })
    }
}

// =============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, GatewayConfig, ScriptedBackend};
    use crate::model::{serialize_transcript, MeetingConfig, TurnFlag};
    use crate::prompts::PromptLibrary;

    const SOURCE_JSON: &str = include_str!("../../../fixtures/sample_source.json");
    const CONFIG_JSON: &str = include_str!("../../../fixtures/sample_config.json");
    const RESPONSES_JSON: &str = include_str!("../../../fixtures/scripted_meeting.json");

    fn fixture_responses() -> Vec<String> {
        serde_json::from_str(RESPONSES_JSON).expect("fixture is a JSON list of strings")
    }

    fn fixture_source() -> KnowledgeSource {
        serde_json::from_str(SOURCE_JSON).expect("fixture source parses")
    }

    fn fixture_config() -> MeetingConfig {
        serde_json::from_str(CONFIG_JSON).expect("fixture config parses")
    }

    fn run_scripted(
        responses: Vec<String>,
        config: &MeetingConfig,
        source: &KnowledgeSource,
    ) -> (Result<Transcript, PipelineError>, ScriptedBackend) {
        let backend = ScriptedBackend::new(responses);
        let gateway = Gateway::new(
            std::sync::Arc::new(backend.clone()),
            GatewayConfig::default(),
        );
        let prompts = PromptLibrary::builtin(config.language);
        let ctx = StageContext {
            gateway: &gateway,
            prompts: &prompts,
            config,
        };
        (run_meeting(&ctx, source), backend)
    }

    #[test]
    fn scripted_meeting_runs_end_to_end() {
        let config = fixture_config();
        let source = fixture_source();
        let (result, backend) = run_scripted(fixture_responses(), &config, &source);
        let transcript = result.expect("scripted meeting completes");

        // Every scripted response was consumed, in order, with no retries.
        assert_eq!(backend.remaining(), 0);
        assert_eq!(transcript.trace.len(), backend.calls());

        assert_eq!(transcript.origin, TranscriptOrigin::Mimic);
        assert_eq!(transcript.source_id, "coldchain-demo");
        assert!(transcript
            .target_summary
            .text
            .starts_with("The group examines why rural vaccination"));
        let roles: Vec<&str> = transcript.cast.iter().map(|p| p.role.as_str()).collect();
        assert_eq!(roles, ["Virologist", "Economist", "Planner"]);
        assert_eq!(transcript.scenes.len(), 2);
        assert!(transcript.warnings.is_empty());

        // Scene 1 ends in a unanimous vote and gains a phone interruption in
        // post-production plus one rewritten line from the editor/humanizer.
        let s1 = &transcript.scenes[0];
        assert_eq!(s1.status, SceneStatus::Accepted);
        assert_eq!(s1.turns.len(), 4);
        assert_eq!(s1.votes.len(), 1);
        assert!(s1.votes[0].passed);
        assert_eq!(s1.votes[0].ballots.len(), 3);
        assert_eq!(s1.turns[1].text, "Sorry — that's mine, go on.");
        assert!(s1.turns[1].annotations.contains(&TurnFlag::EffectInjected));
        assert_eq!(
            s1.turns[1].stage_directions,
            vec!["A phone buzzes against the table".to_string()]
        );
        assert!(s1.turns[2].annotations.contains(&TurnFlag::Edited));
        assert!(s1.turns[2].text.starts_with("The books hide it too"));
        assert!(s1.turns[3].wants_vote);
        assert!(s1.warnings.is_empty(), "clean fixture: {:?}", s1.warnings);
        assert_eq!(
            s1.tldr_after,
            "The group pinned dose spoilage on unrefrigerated last-mile transport and silent write-offs."
        );

        // Scene 2: 2-of-3 vote passes; the projector disruption survives an
        // identical editor pass untouched; empty detector feedback means the
        // humanizer never ran.
        let s2 = &transcript.scenes[1];
        assert_eq!(s2.turns.len(), 4);
        assert_eq!(s2.votes[0].yes_count, 2);
        assert!(s2.votes[0].passed);
        assert!(s2.turns[2].annotations.contains(&TurnFlag::EffectInjected));
        assert!(s2.turns.iter().all(|t| !t.annotations.contains(&TurnFlag::Edited)));
        assert!(s2.warnings.is_empty(), "clean fixture: {:?}", s2.warnings);
        let labels: Vec<String> = backend
            .recorded()
            .iter()
            .map(|r| r.stage_label.clone())
            .collect();
        assert!(labels.contains(&"stage7.s1.humanize".to_string()));
        assert!(!labels.contains(&"stage7.s2.humanize".to_string()));

        // Embedded statistics reflect the post-produced dialogue.
        let stats = transcript.stats_cache.as_ref().expect("stats embedded");
        assert_eq!(stats.n_speakers, 3);
        assert_eq!(stats.n_unique_roles, 3);
        assert_eq!(stats.n_turns, 8);
        assert_eq!(stats.n_effect_events, 2);
    }

    #[test]
    fn scripted_meeting_is_deterministic() {
        let config = fixture_config();
        let source = fixture_source();
        let (a, _) = run_scripted(fixture_responses(), &config, &source);
        let (b, _) = run_scripted(fixture_responses(), &config, &source);
        let a = serialize_transcript(&a.expect("first run completes"));
        let b = serialize_transcript(&b.expect("second run completes"));
        assert_eq!(a, b, "two scripted runs must serialize byte-identically");
    }

    #[test]
    fn call_order_matches_the_stage_sequence() {
        let config = fixture_config();
        let source = fixture_source();
        let (_, backend) = run_scripted(fixture_responses(), &config, &source);
        let labels: Vec<String> = backend
            .recorded()
            .iter()
            .map(|r| r.stage_label.clone())
            .collect();
        let expected = [
            "stage1.summary",
            "stage1.tags",
            "stage2.profile.1",
            "stage2.profile.2",
            "stage2.profile.3",
            "stage2.style.1",
            "stage2.style.2",
            "stage2.style.3",
            "stage2.knowledge",
            "stage3.outline",
            "stage4.s1.behaviors",
            "stage4.s1.a1.starter",
            "stage4.s1.a1.turn1.p1",
            "stage4.s1.a1.turn2.p2",
            "stage4.s1.a1.turn3.p3",
            "stage4.s1.a1.ballot.p1",
            "stage4.s1.a1.ballot.p2",
            "stage5.s1.a1.review",
            "stage5.s1.tldr",
            "stage4.s2.behaviors",
            "stage4.s2.a1.starter",
            "stage4.s2.a1.turn1.p2",
            "stage4.s2.a1.turn2.p3",
            "stage4.s2.a1.turn3.p1",
            "stage4.s2.a1.ballot.p2",
            "stage4.s2.a1.ballot.p3",
            "stage5.s2.a1.review",
            "stage5.s2.tldr",
            "stage6.s1.effects",
            "stage7.s1.edit",
            "stage7.s1.detect",
            "stage7.s1.humanize",
            "stage6.s2.effects",
            "stage7.s2.edit",
            "stage7.s2.detect",
        ];
        assert_eq!(labels, expected);
    }

    // === Director-fallback wiring ===

    fn two_person_config() -> MeetingConfig {
        let mut config = fixture_config();
        config.num_participants = 2;
        config.max_refilm_cycles = 1;
        config.effect_probability = 0.0;
        config
    }

    fn turn_json(text: &str, wants_vote: bool, next: u32) -> String {
        serde_json::json!({"turn": text, "wants_vote": wants_vote, "next_speaker": next})
            .to_string()
    }

    /// Scripted run where the director rejects scene 1 at every attempt:
    /// the kept scene must reach the editor with the rejection explanation.
    #[test]
    fn fallback_scene_carries_rejection_into_the_editor() {
        let profile = |role: &str| {
            format!(
                r#"{{"role": "{role}", "description": "d", "expertise_area": "e", "perspective": "p"}}"#
            )
        };
        let style = r#"{"speaking_style": {"tone": "t", "language_complexity": "l", "communication_style": "c", "sentence_structure": "s", "formality": "f", "other_traits": "o"}, "personalized_vocabulary": {"filler_words": [], "catchphrases": [], "speech_patterns": [], "emotional_expressions": []}}"#;
        let rejection = "The quorum never addresses the budget line.";
        let responses = vec![
            "A short target summary for a tiny scripted meeting.".to_string(),
            r#"["a", "b", "c", "d", "e"]"#.to_string(),
            profile("Alpha"),
            profile("Beta"),
            style.to_string(),
            style.to_string(),
            r#"{"1": ["p1"], "2": ["p2", "p3"]}"#.to_string(),
            r#"["'Scene 1': Opening\nTLDR: They open.\n- Greet", "'Scene 2': Closing\nTLDR: They close.\n- Decide"]"#
                .to_string(),
            r#"[{"role": "Alpha", "social_roles": ["Aggressor"], "social_roles_descr": ["x"]}, {"role": "Beta", "social_roles": ["Follower"], "social_roles_descr": ["x"]}]"#
                .to_string(),
            "1".to_string(),
            turn_json("First try at the opening.", true, 2),
            r#"{"agree": true}"#.to_string(),
            format!(r#"{{"explanation": "{rejection}", "accept_scene": false}}"#),
            "1".to_string(),
            turn_json("Second try at the opening.", true, 2),
            r#"{"agree": true}"#.to_string(),
            format!(r#"{{"explanation": "{rejection}", "accept_scene": false}}"#),
            "Scene one recap.".to_string(),
            r#"[{"role": "Alpha", "social_roles": ["Blocker"], "social_roles_descr": ["x"]}, {"role": "Beta", "social_roles": ["Coordinator"], "social_roles_descr": ["x"]}]"#
                .to_string(),
            "2".to_string(),
            turn_json("Wrapping up now.", true, 1),
            r#"{"agree": true}"#.to_string(),
            r#"{"explanation": "fine", "accept_scene": true}"#.to_string(),
            "Scene two recap.".to_string(),
            "**Refined Scene:**\n>>Alpha: Second try at the opening.".to_string(),
            "<feedback></feedback>".to_string(),
            "**Refined Scene:**\n>>Beta: Wrapping up now.".to_string(),
            "<feedback></feedback>".to_string(),
        ];
        let config = two_person_config();
        let source = fixture_source();
        let (result, backend) = run_scripted(responses, &config, &source);
        let transcript = result.expect("fallback meeting completes");
        assert_eq!(backend.remaining(), 0);

        let s1 = &transcript.scenes[0];
        assert_eq!(s1.status, SceneStatus::Fallback);
        assert_eq!(s1.director_history.len(), 2);
        assert_eq!(s1.turns[0].text, "Second try at the opening.");

        // The rejected scene's editor call carries the explanation; the
        // accepted scene's does not. Effects were disabled, so no
        // stage6 traffic at all.
        let recorded = backend.recorded();
        let edit_s1 = recorded
            .iter()
            .find(|r| r.stage_label == "stage7.s1.edit")
            .expect("scene 1 was edited");
        assert!(edit_s1.system_text.contains(rejection));
        let edit_s2 = recorded
            .iter()
            .find(|r| r.stage_label == "stage7.s2.edit")
            .expect("scene 2 was edited");
        assert!(!edit_s2.system_text.contains(rejection));
        assert!(recorded.iter().all(|r| !r.stage_label.contains("effects")));
    }
}
