//! Transcript (de)serialization and invariant checking.
//!
//! One meeting is one UTF-8 JSON document. Serialization is deterministic:
//! field order follows the struct definitions, maps are ordered, and no
//! timestamps or durations are embedded, so the same transcript value always
//! produces the same bytes.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::catalog;
use super::{Scene, SceneStatus, Transcript, TranscriptOrigin};

/// A single invariant violation, addressed by a JSON-pointer-ish path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    /// The document is not well-formed JSON for the transcript schema.
    #[error("transcript syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    /// The document parsed but violates a structural invariant.
    #[error("transcript invariant violated at {0}")]
    Invariant(Violation),
}

/// Serializes a transcript to its canonical on-disk form. The caller is
/// expected to have validated the value; serialization itself cannot fail
/// for tree-shaped data.
pub fn serialize_transcript(t: &Transcript) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(t).expect("transcript serialization is infallible");
    bytes.push(b'\n');
    bytes
}

/// Parses and validates a transcript document. Syntax problems carry the
/// byte offset of the failure; the first violated invariant is reported as
/// [`ModelError::Invariant`].
pub fn parse_transcript(bytes: &[u8]) -> Result<Transcript, ModelError> {
    let transcript: Transcript = serde_json::from_slice(bytes).map_err(|e| ModelError::Syntax {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let violations = validate_transcript(&transcript);
    match violations.into_iter().next() {
        None => Ok(transcript),
        Some(first) => Err(ModelError::Invariant(first)),
    }
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    let mut current_line = 1;
    for (i, b) in bytes.iter().enumerate() {
        if current_line == line {
            offset = i;
            break;
        }
        if *b == b'\n' {
            current_line += 1;
            offset = i + 1;
        }
    }
    (offset + column.saturating_sub(1)).min(bytes.len())
}

/// Checks every structural invariant, returning all violations found.
/// An empty result is the definition of a well-formed transcript.
pub fn validate_transcript(t: &Transcript) -> Vec<Violation> {
    let mut v: Vec<Violation> = Vec::new();
    let push = |v: &mut Vec<Violation>, path: String, message: String| {
        v.push(Violation { path, message });
    };

    for problem in t.config.validate() {
        push(&mut v, "config".to_string(), problem);
    }

    // Target summary stays within the configured budget and prose-only form.
    if t.target_summary.word_count > t.config.summary_word_limit {
        push(
            &mut v,
            "target_summary".to_string(),
            format!(
                "word_count {} exceeds summary_word_limit {}",
                t.target_summary.word_count, t.config.summary_word_limit
            ),
        );
    }
    for line in t.target_summary.text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("- ") || trimmed.starts_with("* ") || trimmed.starts_with('•') {
            push(
                &mut v,
                "target_summary".to_string(),
                format!("bullet marker in summary line '{}'", line.trim()),
            );
            break;
        }
    }

    // Cast well-formedness.
    let mut seen_indices = BTreeSet::new();
    for (i, p) in t.cast.iter().enumerate() {
        let path = format!("cast[{i}]");
        if !seen_indices.insert(p.index) {
            push(&mut v, path.clone(), format!("duplicate participant index {}", p.index));
        }
        if p.role.trim().is_empty() {
            push(&mut v, path.clone(), "empty role".to_string());
        }
        if t.origin == TranscriptOrigin::Mimic && p.assigned_paragraph_ids.is_empty() {
            push(
                &mut v,
                path,
                "participant has no assigned paragraphs after knowledge distribution".to_string(),
            );
        }
    }
    let cast_indices: BTreeSet<u32> = t.cast.iter().map(|p| p.index).collect();

    for (si, scene) in t.scenes.iter().enumerate() {
        validate_scene(&mut v, t, scene, si, &cast_indices);
    }
    v
}

fn validate_scene(
    v: &mut Vec<Violation>,
    t: &Transcript,
    scene: &Scene,
    si: usize,
    cast_indices: &BTreeSet<u32>,
) {
    let path = format!("scenes[{si}]");
    let push = |v: &mut Vec<Violation>, path: String, message: String| {
        v.push(Violation { path, message });
    };

    if scene.spec.ordinal != si as u32 + 1 {
        push(
            v,
            path.clone(),
            format!("ordinal {} out of order (expected {})", scene.spec.ordinal, si + 1),
        );
    }
    if scene.spec.bullets.is_empty() {
        push(v, path.clone(), "scene spec has no discussion bullets".to_string());
    }
    if scene.turns.is_empty() {
        push(v, path.clone(), "scene has no turns".to_string());
    }
    let max_history = 1 + t.config.max_refilm_cycles as usize;
    if scene.director_history.len() > max_history {
        push(
            v,
            path.clone(),
            format!(
                "director_history has {} verdicts, limit is {}",
                scene.director_history.len(),
                max_history
            ),
        );
    }
    if scene.status == SceneStatus::Accepted
        && scene.director_history.last().map(|d| d.accept_scene) == Some(false)
    {
        push(
            v,
            path.clone(),
            "scene marked accepted but last verdict rejects it".to_string(),
        );
    }

    // Behavior assignments (absent for omniscient transcripts) must stay
    // within the catalog, avoid contradictory pairs, and include a conflict
    // role somewhere in the scene.
    if !scene.behavior_assignments.is_empty() {
        let mut conflict_present = false;
        for (ai, assignment) in scene.behavior_assignments.iter().enumerate() {
            let apath = format!("{path}.behavior_assignments[{ai}]");
            if !cast_indices.contains(&assignment.participant_index) {
                push(
                    v,
                    apath.clone(),
                    format!("participant index {} not in cast", assignment.participant_index),
                );
            }
            if assignment.social_roles.is_empty() {
                push(v, apath.clone(), "no social roles assigned".to_string());
            }
            if assignment.social_roles.len() != assignment.role_descriptions.len() {
                push(
                    v,
                    apath.clone(),
                    "role_descriptions not parallel to social_roles".to_string(),
                );
            }
            for role in &assignment.social_roles {
                if catalog::social_role(role).is_none() {
                    push(v, apath.clone(), format!("unknown social role '{role}'"));
                }
                if catalog::CONFLICT_ROLES.iter().any(|c| c.eq_ignore_ascii_case(role)) {
                    conflict_present = true;
                }
            }
            for (a, b) in catalog::CONTRADICTORY_ROLE_PAIRS {
                let has = |name: &str| {
                    assignment
                        .social_roles
                        .iter()
                        .any(|r| r.eq_ignore_ascii_case(name))
                };
                if has(a) && has(b) {
                    push(v, apath.clone(), format!("contradictory roles {a} and {b}"));
                }
            }
        }
        if !conflict_present {
            push(
                v,
                format!("{path}.behavior_assignments"),
                "no participant holds a conflict-oriented role".to_string(),
            );
        }
    }

    for (ti, turn) in scene.turns.iter().enumerate() {
        let tpath = format!("{path}.turns[{ti}]");
        if !cast_indices.contains(&turn.speaker_index) {
            push(
                v,
                tpath.clone(),
                format!("speaker_index {} not in cast", turn.speaker_index),
            );
        }
        if let Some(next) = turn.nominated_next {
            if next == turn.speaker_index {
                push(v, tpath.clone(), "turn nominates its own speaker".to_string());
            }
            if !cast_indices.contains(&next) {
                push(v, tpath, format!("nominated_next {next} not in cast"));
            }
        }
    }

    for (vi, vote) in scene.votes.iter().enumerate() {
        let vpath = format!("{path}.votes[{vi}]");
        if vote.ballots.len() != t.cast.len() {
            push(
                v,
                vpath.clone(),
                format!(
                    "{} ballots for a cast of {}",
                    vote.ballots.len(),
                    t.cast.len()
                ),
            );
        }
        let yes = vote.ballots.values().filter(|b| **b).count() as u32;
        if yes != vote.yes_count {
            push(
                v,
                vpath.clone(),
                format!("yes_count {} disagrees with ballots ({yes} yes)", vote.yes_count),
            );
        }
        let majority = 2 * vote.yes_count as usize > t.cast.len();
        if vote.passed != majority {
            push(
                v,
                vpath.clone(),
                format!(
                    "passed={} inconsistent with strict majority over {} voters",
                    vote.passed,
                    t.cast.len()
                ),
            );
        }
        if vote.ballots.get(&vote.proposer_index) == Some(&false) {
            push(v, vpath, "proposer ballot must be yes".to_string());
        }
    }
}
