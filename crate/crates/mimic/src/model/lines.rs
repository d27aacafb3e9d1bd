//! Canonical dialogue line format shared by prompts, exports, and the
//! re-parser applied to LLM-rewritten scenes.
//!
//! A turn renders as `>>{role}: {text}` on one line, optionally preceded by
//! stage directions rendered as `*direction*` lines. The parser is the
//! inverse, tolerant of model drift: extra chevrons, bold markers around the
//! role, multi-line turn bodies, and decorative blank lines.

use super::{Turn, TurnFlag};

/// Minimal speaker roster: 1-based index paired with the display role.
pub type Roster = [(u32, String)];

/// Renders a single turn (with its stage directions) as canonical lines.
pub fn render_turn(role: &str, turn: &Turn) -> String {
    let mut out = String::new();
    for direction in &turn.stage_directions {
        out.push('*');
        out.push_str(direction);
        out.push_str("*\n");
    }
    out.push_str(">>");
    out.push_str(role);
    out.push_str(": ");
    out.push_str(&turn.text);
    out
}

/// Renders a sequence of turns as a dialogue block, one turn per line.
/// Unknown speaker indices fall back to `Speaker {index}` rather than
/// failing: rendering is used in prompts where best-effort output beats an
/// abort.
pub fn render_dialogue(turns: &[Turn], roster: &Roster) -> String {
    turns
        .iter()
        .map(|turn| {
            let role = roster
                .iter()
                .find(|(idx, _)| *idx == turn.speaker_index)
                .map(|(_, role)| role.clone())
                .unwrap_or_else(|| format!("Speaker {}", turn.speaker_index));
            render_turn(&role, turn)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Result of re-parsing a rewritten scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDialogue {
    pub turns: Vec<Turn>,
    /// Dropped lines and other recoverable anomalies.
    pub warnings: Vec<String>,
}

/// Splits a chevron line into (role text, remainder). Accepts two or more
/// chevrons and optional bold markers around the role name.
fn split_chevron_line(line: &str) -> Option<(String, String)> {
    let trimmed = line.trim_start();
    if !trimmed.starts_with(">>") {
        return None;
    }
    let after = trimmed.trim_start_matches('>').trim_start();
    let colon = after.find(':')?;
    let role = after[..colon].trim().trim_matches('*').trim();
    if role.is_empty() {
        return None;
    }
    let text = after[colon + 1..].trim();
    Some((role.to_string(), text.to_string()))
}

/// A line that is purely a stage direction: `*phone rings*` or `_pause_`.
fn stage_direction_text(line: &str) -> Option<String> {
    let t = line.trim();
    for marker in ['*', '_'] {
        if t.len() >= 3 && t.starts_with(marker) && t.ends_with(marker) {
            let inner = t.trim_matches(marker).trim();
            // A colon would mean this is really a (malformed) speaker line.
            if !inner.is_empty() && !inner.contains(':') {
                return Some(inner.to_string());
            }
        }
    }
    None
}

/// Parses dialogue text against a known roster.
///
/// Grammar: a line opens a new turn iff it starts with `>>`, names a role
/// present in `roster` (case-insensitive), and contains a colon. Chevron
/// lines naming unknown speakers are dropped with a warning. Stage-direction
/// lines attach to the *following* turn. Any other non-empty line continues
/// the current turn. Parsed turns carry no vote or nomination state — that
/// information does not survive a text rewrite.
pub fn parse_dialogue(text: &str, roster: &Roster) -> ParsedDialogue {
    let mut turns: Vec<Turn> = Vec::new();
    let mut warnings = Vec::new();
    let mut pending_directions: Vec<String> = Vec::new();

    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(direction) = stage_direction_text(line) {
            pending_directions.push(direction);
            continue;
        }
        if let Some((role, body)) = split_chevron_line(line) {
            let speaker = roster
                .iter()
                .find(|(_, name)| name.eq_ignore_ascii_case(&role))
                .map(|(idx, _)| *idx);
            match speaker {
                Some(index) => {
                    let mut turn = Turn::new(index, body);
                    turn.stage_directions = std::mem::take(&mut pending_directions);
                    turns.push(turn);
                }
                None => {
                    warnings.push(format!("dropped line from unknown speaker '{role}'"));
                    pending_directions.clear();
                }
            }
            continue;
        }
        // Continuation of the current turn; leading text before the first
        // speaker line has no turn to attach to and is dropped.
        match turns.last_mut() {
            Some(turn) => {
                if !turn.text.is_empty() {
                    turn.text.push(' ');
                }
                turn.text.push_str(line.trim());
            }
            None => warnings.push(format!("dropped leading text '{}'", line.trim())),
        }
    }
    if !pending_directions.is_empty() {
        warnings.push(format!(
            "dropped {} trailing stage direction(s) with no following turn",
            pending_directions.len()
        ));
    }
    ParsedDialogue { turns, warnings }
}

/// Parses dialogue without a roster, discovering speakers as they appear.
/// Used for single-prompt transcripts where no cast exists beforehand.
/// Returns the turns plus the roster in order of first appearance.
pub fn parse_dialogue_discover(text: &str) -> (ParsedDialogue, Vec<(u32, String)>) {
    let mut roster: Vec<(u32, String)> = Vec::new();
    // First pass: collect distinct role names in order of appearance.
    for line in text.lines() {
        if stage_direction_text(line).is_some() {
            continue;
        }
        if let Some((role, _)) = split_chevron_line(line) {
            if !roster.iter().any(|(_, r)| r.eq_ignore_ascii_case(&role)) {
                let index = roster.len() as u32 + 1;
                roster.push((index, role));
            }
        }
    }
    let parsed = parse_dialogue(text, &roster);
    (parsed, roster)
}

/// Marks every turn with a flag, returning the modified list.
pub fn flag_all(mut turns: Vec<Turn>, flag: TurnFlag) -> Vec<Turn> {
    for turn in &mut turns {
        turn.annotations.insert(flag);
    }
    turns
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roster() -> Vec<(u32, String)> {
        vec![(1, "Virologist".to_string()), (2, "Economist".to_string())]
    }

    #[test]
    fn renders_canonical_line() {
        let turn = Turn::new(1, "We need better surveillance.");
        assert_eq!(
            render_turn("Virologist", &turn),
            ">>Virologist: We need better surveillance."
        );
    }

    #[test]
    fn parses_what_it_renders() {
        let mut turn = Turn::new(2, "Budgets are finite.");
        turn.stage_directions.push("phone buzzes".to_string());
        let text = render_dialogue(&[Turn::new(1, "Hello."), turn.clone()], &roster());
        let parsed = parse_dialogue(&text, &roster());
        assert!(parsed.warnings.is_empty());
        assert_eq!(parsed.turns.len(), 2);
        assert_eq!(parsed.turns[0].speaker_index, 1);
        assert_eq!(parsed.turns[1].text, "Budgets are finite.");
        assert_eq!(parsed.turns[1].stage_directions, vec!["phone buzzes".to_string()]);
    }

    #[test]
    fn tolerates_extra_chevrons_and_bold_roles() {
        let text = ">>>**Virologist**: Triple chevron, bold role.";
        let parsed = parse_dialogue(text, &roster());
        assert_eq!(parsed.turns.len(), 1);
        assert_eq!(parsed.turns[0].speaker_index, 1);
        assert_eq!(parsed.turns[0].text, "Triple chevron, bold role.");
    }

    #[test]
    fn unknown_speaker_line_is_dropped_with_warning() {
        let text = ">>Virologist: Fine.\n>>Moderator: Who am I?\n>>Economist: Also fine.";
        let parsed = parse_dialogue(text, &roster());
        assert_eq!(parsed.turns.len(), 2);
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains("Moderator"));
    }

    #[test]
    fn continuation_lines_join_the_current_turn() {
        let text = ">>Economist: First part,\nsecond part.";
        let parsed = parse_dialogue(text, &roster());
        assert_eq!(parsed.turns.len(), 1);
        assert_eq!(parsed.turns[0].text, "First part, second part.");
    }

    #[test]
    fn stage_direction_attaches_to_following_turn() {
        let text = "*The phone rings briefly.*\n>>Virologist: Sorry about that.";
        let parsed = parse_dialogue(text, &roster());
        assert_eq!(parsed.turns.len(), 1);
        assert_eq!(
            parsed.turns[0].stage_directions,
            vec!["The phone rings briefly.".to_string()]
        );
    }

    #[test]
    fn discovery_builds_roster_in_order_of_appearance() {
        let text = ">>Chair: Welcome.\n>>Analyst: Thanks.\n>>Chair: Let us begin.";
        let (parsed, roster) = parse_dialogue_discover(text);
        assert_eq!(
            roster,
            vec![(1, "Chair".to_string()), (2, "Analyst".to_string())]
        );
        assert_eq!(parsed.turns.len(), 3);
        assert_eq!(parsed.turns[2].speaker_index, 1);
    }
}
