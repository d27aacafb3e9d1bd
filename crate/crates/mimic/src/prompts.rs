//! Prompt template storage and rendering.
//!
//! Templates are plain text files using `{placeholder}` substitution. A file
//! may contain a line `<<<USER>>>` separating the system part from the user
//! part; without it the whole file is the system part. Rendering replaces
//! exactly the provided keys, so literal braces in JSON format examples
//! survive untouched.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::model::Language;

/// Separator line between the system and user halves of a template file.
const USER_SEPARATOR: &str = "<<<USER>>>";

// === Built-in templates ===

macro_rules! builtin_templates {
    ($($name:literal),+ $(,)?) => {
        /// Names of all built-in templates.
        pub const TEMPLATE_NAMES: &[&str] = &[$($name),+];

        fn builtin_common(name: &str) -> Option<&'static str> {
            match name {
                $($name => Some(include_str!(concat!("../assets/templates/common/", $name, ".txt"))),)+
                _ => None,
            }
        }
    };
}

builtin_templates!(
    "target_summary",
    "qmsum_examples",
    "article_tags",
    "participant",
    "speaking_style",
    "knowledge_distribution",
    "meeting_planner",
    "assign_roles",
    "select_starter",
    "participant_turn",
    "ballot",
    "director",
    "scene_tldr",
    "special_effects",
    "editor",
    "editor_rejected_block",
    "detector",
    "humanizer",
    "omniscient",
    "omniscient_continue",
    "judge_authenticity",
    "judge_behavior",
    "judge_challenge",
);

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("unknown template: {0}")]
    UnknownTemplate(String),
    #[error("failed to read template override {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A parsed template: system part plus optional user part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub system: String,
    pub user: String,
}

impl Template {
    /// Split raw file content on the `<<<USER>>>` separator line.
    pub fn parse(raw: &str) -> Template {
        for (idx, line) in raw.lines().enumerate() {
            if line.trim() == USER_SEPARATOR {
                let system: Vec<&str> = raw.lines().take(idx).collect();
                let user: Vec<&str> = raw.lines().skip(idx + 1).collect();
                return Template {
                    system: system.join("\n").trim_end().to_string(),
                    user: user.join("\n").trim_end().to_string(),
                };
            }
        }
        Template {
            system: raw.trim_end().to_string(),
            user: String::new(),
        }
    }

    /// Substitute `{key}` tokens for every provided variable, in both parts.
    pub fn render(&self, vars: &[(&str, &str)]) -> RenderedPrompt {
        RenderedPrompt {
            system: fill(&self.system, vars),
            user: fill(&self.user, vars),
        }
    }
}

/// A template with all variables substituted, ready for the gateway.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

/// Replace each `{key}` token with its value. Unknown tokens are left
/// untouched so literal braces in format examples survive.
pub fn fill(text: &str, vars: &[(&str, &str)]) -> String {
    let mut out = text.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

/// Template store: built-ins compiled into the binary, optionally shadowed by
/// a directory of override files keyed by language (`<dir>/<lang>/<name>.txt`
/// first, then `<dir>/common/<name>.txt`, then the built-in).
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    language: Language,
    override_dir: Option<PathBuf>,
}

impl PromptLibrary {
    pub fn builtin(language: Language) -> Self {
        PromptLibrary {
            language,
            override_dir: None,
        }
    }

    pub fn with_override_dir(language: Language, dir: impl Into<PathBuf>) -> Self {
        PromptLibrary {
            language,
            override_dir: Some(dir.into()),
        }
    }

    pub fn language(&self) -> Language {
        self.language
    }

    /// Fetch and parse a template by name.
    pub fn get(&self, name: &str) -> Result<Template, PromptError> {
        if let Some(dir) = &self.override_dir {
            for sub in [self.language.code(), "common"] {
                let path = dir.join(sub).join(format!("{name}.txt"));
                match std::fs::read_to_string(&path) {
                    Ok(raw) => return Ok(Template::parse(&raw)),
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
                    Err(e) => return Err(PromptError::Io { path, source: e }),
                }
            }
        }
        builtin_common(name)
            .map(Template::parse)
            .ok_or_else(|| PromptError::UnknownTemplate(name.to_string()))
    }

    /// Fetch, parse, and render in one step.
    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<RenderedPrompt, PromptError> {
        Ok(self.get(name)?.render(vars))
    }

    /// Raw text of a fixture file (no `{}` substitution), e.g. few-shot blocks.
    pub fn raw(&self, name: &str) -> Result<String, PromptError> {
        let t = self.get(name)?;
        if t.user.is_empty() {
            Ok(t.system)
        } else {
            Ok(format!("{}\n{}", t.system, t.user))
        }
    }
}

/// Render a roster as `index: role` lines, the shape participant-facing
/// prompts use for nomination.
pub fn roster_lines(roster: &[(u32, String)]) -> String {
    roster
        .iter()
        .map(|(idx, role)| format!("{idx}: {role}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Render a key/value block (`- **Key**: value` lines) for prompt embedding.
pub fn info_block(fields: &BTreeMap<String, String>) -> String {
    fields
        .iter()
        .map(|(k, v)| format!("- **{k}**: {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

// =============================================================================
