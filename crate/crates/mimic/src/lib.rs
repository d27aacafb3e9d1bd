//! Synthetic meeting-transcript engine.
//!
//! The library generates multi-party meeting transcripts from a knowledge
//! source (an article split into paragraphs) by running a staged production
//! pipeline inspired by film-making:
//!
//! 1. brainstorm   — target summary and topic tags for the source
//! 2. casting      — participant profiles, speaking styles, knowledge split
//! 3. scripting    — scene-by-scene meeting outline
//! 4. filming      — turn-by-turn dialogue between non-omniscient agents
//! 5. directing    — scene QA with bounded re-filming
//! 6. effects      — probabilistic injection of naturalistic disruptions
//! 7. editing      — refinement, synthetic-text detection, humanizing
//!
//! Every LLM interaction goes through [`gateway`], which supports a scripted
//! backend for fully deterministic offline runs, structured-output parsing
//! with bounded repair, caching, and per-call tracing. [`evaluation`] holds
//! the LLM-judge instruments and corpus statistics; [`baseline`] generates
//! single-prompt omniscient transcripts for comparison.

pub mod baseline;
pub mod evaluation;
pub mod gateway;
pub mod model;
pub mod pipeline;
pub mod postproduction;
pub mod preproduction;
pub mod production;
pub mod prompts;

use gateway::{CompletionRequest, Gateway};
use model::MeetingConfig;
use prompts::{PromptError, PromptLibrary};

/// Shared dependencies threaded through every pipeline stage.
pub struct StageContext<'a> {
    pub gateway: &'a Gateway,
    pub prompts: &'a PromptLibrary,
    pub config: &'a MeetingConfig,
}

impl StageContext<'_> {
    /// Renders a template and builds the completion request for it, applying
    /// any per-stage temperature override from the config.
    pub fn request(
        &self,
        stage_label: &str,
        template: &str,
        vars: &[(&str, &str)],
    ) -> Result<CompletionRequest, PromptError> {
        let rendered = self.prompts.render(template, vars)?;
        Ok(
            CompletionRequest::new(stage_label, rendered.system, rendered.user)
                .with_temperature(self.config.temperature_for(stage_label)),
        )
    }
}
