//! Semantic-role-labelling frontend: turns text into [`SemanticFrame`]s
//! through a pluggable backend and aligns word spans to encoder positions.

mod align;
mod fixture;
mod sidecar;
mod subprocess;

pub use align::{align_frames, AlignedFrame, Alignment, SpanAlignment};
pub use fixture::FixtureBackend;
pub use sidecar::{
    extract_corpus, read_sidecar, write_sidecar, ArgRecord, FrameIndex, FrameRecord, SidecarRecord,
};
pub use subprocess::SubprocessBackend;

use crate::error::{Error, Result};
use crate::text::TokenizedText;
use crate::types::{FrameSource, SemanticFrame};

/// A semantic role labeller operating on one tokenized sentence at a time.
///
/// Implementations must be deterministic for a fixed input and version.
/// Returned frames may carry any `sentence_index`/`source`; the caller
/// overwrites both.
pub trait SrlBackend {
    fn name(&self) -> &str;

    fn version(&self) -> &str;

    fn label(&self, sentence: &[String]) -> Result<Vec<SemanticFrame>>;
}

/// Frames for one text plus any per-sentence problems encountered.
#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub frames: Vec<SemanticFrame>,
    pub warnings: Vec<String>,
    pub used_fallback: bool,
}

/// Runs `backend` over every sentence of `text`.
///
/// Frames are ordered by sentence then predicate start. A sentence on which
/// the backend fails contributes nothing; if every sentence fails the call
/// errors. If no frame at all is found, each sentence becomes a `FULLSENT`
/// pseudo-frame.
pub fn extract_frames(
    text: &TokenizedText,
    source: FrameSource,
    backend: &dyn SrlBackend,
) -> Result<Extraction> {
    if text.num_words() == 0 {
        return Err(Error::Empty("text has no words".into()));
    }
    let mut out = Extraction::default();
    let mut failures = 0;
    for (si, sentence) in text.sentences.iter().enumerate() {
        match backend.label(sentence) {
            Ok(frames) => {
                for mut f in frames {
                    f.sentence_index = si;
                    f.source = source;
                    match f.validate(sentence.len()) {
                        Ok(()) => out.frames.push(f),
                        Err(e) => out
                            .warnings
                            .push(format!("sentence {si}: dropped invalid frame: {e}")),
                    }
                }
            }
            Err(e) => {
                failures += 1;
                log::warn!("{} failed on sentence {si}: {e}", backend.name());
                out.warnings.push(format!("sentence {si}: {e}"));
            }
        }
    }
    if failures == text.sentences.len() {
        return Err(Error::Backend {
            backend: backend.name().to_string(),
            reason: format!("failed on all {failures} sentences"),
        });
    }
    out.frames
        .sort_by_key(|f| (f.sentence_index, f.predicate.start, f.predicate.end));
    if out.frames.is_empty() {
        out.used_fallback = true;
        out.frames = text
            .sentences
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_empty())
            .map(|(si, s)| SemanticFrame::full_sentence(si, s.len(), source))
            .collect();
    }
    Ok(out)
}

/// Renders a frame in bracketed role form, e.g. `[ARG0 David] [V saw] [ARG1 the flame]`.
pub fn render_frame(frame: &SemanticFrame, text: &TokenizedText) -> String {
    let mut parts: Vec<(usize, String, String)> = frame
        .arguments
        .iter()
        .map(|a| {
            (
                a.span.start,
                a.role.clone(),
                text.span_text(frame.sentence_index, a.span.start, a.span.end),
            )
        })
        .collect();
    parts.push((
        frame.predicate.start,
        frame.predicate_role.clone(),
        text.span_text(
            frame.sentence_index,
            frame.predicate.start,
            frame.predicate.end,
        ),
    ));
    parts.sort_by_key(|p| p.0);
    parts
        .into_iter()
        .map(|(_, role, t)| format!("[{role} {t}]"))
        .collect::<Vec<_>>()
        .join(" ")
}
