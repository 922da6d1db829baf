use std::collections::HashSet;

use crate::error::Result;
use crate::text::is_punctuation;
use crate::types::{Argument, FrameSource, SemanticFrame, Span, PREDICATE_ROLE};

use super::SrlBackend;

const CHUNK_BREAKS: [&str; 8] = ["and", "or", "but", "while", "because", "then", "so", "that"];

/// Lexicon-driven labeller for tests and demos.
///
/// Every word found in the verb lexicon (case-insensitive) is a predicate.
/// The run of words before it, back to the previous verb, punctuation mark
/// or conjunction, is `ARG0`; the run after it up to the next break is `ARG1`.
#[derive(Debug, Clone)]
pub struct FixtureBackend {
    lexicon: HashSet<String>,
}

impl FixtureBackend {
    pub fn new<I, S>(verbs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            lexicon: verbs
                .into_iter()
                .map(|v| v.as_ref().trim().to_lowercase())
                .filter(|v| !v.is_empty())
                .collect(),
        }
    }

    pub fn lexicon_size(&self) -> usize {
        self.lexicon.len()
    }

    fn is_verb(&self, word: &str) -> bool {
        self.lexicon.contains(&word.to_lowercase())
    }

    fn is_break(&self, word: &str) -> bool {
        is_punctuation(word)
            || self.is_verb(word)
            || CHUNK_BREAKS.contains(&word.to_lowercase().as_str())
    }
}

impl SrlBackend for FixtureBackend {
    fn name(&self) -> &str {
        "fixture"
    }

    fn version(&self) -> &str {
        "1"
    }

    fn label(&self, sentence: &[String]) -> Result<Vec<SemanticFrame>> {
        let mut frames = Vec::new();
        for (i, word) in sentence.iter().enumerate() {
            if !self.is_verb(word) {
                continue;
            }
            let mut start = i;
            while start > 0 && !self.is_break(&sentence[start - 1]) {
                start -= 1;
            }
            let mut end = i + 1;
            while end < sentence.len() && !self.is_break(&sentence[end]) {
                end += 1;
            }
            let mut arguments = Vec::new();
            if start < i {
                arguments.push(Argument {
                    role: "ARG0".into(),
                    span: Span::new(start, i),
                });
            }
            if end > i + 1 {
                arguments.push(Argument {
                    role: "ARG1".into(),
                    span: Span::new(i + 1, end),
                });
            }
            frames.push(SemanticFrame {
                predicate: Span::new(i, i + 1),
                predicate_role: PREDICATE_ROLE.into(),
                arguments,
                sentence_index: 0,
                source: FrameSource::Document,
            });
        }
        Ok(frames)
    }
}
