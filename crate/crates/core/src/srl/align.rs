use std::ops::Range;

use crate::types::SemanticFrame;

/// Maps words of one text onto positions of the encoder input sequence.
///
/// `word_to_subword[g]` is the position range of global word `g`; only words
/// whose subwords all fall below `truncation_limit` are present, so the
/// vector is a prefix of the text's words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanAlignment {
    pub word_to_subword: Vec<Range<usize>>,
    pub truncation_limit: usize,
    /// Global index of the first word of each sentence.
    pub sentence_offsets: Vec<usize>,
}

impl SpanAlignment {
    /// Lays the words out contiguously starting at position `start`.
    pub fn from_word_lengths(
        sentence_offsets: Vec<usize>,
        subwords_per_word: &[usize],
        start: usize,
        truncation_limit: usize,
    ) -> Self {
        let mut word_to_subword = Vec::new();
        let mut pos = start;
        for &n in subwords_per_word {
            let end = pos + n.max(1);
            if end > truncation_limit {
                break;
            }
            word_to_subword.push(pos..end);
            pos = end;
        }
        Self {
            word_to_subword,
            truncation_limit,
            sentence_offsets,
        }
    }

    pub fn surviving_words(&self) -> usize {
        self.word_to_subword.len()
    }

    /// One past the last occupied position, or the start if nothing survived.
    pub fn end_position(&self) -> Option<usize> {
        self.word_to_subword.last().map(|r| r.end)
    }

    fn positions(&self, sentence: usize, words: Range<usize>) -> Option<Range<usize>> {
        let offset = *self.sentence_offsets.get(sentence)?;
        let first = offset + words.start;
        let last = (offset + words.end).min(self.word_to_subword.len());
        if first >= last {
            return None;
        }
        Some(self.word_to_subword[first].start..self.word_to_subword[last - 1].end)
    }
}

/// A frame with its spans replaced by encoder position ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFrame {
    pub frame: SemanticFrame,
    pub predicate: Range<usize>,
    pub arguments: Vec<(String, Range<usize>)>,
}

impl AlignedFrame {
    /// Sorted distinct encoder positions covered by the frame.
    pub fn positions(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self
            .predicate
            .clone()
            .chain(self.arguments.iter().flat_map(|(_, r)| r.clone()))
            .collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    pub fn token_count(&self) -> usize {
        self.positions().len()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Alignment {
    pub frames: Vec<AlignedFrame>,
    /// Frames whose predicate lies wholly beyond the truncation limit.
    pub dropped: usize,
}

/// Replaces word spans by position ranges, dropping frames whose predicate
/// was truncated away and clipping arguments at the limit.
pub fn align_frames(frames: &[SemanticFrame], alignment: &SpanAlignment) -> Alignment {
    let mut out = Alignment::default();
    for frame in frames {
        let Some(predicate) = alignment.positions(frame.sentence_index, frame.predicate.indices())
        else {
            out.dropped += 1;
            continue;
        };
        let arguments = frame
            .arguments
            .iter()
            .filter_map(|a| {
                alignment
                    .positions(frame.sentence_index, a.span.indices())
                    .map(|r| (a.role.clone(), r))
            })
            .collect();
        out.frames.push(AlignedFrame {
            frame: frame.clone(),
            predicate,
            arguments,
        });
    }
    out
}
