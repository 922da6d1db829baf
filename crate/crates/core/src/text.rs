//! Deterministic sentence splitting and word tokenization.
//!
//! Both the SRL backends and the encoder consume the word lists produced here,
//! so frame spans and subword alignments always refer to the same words.

const SENTENCE_END: [&str; 3] = [".", "!", "?"];
const SPLIT_PUNCT: &[char] = &[
    '.', ',', '!', '?', ';', ':', '"', '(', ')', '[', ']', '\u{201c}', '\u{201d}',
];

/// A text split into sentences of words.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedText {
    pub sentences: Vec<Vec<String>>,
}

impl TokenizedText {
    pub fn new(text: &str) -> Self {
        Self {
            sentences: split_sentences(text),
        }
    }

    pub fn num_words(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Index of the first word of each sentence in the flattened word list.
    pub fn sentence_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.sentences
            .iter()
            .map(|s| {
                let o = acc;
                acc += s.len();
                o
            })
            .collect()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    /// Joins words `[start, end)` of a sentence with single spaces.
    pub fn span_text(&self, sentence: usize, start: usize, end: usize) -> String {
        self.sentences
            .get(sentence)
            .map(|s| s[start.min(s.len())..end.min(s.len())].join(" "))
            .unwrap_or_default()
    }
}

/// Splits leading/trailing punctuation off a whitespace token.
fn split_token(raw: &str, out: &mut Vec<String>) {
    let mut trailing = Vec::new();
    let mut body = raw;
    while let Some(c) = body.chars().next() {
        if SPLIT_PUNCT.contains(&c) && body.len() > c.len_utf8() {
            out.push(c.to_string());
            body = &body[c.len_utf8()..];
        } else {
            break;
        }
    }
    while let Some(c) = body.chars().next_back() {
        if SPLIT_PUNCT.contains(&c) && body.len() > c.len_utf8() {
            trailing.push(c.to_string());
            body = &body[..body.len() - c.len_utf8()];
        } else {
            break;
        }
    }
    out.push(body.to_string());
    out.extend(trailing.into_iter().rev());
}

pub fn tokenize_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        split_token(raw, &mut out);
    }
    out
}

/// Splits on `.`, `!` and `?` tokens; empty sentences are skipped.
pub fn split_sentences(text: &str) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for word in tokenize_words(text) {
        let end = SENTENCE_END.contains(&word.as_str());
        current.push(word);
        if end {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

pub fn is_punctuation(word: &str) -> bool {
    !word.is_empty()
        && word
            .chars()
            .all(|c| c.is_ascii_punctuation() || SPLIT_PUNCT.contains(&c))
}

/// Whitespace-normalized form used as a deduplication key.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
