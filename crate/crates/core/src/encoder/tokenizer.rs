use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const CLS_ID: usize = 1;
pub const SEP_ID: usize = 2;
pub const UNK_ID: usize = 3;
const NUM_SPECIAL: usize = 4;

/// Word-to-subword tokenizers.
#[derive(Debug, Clone, PartialEq)]
pub enum Tokenizer {
    /// Stateless: lowercases, cuts each word into pieces of at most
    /// `max_piece` characters and hashes every piece into the vocabulary.
    Hashing { vocab_size: usize, max_piece: usize },
    /// Greedy longest-match-first WordPiece over a fixed vocabulary.
    WordPiece(WordPieceVocab),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordPieceVocab {
    ids: HashMap<String, usize>,
    cls: usize,
    sep: usize,
    unk: usize,
    lowercase: bool,
}

impl WordPieceVocab {
    /// Reads a `vocab.txt` with one token per line (line number = id).
    pub fn from_file(path: &Path, lowercase: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tokens(text.lines(), lowercase)
    }

    pub fn from_tokens<'a>(
        tokens: impl IntoIterator<Item = &'a str>,
        lowercase: bool,
    ) -> Result<Self> {
        let ids: HashMap<String, usize> = tokens
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t.trim_end().to_string(), i))
            .collect();
        let find = |t: &str| {
            ids.get(t)
                .copied()
                .ok_or_else(|| Error::Config(format!("vocabulary lacks {t}")))
        };
        Ok(Self {
            cls: find("[CLS]")?,
            sep: find("[SEP]")?,
            unk: find("[UNK]")?,
            ids,
            lowercase,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn encode_word(&self, word: &str, out: &mut Vec<usize>) {
        let word = if self.lowercase {
            word.to_lowercase()
        } else {
            word.to_string()
        };
        let chars: Vec<char> = word.chars().collect();
        let mut start = 0;
        let mut pieces = Vec::new();
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while end > start {
                let mut piece: String = chars[start..end].iter().collect();
                if start > 0 {
                    piece.insert_str(0, "##");
                }
                if let Some(&id) = self.ids.get(&piece) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => {
                    pieces.push(id);
                    start = end;
                }
                None => {
                    out.push(self.unk);
                    return;
                }
            }
        }
        out.extend(pieces);
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Tokenizer {
    pub fn hashing(vocab_size: usize) -> Self {
        Tokenizer::Hashing {
            vocab_size,
            max_piece: 6,
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            Tokenizer::Hashing { vocab_size, .. } => *vocab_size,
            Tokenizer::WordPiece(v) => v.len(),
        }
    }

    pub fn cls_id(&self) -> usize {
        match self {
            Tokenizer::Hashing { .. } => CLS_ID,
            Tokenizer::WordPiece(v) => v.cls,
        }
    }

    pub fn sep_id(&self) -> usize {
        match self {
            Tokenizer::Hashing { .. } => SEP_ID,
            Tokenizer::WordPiece(v) => v.sep,
        }
    }

    /// Subword ids of one word; never empty.
    pub fn encode_word(&self, word: &str) -> Vec<usize> {
        let mut out = Vec::new();
        match self {
            Tokenizer::Hashing {
                vocab_size,
                max_piece,
            } => {
                let lower = word.to_lowercase();
                let chars: Vec<char> = lower.chars().collect();
                let buckets = (*vocab_size - NUM_SPECIAL) as u64;
                for (i, chunk) in chars.chunks((*max_piece).max(1)).enumerate() {
                    let mut piece: String = chunk.iter().collect();
                    if i > 0 {
                        piece.insert_str(0, "##");
                    }
                    out.push(NUM_SPECIAL + (fnv1a(&piece) % buckets) as usize);
                }
                if out.is_empty() {
                    out.push(UNK_ID);
                }
            }
            Tokenizer::WordPiece(v) => v.encode_word(word, &mut out),
        }
        out
    }
}
