//! Pattern compilation and token-level matching shared by the MP lexicon and
//! the topic seed lists.
//!
//! Three pattern forms are supported:
//! - stems (`feel*`): any token starting with the prefix;
//! - literals (`happy`): the token itself or the token plus one of the light
//!   suffixes `s`, `es`, `ed`, `ing`, `d`;
//! - phrases (`with you`): words in order with at most `gap` intervening
//!   tokens between consecutive words. Phrase words match exactly, or by
//!   prefix when starred.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::normalize_text;
use crate::error::{Error, Result};

pub const LIGHT_SUFFIXES: [&str; 5] = ["s", "es", "ed", "ing", "d"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Stem,
    Literal,
    Phrase,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Word {
    Exact(String),
    Prefix(String),
}

impl Word {
    fn matches(&self, token: &str) -> bool {
        match self {
            Word::Exact(w) => token == w,
            Word::Prefix(p) => token.starts_with(p.as_str()),
        }
    }
}

/// A validated, classified pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub text: String,
    pub kind: PatternKind,
    words: Vec<Word>,
}

fn pattern_err(pattern: &str, reason: &str) -> Error {
    Error::Pattern { pattern: pattern.to_string(), reason: reason.to_string() }
}

fn parse_word(pattern: &str, word: &str) -> Result<Word> {
    let (body, starred) = match word.strip_suffix('*') {
        Some(b) => (b, true),
        None => (word, false),
    };
    if body.contains('*') {
        return Err(pattern_err(pattern, "'*' may only appear at the end of a word"));
    }
    if body.is_empty() {
        return Err(pattern_err(pattern, "empty word"));
    }
    if normalize_text(body) != body || body.contains(' ') {
        return Err(pattern_err(pattern, "pattern must already be in normalized form"));
    }
    if starred {
        if body.chars().count() < 2 {
            return Err(pattern_err(pattern, "stem needs at least two characters before '*'"));
        }
        Ok(Word::Prefix(body.to_string()))
    } else {
        Ok(Word::Exact(body.to_string()))
    }
}

impl Pattern {
    pub fn parse(raw: &str) -> Result<Self> {
        let text = raw.trim().to_lowercase();
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.is_empty() {
            return Err(pattern_err(raw, "empty pattern"));
        }
        let text = parts.join(" ");
        let words = parts.iter().map(|w| parse_word(raw, w)).collect::<Result<Vec<_>>>()?;
        let kind = if words.len() > 1 {
            PatternKind::Phrase
        } else if matches!(words[0], Word::Prefix(_)) {
            PatternKind::Stem
        } else {
            PatternKind::Literal
        };
        Ok(Pattern { text, kind, words })
    }

    /// Matches a single token against a stem or literal pattern.
    /// Phrases never match a single token.
    pub fn matches_token(&self, token: &str) -> bool {
        match (self.kind, &self.words[0]) {
            (PatternKind::Stem, w) => w.matches(token),
            (PatternKind::Literal, Word::Exact(lit)) => {
                token == lit
                    || LIGHT_SUFFIXES.iter().any(|s| {
                        token.strip_suffix(s).is_some_and(|stripped| stripped == lit)
                    })
            }
            _ => false,
        }
    }
}

/// One occurrence of a pattern in a token sequence; `end` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RawHit {
    pub start: usize,
    pub end: usize,
    pub pattern: usize,
}

/// Compiled pattern set. Stems are indexed by prefix and literals by their
/// exact form, so single-token matching costs O(token length) lookups.
#[derive(Debug, Clone, Default)]
pub struct Matcher {
    patterns: Vec<Pattern>,
    stems: HashMap<String, Vec<usize>>,
    literals: HashMap<String, Vec<usize>>,
    phrases: Vec<usize>,
}

impl Matcher {
    pub fn new(patterns: Vec<Pattern>) -> Self {
        let mut m = Matcher { patterns, ..Default::default() };
        for (i, p) in m.patterns.iter().enumerate() {
            match (&p.kind, &p.words[0]) {
                (PatternKind::Stem, Word::Prefix(pre)) => m.stems.entry(pre.clone()).or_default().push(i),
                (PatternKind::Literal, Word::Exact(lit)) => {
                    m.literals.entry(lit.clone()).or_default().push(i)
                }
                _ => m.phrases.push(i),
            }
        }
        m
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    fn token_matches(&self, token: &str, out: &mut Vec<usize>) {
        out.clear();
        // stems: every char-boundary prefix of length >= 2
        for (count, (idx, ch)) in token.char_indices().enumerate() {
            if count >= 1 {
                let end = idx + ch.len_utf8();
                if let Some(ids) = self.stems.get(&token[..end]) {
                    out.extend_from_slice(ids);
                }
            }
        }
        if let Some(ids) = self.literals.get(token) {
            out.extend_from_slice(ids);
        }
        for suffix in LIGHT_SUFFIXES {
            if let Some(stripped) = token.strip_suffix(suffix) {
                if let Some(ids) = self.literals.get(stripped) {
                    out.extend_from_slice(ids);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }

    /// All hits in `tokens`, ordered by start position then pattern index.
    pub fn find(&self, tokens: &[String], phrase_gap: usize) -> Vec<RawHit> {
        let mut hits = Vec::new();
        let mut buf = Vec::new();
        for (pos, tok) in tokens.iter().enumerate() {
            self.token_matches(tok, &mut buf);
            hits.extend(buf.iter().map(|&pattern| RawHit { start: pos, end: pos + 1, pattern }));
        }
        for &pi in &self.phrases {
            find_phrase(&self.patterns[pi].words, tokens, phrase_gap, |start, end| {
                hits.push(RawHit { start, end, pattern: pi })
            });
        }
        hits.sort_unstable();
        hits
    }
}

/// Leftmost, earliest-completing, non-overlapping phrase occurrences.
fn find_phrase(words: &[Word], tokens: &[String], gap: usize, mut emit: impl FnMut(usize, usize)) {
    let n = tokens.len();
    let mut i = 0;
    while i < n {
        if words[0].matches(&tokens[i]) {
            let mut pos = i;
            let mut complete = true;
            for w in &words[1..] {
                let lo = pos + 1;
                let hi = (pos + 1 + gap).min(n.saturating_sub(1));
                match (lo..=hi).filter(|&j| j < n).find(|&j| w.matches(&tokens[j])) {
                    Some(j) => pos = j,
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            if complete {
                emit(i, pos + 1);
                i = pos + 1;
                continue;
            }
        }
        i += 1;
    }
}
