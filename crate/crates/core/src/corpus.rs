//! Ingestion, normalization and post/chat linkage.
//!
//! Input is JSONL with one record per line:
//!
//! ```text
//! {"id": "...", "kind": "post"|"chat", "post_id": "...", "author": "..."|null, "text": "..."}
//! ```
//!
//! Every post becomes one [`LinkedUnit`]; all user-side chat records that share
//! its `post_id` are merged (in input order) into a single chat document.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Post,
    Chat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub kind: DocKind,
    pub post_id: String,
    pub author: Option<String>,
    pub raw_text: String,
    pub norm_text: String,
    pub tokens: Vec<String>,
    pub word_count: usize,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        kind: DocKind,
        post_id: impl Into<String>,
        author: Option<String>,
        raw_text: impl Into<String>,
    ) -> Self {
        let raw_text = raw_text.into();
        let norm_text = normalize_text(&raw_text);
        let tokens = tokenize(&norm_text);
        Document {
            id: id.into(),
            kind,
            post_id: post_id.into(),
            author,
            word_count: tokens.len(),
            raw_text,
            norm_text,
            tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedUnit {
    pub post_id: String,
    pub post: Document,
    pub chat: Document,
    pub author: Option<String>,
}

impl LinkedUnit {
    /// Counting unit for recurrence gates: the author when known, otherwise
    /// the post itself. Anonymous posts are never pooled together.
    pub fn support_key(&self) -> String {
        support_key(self.author.as_deref(), &self.post_id)
    }
}

pub fn support_key(author: Option<&str>, post_id: &str) -> String {
    match author {
        Some(a) => format!("user:{a}"),
        None => format!("post:{post_id}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub units: Vec<LinkedUnit>,
    /// Sum of post word counts.
    pub total_words_post: u64,
    /// author -> post ids of the units they wrote
    pub user_index: BTreeMap<String, Vec<String>>,
}

impl Corpus {
    pub fn from_units(units: Vec<LinkedUnit>) -> Self {
        let total_words_post = units.iter().map(|u| u.post.word_count as u64).sum();
        let mut user_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for u in &units {
            if let Some(a) = &u.author {
                user_index.entry(a.clone()).or_default().push(u.post_id.clone());
            }
        }
        Corpus { units, total_words_post, user_index }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn unit(&self, post_id: &str) -> Option<&LinkedUnit> {
        self.units.iter().find(|u| u.post_id == post_id)
    }

    /// Number of distinct support units (authors, plus one per anonymous post).
    pub fn support_count(&self) -> usize {
        self.user_index.len() + self.units.iter().filter(|u| u.author.is_none()).count()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

fn is_joiner(c: char) -> bool {
    c == '\'' || c == '-'
}

fn canonical_joiner(c: char) -> char {
    match c {
        '\u{2019}' | '\u{02bc}' => '\'',
        '\u{2010}' | '\u{2011}' => '-',
        other => other,
    }
}

/// Lowercase, canonicalize (NFC), strip punctuation that does not sit inside a
/// token, and collapse whitespace. Apostrophes and hyphens are kept only when
/// both neighbours are word characters.
pub fn normalize_text(raw: &str) -> String {
    let lowered: String = raw.nfc().flat_map(char::to_lowercase).collect();
    let chars: Vec<char> = lowered.nfc().map(canonical_joiner).collect();

    let mut out = String::with_capacity(chars.len());
    let mut gap = false;
    for (i, &c) in chars.iter().enumerate() {
        let keep = is_word_char(c)
            || (is_joiner(c)
                && i > 0
                && is_word_char(chars[i - 1])
                && chars.get(i + 1).is_some_and(|&n| is_word_char(n)));
        if keep {
            if gap && !out.is_empty() {
                out.push(' ');
            }
            gap = false;
            out.push(c);
        } else {
            gap = true;
        }
    }
    out
}

pub fn tokenize(norm: &str) -> Vec<String> {
    norm.split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

/// One input line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub kind: DocKind,
    pub post_id: String,
    #[serde(default)]
    pub author: Option<String>,
    pub text: String,
}

/// Result of ingestion with the records that could not be linked.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    /// ids of chat records whose post_id had no post record
    pub orphan_chats: Vec<String>,
    /// units removed by the keyword filter
    pub filtered_out: usize,
}

pub fn ingest_jsonl(path: &Path, keyword_filter: Option<&[String]>) -> Result<Corpus> {
    Ok(ingest_jsonl_report(path, keyword_filter)?.corpus)
}

pub fn ingest_jsonl_report(path: &Path, keyword_filter: Option<&[String]>) -> Result<Ingested> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file), keyword_filter)
}

pub fn ingest_reader<R: BufRead>(reader: R, keyword_filter: Option<&[String]>) -> Result<Ingested> {
    struct PendingPost {
        id: String,
        author: Option<String>,
        text: String,
    }

    let mut post_order: Vec<String> = Vec::new();
    let mut posts: HashMap<String, PendingPost> = HashMap::new();
    let mut chats: HashMap<String, Vec<RawRecord>> = HashMap::new();
    let mut chat_order: Vec<String> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Malformed { line: lineno, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Malformed { line: lineno, message: e.to_string() })?;
        match rec.kind {
            DocKind::Post => {
                if posts.contains_key(&rec.post_id) {
                    return Err(Error::Malformed {
                        line: lineno,
                        message: format!("duplicate post record for post_id {:?}", rec.post_id),
                    });
                }
                post_order.push(rec.post_id.clone());
                posts.insert(
                    rec.post_id.clone(),
                    PendingPost { id: rec.id, author: rec.author, text: rec.text },
                );
            }
            DocKind::Chat => {
                if !chats.contains_key(&rec.post_id) {
                    chat_order.push(rec.post_id.clone());
                }
                chats.entry(rec.post_id.clone()).or_default().push(rec);
            }
        }
    }

    let mut orphan_chats = Vec::new();
    for pid in &chat_order {
        if !posts.contains_key(pid) {
            for rec in &chats[pid] {
                warn!("orphan chat record {:?}: no post with post_id {:?}; dropped", rec.id, pid);
                orphan_chats.push(rec.id.clone());
            }
        }
    }

    let filter: Option<Vec<String>> = keyword_filter.map(|f| {
        f.iter().flat_map(|k| tokenize(&normalize_text(k))).collect()
    });

    let mut units = Vec::with_capacity(post_order.len());
    let mut filtered_out = 0;
    for pid in post_order {
        let post = posts.remove(&pid).expect("post recorded");
        let post_doc = Document::new(post.id, DocKind::Post, pid.clone(), post.author.clone(), post.text);
        if let Some(filter) = &filter {
            if !post_doc.tokens.iter().any(|t| filter.contains(t)) {
                filtered_out += 1;
                continue;
            }
        }
        let chat_records = chats.remove(&pid).unwrap_or_default();
        let author = post
            .author
            .clone()
            .or_else(|| chat_records.iter().find_map(|r| r.author.clone()));
        let merged: Vec<&str> = chat_records.iter().map(|r| r.text.as_str()).collect();
        let chat_doc = Document::new(
            format!("{pid}#chat"),
            DocKind::Chat,
            pid.clone(),
            author.clone(),
            merged.join(" "),
        );
        units.push(LinkedUnit { post_id: pid, post: post_doc, chat: chat_doc, author });
    }

    Ok(Ingested { corpus: Corpus::from_units(units), orphan_chats, filtered_out })
}
