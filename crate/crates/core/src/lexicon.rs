//! Mind-perception lexicon: compilation, document matching, contextual
//! validation and per-unit explicit presence.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DocKind, Document};
use crate::error::{Error, Result};
use crate::matcher::{Matcher, Pattern, PatternKind};

pub const DEFAULT_PHRASE_GAP: usize = 2;
pub const CONTEXT_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Experience,
    Agency,
}

impl Dimension {
    pub const ALL: [Dimension; 2] = [Dimension::Experience, Dimension::Agency];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Experience => "experience",
            Dimension::Agency => "agency",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "experience" => Some(Dimension::Experience),
            "agency" => Some(Dimension::Agency),
            _ => None,
        }
    }
}

/// A dimension, or their union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MpDimension {
    Experience,
    Agency,
    Overall,
}

impl MpDimension {
    pub const ALL: [MpDimension; 3] = [MpDimension::Experience, MpDimension::Agency, MpDimension::Overall];

    pub fn as_str(self) -> &'static str {
        match self {
            MpDimension::Experience => "experience",
            MpDimension::Agency => "agency",
            MpDimension::Overall => "overall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "experience" => Some(MpDimension::Experience),
            "agency" => Some(MpDimension::Agency),
            "overall" => Some(MpDimension::Overall),
            _ => None,
        }
    }
}

impl From<Dimension> for MpDimension {
    fn from(d: Dimension) -> Self {
        match d {
            Dimension::Experience => MpDimension::Experience,
            Dimension::Agency => MpDimension::Agency,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Post,
    Chat,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Post => "post",
            Side::Chat => "chat",
        }
    }
}

impl From<DocKind> for Side {
    fn from(k: DocKind) -> Self {
        match k {
            DocKind::Post => Side::Post,
            DocKind::Chat => Side::Chat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LexiconTerm {
    pub pattern: String,
    pub kind: PatternKind,
    pub dimension: Dimension,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    terms: Vec<LexiconTerm>,
    matcher: Matcher,
}

impl Lexicon {
    /// Builds a lexicon from `dimension -> patterns`. Duplicate patterns within
    /// a dimension collapse to one term.
    pub fn from_map(spec: &BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut terms = Vec::new();
        let mut patterns = Vec::new();
        for (dim_name, raw_patterns) in spec {
            let dimension = Dimension::parse(dim_name)
                .ok_or_else(|| Error::invalid(format!("unknown lexicon dimension {dim_name:?}")))?;
            for raw in raw_patterns {
                let pattern = Pattern::parse(raw)?;
                if !seen.insert((dimension, pattern.text.clone())) {
                    continue;
                }
                terms.push(LexiconTerm { pattern: pattern.text.clone(), kind: pattern.kind, dimension });
                patterns.push(pattern);
            }
        }
        Ok(Lexicon { terms, matcher: Matcher::new(patterns) })
    }

    pub fn terms(&self) -> &[LexiconTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        compile_lexicon(&text)
    }
}

/// Parses a lexicon file: `{"experience": ["feel*", ...], "agency": [...]}`.
pub fn compile_lexicon(json: &str) -> Result<Lexicon> {
    let spec: BTreeMap<String, Vec<String>> = serde_json::from_str(json)?;
    Lexicon::from_map(&spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchHit {
    pub term: LexiconTerm,
    pub unit_id: String,
    pub side: Side,
    /// Token indices `[start, end)`.
    pub token_span: (usize, usize),
    pub surface: String,
    pub context: String,
}

pub fn match_document(doc: &Document, lex: &Lexicon, phrase_gap: usize) -> Vec<MatchHit> {
    let tokens = &doc.tokens;
    lex.matcher
        .find(tokens, phrase_gap)
        .into_iter()
        .map(|h| {
            let lo = h.start.saturating_sub(CONTEXT_WINDOW);
            let hi = (h.end + CONTEXT_WINDOW).min(tokens.len());
            MatchHit {
                term: lex.terms[h.pattern].clone(),
                unit_id: doc.post_id.clone(),
                side: doc.kind.into(),
                token_span: (h.start, h.end),
                surface: tokens[h.start..h.end].join(" "),
                context: tokens[lo..hi].join(" "),
            }
        })
        .collect()
}

/// Matches both sides of every unit, in unit order (post before chat).
pub fn match_corpus(corpus: &Corpus, lex: &Lexicon, phrase_gap: usize) -> Vec<MatchHit> {
    use rayon::prelude::*;
    corpus
        .units
        .par_iter()
        .flat_map_iter(|u| {
            let mut hits = match_document(&u.post, lex, phrase_gap);
            hits.extend(match_document(&u.chat, lex, phrase_gap));
            hits
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedHit {
    pub hit: MatchHit,
    pub verdict: Verdict,
    pub validator_id: String,
}

/// Contextual judge for matched terms. Implementations return exactly one
/// verdict per hit, in order.
pub trait Validator {
    fn id(&self) -> String;
    fn judge(&mut self, hits: &[MatchHit]) -> Result<Vec<Verdict>>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct AcceptAll;

impl Validator for AcceptAll {
    fn id(&self) -> String {
        "accept-all".to_string()
    }

    fn judge(&mut self, hits: &[MatchHit]) -> Result<Vec<Verdict>> {
        Ok(vec![Verdict::Accept; hits.len()])
    }
}

#[derive(Debug, Serialize)]
struct WireHit<'a> {
    id: u64,
    term: &'a str,
    dimension: &'a str,
    side: &'a str,
    context: &'a str,
}

#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    hits: Vec<WireHit<'a>>,
}

#[derive(Debug, Deserialize)]
struct WireVerdict {
    id: u64,
    /// `null` or absent means the validator declined to label the hit.
    #[serde(default)]
    accept: Option<bool>,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    verdicts: Vec<WireVerdict>,
}

/// Validator backed by a child process speaking line-delimited JSON over
/// stdio. One request line per batch; one response line expected back before
/// the next batch is sent.
#[derive(Debug, Clone)]
pub struct ExternalValidator {
    argv: Vec<String>,
    pub batch_size: usize,
    pub timeout: Duration,
}

impl ExternalValidator {
    pub fn new(argv: Vec<String>) -> Result<Self> {
        if argv.is_empty() {
            return Err(Error::invalid("external validator needs a command"));
        }
        Ok(ExternalValidator { argv, batch_size: 64, timeout: Duration::from_secs(120) })
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Validator { validator: self.id(), message: message.into() }
    }

    fn spawn(&self) -> Result<(Child, ChildStdin, Receiver<std::io::Result<String>>)> {
        let mut child = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| self.fail(format!("spawn failed: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok((child, stdin, rx))
    }

    fn run_batches(
        &self,
        hits: &[MatchHit],
        stdin: &mut ChildStdin,
        rx: &Receiver<std::io::Result<String>>,
    ) -> Result<Vec<Verdict>> {
        let mut verdicts = Vec::with_capacity(hits.len());
        for (batch_no, batch) in hits.chunks(self.batch_size.max(1)).enumerate() {
            let base = (batch_no * self.batch_size.max(1)) as u64;
            let req = WireRequest {
                hits: batch
                    .iter()
                    .enumerate()
                    .map(|(i, h)| WireHit {
                        id: base + i as u64,
                        term: &h.term.pattern,
                        dimension: h.term.dimension.as_str(),
                        side: h.side.as_str(),
                        context: &h.context,
                    })
                    .collect(),
            };
            let line = serde_json::to_string(&req)?;
            writeln!(stdin, "{line}")
                .and_then(|_| stdin.flush())
                .map_err(|e| self.fail(format!("write to validator failed: {e}")))?;

            let reply = match rx.recv_timeout(self.timeout) {
                Ok(Ok(l)) => l,
                Ok(Err(e)) => return Err(self.fail(format!("read failed: {e}"))),
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    return Err(self.fail(format!("no reply within {:?} for batch {batch_no}", self.timeout)))
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    return Err(self.fail(format!("validator exited before answering batch {batch_no}")))
                }
            };
            let resp: WireResponse = serde_json::from_str(&reply)
                .map_err(|e| self.fail(format!("invalid reply to batch {batch_no}: {e}")))?;

            let mut labels: BTreeMap<u64, Option<bool>> = BTreeMap::new();
            for v in resp.verdicts {
                if v.id < base || v.id >= base + batch.len() as u64 {
                    return Err(self.fail(format!("reply names unknown hit id {}", v.id)));
                }
                labels.insert(v.id, v.accept);
            }
            for i in 0..batch.len() as u64 {
                match labels.get(&(base + i)) {
                    Some(Some(true)) => verdicts.push(Verdict::Accept),
                    Some(_) => verdicts.push(Verdict::Reject),
                    None => return Err(self.fail(format!("reply is missing hit id {}", base + i))),
                }
            }
        }
        Ok(verdicts)
    }
}

impl Validator for ExternalValidator {
    fn id(&self) -> String {
        format!("cmd:{}", self.argv.join(" "))
    }

    fn judge(&mut self, hits: &[MatchHit]) -> Result<Vec<Verdict>> {
        let (mut child, mut stdin, rx) = self.spawn()?;
        let outcome = self.run_batches(hits, &mut stdin, &rx);
        drop(stdin);
        if outcome.is_err() {
            let _ = child.kill();
        }
        let status = child.wait().map_err(|e| self.fail(format!("wait failed: {e}")))?;
        let verdicts = outcome?;
        if !status.success() {
            return Err(self.fail(format!("exited with {status}")));
        }
        Ok(verdicts)
    }
}

/// Parses `accept-all` or `cmd:<argv>` (argv split on whitespace).
pub fn validator_from_spec(spec: &str) -> Result<Box<dyn Validator + Send>> {
    if spec == "accept-all" || spec == "accept_all" {
        return Ok(Box::new(AcceptAll));
    }
    if let Some(cmd) = spec.strip_prefix("cmd:") {
        let argv: Vec<String> = cmd.split_whitespace().map(str::to_owned).collect();
        return Ok(Box::new(ExternalValidator::new(argv)?));
    }
    Err(Error::invalid(format!("unknown validator {spec:?}; expected accept-all or cmd:<argv>")))
}

pub fn validate_hits(hits: Vec<MatchHit>, validator: &mut dyn Validator) -> Result<Vec<ValidatedHit>> {
    let verdicts = validator.judge(&hits)?;
    if verdicts.len() != hits.len() {
        return Err(Error::Validator {
            validator: validator.id(),
            message: format!("{} verdicts for {} hits", verdicts.len(), hits.len()),
        });
    }
    let id = validator.id();
    Ok(hits
        .into_iter()
        .zip(verdicts)
        .map(|(hit, verdict)| ValidatedHit { hit, verdict, validator_id: id.clone() })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitPresence {
    pub unit_id: String,
    pub side: Side,
    pub y_experience: bool,
    pub y_agency: bool,
    pub y_overall: bool,
    /// accepted hit counts per pattern
    pub experience_terms: BTreeMap<String, u32>,
    pub agency_terms: BTreeMap<String, u32>,
}

impl ExplicitPresence {
    pub fn get(&self, dim: Dimension) -> bool {
        match dim {
            Dimension::Experience => self.y_experience,
            Dimension::Agency => self.y_agency,
        }
    }

    pub fn bit(&self, dim: MpDimension) -> bool {
        match dim {
            MpDimension::Experience => self.y_experience,
            MpDimension::Agency => self.y_agency,
            MpDimension::Overall => self.y_overall,
        }
    }

    pub fn terms(&self, dim: Dimension) -> &BTreeMap<String, u32> {
        match dim {
            Dimension::Experience => &self.experience_terms,
            Dimension::Agency => &self.agency_terms,
        }
    }
}

/// One record per unit and side, in corpus order (post then chat).
pub fn explicit_presence(corpus: &Corpus, validated: &[ValidatedHit]) -> Vec<ExplicitPresence> {
    let mut accepted: BTreeMap<(&str, Side), Vec<&LexiconTerm>> = BTreeMap::new();
    for v in validated.iter().filter(|v| v.verdict == Verdict::Accept) {
        accepted.entry((v.hit.unit_id.as_str(), v.hit.side)).or_default().push(&v.hit.term);
    }
    let mut out = Vec::with_capacity(corpus.len() * 2);
    for unit in &corpus.units {
        for side in [Side::Post, Side::Chat] {
            let mut experience_terms = BTreeMap::new();
            let mut agency_terms = BTreeMap::new();
            for term in accepted.get(&(unit.post_id.as_str(), side)).into_iter().flatten() {
                let map = match term.dimension {
                    Dimension::Experience => &mut experience_terms,
                    Dimension::Agency => &mut agency_terms,
                };
                *map.entry(term.pattern.clone()).or_insert(0) += 1;
            }
            let y_experience = !experience_terms.is_empty();
            let y_agency = !agency_terms.is_empty();
            out.push(ExplicitPresence {
                unit_id: unit.post_id.clone(),
                side,
                y_experience,
                y_agency,
                y_overall: y_experience || y_agency,
                experience_terms,
                agency_terms,
            });
        }
    }
    out
}

/// Counts of positive units per side for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceCounts {
    pub units: usize,
    pub experience: usize,
    pub agency: usize,
    pub overall: usize,
}

pub fn presence_counts(presence: &[ExplicitPresence], side: Side) -> PresenceCounts {
    let rows: Vec<&ExplicitPresence> = presence.iter().filter(|p| p.side == side).collect();
    PresenceCounts {
        units: rows.len(),
        experience: rows.iter().filter(|p| p.y_experience).count(),
        agency: rows.iter().filter(|p| p.y_agency).count(),
        overall: rows.iter().filter(|p| p.y_overall).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Document, LinkedUnit};

    fn doc(text: &str) -> Document {
        Document::new("c", DocKind::Chat, "u1", None, text)
    }

    fn lex(json: &str) -> Lexicon {
        compile_lexicon(json).unwrap()
    }

    #[test]
    fn compile_examples() {
        let l = lex(r#"{"experience":["feel*","hope*"]}"#);
        assert_eq!(l.len(), 2);
        assert!(l.terms().iter().all(|t| t.kind == PatternKind::Stem));
        assert_eq!(lex(r#"{"agency":["think*","think*"]}"#).len(), 1);
        match compile_lexicon(r#"{"agency":["*"]}"#) {
            Err(Error::Pattern { pattern, .. }) => assert_eq!(pattern, "*"),
            other => panic!("expected pattern error, got {other:?}"),
        }
        assert!(compile_lexicon(r#"{"mood":["x"]}"#).is_err());
    }

    #[test]
    fn match_examples() {
        let l = lex(r#"{"experience":["feel*","passion*"],"agency":["with you"]}"#);
        assert_eq!(match_document(&doc("i feel like you feel things"), &l, 2).len(), 2);
        assert_eq!(match_document(&doc("passionate response"), &l, 2).len(), 1);
        assert_eq!(match_document(&doc("passion fruit"), &l, 2).len(), 1);
        let hits = match_document(&doc("with all of you"), &l, 2);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].surface, "with all of you");
    }

    #[test]
    fn context_window_is_bounded() {
        let l = lex(r#"{"experience":["feel*"]}"#);
        let text = (0..30).map(|i| if i == 15 { "feel".to_string() } else { format!("w{i}") }).collect::<Vec<_>>().join(" ");
        let hits = match_document(&doc(&text), &l, 2);
        assert_eq!(hits[0].context.split(' ').count(), 21);
        assert!(hits[0].context.contains("feel"));
        assert_eq!(hits[0].side, Side::Chat);
    }

    #[test]
    fn accept_all_accepts_everything() {
        let l = lex(r#"{"experience":["feel*"]}"#);
        let hits = match_document(&doc("feel feel feel feel feel"), &l, 2);
        let v = validate_hits(hits, &mut AcceptAll).unwrap();
        assert_eq!(v.len(), 5);
        assert!(v.iter().all(|h| h.verdict == Verdict::Accept));
    }

    fn corpus_with_chat(texts: &[&str]) -> Corpus {
        Corpus::from_units(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let pid = format!("p{i}");
                    LinkedUnit {
                        post_id: pid.clone(),
                        post: Document::new(pid.clone(), DocKind::Post, pid.clone(), None, "post"),
                        chat: Document::new(format!("{pid}#chat"), DocKind::Chat, pid.clone(), None, *t),
                        author: None,
                    }
                })
                .collect(),
        )
    }

    #[test]
    fn presence_bits() {
        let l = lex(r#"{"experience":["feel*"],"agency":["think*"]}"#);
        let corpus = corpus_with_chat(&["i feel it", "nothing here", "i think and feel"]);
        let hits = match_corpus(&corpus, &l, 2);
        let validated = validate_hits(hits, &mut AcceptAll).unwrap();
        let presence = explicit_presence(&corpus, &validated);
        assert_eq!(presence.len(), 6);
        let chat: Vec<_> = presence.iter().filter(|p| p.side == Side::Chat).collect();
        assert!(chat[0].y_experience && !chat[0].y_agency && chat[0].y_overall);
        assert!(!chat[1].y_experience && !chat[1].y_agency && !chat[1].y_overall);
        assert!(chat[2].y_experience && chat[2].y_agency);
        assert_eq!(chat[2].experience_terms["feel*"], 1);
        for p in &presence {
            assert_eq!(p.y_overall, p.y_experience || p.y_agency);
        }
    }

    struct RejectTerm(&'static str);

    impl Validator for RejectTerm {
        fn id(&self) -> String {
            "reject-term".into()
        }
        fn judge(&mut self, hits: &[MatchHit]) -> Result<Vec<Verdict>> {
            Ok(hits
                .iter()
                .map(|h| if h.term.pattern == self.0 { Verdict::Reject } else { Verdict::Accept })
                .collect())
        }
    }

    #[test]
    fn stricter_validator_never_adds_presence() {
        let l = lex(r#"{"experience":["feel*"],"agency":["think*"]}"#);
        let corpus = corpus_with_chat(&["i feel it", "i think", "think feel"]);
        let hits = match_corpus(&corpus, &l, 2);
        let loose = explicit_presence(&corpus, &validate_hits(hits.clone(), &mut AcceptAll).unwrap());
        let strict = explicit_presence(&corpus, &validate_hits(hits, &mut RejectTerm("think*")).unwrap());
        for (a, b) in loose.iter().zip(&strict) {
            assert!(b.y_experience <= a.y_experience);
            assert!(b.y_agency <= a.y_agency);
            assert!(b.y_overall <= a.y_overall);
        }
        assert_eq!(presence_counts(&strict, Side::Chat).agency, 0);
    }
}
