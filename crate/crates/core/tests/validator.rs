use std::io::Cursor;
use std::path::Path;

use mindlex_core::corpus::{ingest_reader, Corpus};
use mindlex_core::lexicon::{
    match_corpus, validate_hits, validator_from_spec, Lexicon, MatchHit, Verdict, DEFAULT_PHRASE_GAP,
};
use mindlex_core::{synth, Error};

fn fixture() -> (Corpus, Vec<MatchHit>) {
    let mut jsonl = String::new();
    for r in synth::prevalence_fixture() {
        jsonl.push_str(&serde_json::to_string(&r).unwrap());
        jsonl.push('\n');
    }
    let corpus = ingest_reader(Cursor::new(jsonl), None).unwrap().corpus;
    let lex = Lexicon::from_map(&synth::table1_lexicon()).unwrap();
    let hits = match_corpus(&corpus, &lex, DEFAULT_PHRASE_GAP);
    (corpus, hits)
}

fn script(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    format!("cmd:python3 {}", path.display())
}

const REJECT_TERM: &str = r#"
import json, sys
bad = sys.argv[1]
for line in sys.stdin:
    req = json.loads(line)
    out = [{"id": h["id"], "accept": h["term"] != bad} for h in req["hits"]]
    print(json.dumps({"verdicts": out}), flush=True)
"#;

#[test]
fn external_validator_rejects_one_term_across_batches() {
    let (_, hits) = fixture();
    assert!(hits.len() > 64, "fixture should span several batches");
    let target = hits.iter().map(|h| h.term.pattern.clone()).find(|p| !p.contains(char::is_whitespace)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let spec = format!("{} {target}", script(dir.path(), "reject.py", REJECT_TERM));
    let mut v = validator_from_spec(&spec).unwrap();
    let out = validate_hits(hits.clone(), v.as_mut()).unwrap();
    assert_eq!(out.len(), hits.len());
    for h in &out {
        let want = if h.hit.term.pattern == target { Verdict::Reject } else { Verdict::Accept };
        assert_eq!(h.verdict, want, "{}", h.hit.surface);
        assert!(h.validator_id.starts_with("cmd:python3"));
    }
    assert!(out.iter().any(|h| h.verdict == Verdict::Reject));
}

#[test]
fn null_verdict_counts_as_reject() {
    let (_, hits) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    print(json.dumps({"verdicts": [{"id": h["id"], "accept": None} for h in req["hits"]]}), flush=True)
"#;
    let mut v = validator_from_spec(&script(dir.path(), "null.py", body)).unwrap();
    let out = validate_hits(hits[..10].to_vec(), v.as_mut()).unwrap();
    assert!(out.iter().all(|h| h.verdict == Verdict::Reject));
}

#[test]
fn missing_verdict_is_an_error() {
    let (_, hits) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    print(json.dumps({"verdicts": [{"id": h["id"], "accept": True} for h in req["hits"][1:]]}), flush=True)
"#;
    let mut v = validator_from_spec(&script(dir.path(), "partial.py", body)).unwrap();
    let err = validate_hits(hits[..5].to_vec(), v.as_mut()).unwrap_err();
    assert!(matches!(err, Error::Validator { .. }), "{err}");
}

#[test]
fn crashing_validator_is_an_error() {
    let (_, hits) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let mut v = validator_from_spec(&script(dir.path(), "crash.py", "import sys\nsys.exit(3)\n")).unwrap();
    let err = validate_hits(hits[..5].to_vec(), v.as_mut()).unwrap_err();
    assert!(matches!(err, Error::Validator { .. }), "{err}");
}
