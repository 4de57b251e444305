//! Deterministic synthetic corpora: the bundled demo, a prevalence fixture
//! holding the Table 1 chat-side term multiset, a planted-indicator corpus for
//! discovery, and a labeled topic corpus for parameter search.

pub mod table1;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{DocKind, Document, RawRecord};
use crate::discovery::AnchoredUnit;
use crate::lexicon::{Dimension, Side};
use crate::seed::{rng_for, stream};
use crate::topics::{SeedFile, TopicLabels, TopicSeedSet};
use crate::{Error, Result};

/// `"feel* (60); hope* (18)"` to `[("feel*", 60), ("hope*", 18)]`.
pub fn parse_counts(s: &str) -> Vec<(String, u32)> {
    s.split(';')
        .filter_map(|item| {
            let item = item.trim();
            let (term, rest) = item.rsplit_once(" (")?;
            let count = rest.trim_end_matches(')').parse().ok()?;
            Some((term.trim().to_owned(), count))
        })
        .collect()
}

/// Reported validated term counts for one context and dimension.
pub fn table1_counts(side: Side, dim: Dimension) -> Vec<(String, u32)> {
    parse_counts(match (side, dim) {
        (Side::Post, Dimension::Experience) => table1::POST_EXPERIENCE,
        (Side::Chat, Dimension::Experience) => table1::CHAT_EXPERIENCE,
        (Side::Post, Dimension::Agency) => table1::POST_AGENCY,
        (Side::Chat, Dimension::Agency) => table1::CHAT_AGENCY,
    })
}

/// Lexicon of every reported term, `dimension -> patterns`.
pub fn table1_lexicon() -> BTreeMap<String, Vec<String>> {
    Dimension::ALL
        .iter()
        .map(|&d| {
            let mut seen = BTreeSet::new();
            let terms = [Side::Post, Side::Chat]
                .iter()
                .flat_map(|&s| table1_counts(s, d))
                .map(|(t, _)| t)
                .filter(|t| seen.insert(t.clone()))
                .collect();
            (d.as_str().to_owned(), terms)
        })
        .collect()
}

/// A token the pattern matches: the stem without its star, or the literal.
pub fn surface(pattern: &str) -> String {
    pattern.trim_end_matches('*').to_owned()
}

/// Words that no bundled lexicon term or topic seed matches.
pub const POST_FILLER: &[&str] = &[
    "the", "a", "my", "i", "and", "to", "it", "is", "was", "with", "this", "that", "so", "for", "on", "in", "of",
    "about", "just", "when", "she", "he", "they", "we", "me", "her", "him", "today", "yesterday", "week", "night",
    "morning", "talked", "said", "told", "asked", "story", "update", "version", "some", "more", "again", "how",
    "what", "why", "because", "but", "also", "very", "much", "first", "time", "long", "new", "old", "still", "after",
    "before", "months", "weeks", "since", "started", "anyone", "else", "here", "post", "saw", "got", "made",
];

pub const CHAT_FILLER: &[&str] = &[
    "hey", "hi", "lol", "okay", "yeah", "so", "you", "your", "i", "me", "my", "we", "the", "a", "and", "to", "is",
    "are", "was", "what", "how", "about", "today", "tonight", "tomorrow", "good", "morning", "night", "talk",
    "tell", "say", "want", "just", "too", "right", "sure", "maybe", "haha", "well", "now", "here", "there", "do",
    "did", "can", "would", "go", "going", "see", "read", "music", "song", "movie", "book", "walk", "work", "day",
    "weekend", "coffee", "dinner", "rain", "cat", "dog", "home", "city", "trip", "rep",
];

/// Generic platform and function words; a bigram made only of these is dropped.
pub const STOPLIST: &[&str] = &[
    "a", "ai", "and", "app", "are", "bot", "character", "chat", "do", "hey", "hi", "i", "is", "it", "me", "my",
    "replika", "rep", "so", "the", "to", "was", "we", "what", "you", "your",
];

pub struct TopicDef {
    pub theme: &'static str,
    pub topic: &'static str,
    pub seeds: &'static [&'static str],
    /// co-occurring words outside the seed list
    pub cues: &'static [&'static str],
    pub prevalence: f64,
}

pub const TOPICS: &[TopicDef] = &[
    TopicDef { theme: "Socioemotionality", topic: "Bonding", seeds: &["bond*", "attach*", "companion*", "relationship*", "partner*"], cues: &["anniversary", "together"], prevalence: 0.475 },
    TopicDef { theme: "Socioemotionality", topic: "Realism", seeds: &["realistic*", "lifelike", "genuine*", "human-like", "real person"], cues: &["convincing", "uncanny"], prevalence: 0.536 },
    TopicDef { theme: "Socioemotionality", topic: "Sex(uality)", seeds: &["sex*", "nsfw", "erotic*", "intimate*", "spicy"], cues: &["flirty", "lewd"], prevalence: 0.163 },
    TopicDef { theme: "User Control", topic: "Customization", seeds: &["customiz*", "backstory", "avatar*", "traits", "outfit*"], cues: &["tweak", "wardrobe"], prevalence: 0.209 },
    TopicDef { theme: "User Control", topic: "Playfulness", seeds: &["roleplay*", "rp", "silly", "adventure*", "quest*"], cues: &["dragons", "pirates"], prevalence: 0.266 },
    TopicDef { theme: "User Control", topic: "Boundary negotiation", seeds: &["boundar*", "consent*", "refus*", "filter*", "rejected"], cues: &["pushback", "dealbreaker"], prevalence: 0.132 },
    TopicDef { theme: "Limitations", topic: "Inauthenticity", seeds: &["fake", "scripted", "pretend*", "illusion*", "not real"], cues: &["hollow", "canned"], prevalence: 0.042 },
    TopicDef { theme: "Limitations", topic: "Transactionality", seeds: &["subscri*", "paywall*", "premium", "money", "price*"], cues: &["refund", "upsell"], prevalence: 0.132 },
    TopicDef { theme: "Limitations", topic: "Ethicality", seeds: &["ethic*", "exploit*", "manipulat*", "privacy", "harm*"], cues: &["regulators", "dataset"], prevalence: 0.084 },
    TopicDef { theme: "Imaginaries", topic: "Social Isolation", seeds: &["isolat*", "alone", "no friends", "lonel*", "withdrawn"], cues: &["housebound", "introvert"], prevalence: 0.074 },
    TopicDef { theme: "Imaginaries", topic: "Speculation", seeds: &["future*", "someday", "agi", "singularity", "robots"], cues: &["decades", "androids"], prevalence: 0.106 },
    TopicDef { theme: "Imaginaries", topic: "Exist./Philos.", seeds: &["exist*", "philosoph*", "meaning of life", "soul*", "sentien*"], cues: &["metaphysics", "qualia"], prevalence: 0.171 },
];

pub fn seed_file() -> SeedFile {
    SeedFile {
        topics: TOPICS
            .iter()
            .map(|t| TopicSeedSet {
                topic: t.topic.into(),
                theme: t.theme.into(),
                seeds: t.seeds.iter().map(|s| s.to_string()).collect(),
            })
            .collect(),
    }
}

pub fn stoplist() -> BTreeSet<String> {
    STOPLIST.iter().map(|s| s.to_string()).collect()
}

/// Distinct seeds mentioned for each generated topic of a post.
pub const GOLD_SEEDS: usize = 2;

/// Latent experience and agency cues planted in MP-positive chats.
pub const EXPERIENCE_CUES: &[&str] = &["warmth", "heartbeat", "tender", "cuddle", "blanket", "miss you"];
pub const AGENCY_CUES: &[&str] = &["choose", "insist", "initiative", "stubborn", "your own"];

fn seed_surface(seed: &str, rng: &mut impl Rng) -> String {
    match seed.strip_suffix('*') {
        Some(stem) => format!("{stem}{}", ["", "s", "ing", "ed"][rng.gen_range(0..4)]),
        None => seed.to_owned(),
    }
}

fn push_filler(words: &mut Vec<String>, pool: &[&str], n: usize, rng: &mut impl Rng) {
    for _ in 0..n {
        words.push(pool[rng.gen_range(0..pool.len())].to_owned());
    }
}

fn sample_terms(counts: &[(String, u32)], k: usize, rng: &mut impl Rng) -> Vec<String> {
    let dist = WeightedIndex::new(counts.iter().map(|c| c.1)).expect("positive counts");
    (0..k).map(|_| surface(&counts[dist.sample(rng)].0)).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Demo corpus records and the tuning labels of its first `n_tuning` posts.
#[derive(Debug, Clone)]
pub struct DemoData {
    pub records: Vec<RawRecord>,
    pub labels: TopicLabels,
    /// generated topics of every post
    pub truth: TopicLabels,
}

/// Linked post/chat corpus with topic-dependent chat-side MP. Topic effects
/// on MP are positive for the Limitations topics and existential talk.
pub fn demo_corpus(seed: u64, n_units: usize, n_users: usize, n_tuning: usize) -> DemoData {
    let mut rng = rng_for(seed, stream::SYNTH, 1);
    let chat_e = table1_counts(Side::Chat, Dimension::Experience);
    let chat_a = table1_counts(Side::Chat, Dimension::Agency);
    let post_e = table1_counts(Side::Post, Dimension::Experience);
    let post_a = table1_counts(Side::Post, Dimension::Agency);
    let effect = |topic: &str| match topic {
        "Inauthenticity" => 1.3,
        "Transactionality" => 0.6,
        "Ethicality" => 0.1,
        "Exist./Philos." => 0.5,
        "Social Isolation" => 0.3,
        "Customization" => -0.3,
        _ => 0.0,
    };
    let users: Vec<usize> = (0..n_units)
        .map(|i| if i < n_users { i } else { rng.gen_range(0..n_users.max(1)) })
        .collect();

    let mut records = Vec::new();
    let mut truth = TopicLabels::new();
    for (i, &user) in users.iter().enumerate() {
        let pid = format!("p{i:04}");
        let author = if rng.gen_bool(0.03) { None } else { Some(format!("user{user:04}")) };
        let mut topics: Vec<&TopicDef> = TOPICS.iter().filter(|t| rng.gen_bool(t.prevalence)).collect();
        if topics.is_empty() {
            topics.push(&TOPICS[rng.gen_range(0..2)]);
        }

        let mut post = Vec::new();
        push_filler(&mut post, POST_FILLER, rng.gen_range(8..16), &mut rng);
        for t in &topics {
            let picked: Vec<&&str> = t.seeds.choose_multiple(&mut rng, GOLD_SEEDS).collect();
            for s in picked {
                post.push(seed_surface(s, &mut rng));
                push_filler(&mut post, POST_FILLER, rng.gen_range(2..6), &mut rng);
            }
            if rng.gen_bool(0.6) {
                post.push(t.cues.choose(&mut rng).unwrap().to_string());
            }
        }
        if rng.gen_bool(0.2) {
            let names: BTreeSet<&str> = topics.iter().map(|t| t.topic).collect();
            let others: Vec<&TopicDef> = TOPICS.iter().filter(|t| !names.contains(t.topic)).collect();
            let other = others.choose(&mut rng).unwrap();
            post.push(seed_surface(other.seeds.choose(&mut rng).unwrap(), &mut rng));
        }
        if rng.gen_bool(0.45) {
            post.extend(sample_terms(&post_e, rng.gen_range(1..=3), &mut rng));
        }
        if rng.gen_bool(0.5) {
            post.extend(sample_terms(&post_a, rng.gen_range(1..=3), &mut rng));
        }
        push_filler(&mut post, POST_FILLER, rng.gen_range(4..10), &mut rng);
        post.shuffle(&mut rng);
        records.push(RawRecord { id: pid.clone(), kind: DocKind::Post, post_id: pid.clone(), author: author.clone(), text: post.join(" ") });
        truth.insert(pid.clone(), topics.iter().map(|t| t.topic.to_owned()).collect());

        if rng.gen_bool(0.02) {
            continue;
        }
        let eff: f64 = topics.iter().map(|t| effect(t.topic)).sum();
        let explicit_e = rng.gen_bool(sigmoid(-1.5 + eff));
        let explicit_a = rng.gen_bool(sigmoid(-0.9 + eff));
        let latent_e = explicit_e || rng.gen_bool(sigmoid(-2.2 + eff));
        let latent_a = explicit_a || rng.gen_bool(sigmoid(-2.0 + eff));
        let mut chat = Vec::new();
        push_filler(&mut chat, CHAT_FILLER, rng.gen_range(12..30), &mut rng);
        if explicit_e {
            chat.extend(sample_terms(&chat_e, rng.gen_range(1..=2), &mut rng));
        }
        if explicit_a {
            chat.extend(sample_terms(&chat_a, rng.gen_range(1..=2), &mut rng));
        }
        for (on, cues) in [(latent_e, EXPERIENCE_CUES), (latent_a, AGENCY_CUES)] {
            for cue in cues {
                if rng.gen_bool(if on { 0.3 } else { 0.03 }) {
                    chat.push(cue.to_string());
                }
            }
        }
        chat.shuffle(&mut rng);
        let turns = rng.gen_range(2..=4).min(chat.len());
        let per = chat.len().div_ceil(turns);
        for (k, turn) in chat.chunks(per).enumerate() {
            records.push(RawRecord {
                id: format!("{pid}-c{k}"),
                kind: DocKind::Chat,
                post_id: pid.clone(),
                author: author.clone(),
                text: turn.join(" "),
            });
        }
    }
    let labels = truth.iter().take(n_tuning).map(|(k, v)| (k.clone(), v.clone())).collect();
    DemoData { records, labels, truth }
}

/// 621 units whose chats carry exactly the reported chat-side term
/// multiset: 63 units with both dimensions, 62 experience only, 134 agency
/// only, 362 with neither.
pub fn prevalence_fixture() -> Vec<RawRecord> {
    const N: usize = 621;
    let exp_slots: Vec<usize> = (0..125).collect();
    let agn_slots: Vec<usize> = (0..63).chain(125..259).collect();
    let mut words: Vec<Vec<String>> = vec![Vec::new(); N];
    for (counts, slots) in [
        (table1_counts(Side::Chat, Dimension::Experience), &exp_slots),
        (table1_counts(Side::Chat, Dimension::Agency), &agn_slots),
    ] {
        let mut cursor = 0;
        for (term, c) in counts {
            for _ in 0..c {
                words[slots[cursor % slots.len()]].push(surface(&term));
                cursor += 1;
            }
        }
    }
    let mut out = Vec::with_capacity(2 * N);
    for (i, w) in words.into_iter().enumerate() {
        let pid = format!("f{i:03}");
        let author = Some(format!("fixture{i:03}"));
        out.push(RawRecord { id: pid.clone(), kind: DocKind::Post, post_id: pid.clone(), author: author.clone(), text: "hello there".into() });
        let mut text = vec!["okay".to_string()];
        for t in w {
            text.push(t);
            text.push("and".into());
        }
        text.push("bye".into());
        out.push(RawRecord { id: format!("{pid}-c"), kind: DocKind::Chat, post_id: pid, author, text: text.join(" ") });
    }
    out
}

/// Discovery corpus with known truth.
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub units: Vec<AnchoredUnit>,
    pub planted: Vec<String>,
    pub noise: Vec<String>,
}

/// `n_users * per_user` units, 40% positive per user. Each planted token
/// appears in a positive unit with probability .5 and in a negative unit
/// with .15 (odds ratio about 5.7); noise tokens fill every unit uniformly.
pub fn planted_discovery(seed: u64, n_users: usize, per_user: usize) -> PlantedCorpus {
    let mut rng = rng_for(seed, stream::SYNTH, 2);
    let planted: Vec<String> = (0..5).map(|i| format!("planted{i}")).collect();
    let noise: Vec<String> = (0..50).map(|i| format!("noise{i:02}")).collect();
    let n_pos = (per_user as f64 * 0.4).round() as usize;
    let mut units = Vec::new();
    for u in 0..n_users {
        let mut labels: Vec<bool> = (0..per_user).map(|k| k < n_pos).collect();
        labels.shuffle(&mut rng);
        for (k, positive) in labels.into_iter().enumerate() {
            let mut tokens: Vec<String> = (0..25).map(|_| noise.choose(&mut rng).unwrap().clone()).collect();
            for p in &planted {
                if rng.gen_bool(if positive { 0.5 } else { 0.15 }) {
                    tokens.push(p.clone());
                }
            }
            tokens.shuffle(&mut rng);
            units.push(AnchoredUnit {
                unit_id: format!("u{u:02}-{k:02}"),
                support_key: format!("user:s{u:02}"),
                tokens,
                positive,
            });
        }
    }
    PlantedCorpus { units, planted, noise }
}

/// Labeled posts in blocks of 12 (`n_posts` is rounded up). Within a block,
/// post `j` is coded with topics `j + o (mod 12)` for a block-wide offset set
/// of one to four offsets, and each gold topic contributes `GOLD_SEEDS`
/// distinct seed mentions. With probability `noise` a block also mentions one
/// seed of the topic at an unused offset. Every topic thus has the same
/// corpus-wide hit total, so gold topics of a post score equally.
pub fn labeled_topic_corpus(seed: u64, n_posts: usize, noise: f64) -> (Vec<Document>, TopicLabels) {
    let mut rng: ChaCha8Rng = rng_for(seed, stream::SYNTH, 3);
    let m = TOPICS.len();
    let blocks = n_posts.div_ceil(m);
    let mut docs = Vec::with_capacity(blocks * m);
    let mut gold = TopicLabels::new();
    for b in 0..blocks {
        let k = rng.gen_range(1..=4);
        let mut offsets = vec![0];
        offsets.extend((1..m).collect::<Vec<_>>().choose_multiple(&mut rng, k - 1));
        let unused: Vec<usize> = (1..m).filter(|o| !offsets.contains(o)).collect();
        let noise_offset = if rng.gen_bool(noise) { unused.choose(&mut rng).copied() } else { None };
        for j in 0..m {
            let pid = format!("t{:04}", b * m + j);
            let topics: Vec<&TopicDef> = offsets.iter().map(|o| &TOPICS[(j + o) % m]).collect();
            let mut words = Vec::new();
            push_filler(&mut words, POST_FILLER, rng.gen_range(10..40), &mut rng);
            for t in &topics {
                for s in t.seeds.choose_multiple(&mut rng, GOLD_SEEDS) {
                    words.push(seed_surface(s, &mut rng));
                }
            }
            if let Some(o) = noise_offset {
                let t = &TOPICS[(j + o) % m];
                words.push(seed_surface(t.seeds.choose(&mut rng).unwrap(), &mut rng));
            }
            words.shuffle(&mut rng);
            gold.insert(pid.clone(), topics.iter().map(|t| t.topic.to_owned()).collect());
            docs.push(Document::new(pid.clone(), DocKind::Post, pid, None, words.join(" ")));
        }
    }
    (docs, gold)
}

/// Default size of the bundled demo.
pub const DEMO_SEED: u64 = 20250101;
pub const DEMO_UNITS: usize = 600;
pub const DEMO_USERS: usize = 470;
pub const DEMO_TUNING: usize = 75;

/// Writes the demo corpus, lexicon, seeds, tuning labels, stoplist and a
/// pipeline config referring to them. Returns the config path.
pub fn write_demo_files(dir: &Path, seed: u64) -> Result<PathBuf> {
    let demo = demo_corpus(seed, DEMO_UNITS, DEMO_USERS, DEMO_TUNING);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: Vec<u8>| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    };
    let mut jsonl = String::new();
    for r in &demo.records {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    write("corpus.jsonl", jsonl.into_bytes())?;
    write("lexicon.json", pretty(&table1_lexicon())?)?;
    write("seeds.json", pretty(&seed_file())?)?;
    write("labels.json", pretty(&demo.labels)?)?;
    let mut stop: String = STOPLIST.join("\n");
    stop.push('\n');
    write("stoplist.txt", stop.into_bytes())?;
    let config = serde_json::json!({
        "paths": {
            "corpus": "corpus.jsonl",
            "lexicon": "lexicon.json",
            "seeds": "seeds.json",
            "tuning_labels": "labels.json",
            "stoplist": "stoplist.txt"
        },
        "validator": "accept-all",
        "master_seed": seed
    });
    write("demo.json", pretty(&config)?)?;
    Ok(dir.join("demo.json"))
}

fn pretty<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ingest_reader;
    use crate::lexicon::{explicit_presence, match_corpus, presence_counts, validate_hits, AcceptAll, Lexicon};
    use crate::topics::TopicModel;

    fn lexicon() -> Lexicon {
        Lexicon::from_map(&table1_lexicon()).unwrap()
    }

    fn jsonl(records: &[RawRecord]) -> String {
        records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect()
    }

    #[test]
    fn table1_totals() {
        let sum = |s, d| table1_counts(s, d).iter().map(|c| c.1).sum::<u32>();
        assert_eq!(table1_counts(Side::Chat, Dimension::Experience).len(), 35);
        assert_eq!(sum(Side::Chat, Dimension::Experience), 157);
        assert_eq!(sum(Side::Chat, Dimension::Agency), 282);
        assert_eq!(table1_counts(Side::Post, Dimension::Experience).len(), 114);
        assert_eq!(table1_counts(Side::Post, Dimension::Agency).len(), 72);
        assert_eq!(table1_counts(Side::Chat, Dimension::Agency).len(), 37);
    }

    #[test]
    fn filler_and_cues_match_nothing() {
        let lex = lexicon();
        let model = TopicModel::new(seed_file().topics).unwrap();
        let mut words: Vec<&str> = POST_FILLER.iter().chain(CHAT_FILLER).copied().collect();
        words.extend(TOPICS.iter().flat_map(|t| t.cues.iter().copied()));
        words.extend(EXPERIENCE_CUES.iter().chain(AGENCY_CUES).flat_map(|c| c.split(' ')));
        let text = words.join(" ");
        let doc = Document::new("x", DocKind::Chat, "x", None, text);
        assert!(crate::lexicon::match_document(&doc, &lex, 2).is_empty());
        assert!(model.evidence_for(&doc, 2).iter().all(|e| e.hits == 0));
    }

    #[test]
    fn fixture_has_reported_prevalence() {
        let ing = ingest_reader(jsonl(&prevalence_fixture()).as_bytes(), None).unwrap();
        let hits = match_corpus(&ing.corpus, &lexicon(), 2);
        let validated = validate_hits(hits, &mut AcceptAll).unwrap();
        let pres = explicit_presence(&ing.corpus, &validated);
        let c = presence_counts(&pres, Side::Chat);
        assert_eq!((c.units, c.overall, c.experience, c.agency), (621, 259, 125, 197));
    }

    #[test]
    fn generators_are_deterministic() {
        let a = demo_corpus(7, 120, 100, 20);
        let b = demo_corpus(7, 120, 100, 20);
        assert_eq!(a.records, b.records);
        assert_eq!(a.labels.len(), 20);
        let c = demo_corpus(8, 120, 100, 20);
        assert_ne!(a.records, c.records);
        assert_eq!(planted_discovery(3, 20, 10).units, planted_discovery(3, 20, 10).units);
        assert_eq!(labeled_topic_corpus(3, 50, 0.2).1, labeled_topic_corpus(3, 50, 0.2).1);
    }
}
