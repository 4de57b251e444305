//! Companionship-topic coding.
//!
//! Seeds are matched per post to get raw hit counts `h` per topic. Scores
//! weight rare topic vocabularies up and long posts down:
//!
//! ```text
//! q_c  = log2(W / T_c)          corpus rarity of topic c
//! b_ic = h_ic / w_i^lambda       length-adjusted hits
//! r_ic = b_ic * q_c^rho
//! ```
//!
//! and each post keeps the active topics scoring at least
//! `tau_i = max(eta, max_c r_ic - alpha * sigma_i)`, capped at `l_max`.

pub mod expand;
pub mod search;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::matcher::{Matcher, Pattern};

pub use expand::{apply_expansion, expand_seeds, ExpansionCandidate, ExpansionOptions, LabeledPost};
pub use search::{search_params, RandomSearch, SearchOutcome, SearchSpace, SearchStrategy, TrialRecord, TuningProblem};

/// post id -> gold topics
pub type TopicLabels = BTreeMap<String, BTreeSet<String>>;

pub fn load_labels(path: &Path) -> Result<TopicLabels> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSeedSet {
    pub topic: String,
    pub theme: String,
    pub seeds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFile {
    pub topics: Vec<TopicSeedSet>,
}

impl SeedFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreNormalization {
    #[default]
    None,
    /// divide by the post's largest positive score
    WithinPost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicParams {
    pub rho: f64,
    pub lambda_len: f64,
    pub alpha_sel: f64,
    pub eta: f64,
    pub l_max: usize,
    pub min_seeds: u32,
    pub min_distinct: u32,
    pub normalize: ScoreNormalization,
}

impl Default for TopicParams {
    fn default() -> Self {
        TopicParams {
            rho: 1.0,
            lambda_len: 0.5,
            alpha_sel: 1.0,
            eta: 0.01,
            l_max: 12,
            min_seeds: 1,
            min_distinct: 1,
            normalize: ScoreNormalization::None,
        }
    }
}

impl TopicParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho.is_finite()
            && self.rho >= 0.0
            && (0.0..=1.0).contains(&self.lambda_len)
            && self.alpha_sel.is_finite()
            && self.alpha_sel >= 0.0
            && self.eta.is_finite()
            && self.eta >= 0.0
            && self.l_max >= 1
            && self.min_seeds >= 1
            && self.min_distinct >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("topic parameters out of bounds: {self:?}")))
        }
    }
}

/// Compiled seed lists.
#[derive(Debug, Clone)]
pub struct TopicModel {
    sets: Vec<TopicSeedSet>,
    matcher: Matcher,
    /// pattern index -> topic index
    owner: Vec<usize>,
}

impl TopicModel {
    pub fn new(sets: Vec<TopicSeedSet>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut patterns = Vec::new();
        let mut owner = Vec::new();
        for (ti, set) in sets.iter().enumerate() {
            if !seen.insert(set.topic.as_str()) {
                return Err(Error::invalid(format!("duplicate topic {:?} in seed file", set.topic)));
            }
            let mut own = BTreeSet::new();
            for raw in &set.seeds {
                let p = Pattern::parse(raw)?;
                if own.insert(p.text.clone()) {
                    patterns.push(p);
                    owner.push(ti);
                }
            }
        }
        Ok(TopicModel { sets, matcher: Matcher::new(patterns), owner })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::new(SeedFile::load(path)?.topics)
    }

    pub fn sets(&self) -> &[TopicSeedSet] {
        &self.sets
    }

    pub fn topic_names(&self) -> Vec<String> {
        self.sets.iter().map(|s| s.topic.clone()).collect()
    }

    /// Themes in order of first appearance.
    pub fn themes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.sets {
            if !out.contains(&s.theme) {
                out.push(s.theme.clone());
            }
        }
        out
    }

    pub fn theme_of(&self, topic: &str) -> Option<&str> {
        self.sets.iter().find(|s| s.topic == topic).map(|s| s.theme.as_str())
    }

    pub fn themes_of<'a>(&self, topics: impl IntoIterator<Item = &'a String>) -> BTreeSet<String> {
        topics.into_iter().filter_map(|t| self.theme_of(t)).map(str::to_owned).collect()
    }

    /// Whether any seed of topic `ti` matches `token` on its own.
    pub fn seed_matches_token(&self, ti: usize, token: &str) -> bool {
        self.matcher
            .patterns()
            .iter()
            .zip(&self.owner)
            .any(|(p, &o)| o == ti && p.matches_token(token))
    }

    pub fn evidence_for(&self, doc: &Document, phrase_gap: usize) -> Vec<TopicEvidence> {
        let mut starts: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.sets.len()];
        let mut forms: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.sets.len()];
        for hit in self.matcher.find(&doc.tokens, phrase_gap) {
            let ti = self.owner[hit.pattern];
            starts[ti].insert(hit.start);
            forms[ti].insert(hit.pattern);
        }
        starts
            .iter()
            .zip(&forms)
            .map(|(s, f)| TopicEvidence { hits: s.len() as u32, distinct: f.len() as u32 })
            .collect()
    }
}

/// Seed evidence for one topic in one post. Hits are counted once per token
/// position, so a post never has more hits for a topic than words.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicEvidence {
    pub hits: u32,
    pub distinct: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostEvidence {
    pub post_id: String,
    pub word_count: usize,
    pub topics: Vec<TopicEvidence>,
}

/// Parameter-independent matching results; every scoring configuration is
/// evaluated from this table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceTable {
    pub topic_names: Vec<String>,
    pub posts: Vec<PostEvidence>,
    /// W
    pub total_words: u64,
    /// T_c
    pub topic_totals: Vec<u64>,
}

impl EvidenceTable {
    pub fn from_posts<'a>(docs: impl IntoIterator<Item = &'a Document>, model: &TopicModel, phrase_gap: usize) -> Self {
        let docs: Vec<&Document> = docs.into_iter().collect();
        let posts: Vec<PostEvidence> = docs
            .par_iter()
            .map(|d| PostEvidence {
                post_id: d.post_id.clone(),
                word_count: d.word_count,
                topics: model.evidence_for(d, phrase_gap),
            })
            .collect();
        let topic_names = model.topic_names();
        let mut topic_totals = vec![0u64; topic_names.len()];
        for p in &posts {
            for (t, e) in topic_totals.iter_mut().zip(&p.topics) {
                *t += e.hits as u64;
            }
        }
        let total_words = posts.iter().map(|p| p.word_count as u64).sum();
        EvidenceTable { topic_names, posts, total_words, topic_totals }
    }

    pub fn from_corpus(corpus: &Corpus, model: &TopicModel, phrase_gap: usize) -> Self {
        Self::from_posts(corpus.units.iter().map(|u| &u.post), model, phrase_gap)
    }

    /// `q_c^rho` per topic; 0 for topics with no hits anywhere.
    pub fn rarity_weights(&self, rho: f64) -> Vec<f64> {
        self.topic_totals
            .iter()
            .map(|&tc| {
                if tc == 0 || self.total_words == 0 {
                    return 0.0;
                }
                let q = (self.total_words as f64 / tc as f64).log2();
                assert!(q >= 0.0, "topic total {tc} exceeds corpus words {}", self.total_words);
                q.powf(rho)
            })
            .collect()
    }

    pub fn score_post(&self, post: &PostEvidence, rarity: &[f64], params: &TopicParams) -> Vec<f64> {
        let mut scores: Vec<f64> = post
            .topics
            .iter()
            .zip(rarity)
            .map(|(e, &qw)| {
                if e.hits == 0 || post.word_count == 0 {
                    0.0
                } else {
                    e.hits as f64 / (post.word_count as f64).powf(params.lambda_len) * qw
                }
            })
            .collect();
        if params.normalize == ScoreNormalization::WithinPost {
            let max = scores.iter().copied().fold(0.0_f64, f64::max);
            if max > 0.0 {
                scores.iter_mut().for_each(|s| *s /= max);
            }
        }
        scores
    }
}

/// Per-post topic scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicScores {
    pub post_id: String,
    pub scores: BTreeMap<String, f64>,
}

pub fn score_topics(corpus: &Corpus, model: &TopicModel, params: &TopicParams, phrase_gap: usize) -> Vec<TopicScores> {
    let table = EvidenceTable::from_corpus(corpus, model, phrase_gap);
    let rarity = table.rarity_weights(params.rho);
    table
        .posts
        .iter()
        .map(|p| TopicScores {
            post_id: p.post_id.clone(),
            scores: table.topic_names.iter().cloned().zip(table.score_post(p, &rarity, params)).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicAssignment {
    pub post_id: String,
    pub scores: BTreeMap<String, f64>,
    pub active: BTreeSet<String>,
    /// descending score, ties by name
    pub selected: Vec<String>,
    pub tau: f64,
}

fn population_std(xs: &[f64]) -> f64 {
    if xs.len() <= 1 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Applies the evidence minima and the `tau` rule to one post.
///
/// Only strictly positive scores can be selected, so a topic whose rarity
/// weight is zero never enters a post's codes.
pub fn select_topics(
    post_id: &str,
    names: &[String],
    scores: &[f64],
    evidence: &[TopicEvidence],
    params: &TopicParams,
) -> TopicAssignment {
    let active: Vec<usize> = (0..names.len())
        .filter(|&c| evidence[c].hits >= params.min_seeds && evidence[c].distinct >= params.min_distinct)
        .collect();
    let positive: Vec<f64> = active.iter().map(|&c| scores[c]).filter(|&s| s > 0.0).collect();
    let sigma = population_std(&positive);
    let tau = match active.iter().map(|&c| scores[c]).reduce(f64::max) {
        Some(max) => params.eta.max(max - params.alpha_sel * sigma),
        None => params.eta,
    };
    let mut chosen: Vec<usize> = active.iter().copied().filter(|&c| scores[c] > 0.0 && scores[c] >= tau).collect();
    chosen.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| names[a].cmp(&names[b])));
    chosen.truncate(params.l_max);
    TopicAssignment {
        post_id: post_id.to_string(),
        scores: names.iter().cloned().zip(scores.iter().copied()).collect(),
        active: active.iter().map(|&c| names[c].clone()).collect(),
        selected: chosen.into_iter().map(|c| names[c].clone()).collect(),
        tau,
    }
}

pub fn assign_topics(table: &EvidenceTable, params: &TopicParams) -> Vec<TopicAssignment> {
    let rarity = table.rarity_weights(params.rho);
    table
        .posts
        .par_iter()
        .map(|p| select_topics(&p.post_id, &table.topic_names, &table.score_post(p, &rarity, params), &p.topics, params))
        .collect()
}

/// Plain seed matching: every topic with at least one seed hit.
pub fn seed_match_assignments(table: &EvidenceTable) -> BTreeMap<String, BTreeSet<String>> {
    table
        .posts
        .iter()
        .map(|p| {
            let set = p
                .topics
                .iter()
                .zip(&table.topic_names)
                .filter(|(e, _)| e.hits > 0)
                .map(|(_, n)| n.clone())
                .collect();
            (p.post_id.clone(), set)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TopicMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub predicted: usize,
    pub true_positive: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision_w: f64,
    pub recall_w: f64,
    pub f1_w: f64,
    pub per_topic: BTreeMap<String, TopicMetrics>,
}

impl EvalReport {
    /// Weighted precision/recall blend used as the tuning target.
    pub fn objective(&self, weights: (f64, f64)) -> f64 {
        weights.0 * self.precision_w + weights.1 * self.recall_w
    }
}

/// Support-weighted multilabel precision/recall/F1 over `topics`, evaluated on
/// the units present in `gold`. Posts missing from `predicted` count as empty.
pub fn evaluate_sets(
    predicted: &BTreeMap<String, BTreeSet<String>>,
    gold: &TopicLabels,
    topics: &[String],
) -> EvalReport {
    let empty = BTreeSet::new();
    let mut per_topic = BTreeMap::new();
    let (mut wp, mut wr, mut wf, mut total) = (0.0, 0.0, 0.0, 0usize);
    for topic in topics {
        let mut m = TopicMetrics::default();
        for (unit, gold_set) in gold {
            let pred = predicted.get(unit).unwrap_or(&empty);
            let g = gold_set.contains(topic);
            let p = pred.contains(topic);
            m.support += g as usize;
            m.predicted += p as usize;
            m.true_positive += (g && p) as usize;
        }
        if m.predicted > 0 {
            m.precision = m.true_positive as f64 / m.predicted as f64;
        }
        if m.support > 0 {
            m.recall = m.true_positive as f64 / m.support as f64;
        }
        if m.precision + m.recall > 0.0 {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        }
        let w = m.support as f64;
        wp += w * m.precision;
        wr += w * m.recall;
        wf += w * m.f1;
        total += m.support;
        per_topic.insert(topic.clone(), m);
    }
    let (precision_w, recall_w, f1_w) = if total > 0 {
        let t = total as f64;
        (wp / t, wr / t, wf / t)
    } else {
        (0.0, 0.0, 0.0)
    };
    EvalReport { precision_w, recall_w, f1_w, per_topic }
}

pub fn evaluate_assignments(predicted: &[TopicAssignment], gold: &TopicLabels, topics: &[String]) -> EvalReport {
    let pred = predicted
        .iter()
        .map(|a| (a.post_id.clone(), a.selected.iter().cloned().collect()))
        .collect();
    evaluate_sets(&pred, gold, topics)
}
