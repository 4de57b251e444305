//! Seed expansion from a labeled tuning set.
//!
//! For candidate term `t` and topic `c` over tuning units `U`:
//!
//! ```text
//! prec  = |U_tc+| / |U_t|
//! rec   = |U_tc+| / |U_c+|
//! idf   = log2((|U| + 1) / (|U_t| + 1))
//! score = prec * ln(1 + |U_tc+|) * (1 + idf) * (0.5 + rec)
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{TopicModel, TopicSeedSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPost {
    pub post_id: String,
    pub tokens: Vec<String>,
    pub topics: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionOptions {
    pub min_support: usize,
    pub min_prec: f64,
    pub top_k: usize,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions { min_support: 2, min_prec: 0.80, top_k: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCandidate {
    pub term: String,
    pub topic: String,
    pub n_t: usize,
    pub n_tc: usize,
    pub n_c: usize,
    pub prec_proxy: f64,
    pub rec_proxy: f64,
    pub idf: f64,
    pub score: f64,
}

impl ExpansionCandidate {
    pub fn compute(term: &str, topic: &str, n_units: usize, n_t: usize, n_tc: usize, n_c: usize) -> Self {
        let prec_proxy = if n_t > 0 { n_tc as f64 / n_t as f64 } else { 0.0 };
        let rec_proxy = if n_c > 0 { n_tc as f64 / n_c as f64 } else { 0.0 };
        let idf = ((n_units as f64 + 1.0) / (n_t as f64 + 1.0)).log2();
        let score = prec_proxy * (n_tc as f64).ln_1p() * (1.0 + idf) * (0.5 + rec_proxy);
        ExpansionCandidate {
            term: term.to_string(),
            topic: topic.to_string(),
            n_t,
            n_tc,
            n_c,
            prec_proxy,
            rec_proxy,
            idf,
            score,
        }
    }
}

/// Ranks unigram candidates per topic and returns the retained top-k.
///
/// `candidates` restricts the universe; by default every token of the tuning
/// posts is considered. Tokens already covered by a topic's seeds are skipped
/// for that topic.
pub fn expand_seeds(
    tuning: &[LabeledPost],
    model: &TopicModel,
    candidates: Option<&[String]>,
    opts: &ExpansionOptions,
) -> Result<Vec<ExpansionCandidate>> {
    if tuning.is_empty() {
        return Err(Error::invalid("seed expansion needs a non-empty tuning set"));
    }
    let unit_tokens: Vec<BTreeSet<&str>> =
        tuning.iter().map(|p| p.tokens.iter().map(String::as_str).collect()).collect();

    let universe: BTreeSet<&str> = match candidates {
        Some(c) => c.iter().map(String::as_str).collect(),
        None => unit_tokens.iter().flatten().copied().collect(),
    };

    let mut n_t: BTreeMap<&str, usize> = BTreeMap::new();
    for toks in &unit_tokens {
        for t in toks.iter().filter(|t| universe.contains(*t)) {
            *n_t.entry(t).or_insert(0) += 1;
        }
    }

    let mut retained = Vec::new();
    for (ti, set) in model.sets().iter().enumerate() {
        let coded: Vec<usize> = (0..tuning.len()).filter(|&i| tuning[i].topics.contains(&set.topic)).collect();
        let n_c = coded.len();
        let mut n_tc: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in &coded {
            for t in unit_tokens[i].iter().filter(|t| universe.contains(*t)) {
                *n_tc.entry(t).or_insert(0) += 1;
            }
        }
        let mut scored: Vec<ExpansionCandidate> = n_tc
            .iter()
            .filter(|(t, _)| !model.seed_matches_token(ti, t))
            .map(|(t, &k)| ExpansionCandidate::compute(t, &set.topic, tuning.len(), n_t[t], k, n_c))
            .filter(|c| c.n_tc >= opts.min_support && c.prec_proxy >= opts.min_prec && c.score > 0.0)
            .collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
        scored.truncate(opts.top_k);
        retained.extend(scored);
    }
    Ok(retained)
}

/// Appends retained terms (as literal seeds) to their topics.
pub fn apply_expansion(sets: &[TopicSeedSet], retained: &[ExpansionCandidate]) -> Vec<TopicSeedSet> {
    sets.iter()
        .map(|s| {
            let mut out = s.clone();
            for c in retained.iter().filter(|c| c.topic == s.topic) {
                if !out.seeds.contains(&c.term) {
                    out.seeds.push(c.term.clone());
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn score_hand_example() {
        let c = ExpansionCandidate::compute("t", "c", 9, 4, 3, 5);
        assert_abs_diff_eq!(c.prec_proxy, 0.75);
        assert_abs_diff_eq!(c.rec_proxy, 0.6);
        assert_abs_diff_eq!(c.idf, 1.0);
        assert_abs_diff_eq!(c.score, 0.75 * 4f64.ln() * 2.0 * 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(c.score, 2.2874, epsilon = 1e-4);
    }

    #[test]
    fn zero_overlap_scores_zero() {
        assert_eq!(ExpansionCandidate::compute("t", "c", 9, 4, 0, 5).score, 0.0);
    }

    fn post(id: &str, text: &str, topics: &[&str]) -> LabeledPost {
        LabeledPost {
            post_id: id.into(),
            tokens: text.split(' ').map(str::to_owned).collect(),
            topics: topics.iter().map(|t| t.to_string()).collect(),
        }
    }

    fn model() -> TopicModel {
        TopicModel::new(vec![TopicSeedSet { topic: "bonding".into(), theme: "socio".into(), seeds: vec!["love*".into()] }])
            .unwrap()
    }

    #[test]
    fn precision_gate_excludes_below_threshold() {
        // "hug" in 5 units, 4 coded: prec .80 passes; "kiss" in 5, 3 coded: .60 fails
        let mut tuning = vec![];
        for i in 0..4 {
            tuning.push(post(&format!("a{i}"), "hug kiss love", &["bonding"]));
        }
        tuning.push(post("b0", "hug", &[]));
        tuning.push(post("b1", "kiss", &[]));
        tuning.push(post("b2", "kiss", &[]));
        tuning[3].tokens = vec!["hug".into(), "love".into()];
        let out = expand_seeds(&tuning, &model(), None, &ExpansionOptions::default()).unwrap();
        let terms: Vec<&str> = out.iter().map(|c| c.term.as_str()).collect();
        assert_eq!(terms, vec!["hug"]);
        assert_abs_diff_eq!(out[0].prec_proxy, 0.8);
    }

    #[test]
    fn just_below_threshold_is_excluded() {
        let opts = ExpansionOptions { min_support: 1, min_prec: 0.80, top_k: 10 };
        let c = ExpansionCandidate::compute("x", "c", 200, 100, 79, 90);
        assert!(c.prec_proxy < opts.min_prec);
    }

    #[test]
    fn empty_tuning_set_is_an_error() {
        assert!(expand_seeds(&[], &model(), None, &ExpansionOptions::default()).is_err());
    }

    #[test]
    fn existing_seeds_are_not_re_proposed() {
        let tuning: Vec<_> = (0..3).map(|i| post(&format!("a{i}"), "lovely bond", &["bonding"])).collect();
        let out = expand_seeds(&tuning, &model(), None, &ExpansionOptions::default()).unwrap();
        assert!(out.iter().all(|c| c.term != "lovely"));
        let sets = apply_expansion(model().sets(), &out);
        assert_eq!(sets[0].seeds, vec!["love*", "bond"]);
    }

    proptest! {
        #[test]
        fn score_monotone_in_overlap_and_idf(n_u in 2usize..200, n_t in 1usize..100, n_c in 1usize..100, k in 0usize..100) {
            let n_t = n_t.min(n_u);
            let k = k.min(n_t).min(n_c);
            let base = ExpansionCandidate::compute("t", "c", n_u, n_t, k, n_c);
            prop_assert!(base.score >= 0.0);
            prop_assert!((0.0..=1.0).contains(&base.prec_proxy) && (0.0..=1.0).contains(&base.rec_proxy));
            if k < n_t && k < n_c {
                let more = ExpansionCandidate::compute("t", "c", n_u, n_t, k + 1, n_c);
                prop_assert!(more.score >= base.score);
            }
            // larger universe raises IDF with other counts fixed
            let rarer = ExpansionCandidate::compute("t", "c", n_u + 10, n_t, k, n_c);
            prop_assert!(rarer.idf > base.idf);
            prop_assert!(rarer.score >= base.score);
        }
    }
}
