//! Collocation screening with Dunning's log-likelihood ratio.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::AnchoredUnit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigramParams {
    pub min_count: u64,
    pub min_users: usize,
    /// roughly the chi-square(1) 0.99 quantile
    pub min_llr: f64,
}

impl Default for BigramParams {
    fn default() -> Self {
        BigramParams { min_count: 3, min_users: 2, min_llr: 6.63 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigramCandidate {
    pub bigram: (String, String),
    pub count: u64,
    pub support_users: usize,
    pub llr: f64,
}

impl BigramCandidate {
    pub fn token(&self) -> String {
        bigram_token(&self.bigram.0, &self.bigram.1)
    }
}

pub fn bigram_token(a: &str, b: &str) -> String {
    format!("{a} {b}")
}

fn xlogx_over(k: f64, expected: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * (k / expected).ln()
    }
}

/// `2 * sum k_ij ln(k_ij / E_ij)` for a 2x2 table `[[k11, k12], [k21, k22]]`.
pub fn llr_2x2(k11: u64, k12: u64, k21: u64, k22: u64) -> f64 {
    let k = [k11 as f64, k12 as f64, k21 as f64, k22 as f64];
    let n: f64 = k.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    let rows = [k[0] + k[1], k[2] + k[3]];
    let cols = [k[0] + k[2], k[1] + k[3]];
    let mut g = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            g += xlogx_over(k[2 * i + j], rows[i] * cols[j] / n);
        }
    }
    (2.0 * g).max(0.0)
}

/// Adjacent pairs within each unit (never across units), kept when the count,
/// support and LLR gates all pass and at least one word is off the stoplist.
/// Sorted by LLR descending, then by bigram.
pub fn screen_bigrams(units: &[AnchoredUnit], params: &BigramParams, stoplist: &BTreeSet<String>) -> Vec<BigramCandidate> {
    let mut pair_counts: HashMap<(&str, &str), u64> = HashMap::new();
    let mut pair_users: HashMap<(&str, &str), BTreeSet<&str>> = HashMap::new();
    let mut left: HashMap<&str, u64> = HashMap::new();
    let mut right: HashMap<&str, u64> = HashMap::new();
    let mut total = 0u64;
    for u in units {
        for w in u.tokens.windows(2) {
            let key = (w[0].as_str(), w[1].as_str());
            *pair_counts.entry(key).or_insert(0) += 1;
            pair_users.entry(key).or_default().insert(u.support_key.as_str());
            *left.entry(key.0).or_insert(0) += 1;
            *right.entry(key.1).or_insert(0) += 1;
            total += 1;
        }
    }
    let mut out: Vec<BigramCandidate> = pair_counts
        .iter()
        .filter(|(&(a, b), &c)| {
            c >= params.min_count
                && pair_users[&(a, b)].len() >= params.min_users
                && !(stoplist.contains(a) && stoplist.contains(b))
        })
        .filter_map(|(&(a, b), &k11)| {
            let k12 = left[a] - k11;
            let k21 = right[b] - k11;
            let k22 = total - k11 - k12 - k21;
            let llr = llr_2x2(k11, k12, k21, k22);
            (llr >= params.min_llr).then(|| BigramCandidate {
                bigram: (a.to_string(), b.to_string()),
                count: k11,
                support_users: pair_users[&(a, b)].len(),
                llr,
            })
        })
        .collect();
    out.sort_by(|x, y| y.llr.total_cmp(&x.llr).then_with(|| x.bigram.cmp(&y.bigram)));
    out
}

/// Pair lookup for bigram-aware tokenization.
#[derive(Debug, Clone, Default)]
pub struct BigramSet {
    pairs: BTreeMap<String, BTreeSet<String>>,
}

impl BigramSet {
    pub fn new<'a>(pairs: impl IntoIterator<Item = &'a (String, String)>) -> Self {
        let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (a, b) in pairs {
            map.entry(a.clone()).or_default().insert(b.clone());
        }
        BigramSet { pairs: map }
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.pairs.get(a).is_some_and(|s| s.contains(b))
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Unigrams followed by the retained adjacent bigrams, as atomic tokens.
    pub fn expand(&self, tokens: &[String]) -> Vec<String> {
        let mut out = tokens.to_vec();
        if !self.is_empty() {
            out.extend(
                tokens
                    .windows(2)
                    .filter(|w| self.contains(&w[0], &w[1]))
                    .map(|w| bigram_token(&w[0], &w[1])),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn independence_gives_zero() {
        assert!(llr_2x2(10, 20, 30, 60) < 1e-9);
        assert!(llr_2x2(1, 1, 1, 1) < 1e-9);
    }

    #[test]
    fn perfect_association() {
        assert_abs_diff_eq!(llr_2x2(10, 0, 0, 10), 40.0 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(llr_2x2(10, 0, 0, 10), 27.726, epsilon = 1e-3);
    }

    fn unit(user: &str, text: &str) -> AnchoredUnit {
        AnchoredUnit {
            unit_id: format!("{user}-{text}"),
            support_key: user.into(),
            tokens: text.split(' ').map(str::to_owned).collect(),
            positive: false,
        }
    }

    #[test]
    fn single_user_bigram_is_rejected() {
        let units = vec![
            unit("u1", "with you always with you and with you"),
            unit("u2", "a b c d e f g h i j k l m n o p"),
        ];
        let out = screen_bigrams(&units, &BigramParams::default(), &BTreeSet::new());
        assert!(out.iter().all(|c| c.bigram != ("with".into(), "you".into())));
    }

    #[test]
    fn recurring_bigram_across_users_is_kept() {
        let mut units = Vec::new();
        for i in 0..4 {
            units.push(unit(&format!("u{i}"), "i said with you today"));
            units.push(unit(&format!("u{i}"), "alpha beta gamma delta epsilon zeta"));
        }
        let out = screen_bigrams(&units, &BigramParams::default(), &BTreeSet::new());
        let wy = out.iter().find(|c| c.bigram == ("with".into(), "you".into())).unwrap();
        assert_eq!(wy.count, 4);
        assert_eq!(wy.support_users, 4);
        assert!(wy.llr >= 6.63);
        let stop: BTreeSet<String> = ["with", "you"].iter().map(|s| s.to_string()).collect();
        let out = screen_bigrams(&units, &BigramParams::default(), &stop);
        assert!(out.iter().all(|c| c.bigram != ("with".into(), "you".into())));
    }

    #[test]
    fn no_cross_unit_pairs() {
        let units = vec![unit("u1", "x"), unit("u2", "y"), unit("u3", "x"), unit("u4", "y")];
        let params = BigramParams { min_count: 1, min_users: 1, min_llr: 0.0 };
        assert!(screen_bigrams(&units, &params, &BTreeSet::new()).is_empty());
    }

    #[test]
    fn expand_appends_bigram_tokens() {
        let pairs = vec![("with".to_string(), "you".to_string())];
        let set = BigramSet::new(&pairs);
        let toks: Vec<String> = "stay with you".split(' ').map(str::to_owned).collect();
        assert_eq!(set.expand(&toks), vec!["stay", "with", "you", "with you"]);
    }

    proptest! {
        #[test]
        fn llr_symmetries(a in 0u64..50, b in 0u64..50, c in 0u64..50, d in 0u64..50) {
            let base = llr_2x2(a, b, c, d);
            prop_assert!(base >= 0.0);
            prop_assert!((llr_2x2(c, d, a, b) - base).abs() < 1e-9);
            prop_assert!((llr_2x2(b, a, d, c) - base).abs() < 1e-9);
            prop_assert!((llr_2x2(a, c, b, d) - base).abs() < 1e-9);
        }

        #[test]
        fn proportional_rows_give_zero(a in 0u64..30, b in 0u64..30, m in 1u64..6) {
            prop_assert!(llr_2x2(a, b, a * m, b * m) < 1e-9);
        }
    }
}
