//! Chat-side indicator discovery.
//!
//! Units are anchored on validated explicit terms, split into a user-grouped
//! training and holdout part, and screened in four passes: log-odds gates on
//! training, user-level stability subsampling, holdout replication, and
//! weighting by `max(z, 0)`.

mod bigram;
mod logodds;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bigram::{bigram_token, llr_2x2, screen_bigrams, BigramCandidate, BigramParams, BigramSet};
pub use logodds::{log_odds_z, SmoothedTotals, TokenStats, DEFAULT_ALPHA};

use crate::corpus::Corpus;
use crate::lexicon::{ExplicitPresence, MpDimension, Side};
use crate::seed::{derive_seed, rng_for, stream};
use crate::{Error, Result};

/// A chat unit labeled by whether it carries validated explicit terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredUnit {
    pub unit_id: String,
    pub support_key: String,
    pub tokens: Vec<String>,
    pub positive: bool,
}

/// Chat units with the positive class taken from chat-side explicit presence.
pub fn anchor_units(corpus: &Corpus, presence: &[ExplicitPresence], dim: MpDimension) -> Result<Vec<AnchoredUnit>> {
    let chat: HashMap<&str, &ExplicitPresence> = presence
        .iter()
        .filter(|p| p.side == Side::Chat)
        .map(|p| (p.unit_id.as_str(), p))
        .collect();
    corpus
        .units
        .iter()
        .map(|u| {
            let p = chat
                .get(u.post_id.as_str())
                .ok_or_else(|| Error::invalid(format!("no chat-side presence for unit {}", u.post_id)))?;
            Ok(AnchoredUnit {
                unit_id: u.post_id.clone(),
                support_key: u.support_key(),
                tokens: u.chat.tokens.clone(),
                positive: p.bit(dim),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    pub alpha_smooth: f64,
    pub z_min: f64,
    pub min_support_users: usize,
    pub iterations: usize,
    pub subsample_frac: f64,
    pub min_stab: f64,
    pub holdout_frac: f64,
    pub bigrams: bool,
    pub bigram: BigramParams,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            alpha_smooth: DEFAULT_ALPHA,
            z_min: 1.96,
            min_support_users: 2,
            iterations: 80,
            subsample_frac: 0.80,
            min_stab: 0.60,
            holdout_frac: 0.30,
            bigrams: true,
            bigram: BigramParams::default(),
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.alpha_smooth > 0.0) {
            return Err(Error::invalid("alpha_smooth must be > 0"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("stability iterations must be >= 1"));
        }
        if !(self.subsample_frac > 0.0 && unit(self.subsample_frac)) || !unit(self.min_stab) {
            return Err(Error::invalid("subsample_frac and min_stab must lie in [0, 1]"));
        }
        if !(self.holdout_frac > 0.0 && self.holdout_frac < 1.0) {
            return Err(Error::invalid("holdout_frac must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Direction, z and support gates.
    pub fn passes(&self, delta: f64, z: f64, support: usize) -> bool {
        delta > 0.0 && z > self.z_min && support >= self.min_support_users
    }
}

/// Interned per-unit token counts with support-group indices.
#[derive(Debug, Clone)]
pub struct TokenTable {
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    units: Vec<Vec<(u32, u32)>>,
    groups: Vec<u32>,
    group_keys: Vec<String>,
    positive: Vec<bool>,
}

/// Class counts and smoothed statistics over one subset of units.
#[derive(Debug, Clone)]
pub struct SubsetStats {
    pub x_pos: Vec<u64>,
    pub x_neg: Vec<u64>,
    pub support_pos: Vec<usize>,
    pub totals: SmoothedTotals,
    pub n_pos_units: usize,
}

impl SubsetStats {
    pub fn stats(&self, tid: usize, token: &str) -> TokenStats {
        let (delta, z) = self.totals.delta_z(self.x_pos[tid], self.x_neg[tid]);
        TokenStats {
            token: token.to_owned(),
            x_pos: self.x_pos[tid],
            x_neg: self.x_neg[tid],
            delta,
            z,
            support_pos: self.support_pos[tid],
        }
    }
}

impl TokenTable {
    /// Builds the table from per-unit token lists, expanded with `bigrams`.
    pub fn new(units: &[AnchoredUnit], bigrams: &BigramSet) -> Self {
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut vocab = Vec::new();
        let mut group_ix: HashMap<&str, u32> = HashMap::new();
        let mut group_keys = Vec::new();
        let mut rows = Vec::with_capacity(units.len());
        let mut groups = Vec::with_capacity(units.len());
        for u in units {
            let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
            for tok in bigrams.expand(&u.tokens) {
                let next = vocab.len() as u32;
                let id = *index.entry(tok.clone()).or_insert_with(|| {
                    vocab.push(tok);
                    next
                });
                *counts.entry(id).or_insert(0) += 1;
            }
            rows.push(counts.into_iter().collect());
            let next = group_keys.len() as u32;
            let g = *group_ix.entry(u.support_key.as_str()).or_insert_with(|| {
                group_keys.push(u.support_key.clone());
                next
            });
            groups.push(g);
        }
        TokenTable {
            vocab,
            index,
            units: rows,
            groups,
            group_keys,
            positive: units.iter().map(|u| u.positive).collect(),
        }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn token_id(&self, token: &str) -> Option<usize> {
        self.index.get(token).map(|&i| i as usize)
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_keys.len()
    }

    pub fn group_of(&self, unit: usize) -> usize {
        self.groups[unit] as usize
    }

    pub fn group_key(&self, group: usize) -> &str {
        &self.group_keys[group]
    }

    /// Units belonging to any of `groups`, in corpus order.
    pub fn units_in_groups(&self, groups: &BTreeSet<usize>) -> Vec<usize> {
        (0..self.units.len()).filter(|&i| groups.contains(&self.group_of(i))).collect()
    }

    /// Counts over `subset`; the smoothing universe is every token seen in it.
    pub fn subset_stats(&self, subset: &[usize], alpha: f64) -> SubsetStats {
        let v = self.vocab.len();
        let mut x_pos = vec![0u64; v];
        let mut x_neg = vec![0u64; v];
        let mut support_pos = vec![0usize; v];
        let mut last_group = vec![u32::MAX; v];
        let mut ordered = subset.to_vec();
        ordered.sort_by_key(|&i| (self.groups[i], i));
        let mut n_pos_units = 0;
        for &i in &ordered {
            let pos = self.positive[i];
            n_pos_units += pos as usize;
            let g = self.groups[i];
            for &(t, c) in &self.units[i] {
                let t = t as usize;
                if pos {
                    x_pos[t] += c as u64;
                    if last_group[t] != g {
                        last_group[t] = g;
                        support_pos[t] += 1;
                    }
                } else {
                    x_neg[t] += c as u64;
                }
            }
        }
        let universe = (0..v).filter(|&t| x_pos[t] + x_neg[t] > 0).count();
        let totals = SmoothedTotals::new(x_pos.iter().sum(), x_neg.iter().sum(), universe, alpha);
        SubsetStats { x_pos, x_neg, support_pos, totals, n_pos_units }
    }
}

/// User-grouped train/holdout partition of unit indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
    /// false when the split fell back to single units as groups
    pub user_grouped: bool,
}

/// Assigns `ceil(frac * n_groups)` support groups (at least one, leaving at
/// least one for training) to the holdout side.
pub fn grouped_split(table: &TokenTable, frac: f64, seed: u64, warnings: &mut Vec<String>) -> Split {
    let n_units = table.n_units();
    let user_grouped = table.n_groups() >= 2;
    let n = if user_grouped { table.n_groups() } else { n_units };
    if !user_grouped && n_units >= 2 {
        warnings.push(warn_msg("single support user; holdout split falls back to unit grouping"));
    }
    if n < 2 {
        warnings.push(warn_msg("fewer than two groups; holdout split is empty"));
        return Split { train: (0..n_units).collect(), holdout: Vec::new(), user_grouped };
    }
    let k = ((frac * n as f64).ceil() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, stream::HOLDOUT, 0));
    let held: BTreeSet<usize> = order[..k].iter().copied().collect();
    let key = |i: usize| if user_grouped { table.group_of(i) } else { i };
    let (holdout, train) = (0..n_units).partition(|&i| held.contains(&key(i)));
    Split { train, holdout, user_grouped }
}

fn warn_msg(msg: &str) -> String {
    warn!("{msg}");
    msg.to_owned()
}

/// Training tokens passing direction, z and support gates.
pub fn gate_candidates(table: &TokenTable, train: &[usize], cfg: &DiscoveryConfig) -> Vec<TokenStats> {
    let stats = table.subset_stats(train, cfg.alpha_smooth);
    let mut out: Vec<TokenStats> = (0..table.vocab.len())
        .filter(|&t| stats.x_pos[t] + stats.x_neg[t] > 0)
        .map(|t| stats.stats(t, &table.vocab[t]))
        .filter(|s| cfg.passes(s.delta, s.z, s.support_pos))
        .collect();
    out.sort_by(|a, b| a.token.cmp(&b.token));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub token: String,
    pub stab: f64,
    pub selected: usize,
    pub iterations: usize,
}

/// Support groups drawn for stability iteration `b`: `floor(frac * n)` of the
/// training groups (at least one), sampled without replacement.
pub fn stability_subsample(train_groups: &[usize], frac: f64, seed: u64, b: usize) -> Vec<usize> {
    let n = train_groups.len();
    let k = ((frac * n as f64).floor() as usize).clamp(1, n.max(1));
    let mut rng = rng_for(seed, stream::STABILITY, b as u64);
    let mut picked: Vec<usize> = train_groups.choose_multiple(&mut rng, k).copied().collect();
    picked.sort_unstable();
    picked
}

fn groups_of(table: &TokenTable, units: &[usize]) -> Vec<usize> {
    let set: BTreeSet<usize> = units.iter().map(|&i| table.group_of(i)).collect();
    set.into_iter().collect()
}

/// Share of `iterations` user subsamples in which each candidate re-passes
/// the three training gates. Iterations run in parallel with per-iteration
/// sub-seeds, so the result does not depend on the thread count.
pub fn stability_select(
    table: &TokenTable,
    candidates: &[TokenStats],
    train: &[usize],
    cfg: &DiscoveryConfig,
    seed: u64,
    warnings: &mut Vec<String>,
) -> Vec<StabilityReport> {
    let train_groups = groups_of(table, train);
    let degenerate = train_groups.len() < 2;
    if degenerate {
        warnings.push(warn_msg("fewer than two support users; stability uses the full sample"));
    }
    let ids: Vec<Option<usize>> = candidates.iter().map(|c| table.token_id(&c.token)).collect();
    let counts = (0..cfg.iterations)
        .into_par_iter()
        .map(|b| {
            let subset = if degenerate {
                train.to_vec()
            } else {
                let groups: BTreeSet<usize> =
                    stability_subsample(&train_groups, cfg.subsample_frac, seed, b).into_iter().collect();
                train.iter().copied().filter(|&i| groups.contains(&table.group_of(i))).collect()
            };
            let stats = table.subset_stats(&subset, cfg.alpha_smooth);
            ids.iter()
                .map(|id| {
                    id.is_some_and(|t| {
                        let s = stats.stats(t, "");
                        stats.x_pos[t] + stats.x_neg[t] > 0 && cfg.passes(s.delta, s.z, s.support_pos)
                    }) as usize
                })
                .collect::<Vec<usize>>()
        })
        .reduce(
            || vec![0; candidates.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    candidates
        .iter()
        .zip(counts)
        .map(|(c, selected)| StabilityReport {
            token: c.token.clone(),
            stab: selected as f64 / cfg.iterations as f64,
            selected,
            iterations: cfg.iterations,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutCheck {
    pub token: String,
    pub delta_hold: f64,
    pub support_hold: usize,
    pub retained: bool,
}

/// Replication on the holdout units: `delta > 0` and positive support of at
/// least `min_support_users`.
pub fn holdout_replicate(
    table: &TokenTable,
    tokens: &[String],
    holdout: &[usize],
    cfg: &DiscoveryConfig,
    warnings: &mut Vec<String>,
) -> Vec<HoldoutCheck> {
    let stats = table.subset_stats(holdout, cfg.alpha_smooth);
    let no_positive = stats.n_pos_units == 0;
    if no_positive {
        warnings.push(warn_msg("holdout has no positive units; every candidate is rejected"));
    }
    tokens
        .iter()
        .map(|tok| {
            let (delta_hold, support_hold) = match table.token_id(tok) {
                Some(t) => (stats.totals.delta_z(stats.x_pos[t], stats.x_neg[t]).0, stats.support_pos[t]),
                None => (0.0, 0),
            };
            HoldoutCheck {
                token: tok.clone(),
                delta_hold,
                support_hold,
                retained: !no_positive && delta_hold > 0.0 && support_hold >= cfg.min_support_users,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorToken {
    pub token: String,
    pub z: f64,
    pub weight: f64,
    pub stab: f64,
}

/// Retained indicators with weights `max(z, 0)` from training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSet {
    pub dimension: MpDimension,
    pub alpha: f64,
    pub tokens: Vec<IndicatorToken>,
    /// training units used for threshold calibration
    #[serde(default)]
    pub train_units: Vec<String>,
}

impl IndicatorSet {
    pub fn empty(dimension: MpDimension, alpha: f64) -> Self {
        IndicatorSet { dimension, alpha, tokens: Vec::new(), train_units: Vec::new() }
    }

    pub fn weights(&self) -> BTreeMap<&str, f64> {
        self.tokens.iter().map(|t| (t.token.as_str(), t.weight)).collect()
    }

    pub fn token_set(&self) -> BTreeSet<&str> {
        self.tokens.iter().map(|t| t.token.as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Tokens sorted by descending weight, then by name.
pub fn build_indicator_set(
    dimension: MpDimension,
    alpha: f64,
    training: &[TokenStats],
    stability: &[StabilityReport],
    survivors: &BTreeSet<String>,
) -> IndicatorSet {
    if survivors.is_empty() {
        warn!("no indicator survived discovery for {}", dimension.as_str());
    }
    let stab: HashMap<&str, f64> = stability.iter().map(|s| (s.token.as_str(), s.stab)).collect();
    let mut tokens: Vec<IndicatorToken> = training
        .iter()
        .filter(|s| survivors.contains(&s.token) && s.z > 0.0)
        .map(|s| IndicatorToken {
            token: s.token.clone(),
            z: s.z,
            weight: s.z.max(0.0),
            stab: stab.get(s.token.as_str()).copied().unwrap_or(0.0),
        })
        .collect();
    tokens.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.token.cmp(&b.token)));
    IndicatorSet { dimension, alpha, tokens, train_units: Vec::new() }
}

/// Everything a discovery run produced, kept for auditing.
#[derive(Debug, Clone, Serialize)]
pub struct DiscoveryOutcome {
    pub indicators: IndicatorSet,
    pub bigrams: Vec<BigramCandidate>,
    pub candidates: Vec<TokenStats>,
    pub stability: Vec<StabilityReport>,
    pub holdout: Vec<HoldoutCheck>,
    pub split: Split,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl DiscoveryOutcome {
    pub fn retained(&self) -> BTreeSet<String> {
        self.indicators.tokens.iter().map(|t| t.token.clone()).collect()
    }
}

/// Full discovery run for one dimension.
pub fn discover(
    units: &[AnchoredUnit],
    dimension: MpDimension,
    cfg: &DiscoveryConfig,
    stoplist: &BTreeSet<String>,
    seed: u64,
) -> Result<DiscoveryOutcome> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let base = TokenTable::new(units, &BigramSet::default());
    let split = grouped_split(&base, cfg.holdout_frac, seed, &mut warnings);

    let bigrams = if cfg.bigrams {
        let train_units: Vec<AnchoredUnit> = split.train.iter().map(|&i| units[i].clone()).collect();
        screen_bigrams(&train_units, &cfg.bigram, stoplist)
    } else {
        Vec::new()
    };
    let pairs: Vec<(String, String)> = bigrams.iter().map(|b| b.bigram.clone()).collect();
    let set = BigramSet::new(&pairs);
    let table = if set.is_empty() { base } else { TokenTable::new(units, &set) };

    let candidates = gate_candidates(&table, &split.train, cfg);
    let stability = stability_select(&table, &candidates, &split.train, cfg, seed, &mut warnings);
    let stable: Vec<String> = stability
        .iter()
        .filter(|s| s.stab >= cfg.min_stab)
        .map(|s| s.token.clone())
        .collect();
    let holdout = holdout_replicate(&table, &stable, &split.holdout, cfg, &mut warnings);
    let survivors: BTreeSet<String> = holdout.iter().filter(|h| h.retained).map(|h| h.token.clone()).collect();

    let mut indicators = build_indicator_set(dimension, cfg.alpha_smooth, &candidates, &stability, &survivors);
    indicators.train_units = split.train.iter().map(|&i| units[i].unit_id.clone()).collect();
    Ok(DiscoveryOutcome { indicators, bigrams, candidates, stability, holdout, split, seed, warnings })
}

/// Gate violations found by [`audit_gates`].
#[derive(Debug, Clone, PartialEq)]
pub struct GateViolation {
    pub token: String,
    pub gate: &'static str,
}

fn class_maps(units: &[AnchoredUnit], subset: &[usize], set: &BigramSet) -> (BTreeMap<String, u64>, BTreeMap<String, u64>, BTreeMap<String, BTreeSet<String>>) {
    let mut pos = BTreeMap::new();
    let mut neg = BTreeMap::new();
    let mut support: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for &i in subset {
        let u = &units[i];
        for t in set.expand(&u.tokens) {
            let side = if u.positive { &mut pos } else { &mut neg };
            *side.entry(t.clone()).or_insert(0u64) += 1;
            if u.positive {
                support.entry(t).or_default().insert(u.support_key.clone());
            }
        }
    }
    (pos, neg, support)
}

/// Re-derives every gate for every retained token through the map-based
/// statistics path, independent of [`TokenTable`].
pub fn audit_gates(units: &[AnchoredUnit], outcome: &DiscoveryOutcome, cfg: &DiscoveryConfig) -> Vec<GateViolation> {
    let pairs: Vec<(String, String)> = outcome.bigrams.iter().map(|b| b.bigram.clone()).collect();
    let set = BigramSet::new(&pairs);
    let eval = |subset: &[usize]| {
        let (pos, neg, support) = class_maps(units, subset, &set);
        let stats: HashMap<String, TokenStats> = log_odds_z(&pos, &neg, cfg.alpha_smooth)
            .into_iter()
            .map(|mut s| {
                s.support_pos = support.get(&s.token).map_or(0, |x| x.len());
                (s.token.clone(), s)
            })
            .collect();
        stats
    };
    let train = eval(&outcome.split.train);
    let hold = eval(&outcome.split.holdout);
    let hold_has_pos = outcome.split.holdout.iter().any(|&i| units[i].positive);

    // groups are numbered by first appearance in `units`
    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    for u in units {
        let next = first_seen.len();
        first_seen.entry(u.support_key.as_str()).or_insert(next);
    }
    let train_groups: BTreeSet<usize> =
        outcome.split.train.iter().map(|&i| first_seen[units[i].support_key.as_str()]).collect();
    let index: Vec<usize> = train_groups.into_iter().collect();
    let degenerate = index.len() < 2;
    let iteration_stats: Vec<HashMap<String, TokenStats>> = (0..cfg.iterations)
        .map(|b| {
            let subset: Vec<usize> = if degenerate {
                outcome.split.train.clone()
            } else {
                let picked: BTreeSet<usize> =
                    stability_subsample(&index, cfg.subsample_frac, outcome.seed, b).into_iter().collect();
                outcome
                    .split
                    .train
                    .iter()
                    .copied()
                    .filter(|&i| picked.contains(&first_seen[units[i].support_key.as_str()]))
                    .collect()
            };
            eval(&subset)
        })
        .collect();

    let mut out = Vec::new();
    let mut flag = |token: &str, gate: &'static str| out.push(GateViolation { token: token.to_owned(), gate });
    for it in &outcome.indicators.tokens {
        let tok = it.token.as_str();
        let Some(s) = train.get(tok) else {
            flag(tok, "present");
            continue;
        };
        if !(s.delta > 0.0) {
            flag(tok, "direction");
        }
        if !(s.z > cfg.z_min) {
            flag(tok, "z");
        }
        if s.support_pos < cfg.min_support_users {
            flag(tok, "support");
        }
        if (it.weight - s.z.max(0.0)).abs() > 1e-9 || !(it.weight > 0.0) {
            flag(tok, "weight");
        }
        let passes = iteration_stats
            .iter()
            .filter(|m| m.get(tok).is_some_and(|x| cfg.passes(x.delta, x.z, x.support_pos)))
            .count();
        let stab = passes as f64 / cfg.iterations as f64;
        if stab < cfg.min_stab || (stab - it.stab).abs() > 1e-12 {
            flag(tok, "stability");
        }
        let held = hold.get(tok);
        if !hold_has_pos || !held.is_some_and(|h| h.delta > 0.0 && h.support_pos >= cfg.min_support_users) {
            flag(tok, "holdout");
        }
    }
    out
}

/// Sub-seed for a named discovery run, so dimensions draw independent splits.
pub fn dimension_seed(master: u64, dim: MpDimension) -> u64 {
    let ix = MpDimension::ALL.iter().position(|&d| d == dim).unwrap_or(0) as u64;
    derive_seed(master, stream::HOLDOUT ^ stream::STABILITY, ix)
}
