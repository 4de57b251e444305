//! Latent chat-side scores, prevalence-matched thresholds and the
//! explicit/latent/composite signal channels.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::discovery::{BigramSet, IndicatorSet};
use crate::lexicon::{ExplicitPresence, MpDimension, Side};
use crate::{Error, Result};

pub const DEFAULT_LAMBDA_MP: f64 = 0.50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentScore {
    pub unit_id: String,
    pub dimension: MpDimension,
    pub g: f64,
    pub length: usize,
    pub matched_tokens: BTreeSet<String>,
}

/// Compiled indicator lookup, shared across units.
#[derive(Debug, Clone)]
pub struct IndicatorIndex {
    dimension: MpDimension,
    weights: HashMap<String, f64>,
    bigrams: BigramSet,
}

impl IndicatorIndex {
    pub fn new(set: &IndicatorSet) -> Self {
        let pairs: Vec<(String, String)> = set
            .tokens
            .iter()
            .filter_map(|t| t.token.split_once(' ').map(|(a, b)| (a.to_owned(), b.to_owned())))
            .collect();
        IndicatorIndex {
            dimension: set.dimension,
            weights: set.tokens.iter().map(|t| (t.token.clone(), t.weight)).collect(),
            bigrams: BigramSet::new(&pairs),
        }
    }

    /// `sum of weights over present indicators / length^lambda`; 0 for empty units.
    pub fn score(&self, unit_id: &str, tokens: &[String], lambda_mp: f64) -> LatentScore {
        let length = tokens.len();
        let matched: BTreeSet<String> = if length == 0 {
            BTreeSet::new()
        } else {
            self.bigrams
                .expand(tokens)
                .into_iter()
                .filter(|t| self.weights.contains_key(t))
                .collect()
        };
        let g = if matched.is_empty() {
            0.0
        } else {
            let sum: f64 = matched.iter().map(|t| self.weights[t]).sum();
            sum / (length as f64).powf(lambda_mp)
        };
        LatentScore { unit_id: unit_id.to_owned(), dimension: self.dimension, g, length, matched_tokens: matched }
    }
}

pub fn latent_score(unit_id: &str, tokens: &[String], indicators: &IndicatorSet, lambda_mp: f64) -> LatentScore {
    IndicatorIndex::new(indicators).score(unit_id, tokens, lambda_mp)
}

/// Scores every chat unit of the corpus, in corpus order.
pub fn score_corpus(corpus: &Corpus, indicators: &IndicatorSet, lambda_mp: f64) -> Vec<LatentScore> {
    let index = IndicatorIndex::new(indicators);
    corpus
        .units
        .par_iter()
        .map(|u| index.score(&u.post_id, &u.chat.tokens, lambda_mp))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub dimension: MpDimension,
    /// `f64::INFINITY` when `pi == 0`; serialized as null
    #[serde(with = "finite_or_null")]
    pub kappa: f64,
    pub pi: f64,
}

impl Threshold {
    /// Latent-positive: nonempty unit with positive evidence reaching kappa.
    pub fn flags(&self, score: &LatentScore) -> bool {
        score.length > 0 && score.g > 0.0 && score.g >= self.kappa
    }
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Nearest-rank upper `(1 - pi)` quantile: the score at 0-based rank
/// `floor((1 - pi) n)` of the ascending scores. `pi * n` then lies between
/// the counts of scores above and at-or-above kappa.
pub fn calibrate_threshold(dimension: MpDimension, scores: &[f64], pi: f64) -> Result<Threshold> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot calibrate a threshold on no training scores"));
    }
    if !(0.0..=1.0).contains(&pi) {
        return Err(Error::invalid(format!("prevalence {pi} outside [0, 1]")));
    }
    if pi == 0.0 {
        return Ok(Threshold { dimension, kappa: f64::INFINITY, pi });
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let idx = (((1.0 - pi) * n as f64 + 1e-9).floor() as usize).min(n - 1);
    Ok(Threshold { dimension, kappa: sorted[idx], pi })
}

/// Which latent channel the overall dimension uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverallLatent {
    /// OR of the experience and agency latent bits
    #[default]
    Union,
    /// a separate indicator set discovered on overall anchors
    Trained,
}

/// Scores and latent bits for one dimension over a unit set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionLatent {
    pub dimension: MpDimension,
    pub threshold: Threshold,
    pub scores: Vec<LatentScore>,
    pub bits: Vec<bool>,
}

mod bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*b as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("expected 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MPSignal {
    pub unit_id: String,
    pub dimension: MpDimension,
    #[serde(with = "bit")]
    pub explicit: bool,
    #[serde(with = "bit")]
    pub latent: bool,
    #[serde(with = "bit")]
    pub composite: bool,
    pub g: f64,
}

/// Explicit positive rate among `train` units on the chat side.
pub fn training_prevalence(presence: &[ExplicitPresence], train: &BTreeSet<&str>, dim: MpDimension) -> f64 {
    let rows: Vec<&ExplicitPresence> = presence
        .iter()
        .filter(|p| p.side == Side::Chat && train.contains(p.unit_id.as_str()))
        .collect();
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|p| p.bit(dim)).count() as f64 / rows.len() as f64
}

/// Scores the corpus, calibrates kappa on the indicator set's training units
/// (all units when none are recorded) and flags latent positives.
pub fn latent_channel(
    corpus: &Corpus,
    presence: &[ExplicitPresence],
    indicators: &IndicatorSet,
    lambda_mp: f64,
) -> Result<DimensionLatent> {
    let dim = indicators.dimension;
    let scores = score_corpus(corpus, indicators, lambda_mp);
    let train: BTreeSet<&str> = if indicators.train_units.is_empty() {
        corpus.units.iter().map(|u| u.post_id.as_str()).collect()
    } else {
        indicators.train_units.iter().map(String::as_str).collect()
    };
    let pi = training_prevalence(presence, &train, dim);
    let train_scores: Vec<f64> = scores.iter().filter(|s| train.contains(s.unit_id.as_str())).map(|s| s.g).collect();
    let threshold = calibrate_threshold(dim, &train_scores, pi)?;
    let bits = scores.iter().map(|s| threshold.flags(s)).collect();
    Ok(DimensionLatent { dimension: dim, threshold, scores, bits })
}

/// Explicit, latent and composite channels per unit for experience, agency
/// and overall, in presence order. Every latent input must cover exactly the
/// chat-side presence units.
pub fn composite_signal(
    presence: &[ExplicitPresence],
    latents: &[DimensionLatent],
    mode: OverallLatent,
) -> Result<Vec<MPSignal>> {
    let chat: Vec<&ExplicitPresence> = presence.iter().filter(|p| p.side == Side::Chat).collect();
    let ids: BTreeSet<&str> = chat.iter().map(|p| p.unit_id.as_str()).collect();
    let mut by_dim: BTreeMap<MpDimension, HashMap<&str, (bool, f64)>> = BTreeMap::new();
    for l in latents {
        if l.scores.len() != l.bits.len() {
            return Err(Error::invalid("latent scores and bits differ in length"));
        }
        let map: HashMap<&str, (bool, f64)> =
            l.scores.iter().zip(&l.bits).map(|(s, &b)| (s.unit_id.as_str(), (b, s.g))).collect();
        let theirs: BTreeSet<&str> = map.keys().copied().collect();
        if theirs != ids || map.len() != l.scores.len() {
            return Err(Error::invalid(format!(
                "unit set of {} latent scores does not match the explicit presence units",
                l.dimension.as_str()
            )));
        }
        by_dim.insert(l.dimension, map);
    }
    let need = |d: MpDimension| {
        by_dim
            .get(&d)
            .ok_or_else(|| Error::invalid(format!("missing latent channel for {}", d.as_str())))
    };
    let exp = need(MpDimension::Experience)?;
    let agn = need(MpDimension::Agency)?;
    let trained = match mode {
        OverallLatent::Union => None,
        OverallLatent::Trained => Some(need(MpDimension::Overall)?),
    };

    let mut out = Vec::with_capacity(chat.len() * 3);
    for p in chat {
        let id = p.unit_id.as_str();
        let (le, ge) = exp[id];
        let (la, ga) = agn[id];
        let (lo, go) = match trained {
            Some(m) => m[id],
            None => (le || la, ge + ga),
        };
        for (dim, latent, g) in [
            (MpDimension::Experience, le, ge),
            (MpDimension::Agency, la, ga),
            (MpDimension::Overall, lo, go),
        ] {
            let explicit = p.bit(dim);
            out.push(MPSignal { unit_id: id.to_owned(), dimension: dim, explicit, latent, composite: explicit || latent, g });
        }
    }
    Ok(out)
}

/// Outcome channel of a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Explicit,
    Induced,
    Composite,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Explicit, Channel::Induced, Channel::Composite];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Explicit => "explicit",
            Channel::Induced => "induced",
            Channel::Composite => "composite",
        }
    }

    pub fn of(self, s: &MPSignal) -> bool {
        match self {
            Channel::Explicit => s.explicit,
            Channel::Induced => s.latent,
            Channel::Composite => s.composite,
        }
    }
}

/// Per-unit outcome vectors, aligned with `unit_ids`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Outcomes {
    pub unit_ids: Vec<String>,
    pub vectors: BTreeMap<String, Vec<bool>>,
}

impl Outcomes {
    pub fn key(channel: Channel, dim: MpDimension) -> String {
        format!("{}_{}", channel.as_str(), dim.as_str())
    }

    pub fn get(&self, channel: Channel, dim: MpDimension) -> Option<&[bool]> {
        self.vectors.get(&Self::key(channel, dim)).map(Vec::as_slice)
    }
}

/// All channel/dimension outcome vectors, units in first-seen order.
pub fn decompose_dimensions(signals: &[MPSignal]) -> Outcomes {
    let mut unit_ids: Vec<String> = Vec::new();
    let mut pos: HashMap<&str, usize> = HashMap::new();
    for s in signals {
        if !pos.contains_key(s.unit_id.as_str()) {
            pos.insert(&s.unit_id, unit_ids.len());
            unit_ids.push(s.unit_id.clone());
        }
    }
    let mut vectors = BTreeMap::new();
    for c in Channel::ALL {
        for d in MpDimension::ALL {
            vectors.insert(Outcomes::key(c, d), vec![false; unit_ids.len()]);
        }
    }
    for s in signals {
        let i = pos[s.unit_id.as_str()];
        for c in Channel::ALL {
            vectors.get_mut(&Outcomes::key(c, s.dimension)).unwrap()[i] = c.of(s);
        }
    }
    Outcomes { unit_ids, vectors }
}
