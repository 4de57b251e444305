//! Descriptive summaries and adjusted associations.

mod logit;
mod tables;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use logit::{
    collinear_columns, fit_logistic, fit_model, robust_cov, CovKind, FitOptions, LogitFit, LogitModel,
};
pub use tables::{association_tables, AssociationRow, AssociationTables, ChannelCell, Estimate, Level, Taxonomy};

use crate::{Error, Result};

/// Two-sided 95% normal critical value.
pub const Z_975: f64 = 1.959964;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub dimension: String,
    pub post_terms: BTreeSet<String>,
    pub chat_terms: BTreeSet<String>,
    pub jaccard: f64,
}

/// `|a & b| / |a | b|`, and 1 when both sets are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn jaccard_overlap(dimension: &str, post_terms: BTreeSet<String>, chat_terms: BTreeSet<String>) -> OverlapSummary {
    let jaccard = jaccard(&post_terms, &chat_terms);
    OverlapSummary { dimension: dimension.to_owned(), post_terms, chat_terms, jaccard }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSummary {
    pub context: String,
    pub total: u64,
    pub n_terms: usize,
    pub hhi: f64,
    pub k: usize,
    pub top_k_share: f64,
    pub top_terms: Vec<(String, u64)>,
}

/// Terms by descending count, ties by name.
pub fn ranked_terms(hits: &BTreeMap<String, u64>) -> Vec<(String, u64)> {
    let mut v: Vec<(String, u64)> = hits.iter().filter(|(_, &c)| c > 0).map(|(t, &c)| (t.clone(), c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Herfindahl index of term shares and the share held by the `k` most frequent terms.
pub fn concentration(context: &str, hits: &BTreeMap<String, u64>, k: usize) -> Result<ConcentrationSummary> {
    let total: u64 = hits.values().sum();
    if total == 0 {
        return Err(Error::invalid(format!("{context}: no hits to summarize")));
    }
    let ranked = ranked_terms(hits);
    let t = total as f64;
    let hhi = ranked.iter().map(|(_, c)| (*c as f64 / t).powi(2)).sum();
    let top: Vec<(String, u64)> = ranked.iter().take(k).cloned().collect();
    let top_k_share = top.iter().map(|(_, c)| *c).sum::<u64>() as f64 / t;
    Ok(ConcentrationSummary {
        context: context.to_owned(),
        total,
        n_terms: ranked.len(),
        hhi,
        k,
        top_k_share,
        top_terms: top,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilsonCI {
    pub x: u64,
    pub n: u64,
    pub p_hat: f64,
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    pub z: f64,
}

/// Wilson score interval at `z = 1.959964`.
pub fn wilson_interval(x: u64, n: u64) -> Result<WilsonCI> {
    wilson_interval_z(x, n, Z_975)
}

pub fn wilson_interval_z(x: u64, n: u64, z: f64) -> Result<WilsonCI> {
    if n == 0 {
        return Err(Error::invalid("Wilson interval needs n >= 1"));
    }
    if x > n {
        return Err(Error::invalid(format!("successes {x} exceed trials {n}")));
    }
    let nf = n as f64;
    let p = x as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if x == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if x == n { 1.0 } else { (center + half).min(1.0) };
    Ok(WilsonCI { x, n, p_hat: p, center, lo, hi, z })
}
