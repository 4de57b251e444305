//! Table 1 and Table 2 shaped reports with fixed display precision:
//! percentages 1 decimal, log-odds 2, HHI and Jaccard 3.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::lexicon::{Dimension, ExplicitPresence, Side};
use crate::stats::{concentration, jaccard_overlap, AssociationTables, Level, WilsonCI};
use crate::{Error, Result};

pub fn round_to(x: f64, decimals: usize) -> f64 {
    format!("{x:.decimals$}").parse().expect("formatted float parses")
}

fn pct(x: f64) -> f64 {
    round_to(100.0 * x, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub master_seed: Option<u64>,
    pub config_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Cell {
    pub side: Side,
    pub dimension: Dimension,
    pub units: usize,
    pub positive_units: usize,
    pub pct: f64,
    pub n_terms: usize,
    pub hits: u64,
    pub hhi: Option<f64>,
    pub top_k: usize,
    pub top_k_share_pct: Option<f64>,
    /// descending count, ties by term
    pub terms: Vec<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideSummary {
    pub side: Side,
    pub units: usize,
    pub any_mp_units: usize,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JaccardRow {
    pub dimension: Dimension,
    pub post_terms: usize,
    pub chat_terms: usize,
    pub shared: usize,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub run: RunInfo,
    pub cells: Vec<Table1Cell>,
    pub sides: Vec<SideSummary>,
    pub jaccard: Vec<JaccardRow>,
}

/// Term frequencies, concentration and post/chat overlap of accepted hits.
pub fn table1(presence: &[ExplicitPresence], top_k: usize, run: RunInfo) -> Result<Table1Report> {
    let mut cells = Vec::new();
    let mut sides = Vec::new();
    let mut term_sets: BTreeMap<(Side, Dimension), BTreeSet<String>> = BTreeMap::new();
    for side in [Side::Post, Side::Chat] {
        let rows: Vec<&ExplicitPresence> = presence.iter().filter(|p| p.side == side).collect();
        let any = rows.iter().filter(|p| p.y_overall).count();
        sides.push(SideSummary {
            side,
            units: rows.len(),
            any_mp_units: any,
            pct: if rows.is_empty() { 0.0 } else { pct(any as f64 / rows.len() as f64) },
        });
        for dim in Dimension::ALL {
            let mut counts: BTreeMap<String, u64> = BTreeMap::new();
            for p in &rows {
                for (t, &c) in p.terms(dim) {
                    *counts.entry(t.clone()).or_insert(0) += c as u64;
                }
            }
            let positive = rows.iter().filter(|p| p.get(dim)).count();
            let hits: u64 = counts.values().sum();
            let (hhi, share, terms) = if hits > 0 {
                let c = concentration(&format!("{}/{}", side.as_str(), dim.as_str()), &counts, top_k)?;
                (Some(round_to(c.hhi, 3)), Some(pct(c.top_k_share)), crate::stats::ranked_terms(&counts))
            } else {
                (None, None, Vec::new())
            };
            term_sets.insert((side, dim), counts.keys().cloned().collect());
            cells.push(Table1Cell {
                side,
                dimension: dim,
                units: rows.len(),
                positive_units: positive,
                pct: if rows.is_empty() { 0.0 } else { pct(positive as f64 / rows.len() as f64) },
                n_terms: counts.len(),
                hits,
                hhi,
                top_k,
                top_k_share_pct: share,
                terms,
            });
        }
    }
    let jaccard = Dimension::ALL
        .iter()
        .map(|&dim| {
            let post = term_sets.remove(&(Side::Post, dim)).unwrap_or_default();
            let chat = term_sets.remove(&(Side::Chat, dim)).unwrap_or_default();
            let shared = post.intersection(&chat).count();
            let o = jaccard_overlap(dim.as_str(), post, chat);
            JaccardRow {
                dimension: dim,
                post_terms: o.post_terms.len(),
                chat_terms: o.chat_terms.len(),
                shared,
                jaccard: round_to(o.jaccard, 3),
            }
        })
        .collect();
    Ok(Table1Report { run, cells, sides, jaccard })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PctCI {
    pub pct: f64,
    pub lo: f64,
    pub hi: f64,
}

impl From<&WilsonCI> for PctCI {
    fn from(w: &WilsonCI) -> Self {
        PctCI { pct: pct(w.p_hat), lo: pct(w.lo), hi: pct(w.hi) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogOddsCI {
    pub est: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Cell {
    pub channel: String,
    pub x: u64,
    pub rate: Option<PctCI>,
    pub log_odds: Option<LogOddsCI>,
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub level: Level,
    pub theme: String,
    pub name: String,
    pub n: u64,
    pub prevalence: Option<PctCI>,
    pub cells: Vec<Table2Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Report {
    pub run: RunInfo,
    pub n_units: usize,
    pub channels: Vec<String>,
    pub rows: Vec<Table2Row>,
}

pub fn table2(tables: &AssociationTables, run: RunInfo) -> Table2Report {
    let rows = tables
        .rows
        .iter()
        .map(|r| Table2Row {
            level: r.level,
            theme: r.theme.clone(),
            name: r.name.clone(),
            n: r.n,
            prevalence: r.prevalence.as_ref().map(PctCI::from),
            cells: r
                .cells
                .iter()
                .map(|c| Table2Cell {
                    channel: c.channel.clone(),
                    x: c.x,
                    rate: c.rate.as_ref().map(PctCI::from),
                    log_odds: c.log_odds.map(|e| LogOddsCI {
                        est: round_to(e.est, 2),
                        lo: round_to(e.lo, 2),
                        hi: round_to(e.hi, 2),
                    }),
                    flag: c.flag.clone(),
                })
                .collect(),
        })
        .collect();
    Table2Report { run, n_units: tables.n_units, channels: tables.channels.clone(), rows }
}

fn opt(x: Option<f64>, decimals: usize) -> String {
    x.map(|v| format!("{v:.decimals$}")).unwrap_or_default()
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::invalid(format!("csv buffer: {e}")))
}

pub fn table1_terms_csv(t: &Table1Report) -> Result<Vec<u8>> {
    let header = ["side", "dimension", "rank", "term", "count"].map(String::from);
    let mut rows = Vec::new();
    for c in &t.cells {
        for (i, (term, n)) in c.terms.iter().enumerate() {
            rows.push(vec![
                c.side.as_str().into(),
                c.dimension.as_str().into(),
                (i + 1).to_string(),
                term.clone(),
                n.to_string(),
            ]);
        }
    }
    csv_bytes(&header, &rows)
}

pub fn table1_summary_csv(t: &Table1Report) -> Result<Vec<u8>> {
    let header = [
        "side", "dimension", "units", "positive_units", "pct", "n_terms", "hits", "hhi", "top_k", "top_k_share_pct",
        "jaccard",
    ]
    .map(String::from);
    let rows = t
        .cells
        .iter()
        .map(|c| {
            let j = t.jaccard.iter().find(|j| j.dimension == c.dimension).map(|j| j.jaccard);
            vec![
                c.side.as_str().into(),
                c.dimension.as_str().into(),
                c.units.to_string(),
                c.positive_units.to_string(),
                format!("{:.1}", c.pct),
                c.n_terms.to_string(),
                c.hits.to_string(),
                opt(c.hhi, 3),
                c.top_k.to_string(),
                opt(c.top_k_share_pct, 1),
                opt(j, 3),
            ]
        })
        .collect::<Vec<_>>();
    csv_bytes(&header, &rows)
}

pub fn table2_csv(t: &Table2Report) -> Result<Vec<u8>> {
    let mut header: Vec<String> =
        ["level", "theme", "name", "n", "prevalence_pct", "prevalence_lo", "prevalence_hi"].map(String::from).into();
    for ch in &t.channels {
        for col in ["x", "pct", "pct_lo", "pct_hi", "log_odds", "log_odds_lo", "log_odds_hi", "flag"] {
            header.push(format!("{ch}_{col}"));
        }
    }
    let rows = t
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![
                r.level.as_str().to_owned(),
                r.theme.clone(),
                r.name.clone(),
                r.n.to_string(),
                opt(r.prevalence.map(|p| p.pct), 1),
                opt(r.prevalence.map(|p| p.lo), 1),
                opt(r.prevalence.map(|p| p.hi), 1),
            ];
            for c in &r.cells {
                v.push(c.x.to_string());
                v.push(opt(c.rate.map(|p| p.pct), 1));
                v.push(opt(c.rate.map(|p| p.lo), 1));
                v.push(opt(c.rate.map(|p| p.hi), 1));
                v.push(opt(c.log_odds.map(|e| e.est), 2));
                v.push(opt(c.log_odds.map(|e| e.lo), 2));
                v.push(opt(c.log_odds.map(|e| e.hi), 2));
                v.push(c.flag.clone().unwrap_or_default());
            }
            v
        })
        .collect::<Vec<_>>();
    csv_bytes(&header, &rows)
}

/// Writes `bytes` to `dir/name`, creating `dir`.
pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn presence(unit: &str, side: Side, e: &[&str], a: &[&str]) -> ExplicitPresence {
        let m = |ts: &[&str]| ts.iter().map(|t| (t.to_string(), 1u32)).collect::<BTreeMap<_, _>>();
        ExplicitPresence {
            unit_id: unit.into(),
            side,
            y_experience: !e.is_empty(),
            y_agency: !a.is_empty(),
            y_overall: !e.is_empty() || !a.is_empty(),
            experience_terms: m(e),
            agency_terms: m(a),
        }
    }

    #[test]
    fn rounding() {
        assert_eq!(round_to(0.17949, 3), 0.179);
        assert_eq!(pct(0.4170692), 41.7);
    }

    #[test]
    fn table1_counts_and_overlap() {
        let p = vec![
            presence("u1", Side::Post, &["feel*", "hope*"], &[]),
            presence("u1", Side::Chat, &["feel*"], &["think*"]),
            presence("u2", Side::Post, &[], &[]),
            presence("u2", Side::Chat, &["feel*"], &[]),
        ];
        let run = RunInfo { master_seed: None, config_sha256: None };
        let t = table1(&p, 5, run).unwrap();
        let chat_e = t.cells.iter().find(|c| c.side == Side::Chat && c.dimension == Dimension::Experience).unwrap();
        assert_eq!((chat_e.positive_units, chat_e.hits, chat_e.hhi), (2, 2, Some(1.0)));
        let post_a = t.cells.iter().find(|c| c.side == Side::Post && c.dimension == Dimension::Agency).unwrap();
        assert_eq!((post_a.hhi, post_a.pct), (None, 0.0));
        assert_eq!(t.jaccard[0].jaccard, 0.5);
        assert_eq!(t.jaccard[1].jaccard, 0.0);
        let csv = String::from_utf8(table1_summary_csv(&t).unwrap()).unwrap();
        assert!(csv.lines().nth(1).unwrap().starts_with("post,experience,2,1,50.0,2,2,0.500,5,100.0,0.500"));
    }
}
