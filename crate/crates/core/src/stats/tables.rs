//! Theme- and topic-level prevalence with adjusted log-odds per MP channel.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logit::{collinear_columns, fit_model, FitOptions, LogitModel};
use super::{wilson_interval, WilsonCI};
use crate::lexicon::MpDimension;
use crate::mpscore::{Channel, Outcomes};
use crate::topics::TopicModel;
use crate::{Error, Result};

/// Themes in display order, each with its topics in display order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub themes: Vec<(String, Vec<String>)>,
}

impl Taxonomy {
    pub fn from_model(model: &TopicModel) -> Self {
        let themes = model
            .themes()
            .into_iter()
            .map(|theme| {
                let topics = model.sets().iter().filter(|s| s.theme == theme).map(|s| s.topic.clone()).collect();
                (theme, topics)
            })
            .collect();
        Taxonomy { themes }
    }

    pub fn topics(&self) -> Vec<&str> {
        self.themes.iter().flat_map(|(_, ts)| ts.iter().map(String::as_str)).collect()
    }

    pub fn theme_names(&self) -> Vec<&str> {
        self.themes.iter().map(|(t, _)| t.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Theme,
    Topic,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Theme => "theme",
            Level::Topic => "topic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub est: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCell {
    pub channel: String,
    pub x: u64,
    pub rate: Option<WilsonCI>,
    pub log_odds: Option<Estimate>,
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRow {
    pub level: Level,
    pub name: String,
    pub theme: String,
    pub n: u64,
    pub prevalence: Option<WilsonCI>,
    pub cells: Vec<ChannelCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationTables {
    pub n_units: usize,
    pub channels: Vec<String>,
    /// theme rows, each followed by its topic rows
    pub rows: Vec<AssociationRow>,
    pub models: Vec<LogitModel>,
}

impl AssociationTables {
    pub fn row(&self, level: Level, name: &str) -> Option<&AssociationRow> {
        self.rows.iter().find(|r| r.level == level && r.name == name)
    }
}

/// Outcome channels reported in the tables: the three overall channels and
/// the composite decomposition by dimension.
pub fn table_channels() -> Vec<(String, Channel, MpDimension)> {
    let mut v: Vec<(String, Channel, MpDimension)> =
        Channel::ALL.iter().map(|&c| (c.as_str().to_owned(), c, MpDimension::Overall)).collect();
    for d in [MpDimension::Experience, MpDimension::Agency] {
        v.push((format!("composite_{}", d.as_str()), Channel::Composite, d));
    }
    v
}

struct LevelDesign {
    names: Vec<String>,
    columns: Vec<Vec<bool>>,
}

fn level_design(level: Level, tax: &Taxonomy, coded: &[&BTreeSet<String>]) -> LevelDesign {
    let groups: Vec<(String, Vec<&str>)> = match level {
        Level::Theme => tax.themes.iter().map(|(t, ts)| (t.clone(), ts.iter().map(String::as_str).collect())).collect(),
        Level::Topic => tax.topics().into_iter().map(|t| (t.to_owned(), vec![t])).collect(),
    };
    let columns = groups
        .iter()
        .map(|(_, members)| coded.iter().map(|set| members.iter().any(|m| set.contains(*m))).collect())
        .collect();
    LevelDesign { names: groups.into_iter().map(|g| g.0).collect(), columns }
}

/// Prevalence, per-channel rates and adjusted log-odds from one logit per
/// channel and level with every indicator entered at once. Indicators
/// without variation or collinear with earlier ones are left out of the
/// model and flagged on their rows.
pub fn association_tables(
    unit_ids: &[String],
    coded: &BTreeMap<String, BTreeSet<String>>,
    tax: &Taxonomy,
    outcomes: &Outcomes,
    opts: &FitOptions,
) -> Result<AssociationTables> {
    let n = unit_ids.len();
    if n == 0 {
        return Err(Error::invalid("association tables need at least one unit"));
    }
    let pos: HashMap<&str, usize> = outcomes.unit_ids.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let rows_ix: Vec<usize> = unit_ids
        .iter()
        .map(|u| pos.get(u.as_str()).copied().ok_or_else(|| Error::invalid(format!("no MP signal for unit {u}"))))
        .collect::<Result<_>>()?;
    let empty = BTreeSet::new();
    let sets: Vec<&BTreeSet<String>> = unit_ids.iter().map(|u| coded.get(u).unwrap_or(&empty)).collect();

    let channels = table_channels();
    let ys: Vec<Vec<bool>> = channels
        .iter()
        .map(|(_, c, d)| {
            let v = outcomes
                .get(*c, *d)
                .ok_or_else(|| Error::invalid(format!("missing outcome {}", Outcomes::key(*c, *d))))?;
            Ok(rows_ix.iter().map(|&i| v[i]).collect())
        })
        .collect::<Result<_>>()?;

    let designs: Vec<(Level, LevelDesign)> =
        [Level::Theme, Level::Topic].into_iter().map(|l| (l, level_design(l, tax, &sets))).collect();

    // per level: which columns enter the model, and why others do not
    let mut jobs = Vec::new();
    let mut exclusions: HashMap<(usize, usize), String> = HashMap::new();
    for (li, (level, d)) in designs.iter().enumerate() {
        let mut kept: Vec<usize> = Vec::new();
        for (j, col) in d.columns.iter().enumerate() {
            let on = col.iter().filter(|&&b| b).count();
            if on == 0 || on == n {
                exclusions.insert((li, j), "no variation".into());
            } else {
                kept.push(j);
            }
        }
        let build = |cols: &[usize]| {
            DMatrix::from_fn(n, cols.len() + 1, |i, c| if c == 0 { 1.0 } else { d.columns[cols[c - 1]][i] as u8 as f64 })
        };
        let dependent = collinear_columns(&build(&kept));
        let dropped: BTreeSet<usize> = dependent.iter().filter(|&&c| c > 0).map(|&c| kept[c - 1]).collect();
        for &j in &dropped {
            exclusions.insert((li, j), "collinear".into());
        }
        kept.retain(|j| !dropped.contains(j));
        let x = build(&kept);
        let mut names = vec!["(intercept)".to_string()];
        names.extend(kept.iter().map(|&j| d.names[j].clone()));
        for ci in 0..channels.len() {
            jobs.push((li, *level, ci, kept.clone(), x.clone(), names.clone()));
        }
    }

    let fitted: Vec<(usize, usize, Vec<usize>, std::result::Result<LogitModel, String>)> = jobs
        .into_par_iter()
        .map(|(li, level, ci, kept, x, names)| {
            let res = fit_model(&channels[ci].0, level.as_str(), &ys[ci], &x, &names, opts).map_err(|e| e.to_string());
            (li, ci, kept, res)
        })
        .collect();

    let mut models = Vec::new();
    let mut cells: HashMap<(usize, usize, usize), (Option<Estimate>, Option<String>)> = HashMap::new();
    for (li, ci, kept, res) in fitted {
        match res {
            Ok(m) => {
                for (c, &j) in kept.iter().enumerate() {
                    let k = c + 1;
                    let est = Estimate { est: m.beta[k], se: m.se[k], lo: m.ci95[k].0, hi: m.ci95[k].1 };
                    let flag = if m.separated[k] {
                        Some("separation".to_owned())
                    } else if !m.converged {
                        Some("not converged".to_owned())
                    } else {
                        None
                    };
                    cells.insert((li, ci, j), (Some(est), flag));
                }
                models.push(m);
            }
            Err(msg) => {
                for &j in &kept {
                    cells.insert((li, ci, j), (None, Some(msg.clone())));
                }
            }
        }
    }

    let mut rows = Vec::new();
    let theme_d = &designs[0].1;
    let topic_d = &designs[1].1;
    let topic_pos: HashMap<&str, usize> = topic_d.names.iter().enumerate().map(|(j, t)| (t.as_str(), j)).collect();
    let make_row = |li: usize, level: Level, j: usize, d: &LevelDesign, theme: &str| -> Result<AssociationRow> {
        let col = &d.columns[j];
        let n_on = col.iter().filter(|&&b| b).count() as u64;
        let cells_out = channels
            .iter()
            .enumerate()
            .map(|(ci, (name, _, _))| {
                let x = col.iter().zip(&ys[ci]).filter(|(&a, &b)| a && b).count() as u64;
                let rate = if n_on > 0 { Some(wilson_interval(x, n_on)?) } else { None };
                let (log_odds, flag) = match cells.get(&(li, ci, j)) {
                    Some((e, f)) => (*e, f.clone()),
                    None => (None, exclusions.get(&(li, j)).cloned()),
                };
                Ok(ChannelCell { channel: name.clone(), x, rate, log_odds, flag })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AssociationRow {
            level,
            name: d.names[j].clone(),
            theme: theme.to_owned(),
            n: n_on,
            prevalence: Some(wilson_interval(n_on, n as u64)?),
            cells: cells_out,
        })
    };
    for (ti, (theme, topics)) in tax.themes.iter().enumerate() {
        rows.push(make_row(0, Level::Theme, ti, theme_d, theme)?);
        for t in topics {
            rows.push(make_row(1, Level::Topic, topic_pos[t.as_str()], topic_d, theme)?);
        }
    }
    models.sort_by(|a, b| (a.level.as_str(), &a.outcome).cmp(&(b.level.as_str(), &b.outcome)));
    Ok(AssociationTables { n_units: n, channels: channels.into_iter().map(|c| c.0).collect(), rows, models })
}
