//! Config-driven orchestration: each stage reads the previous stage's
//! artifacts, and a full run writes every artifact plus a digest manifest.

mod config;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{Params, PipelineConfig, Paths};
pub use report::{RunInfo, Table1Report, Table2Report};

use crate::corpus::{ingest_jsonl_report, Corpus};
use crate::discovery::{anchor_units, dimension_seed, discover, DiscoveryConfig, DiscoveryOutcome, IndicatorSet};
use crate::lexicon::{
    explicit_presence, match_corpus, validate_hits, validator_from_spec, ExplicitPresence, Lexicon, MpDimension,
    ValidatedHit, Validator,
};
use crate::mpscore::{composite_signal, decompose_dimensions, latent_channel, MPSignal, OverallLatent, Threshold};
use crate::stats::{association_tables, AssociationTables, FitOptions, Taxonomy};
use crate::topics::{
    apply_expansion, assign_topics, evaluate_sets, expand_seeds, load_labels, search_params, seed_match_assignments,
    EvalReport, EvidenceTable, ExpansionCandidate, LabeledPost, SearchOutcome, SeedFile, TopicAssignment,
    TopicLabels, TopicModel, TopicParams, TopicSeedSet, TuningProblem,
};
use crate::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&text)?)
}

pub fn read_stoplist(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

/// Validated hits and per-side presence.
pub fn run_match(
    corpus: &Corpus,
    lexicon: &Lexicon,
    validator: &mut dyn Validator,
    phrase_gap: usize,
) -> Result<(Vec<ValidatedHit>, Vec<ExplicitPresence>)> {
    let hits = match_corpus(corpus, lexicon, phrase_gap);
    let validated = validate_hits(hits, validator)?;
    let presence = explicit_presence(corpus, &validated);
    Ok((validated, presence))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentsFile {
    pub taxonomy: Taxonomy,
    pub params: TopicParams,
    pub assignments: Vec<TopicAssignment>,
}

impl AssignmentsFile {
    pub fn coded(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.assignments.iter().map(|a| (a.post_id.clone(), a.selected.iter().cloned().collect())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsTuning {
    pub tuning_posts: usize,
    pub expansion: Vec<ExpansionCandidate>,
    pub seeds: Vec<TopicSeedSet>,
    pub baseline: Option<EvalReport>,
    pub baseline_objective: Option<f64>,
    pub search: Option<SearchOutcome>,
    pub params: TopicParams,
}

/// Optional seed expansion and parameter search on the labeled posts, then
/// coding of every post with the chosen parameters.
pub fn run_topics(
    corpus: &Corpus,
    seeds: Vec<TopicSeedSet>,
    labels: Option<&TopicLabels>,
    params: &Params,
    seed: u64,
) -> Result<(AssignmentsFile, TopicsTuning)> {
    let base = TopicModel::new(seeds)?;
    let labels = labels.filter(|l| !l.is_empty());
    let Some(gold) = labels else {
        let evidence = EvidenceTable::from_corpus(corpus, &base, params.phrase_gap);
        let assignments = assign_topics(&evidence, &params.topic_params);
        let tuning = TopicsTuning {
            tuning_posts: 0,
            expansion: Vec::new(),
            seeds: base.sets().to_vec(),
            baseline: None,
            baseline_objective: None,
            search: None,
            params: params.topic_params,
        };
        let file = AssignmentsFile { taxonomy: Taxonomy::from_model(&base), params: params.topic_params, assignments };
        return Ok((file, tuning));
    };

    for id in gold.keys() {
        if corpus.unit(id).is_none() {
            return Err(Error::invalid(format!("tuning label for unknown post {id:?}")));
        }
    }
    let expansion = if params.expand_seeds {
        let labeled: Vec<LabeledPost> = corpus
            .units
            .iter()
            .filter_map(|u| {
                gold.get(&u.post_id).map(|t| LabeledPost {
                    post_id: u.post_id.clone(),
                    tokens: u.post.tokens.clone(),
                    topics: t.clone(),
                })
            })
            .collect();
        expand_seeds(&labeled, &base, None, &params.expansion())?
    } else {
        Vec::new()
    };
    let model = TopicModel::new(apply_expansion(base.sets(), &expansion))?;
    let evidence = EvidenceTable::from_corpus(corpus, &model, params.phrase_gap);
    let names = evidence.topic_names.clone();
    let baseline = evaluate_sets(&seed_match_assignments(&evidence), gold, &names);
    let mut problem = TuningProblem::new(&evidence, gold);
    problem.objective_weights = params.objective_weights;
    let search = search_params(&problem, &params.space(), params.trials, seed)?;
    let chosen = search.params;
    let assignments = assign_topics(&evidence, &chosen);
    let tuning = TopicsTuning {
        tuning_posts: gold.len(),
        expansion,
        seeds: model.sets().to_vec(),
        baseline_objective: Some(baseline.objective(params.objective_weights)),
        baseline: Some(baseline),
        search: Some(search),
        params: chosen,
    };
    let file = AssignmentsFile { taxonomy: Taxonomy::from_model(&model), params: chosen, assignments };
    Ok((file, tuning))
}

/// Discovery for one dimension with its derived seed.
pub fn run_discovery(
    corpus: &Corpus,
    presence: &[ExplicitPresence],
    dimension: MpDimension,
    cfg: &DiscoveryConfig,
    stoplist: &BTreeSet<String>,
    master_seed: u64,
) -> Result<DiscoveryOutcome> {
    let units = anchor_units(corpus, presence, dimension)?;
    discover(&units, dimension, cfg, stoplist, dimension_seed(master_seed, dimension))
}

pub fn discovery_dimensions(mode: OverallLatent) -> Vec<MpDimension> {
    match mode {
        OverallLatent::Union => vec![MpDimension::Experience, MpDimension::Agency],
        OverallLatent::Trained => MpDimension::ALL.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsFile {
    pub lambda_mp: f64,
    pub overall_latent: OverallLatent,
    pub thresholds: Vec<Threshold>,
}

pub fn run_score(
    corpus: &Corpus,
    presence: &[ExplicitPresence],
    indicators: &[IndicatorSet],
    lambda_mp: f64,
    mode: OverallLatent,
) -> Result<(Vec<MPSignal>, ThresholdsFile)> {
    let latents = indicators
        .iter()
        .map(|set| latent_channel(corpus, presence, set, lambda_mp))
        .collect::<Result<Vec<_>>>()?;
    let signals = composite_signal(presence, &latents, mode)?;
    let thresholds = ThresholdsFile {
        lambda_mp,
        overall_latent: mode,
        thresholds: latents.iter().map(|l| l.threshold.clone()).collect(),
    };
    Ok((signals, thresholds))
}

/// Both tables from topic codes, signals and (for Table 1) presence.
pub fn run_stats(
    assignments: &AssignmentsFile,
    signals: &[MPSignal],
    presence: Option<&[ExplicitPresence]>,
    opts: &FitOptions,
    top_k: usize,
    run: RunInfo,
) -> Result<(Option<Table1Report>, AssociationTables, Table2Report)> {
    let outcomes = decompose_dimensions(signals);
    let unit_ids: Vec<String> = assignments.assignments.iter().map(|a| a.post_id.clone()).collect();
    let tables = association_tables(&unit_ids, &assignments.coded(), &assignments.taxonomy, &outcomes, opts)?;
    let t1 = presence.map(|p| report::table1(p, top_k, run.clone())).transpose()?;
    let t2 = report::table2(&tables, run);
    Ok((t1, tables, t2))
}

/// Writes the report directory; returns the written file names.
pub fn write_report(
    dir: &Path,
    table1: Option<&Table1Report>,
    table2: &Table2Report,
) -> Result<Vec<String>> {
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        report::write_file(dir, name, &bytes)?;
        written.push(name.to_owned());
        Ok(())
    };
    if let Some(t1) = table1 {
        put("table1.json", report::json_bytes(t1)?)?;
        put("table1_summary.csv", report::table1_summary_csv(t1)?)?;
        put("table1_terms.csv", report::table1_terms_csv(t1)?)?;
    }
    put("table2.json", report::json_bytes(table2)?)?;
    put("table2.csv", report::table2_csv(table2)?)?;
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    /// relative to the output directory
    pub outputs: Vec<FileDigest>,
    pub warnings: Vec<String>,
    /// wall-clock milliseconds per stage; not covered by the determinism contract
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn output(&self, path: &str) -> Option<&FileDigest> {
        self.outputs.iter().find(|o| o.path == path)
    }
}

struct OutputSink {
    root: PathBuf,
    outputs: Vec<FileDigest>,
}

impl OutputSink {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(FileDigest { path: rel.to_owned(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<()> {
        self.put(rel, &report::json_bytes(value)?)
    }
}

fn digest_input(role: &str, path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest { path: format!("{role}:{}", path.file_name().unwrap_or_default().to_string_lossy()), sha256: sha256_hex(&bytes) })
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// replaces the config's validator
    pub validator: Option<String>,
}

/// Runs every stage on one config and writes all artifacts under `out`.
pub fn run_pipeline(config_path: &Path, out: &Path, opts: &RunOptions) -> Result<RunManifest> {
    let config_bytes = fs::read(config_path).map_err(|e| Error::io(config_path, e).in_stage("config"))?;
    let mut cfg: PipelineConfig = serde_json::from_slice(&config_bytes).map_err(|e| Error::from(e).in_stage("config"))?;
    cfg.params.validate().map_err(|e| e.in_stage("config"))?;
    if let Some(v) = &opts.validator {
        cfg.validator = v.clone();
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let paths = cfg.paths.resolve(base);
    let p = &cfg.params;
    let seed = cfg.master_seed;
    let config_sha256 = sha256_hex(&config_bytes);
    let run = RunInfo { master_seed: Some(seed), config_sha256: Some(config_sha256.clone()) };

    let mut inputs = vec![
        digest_input("corpus", &paths.corpus),
        digest_input("lexicon", &paths.lexicon),
        digest_input("seeds", &paths.seeds),
    ];
    if let Some(l) = &paths.tuning_labels {
        inputs.push(digest_input("tuning_labels", l));
    }
    if let Some(s) = &paths.stoplist {
        inputs.push(digest_input("stoplist", s));
    }
    let inputs = inputs.into_iter().collect::<Result<Vec<_>>>().map_err(|e| e.in_stage("inputs"))?;

    let mut sink = OutputSink { root: out.to_path_buf(), outputs: Vec::new() };
    let mut timings = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_owned(), clock.elapsed().as_secs_f64() * 1e3);
        clock = Instant::now();
    };

    let ingested = ingest_jsonl_report(&paths.corpus, cfg.keyword_filter.as_deref()).map_err(|e| e.in_stage("ingest"))?;
    if !ingested.orphan_chats.is_empty() {
        warnings.push(format!("ingest: {} chat records without a post", ingested.orphan_chats.len()));
    }
    let corpus = ingested.corpus;
    if corpus.is_empty() {
        return Err(Error::invalid("no linked units after ingestion").in_stage("ingest"));
    }
    sink.json("corpus.json", &corpus).map_err(|e| e.in_stage("ingest"))?;
    lap("ingest", &mut timings);

    let (hits, presence) = (|| {
        let lexicon = Lexicon::load(&paths.lexicon)?;
        let mut validator = validator_from_spec(&cfg.validator)?;
        let (hits, presence) = run_match(&corpus, &lexicon, validator.as_mut(), p.phrase_gap)?;
        sink.json("hits.json", &hits)?;
        sink.json("presence.json", &presence)?;
        Ok::<_, Error>((hits, presence))
    })()
    .map_err(|e| e.in_stage("match"))?;
    drop(hits);
    lap("match", &mut timings);

    let assignments = (|| {
        let seeds = SeedFile::load(&paths.seeds)?;
        let labels = paths.tuning_labels.as_deref().map(load_labels).transpose()?;
        let (file, tuning) = run_topics(&corpus, seeds.topics, labels.as_ref(), p, seed)?;
        sink.json("assignments.json", &file)?;
        sink.json("topics_tuning.json", &tuning)?;
        Ok::<_, Error>(file)
    })()
    .map_err(|e| e.in_stage("topics"))?;
    lap("topics", &mut timings);

    let indicators = (|| {
        let stoplist = match &paths.stoplist {
            Some(s) => read_stoplist(s)?,
            None => BTreeSet::new(),
        };
        let dcfg = p.discovery();
        let mut sets = Vec::new();
        for dim in discovery_dimensions(p.overall_latent) {
            let outcome = run_discovery(&corpus, &presence, dim, &dcfg, &stoplist, seed)?;
            warnings.extend(outcome.warnings.iter().map(|w| format!("discover {}: {w}", dim.as_str())));
            sink.json(&format!("indicators_{}.json", dim.as_str()), &outcome.indicators)?;
            sink.json(&format!("discovery_{}.json", dim.as_str()), &outcome)?;
            sets.push(outcome.indicators);
        }
        Ok::<_, Error>(sets)
    })()
    .map_err(|e| e.in_stage("discover"))?;
    lap("discover", &mut timings);

    let signals = (|| {
        let (signals, thresholds) = run_score(&corpus, &presence, &indicators, p.lambda_mp, p.overall_latent)?;
        sink.json("signals.json", &signals)?;
        sink.json("thresholds.json", &thresholds)?;
        Ok::<_, Error>(signals)
    })()
    .map_err(|e| e.in_stage("score"))?;
    lap("score", &mut timings);

    (|| {
        let (t1, tables, t2) = run_stats(&assignments, &signals, Some(&presence), &p.fit_options(), p.top_k_share, run)?;
        sink.json("models.json", &tables.models)?;
        let t1 = t1.expect("presence supplied");
        sink.json("report/table1.json", &t1)?;
        sink.put("report/table1_summary.csv", &report::table1_summary_csv(&t1)?)?;
        sink.put("report/table1_terms.csv", &report::table1_terms_csv(&t1)?)?;
        sink.json("report/table2.json", &t2)?;
        sink.put("report/table2.csv", &report::table2_csv(&t2)?)?;
        Ok::<_, Error>(())
    })()
    .map_err(|e| e.in_stage("stats"))?;
    lap("stats", &mut timings);

    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_owned(),
        config_sha256,
        config: cfg,
        inputs,
        outputs: sink.outputs,
        warnings,
        timings_ms: timings,
    };
    report::write_file(out, "manifest.json", &report::json_bytes(&manifest)?).map_err(|e| e.in_stage("manifest"))?;
    Ok(manifest)
}
