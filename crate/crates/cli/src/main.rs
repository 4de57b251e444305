use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mindlex_core::corpus::{ingest_jsonl_report, Corpus};
use mindlex_core::discovery::{DiscoveryConfig, IndicatorSet};
use mindlex_core::lexicon::{validator_from_spec, ExplicitPresence, Lexicon, MpDimension, DEFAULT_PHRASE_GAP};
use mindlex_core::mpscore::{MPSignal, OverallLatent, DEFAULT_LAMBDA_MP};
use mindlex_core::pipeline::report::{json_bytes, write_file};
use mindlex_core::pipeline::{
    read_json, read_stoplist, run_discovery, run_match, run_pipeline, run_score, run_stats, run_topics, write_report,
    AssignmentsFile, Params, RunInfo, RunOptions,
};
use mindlex_core::stats::{CovKind, FitOptions};
use mindlex_core::topics::{
    apply_expansion, expand_seeds, load_labels, score_topics, LabeledPost, SeedFile,
    TopicModel, TopicParams,
};
use mindlex_core::{synth, Error, Result};

#[derive(Parser)]
#[command(name = "mindlex", version, about = "Lexical mind-perception measurement and topic association analysis")]
struct Cli {
    /// Worker threads [default: all cores]
    #[arg(long, global = true, env = "MINDLEX_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Link post and chat records into units
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Keep units whose post mentions one of these words
        #[arg(long, value_delimiter = ',')]
        filter: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match and validate lexicon terms
    Match {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        /// accept-all or cmd:<argv>
        #[arg(long, default_value = "accept-all")]
        validator: String,
        #[arg(long, default_value_t = DEFAULT_PHRASE_GAP)]
        phrase_gap: usize,
        #[arg(long)]
        out: PathBuf,
        /// Per-unit presence [default: presence.json beside --out]
        #[arg(long)]
        presence_out: Option<PathBuf>,
    },
    /// Companionship-topic coding
    Topics {
        #[command(subcommand)]
        action: TopicsAction,
    },
    /// Discover latent indicators for one dimension
    Discover {
        #[arg(long, value_enum)]
        dimension: DimArg,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        presence: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        stoplist: Option<PathBuf>,
        /// Discovery parameters as JSON
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Full run record with gate statistics
        #[arg(long)]
        details: Option<PathBuf>,
    },
    /// Latent scores, thresholds and composite signals
    Score {
        #[arg(long)]
        corpus: PathBuf,
        /// Indicator files, one per dimension
        #[arg(long, required = true, num_args = 1..)]
        indicators: Vec<PathBuf>,
        #[arg(long)]
        presence: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LAMBDA_MP)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = OverallArg::Union)]
        overall_latent: OverallArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        thresholds_out: Option<PathBuf>,
    },
    /// Table 1 and Table 2 reports
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        signals: PathBuf,
        /// Needed for the term-frequency report
        #[arg(long)]
        presence: Option<PathBuf>,
        #[arg(long)]
        hc1: bool,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage from one config
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "mindlex-out")]
        out: PathBuf,
        /// Overrides the config's validator
        #[arg(long)]
        validator: Option<String>,
    },
    /// Write the synthetic demo data set
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = synth::DEMO_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct TopicInputs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    seeds: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PHRASE_GAP)]
    phrase_gap: usize,
}

#[derive(Subcommand)]
enum TopicsAction {
    /// Per-post topic scores
    Score {
        #[command(flatten)]
        input: TopicInputs,
        /// Topic parameters as JSON
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Topic codes with fixed parameters
    Select {
        #[command(flatten)]
        input: TopicInputs,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seed expansion from labeled posts
    Expand {
        #[command(flatten)]
        input: TopicInputs,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Expanded seed file
        #[arg(long)]
        seeds_out: Option<PathBuf>,
    },
    /// Expansion, parameter search and coding
    Tune {
        #[command(flatten)]
        input: TopicInputs,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_expand: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tuning_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DimArg {
    Experience,
    Agency,
    Overall,
}

impl From<DimArg> for MpDimension {
    fn from(d: DimArg) -> Self {
        match d {
            DimArg::Experience => MpDimension::Experience,
            DimArg::Agency => MpDimension::Agency,
            DimArg::Overall => MpDimension::Overall,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OverallArg {
    Union,
    Trained,
}

fn save<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path.file_name().ok_or_else(|| Error::Invalid(format!("not a file path: {}", path.display())))?;
    write_file(dir, &name.to_string_lossy(), &json_bytes(value)?)
}

fn topic_params(path: Option<&Path>) -> Result<TopicParams> {
    let p: TopicParams = match path {
        Some(p) => read_json(p)?,
        None => TopicParams::default(),
    };
    p.validate()?;
    Ok(p)
}

fn run_topics_cmd(action: TopicsAction) -> Result<()> {
    match action {
        TopicsAction::Score { input, params, out } => {
            let corpus = Corpus::load(&input.corpus)?;
            let model = TopicModel::from_file(&input.seeds)?;
            let params = topic_params(params.as_deref())?;
            save(&out, &score_topics(&corpus, &model, &params, input.phrase_gap))
        }
        TopicsAction::Select { input, params, out } => {
            let corpus = Corpus::load(&input.corpus)?;
            let seeds = SeedFile::load(&input.seeds)?;
            let cfg = Params { topic_params: topic_params(params.as_deref())?, phrase_gap: input.phrase_gap, ..Params::default() };
            let (file, _) = run_topics(&corpus, seeds.topics, None, &cfg, 0)?;
            save(&out, &file)
        }
        TopicsAction::Expand { input, labels, out, seeds_out } => {
            let corpus = Corpus::load(&input.corpus)?;
            let model = TopicModel::from_file(&input.seeds)?;
            let gold = load_labels(&labels)?;
            let tuning: Vec<LabeledPost> = corpus
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
            let retained = expand_seeds(&tuning, &model, None, &Params::default().expansion())?;
            save(&out, &retained)?;
            if let Some(p) = seeds_out {
                save(&p, &SeedFile { topics: apply_expansion(model.sets(), &retained) })?;
            }
            Ok(())
        }
        TopicsAction::Tune { input, labels, trials, seed, no_expand, out, tuning_out } => {
            let corpus = Corpus::load(&input.corpus)?;
            let seeds = SeedFile::load(&input.seeds)?;
            let gold = load_labels(&labels)?;
            let cfg = Params { trials, expand_seeds: !no_expand, phrase_gap: input.phrase_gap, ..Params::default() };
            cfg.validate()?;
            let (file, tuning) = run_topics(&corpus, seeds.topics, Some(&gold), &cfg, seed)?;
            save(&out, &file)?;
            if let Some(p) = tuning_out {
                save(&p, &tuning)?;
            }
            Ok(())
        }
    }
}

fn run(command: Command) -> std::result::Result<(), (&'static str, Error)> {
    match command {
        Command::Ingest { input, filter, out } => (|| {
            let ingested = ingest_jsonl_report(&input, filter.as_deref())?;
            if !ingested.orphan_chats.is_empty() {
                log::warn!("{} chat records have no post", ingested.orphan_chats.len());
            }
            save(&out, &ingested.corpus)
        })()
        .map_err(|e| ("ingest", e)),
        Command::Match { corpus, lexicon, validator, phrase_gap, out, presence_out } => (|| {
            let corpus = Corpus::load(&corpus)?;
            let lexicon = Lexicon::load(&lexicon)?;
            let mut v = validator_from_spec(&validator)?;
            let (hits, presence) = run_match(&corpus, &lexicon, v.as_mut(), phrase_gap)?;
            save(&out, &hits)?;
            let presence_path = presence_out.unwrap_or_else(|| out.with_file_name("presence.json"));
            save(&presence_path, &presence)
        })()
        .map_err(|e| ("match", e)),
        Command::Topics { action } => run_topics_cmd(action).map_err(|e| ("topics", e)),
        Command::Discover { dimension, corpus, presence, seed, stoplist, params, out, details } => (|| {
            let corpus = Corpus::load(&corpus)?;
            let presence: Vec<ExplicitPresence> = read_json(&presence)?;
            let cfg: DiscoveryConfig = match params {
                Some(p) => read_json(&p)?,
                None => DiscoveryConfig::default(),
            };
            let stoplist = match stoplist {
                Some(p) => read_stoplist(&p)?,
                None => BTreeSet::new(),
            };
            let outcome = run_discovery(&corpus, &presence, dimension.into(), &cfg, &stoplist, seed)?;
            for w in &outcome.warnings {
                log::warn!("{w}");
            }
            save(&out, &outcome.indicators)?;
            if let Some(p) = details {
                save(&p, &outcome)?;
            }
            Ok(())
        })()
        .map_err(|e| ("discover", e)),
        Command::Score { corpus, indicators, presence, lambda, overall_latent, out, thresholds_out } => (|| {
            let corpus = Corpus::load(&corpus)?;
            let presence: Vec<ExplicitPresence> = read_json(&presence)?;
            let sets = indicators.iter().map(|p| IndicatorSet::load(p)).collect::<Result<Vec<_>>>()?;
            let mode = match overall_latent {
                OverallArg::Union => OverallLatent::Union,
                OverallArg::Trained => OverallLatent::Trained,
            };
            let (signals, thresholds) = run_score(&corpus, &presence, &sets, lambda, mode)?;
            save(&out, &signals)?;
            if let Some(p) = thresholds_out {
                save(&p, &thresholds)?;
            }
            Ok(())
        })()
        .map_err(|e| ("score", e)),
        Command::Stats { corpus, assignments, signals, presence, hc1, top_k, out } => (|| {
            let corpus = Corpus::load(&corpus)?;
            let assignments: AssignmentsFile = read_json(&assignments)?;
            let signals: Vec<MPSignal> = read_json(&signals)?;
            let presence: Option<Vec<ExplicitPresence>> = presence.map(|p| read_json(&p)).transpose()?;
            let ids: BTreeSet<&str> = corpus.units.iter().map(|u| u.post_id.as_str()).collect();
            if let Some(a) = assignments.assignments.iter().find(|a| !ids.contains(a.post_id.as_str())) {
                return Err(Error::Invalid(format!("assignment for unit {} not in the corpus", a.post_id)));
            }
            if top_k == 0 {
                return Err(Error::Invalid("top-k must be >= 1".into()));
            }
            let opts = FitOptions { cov: if hc1 { CovKind::Hc1 } else { CovKind::Hc0 }, ..FitOptions::default() };
            let run = RunInfo { master_seed: None, config_sha256: None };
            let (t1, _, t2) = run_stats(&assignments, &signals, presence.as_deref(), &opts, top_k, run)?;
            if t1.is_none() {
                log::warn!("no --presence given; skipping the term-frequency report");
            }
            write_report(&out, t1.as_ref(), &t2)?;
            Ok(())
        })()
        .map_err(|e| ("stats", e)),
        Command::Pipeline { config, out, validator } => {
            run_pipeline(&config, &out, &RunOptions { validator }).map(|m| {
                for w in &m.warnings {
                    log::warn!("{w}");
                }
                println!("{} outputs written to {}", m.outputs.len(), out.display());
            })
            .map_err(|e| ("pipeline", e))
        }
        Command::Synth { out, seed } => synth::write_demo_files(&out, seed)
            .map(|p| println!("demo config: {}", p.display()))
            .map_err(|e| ("synth", e)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, e)) => {
            match &e {
                // pipeline errors already carry their stage
                Error::Stage { .. } => eprintln!("error: {e}"),
                _ => eprintln!("error: {stage}: {e}"),
            }
            ExitCode::from(1)
        }
    }
}
