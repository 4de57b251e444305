//! Acceptance suite. Each criterion prints one PASS/FAIL line.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;
use std::time::{Duration, Instant};

use mindlex_core::corpus::{ingest_reader, Corpus, RawRecord};
use mindlex_core::discovery::{
    anchor_units, audit_gates, dimension_seed, discover, llr_2x2, log_odds_z, DiscoveryConfig, BigramParams,
};
use mindlex_core::lexicon::{
    explicit_presence, match_corpus, presence_counts, validate_hits, AcceptAll, Dimension, ExplicitPresence, Lexicon,
    MpDimension, Side, DEFAULT_PHRASE_GAP,
};
use mindlex_core::mpscore::{calibrate_threshold, latent_channel, training_prevalence, Channel, Outcomes};
use mindlex_core::pipeline::{run_pipeline, RunOptions};
use mindlex_core::seed::rng_for;
use mindlex_core::stats::{
    association_tables, concentration, fit_logistic, fit_model, jaccard_overlap, wilson_interval, FitOptions, Level,
    Taxonomy,
};
use mindlex_core::synth;
use mindlex_core::topics::{evaluate_sets, search_params, seed_match_assignments, EvidenceTable, SearchSpace, TopicModel, TuningProblem};
use nalgebra::DMatrix;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus_from(records: &[RawRecord]) -> Corpus {
    let mut jsonl = String::new();
    for r in records {
        jsonl.push_str(&serde_json::to_string(r).unwrap());
        jsonl.push('\n');
    }
    ingest_reader(Cursor::new(jsonl), None).unwrap().corpus
}

fn presence_for(corpus: &Corpus) -> Vec<ExplicitPresence> {
    let lex = Lexicon::from_map(&synth::table1_lexicon()).unwrap();
    let hits = match_corpus(corpus, &lex, DEFAULT_PHRASE_GAP);
    let validated = validate_hits(hits, &mut AcceptAll).unwrap();
    explicit_presence(corpus, &validated)
}

// ---------------------------------------------------------------- 1

/// Printed rows: name, n, prevalence %, then (% , lo, hi) for the explicit,
/// induced and composite channels.
const TABLE2: &[(&str, u64, f64, [(f64, f64, f64); 3])] = &[
    ("Socioemotionality", 424, 68.3, [(38.4, 33.9, 43.2), (37.7, 32.2, 42.4), (50.9, 46.2, 55.7)]),
    ("Bonding", 295, 47.5, [(39.3, 33.9, 45.0), (37.6, 32.3, 43.3), (51.2, 45.5, 56.8)]),
    ("Realism", 333, 53.6, [(39.3, 34.2, 44.7), (37.2, 32.2, 42.5), (52.0, 46.6, 57.3)]),
    ("Sex(uality)", 101, 16.3, [(37.6, 28.8, 47.4), (36.6, 27.9, 46.4), (50.5, 40.9, 60.0)]),
    ("User Control", 272, 43.8, [(39.7, 34.1, 46.5), (35.3, 29.9, 41.1), (50.7, 44.8, 56.6)]),
    ("Customization", 130, 20.9, [(33.1, 25.6, 41.5), (30.8, 23.5, 39.2), (47.7, 39.3, 56.2)]),
    ("Playfulness", 165, 26.6, [(41.2, 34.0, 48.8), (37.0, 30.0, 44.6), (51.5, 43.9, 59.0)]),
    ("Boundary negotiation", 82, 13.2, [(41.5, 31.4, 52.3), (40.2, 30.3, 51.1), (54.9, 44.1, 65.2)]),
    ("Limitations", 140, 22.5, [(45.0, 37.0, 53.3), (45.7, 37.7, 54.0), (57.9, 49.6, 65.7)]),
    ("Inauthenticity", 26, 4.2, [(65.4, 46.2, 80.6), (57.7, 38.9, 74.5), (73.1, 53.9, 86.3)]),
    ("Transactionality", 82, 13.2, [(43.9, 33.7, 54.7), (43.9, 33.7, 54.7), (58.5, 47.7, 68.6)]),
    ("Ethicality", 52, 8.4, [(36.5, 24.8, 50.1), (40.4, 28.2, 53.9), (46.2, 33.3, 59.5)]),
    ("Imaginaries", 174, 28.0, [(40.2, 33.2, 47.7), (41.4, 34.3, 48.8), (55.2, 47.8, 62.4)]),
    ("Social Isolation", 46, 7.4, [(41.3, 28.3, 55.7), (47.8, 34.1, 61.9), (56.5, 42.2, 69.8)]),
    ("Speculation", 66, 10.6, [(37.9, 27.1, 49.9), (34.8, 24.5, 46.9), (50.0, 38.3, 61.7)]),
    ("Exist./Philos.", 106, 17.1, [(39.6, 30.8, 49.1), (46.2, 37.0, 55.7), (59.4, 49.9, 68.3)]),
];
const UNITS: u64 = 621;
const CHANNELS: [&str; 3] = ["explicit", "induced", "composite"];

/// Cells whose printed bounds no Wilson interval at the printed n and % can
/// produce; both are asymmetric in the wrong direction for p < .5.
const INCONSISTENT_CELLS: [(&str, &str); 2] = [("Socioemotionality", "induced"), ("User Control", "explicit")];

/// The integer successes consistent with a printed one-decimal percentage.
fn successes(pct: f64, n: u64) -> Vec<u64> {
    (0..=n).filter(|&x| ((1000.0 * x as f64 / n as f64).round() / 10.0 - pct).abs() < 1e-9).collect()
}

fn criterion_1() -> (Outcome, Vec<(String, String)>) {
    let start = Instant::now();
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut problems = Vec::new();
    for (name, n, prev, cells) in TABLE2 {
        if successes(*prev, UNITS) != vec![*n] {
            problems.push(format!("{name}: prevalence {prev}% does not determine n={n}"));
        }
        for (ch, &(pct, lo, hi)) in CHANNELS.iter().zip(cells) {
            let xs = successes(pct, *n);
            let [x] = xs[..] else { continue };
            let w = wilson_interval(x, *n).unwrap();
            checked += 1;
            let (dl, dh) = (100.0 * w.lo - lo, 100.0 * w.hi - hi);
            if dl.abs() > 0.2 || dh.abs() > 0.2 {
                bad.push((name.to_string(), ch.to_string()));
                problems.push(format!(
                    "{name}/{ch}: x={x}/{n} gives [{:.2}, {:.2}], printed [{lo}, {hi}]",
                    100.0 * w.lo,
                    100.0 * w.hi
                ));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(1) {
        problems.push(format!("runtime {elapsed:?}"));
    }
    let out = if problems.is_empty() {
        Ok(format!("{checked} cells within 0.2pp"))
    } else {
        Err(format!("{}/{checked} cells off; {}", bad.len(), problems.join("; ")))
    };
    (out, bad)
}

// ---------------------------------------------------------------- 2

fn sets(a: usize, b: usize, shared: usize) -> (BTreeSet<String>, BTreeSet<String>) {
    let a_set = (0..a).map(|i| format!("t{i:03}")).collect();
    let b_set = (a - shared..a - shared + b).map(|i| format!("t{i:03}")).collect();
    (a_set, b_set)
}

fn criterion_2() -> Outcome {
    let mut got = Vec::new();
    for ((a, b, s), want) in [((114, 36, 32), "0.271"), ((72, 37, 36), "0.493")] {
        let (x, y) = sets(a, b, s);
        let o = jaccard_overlap("d", x, y);
        let shown = format!("{:.3}", o.jaccard);
        check(shown == want, || format!("({a},{b},{s}) gave {shown}, want {want}"))?;
        got.push(shown);
    }
    Ok(got.join(", "))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let counts: BTreeMap<String, u64> = synth::table1_counts(Side::Chat, Dimension::Experience)
        .into_iter()
        .map(|(t, c)| (t, c as u64))
        .collect();
    let c = concentration("chat/experience", &counts, 5).map_err(|e| e.to_string())?;
    check((c.hhi - 0.179).abs() <= 0.01, || format!("HHI {:.4}", c.hhi))?;
    check((100.0 * c.top_k_share - 72.2).abs() <= 1.0, || format!("top-5 {:.2}%", 100.0 * c.top_k_share))?;
    Ok(format!("HHI {:.4}, top-5 {:.1}% over {} hits", c.hhi, 100.0 * c.top_k_share, c.total))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let corpus = corpus_from(&synth::prevalence_fixture());
    check(corpus.len() == 621, || format!("{} units", corpus.len()))?;
    let presence = presence_for(&corpus);
    for dim in Dimension::ALL {
        let mut hits: BTreeMap<String, u32> = BTreeMap::new();
        for p in presence.iter().filter(|p| p.side == Side::Chat) {
            for (t, c) in p.terms(dim) {
                *hits.entry(t.clone()).or_default() += c;
            }
        }
        let want: BTreeMap<String, u32> = synth::table1_counts(Side::Chat, dim).into_iter().collect();
        check(hits == want, || format!("{} term multiset differs from the reported one", dim.as_str()))?;
    }
    let c = presence_counts(&presence, Side::Chat);
    check((c.units, c.overall, c.experience, c.agency) == (621, 259, 125, 197), || format!("{c:?}"))?;
    Ok(format!("overall {}/621, experience {}/621, agency {}/621", c.overall, c.experience, c.agency))
}

// ---------------------------------------------------------------- 5

/// Direct evaluation of the smoothed log-odds equations.
fn brute_log_odds(pos: &BTreeMap<String, u64>, neg: &BTreeMap<String, u64>, alpha: f64) -> BTreeMap<String, (f64, f64)> {
    let vocab: BTreeSet<&String> = pos.keys().chain(neg.keys()).collect();
    let v = vocab.len() as f64;
    let n_pos = pos.values().sum::<u64>() as f64 + alpha * v;
    let n_neg = neg.values().sum::<u64>() as f64 + alpha * v;
    vocab
        .into_iter()
        .map(|t| {
            let a = *pos.get(t).unwrap_or(&0) as f64 + alpha;
            let b = *neg.get(t).unwrap_or(&0) as f64 + alpha;
            let delta = (a / (n_pos - a)).ln() - (b / (n_neg - b)).ln();
            let var = 1.0 / a + 1.0 / b;
            (t.clone(), (delta, delta / var.sqrt()))
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let mut rng = rng_for(5, 0xacce, 5);
    let mut compared = 0;
    for case in 0..1000 {
        // two or more tokens keep every smoothed odds finite
        let v = rng.gen_range(2..12);
        let mut pos = BTreeMap::new();
        let mut neg = BTreeMap::new();
        for t in 0..v {
            let name = format!("w{t}");
            match rng.gen_range(0..3) {
                0 => {
                    pos.insert(name, rng.gen_range(0..30u64));
                }
                1 => {
                    neg.insert(name, rng.gen_range(0..30u64));
                }
                _ => {
                    pos.insert(name.clone(), rng.gen_range(0..30u64));
                    neg.insert(name, rng.gen_range(0..30u64));
                }
            }
        }
        let oracle = brute_log_odds(&pos, &neg, 0.01);
        let got = log_odds_z(&pos, &neg, 0.01);
        check(got.len() == oracle.len(), || format!("case {case}: {} vs {} tokens", got.len(), oracle.len()))?;
        for s in &got {
            let (d, z) = oracle[&s.token];
            check((s.delta - d).abs() <= 1e-12 && (s.z - z).abs() <= 1e-12, || {
                format!("case {case} token {}: ({}, {}) vs ({d}, {z})", s.token, s.delta, s.z)
            })?;
            compared += 1;
        }
        let mut both = pos.clone();
        for (t, c) in &neg {
            *both.entry(t.clone()).or_insert(0) += c;
        }
        let sym = log_odds_z(&both, &both, 0.01);
        check(sym.iter().all(|s| s.delta == 0.0 && s.z == 0.0), || format!("case {case}: symmetric corpus nonzero"))?;
    }
    Ok(format!("1000 corpora, {compared} token statistics within 1e-12; symmetric corpora exactly 0"))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    for (a, b, k) in [(3u64, 7u64, 1u64), (4, 6, 3), (10, 20, 5), (1, 1, 40)] {
        let llr = llr_2x2(a * k, b * k, a * 2 * k, b * 2 * k);
        check(llr.abs() < 1e-9, || format!("proportional table ({a},{b})x{k}: {llr}"))?;
    }
    let diag = llr_2x2(10, 0, 0, 10);
    check((diag - 27.726).abs() <= 1e-3, || format!("[[10,0],[0,10]] gave {diag}"))?;
    let chi = ChiSquared::new(1.0).unwrap();
    let q99 = chi.inverse_cdf(0.99);
    let gate = BigramParams::default().min_llr;
    check((gate - q99).abs() < 0.01, || format!("gate {gate} vs quantile {q99}"))?;
    let tail = 1.0 - chi.cdf(gate);
    check((tail - 0.01).abs() < 2e-4, || format!("upper tail at the gate {tail}"))?;
    Ok(format!("[[10,0],[0,10]] = {diag:.3}; chi2(1) 0.99 quantile {q99:.3}, tail at {gate} = {tail:.4}"))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let demo = synth::demo_corpus(synth::DEMO_SEED, 600, 470, 0);
    let corpus = corpus_from(&demo.records);
    let presence = presence_for(&corpus);
    let cfg = DiscoveryConfig::default();
    let stop = synth::stoplist();
    let mut runs = 0;
    let mut retained = 0;
    for master in [1u64, 2, 3] {
        for dim in [MpDimension::Experience, MpDimension::Agency, MpDimension::Overall] {
            let units = anchor_units(&corpus, &presence, dim).map_err(|e| e.to_string())?;
            let seed = dimension_seed(master, dim);
            let a = discover(&units, dim, &cfg, &stop, seed).map_err(|e| e.to_string())?;
            let b = discover(&units, dim, &cfg, &stop, seed).map_err(|e| e.to_string())?;
            check(a.indicators == b.indicators, || format!("seed {master} {}: reruns differ", dim.as_str()))?;
            let v = audit_gates(&units, &a, &cfg);
            check(v.is_empty(), || format!("seed {master} {}: gate violations {v:?}", dim.as_str()))?;
            runs += 1;
            retained += a.indicators.tokens.len();
        }
    }
    Ok(format!("{runs} runs repeat exactly; {retained} retained tokens pass all five gates"))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let cfg = DiscoveryConfig::default();
    let stop = BTreeSet::new();
    let mut good = 0;
    let mut detail = Vec::new();
    for seed in 0..10u64 {
        let pc = synth::planted_discovery(seed, 20, 10);
        check(pc.units.len() == 200, || format!("{} units", pc.units.len()))?;
        let out = discover(&pc.units, MpDimension::Experience, &cfg, &stop, seed).map_err(|e| e.to_string())?;
        let kept = out.retained();
        let planted = pc.planted.iter().filter(|t| kept.contains(*t)).count();
        let noise = kept.len() - planted;
        if planted >= 4 && noise <= 2 {
            good += 1;
        }
        detail.push(format!("{planted}/{noise}"));
    }
    let elapsed = start.elapsed();
    check(good >= 9, || format!("{good}/10 seeds recovered (planted/noise per seed: {})", detail.join(" ")))?;
    check(elapsed < Duration::from_secs(30), || format!("runtime {elapsed:?}"))?;
    Ok(format!("{good}/10 seeds (planted/noise: {}) in {:.1}s", detail.join(" "), elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let demo = synth::demo_corpus(synth::DEMO_SEED, 600, 470, 0);
    let corpus = corpus_from(&demo.records);
    let presence = presence_for(&corpus);
    let cfg = DiscoveryConfig::default();
    let stop = synth::stoplist();
    let mut lines = Vec::new();
    for dim in [MpDimension::Experience, MpDimension::Agency] {
        let units = anchor_units(&corpus, &presence, dim).map_err(|e| e.to_string())?;
        let out = discover(&units, dim, &cfg, &stop, dimension_seed(9, dim)).map_err(|e| e.to_string())?;
        let latent = latent_channel(&corpus, &presence, &out.indicators, 0.5).map_err(|e| e.to_string())?;
        let train: BTreeSet<&str> = out.indicators.train_units.iter().map(String::as_str).collect();
        let pi = training_prevalence(&presence, &train, dim);
        let kappa = latent.threshold.kappa;
        let (mut n, mut flagged, mut above, mut ties) = (0usize, 0usize, 0usize, 0usize);
        for (s, &bit) in latent.scores.iter().zip(&latent.bits) {
            if train.contains(s.unit_id.as_str()) {
                n += 1;
                flagged += bit as usize;
                above += (s.g > kappa) as usize;
                ties += (s.g == kappa) as usize;
            }
        }
        let target = pi * n as f64;
        check(above as f64 <= target + 1e-9 && target <= (above + ties) as f64 + 1e-9, || {
            format!("{}: pi*n={target} outside [{above}, {}]", dim.as_str(), above + ties)
        })?;
        let dev = (flagged as f64 / n as f64 - pi).abs();
        check(dev <= ties as f64 / n as f64 + 1e-12, || format!("{}: deviation {dev} > tie mass {ties}/{n}", dim.as_str()))?;
        lines.push(format!("{} pi={:.3} rate={:.3} ties={ties}", dim.as_str(), pi, flagged as f64 / n as f64));

        let g: Vec<f64> = latent.scores.iter().map(|s| s.g).collect();
        let zero = calibrate_threshold(dim, &g, 0.0).map_err(|e| e.to_string())?;
        let n0 = latent.scores.iter().filter(|s| zero.flags(s)).count();
        check(n0 == 0, || format!("{}: pi=0 flagged {n0}", dim.as_str()))?;
    }
    Ok(format!("{}; pi=0 flags none", lines.join(", ")))
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let (docs, gold) = synth::labeled_topic_corpus(10, 600, 0.3);
    let model = TopicModel::new(synth::seed_file().topics).map_err(|e| e.to_string())?;
    let evidence = EvidenceTable::from_posts(docs.iter(), &model, DEFAULT_PHRASE_GAP);
    let problem = TuningProblem::new(&evidence, &gold);
    let baseline = evaluate_sets(&seed_match_assignments(&evidence), &gold, &evidence.topic_names);
    let base_obj = baseline.objective(problem.objective_weights);
    let out = search_params(&problem, &SearchSpace::default(), 500, 2024).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(out.report.recall_w >= 0.95, || format!("recall {:.3}", out.report.recall_w))?;
    check(out.objective >= base_obj, || format!("objective {:.4} < baseline {base_obj:.4}", out.objective))?;
    check(elapsed < Duration::from_secs(60), || format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "tuned P={:.3} R={:.3} O={:.4} vs seed-match P={:.3} R={:.3} O={base_obj:.4} in {:.1}s",
        out.report.precision_w,
        out.report.recall_w,
        out.objective,
        baseline.precision_w,
        baseline.recall_w,
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 11

fn planted_outcomes(ids: &[String], y: &[bool]) -> Outcomes {
    let mut vectors = BTreeMap::new();
    for c in Channel::ALL {
        for d in MpDimension::ALL {
            vectors.insert(Outcomes::key(c, d), y.to_vec());
        }
    }
    Outcomes { unit_ids: ids.to_vec(), vectors }
}

fn criterion_11() -> Outcome {
    // saturated 2x2
    let mut y = Vec::new();
    let mut rows = Vec::new();
    for (xv, pos, neg) in [(1.0, 6, 2), (0.0, 2, 6)] {
        for k in 0..pos + neg {
            y.push(k < pos);
            rows.push(xv);
        }
    }
    let x = DMatrix::from_fn(y.len(), 2, |i, j| if j == 0 { 1.0 } else { rows[i] });
    let fit = fit_logistic(&y, &x, &["(intercept)".into(), "x".into()], &FitOptions::default()).map_err(|e| e.to_string())?;
    check((fit.beta[1] - 9f64.ln()).abs() < 1e-8 && (fit.beta[0] + 3f64.ln()).abs() < 1e-8, || {
        format!("2x2 beta {:?}", fit.beta.as_slice())
    })?;

    // intercept only: robust and model-based variance agree
    let y: Vec<bool> = (0..40).map(|i| i % 5 < 2).collect();
    let x = DMatrix::from_element(40, 1, 1.0);
    let m = fit_model("y", "theme", &y, &x, &["(intercept)".into()], &FitOptions::default()).map_err(|e| e.to_string())?;
    let p: f64 = 16.0 / 40.0;
    let model_se = (1.0 / (40.0 * p * (1.0 - p))).sqrt();
    check((m.se[0] - model_se).abs() < 1e-10, || format!("HC0 se {} vs model se {model_se}", m.se[0]))?;

    // planted topic coefficient through the association tables
    let n = 5000;
    let mut rng = rng_for(11, 0xacce, 11);
    let ids: Vec<String> = (0..n).map(|i| format!("u{i:05}")).collect();
    let mut coded = BTreeMap::new();
    let mut y = Vec::with_capacity(n);
    for id in &ids {
        let t: [bool; 3] = [rng.gen_bool(0.3), rng.gen_bool(0.25), rng.gen_bool(0.4)];
        let eta = -1.0 + 1.0 * t[0] as u8 as f64 + 0.3 * t[2] as u8 as f64;
        y.push(rng.gen_bool(1.0 / (1.0 + (-eta).exp())));
        let set: BTreeSet<String> = ["T1", "T2", "T3"].iter().zip(t).filter(|(_, on)| *on).map(|(n, _)| n.to_string()).collect();
        coded.insert(id.clone(), set);
    }
    let tax = Taxonomy {
        themes: vec![("A".into(), vec!["T1".into()]), ("B".into(), vec!["T2".into(), "T3".into()])],
    };
    let tables = association_tables(&ids, &coded, &tax, &planted_outcomes(&ids, &y), &FitOptions::default())
        .map_err(|e| e.to_string())?;
    let row = tables.row(Level::Topic, "T1").ok_or("no T1 row")?;
    let est = row.cells.iter().find(|c| c.channel == "composite").and_then(|c| c.log_odds).ok_or("no estimate")?;
    check((est.est - 1.0).abs() <= 0.15, || format!("planted 1.0 recovered as {:.3}", est.est))?;
    Ok(format!(
        "2x2 exact, intercept-only HC0 = model SE, planted 1.0 -> {:.3} [{:.3}, {:.3}]",
        est.est, est.lo, est.hi
    ))
}

// ---------------------------------------------------------------- 12

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = synth::write_demo_files(&dir.path().join("data"), synth::DEMO_SEED).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let a = run_pipeline(&config, &dir.path().join("run_a"), &RunOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let b = run_pipeline(&config, &dir.path().join("run_b"), &RunOptions::default()).map_err(|e| e.to_string())?;
    check(elapsed < Duration::from_secs(30), || format!("runtime {elapsed:?}"))?;
    check(a.outputs == b.outputs, || "output digests differ between reruns".into())?;
    for o in &a.outputs {
        let x = std::fs::read(dir.path().join("run_a").join(&o.path)).unwrap();
        let y = std::fs::read(dir.path().join("run_b").join(&o.path)).unwrap();
        check(x == y, || format!("{} differs", o.path))?;
    }
    for name in ["report/table1_summary.csv", "report/table1_terms.csv", "report/table2.csv"] {
        check(a.output(name).is_some(), || format!("missing {name}"))?;
        let text = std::fs::read_to_string(dir.path().join("run_a").join(name)).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        let mut rows = 0;
        for line in lines {
            rows += 1;
            for (h, v) in header.iter().zip(line.split(',')) {
                check(!v.is_empty() || h.ends_with("_flag"), || format!("{name}: empty {h} in {line}"))?;
            }
        }
        check(rows > 0, || format!("{name} has no rows"))?;
    }
    let t2 = std::fs::read_to_string(dir.path().join("run_a/report/table2.csv")).unwrap();
    check(t2.lines().count() == 1 + 16, || format!("table2 has {} rows", t2.lines().count() - 1))?;
    Ok(format!("{} outputs byte-identical across reruns; pipeline {:.2}s", a.outputs.len(), elapsed.as_secs_f64()))
}

#[test]
fn acceptance_criteria() {
    let (c1, c1_bad) = criterion_1();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "Wilson reproduction", c1),
        (2, "Jaccard reproduction", criterion_2()),
        (3, "Concentration reproduction", criterion_3()),
        (4, "Prevalence counts", criterion_4()),
        (5, "Log-odds oracle equivalence", criterion_5()),
        (6, "LLR correctness", criterion_6()),
        (7, "Discovery determinism and gate soundness", criterion_7()),
        (8, "Planted-indicator recovery", criterion_8()),
        (9, "Latent calibration", criterion_9()),
        (10, "Topic scorer and optimizer", criterion_10()),
        (11, "Logistic regression", criterion_11()),
        (12, "End-to-end smoke", criterion_12()),
    ];
    let mut failed = Vec::new();
    for (id, name, r) in &results {
        match r {
            Ok(msg) => println!("PASS {id:>2} {name}: {msg}"),
            Err(msg) => {
                println!("FAIL {id:>2} {name}: {msg}");
                failed.push(*id);
            }
        }
    }
    // Criterion 1 stays red on two printed cells that no Wilson interval can
    // produce; anything beyond those is a regression.
    let known: Vec<(String, String)> =
        INCONSISTENT_CELLS.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    assert_eq!(c1_bad, known, "unexpected Wilson mismatches");
    failed.retain(|&id| id != 1);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
