use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discovery::{BigramParams, DiscoveryConfig};
use crate::lexicon::DEFAULT_PHRASE_GAP;
use crate::mpscore::{OverallLatent, DEFAULT_LAMBDA_MP};
use crate::stats::{CovKind, FitOptions};
use crate::topics::search::DEFAULT_OBJECTIVE_WEIGHTS;
use crate::topics::{ExpansionOptions, SearchSpace, TopicParams};
use crate::{Error, Result};

/// Input files, resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub corpus: PathBuf,
    pub lexicon: PathBuf,
    pub seeds: PathBuf,
    #[serde(default)]
    pub tuning_labels: Option<PathBuf>,
    #[serde(default)]
    pub stoplist: Option<PathBuf>,
}

impl Paths {
    pub fn resolve(&self, base: &Path) -> Paths {
        let r = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Paths {
            corpus: r(&self.corpus),
            lexicon: r(&self.lexicon),
            seeds: r(&self.seeds),
            tuning_labels: self.tuning_labels.as_ref().map(r),
            stoplist: self.stoplist.as_ref().map(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub alpha_smooth: f64,
    pub z_min: f64,
    pub min_support_users: usize,
    #[serde(rename = "B")]
    pub stability_iterations: usize,
    pub subsample_frac: f64,
    pub min_stab: f64,
    pub holdout_frac: f64,
    pub llr_min: f64,
    pub bigram_min_count: u64,
    pub bigram_min_users: usize,
    pub bigrams: bool,
    pub lambda_mp: f64,
    pub overall_latent: OverallLatent,
    pub l_max: usize,
    pub objective_weights: (f64, f64),
    pub trials: usize,
    pub min_prec_proxy: f64,
    pub expansion_min_support: usize,
    pub expansion_top_k: usize,
    pub expand_seeds: bool,
    pub phrase_gap: usize,
    /// used when no tuning labels are configured
    pub topic_params: TopicParams,
    pub search_space: SearchSpace,
    pub robust_cov: CovKind,
    pub top_k_share: usize,
}

impl Default for Params {
    fn default() -> Self {
        let d = DiscoveryConfig::default();
        Params {
            alpha_smooth: d.alpha_smooth,
            z_min: d.z_min,
            min_support_users: d.min_support_users,
            stability_iterations: d.iterations,
            subsample_frac: d.subsample_frac,
            min_stab: d.min_stab,
            holdout_frac: d.holdout_frac,
            llr_min: d.bigram.min_llr,
            bigram_min_count: d.bigram.min_count,
            bigram_min_users: d.bigram.min_users,
            bigrams: d.bigrams,
            lambda_mp: DEFAULT_LAMBDA_MP,
            overall_latent: OverallLatent::Union,
            l_max: 12,
            objective_weights: DEFAULT_OBJECTIVE_WEIGHTS,
            trials: 500,
            min_prec_proxy: 0.80,
            expansion_min_support: ExpansionOptions::default().min_support,
            expansion_top_k: ExpansionOptions::default().top_k,
            expand_seeds: true,
            phrase_gap: DEFAULT_PHRASE_GAP,
            topic_params: TopicParams::default(),
            search_space: SearchSpace::default(),
            robust_cov: CovKind::Hc0,
            top_k_share: 5,
        }
    }
}

impl Params {
    pub fn discovery(&self) -> DiscoveryConfig {
        DiscoveryConfig {
            alpha_smooth: self.alpha_smooth,
            z_min: self.z_min,
            min_support_users: self.min_support_users,
            iterations: self.stability_iterations,
            subsample_frac: self.subsample_frac,
            min_stab: self.min_stab,
            holdout_frac: self.holdout_frac,
            bigrams: self.bigrams,
            bigram: BigramParams { min_count: self.bigram_min_count, min_users: self.bigram_min_users, min_llr: self.llr_min },
        }
    }

    pub fn expansion(&self) -> ExpansionOptions {
        ExpansionOptions { min_support: self.expansion_min_support, min_prec: self.min_prec_proxy, top_k: self.expansion_top_k }
    }

    pub fn space(&self) -> SearchSpace {
        let mut s = self.search_space.clone();
        s.l_max = (s.l_max.0.min(self.l_max), s.l_max.1.min(self.l_max));
        s
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions { cov: self.robust_cov, ..FitOptions::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.discovery().validate()?;
        self.topic_params.validate()?;
        self.space().validate()?;
        if self.trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if !(self.lambda_mp >= 0.0) {
            return Err(Error::invalid("lambda_mp must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.min_prec_proxy) {
            return Err(Error::invalid("min_prec_proxy must lie in [0, 1]"));
        }
        if self.top_k_share == 0 {
            return Err(Error::invalid("top_k_share must be >= 1"));
        }
        Ok(())
    }
}

fn default_validator() -> String {
    "accept-all".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    #[serde(default)]
    pub keyword_filter: Option<Vec<String>>,
    #[serde(default = "default_validator")]
    pub validator: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub master_seed: u64,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)?;
        cfg.params.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"paths":{"corpus":"c.jsonl","lexicon":"l.json","seeds":"s.json"}}"#).unwrap();
        assert_eq!(cfg.params, Params::default());
        assert_eq!(cfg.params.stability_iterations, 80);
        assert_eq!(cfg.validator, "accept-all");
        let json = serde_json::to_value(&cfg.params).unwrap();
        assert_eq!(json["B"], 80);
        assert_eq!(json["llr_min"], 6.63);
        cfg.params.validate().unwrap();
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let r: std::result::Result<PipelineConfig, _> = serde_json::from_str(
            r#"{"paths":{"corpus":"c","lexicon":"l","seeds":"s"},"params":{"alpha":1}}"#,
        );
        assert!(r.is_err());
    }
}
