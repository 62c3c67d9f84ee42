//! Run configuration: a flat TOML document plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sicf_core::eval::Metric;
use sicf_core::fusion::Coefficients;
use sicf_core::pipeline::{Providers, ScoringConfig};
use sicf_core::providers::{FileEmbeddings, FileNli, FileTags};
use sicf_core::sicf::DEFAULT_COVERAGE_PENALTY;
use sicf_core::uncertainty::{BnnKind, PhiConfig, PhiMethod};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub provider: ProviderMode,
    pub embeddings: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub nli: Option<PathBuf>,
    pub k: usize,
    pub phi: PhiMethod,
    pub bnn_kind: BnnKind,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub ratio: f64,
    pub metrics: Vec<Metric>,
    pub grid_metric: Metric,
    pub coverage_penalty: f64,
    pub faithfulness_penalty: Option<f64>,
    pub debug_matrices: bool,
    /// Externally measured scores to render alongside the run's own report.
    pub ssds_table: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            candidates: None,
            provider: ProviderMode::Synthetic,
            embeddings: None,
            tags: None,
            nli: None,
            k: 20,
            phi: PhiMethod::Mean,
            bnn_kind: BnnKind::Predictive,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            ratio: 0.25,
            metrics: Metric::ALL.to_vec(),
            grid_metric: Metric::Rouge1,
            coverage_penalty: DEFAULT_COVERAGE_PENALTY,
            faithfulness_penalty: None,
            debug_matrices: false,
            ssds_table: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            threads: 1,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub ratio: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub phi: Option<PhiMethod>,
    pub bnn_kind: Option<BnnKind>,
}

impl RunConfig {
    /// Reads `path` (if given), resolves its relative paths against the file's directory,
    /// applies `overrides` and validates the result.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let mut config: RunConfig = toml::from_str(&text)
                    .map_err(|e| CliError::config(&path.display().to_string(), e.message()))?;
                let base = path.parent().unwrap_or(Path::new(""));
                config.resolve_paths(base);
                config
            }
            None => RunConfig::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.candidates,
            &mut self.embeddings,
            &mut self.tags,
            &mut self.nli,
            &mut self.ssds_table,
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        self.out_dir = base.join(&self.out_dir);
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        self.threads = o.threads.unwrap_or(self.threads);
        self.seed = o.seed.unwrap_or(self.seed);
        self.ratio = o.ratio.unwrap_or(self.ratio);
        self.alpha = o.alpha.unwrap_or(self.alpha);
        self.beta = o.beta.unwrap_or(self.beta);
        self.gamma = o.gamma.unwrap_or(self.gamma);
        self.phi = o.phi.unwrap_or(self.phi);
        self.bnn_kind = o.bnn_kind.unwrap_or(self.bnn_kind);
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.k == 0 {
            return Err(CliError::config("k", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(CliError::config(
                "ratio",
                format!("{} is outside [0, 1]", self.ratio),
            ));
        }
        if self.threads == 0 {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(CliError::config(
                    name,
                    format!("{v} must be finite and non-negative"),
                ));
            }
        }
        if self.alpha + self.beta + self.gamma == 0.0 {
            return Err(CliError::config(
                "alpha/beta/gamma",
                "at least one must be positive",
            ));
        }
        if !self.coverage_penalty.is_finite() || self.coverage_penalty < 0.0 {
            return Err(CliError::config(
                "coverage_penalty",
                "must be finite and non-negative",
            ));
        }
        if let Some(p) = self.faithfulness_penalty {
            if !p.is_finite() {
                return Err(CliError::config("faithfulness_penalty", "must be finite"));
            }
        }
        if self.metrics.is_empty() {
            return Err(CliError::config(
                "metrics",
                "at least one metric is required",
            ));
        }
        if self.provider == ProviderMode::File {
            for (name, p) in [
                ("embeddings", &self.embeddings),
                ("tags", &self.tags),
                ("nli", &self.nli),
            ] {
                if p.is_none() {
                    return Err(CliError::config(name, "required when provider = \"file\""));
                }
            }
        }
        Ok(())
    }

    pub fn require<'a>(&self, field: &str, value: &'a Option<PathBuf>) -> CliResult<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| CliError::config(field, "required by this command"))
    }

    pub fn coefficients(&self) -> CliResult<Coefficients> {
        Coefficients::new(self.alpha, self.beta, self.gamma)
            .map_err(|e| CliError::config("alpha/beta/gamma", e))
    }

    pub fn phi_config(&self) -> PhiConfig {
        PhiConfig::new(self.phi, self.bnn_kind)
    }

    pub fn scoring(&self) -> ScoringConfig {
        ScoringConfig {
            phi: self.phi_config(),
            coverage_penalty: self.coverage_penalty,
            faithfulness_penalty: self.faithfulness_penalty,
            k: Some(self.k),
        }
    }

    pub fn providers(&self) -> CliResult<Providers> {
        Ok(match self.provider {
            ProviderMode::Synthetic => Providers::synthetic(self.seed),
            ProviderMode::File => Providers {
                embedder: Box::new(FileEmbeddings::load(
                    self.require("embeddings", &self.embeddings)?,
                )?),
                tagger: Box::new(FileTags::load(self.require("tags", &self.tags)?)?),
                nli: Box::new(FileNli::load(self.require("nli", &self.nli)?)?),
            },
        })
    }

    /// Hash of every setting that can change an artifact. Paths, the output directory and
    /// the thread count are excluded; inputs are identified by content in the manifest.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        for p in [
            &mut canonical.corpus,
            &mut canonical.candidates,
            &mut canonical.embeddings,
            &mut canonical.tags,
            &mut canonical.nli,
            &mut canonical.ssds_table,
        ]
        .into_iter()
        .flatten()
        {
            *p = PathBuf::from(p.file_name().unwrap_or_default());
        }
        canonical.out_dir = PathBuf::new();
        canonical.threads = 0;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
