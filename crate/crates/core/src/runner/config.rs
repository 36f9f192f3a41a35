//! Experiment configuration file format (JSON).

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::SyntheticSpec;
use crate::error::{Error, Result};
use crate::lm::QuerySampling;
use crate::metrics::{CostModel, CostParameter};
use crate::session::{MixedInitiative, Strategy};
use crate::text::Preprocessor;

/// An inclusive integer range in the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRange {
    pub min: u32,
    pub max: u32,
}

impl GridRange {
    pub fn values(&self) -> impl Iterator<Item = u32> {
        self.min..=self.max
    }

    pub fn len(&self) -> u64 {
        if self.max < self.min {
            0
        } else {
            u64::from(self.max - self.min) + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.max < self.min
    }

    pub fn contains(&self, v: u32) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

/// The swept schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub q: GridRange,
    pub f: GridRange,
    pub a: GridRange,
    pub l: GridRange,
}

/// Where the corpus comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    /// Load documents, topics, and qrels from files.
    Files {
        documents: PathBuf,
        topics: PathBuf,
        qrels: PathBuf,
    },
    /// Generate a corpus from a synthetic spec.
    Synthetic {
        #[serde(flatten)]
        spec: SyntheticSpec,
        seed: u64,
    },
}

/// Where clarification questions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankSource {
    /// Load a bank file.
    File(PathBuf),
    /// Derive clarifications from the corpus facets.
    Synthetic {
        rounds: usize,
        terms_per_answer: usize,
    },
}

/// Pre-processing applied to file-loaded text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessingChoice {
    /// Lowercase, stopword removal, Porter stemming.
    #[default]
    Standard,
    /// Tokenize only (input already processed).
    Identity,
}

impl PreprocessingChoice {
    pub fn preprocessor(&self) -> Preprocessor {
        match self {
            PreprocessingChoice::Standard => Preprocessor::standard(),
            PreprocessingChoice::Identity => Preprocessor::identity(),
        }
    }
}

/// One cost-sensitivity multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityStep {
    pub parameter: CostParameter,
    pub factor: f64,
}

fn default_min_facets() -> usize {
    4
}

fn default_min_rel() -> usize {
    10
}

fn default_budget() -> f64 {
    600.0
}

fn default_lambda() -> f64 {
    0.5
}

fn default_mu() -> f64 {
    2500.0
}

fn default_term_cutoff() -> usize {
    20
}

fn default_true() -> bool {
    true
}

fn default_report_l() -> u32 {
    2
}

fn default_targets() -> Vec<f64> {
    vec![1.0, 5.0, 9.0]
}

/// Full description of one experiment sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub corpus: CorpusSource,
    #[serde(default)]
    pub bank: Option<BankSource>,
    #[serde(default)]
    pub preprocessing: PreprocessingChoice,
    /// Topic filter: minimum facet count.
    #[serde(default = "default_min_facets")]
    pub min_facets: usize,
    /// Topic filter: minimum relevant documents.
    #[serde(default = "default_min_rel")]
    pub min_rel: usize,
    pub grid: Grid,
    pub strategies: Vec<Strategy>,
    /// Feedback mechanisms to cross with the strategies. The no-feedback
    /// baseline cell is always included and must not be listed here.
    pub mixed_initiatives: Vec<MixedInitiative>,
    pub repetitions: u32,
    #[serde(default = "default_budget")]
    pub budget_seconds: f64,
    #[serde(default)]
    pub cost_model: CostModel,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_term_cutoff")]
    pub term_cutoff: usize,
    #[serde(default)]
    pub query_sampling: QuerySampling,
    #[serde(default)]
    pub carry_feedback: bool,
    #[serde(default)]
    pub sensitivity: Vec<SensitivityStep>,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    #[serde(default = "default_true")]
    pub persist_traces: bool,
    /// Query length used for single-length report tables.
    #[serde(default = "default_report_l")]
    pub report_query_length: u32,
    /// Gain targets for the best-settings table.
    #[serde(default = "default_targets")]
    pub gain_targets: Vec<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let config: ExperimentConfig = serde_json::from_reader(reader)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, range, min_allowed) in [
            ("q", self.grid.q, 1),
            ("f", self.grid.f, 0),
            ("a", self.grid.a, 1),
            ("l", self.grid.l, 1),
        ] {
            if range.max < range.min {
                return Err(Error::Config(format!(
                    "grid range {name} is empty ({}..{})",
                    range.min, range.max
                )));
            }
            if range.min < min_allowed {
                return Err(Error::Config(format!(
                    "grid range {name} must start at {min_allowed} or above"
                )));
            }
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        let mut seen_strategies = std::collections::BTreeSet::new();
        if !self.strategies.iter().all(|s| seen_strategies.insert(s)) {
            return Err(Error::Config("strategies must be distinct".into()));
        }
        let mut seen_mis = std::collections::BTreeSet::new();
        if !self.mixed_initiatives.iter().all(|m| seen_mis.insert(m)) {
            return Err(Error::Config("mixed_initiatives must be distinct".into()));
        }
        if self
            .mixed_initiatives
            .contains(&MixedInitiative::NoFeedback)
        {
            return Err(Error::Config(
                "mixed_initiatives must not list `none`; the baseline cell is always included"
                    .into(),
            ));
        }
        if self.repetitions < 1 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if !self.budget_seconds.is_finite() || self.budget_seconds <= 0.0 {
            return Err(Error::Config("budget_seconds must be positive".into()));
        }
        if self.term_cutoff < self.grid.l.max as usize {
            return Err(Error::Config(format!(
                "term_cutoff {} cannot satisfy the maximum query length {}",
                self.term_cutoff, self.grid.l.max
            )));
        }
        for step in &self.sensitivity {
            if !step.factor.is_finite() || step.factor <= 0.0 {
                return Err(Error::Config(format!(
                    "sensitivity factor for {} must be positive, got {}",
                    step.parameter, step.factor
                )));
            }
        }
        for target in &self.gain_targets {
            if !target.is_finite() || *target <= 0.0 {
                return Err(Error::Config("gain targets must be positive".into()));
            }
        }
        self.cost_model.validate()
    }
}
