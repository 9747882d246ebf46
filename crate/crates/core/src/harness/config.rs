use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::DEFAULT_SAMPLES;
use crate::ic::GraphKind;

/// Algorithms a sweep can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    Tgp,
    Trgp,
    Rmg,
    Gt,
    FullyAdaptive,
    Random,
    PiA,
    PiB,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Tgp,
        Algorithm::Trgp,
        Algorithm::Rmg,
        Algorithm::Gt,
        Algorithm::FullyAdaptive,
        Algorithm::Random,
        Algorithm::PiA,
        Algorithm::PiB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Tgp => "TGP",
            Algorithm::Trgp => "TRGP",
            Algorithm::Rmg => "RMG",
            Algorithm::Gt => "GT",
            Algorithm::FullyAdaptive => "FULLY_ADAPTIVE",
            Algorithm::Random => "RANDOM",
            Algorithm::PiA => "PI_A",
            Algorithm::PiB => "PI_B",
        }
    }

    /// The initial-set size this algorithm runs with when the sweep asks
    /// for `l` at budget `k`.
    pub fn effective_l(self, l: usize, k: usize) -> usize {
        match self {
            Algorithm::Gt => k,
            Algorithm::FullyAdaptive | Algorithm::Random => 0,
            Algorithm::PiA => k.saturating_sub(1),
            Algorithm::PiB => 1,
            Algorithm::Tgp | Algorithm::Trgp | Algorithm::Rmg => l,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticGraph {
    pub kind: GraphKind,
    pub nodes: usize,
    pub edges: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    /// Edge-list file; relative paths resolve against the config's directory.
    Path(PathBuf),
    Synthetic(SyntheticGraph),
}

/// An initial-set size: absolute, or a fraction of k.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LValue {
    Absolute(usize),
    Fraction(f64),
}

impl LValue {
    /// Fractions round half-up and are clamped to [1, k − 1].
    pub fn resolve(self, k: usize) -> Result<usize> {
        match self {
            LValue::Absolute(l) if l <= k => Ok(l),
            LValue::Absolute(l) => Err(Error::Config(format!("l = {l} exceeds k = {k}"))),
            LValue::Fraction(f) if (0.0..=1.0).contains(&f) => {
                let l = (f * k as f64 + 0.5).floor() as usize;
                Ok(l.clamp(1, k.saturating_sub(1).max(1)))
            }
            LValue::Fraction(f) => Err(Error::Config(format!("fraction {f} outside [0, 1]"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorBudget {
    /// Draws per task for training-time marginals.
    #[serde(default = "default_samples")]
    pub train_samples: usize,
    /// Draws per test-time marginal query.
    #[serde(default = "default_samples")]
    pub test_samples: usize,
}

impl Default for EstimatorBudget {
    fn default() -> Self {
        EstimatorBudget { train_samples: DEFAULT_SAMPLES, test_samples: DEFAULT_SAMPLES }
    }
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_repetitions() -> usize {
    100
}

fn default_choices() -> Vec<f64> {
    vec![0.1, 0.01]
}

fn default_true() -> bool {
    true
}

fn default_runs() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub m_train: usize,
    pub m_test: usize,
    pub k_values: Vec<usize>,
    pub l_values: Vec<LValue>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub estimator: EstimatorBudget,
    #[serde(default = "default_choices")]
    pub edge_prob_choices: Vec<f64>,
    /// Policy executions per test task, each on a fresh realization.
    #[serde(default = "default_runs")]
    pub runs_per_test_task: usize,
    /// Wall time is the only nondeterministic column; off gives
    /// byte-identical tables across reruns.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
}

/// One (algorithm, l, k) cell of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub algorithm: Algorithm,
    pub l: usize,
    pub k: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config; a relative graph path is resolved against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let GraphSpec::Path(p) = &mut cfg.graph {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.m_train == 0 || self.m_test == 0 {
            return bad("m_train and m_test must be positive");
        }
        if self.k_values.is_empty() || self.l_values.is_empty() || self.algorithms.is_empty() {
            return bad("k_values, l_values and algorithms must be non-empty");
        }
        if self.k_values.contains(&0) {
            return bad("k must be positive");
        }
        if self.repetitions == 0 || self.runs_per_test_task == 0 {
            return bad("repetitions and runs_per_test_task must be positive");
        }
        if self.edge_prob_choices.is_empty() || self.edge_prob_choices.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return bad("edge_prob_choices must be non-empty probabilities in (0, 1]");
        }
        if self.estimator.train_samples == 0 || self.estimator.test_samples == 0 {
            return bad("estimator sample counts must be positive");
        }
        if self.algorithms.contains(&Algorithm::PiB) && self.k_values.iter().any(|k| *k < 2) {
            return bad("PI_B needs k >= 2");
        }
        self.cells().map(|_| ())
    }

    /// Cells in sweep order (k outer, l, then algorithm), without repeats.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut out: Vec<Cell> = Vec::new();
        for &k in &self.k_values {
            for lv in &self.l_values {
                let l = lv.resolve(k)?;
                for &algorithm in &self.algorithms {
                    let cell = Cell { algorithm, l: algorithm.effective_l(l, k), k };
                    if !out.contains(&cell) {
                        out.push(cell);
                    }
                }
            }
        }
        Ok(out)
    }
}
