//! Resolution of command-line flags, config file and environment into one
//! experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unlabeled_detect::experiments::{build_experiment, ExperimentId};
use unlabeled_detect::montecarlo::{DetectorKind, MIN_RUNS};
use unlabeled_detect::probability::HypothesisModel;
use unlabeled_detect::Error;

pub const SEED_ENV: &str = "UNLABELED_DETECT_SEED";
const DEFAULT_SEED: u64 = 1;
const DEFAULT_RUNS: usize = 10_000;
const DEFAULT_DELTA: f64 = 0.1;

/// Flags shared by every subcommand. Each overrides the matching config
/// file entry.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// JSON config file; flags given on the command line take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Benchmark model: exp1, exp2, exp3, or custom (needs --model)
    #[arg(long)]
    pub experiment: Option<String>,
    /// Model file for the custom experiment
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Alphabet size
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of observations
    #[arg(long)]
    pub n: Option<usize>,
    /// Off-peak mass of the second experiment, in (0, 1)
    #[arg(long)]
    pub delta: Option<f64>,
    /// Monte Carlo trials per hypothesis
    #[arg(long)]
    pub runs: Option<usize>,
    /// Base seed [default: $UNLABELED_DETECT_SEED, else 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated detectors: labeled, ulr, detA, detB, auction, hungarian
    #[arg(long)]
    pub detectors: Option<String>,
    /// Output directory [default: .]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads [default: all cores]; results do not depend on it
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write a gnuplot script next to each CSV
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<String>,
    model: Option<PathBuf>,
    m: Option<usize>,
    n: Option<usize>,
    delta: Option<f64>,
    runs: Option<usize>,
    seed: Option<u64>,
    detectors: Option<String>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    gnuplot: Option<bool>,
}

/// Fully resolved configuration. The serialized form (without the output
/// directory and thread count, which do not affect results) is echoed into
/// every output header and hashed.
#[derive(Serialize, Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    pub m: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub runs: usize,
    pub seed: u64,
    pub detectors: Vec<String>,
    #[serde(skip)]
    pub detector_kinds: Vec<DetectorKind>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub gnuplot: bool,
    #[serde(skip)]
    custom_model: Option<HypothesisModel>,
}

fn default_m(id: ExperimentId) -> usize {
    match id {
        ExperimentId::Exp1 => 3,
        ExperimentId::Exp2 => 5,
        ExperimentId::Exp3 => 2,
        ExperimentId::Custom => 0,
    }
}

fn default_n(id: ExperimentId) -> usize {
    match id {
        ExperimentId::Exp2 => 20,
        _ => 100,
    }
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}: '{v}' is not an unsigned integer")).into()),
        Err(_) => Ok(None),
    }
}

fn config_error(msg: String) -> anyhow::Error {
    Error::Config(msg).into()
}

/// Loads a model file, reporting any clamping applied to its PMFs on
/// stderr.
pub fn load_model(path: &Path) -> Result<HypothesisModel> {
    let text = fs::read_to_string(path).with_context(|| format!("model: cannot read {}", path.display()))?;
    let (model, report) = HypothesisModel::from_json(&text)?;
    if !report.corrected_classes.is_empty() {
        eprintln!(
            "warning: {}: PMFs of {} were clamped or renormalized (largest change {:.3e})",
            path.display(),
            report.corrected_classes.join(", "),
            report.max_correction
        );
    }
    Ok(model)
}

impl ExperimentConfig {
    pub fn resolve(args: &CommonArgs, default_detectors: &str) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text =
                    fs::read_to_string(path).with_context(|| format!("config: cannot read {}", path.display()))?;
                serde_json::from_str::<FileConfig>(&text)
                    .map_err(|e| config_error(format!("config: {}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };

        let experiment: ExperimentId = match args.experiment.clone().or(file.experiment) {
            Some(id) => id.parse()?,
            None if args.model.is_some() || file.model.is_some() => ExperimentId::Custom,
            None => ExperimentId::Exp1,
        };
        let model_path = args.model.clone().or(file.model);
        let m_flag = args.m.or(file.m);
        let custom_model = match experiment {
            ExperimentId::Custom => {
                let path = model_path
                    .as_ref()
                    .ok_or_else(|| config_error("model: the custom experiment needs --model".into()))?;
                Some(load_model(path)?)
            }
            _ => {
                if model_path.is_some() {
                    return Err(config_error(format!("model: only the custom experiment reads a model file, not {experiment}")));
                }
                None
            }
        };
        let m = match (&custom_model, m_flag) {
            (Some(model), Some(m)) if m != model.alphabet_size() => {
                return Err(config_error(format!(
                    "m: the model file has m = {}, but m = {m} was requested",
                    model.alphabet_size()
                )))
            }
            (Some(model), _) => model.alphabet_size(),
            (None, Some(m)) => m,
            (None, None) => default_m(experiment),
        };
        let n = args.n.or(file.n).unwrap_or(default_n(experiment));
        let delta = match experiment {
            ExperimentId::Exp2 => Some(args.delta.or(file.delta).unwrap_or(DEFAULT_DELTA)),
            _ => {
                if args.delta.or(file.delta).is_some() {
                    return Err(config_error(format!("delta: only exp2 takes delta, not {experiment}")));
                }
                None
            }
        };
        let runs = args.runs.or(file.runs).unwrap_or(DEFAULT_RUNS);
        if runs < MIN_RUNS {
            return Err(config_error(format!("runs: at least {MIN_RUNS} are required, got {runs}")));
        }
        let seed = match args.seed.or(file.seed) {
            Some(s) => s,
            None => seed_from_env()?.unwrap_or(DEFAULT_SEED),
        };
        let detector_text = args.detectors.clone().or(file.detectors).unwrap_or_else(|| default_detectors.to_string());
        let detector_kinds = DetectorKind::parse_list(&detector_text)?;
        let threads = args.threads.or(file.threads);
        if threads == Some(0) {
            return Err(config_error("threads: must be at least 1".into()));
        }
        let cfg = ExperimentConfig {
            experiment,
            model: model_path,
            m,
            n,
            delta,
            runs,
            seed,
            detectors: detector_kinds.iter().map(|d| d.id().to_string()).collect(),
            detector_kinds,
            out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            threads,
            gnuplot: args.gnuplot || file.gnuplot.unwrap_or(false),
            custom_model,
        };
        // Surface invariant violations (m, n, delta) before any work starts.
        cfg.model_at(n)?;
        Ok(cfg)
    }

    /// The hypothesis model at sample size `n`.
    pub fn model_at(&self, n: usize) -> Result<HypothesisModel> {
        match &self.custom_model {
            Some(model) => {
                for h in [unlabeled_detect::probability::Hypothesis::H0, unlabeled_detect::probability::Hypothesis::H1] {
                    model.class_sizes(h, n).map_err(|e| config_error(format!("n: {e}")))?;
                }
                Ok(model.clone())
            }
            None => Ok(build_experiment(self.experiment, self.m, n, self.delta)?),
        }
    }

    /// Metadata lines for output headers: the resolved config as JSON, the
    /// subcommand extras, and a SHA-256 over both.
    pub fn metadata(&self, extras: &[(&str, String)]) -> Vec<(String, String)> {
        let config = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(config.as_bytes());
        for (k, v) in extras {
            hasher.update(format!("\n{k}={v}").as_bytes());
        }
        let hash: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        let mut out = vec![
            ("seed".to_string(), self.seed.to_string()),
            ("runs".to_string(), self.runs.to_string()),
            ("n".to_string(), self.n.to_string()),
            ("m".to_string(), self.m.to_string()),
            ("experiment".to_string(), self.experiment.to_string()),
            ("config".to_string(), config),
        ];
        out.extend(extras.iter().map(|(k, v)| (k.to_string(), v.clone())));
        out.push(("config hash".to_string(), hash));
        out
    }

    pub fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("out: cannot create {}", self.out.display()))
    }

    pub fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Parses a comma-separated list of positive integers.
pub fn parse_usize_list(what: &str, text: &str) -> Result<Vec<usize>> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| config_error(format!("{what}: '{s}' is not a nonnegative integer"))))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!(config_error(format!("{what}: the list is empty")));
    }
    Ok(values)
}
