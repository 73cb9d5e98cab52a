//! Experiment configuration.
//!
//! The config file holds one `key = value` pair per line; `#` starts a
//! comment and blank lines are ignored. List values are comma-separated.
//! Recognized keys (defaults in brackets):
//!
//! | key | meaning |
//! |---|---|
//! | `data` | dataset directory with `train.csv` and `test.csv` |
//! | `seed` | master seed, required |
//! | `out` | output directory |
//! | `setting` | training setting for `train` [`baseline`] |
//! | `settings` | settings compared by `report`, baseline first [`baseline, fp+fl`] |
//! | `epochs` | training epochs [5] |
//! | `batch_size` | [32] |
//! | `lr` | learning rate [0.01] |
//! | `bootstrap` | bootstrap iterations B [5000] |
//! | `eval_images` | minimum evaluation subset size N [100] |
//! | `methods` | saliency methods [`CAM, IG, Occlusion, RISE`] |
//! | `metrics` | faithfulness metrics [all eight] |
//! | `risk` | benchmark-size risk [0.05] |
//! | `p_samp` | benchmark-size sampling probability [0.5] |
//! | `search` | `binary` or `scan` [`binary`] |
//! | `deletion_order` | `most` or `least` salient first [`most`] |
//! | `oracle` | `toy` or `bridge:<command>` [`toy`] |
//! | `bridge_timeout` | seconds to wait for a bridge answer [30] |
//! | `rise_masks` | [1000] |
//! | `ig_steps` | [32] |
//! | `smooth_samples` | [30] |
//! | `betas` | interpolation sweep [`0, 0.1, ..., 1`] |
//! | `threads` | worker threads, 0 for all cores [0] |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use relbench_core::benchsize::SearchMode;
use relbench_core::metrics::{DeletionOrder, MetricKind};
use relbench_core::saliency::MethodKind;
use relbench_core::train::TrainingSetting;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum OracleSpec {
    Toy,
    Bridge(String),
}

impl FromStr for OracleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "toy" {
            Ok(OracleSpec::Toy)
        } else if let Some(cmd) = s.strip_prefix("bridge:") {
            let cmd = cmd.trim().trim_matches('"');
            if cmd.is_empty() {
                return Err(Error::Config("bridge oracle needs a command".into()));
            }
            Ok(OracleSpec::Bridge(cmd.to_string()))
        } else {
            Err(Error::Config(format!("oracle must be `toy` or `bridge:<command>`, got `{s}`")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub setting: TrainingSetting,
    pub settings: Vec<TrainingSetting>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub bootstrap: usize,
    pub eval_images: usize,
    pub methods: Vec<MethodKind>,
    pub metrics: Vec<MetricKind>,
    pub risk: f64,
    pub p_samp: f64,
    pub search: SearchMode,
    pub deletion_order: DeletionOrder,
    pub oracle: OracleSpec,
    pub bridge_timeout: f64,
    pub rise_masks: usize,
    pub ig_steps: usize,
    pub smooth_samples: usize,
    pub betas: Vec<f64>,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: None,
            seed: None,
            out: None,
            setting: TrainingSetting::BASELINE,
            settings: vec![
                TrainingSetting::BASELINE,
                TrainingSetting {
                    fp: true,
                    ap: false,
                    fl: true,
                },
            ],
            epochs: 5,
            batch_size: 32,
            lr: 1e-2,
            bootstrap: 5000,
            eval_images: 100,
            methods: vec![
                MethodKind::Cam,
                MethodKind::IntegratedGradients,
                MethodKind::Occlusion,
                MethodKind::Rise,
            ],
            metrics: MetricKind::ALL.to_vec(),
            risk: 0.05,
            p_samp: 0.5,
            search: SearchMode::Binary,
            deletion_order: DeletionOrder::MostSalientFirst,
            oracle: OracleSpec::Toy,
            bridge_timeout: 30.0,
            rise_masks: 1000,
            ig_steps: 32,
            smooth_samples: 30,
            betas: (0..=10).map(|i| f64::from(i) / 10.0).collect(),
            threads: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

fn list<T>(key: &str, v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let out: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Config(format!("`{key}` needs at least one value")));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let core = |e: relbench_core::Error| Error::Config(format!("`{key}`: {e}"));
        match key.trim() {
            "data" => self.data = Some(PathBuf::from(v)),
            "seed" => self.seed = Some(parse(key, v)?),
            "out" => self.out = Some(PathBuf::from(v)),
            "setting" => self.setting = v.parse().map_err(core)?,
            "settings" => self.settings = list(key, v, |s| s.parse().map_err(core))?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "bootstrap" => self.bootstrap = parse(key, v)?,
            "eval_images" => self.eval_images = parse(key, v)?,
            "methods" => self.methods = list(key, v, |s| s.parse().map_err(core))?,
            "metrics" => self.metrics = list(key, v, |s| s.parse().map_err(core))?,
            "risk" => self.risk = parse(key, v)?,
            "p_samp" => self.p_samp = parse(key, v)?,
            "search" => {
                self.search = match v {
                    "binary" => SearchMode::Binary,
                    "scan" => SearchMode::Scan,
                    _ => return Err(Error::Config(format!("search must be binary or scan, got `{v}`"))),
                }
            }
            "deletion_order" => {
                self.deletion_order = match v {
                    "most" => DeletionOrder::MostSalientFirst,
                    "least" => DeletionOrder::LeastSalientFirst,
                    _ => return Err(Error::Config(format!("deletion_order must be most or least, got `{v}`"))),
                }
            }
            "oracle" => self.oracle = v.parse()?,
            "bridge_timeout" => self.bridge_timeout = parse(key, v)?,
            "rise_masks" => self.rise_masks = parse(key, v)?,
            "ig_steps" => self.ig_steps = parse(key, v)?,
            "smooth_samples" => self.smooth_samples = parse(key, v)?,
            "betas" => self.betas = list(key, v, |s| parse(key, s))?,
            "threads" => self.threads = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required (`seed = ...` or --seed)".into()))
    }

    pub fn data(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset given (`data = ...` or --data)".into()))
    }

    pub fn out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory given (`out = ...` or --out)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.bootstrap == 0 || self.eval_images == 0 {
            return Err(Error::Config("epochs, batch_size, bootstrap and eval_images must be positive".into()));
        }
        if !(self.risk > 0.0 && self.risk < 1.0) {
            return Err(Error::Config(format!("risk {} outside (0, 1)", self.risk)));
        }
        relbench_core::benchsize::sampling_step(self.p_samp)
            .map_err(|e| Error::Config(format!("p_samp: {e}")))?;
        if self.betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::Config("betas must lie in [0, 1]".into()));
        }
        Ok(())
    }
}
