//! `key = value` training configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Recognised keys:
//! `learning_rate`, `epochs`, `batch_size`, `optimizer` (`adam` | `sgd`),
//! `seed`, `early_stop_patience` (integer or `none`), `leaky_slope`, and
//! `split` (three comma-separated ratios: train, val, test).

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::DEFAULT_LEAKY_SLOPE;
use crate::train::optim::OptimizerKind;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub early_stop_patience: Option<usize>,
    pub leaky_slope: f64,
    pub split: (f64, f64, f64),
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 4,
            batch_size: 16,
            optimizer: OptimizerKind::Adam,
            seed: 42,
            early_stop_patience: Some(5),
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            split: (0.6, 0.2, 0.2),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !self.leaky_slope.is_finite() {
            return Err(Error::invalid("leaky_slope must be finite"));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("config line {}: expected key=value", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::invalid(format!("config line {}: {key}: {what} '{value}'", n + 1));
            match key {
                "learning_rate" => cfg.learning_rate = value.parse().map_err(|_| bad("not a number"))?,
                "epochs" => cfg.epochs = value.parse().map_err(|_| bad("not an integer"))?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("not an integer"))?,
                "optimizer" => cfg.optimizer = value.parse()?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("not an integer"))?,
                "early_stop_patience" => {
                    cfg.early_stop_patience = match value {
                        "none" | "" => None,
                        v => Some(v.parse().map_err(|_| bad("not an integer"))?),
                    }
                }
                "leaky_slope" => cfg.leaky_slope = value.parse().map_err(|_| bad("not a number"))?,
                "split" => {
                    let parts: Vec<f64> = value
                        .split(',')
                        .map(|p| p.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("not three numbers"))?;
                    match parts[..] {
                        [a, b, c] => cfg.split = (a, b, c),
                        _ => return Err(bad("not three numbers")),
                    }
                }
                other => {
                    return Err(Error::invalid(format!(
                        "config line {}: unknown key '{other}'",
                        n + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        format!(
            "learning_rate={}\nepochs={}\nbatch_size={}\noptimizer={}\nseed={}\nearly_stop_patience={}\nleaky_slope={}\nsplit={},{},{}\n",
            self.learning_rate,
            self.epochs,
            self.batch_size,
            self.optimizer,
            self.seed,
            self.early_stop_patience
                .map(|p| p.to_string())
                .unwrap_or_else(|| "none".into()),
            self.leaky_slope,
            self.split.0,
            self.split.1,
            self.split.2,
        )
    }
}
