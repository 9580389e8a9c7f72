//! Experiment configuration: plain `key = value` lines with dotted
//! namespaces (`sim.tau = 1.0`). Unknown keys are errors so typos surface
//! immediately.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::loss::{LossConfig, LossMode, R1Form};
use crate::sim::{ClickModel, SimConfig};
use crate::train::{Objective, OptimizerKind, TrainConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("configuration error: {0}")]
    Invalid(String),
}

/// Everything a batch command needs, with sensible defaults throughout.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Labeled dataset in SVMLight format; empty means use the built-in
    /// synthetic generator.
    pub data_path: String,
    pub train_frac: f64,
    pub valid_frac: f64,
    /// Synthetic generator knobs, used when `data_path` is empty.
    pub synth_queries: usize,
    pub synth_docs: usize,
    pub synth_dim: usize,
    pub sim: SimConfig,
    pub sessions_per_query: usize,
    pub ranker_sample_frac: f64,
    pub ranker_epochs: usize,
    pub train: TrainConfig,
    pub run_label: String,
    /// Which knob `sweep` iterates over: "tau", "gamma1", or "data_frac".
    pub sweep_variable: String,
    pub tau_grid: Vec<f64>,
    pub gamma1_grid: Vec<f64>,
    pub data_fracs: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data_path: String::new(),
            train_frac: 0.7,
            valid_frac: 0.1,
            synth_queries: 1000,
            synth_docs: 10,
            synth_dim: 20,
            sim: SimConfig::default(),
            sessions_per_query: 20,
            ranker_sample_frac: 0.01,
            ranker_epochs: 10,
            train: TrainConfig::default(),
            run_label: "run".into(),
            sweep_variable: "tau".into(),
            tau_grid: vec![0.0, 1.0, 2.0],
            gamma1_grid: vec![0.5],
            data_fracs: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            seeds: vec![1, 2, 3],
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::default();
        // rho tables are loaded relative to the config file's directory.
        let base = path.parent().map(PathBuf::from).unwrap_or_default();
        cfg.apply_text(&text, &base)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Line {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim(), base)
                .map_err(|msg| ConfigError::Line { line: line_no, msg })?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("bad value `{v}`"))
        }
        fn list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>, String> {
            v.split(',')
                .map(|s| s.trim().parse().map_err(|_| format!("bad list entry `{s}`")))
                .collect()
        }
        fn survival(t: &mut TrainConfig) -> Result<&mut LossConfig, String> {
            match &mut t.objective {
                Objective::Survival(lc) => Ok(lc),
                Objective::ClickBce => Err("loss.* options do not apply to click-only mode".into()),
            }
        }
        match key {
            "data.path" => self.data_path = value.into(),
            "data.train_frac" => self.train_frac = num(value)?,
            "data.valid_frac" => self.valid_frac = num(value)?,
            "data.synth_queries" => self.synth_queries = num(value)?,
            "data.synth_docs" => self.synth_docs = num(value)?,
            "data.synth_dim" => self.synth_dim = num(value)?,
            "sim.model" => {
                self.sim.model = match value {
                    "pbm" => ClickModel::Pbm,
                    "ccm" => ClickModel::Ccm,
                    other => return Err(format!("unknown click model `{other}`")),
                }
            }
            "sim.tau" => self.sim.tau = num(value)?,
            "sim.gamma1" => self.sim.gamma1 = num(value)?,
            "sim.gamma2" => self.sim.gamma2 = num(value)?,
            "sim.gamma3" => self.sim.gamma3 = num(value)?,
            "sim.preset" => {
                let (g2, g3) = SimConfig::ccm_preset(value).map_err(|e| e.to_string())?;
                self.sim.gamma2 = g2;
                self.sim.gamma3 = g3;
            }
            "sim.epsilon" => self.sim.epsilon = num(value)?,
            "sim.y_max" => self.sim.y_max = num(value)?,
            "sim.overshoot" => self.sim.overshoot = num(value)?,
            "sim.max_list_len" => self.sim.max_list_len = num(value)?,
            "sim.rho_path" => {
                let path = base.join(value);
                let text = fs::read_to_string(&path)
                    .map_err(|e| format!("cannot read rho schedule {}: {e}", path.display()))?;
                let mut rho = Vec::new();
                for tok in text.split_whitespace() {
                    rho.push(tok.parse::<f64>().map_err(|_| format!("bad rho value `{tok}`"))?);
                }
                self.sim.rho = Some(rho);
            }
            "sim.sessions_per_query" => self.sessions_per_query = num(value)?,
            "ranker.sample_frac" => self.ranker_sample_frac = num(value)?,
            "ranker.epochs" => self.ranker_epochs = num(value)?,
            "train.lr" => self.train.learning_rate = num(value)?,
            "train.batch_size" => self.train.batch_size = num(value)?,
            "train.epochs" => self.train.epochs = num(value)?,
            "train.hidden_dim" => self.train.hidden_dim = num(value)?,
            "train.optimizer" => {
                self.train.optimizer = match value {
                    "sgd" => OptimizerKind::Sgd,
                    "adam" => OptimizerKind::Adam,
                    other => return Err(format!("unknown optimizer `{other}`")),
                }
            }
            "train.grad_clip" => {
                self.train.grad_clip = if value == "none" {
                    None
                } else {
                    Some(num(value)?)
                }
            }
            "loss.mode" => {
                let lc = survival(&mut self.train)?;
                lc.mode = match value {
                    "point" => LossMode::Point,
                    "pair" => LossMode::Pair,
                    other => return Err(format!("unknown loss mode `{other}`")),
                }
            }
            "loss.alpha" => {
                let alpha: f64 = num(value)?;
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(format!("alpha {alpha} outside [0,1]"));
                }
                survival(&mut self.train)?.alpha = alpha;
            }
            "loss.pairs_per_session" => survival(&mut self.train)?.pairs_per_session = num(value)?,
            "loss.r1_form" => {
                survival(&mut self.train)?.r1_form = match value {
                    "unbounded" => R1Form::Unbounded,
                    "bounded" => R1Form::Bounded,
                    other => return Err(format!("unknown r1 form `{other}`")),
                }
            }
            "loss.kappa" => {
                let kappa: f64 = num(value)?;
                if !(0.0..1.0).contains(&kappa) {
                    return Err(format!("kappa {kappa} outside [0,1)"));
                }
                survival(&mut self.train)?.kappa = kappa;
            }
            "run.label" => self.run_label = value.into(),
            "sweep.variable" => match value {
                "tau" | "gamma1" | "data_frac" => self.sweep_variable = value.into(),
                other => {
                    return Err(format!(
                        "unknown sweep variable `{other}` (expected tau, gamma1 or data_frac)"
                    ))
                }
            },
            "sweep.tau_grid" => self.tau_grid = list(value)?,
            "sweep.gamma1_grid" => self.gamma1_grid = list(value)?,
            "sweep.data_fracs" => self.data_fracs = list(value)?,
            "sweep.seeds" => self.seeds = list(value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(
            "sim.tau = 1.5\nsim.model = pbm # inline comment\nloss.alpha = 0.25\nsweep.seeds = 4, 5, 6\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(cfg.sim.tau, 1.5);
        assert_eq!(cfg.sim.model, ClickModel::Pbm);
        match &cfg.train.objective {
            Objective::Survival(lc) => assert_eq!(lc.alpha, 0.25),
            _ => panic!(),
        }
        assert_eq!(cfg.seeds, vec![4, 5, 6]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.apply_text("sim.taau = 1.0", Path::new(".")).is_err());
        assert!(cfg.apply_text("sim.tau == 1.0", Path::new(".")).is_err());
        assert!(cfg.apply_text("loss.alpha = 1.5", Path::new(".")).is_err());
    }

    #[test]
    fn preset_sets_gammas() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("sim.preset = informational", Path::new(".")).unwrap();
        assert_eq!((cfg.sim.gamma2, cfg.sim.gamma3), (0.40, 0.27));
    }

    #[test]
    fn click_only_forbids_loss_options() {
        let mut cfg = ExperimentConfig::default();
        cfg.train.objective = Objective::ClickBce;
        assert!(cfg.apply_text("loss.alpha = 0.5", Path::new(".")).is_err());
    }
}
