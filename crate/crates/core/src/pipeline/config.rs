//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lm::{LmConfig, TrainConfig};
use crate::ngram::NegativeDevMode;

/// Environment variable naming the directory under which runs are written
/// when a config has no `output_dir`.
pub const OUTPUT_ROOT_ENV: &str = "ANTIMODEL_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "antimodel-runs";
pub const DEFAULT_ALPHA_SWEEP: [f64; 5] = [0.0, 1.0, 2.0, 4.0, 8.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: Option<PathBuf>,
    pub agreement: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub vocab_min_count: usize,
    pub ngram_order: usize,
    pub alpha_sweep: Vec<f64>,
    pub master_seed: u64,
    pub negative_dev_mode: NegativeDevMode,
    pub include_flagged: bool,
    /// Write measured epoch durations to the metrics; when false the column
    /// is 0 so repeated runs produce identical files.
    pub record_wall_clock: bool,
    pub lm: LmConfig,
    /// Template for every run; `alpha` is overridden per sweep entry.
    pub training: TrainConfig,
}

impl ExperimentConfig {
    /// Defaults for everything except the required corpora.
    pub fn new(train: PathBuf, dev: PathBuf, output_dir: PathBuf) -> Self {
        ExperimentConfig {
            train,
            dev,
            test: None,
            agreement: None,
            output_dir,
            vocab_min_count: 1,
            ngram_order: 3,
            alpha_sweep: DEFAULT_ALPHA_SWEEP.to_vec(),
            master_seed: 1,
            negative_dev_mode: NegativeDevMode::default(),
            include_flagged: false,
            record_wall_clock: true,
            lm: LmConfig::default(),
            training: TrainConfig::default(),
        }
    }

    /// Parses config text. Relative paths resolve against `base_dir`; a
    /// missing `output_dir` falls back to `$ANTIMODEL_OUTPUT_ROOT/<name>`.
    pub fn parse(text: &str, base_dir: &Path, name: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::new(PathBuf::new(), PathBuf::new(), PathBuf::new());
        let (mut have_train, mut have_dev, mut have_out) = (false, false, false);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: format!("{name} config"),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let path = || base_dir.join(value);
            match key {
                "train" => {
                    cfg.train = path();
                    have_train = true;
                }
                "dev" => {
                    cfg.dev = path();
                    have_dev = true;
                }
                "test" => cfg.test = Some(path()),
                "agreement" => cfg.agreement = Some(path()),
                "output_dir" => {
                    cfg.output_dir = path();
                    have_out = true;
                }
                _ => cfg.set(key, value).map_err(err)?,
            }
        }
        if !have_train || !have_dev {
            return Err(Error::Config(
                "config must set both `train` and `dev`".into(),
            ));
        }
        if !have_out {
            let root = std::env::var_os(OUTPUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
            cfg.output_dir = root.join(name);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("experiment");
        Self::parse(&text, base, name)
    }

    /// Sets one non-path key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("invalid value `{v}` for `{key}`"))
        }
        let t = &mut self.training;
        let lm = &mut self.lm;
        match key {
            "vocab_min_count" => self.vocab_min_count = num(key, value)?,
            "ngram_order" => self.ngram_order = num(key, value)?,
            "alpha_sweep" => {
                self.alpha_sweep = value
                    .split(',')
                    .map(|v| num(key, v.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "master_seed" => self.master_seed = num(key, value)?,
            "negative_dev_mode" => {
                self.negative_dev_mode = value.parse().map_err(|e: Error| e.to_string())?
            }
            "include_flagged" => self.include_flagged = num(key, value)?,
            "record_wall_clock" => self.record_wall_clock = num(key, value)?,
            "embedding_dim" => lm.embedding_dim = num(key, value)?,
            "hidden_units" => lm.hidden_units = num(key, value)?,
            "num_layers" => lm.num_layers = num(key, value)?,
            "tie_embeddings" => lm.tie_embeddings = num(key, value)?,
            "dropout_keep" => lm.dropout_keep = num(key, value)?,
            "learning_rate" => t.learning_rate = num(key, value)?,
            "lr_decay" => t.lr_decay = num(key, value)?,
            "lr_hold_epochs" => t.lr_hold_epochs = num(key, value)?,
            "grad_clip_norm" => t.grad_clip_norm = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "bptt_len" => t.bptt_len = num(key, value)?,
            "unlikelihood_floor" => t.unlikelihood_floor = num(key, value)?,
            "carry_state" => t.carry_state = num(key, value)?,
            "max_negative_len" => t.max_negative_len = num(key, value)?,
            "negative_state" => {
                t.negative_state = value.parse().map_err(|e: Error| e.to_string())?
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.alpha_sweep.is_empty() {
            return bad("alpha_sweep must not be empty".into());
        }
        if let Some(a) = self
            .alpha_sweep
            .iter()
            .find(|a| !(**a >= 0.0 && a.is_finite()))
        {
            return bad(format!("alpha values must be finite and >= 0, got {a}"));
        }
        let mut ids: Vec<String> = self.alpha_sweep.iter().map(|&a| run_id(a)).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.alpha_sweep.len() {
            return bad("alpha_sweep contains duplicates".into());
        }
        if self.ngram_order == 0 || self.ngram_order > crate::ngram::MAX_ORDER {
            return bad(format!(
                "ngram_order must be in 1..={}, got {}",
                crate::ngram::MAX_ORDER,
                self.ngram_order
            ));
        }
        if self.vocab_min_count == 0 {
            return bad("vocab_min_count must be >= 1".into());
        }
        self.lm.validate()?;
        self.training.validate()
    }

    /// Input files must exist before a run starts.
    pub fn check_paths(&self) -> Result<()> {
        let inputs = [
            Some(&self.train),
            Some(&self.dev),
            self.test.as_ref(),
            self.agreement.as_ref(),
        ];
        for p in inputs.into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "input file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    /// Training settings for one sweep entry.
    pub fn train_config(&self, alpha: f64) -> TrainConfig {
        TrainConfig {
            alpha,
            ..self.training.clone()
        }
    }

    /// Every key with its effective value, in a fixed order. The output
    /// directory is omitted so that reruns into different directories
    /// echo identical text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("train", self.train.display().to_string());
        kv("dev", self.dev.display().to_string());
        if let Some(p) = &self.test {
            kv("test", p.display().to_string());
        }
        if let Some(p) = &self.agreement {
            kv("agreement", p.display().to_string());
        }
        kv("vocab_min_count", self.vocab_min_count.to_string());
        kv("ngram_order", self.ngram_order.to_string());
        kv(
            "alpha_sweep",
            self.alpha_sweep
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("master_seed", self.master_seed.to_string());
        kv("negative_dev_mode", self.negative_dev_mode.to_string());
        kv("include_flagged", self.include_flagged.to_string());
        kv("record_wall_clock", self.record_wall_clock.to_string());
        let lm = &self.lm;
        kv("embedding_dim", lm.embedding_dim.to_string());
        kv("hidden_units", lm.hidden_units.to_string());
        kv("num_layers", lm.num_layers.to_string());
        kv("tie_embeddings", lm.tie_embeddings.to_string());
        kv("dropout_keep", lm.dropout_keep.to_string());
        let t = &self.training;
        kv("learning_rate", t.learning_rate.to_string());
        kv("lr_decay", t.lr_decay.to_string());
        kv("lr_hold_epochs", t.lr_hold_epochs.to_string());
        kv("grad_clip_norm", t.grad_clip_norm.to_string());
        kv("epochs", t.epochs.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("bptt_len", t.bptt_len.to_string());
        kv("unlikelihood_floor", t.unlikelihood_floor.to_string());
        kv("carry_state", t.carry_state.to_string());
        kv("max_negative_len", t.max_negative_len.to_string());
        kv("negative_state", t.negative_state.to_string());
        out
    }
}

/// Run identifier for one sweep entry, e.g. `alpha_8` or `alpha_0.5`.
pub fn run_id(alpha: f64) -> String {
    format!("alpha_{alpha}")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "\
# toy experiment
train = data/train.txt
dev = data/dev.txt   # held out
output_dir = out
alpha_sweep = 0, 8
epochs = 3
hidden_units = 16
negative_dev_mode = single_pass
";

    #[test]
    fn parses_and_resolves_relative_paths() {
        let cfg = ExperimentConfig::parse(TEXT, Path::new("/exp"), "toy").unwrap();
        assert_eq!(cfg.train, PathBuf::from("/exp/data/train.txt"));
        assert_eq!(cfg.dev, PathBuf::from("/exp/data/dev.txt"));
        assert_eq!(cfg.output_dir, PathBuf::from("/exp/out"));
        assert_eq!(cfg.alpha_sweep, vec![0.0, 8.0]);
        assert_eq!(cfg.training.epochs, 3);
        assert_eq!(cfg.lm.hidden_units, 16);
        assert_eq!(cfg.negative_dev_mode, NegativeDevMode::SinglePass);
        assert_eq!(cfg.ngram_order, 3);
    }

    #[test]
    fn default_sweep_is_zero_to_eight() {
        let cfg =
            ExperimentConfig::parse("train = a\ndev = b\noutput_dir = o\n", Path::new("."), "x")
                .unwrap();
        assert_eq!(cfg.alpha_sweep, vec![0.0, 1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::parse(TEXT, Path::new("/exp"), "toy").unwrap();
        let echoed = format!("{}output_dir = /exp/out\n", cfg.to_text());
        let back = ExperimentConfig::parse(&echoed, Path::new("/elsewhere"), "toy").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_input() {
        let base = Path::new(".");
        for text in [
            "train = a\n",
            "train = a\ndev = b\nalpha_sweep = 1,-1\n",
            "train = a\ndev = b\nalpha_sweep = 1,1\n",
            "train = a\ndev = b\nbogus = 1\n",
            "train = a\ndev = b\nepochs = many\n",
            "train = a\ndev = b\nno equals sign\n",
            "train = a\ndev = b\nngram_order = 0\n",
        ] {
            assert!(ExperimentConfig::parse(text, base, "x").is_err(), "{text}");
        }
    }

    #[test]
    fn run_ids() {
        assert_eq!(run_id(0.0), "alpha_0");
        assert_eq!(run_id(8.0), "alpha_8");
        assert_eq!(run_id(0.5), "alpha_0.5");
    }
}
