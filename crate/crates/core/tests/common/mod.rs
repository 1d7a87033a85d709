#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use antimodel::synth::{generate, SynthConfig};

/// Writes a small synthetic dataset (train/dev/test/agreement) into `dir`.
pub fn write_toy_data(dir: &Path, train_sentences: usize) {
    generate(&SynthConfig {
        train_sentences,
        dev_sentences: 20,
        test_sentences: 10,
        agreement_per_bucket: 4,
        ..SynthConfig::default()
    })
    .write_to(dir)
    .unwrap();
}

/// Config text for a fast run over the files from [`write_toy_data`].
pub fn toy_config(extra: &str) -> String {
    format!(
        "train = train.txt\n\
         dev = dev.txt\n\
         agreement = agreement.tsv\n\
         output_dir = out\n\
         alpha_sweep = 0, 8\n\
         epochs = 10\n\
         embedding_dim = 8\n\
         hidden_units = 8\n\
         batch_size = 10\n\
         record_wall_clock = false\n\
         {extra}"
    )
}

pub fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("toy.cfg");
    fs::write(&path, toy_config(extra)).unwrap();
    path
}
