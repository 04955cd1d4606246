#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tbpr_cli::ExperimentConfig;

const FILLER: [&str; 6] = ["the", "and", "it", "was", "very", "this"];

/// Writes a JSON-lines review corpus. Item `i` belongs to topic `i % 4`;
/// each user mostly reviews items of one topic, with topic words in the text.
pub fn write_corpus(dir: &Path, users: usize, items: usize, per_user: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for u in 0..users {
        let topic = u % 4;
        let mut pool: Vec<usize> = (0..items).collect();
        pool.shuffle(&mut rng);
        pool.sort_by_key(|&i| (i % 4 != topic) as u8);
        let favored = pool.iter().take_while(|&&i| i % 4 == topic).count();
        let mut chosen: Vec<usize> = pool[..favored].choose_multiple(&mut rng, per_user - 1).copied().collect();
        chosen.push(pool[rng.gen_range(favored..items)]);
        for i in chosen {
            let mut text = Vec::new();
            for _ in 0..6 {
                text.push(format!("topic{}word{}", i % 4, rng.gen_range(0..5)));
                text.push(FILLER[rng.gen_range(0..FILLER.len())].to_string());
            }
            text.push(format!("item{i}"));
            let _ = writeln!(
                out,
                r#"{{"reviewerID": "U{u:03}", "asin": "B{i:04}", "overall": 5.0, "reviewText": "{}"}}"#,
                text.join(" ")
            );
        }
    }
    let path = dir.join("reviews.json");
    fs::write(&path, out).unwrap();
    path
}

/// Writes a config file named `name` next to the corpus and loads it.
pub fn write_config(dir: &Path, name: &str, body: &str) -> (PathBuf, ExperimentConfig) {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    (path, cfg)
}

/// A small fast configuration over `reviews.json` in `dir`.
pub fn quick_config(dir: &Path, output: &str, extra: &str) -> (PathBuf, ExperimentConfig) {
    write_config(
        dir,
        &format!("{output}.toml"),
        &format!(
            r#"
dataset_name = "toy"
interactions = "reviews.json"
output_dir = "{output}"
synth_dim = 8
latent_factors = 4
{extra}

[train]
max_iterations = 6
patience = 3
learning_rate = 0.05
reg_latent = 0.01
reg_text = 0.01
"#
        ),
    )
}

pub fn read(path: impl AsRef<Path>) -> Vec<u8> {
    fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}
