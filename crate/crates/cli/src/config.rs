//! Experiment configuration.
//!
//! A run is described by one TOML file. Relative paths are resolved against
//! the directory holding the file. Every key except `interactions` and
//! `output_dir` has a default:
//!
//! ```toml
//! dataset_name = "Girls"
//! interactions = "girls.json"     # JSON lines, or tab-separated with format = "tsv"
//! format = "json"                 # inferred from the extension when absent
//! embeddings = "vectors.txt"      # word2vec text format; synthesized when absent
//! synth_dim = 200
//! synth_seed = 0
//! stopwords = "stop.txt"          # built-in English list when absent
//! output_dir = "out/girls"
//! models = ["pop", "mf", "diff", "shared"]
//! latent_factors = 15
//! text_factors = 15               # defaults to latent_factors
//! min_positives = 5
//! split_seed = 0
//! doc_scope = "all"               # or "training"
//! user_text_scope = "training"    # or "all"
//! cold_threshold = 3
//! cold_mode = "by_item"           # or "by_user"
//! stats_cold_threshold = 7
//! sweep = [5, 10, 15, 20, 25]
//! record_wall_time = false
//!
//! [train]                         # applies to every model
//! max_iterations = 200
//! patience = 5
//!
//! [train.mf]                      # per model, wins over [train]
//! learning_rate = 0.005
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tbpr::{ColdMode, Dims, DocScope, ModelKind, TrainConfig, UserTextScope};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    JsonLines,
    Tsv,
}

/// Optional [`TrainConfig`] fields.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub learning_rate: Option<f64>,
    pub reg_latent: Option<f64>,
    pub reg_text: Option<f64>,
    pub max_iterations: Option<usize>,
    pub patience: Option<usize>,
    pub eval_every: Option<usize>,
    pub seed: Option<u64>,
    pub valid_negatives: Option<usize>,
}

impl TrainOverrides {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        set!(learning_rate, reg_latent, reg_text, max_iterations, patience, eval_every, seed, valid_negatives);
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(&mut self, other: &TrainOverrides) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(learning_rate, reg_latent, reg_text, max_iterations, patience, eval_every, seed, valid_negatives);
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    #[serde(flatten)]
    common: TrainOverrides,
    pop: Option<TrainOverrides>,
    mf: Option<TrainOverrides>,
    diff: Option<TrainOverrides>,
    shared: Option<TrainOverrides>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dataset_name: Option<String>,
    interactions: PathBuf,
    format: Option<String>,
    embeddings: Option<PathBuf>,
    synth_dim: Option<usize>,
    synth_seed: Option<u64>,
    stopwords: Option<PathBuf>,
    output_dir: PathBuf,
    models: Option<Vec<String>>,
    latent_factors: Option<usize>,
    text_factors: Option<usize>,
    min_positives: Option<usize>,
    split_seed: Option<u64>,
    doc_scope: Option<String>,
    user_text_scope: Option<String>,
    cold_threshold: Option<usize>,
    cold_mode: Option<String>,
    stats_cold_threshold: Option<usize>,
    sweep: Option<Vec<usize>>,
    record_wall_time: Option<bool>,
    #[serde(default)]
    train: TrainSection,
}

/// A validated experiment description with absolute paths.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_name: String,
    pub interactions: PathBuf,
    pub format: InputFormat,
    pub embeddings: Option<PathBuf>,
    pub synth_dim: usize,
    pub synth_seed: u64,
    pub stopwords: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub models: Vec<ModelKind>,
    pub latent_factors: usize,
    /// `None` ties the text factor count to `latent_factors`.
    pub text_factors: Option<usize>,
    pub min_positives: usize,
    pub split_seed: u64,
    pub doc_scope: DocScope,
    pub user_text_scope: UserTextScope,
    pub cold_threshold: usize,
    pub cold_mode: ColdMode,
    pub stats_cold_threshold: usize,
    pub sweep: Vec<usize>,
    /// Off by default so logs are byte-reproducible.
    pub record_wall_time: bool,
    pub train: TrainOverrides,
    pub train_per_kind: [TrainOverrides; 4],
}

fn parse_choice<T>(key: &str, value: Option<String>, default: T, choices: &[(&str, T)]) -> Result<T, CliError>
where
    T: Copy,
{
    let Some(value) = value else {
        return Ok(default);
    };
    choices
        .iter()
        .find(|(name, _)| *name == value)
        .map(|&(_, v)| v)
        .ok_or_else(|| {
            let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
            CliError::config(format!("{key} must be one of {names:?}, got {value:?}"))
        })
}

fn kind_slot(kind: ModelKind) -> usize {
    ModelKind::ALL.iter().position(|&k| k == kind).expect("listed kind")
}

pub fn parse_model_list(names: &[String]) -> Result<Vec<ModelKind>, CliError> {
    let mut kinds = Vec::new();
    for name in names {
        let kind: ModelKind = name.parse().map_err(CliError::config)?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(CliError::config("models must name at least one model"));
    }
    kinds.sort();
    Ok(kinds)
}

impl ExperimentConfig {
    /// Parses TOML text; relative paths are joined onto `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let raw: ConfigFile = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };

        let interactions = resolve(raw.interactions);
        let inferred = match interactions.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => InputFormat::Tsv,
            _ => InputFormat::JsonLines,
        };
        let format = parse_choice(
            "format",
            raw.format,
            inferred,
            &[("json", InputFormat::JsonLines), ("tsv", InputFormat::Tsv)],
        )?;
        let models = match raw.models {
            Some(names) => parse_model_list(&names)?,
            None => ModelKind::ALL.to_vec(),
        };
        let section = raw.train;
        let mut train_per_kind: [TrainOverrides; 4] = Default::default();
        for (kind, overrides) in [
            (ModelKind::Pop, section.pop),
            (ModelKind::Mf, section.mf),
            (ModelKind::Diff, section.diff),
            (ModelKind::Shared, section.shared),
        ] {
            if let Some(o) = overrides {
                train_per_kind[kind_slot(kind)] = o;
            }
        }

        let cfg = ExperimentConfig {
            dataset_name: raw.dataset_name.unwrap_or_else(|| "dataset".into()),
            interactions,
            format,
            embeddings: raw.embeddings.map(resolve),
            synth_dim: raw.synth_dim.unwrap_or(200),
            synth_seed: raw.synth_seed.unwrap_or(0),
            stopwords: raw.stopwords.map(resolve),
            output_dir: resolve(raw.output_dir),
            models,
            latent_factors: raw.latent_factors.unwrap_or(15),
            text_factors: raw.text_factors,
            min_positives: raw.min_positives.unwrap_or(tbpr::corpus::MIN_POSITIVES_TO_SPLIT),
            split_seed: raw.split_seed.unwrap_or(0),
            doc_scope: parse_choice(
                "doc_scope",
                raw.doc_scope,
                DocScope::AllReviews,
                &[("all", DocScope::AllReviews), ("training", DocScope::TrainingOnly)],
            )?,
            user_text_scope: parse_choice(
                "user_text_scope",
                raw.user_text_scope,
                UserTextScope::Training,
                &[("training", UserTextScope::Training), ("all", UserTextScope::AllFeedback)],
            )?,
            cold_threshold: raw.cold_threshold.unwrap_or(3),
            cold_mode: parse_choice(
                "cold_mode",
                raw.cold_mode,
                ColdMode::ByItem,
                &[("by_item", ColdMode::ByItem), ("by_user", ColdMode::ByUser)],
            )?,
            stats_cold_threshold: raw
                .stats_cold_threshold
                .unwrap_or(tbpr::corpus::DEFAULT_COLD_THRESHOLD),
            sweep: raw.sweep.unwrap_or_default(),
            record_wall_time: raw.record_wall_time.unwrap_or(false),
            train: section.common,
            train_per_kind,
        };
        Ok(cfg)
    }

    /// Reads and parses a configuration file. Does not validate; see
    /// [`ExperimentConfig::validate`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Checks value ranges and that every input path exists.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.min_positives < tbpr::corpus::MIN_POSITIVES_TO_SPLIT {
            return Err(CliError::config(format!(
                "min_positives must be at least {}",
                tbpr::corpus::MIN_POSITIVES_TO_SPLIT
            )));
        }
        if self.latent_factors == 0 || self.text_factors == Some(0) {
            return Err(CliError::config("factor counts must be positive"));
        }
        if self.embeddings.is_none() && self.synth_dim == 0 {
            return Err(CliError::config("synth_dim must be positive"));
        }
        if self.sweep.contains(&0) {
            return Err(CliError::config("sweep factor counts must be positive"));
        }
        if self.text_factors.is_some_and(|k| k != self.latent_factors)
            && self.models.contains(&ModelKind::Shared)
        {
            return Err(CliError::config(
                "the shared model needs text_factors equal to latent_factors",
            ));
        }
        for kind in &self.models {
            self.train_config(*kind)
                .validate()
                .map_err(|e| CliError::config(format!("{}: {e}", kind.id())))?;
        }
        for path in [Some(&self.interactions), self.embeddings.as_ref(), self.stopwords.as_ref()]
            .into_iter()
            .flatten()
        {
            if !path.is_file() {
                return Err(CliError::config(format!("input {} is not a readable file", path.display())));
            }
        }
        Ok(())
    }

    /// Published defaults for `kind`, then `[train]`, then `[train.<kind>]`.
    pub fn train_config(&self, kind: ModelKind) -> TrainConfig {
        let mut cfg = TrainConfig::for_kind(kind);
        self.train.apply(&mut cfg);
        self.train_per_kind[kind_slot(kind)].apply(&mut cfg);
        cfg
    }

    /// Overrides applied after the per-model tables, e.g. from flags.
    pub fn override_train(&mut self, overrides: &TrainOverrides) {
        self.train.merge(overrides);
        for slot in self.train_per_kind.iter_mut() {
            slot.merge(overrides);
        }
    }

    /// Model dimensions for a given latent factor count and feature width.
    pub fn dims(&self, latent: usize, feature: usize) -> Dims {
        Dims::new(latent, self.text_factors.unwrap_or(latent), feature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_resolution() {
        let cfg = ExperimentConfig::from_toml(
            "interactions = \"data/r.json\"\noutput_dir = \"/tmp/out\"\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.interactions, PathBuf::from("/base/data/r.json"));
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/out"));
        assert_eq!(cfg.format, InputFormat::JsonLines);
        assert_eq!(cfg.models, ModelKind::ALL.to_vec());
        assert_eq!(cfg.dims(15, 200), Dims::new(15, 15, 200));
        assert_eq!(cfg.cold_threshold, 3);
        assert_eq!(cfg.cold_mode, ColdMode::ByItem);
        assert_eq!(cfg.train_config(ModelKind::Mf), TrainConfig::for_kind(ModelKind::Mf));
        assert_eq!(cfg.train_config(ModelKind::Shared), TrainConfig::for_kind(ModelKind::Shared));
    }

    #[test]
    fn train_layers() {
        let mut cfg = ExperimentConfig::from_toml(
            r#"
interactions = "r.tsv"
output_dir = "out"
models = ["shared", "POP", "mf"]
[train]
patience = 2
seed = 4
[train.mf]
learning_rate = 0.5
seed = 9
"#,
            Path::new("/b"),
        )
        .unwrap();
        assert_eq!(cfg.format, InputFormat::Tsv);
        assert_eq!(cfg.models, vec![ModelKind::Pop, ModelKind::Mf, ModelKind::Shared]);
        let mf = cfg.train_config(ModelKind::Mf);
        assert_eq!((mf.learning_rate, mf.patience, mf.seed), (0.5, 2, 9));
        let shared = cfg.train_config(ModelKind::Shared);
        assert_eq!((shared.learning_rate, shared.patience, shared.seed), (0.001, 2, 4));

        cfg.override_train(&TrainOverrides {
            seed: Some(1),
            ..TrainOverrides::default()
        });
        assert_eq!(cfg.train_config(ModelKind::Mf).seed, 1);
        assert_eq!(cfg.train_config(ModelKind::Shared).seed, 1);
    }

    #[test]
    fn rejects_bad_values() {
        let parse = |extra: &str| {
            ExperimentConfig::from_toml(
                &format!("interactions = \"r.json\"\noutput_dir = \"o\"\n{extra}"),
                Path::new("/b"),
            )
        };
        assert!(parse("cold_mode = \"sideways\"").is_err());
        assert!(parse("models = [\"svd\"]").is_err());
        assert!(parse("unknown_key = 1").is_err());
        assert!(parse("[train]\nlearn_rate = 1.0").is_err());

        let cfg = parse("text_factors = 7").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let missing = parse("").unwrap();
        assert!(matches!(missing.validate(), Err(CliError::Config(_))));
    }
}
