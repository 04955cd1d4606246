//! Experiment stages and their on-disk artifacts.
//!
//! Every stage output under the output directory is recorded in
//! `manifest.json` with a fingerprint of the inputs that produced it. A
//! stage whose artifact exists with a matching fingerprint is loaded instead
//! of recomputed, so running the subcommands one by one yields the same bytes
//! as a single `run`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tbpr::corpus::{read_json_lines, read_tsv, Record};
use tbpr::train::fit_with_observer;
use tbpr::{
    auc, compose_item_features, filter_min_activity, ingest, load_embeddings, load_model,
    rank, report_csv, select_test_pairs, split, stats, synth_embeddings, tokenize,
    Dataset, Dims, EvalError, EvalSetting, FeatureMatrix, ModelKind, Params, ReportRow, SettingKind,
    Split, StatsReport, StopWords,
};

use crate::config::{ExperimentConfig, InputFormat};
use crate::error::CliError;

const LOG_HEADER: &str = "iteration,sampled_validation_auc,wall_seconds";
const SWEEP_HEADER: &str = "factors,model,test_auc";
const CURVE_HEADER: &str = "factors,model,iteration,sampled_validation_auc";

/// File names under the output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn stats(&self) -> PathBuf {
        self.root.join("stats.csv")
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features.txt")
    }

    pub fn checkpoint(&self, kind: ModelKind) -> PathBuf {
        self.root.join(format!("{}.ckpt", kind.id()))
    }

    pub fn train_log(&self, kind: ModelKind) -> PathBuf {
        self.root.join(format!("{}_train_log.csv", kind.id()))
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.csv")
    }

    pub fn setting_report(&self, setting: SettingKind) -> PathBuf {
        self.root
            .join(format!("report_{}.csv", setting.to_string().to_ascii_lowercase()))
    }

    pub fn sweep_report(&self) -> PathBuf {
        self.root.join("sweep").join("sweep_report.csv")
    }

    pub fn sweep_curves(&self) -> PathBuf {
        self.root.join("sweep").join("curves.csv")
    }
}

/// Writes through a temporary sibling and renames, so a failed run never
/// leaves a half-written artifact in place of a good one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let tmp = partial_path(path);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

fn to_hex(digest: &[u8]) -> String {
    digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn hash_hex(bytes: &[u8]) -> String {
    to_hex(&Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> Result<String, CliError> {
    let mut file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(to_hex(&hasher.finalize()))
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    stages: BTreeMap<String, String>,
}

/// Dataset after activity filtering, with its split.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub dataset: Dataset,
    pub split: Split,
}

#[derive(Serialize, Deserialize)]
struct ReviewLine {
    user: usize,
    item: usize,
    text: String,
}

fn write_prepared(dir: &Path, p: &Prepared) -> Result<(), CliError> {
    let json_lines = |tokens: &[String]| {
        let mut out = String::new();
        for t in tokens {
            out.push_str(&serde_json::to_string(t).expect("string serializes"));
            out.push('\n');
        }
        out
    };
    let mut reviews = String::new();
    for ((user, item), text) in p.dataset.reviews() {
        let line = ReviewLine {
            user,
            item,
            text: text.to_string(),
        };
        reviews.push_str(&serde_json::to_string(&line).expect("review serializes"));
        reviews.push('\n');
    }
    write_atomic(&dir.join("users.jsonl"), json_lines(p.dataset.user_tokens()).as_bytes())?;
    write_atomic(&dir.join("items.jsonl"), json_lines(p.dataset.item_tokens()).as_bytes())?;
    write_atomic(&dir.join("reviews.jsonl"), reviews.as_bytes())?;
    write_atomic(&dir.join("split.tsv"), p.split.to_tsv().as_bytes())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_json_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, line)| {
            serde_json::from_str(line).map_err(|e| {
                CliError::data(
                    path.display().to_string(),
                    tbpr::DataError::Parse {
                        line: idx + 1,
                        reason: e.to_string(),
                    },
                )
            })
        })
        .collect()
}

/// Loads a dataset and split written by the prepare stage.
pub fn read_prepared(dir: &Path) -> Result<Prepared, CliError> {
    let users: Vec<String> = parse_json_lines(&dir.join("users.jsonl"))?;
    let items: Vec<String> = parse_json_lines(&dir.join("items.jsonl"))?;
    let reviews: Vec<ReviewLine> = parse_json_lines(&dir.join("reviews.jsonl"))?;
    let split_path = dir.join("split.tsv");
    let split_text = read_text(&split_path)?;

    let mut positives = vec![Vec::new(); users.len()];
    for (idx, line) in split_text.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let parsed = match fields[..] {
            [u, _, i] => u.parse::<usize>().ok().zip(i.parse::<usize>().ok()),
            _ => None,
        };
        match parsed {
            Some((u, i)) if u < users.len() => positives[u].push(i),
            _ => {
                return Err(CliError::data(
                    split_path.display().to_string(),
                    tbpr::DataError::Parse {
                        line: idx + 1,
                        reason: "expected user, part and item".into(),
                    },
                ))
            }
        }
    }
    let docs = reviews
        .into_iter()
        .map(|r| ((r.user, r.item), r.text))
        .collect();
    let context = dir.display().to_string();
    let dataset = Dataset::from_parts(users, items, positives, docs)
        .map_err(|e| CliError::data(context.clone(), e))?;
    let split = Split::from_tsv(&dataset, &split_text).map_err(|e| CliError::data(context, e))?;
    Ok(Prepared { dataset, split })
}

fn read_records(cfg: &ExperimentConfig) -> Result<(Dataset, usize), CliError> {
    let path = &cfg.interactions;
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = BufReader::new(file);
    let records: Box<dyn Iterator<Item = Result<Record, io::Error>>> = match cfg.format {
        InputFormat::JsonLines => Box::new(read_json_lines(reader)),
        InputFormat::Tsv => Box::new(read_tsv(reader)),
    };
    let ingested = ingest(records).map_err(|e| CliError::io(path, e))?;
    Ok((ingested.dataset, ingested.skipped))
}

/// Training log rows as written to `<model>_train_log.csv`.
fn log_line(iteration: usize, auc: f64, seconds: f64) -> String {
    format!("{iteration},{auc:.6},{seconds:.3}\n")
}

/// One experiment's working state over an output directory.
pub struct Session<'a> {
    cfg: &'a ExperimentConfig,
    layout: Layout,
    manifest: Manifest,
    reuse: bool,
    prepared: Option<(Prepared, String)>,
    features: Option<(FeatureMatrix, String)>,
}

impl<'a> Session<'a> {
    /// Validates the configuration and opens the output directory. With
    /// `reuse` false every stage is recomputed.
    pub fn open(cfg: &'a ExperimentConfig, reuse: bool) -> Result<Self, CliError> {
        cfg.validate()?;
        let layout = Layout::new(&cfg.output_dir);
        fs::create_dir_all(layout.root()).map_err(|e| CliError::io(layout.root(), e))?;
        let manifest = match fs::read_to_string(layout.manifest()) {
            Ok(text) if reuse => serde_json::from_str(&text).unwrap_or_default(),
            _ => Manifest::default(),
        };
        Ok(Session {
            cfg,
            layout,
            manifest,
            reuse,
            prepared: None,
            features: None,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn is_current(&self, stage: &str, fingerprint: &str, artifacts: &[PathBuf]) -> bool {
        self.reuse
            && self.manifest.stages.get(stage).map(String::as_str) == Some(fingerprint)
            && artifacts.iter().all(|p| p.exists())
    }

    fn record(&mut self, stage: String, fingerprint: String) -> Result<(), CliError> {
        self.manifest.stages.insert(stage, fingerprint);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        write_atomic(&self.layout.manifest(), text.as_bytes())
    }

    /// Ingests, filters and splits the interactions.
    pub fn prepared(&mut self) -> Result<&Prepared, CliError> {
        if self.prepared.is_none() {
            let cfg = self.cfg;
            let fingerprint = hash_hex(
                format!(
                    "prepare v1|{}|{:?}|{}|{}",
                    hash_file(&cfg.interactions)?,
                    cfg.format,
                    cfg.min_positives,
                    cfg.split_seed
                )
                .as_bytes(),
            );
            let dir = self.layout.dataset_dir();
            let prepared = if self.is_current("prepare", &fingerprint, &[dir.join("split.tsv")]) {
                log::info!("reusing prepared dataset in {}", dir.display());
                read_prepared(&dir)?
            } else {
                let (raw, skipped) = read_records(cfg)?;
                if skipped > 0 {
                    log::warn!("skipped {skipped} malformed records");
                }
                let dataset = filter_min_activity(&raw, cfg.min_positives);
                if dataset.user_count() == 0 {
                    return Err(CliError::data(
                        cfg.interactions.display().to_string(),
                        tbpr::DataError::Inconsistent(format!(
                            "no user has {} or more positives",
                            cfg.min_positives
                        )),
                    ));
                }
                log::info!(
                    "{} users, {} items, {} positives after filtering",
                    dataset.user_count(),
                    dataset.item_count(),
                    dataset.feedback_count()
                );
                let split = split(&dataset, cfg.split_seed)
                    .map_err(|e| CliError::data("split", e))?;
                let prepared = Prepared { dataset, split };
                write_prepared(&dir, &prepared)?;
                self.record("prepare".into(), fingerprint.clone())?;
                prepared
            };
            self.prepared = Some((prepared, fingerprint));
        }
        Ok(&self.prepared.as_ref().expect("just set").0)
    }

    fn prepared_fingerprint(&mut self) -> Result<String, CliError> {
        self.prepared()?;
        Ok(self.prepared.as_ref().expect("prepared").1.clone())
    }

    /// Writes and returns the dataset statistics.
    pub fn stats(&mut self) -> Result<StatsReport, CliError> {
        let threshold = self.cfg.stats_cold_threshold;
        let report = stats(&self.prepared()?.dataset, threshold);
        let text = format!(
            "{}\n{}\n",
            StatsReport::CSV_HEADER,
            report.csv_row(&self.cfg.dataset_name)
        );
        write_atomic(&self.layout.stats(), text.as_bytes())?;
        Ok(report)
    }

    /// Item text features, composed from the configured embeddings or from
    /// deterministic pseudo-embeddings over the review vocabulary.
    pub fn features(&mut self) -> Result<&FeatureMatrix, CliError> {
        if self.features.is_none() {
            let cfg = self.cfg;
            let upstream = self.prepared_fingerprint()?;
            let source = match &cfg.embeddings {
                Some(path) => format!("file {}", hash_file(path)?),
                None => format!("synth {} {}", cfg.synth_dim, cfg.synth_seed),
            };
            let stop_source = match &cfg.stopwords {
                Some(path) => format!("file {}", hash_file(path)?),
                None => "builtin".into(),
            };
            let fingerprint = hash_hex(
                format!("features v1|{upstream}|{source}|{stop_source}|{:?}", cfg.doc_scope).as_bytes(),
            );
            let path = self.layout.features();
            let features = if self.is_current("features", &fingerprint, std::slice::from_ref(&path)) {
                log::info!("reusing features in {}", path.display());
                FeatureMatrix::from_text(&read_text(&path)?)
                    .map_err(|e| CliError::data(path.display().to_string(), e))?
            } else {
                let stopwords = match &cfg.stopwords {
                    Some(p) => StopWords::parse(&read_text(p)?),
                    None => StopWords::english(),
                };
                let prepared = self.prepared()?;
                let table = match &cfg.embeddings {
                    Some(p) => {
                        let file = File::open(p).map_err(|e| CliError::io(p, e))?;
                        load_embeddings(BufReader::new(file))
                            .map_err(|e| CliError::data(p.display().to_string(), e))?
                    }
                    None => {
                        let vocab: BTreeSet<String> = prepared
                            .dataset
                            .reviews()
                            .flat_map(|(_, text)| tokenize(text))
                            .filter(|t| !stopwords.contains(t))
                            .collect();
                        synth_embeddings(vocab.iter().map(String::as_str), cfg.synth_dim, cfg.synth_seed)
                    }
                };
                let features = compose_item_features(
                    &prepared.dataset,
                    &prepared.split,
                    &table,
                    &stopwords,
                    cfg.doc_scope,
                );
                let uncovered = (0..features.item_count())
                    .filter(|&i| features.coverage(i) == 0)
                    .count();
                if uncovered > 0 {
                    log::warn!("{uncovered} items have no in-vocabulary review words");
                }
                write_atomic(&path, features.to_text().as_bytes())?;
                self.record("features".into(), fingerprint.clone())?;
                features
            };
            self.features = Some((features, fingerprint));
        }
        Ok(&self.features.as_ref().expect("just set").0)
    }

    /// Trains `kind` with `dims`, streaming the training log to
    /// `log_path` and returning the best parameters with the validation
    /// history.
    fn train(
        &mut self,
        kind: ModelKind,
        dims: Dims,
        log_path: Option<&Path>,
    ) -> Result<(Params, Vec<(usize, f64)>), CliError> {
        let cfg = self.cfg;
        self.features()?;
        let (prepared, _) = self.prepared.as_ref().expect("prepared");
        let (features, _) = self.features.as_ref().expect("features");
        let train_cfg = cfg.train_config(kind);

        let mut writer = match log_path {
            Some(path) if kind.is_trainable() => {
                let partial = partial_path(path);
                let file = File::create(&partial).map_err(|e| CliError::io(&partial, e))?;
                let mut w = BufWriter::new(file);
                writeln!(w, "{LOG_HEADER}").map_err(|e| CliError::io(&partial, e))?;
                Some((w, partial))
            }
            _ => None,
        };
        let mut log_error = None;
        let record_wall_time = cfg.record_wall_time;
        let result = fit_with_observer(
            &prepared.split,
            &prepared.dataset,
            features,
            kind,
            dims,
            &train_cfg,
            cfg.user_text_scope,
            |iteration, auc, elapsed| {
                log::info!("{kind} iteration {iteration}: validation auc {auc:.4}");
                if let Some((w, partial)) = writer.as_mut() {
                    let seconds = if record_wall_time { elapsed.as_secs_f64() } else { 0.0 };
                    let written = w
                        .write_all(log_line(iteration, auc, seconds).as_bytes())
                        .and_then(|_| w.flush());
                    if let Err(e) = written {
                        log_error.get_or_insert(CliError::io(partial.clone(), e));
                    }
                }
            },
        )?;
        if let Some(e) = log_error {
            return Err(e);
        }
        if let (Some((w, partial)), Some(path)) = (writer, log_path) {
            drop(w);
            fs::rename(&partial, path).map_err(|e| CliError::io(path, e))?;
        }
        Ok((result.params, result.history))
    }

    /// The model of `kind` at the configured factor count, trained and
    /// checkpointed unless an up-to-date checkpoint exists.
    pub fn model(&mut self, kind: ModelKind) -> Result<Params, CliError> {
        let cfg = self.cfg;
        self.features()?;
        let upstream = &self.features.as_ref().expect("features").1;
        let dims = cfg.dims(cfg.latent_factors, self.features.as_ref().expect("features").0.dim());
        let fingerprint = hash_hex(
            format!(
                "model v1|{upstream}|{}|{:?}|{:?}|{:?}|{}",
                kind.id(),
                dims,
                cfg.train_config(kind),
                cfg.user_text_scope,
                cfg.record_wall_time
            )
            .as_bytes(),
        );
        let ckpt = self.layout.checkpoint(kind);
        let stage = format!("model {}", kind.id());
        if self.is_current(&stage, &fingerprint, std::slice::from_ref(&ckpt)) {
            log::info!("reusing checkpoint {}", ckpt.display());
            return load_model(&ckpt).map_err(|source| CliError::Checkpoint { path: ckpt, source });
        }
        let log_path = self.layout.train_log(kind);
        let (params, _) = self.train(kind, dims, Some(&log_path))?;
        let bytes = tbpr::checkpoint::encode(&params);
        write_atomic(&ckpt, &bytes)?;
        self.record(stage, fingerprint)?;
        Ok(params)
    }

    /// Exact test AUC of every configured model under each setting.
    pub fn evaluate(&mut self, settings: &[SettingKind]) -> Result<Vec<ReportRow>, CliError> {
        let cfg = self.cfg;
        let mut rows: Vec<ReportRow> = settings
            .iter()
            .map(|&setting| ReportRow {
                dataset: cfg.dataset_name.clone(),
                setting,
                aucs: BTreeMap::new(),
            })
            .collect();
        for &kind in &cfg.models {
            let params = self.model(kind)?;
            let (prepared, _) = self.prepared.as_ref().expect("prepared");
            let (features, _) = self.features.as_ref().expect("features");
            let scorer = params.scorer(features)?;
            for row in rows.iter_mut() {
                let setting = EvalSetting {
                    kind: row.setting,
                    cold_threshold: cfg.cold_threshold,
                    cold_mode: cfg.cold_mode,
                };
                let pairs = select_test_pairs(&prepared.split, &prepared.dataset, &setting);
                match auc(&scorer, &prepared.dataset, &pairs) {
                    Ok(summary) => {
                        row.aucs.insert(kind, summary.value);
                    }
                    Err(EvalError::EmptySelection | EvalError::NoComparableUsers) => {
                        log::warn!("{} selection is empty; reported as n/a", row.setting);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(rows)
    }

    /// Evaluates and writes the results table to `path`.
    pub fn write_report(&mut self, settings: &[SettingKind], path: &Path) -> Result<String, CliError> {
        let rows = self.evaluate(settings)?;
        let text = report_csv(&self.cfg.models, &rows);
        write_atomic(path, text.as_bytes())?;
        Ok(text)
    }

    /// Retrains every configured model at each factor count in `factors`
    /// and writes the test AUC table
    /// and the validation curves.
    pub fn sweep(&mut self, factors: &[usize]) -> Result<String, CliError> {
        if factors.is_empty() {
            return Err(CliError::config("the sweep list is empty"));
        }
        let cfg = self.cfg;
        let mut table = format!("{SWEEP_HEADER}\n");
        let mut curves = format!("{CURVE_HEADER}\n");
        for &f in factors {
            for &kind in &cfg.models {
                let dim = self.features()?.dim();
                let (params, history) = self.train(kind, Dims::new(f, f, dim), None)?;
                let (prepared, _) = self.prepared.as_ref().expect("prepared");
                let (features, _) = self.features.as_ref().expect("features");
                let pairs = select_test_pairs(
                    &prepared.split,
                    &prepared.dataset,
                    &EvalSetting::new(SettingKind::All),
                );
                let value = auc(&params.scorer(features)?, &prepared.dataset, &pairs)?.value;
                let _ = writeln!(table, "{f},{},{value:.6}", kind.id());
                for (iteration, v) in history {
                    let _ = writeln!(curves, "{f},{},{iteration},{v:.6}", kind.id());
                }
            }
        }
        write_atomic(&self.layout.sweep_report(), table.as_bytes())?;
        write_atomic(&self.layout.sweep_curves(), curves.as_bytes())?;
        Ok(table)
    }
}

/// Paths of the artifacts produced by [`run_experiment`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub stats: PathBuf,
    pub report: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub train_logs: Vec<PathBuf>,
    pub sweep: Option<(PathBuf, PathBuf)>,
}

/// Runs every stage from scratch: statistics, features, training of each
/// configured model, the All/Cold/Warm report and, when configured, the
/// factor sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts, CliError> {
    let mut session = Session::open(cfg, false)?;
    session.stats()?;
    session.features()?;
    for &kind in &cfg.models {
        session.model(kind)?;
    }
    let report = session.layout().report();
    session.write_report(&SettingKind::ALL, &report)?;
    let sweep = if cfg.sweep.is_empty() {
        None
    } else {
        session.sweep(&cfg.sweep)?;
        Some((session.layout().sweep_report(), session.layout().sweep_curves()))
    };
    let layout = session.layout();
    Ok(RunArtifacts {
        stats: layout.stats(),
        report,
        checkpoints: cfg.models.iter().map(|&k| layout.checkpoint(k)).collect(),
        train_logs: cfg
            .models
            .iter()
            .filter(|k| k.is_trainable())
            .map(|&k| layout.train_log(k))
            .collect(),
        sweep,
    })
}

/// Top `top` unobserved items for `user` under the checkpoint at `path`.
/// The prepared dataset and features are read from `data_dir`, which
/// defaults to the checkpoint's directory.
pub fn recommend(
    checkpoint: &Path,
    user: &str,
    top: usize,
    data_dir: Option<&Path>,
) -> Result<Vec<String>, CliError> {
    let params = load_model(checkpoint).map_err(|source| CliError::Checkpoint {
        path: checkpoint.to_path_buf(),
        source,
    })?;
    let layout = Layout::new(
        data_dir
            .map(Path::to_path_buf)
            .or_else(|| checkpoint.parent().map(Path::to_path_buf))
            .unwrap_or_default(),
    );
    let prepared = read_prepared(&layout.dataset_dir())?;
    let d = &prepared.dataset;
    if params.user_count() != d.user_count() || params.item_count() != d.item_count() {
        return Err(CliError::data(
            checkpoint.display().to_string(),
            tbpr::DataError::Inconsistent(format!(
                "checkpoint covers {}x{} but the dataset has {}x{}",
                params.user_count(),
                params.item_count(),
                d.user_count(),
                d.item_count()
            )),
        ));
    }
    let features = if params.kind().uses_text() {
        let path = layout.features();
        FeatureMatrix::from_text(&read_text(&path)?)
            .map_err(|e| CliError::data(path.display().to_string(), e))?
    } else {
        FeatureMatrix::from_rows(1, vec![0.0; d.item_count()])
    };
    let u = d.user_id(user).ok_or_else(|| CliError::UnknownUser(user.to_string()))?;
    let candidates: Vec<usize> = (0..d.item_count()).filter(|&i| !d.is_positive(u, i)).collect();
    if candidates.is_empty() || top == 0 {
        return Ok(Vec::new());
    }
    let ranked = rank(&params.scorer(&features)?, u, &candidates)?;
    Ok(ranked
        .into_iter()
        .take(top)
        .map(|i| d.item_token(i).to_string())
        .collect())
}
