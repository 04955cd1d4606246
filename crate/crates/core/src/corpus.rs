//! Interaction ingest, activity filtering, per-user splits and dataset
//! statistics.
//!
//! Every review is treated as one binary positive: duplicate `(user, item)`
//! records collapse into a single positive whose review text is the
//! space-joined concatenation of the individual texts.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::DataError;
use crate::textfeat::tokenize;

/// Number of positives withheld per user for validation.
pub const VALID_PER_USER: usize = 2;
/// Number of positives withheld per user for testing.
pub const TEST_PER_USER: usize = 2;
/// Smallest per-user history that still leaves one training positive.
pub const MIN_POSITIVES_TO_SPLIT: usize = VALID_PER_USER + TEST_PER_USER + 1;
/// Default feedback count below which users/items are reported as cold.
pub const DEFAULT_COLD_THRESHOLD: usize = 7;

/// One observed review.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interaction {
    user: String,
    item: String,
    review: String,
}

impl Interaction {
    /// Returns `None` when either token is empty.
    pub fn new(
        user: impl Into<String>,
        item: impl Into<String>,
        review: impl Into<String>,
    ) -> Option<Self> {
        let user = user.into();
        let item = item.into();
        if user.is_empty() || item.is_empty() {
            return None;
        }
        Some(Interaction {
            user,
            item,
            review: review.into(),
        })
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn item(&self) -> &str {
        &self.item
    }

    pub fn review(&self) -> &str {
        &self.review
    }
}

/// A record that could not be decoded. Ingest counts these and moves on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MalformedRecord {
    pub line: usize,
    pub reason: String,
}

/// Item of a record stream: a decoded interaction or a skippable bad record.
pub type Record = Result<Interaction, MalformedRecord>;

#[derive(Deserialize)]
struct AmazonReview {
    #[serde(rename = "reviewerID")]
    reviewer_id: Option<String>,
    asin: Option<String>,
    #[serde(rename = "reviewText", default)]
    review_text: Option<String>,
}

fn decode_json_line(line: &str, line_no: usize) -> Record {
    let malformed = |reason: String| MalformedRecord {
        line: line_no,
        reason,
    };
    let raw: AmazonReview = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let user = raw
        .reviewer_id
        .ok_or_else(|| malformed("missing reviewerID".into()))?;
    let item = raw.asin.ok_or_else(|| malformed("missing asin".into()))?;
    Interaction::new(user, item, raw.review_text.unwrap_or_default())
        .ok_or_else(|| malformed("empty user or item token".into()))
}

fn decode_tsv_line(line: &str, line_no: usize) -> Record {
    let mut fields = line.splitn(3, '\t');
    let user = fields.next().unwrap_or_default();
    let item = fields.next().ok_or_else(|| MalformedRecord {
        line: line_no,
        reason: "expected at least two tab-separated fields".into(),
    })?;
    let review = fields.next().unwrap_or_default();
    Interaction::new(user, item, review).ok_or_else(|| MalformedRecord {
        line: line_no,
        reason: "empty user or item token".into(),
    })
}

fn read_lines<R: BufRead>(
    reader: R,
    decode: fn(&str, usize) -> Record,
) -> impl Iterator<Item = Result<Record, std::io::Error>> {
    reader.lines().enumerate().filter_map(move |(idx, line)| match line {
        Err(e) => Some(Err(e)),
        Ok(line) => {
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() {
                None
            } else {
                Some(Ok(decode(trimmed, idx + 1)))
            }
        }
    })
}

/// Reads newline-delimited JSON review records (`reviewerID`, `asin`,
/// `reviewText`); other fields are ignored.
pub fn read_json_lines<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = Result<Record, std::io::Error>> {
    read_lines(reader, decode_json_line)
}

/// Reads `user<TAB>item<TAB>review` lines. The review column may be absent.
pub fn read_tsv<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Record, std::io::Error>> {
    read_lines(reader, decode_tsv_line)
}

/// Binary implicit feedback with the attached review texts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    users: Vec<String>,
    items: Vec<String>,
    user_ids: HashMap<String, usize>,
    item_ids: HashMap<String, usize>,
    // Sorted ascending, no duplicates.
    positives: Vec<Vec<usize>>,
    docs: BTreeMap<(usize, usize), String>,
}

impl Dataset {
    /// Builds a dataset from already-indexed parts, checking every invariant.
    pub fn from_parts(
        users: Vec<String>,
        items: Vec<String>,
        mut positives: Vec<Vec<usize>>,
        docs: BTreeMap<(usize, usize), String>,
    ) -> Result<Self, DataError> {
        if positives.len() != users.len() {
            return Err(DataError::Inconsistent(format!(
                "{} users but {} positive sets",
                users.len(),
                positives.len()
            )));
        }
        let mut seen = vec![false; items.len()];
        for (u, set) in positives.iter_mut().enumerate() {
            set.sort_unstable();
            if set.windows(2).any(|w| w[0] == w[1]) {
                return Err(DataError::Inconsistent(format!(
                    "duplicate positive for user {u}"
                )));
            }
            for &i in set.iter() {
                if i >= items.len() {
                    return Err(DataError::Inconsistent(format!(
                        "user {u} has item index {i} >= {}",
                        items.len()
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(DataError::Inconsistent(format!(
                "item {i} has no feedback"
            )));
        }
        for &(u, i) in docs.keys() {
            if u >= users.len() || positives[u].binary_search(&i).is_err() {
                return Err(DataError::Inconsistent(format!(
                    "review attached to non-positive pair ({u}, {i})"
                )));
            }
        }
        let user_ids = index_tokens(&users)?;
        let item_ids = index_tokens(&items)?;
        Ok(Dataset {
            users,
            items,
            user_ids,
            item_ids,
            positives,
            docs,
        })
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    /// Total number of distinct positive `(user, item)` pairs.
    pub fn feedback_count(&self) -> usize {
        self.positives.iter().map(Vec::len).sum()
    }

    /// `N_u`, sorted ascending.
    pub fn positives(&self, user: usize) -> &[usize] {
        &self.positives[user]
    }

    pub fn is_positive(&self, user: usize, item: usize) -> bool {
        self.positives[user].binary_search(&item).is_ok()
    }

    pub fn user_token(&self, user: usize) -> &str {
        &self.users[user]
    }

    pub fn item_token(&self, item: usize) -> &str {
        &self.items[item]
    }

    pub fn user_tokens(&self) -> &[String] {
        &self.users
    }

    pub fn item_tokens(&self) -> &[String] {
        &self.items
    }

    pub fn user_id(&self, token: &str) -> Option<usize> {
        self.user_ids.get(token).copied()
    }

    pub fn item_id(&self, token: &str) -> Option<usize> {
        self.item_ids.get(token).copied()
    }

    /// Review text for a positive pair, if any was recorded.
    pub fn review(&self, user: usize, item: usize) -> Option<&str> {
        self.docs.get(&(user, item)).map(String::as_str)
    }

    /// All reviews in `(user, item)` order.
    pub fn reviews(&self) -> impl Iterator<Item = ((usize, usize), &str)> {
        self.docs.iter().map(|(&k, v)| (k, v.as_str()))
    }

    /// Number of users who gave feedback on each item.
    pub fn item_feedback_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.items.len()];
        for set in &self.positives {
            for &i in set {
                counts[i] += 1;
            }
        }
        counts
    }
}

fn index_tokens(tokens: &[String]) -> Result<HashMap<String, usize>, DataError> {
    let mut map = HashMap::with_capacity(tokens.len());
    for (idx, tok) in tokens.iter().enumerate() {
        if map.insert(tok.clone(), idx).is_some() {
            return Err(DataError::Inconsistent(format!("duplicate token {tok:?}")));
        }
    }
    Ok(map)
}

/// Result of [`ingest`]: the dataset plus the tally of rejected records.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub dataset: Dataset,
    pub skipped: usize,
}

/// Builds a dataset from a stream of records. Ids are assigned in order of
/// first appearance. Malformed records are skipped and counted; I/O errors
/// abort.
pub fn ingest<I, E>(records: I) -> Result<Ingested, E>
where
    I: IntoIterator<Item = Result<Record, E>>,
{
    let mut users = Vec::new();
    let mut items = Vec::new();
    let mut user_ids: HashMap<String, usize> = HashMap::new();
    let mut item_ids: HashMap<String, usize> = HashMap::new();
    let mut positives: Vec<Vec<usize>> = Vec::new();
    let mut docs: BTreeMap<(usize, usize), String> = BTreeMap::new();
    let mut skipped = 0;

    for record in records {
        let interaction = match record? {
            Ok(interaction) => interaction,
            Err(bad) => {
                log::debug!("skipping record at line {}: {}", bad.line, bad.reason);
                skipped += 1;
                continue;
            }
        };
        let Interaction { user, item, review } = interaction;
        let u = *user_ids.entry(user).or_insert_with_key(|k| {
            users.push(k.clone());
            positives.push(Vec::new());
            users.len() - 1
        });
        let i = *item_ids.entry(item).or_insert_with_key(|k| {
            items.push(k.clone());
            items.len() - 1
        });
        if let Err(pos) = positives[u].binary_search(&i) {
            positives[u].insert(pos, i);
        }
        if !review.is_empty() {
            docs.entry((u, i))
                .and_modify(|text| {
                    text.push(' ');
                    text.push_str(&review);
                })
                .or_insert(review);
        }
    }

    Ok(Ingested {
        dataset: Dataset {
            users,
            items,
            user_ids,
            item_ids,
            positives,
            docs,
        },
        skipped,
    })
}

/// Keeps users with at least `min_positives` positives, in a single pass over
/// users. Items left without feedback are dropped and ids compacted in their
/// original order.
pub fn filter_min_activity(d: &Dataset, min_positives: usize) -> Dataset {
    let keep_user: Vec<bool> = d
        .positives
        .iter()
        .map(|p| p.len() >= min_positives.max(1))
        .collect();

    let mut item_used = vec![false; d.items.len()];
    for (u, set) in d.positives.iter().enumerate() {
        if keep_user[u] {
            for &i in set {
                item_used[i] = true;
            }
        }
    }
    let mut item_map = vec![usize::MAX; d.items.len()];
    let mut items = Vec::new();
    for (i, used) in item_used.iter().enumerate() {
        if *used {
            item_map[i] = items.len();
            items.push(d.items[i].clone());
        }
    }
    let mut user_map = vec![usize::MAX; d.users.len()];
    let mut users = Vec::new();
    let mut positives = Vec::new();
    for (u, keep) in keep_user.iter().enumerate() {
        if *keep {
            user_map[u] = users.len();
            users.push(d.users[u].clone());
            // Monotone remap keeps each set sorted.
            positives.push(d.positives[u].iter().map(|&i| item_map[i]).collect());
        }
    }
    let docs = d
        .docs
        .iter()
        .filter(|((u, _), _)| keep_user[*u])
        .map(|(&(u, i), text)| ((user_map[u], item_map[i]), text.clone()))
        .collect();

    let user_ids = users.iter().cloned().zip(0..).collect();
    let item_ids = items.iter().cloned().zip(0..).collect();
    Dataset {
        users,
        items,
        user_ids,
        item_ids,
        positives,
        docs,
    }
}

/// Per-user partition of the positives into train, validation and test sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    train: Vec<Vec<usize>>,
    valid: Vec<Vec<usize>>,
    test: Vec<Vec<usize>>,
}

impl Split {
    /// Assembles a split and checks it partitions `d`'s positives.
    pub fn from_parts(
        d: &Dataset,
        mut train: Vec<Vec<usize>>,
        mut valid: Vec<Vec<usize>>,
        mut test: Vec<Vec<usize>>,
    ) -> Result<Self, DataError> {
        let m = d.user_count();
        if train.len() != m || valid.len() != m || test.len() != m {
            return Err(DataError::Inconsistent(format!(
                "split covers {}/{}/{} users, dataset has {m}",
                train.len(),
                valid.len(),
                test.len()
            )));
        }
        for u in 0..m {
            train[u].sort_unstable();
            valid[u].sort_unstable();
            test[u].sort_unstable();
            let mut all: Vec<usize> = train[u]
                .iter()
                .chain(&valid[u])
                .chain(&test[u])
                .copied()
                .collect();
            all.sort_unstable();
            if all != d.positives(u) {
                return Err(DataError::Inconsistent(format!(
                    "split of user {:?} is not a partition of its positives",
                    d.user_token(u)
                )));
            }
            if valid[u].len() != VALID_PER_USER
                || test[u].len() != TEST_PER_USER
                || train[u].is_empty()
            {
                return Err(DataError::Inconsistent(format!(
                    "split of user {:?} has sizes ({}, {}, {})",
                    d.user_token(u),
                    train[u].len(),
                    valid[u].len(),
                    test[u].len()
                )));
            }
        }
        Ok(Split { train, valid, test })
    }

    pub fn user_count(&self) -> usize {
        self.train.len()
    }

    pub fn train(&self, user: usize) -> &[usize] {
        &self.train[user]
    }

    pub fn valid(&self, user: usize) -> &[usize] {
        &self.valid[user]
    }

    pub fn test(&self, user: usize) -> &[usize] {
        &self.test[user]
    }

    /// Total number of training positives, `Σ_u |Train_u|`.
    pub fn train_size(&self) -> usize {
        self.train.iter().map(Vec::len).sum()
    }

    /// Occurrences of each item across all training sets.
    pub fn train_item_counts(&self, item_count: usize) -> Vec<usize> {
        let mut counts = vec![0; item_count];
        for set in &self.train {
            for &i in set {
                counts[i] += 1;
            }
        }
        counts
    }

    /// Tab-separated `user<TAB>part<TAB>item` lines, part being
    /// `train`, `valid` or `test`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for u in 0..self.user_count() {
            for (part, set) in [
                ("train", &self.train[u]),
                ("valid", &self.valid[u]),
                ("test", &self.test[u]),
            ] {
                for i in set {
                    let _ = writeln!(out, "{u}\t{part}\t{i}");
                }
            }
        }
        out
    }

    /// Parses the output of [`Split::to_tsv`] against `d`.
    pub fn from_tsv(d: &Dataset, text: &str) -> Result<Self, DataError> {
        let m = d.user_count();
        let mut train = vec![Vec::new(); m];
        let mut valid = vec![Vec::new(); m];
        let mut test = vec![Vec::new(); m];
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |reason: &str| DataError::Parse {
                line: idx + 1,
                reason: reason.to_string(),
            };
            let mut fields = line.split('\t');
            let (Some(u), Some(part), Some(i), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(parse_err("expected three tab-separated fields"));
            };
            let u: usize = u.parse().map_err(|_| parse_err("bad user index"))?;
            let i: usize = i.parse().map_err(|_| parse_err("bad item index"))?;
            if u >= m {
                return Err(parse_err("user index out of range"));
            }
            match part {
                "train" => train[u].push(i),
                "valid" => valid[u].push(i),
                "test" => test[u].push(i),
                _ => return Err(parse_err("unknown split part")),
            }
        }
        Split::from_parts(d, train, valid, test)
    }
}

/// Randomly withholds two validation and two test positives per user.
pub fn split(d: &Dataset, seed: u64) -> Result<Split, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = d.user_count();
    let mut train = Vec::with_capacity(m);
    let mut valid = Vec::with_capacity(m);
    let mut test = Vec::with_capacity(m);
    for u in 0..m {
        let positives = d.positives(u);
        if positives.len() < MIN_POSITIVES_TO_SPLIT {
            return Err(DataError::TooFewPositives {
                user: d.user_token(u).to_string(),
                count: positives.len(),
                required: MIN_POSITIVES_TO_SPLIT,
            });
        }
        let mut shuffled = positives.to_vec();
        shuffled.shuffle(&mut rng);
        let mut te = shuffled[..TEST_PER_USER].to_vec();
        let mut va = shuffled[TEST_PER_USER..TEST_PER_USER + VALID_PER_USER].to_vec();
        let mut tr = shuffled[TEST_PER_USER + VALID_PER_USER..].to_vec();
        te.sort_unstable();
        va.sort_unstable();
        tr.sort_unstable();
        test.push(te);
        valid.push(va);
        train.push(tr);
    }
    Ok(Split { train, valid, test })
}

/// Table-1 style dataset summary.
#[derive(Clone, Debug, PartialEq)]
pub struct StatsReport {
    pub user_count: usize,
    pub item_count: usize,
    pub feedback_count: usize,
    pub word_count: usize,
    pub cold_user_count: usize,
    pub cold_item_count: usize,
    /// Fraction in `[0, 1]`, not a percentage.
    pub density: f64,
}

impl StatsReport {
    pub const CSV_HEADER: &'static str =
        "Datasets,#Users,#Items,#Feedback,#Words,#Cold Users,#Cold Items,Density (%)";

    /// One CSV data row (no header, no trailing newline).
    pub fn csv_row(&self, dataset_name: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6}",
            dataset_name,
            self.user_count,
            self.item_count,
            self.feedback_count,
            self.word_count,
            self.cold_user_count,
            self.cold_item_count,
            self.density * 100.0
        )
    }
}

/// Counts users and items with fewer than `cold_threshold` feedback events.
pub fn stats(d: &Dataset, cold_threshold: usize) -> StatsReport {
    let feedback_count = d.feedback_count();
    let cold_user_count = d
        .positives
        .iter()
        .filter(|p| p.len() < cold_threshold)
        .count();
    let cold_item_count = d
        .item_feedback_counts()
        .into_iter()
        .filter(|&c| c < cold_threshold)
        .count();
    let word_count = d.docs.values().map(|t| tokenize(t).len()).sum();
    let cells = d.user_count() * d.item_count();
    let density = if cells == 0 {
        0.0
    } else {
        feedback_count as f64 / cells as f64
    };
    StatsReport {
        user_count: d.user_count(),
        item_count: d.item_count(),
        feedback_count,
        word_count,
        cold_user_count,
        cold_item_count,
        density,
    }
}
