//! Exact per-user AUC, the All/Cold/Warm test selections and the
//! improvement report.
//!
//! For a user `u` with selected test items `T_u` and unobserved items
//! `I \ N_u`, the user term is the fraction of pairs `(i, j)` with
//! `x̂_ui > x̂_uj` (ties count as wrong). AUC is the unweighted mean of the
//! user terms, accumulated in ascending user order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::corpus::{Dataset, Split};
use crate::error::EvalError;
use crate::model::{ModelKind, Scorer};

/// Default training-occurrence bound for the Cold setting.
pub const DEFAULT_COLD_TRAIN_THRESHOLD: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SettingKind {
    All,
    Cold,
    Warm,
}

impl SettingKind {
    pub const ALL: [SettingKind; 3] = [SettingKind::All, SettingKind::Cold, SettingKind::Warm];
}

impl fmt::Display for SettingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SettingKind::All => "All",
            SettingKind::Cold => "Cold",
            SettingKind::Warm => "Warm",
        })
    }
}

impl FromStr for SettingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(SettingKind::All),
            "cold" => Ok(SettingKind::Cold),
            "warm" => Ok(SettingKind::Warm),
            other => Err(format!("unknown evaluation setting {other:?}")),
        }
    }
}

/// How a test pair is judged cold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ColdMode {
    /// The test item occurs at most `threshold` times across training sets.
    #[default]
    ByItem,
    /// The user has at most `threshold` training positives.
    ByUser,
}

impl FromStr for ColdMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "by_item" | "item" => Ok(ColdMode::ByItem),
            "by_user" | "user" => Ok(ColdMode::ByUser),
            other => Err(format!("unknown cold mode {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalSetting {
    pub kind: SettingKind,
    pub cold_threshold: usize,
    pub cold_mode: ColdMode,
}

impl EvalSetting {
    pub fn new(kind: SettingKind) -> Self {
        EvalSetting {
            kind,
            cold_threshold: DEFAULT_COLD_TRAIN_THRESHOLD,
            cold_mode: ColdMode::ByItem,
        }
    }
}

/// Test `(user, item)` pairs under a setting, sorted by user then item.
pub fn select_test_pairs(split: &Split, d: &Dataset, setting: &EvalSetting) -> Vec<(usize, usize)> {
    let train_counts = split.train_item_counts(d.item_count());
    let is_cold = |u: usize, i: usize| match setting.cold_mode {
        ColdMode::ByItem => train_counts[i] <= setting.cold_threshold,
        ColdMode::ByUser => split.train(u).len() <= setting.cold_threshold,
    };
    let mut pairs = Vec::new();
    for u in 0..split.user_count() {
        for &i in split.test(u) {
            let keep = match setting.kind {
                SettingKind::All => true,
                SettingKind::Cold => is_cold(u, i),
                SettingKind::Warm => !is_cold(u, i),
            };
            if keep {
                pairs.push((u, i));
            }
        }
    }
    pairs
}

/// Correctly ordered and total `(test, unobserved)` pair counts for a user.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UserAuc {
    pub user: usize,
    pub correct: u64,
    pub total: u64,
}

impl UserAuc {
    pub fn value(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AucSummary {
    pub value: f64,
    /// Users contributing to the average.
    pub users: usize,
    /// Selected users skipped because every item is observed for them.
    pub skipped_users: usize,
}

fn group_by_user(pairs: &[(usize, usize)]) -> BTreeMap<usize, Vec<usize>> {
    let mut by_user: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(u, i) in pairs {
        by_user.entry(u).or_default().push(i);
    }
    by_user
}

/// Per-user pair counts for the selected test pairs. Users without any
/// unobserved item are left out.
pub fn auc_per_user<S: Scorer + ?Sized>(
    scorer: &S,
    d: &Dataset,
    pairs: &[(usize, usize)],
) -> Vec<UserAuc> {
    let mut scores = Vec::new();
    let mut negatives = Vec::new();
    let mut out = Vec::new();
    for (user, items) in group_by_user(pairs) {
        scorer.score_all_items(user, &mut scores);
        negatives.clear();
        negatives.extend(
            scores
                .iter()
                .enumerate()
                .filter(|&(j, _)| !d.is_positive(user, j))
                .map(|(_, &s)| s),
        );
        if negatives.is_empty() {
            continue;
        }
        negatives.sort_unstable_by(f64::total_cmp);
        let correct: u64 = items
            .iter()
            .map(|&i| {
                let s = scores[i];
                negatives.partition_point(|&n| n < s) as u64
            })
            .sum();
        out.push(UserAuc {
            user,
            correct,
            total: (items.len() * negatives.len()) as u64,
        });
    }
    out
}

/// Exact AUC over the selected test pairs, comparing each test item with
/// every unobserved item of its user.
pub fn auc<S: Scorer + ?Sized>(
    scorer: &S,
    d: &Dataset,
    pairs: &[(usize, usize)],
) -> Result<AucSummary, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptySelection);
    }
    let selected_users = group_by_user(pairs).len();
    let per_user = auc_per_user(scorer, d, pairs);
    let skipped_users = selected_users - per_user.len();
    if skipped_users > 0 {
        log::warn!("{skipped_users} users have no unobserved items and were skipped");
    }
    if per_user.is_empty() {
        return Err(EvalError::NoComparableUsers);
    }
    let sum: f64 = per_user.iter().map(UserAuc::value).sum();
    Ok(AucSummary {
        value: sum / per_user.len() as f64,
        users: per_user.len(),
        skipped_users,
    })
}

/// Fixed validation positives with pre-drawn unobserved items, reused at
/// every evaluation of a fit so successive scores are comparable.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationSample {
    users: Vec<(usize, Vec<usize>, Vec<usize>)>,
}

impl ValidationSample {
    /// Draws `negatives` unobserved items (with replacement) per
    /// validation positive.
    pub fn draw<R: Rng + ?Sized>(split: &Split, d: &Dataset, negatives: usize, rng: &mut R) -> Self {
        let n = d.item_count();
        let mut users = Vec::new();
        for u in 0..split.user_count() {
            let valid = split.valid(u);
            if valid.is_empty() || d.positives(u).len() >= n {
                continue;
            }
            let negs = (0..valid.len() * negatives)
                .map(|_| loop {
                    let j = rng.gen_range(0..n);
                    if !d.is_positive(u, j) {
                        break j;
                    }
                })
                .collect();
            users.push((u, valid.to_vec(), negs));
        }
        ValidationSample { users }
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }
}

/// AUC on a [`ValidationSample`]: each validation positive is compared with
/// its own block of sampled unobserved items.
pub fn sampled_auc<S: Scorer + ?Sized>(scorer: &S, sample: &ValidationSample) -> f64 {
    if sample.users.is_empty() {
        return 0.0;
    }
    let mut items = Vec::new();
    let mut scores = Vec::new();
    let mut total = 0.0;
    for (u, valid, negs) in &sample.users {
        items.clear();
        items.extend_from_slice(valid);
        items.extend_from_slice(negs);
        scorer.score_items(*u, &items, &mut scores);
        let per_pos = negs.len() / valid.len();
        let mut correct = 0usize;
        for (k, &s) in scores[..valid.len()].iter().enumerate() {
            let block = &scores[valid.len() + k * per_pos..valid.len() + (k + 1) * per_pos];
            correct += block.iter().filter(|&&n| s > n).count();
        }
        total += correct as f64 / negs.len() as f64;
    }
    total / sample.users.len() as f64
}

/// Relative gains of the text model over plain MF, in percent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Improvement {
    /// The text model the gains refer to.
    pub model: ModelKind,
    /// `(auc_model − auc_mf) / auc_mf × 100`.
    pub over_base: f64,
    /// `(auc_model − auc_mf) / (auc_mf − auc_pop) × 100`; `None` when MF
    /// and POP tie.
    pub over_margin: Option<f64>,
}

/// Computes both improvement columns. Uses the shared model when present,
/// the diff model otherwise.
pub fn improvement_report(aucs: &BTreeMap<ModelKind, f64>) -> Result<Improvement, EvalError> {
    let pop = *aucs.get(&ModelKind::Pop).ok_or(EvalError::MissingModel("POP"))?;
    let base = *aucs.get(&ModelKind::Mf).ok_or(EvalError::MissingModel("BPR-MF"))?;
    let (model, value) = [ModelKind::Shared, ModelKind::Diff]
        .into_iter()
        .find_map(|k| aucs.get(&k).map(|&v| (k, v)))
        .ok_or(EvalError::MissingModel("TBPR-Diff or TBPR-Shared"))?;
    let gain = value - base;
    let margin = base - pop;
    Ok(Improvement {
        model,
        over_base: gain / base * 100.0,
        over_margin: (margin != 0.0).then(|| gain / margin * 100.0),
    })
}

/// One line of the results table.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub setting: SettingKind,
    pub aucs: BTreeMap<ModelKind, f64>,
}

impl ReportRow {
    /// Header for a table with one AUC column per kind in `kinds`.
    pub fn csv_header(kinds: &[ModelKind]) -> String {
        let mut cells = vec!["dataset".to_string(), "setting".to_string()];
        cells.extend(kinds.iter().map(|k| format!("{}_auc", k.column_name())));
        cells.push("improv1_pct".into());
        cells.push("improv2_pct".into());
        cells.join(",")
    }

    /// CSV line matching [`ReportRow::csv_header`]; missing values and
    /// undefined improvements print `n/a`.
    pub fn csv_row(&self, kinds: &[ModelKind]) -> String {
        let na = || "n/a".to_string();
        let mut cells = vec![self.dataset.clone(), self.setting.to_string()];
        for kind in kinds {
            cells.push(self.aucs.get(kind).map_or_else(na, |v| format!("{v:.6}")));
        }
        match improvement_report(&self.aucs) {
            Ok(imp) => {
                cells.push(format!("{:.3}", imp.over_base));
                cells.push(imp.over_margin.map_or_else(na, |v| format!("{v:.3}")));
            }
            Err(_) => {
                cells.push(na());
                cells.push(na());
            }
        }
        cells.join(",")
    }
}

/// Header plus rows, newline terminated.
pub fn report_csv(kinds: &[ModelKind], rows: &[ReportRow]) -> String {
    let mut out = ReportRow::csv_header(kinds);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_row(kinds));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Scores from a dense table.
    struct Table {
        scores: Vec<Vec<f64>>,
    }

    impl Scorer for Table {
        fn user_count(&self) -> usize {
            self.scores.len()
        }
        fn item_count(&self) -> usize {
            self.scores[0].len()
        }
        fn item_score(&self, u: usize, i: usize) -> f64 {
            self.scores[u][i]
        }
    }

    fn one_user(n_items: usize, positives: Vec<usize>, train: Vec<usize>, valid: Vec<usize>, test: Vec<usize>) -> (Dataset, Split) {
        // a filler user owns every item so item ids stay valid
        let d = Dataset::from_parts(
            vec!["u".into(), "filler".into()],
            (0..n_items).map(|i| format!("i{i}")).collect(),
            vec![positives, (0..n_items).collect()],
            BTreeMap::new(),
        )
        .unwrap();
        let s = Split::from_parts(
            &d,
            vec![train, (4..n_items).collect()],
            vec![valid, vec![0, 1]],
            vec![test, vec![2, 3]],
        )
        .unwrap();
        (d, s)
    }

    #[test]
    fn hand_computed_auc() {
        // positives 0..5, test {3}; unobserved 5,6,7,8
        let (d, _) = one_user(9, vec![0, 1, 2, 3, 4], vec![0], vec![1, 2], vec![3, 4]);
        let mut scores = vec![vec![0.0; 9], vec![0.0; 9]];
        scores[0][3] = 1.0;
        scores[0][5] = 2.0;
        scores[0][6] = 3.0;
        scores[0][7] = 0.5;
        scores[0][8] = -1.0;
        let t = Table { scores };
        let r = auc(&t, &d, &[(0, 3)]).unwrap();
        assert_eq!(r.value, 0.5);

        let mut hi = vec![vec![0.0; 9], vec![0.0; 9]];
        hi[0][3] = 10.0;
        assert_eq!(auc(&Table { scores: hi }, &d, &[(0, 3)]).unwrap().value, 1.0);
        let mut lo = vec![vec![0.0; 9], vec![0.0; 9]];
        lo[0][3] = -10.0;
        assert_eq!(auc(&Table { scores: lo }, &d, &[(0, 3)]).unwrap().value, 0.0);
    }

    #[test]
    fn ties_count_as_wrong() {
        let (d, _) = one_user(9, vec![0, 1, 2, 3, 4], vec![0], vec![1, 2], vec![3, 4]);
        let t = Table {
            scores: vec![vec![1.0; 9], vec![1.0; 9]],
        };
        assert_eq!(auc(&t, &d, &[(0, 3), (0, 4)]).unwrap().value, 0.0);
    }

    #[test]
    fn users_without_negatives_are_skipped() {
        let (d, s) = one_user(9, vec![0, 1, 2, 3, 4], vec![0], vec![1, 2], vec![3, 4]);
        let t = Table {
            scores: vec![vec![0.0; 9], vec![0.0; 9]],
        };
        let pairs = select_test_pairs(&s, &d, &EvalSetting::new(SettingKind::All));
        let r = auc(&t, &d, &pairs).unwrap();
        assert_eq!((r.users, r.skipped_users), (1, 1));
        assert_eq!(auc(&t, &d, &[(1, 2)]), Err(EvalError::NoComparableUsers));
        assert_eq!(auc(&t, &d, &[]), Err(EvalError::EmptySelection));
    }

    #[test]
    fn cold_selection_by_item_and_user() {
        // train counts: item 0 by both users (2), items 4..9 once
        let (d, s) = one_user(9, vec![0, 1, 2, 3, 4], vec![0], vec![1, 2], vec![3, 4]);
        let all = select_test_pairs(&s, &d, &EvalSetting::new(SettingKind::All));
        assert_eq!(all.len(), 2 * s.user_count());
        let mut cold = EvalSetting::new(SettingKind::Cold);
        let c = select_test_pairs(&s, &d, &cold);
        assert_eq!(c, all); // every test item has <= 3 training occurrences
        cold.cold_threshold = 0;
        // item 4 has one training occurrence, items 2 and 3 none
        assert_eq!(select_test_pairs(&s, &d, &cold), [(0, 3), (1, 2), (1, 3)]);
        cold.cold_mode = ColdMode::ByUser;
        cold.cold_threshold = 1;
        assert_eq!(select_test_pairs(&s, &d, &cold), [(0, 3), (0, 4)]);
    }

    #[test]
    fn item_with_three_training_occurrences_is_cold() {
        // item 0 is trained by users 0, 1, 2 and tested by user 3
        let positives = vec![
            vec![0, 1, 2, 3, 4],
            vec![0, 5, 6, 7, 8],
            vec![0, 9, 10, 11, 12],
            vec![0, 13, 14, 15, 16],
        ];
        let d = Dataset::from_parts(
            (0..4).map(|u| format!("u{u}")).collect(),
            (0..17).map(|i| format!("i{i}")).collect(),
            positives,
            BTreeMap::new(),
        )
        .unwrap();
        let s = Split::from_parts(
            &d,
            vec![vec![0], vec![0], vec![0], vec![13]],
            vec![vec![1, 2], vec![5, 6], vec![9, 10], vec![14, 15]],
            vec![vec![3, 4], vec![7, 8], vec![11, 12], vec![0, 16]],
        )
        .unwrap();
        let mut setting = EvalSetting::new(SettingKind::Cold);
        assert!(select_test_pairs(&s, &d, &setting).contains(&(3, 0)));
        setting.cold_threshold = 2;
        assert!(!select_test_pairs(&s, &d, &setting).contains(&(3, 0)));
        setting.kind = SettingKind::Warm;
        assert_eq!(select_test_pairs(&s, &d, &setting), [(3, 0)]);
    }

    #[test]
    fn cold_and_warm_partition_all() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 30;
        let n = 25;
        let mut positives: Vec<Vec<usize>> = (0..m)
            .map(|_| {
                let mut v: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.35)).collect();
                v.extend([0, 1, 2, 3, 4]);
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        positives.push((0..n).collect());
        let d = Dataset::from_parts(
            (0..=m).map(|u| format!("u{u}")).collect(),
            (0..n).map(|i| format!("i{i}")).collect(),
            positives,
            BTreeMap::new(),
        )
        .unwrap();
        let s = crate::corpus::split(&d, 8).unwrap();
        let scores: Vec<Vec<f64>> = (0..=m).map(|_| (0..n).map(|_| rng.gen()).collect()).collect();
        let t = Table { scores };
        for mode in [ColdMode::ByItem, ColdMode::ByUser] {
            let mk = |kind| EvalSetting {
                kind,
                cold_threshold: 3,
                cold_mode: mode,
            };
            let all = select_test_pairs(&s, &d, &mk(SettingKind::All));
            let cold = select_test_pairs(&s, &d, &mk(SettingKind::Cold));
            let warm = select_test_pairs(&s, &d, &mk(SettingKind::Warm));
            assert_eq!(cold.len() + warm.len(), all.len());
            assert!(cold.iter().all(|p| !warm.contains(p)));

            // per-user counts reassemble exactly
            let a = auc_per_user(&t, &d, &all);
            let c = auc_per_user(&t, &d, &cold);
            let w = auc_per_user(&t, &d, &warm);
            for ua in &a {
                let find = |v: &[UserAuc]| v.iter().find(|x| x.user == ua.user).map_or((0, 0), |x| (x.correct, x.total));
                let (cc, ct) = find(&c);
                let (wc, wt) = find(&w);
                assert_eq!((ua.correct, ua.total), (cc + wc, ct + wt));
            }
        }
    }

    #[test]
    fn random_scores_give_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (m, n) = (50, 100);
        let mut positives: Vec<Vec<usize>> = (0..m)
            .map(|_| rand::seq::index::sample(&mut rng, n, 8).into_vec())
            .collect();
        positives.push((0..n).collect());
        let d = Dataset::from_parts(
            (0..=m).map(|u| format!("u{u}")).collect(),
            (0..n).map(|i| format!("i{i}")).collect(),
            positives,
            BTreeMap::new(),
        )
        .unwrap();
        let s = crate::corpus::split(&d, 1).unwrap();
        let t = Table {
            scores: (0..=m).map(|_| (0..n).map(|_| rng.gen()).collect()).collect(),
        };
        let pairs: Vec<_> = select_test_pairs(&s, &d, &EvalSetting::new(SettingKind::All))
            .into_iter()
            .filter(|&(u, _)| u < m)
            .collect();
        let v = auc(&t, &d, &pairs).unwrap().value;
        assert!((v - 0.5).abs() <= 0.05, "{v}");
        let constant = Table {
            scores: vec![vec![0.25; n]; m + 1],
        };
        assert_eq!(auc(&constant, &d, &pairs).unwrap().value, 0.0);
    }

    #[test]
    fn improvement_examples() {
        let aucs = BTreeMap::from([
            (ModelKind::Pop, 0.1699),
            (ModelKind::Mf, 0.5658),
            (ModelKind::Shared, 0.5939),
        ]);
        let imp = improvement_report(&aucs).unwrap();
        assert_eq!(imp.model, ModelKind::Shared);
        assert!((imp.over_base - 4.966).abs() < 0.01);
        assert!((imp.over_margin.unwrap() - 7.09).abs() < 0.01);

        let same = BTreeMap::from([
            (ModelKind::Pop, 0.2),
            (ModelKind::Mf, 0.6),
            (ModelKind::Shared, 0.6),
        ]);
        let imp = improvement_report(&same).unwrap();
        assert_eq!((imp.over_base, imp.over_margin), (0.0, Some(0.0)));

        let tie = BTreeMap::from([
            (ModelKind::Pop, 0.6),
            (ModelKind::Mf, 0.6),
            (ModelKind::Diff, 0.7),
        ]);
        assert_eq!(improvement_report(&tie).unwrap().over_margin, None);

        let missing = BTreeMap::from([(ModelKind::Pop, 0.6), (ModelKind::Shared, 0.7)]);
        assert_eq!(improvement_report(&missing), Err(EvalError::MissingModel("BPR-MF")));
    }

    #[test]
    fn report_rows() {
        let row = ReportRow {
            dataset: "toy".into(),
            setting: SettingKind::All,
            aucs: BTreeMap::from([(ModelKind::Pop, 0.25)]),
        };
        assert_eq!(ReportRow::csv_header(&[ModelKind::Pop]), "dataset,setting,pop_auc,improv1_pct,improv2_pct");
        assert_eq!(row.csv_row(&[ModelKind::Pop]), "toy,All,0.250000,n/a,n/a");
        assert_eq!(row.csv_row(&[ModelKind::Pop, ModelKind::Mf]), "toy,All,0.250000,n/a,n/a,n/a");
        let full = ReportRow {
            dataset: "toy".into(),
            setting: SettingKind::Cold,
            aucs: BTreeMap::from([
                (ModelKind::Pop, 0.5),
                (ModelKind::Mf, 0.6),
                (ModelKind::Diff, 0.62),
                (ModelKind::Shared, 0.66),
            ]),
        };
        assert_eq!(
            ReportRow::csv_header(&ModelKind::ALL),
            "dataset,setting,pop_auc,bprmf_auc,tbpr_diff_auc,tbpr_shared_auc,improv1_pct,improv2_pct"
        );
        assert_eq!(
            report_csv(&ModelKind::ALL, &[full]).lines().nth(1).unwrap(),
            "toy,Cold,0.500000,0.600000,0.620000,0.660000,10.000,60.000"
        );
    }
}
