//! Parameters and scoring for the four rankers.
//!
//! Every model scores a `(user, item)` pair as `α + β_u + s(u, i)`. The global
//! and per-user offsets shift all of a user's scores by the same amount, so
//! they drop out of every pairwise difference and every per-user ranking.
//! They are never trained and are held at zero; ranking code only ever
//! looks at the item-dependent part `s(u, i)`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Split};
use crate::error::ModelError;
use crate::textfeat::FeatureMatrix;

/// Weight of the text interaction term relative to the feedback term.
pub const TEXT_TERM_WEIGHT: f64 = 1.0;

/// Half-width of the uniform range used to initialise factor entries.
pub const INIT_SCALE: f64 = 0.01;

/// Which ranker a parameter set belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    /// Training popularity, not personalized.
    Pop,
    /// Plain matrix factorization.
    Mf,
    /// Separate latent and text factor spaces.
    Diff,
    /// Text factors expressed in the item latent space.
    Shared,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Pop, ModelKind::Mf, ModelKind::Diff, ModelKind::Shared];

    /// Short lowercase identifier used on the command line and in file names.
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Pop => "pop",
            ModelKind::Mf => "mf",
            ModelKind::Diff => "diff",
            ModelKind::Shared => "shared",
        }
    }

    /// Name used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Pop => "POP",
            ModelKind::Mf => "BPR-MF",
            ModelKind::Diff => "TBPR-Diff",
            ModelKind::Shared => "TBPR-Shared",
        }
    }

    /// Prefix of the report column holding this model's AUC.
    pub fn column_name(self) -> &'static str {
        match self {
            ModelKind::Pop => "pop",
            ModelKind::Mf => "bprmf",
            ModelKind::Diff => "tbpr_diff",
            ModelKind::Shared => "tbpr_shared",
        }
    }

    pub(crate) fn to_byte(self) -> u8 {
        match self {
            ModelKind::Pop => 0,
            ModelKind::Mf => 1,
            ModelKind::Diff => 2,
            ModelKind::Shared => 3,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.get(b as usize).copied()
    }

    /// Whether the model reads item text features.
    pub fn uses_text(self) -> bool {
        matches!(self, ModelKind::Diff | ModelKind::Shared)
    }

    /// Whether the model is trained by gradient steps.
    pub fn is_trainable(self) -> bool {
        self != ModelKind::Pop
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pop" => Ok(ModelKind::Pop),
            "mf" | "bpr-mf" | "bprmf" => Ok(ModelKind::Mf),
            "diff" | "tbpr-diff" => Ok(ModelKind::Diff),
            "shared" | "tbpr-shared" => Ok(ModelKind::Shared),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

/// Factor counts and text feature dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    /// Latent factors per user and item (`F`).
    pub latent: usize,
    /// Text factors (`K`).
    pub text: usize,
    /// Text feature dimension (`D`).
    pub feature: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            latent: 15,
            text: 15,
            feature: 200,
        }
    }
}

impl Dims {
    pub fn new(latent: usize, text: usize, feature: usize) -> Self {
        Dims {
            latent,
            text,
            feature,
        }
    }

    pub fn validate(&self, kind: ModelKind) -> Result<(), ModelError> {
        if self.latent == 0 || self.text == 0 || self.feature == 0 {
            return Err(ModelError::InvalidDims(format!(
                "all dimensions must be positive, got {self:?}"
            )));
        }
        if kind == ModelKind::Shared && self.text != self.latent {
            return Err(ModelError::InvalidDims(format!(
                "the shared model adds text factors to latent factors and needs K == F, got K={} F={}",
                self.text, self.latent
            )));
        }
        Ok(())
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has the wrong length");
        Matrix { rows, cols, data }
    }

    fn uniform<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-scale..=scale))
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, v);
        }
    }

    /// `selfᵀ · v`.
    pub fn mul_transpose_vec(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&w, row) in v.iter().zip(self.data.chunks_exact(self.cols)) {
            out.iter_mut().zip(row).for_each(|(o, r)| *o += w * r);
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Which positives feed the shared model's per-user text sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UserTextScope {
    /// `Train_u` only; held-out positives never leak into scores.
    #[default]
    Training,
    /// All of `N_u`, as in the literal model definition.
    AllFeedback,
}

/// Cached per-user feature sums `s_u = Σ_k f_k` and set sizes for the
/// shared model.
#[derive(Clone, Debug, PartialEq)]
pub struct UserTextPrior {
    pub sums: Matrix,
    pub sizes: Vec<u64>,
}

impl UserTextPrior {
    pub fn compute(
        features: &FeatureMatrix,
        d: &Dataset,
        split: &Split,
        scope: UserTextScope,
    ) -> Self {
        let dim = features.dim();
        let m = split.user_count();
        let mut sums = Matrix::zeros(m, dim);
        let mut sizes = Vec::with_capacity(m);
        for u in 0..m {
            let items = match scope {
                UserTextScope::Training => split.train(u),
                UserTextScope::AllFeedback => d.positives(u),
            };
            let row = sums.row_mut(u);
            for &k in items {
                row.iter_mut()
                    .zip(features.row(k))
                    .for_each(|(s, f)| *s += f);
            }
            sizes.push(items.len() as u64);
        }
        UserTextPrior { sums, sizes }
    }

    /// `|S_u|^{-1/2}`, or zero for an empty set.
    pub fn scale(&self, user: usize) -> f64 {
        match self.sizes[user] {
            0 => 0.0,
            n => 1.0 / (n as f64).sqrt(),
        }
    }
}

/// Model parameters for one kind. Blocks a kind does not use are `None`.
///
/// Shapes: `user_latent` is `M×F`, `item_latent` is `N×F` (one row per
/// entity), `user_text` is `M×K`, `kernel` is `K×D`.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    kind: ModelKind,
    dims: Dims,
    users: usize,
    items: usize,
    pub item_bias: Vec<f64>,
    pub user_latent: Matrix,
    pub item_latent: Matrix,
    pub user_text: Option<Matrix>,
    pub kernel: Option<Matrix>,
    pub text_bias: Option<Vec<f64>>,
    pub popularity: Option<Vec<u64>>,
    pub text_prior: Option<UserTextPrior>,
}

impl Params {
    /// Zero-valued parameters with every block the kind needs.
    pub fn zeros(kind: ModelKind, dims: Dims, users: usize, items: usize) -> Self {
        Params {
            kind,
            dims,
            users,
            items,
            item_bias: vec![0.0; items],
            user_latent: Matrix::zeros(users, dims.latent),
            item_latent: Matrix::zeros(items, dims.latent),
            user_text: (kind == ModelKind::Diff).then(|| Matrix::zeros(users, dims.text)),
            kernel: kind.uses_text().then(|| Matrix::zeros(dims.text, dims.feature)),
            text_bias: kind.uses_text().then(|| vec![0.0; dims.feature]),
            popularity: (kind == ModelKind::Pop).then(|| vec![0; items]),
            text_prior: (kind == ModelKind::Shared).then(|| UserTextPrior {
                sums: Matrix::zeros(users, dims.feature),
                sizes: vec![0; users],
            }),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn user_count(&self) -> usize {
        self.users
    }

    pub fn item_count(&self) -> usize {
        self.items
    }

    fn check_user(&self, user: usize) -> Result<(), ModelError> {
        if user >= self.users {
            return Err(ModelError::IndexOutOfRange {
                what: "user",
                index: user,
                size: self.users,
            });
        }
        Ok(())
    }

    fn check_item(&self, item: usize) -> Result<(), ModelError> {
        if item >= self.items {
            return Err(ModelError::IndexOutOfRange {
                what: "item",
                index: item,
                size: self.items,
            });
        }
        Ok(())
    }

    fn check_kind(&self, expected: ModelKind) -> Result<(), ModelError> {
        if self.kind != expected {
            return Err(ModelError::WrongKind {
                expected: expected.display_name(),
                found: self.kind.display_name(),
            });
        }
        Ok(())
    }

    /// Checks that `features` matches the model's item count and dimension.
    pub fn check_features(&self, features: &FeatureMatrix) -> Result<(), ModelError> {
        if !self.kind.uses_text() {
            return Ok(());
        }
        if features.dim() != self.dims.feature {
            return Err(ModelError::DimensionMismatch {
                expected: self.dims.feature,
                found: features.dim(),
            });
        }
        if features.item_count() != self.items {
            return Err(ModelError::IndexOutOfRange {
                what: "feature row",
                index: features.item_count(),
                size: self.items,
            });
        }
        Ok(())
    }

    /// Training popularity of `item`.
    pub fn predict_pop(&self, item: usize) -> Result<f64, ModelError> {
        self.check_kind(ModelKind::Pop)?;
        self.check_item(item)?;
        Ok(self.popularity.as_ref().expect("pop counts")[item] as f64)
    }

    /// `β_i + P_uᵀQ_i`.
    pub fn predict_mf(&self, user: usize, item: usize) -> Result<f64, ModelError> {
        self.check_kind(ModelKind::Mf)?;
        self.check_user(user)?;
        self.check_item(item)?;
        Ok(self.item_bias[item] + dot(self.user_latent.row(user), self.item_latent.row(item)))
    }

    /// `β_i + P_uᵀQ_i + θ_uᵀ(H f_i) + β′ᵀf_i`.
    pub fn predict_diff(
        &self,
        features: &FeatureMatrix,
        user: usize,
        item: usize,
    ) -> Result<f64, ModelError> {
        self.check_kind(ModelKind::Diff)?;
        self.check_user(user)?;
        self.check_item(item)?;
        self.check_features(features)?;
        let f = features.row(item);
        let kernel = self.kernel.as_ref().expect("diff kernel");
        let mut hf = vec![0.0; self.dims.text];
        kernel.mul_vec(f, &mut hf);
        let theta = self.user_text.as_ref().expect("diff user text").row(user);
        Ok(self.item_bias[item]
            + dot(self.user_latent.row(user), self.item_latent.row(item))
            + TEXT_TERM_WEIGHT * dot(theta, &hf)
            + dot(self.text_bias.as_ref().expect("text bias"), f))
    }

    /// `Q_iᵀ(P_u + |S_u|^{-1/2} H s_u) + β_i + β′ᵀf_i`.
    pub fn predict_shared(
        &self,
        features: &FeatureMatrix,
        user: usize,
        item: usize,
    ) -> Result<f64, ModelError> {
        self.check_kind(ModelKind::Shared)?;
        self.check_user(user)?;
        self.check_item(item)?;
        self.check_features(features)?;
        let prior = self.text_prior.as_ref().expect("shared prior");
        let kernel = self.kernel.as_ref().expect("shared kernel");
        let mut hs = vec![0.0; self.dims.text];
        kernel.mul_vec(prior.sums.row(user), &mut hs);
        let scale = TEXT_TERM_WEIGHT * prior.scale(user);
        let q = self.item_latent.row(item);
        let p = self.user_latent.row(user);
        let user_vec: Vec<f64> = p.iter().zip(&hs).map(|(p, h)| p + scale * h).collect();
        Ok(dot(q, &user_vec)
            + self.item_bias[item]
            + dot(self.text_bias.as_ref().expect("text bias"), features.row(item)))
    }

    /// Dispatches to the kind-specific predictor.
    pub fn predict(
        &self,
        features: &FeatureMatrix,
        user: usize,
        item: usize,
    ) -> Result<f64, ModelError> {
        match self.kind {
            ModelKind::Pop => {
                self.check_user(user)?;
                self.predict_pop(item)
            }
            ModelKind::Mf => self.predict_mf(user, item),
            ModelKind::Diff => self.predict_diff(features, user, item),
            ModelKind::Shared => self.predict_shared(features, user, item),
        }
    }

    /// A scorer bound to `features`.
    pub fn scorer<'a>(&'a self, features: &'a FeatureMatrix) -> Result<ModelScorer<'a>, ModelError> {
        self.check_features(features)?;
        Ok(ModelScorer {
            params: self,
            features,
        })
    }
}

/// Randomly initialised parameters: biases zero, factor entries uniform in
/// `[-0.01, 0.01]`, popularity from training counts, and the shared model's
/// per-user text sums precomputed.
pub fn init_params(
    kind: ModelKind,
    dims: Dims,
    d: &Dataset,
    split: &Split,
    features: &FeatureMatrix,
    seed: u64,
    scope: UserTextScope,
) -> Result<Params, ModelError> {
    dims.validate(kind)?;
    let (m, n) = (d.user_count(), d.item_count());
    if split.user_count() != m {
        return Err(ModelError::InvalidDims(format!(
            "split covers {} users, dataset has {m}",
            split.user_count()
        )));
    }
    let mut params = Params::zeros(kind, dims, m, n);
    params.check_features(features)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        ModelKind::Pop => {
            params.popularity = Some(
                split
                    .train_item_counts(n)
                    .into_iter()
                    .map(|c| c as u64)
                    .collect(),
            );
        }
        _ => {
            params.user_latent = Matrix::uniform(m, dims.latent, INIT_SCALE, &mut rng);
            params.item_latent = Matrix::uniform(n, dims.latent, INIT_SCALE, &mut rng);
            if kind == ModelKind::Diff {
                params.user_text = Some(Matrix::uniform(m, dims.text, INIT_SCALE, &mut rng));
            }
            if kind.uses_text() {
                params.kernel = Some(Matrix::uniform(dims.text, dims.feature, INIT_SCALE, &mut rng));
            }
            if kind == ModelKind::Shared {
                params.text_prior = Some(UserTextPrior::compute(features, d, split, scope));
            }
        }
    }
    Ok(params)
}

/// Anything that can score items for users.
///
/// `item_score` is the item-dependent part of the prediction; `user_constant`
/// is whatever is shared by all of a user's items (global and user biases).
/// Pairwise differences, rankings and AUC only use `item_score`.
pub trait Scorer {
    fn user_count(&self) -> usize;

    fn item_count(&self) -> usize;

    fn item_score(&self, user: usize, item: usize) -> f64;

    fn user_constant(&self, _user: usize) -> f64 {
        0.0
    }

    /// Full prediction `user_constant(u) + item_score(u, i)`.
    fn score(&self, user: usize, item: usize) -> f64 {
        self.user_constant(user) + self.item_score(user, item)
    }

    /// `item_score` for every item; implementations may hoist per-user work.
    fn score_all_items(&self, user: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.item_count()).map(|i| self.item_score(user, i)));
    }

    /// `item_score` for a subset of items, in the given order.
    fn score_items(&self, user: usize, items: &[usize], out: &mut Vec<f64>) {
        out.clear();
        out.extend(items.iter().map(|&i| self.item_score(user, i)));
    }
}

/// Scores from a [`Params`] and its feature matrix. Per-user vectors are
/// folded once so a full item sweep costs `O(N (F + D))`.
#[derive(Clone, Copy)]
pub struct ModelScorer<'a> {
    params: &'a Params,
    features: &'a FeatureMatrix,
}

/// Per-user quantities that combine with item rows into a score.
struct UserVector {
    latent: Vec<f64>,
    text: Vec<f64>,
}

impl<'a> ModelScorer<'a> {
    pub fn params(&self) -> &'a Params {
        self.params
    }

    fn user_vector(&self, user: usize) -> UserVector {
        let p = self.params;
        match p.kind {
            ModelKind::Pop => UserVector {
                latent: Vec::new(),
                text: Vec::new(),
            },
            ModelKind::Mf => UserVector {
                latent: p.user_latent.row(user).to_vec(),
                text: Vec::new(),
            },
            ModelKind::Diff => {
                // θ_uᵀH, a D-vector, plus the text bias.
                let kernel = p.kernel.as_ref().expect("diff kernel");
                let theta = p.user_text.as_ref().expect("diff user text").row(user);
                let weighted: Vec<f64> = theta.iter().map(|t| TEXT_TERM_WEIGHT * t).collect();
                let mut text = vec![0.0; p.dims.feature];
                kernel.mul_transpose_vec(&weighted, &mut text);
                text.iter_mut()
                    .zip(p.text_bias.as_ref().expect("text bias"))
                    .for_each(|(t, b)| *t += b);
                UserVector {
                    latent: p.user_latent.row(user).to_vec(),
                    text,
                }
            }
            ModelKind::Shared => {
                let prior = p.text_prior.as_ref().expect("shared prior");
                let kernel = p.kernel.as_ref().expect("shared kernel");
                let mut hs = vec![0.0; p.dims.text];
                kernel.mul_vec(prior.sums.row(user), &mut hs);
                let scale = TEXT_TERM_WEIGHT * prior.scale(user);
                let latent = p
                    .user_latent
                    .row(user)
                    .iter()
                    .zip(&hs)
                    .map(|(p, h)| p + scale * h)
                    .collect();
                UserVector {
                    latent,
                    text: p.text_bias.clone().expect("text bias"),
                }
            }
        }
    }

    fn combine(&self, uv: &UserVector, item: usize) -> f64 {
        let p = self.params;
        match p.kind {
            ModelKind::Pop => p.popularity.as_ref().expect("pop counts")[item] as f64,
            ModelKind::Mf => p.item_bias[item] + dot(&uv.latent, p.item_latent.row(item)),
            ModelKind::Diff | ModelKind::Shared => {
                p.item_bias[item]
                    + dot(&uv.latent, p.item_latent.row(item))
                    + dot(&uv.text, self.features.row(item))
            }
        }
    }
}

impl Scorer for ModelScorer<'_> {
    fn user_count(&self) -> usize {
        self.params.users
    }

    fn item_count(&self) -> usize {
        self.params.items
    }

    fn item_score(&self, user: usize, item: usize) -> f64 {
        let uv = self.user_vector(user);
        self.combine(&uv, item)
    }

    fn score_all_items(&self, user: usize, out: &mut Vec<f64>) {
        let uv = self.user_vector(user);
        out.clear();
        out.extend((0..self.params.items).map(|i| self.combine(&uv, i)));
    }

    fn score_items(&self, user: usize, items: &[usize], out: &mut Vec<f64>) {
        let uv = self.user_vector(user);
        out.clear();
        out.extend(items.iter().map(|&i| self.combine(&uv, i)));
    }
}

fn check_index(what: &'static str, index: usize, size: usize) -> Result<(), ModelError> {
    if index >= size {
        return Err(ModelError::IndexOutOfRange { what, index, size });
    }
    Ok(())
}

/// `x̂_ui − x̂_uj`.
pub fn pairwise_diff<S: Scorer + ?Sized>(
    scorer: &S,
    user: usize,
    i: usize,
    j: usize,
) -> Result<f64, ModelError> {
    check_index("user", user, scorer.user_count())?;
    check_index("item", i, scorer.item_count())?;
    check_index("item", j, scorer.item_count())?;
    if i == j {
        return Err(ModelError::SameItem(i));
    }
    Ok(scorer.item_score(user, i) - scorer.item_score(user, j))
}

/// Orders items by descending score, ties by ascending index.
pub(crate) fn order_by_score(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Candidates sorted by descending score; equal scores keep ascending item
/// order.
pub fn rank<S: Scorer + ?Sized>(
    scorer: &S,
    user: usize,
    candidates: &[usize],
) -> Result<Vec<usize>, ModelError> {
    if candidates.is_empty() {
        return Err(ModelError::EmptyCandidates);
    }
    check_index("user", user, scorer.user_count())?;
    for &c in candidates {
        check_index("item", c, scorer.item_count())?;
    }
    let mut scores = Vec::new();
    scorer.score_items(user, candidates, &mut scores);
    let mut scored: Vec<(usize, f64)> = candidates.iter().copied().zip(scores).collect();
    scored.sort_by(|&a, &b| order_by_score(a, b));
    Ok(scored.into_iter().map(|(i, _)| i).collect())
}
