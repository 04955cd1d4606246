//! Pairwise stochastic gradient ascent on the BPR objective.
//!
//! Each step draws a triple `(u, i, j)` with `i ∈ Train_u` and `j ∉ N_u`,
//! evaluates `x̂_uij = x̂_ui − x̂_uj` and moves every parameter the triple
//! touches by `η (σ(−x̂_uij) ∂x̂_uij/∂Θ − λ Θ)`. All gradients are taken at
//! the pre-step values.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Split};
use crate::error::TrainError;
use crate::eval::{sampled_auc, ValidationSample};
use crate::model::{dot, init_params, Dims, ModelKind, Params, UserTextScope, TEXT_TERM_WEIGHT};
use crate::textfeat::FeatureMatrix;

/// A training sample: `user` prefers `pos` over `neg`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub user: usize,
    pub pos: usize,
    pub neg: usize,
}

/// Optimizer and fit-loop settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Penalty on `P`, `Q` and item biases.
    pub reg_latent: f64,
    /// Penalty on `θ`, `H` and the text bias.
    pub reg_text: f64,
    pub max_iterations: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub eval_every: usize,
    pub seed: u64,
    /// Sampled unobserved items per validation positive.
    pub valid_negatives: usize,
}

impl TrainConfig {
    /// Published settings: `η = 0.005, λ = 11` for plain MF and
    /// `η = 0.001, λ_latent = 11, λ_text = 5` for the text models.
    pub fn for_kind(kind: ModelKind) -> Self {
        let (learning_rate, reg_text) = match kind {
            ModelKind::Pop | ModelKind::Mf => (0.005, 11.0),
            ModelKind::Diff | ModelKind::Shared => (0.001, 5.0),
        };
        TrainConfig {
            learning_rate,
            reg_latent: 11.0,
            reg_text,
            max_iterations: 200,
            patience: 5,
            eval_every: 1,
            seed: 0,
            valid_negatives: 100,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::InvalidConfig(msg.to_string()));
        // A zero rate is accepted so a run can be frozen for inspection.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be a finite non-negative number");
        }
        if !(self.reg_latent >= 0.0 && self.reg_text >= 0.0) {
            return bad("regularization weights must be non-negative");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1");
        }
        if self.valid_negatives == 0 {
            return bad("valid_negatives must be at least 1");
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_kind(ModelKind::Shared)
    }
}

/// Uniform triple sampler over users that have at least one training
/// positive and at least one unobserved item.
#[derive(Clone, Debug)]
pub struct TripleSampler<'a> {
    split: &'a Split,
    dataset: &'a Dataset,
    eligible: Vec<usize>,
}

impl<'a> TripleSampler<'a> {
    pub fn new(split: &'a Split, dataset: &'a Dataset) -> Result<Self, TrainError> {
        let n = dataset.item_count();
        let eligible: Vec<usize> = (0..split.user_count())
            .filter(|&u| !split.train(u).is_empty() && dataset.positives(u).len() < n)
            .collect();
        if eligible.is_empty() {
            return Err(TrainError::UnsatisfiableSampling);
        }
        Ok(TripleSampler {
            split,
            dataset,
            eligible,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Triple {
        let user = self.eligible[rng.gen_range(0..self.eligible.len())];
        let train = self.split.train(user);
        let pos = train[rng.gen_range(0..train.len())];
        let n = self.dataset.item_count();
        let neg = loop {
            let j = rng.gen_range(0..n);
            if !self.dataset.is_positive(user, j) {
                break j;
            }
        };
        Triple { user, pos, neg }
    }
}

/// Draws one triple. Builds a fresh sampler per call; use
/// [`TripleSampler`] in loops.
pub fn sample_triple<R: Rng + ?Sized>(
    split: &Split,
    d: &Dataset,
    rng: &mut R,
) -> Result<Triple, TrainError> {
    Ok(TripleSampler::new(split, d)?.sample(rng))
}

/// `∂x̂_uij/∂Θ` for every block a triple touches. The kernel gradient is
/// the rank-one matrix `kernel_left · kernel_rightᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleGradient {
    pub diff: f64,
    pub user_latent: Vec<f64>,
    pub pos_latent: Vec<f64>,
    pub neg_latent: Vec<f64>,
    pub pos_bias: f64,
    pub neg_bias: f64,
    pub user_text: Option<Vec<f64>>,
    pub kernel_left: Option<Vec<f64>>,
    pub kernel_right: Option<Vec<f64>>,
    pub text_bias: Option<Vec<f64>>,
}

/// Evaluates `x̂_uij` and its analytic gradient at the current parameters.
pub fn triple_gradient(
    params: &Params,
    features: &FeatureMatrix,
    t: Triple,
) -> Result<TripleGradient, TrainError> {
    let kind = params.kind();
    if !kind.is_trainable() {
        return Err(TrainError::InvalidConfig(
            "the popularity model has no trainable parameters".into(),
        ));
    }
    params.check_features(features)?;
    let Triple { user, pos, neg } = t;
    let p_u = params.user_latent.row(user);
    let q_i = params.item_latent.row(pos);
    let q_j = params.item_latent.row(neg);
    let dq: Vec<f64> = q_i.iter().zip(q_j).map(|(a, b)| a - b).collect();
    let mut diff = params.item_bias[pos] - params.item_bias[neg];

    let df: Option<Vec<f64>> = kind.uses_text().then(|| {
        features
            .row(pos)
            .iter()
            .zip(features.row(neg))
            .map(|(a, b)| a - b)
            .collect()
    });
    if let (Some(df), Some(tb)) = (&df, &params.text_bias) {
        diff += dot(tb, df);
    }

    let mut grad = TripleGradient {
        diff: 0.0,
        user_latent: dq.clone(),
        pos_latent: Vec::new(),
        neg_latent: Vec::new(),
        pos_bias: 1.0,
        neg_bias: -1.0,
        user_text: None,
        kernel_left: None,
        kernel_right: None,
        text_bias: df.clone(),
    };

    match kind {
        ModelKind::Pop => unreachable!("checked above"),
        ModelKind::Mf => {
            diff += dot(p_u, &dq);
            grad.pos_latent = p_u.to_vec();
            grad.neg_latent = p_u.iter().map(|v| -v).collect();
        }
        ModelKind::Diff => {
            let df = df.expect("text kind");
            let kernel = params.kernel.as_ref().expect("diff kernel");
            let theta = params.user_text.as_ref().expect("diff user text").row(user);
            let mut h_df = vec![0.0; kernel.rows()];
            kernel.mul_vec(&df, &mut h_df);
            diff += dot(p_u, &dq) + TEXT_TERM_WEIGHT * dot(theta, &h_df);
            grad.pos_latent = p_u.to_vec();
            grad.neg_latent = p_u.iter().map(|v| -v).collect();
            grad.user_text = Some(h_df.iter().map(|v| TEXT_TERM_WEIGHT * v).collect());
            grad.kernel_left = Some(theta.iter().map(|v| TEXT_TERM_WEIGHT * v).collect());
            grad.kernel_right = Some(df);
        }
        ModelKind::Shared => {
            let prior = params.text_prior.as_ref().expect("shared prior");
            let kernel = params.kernel.as_ref().expect("shared kernel");
            let s_u = prior.sums.row(user);
            let scale = TEXT_TERM_WEIGHT * prior.scale(user);
            let mut h_s = vec![0.0; kernel.rows()];
            kernel.mul_vec(s_u, &mut h_s);
            let z: Vec<f64> = p_u.iter().zip(&h_s).map(|(p, h)| p + scale * h).collect();
            diff += dot(&z, &dq);
            grad.neg_latent = z.iter().map(|v| -v).collect();
            grad.pos_latent = z;
            grad.kernel_left = Some(dq.iter().map(|v| scale * v).collect());
            grad.kernel_right = Some(s_u.to_vec());
        }
    }
    grad.diff = diff;
    Ok(grad)
}

/// `σ(x) = 1 / (1 + e^{−x})`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow for large `|x|`.
pub fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn shrink_step(values: &mut [f64], grad: &[f64], coef: f64, lr: f64, reg: f64) {
    for (v, g) in values.iter_mut().zip(grad) {
        *v += lr * (coef * g - reg * *v);
    }
}

fn ensure_finite(values: &[f64], block: &'static str) -> Result<(), TrainError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TrainError::Diverged {
            iteration: 0,
            block,
        })
    }
}

/// One stochastic gradient ascent step on triple `t`. Returns the
/// pre-step `x̂_uij`.
///
/// Divergence errors carry `iteration: 0`; [`fit`] fills in the real one.
pub fn sgd_step(
    params: &mut Params,
    features: &FeatureMatrix,
    t: Triple,
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    let g = triple_gradient(params, features, t)?;
    if !g.diff.is_finite() {
        return Err(TrainError::Diverged {
            iteration: 0,
            block: "score difference",
        });
    }
    let coef = sigmoid(-g.diff);
    let (lr, reg_l, reg_t) = (cfg.learning_rate, cfg.reg_latent, cfg.reg_text);
    let Triple { user, pos, neg } = t;

    shrink_step(params.user_latent.row_mut(user), &g.user_latent, coef, lr, reg_l);
    shrink_step(params.item_latent.row_mut(pos), &g.pos_latent, coef, lr, reg_l);
    shrink_step(params.item_latent.row_mut(neg), &g.neg_latent, coef, lr, reg_l);
    shrink_step(&mut params.item_bias[pos..=pos], &[g.pos_bias], coef, lr, reg_l);
    shrink_step(&mut params.item_bias[neg..=neg], &[g.neg_bias], coef, lr, reg_l);

    if let (Some(theta), Some(grad)) = (params.user_text.as_mut(), &g.user_text) {
        shrink_step(theta.row_mut(user), grad, coef, lr, reg_t);
        ensure_finite(theta.row(user), "user text factors")?;
    }
    if let (Some(kernel), Some(left), Some(right)) =
        (params.kernel.as_mut(), &g.kernel_left, &g.kernel_right)
    {
        for (k, &l) in left.iter().enumerate() {
            for (h, &r) in kernel.row_mut(k).iter_mut().zip(right) {
                *h += lr * (coef * l * r - reg_t * *h);
            }
        }
        ensure_finite(kernel.as_slice(), "embedding kernel")?;
    }
    if let (Some(tb), Some(grad)) = (params.text_bias.as_mut(), &g.text_bias) {
        shrink_step(tb, grad, coef, lr, reg_t);
        ensure_finite(tb, "text bias")?;
    }
    ensure_finite(params.user_latent.row(user), "user latent factors")?;
    ensure_finite(params.item_latent.row(pos), "item latent factors")?;
    ensure_finite(params.item_latent.row(neg), "item latent factors")?;
    ensure_finite(&[params.item_bias[pos], params.item_bias[neg]], "item bias")?;
    Ok(g.diff)
}

fn sq_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum()
}

/// `Σ ln σ(x̂_uij) − λ_latent ‖Θ_latent‖² − λ_text ‖Θ_text‖²` over `triples`.
/// Diagnostic only; training never optimizes it in batch.
pub fn bpr_objective(
    params: &Params,
    features: &FeatureMatrix,
    triples: &[Triple],
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    let mut total = 0.0;
    if params.kind().is_trainable() {
        for &t in triples {
            total += ln_sigmoid(triple_gradient(params, features, t)?.diff);
        }
    }
    let latent = sq_norm(&params.item_bias)
        + sq_norm(params.user_latent.as_slice())
        + sq_norm(params.item_latent.as_slice());
    let text = params.user_text.as_ref().map_or(0.0, |m| sq_norm(m.as_slice()))
        + params.kernel.as_ref().map_or(0.0, |m| sq_norm(m.as_slice()))
        + params.text_bias.as_deref().map_or(0.0, sq_norm);
    Ok(total - cfg.reg_latent * latent - cfg.reg_text * text)
}

/// Outcome of [`fit`]: the parameters at the best validation evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub params: Params,
    /// `(iteration, sampled validation AUC)` per evaluation.
    pub history: Vec<(usize, f64)>,
    pub best_iteration: usize,
}

/// Trains a model of `kind` from scratch.
///
/// One iteration is `Σ_u |Train_u|` sampled steps. Every `eval_every`
/// iterations the sampled validation AUC is computed; the best parameters
/// are kept and training stops after `patience` evaluations without
/// improvement or at `max_iterations`.
pub fn fit(
    split: &Split,
    d: &Dataset,
    features: &FeatureMatrix,
    kind: ModelKind,
    dims: Dims,
    cfg: &TrainConfig,
    scope: UserTextScope,
) -> Result<FitResult, TrainError> {
    fit_with_observer(split, d, features, kind, dims, cfg, scope, |_, _, _| {})
}

/// [`fit`] with a callback invoked after each evaluation with
/// `(iteration, validation AUC, elapsed wall time)`.
#[allow(clippy::too_many_arguments)]
pub fn fit_with_observer<F>(
    split: &Split,
    d: &Dataset,
    features: &FeatureMatrix,
    kind: ModelKind,
    dims: Dims,
    cfg: &TrainConfig,
    scope: UserTextScope,
    mut observer: F,
) -> Result<FitResult, TrainError>
where
    F: FnMut(usize, f64, Duration),
{
    cfg.validate()?;
    let mut params = init_params(kind, dims, d, split, features, cfg.seed, scope)?;
    if !kind.is_trainable() {
        return Ok(FitResult {
            params,
            history: Vec::new(),
            best_iteration: 0,
        });
    }

    let sampler = TripleSampler::new(split, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut valid_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    valid_rng.set_stream(1);
    let validation = ValidationSample::draw(split, d, cfg.valid_negatives, &mut valid_rng);

    let steps = split.train_size();
    let started = Instant::now();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Params)> = None;
    let mut stale = 0;
    let mut last_iteration = 0;

    for iteration in 1..=cfg.max_iterations {
        last_iteration = iteration;
        for _ in 0..steps {
            let t = sampler.sample(&mut rng);
            sgd_step(&mut params, features, t, cfg).map_err(|e| match e {
                TrainError::Diverged { block, .. } => TrainError::Diverged { iteration, block },
                other => other,
            })?;
        }
        if iteration % cfg.eval_every != 0 {
            continue;
        }
        let auc = sampled_auc(&params.scorer(features)?, &validation);
        history.push((iteration, auc));
        observer(iteration, auc, started.elapsed());
        log::debug!("{kind} iteration {iteration}: validation auc {auc:.4}");
        match &best {
            Some((best_auc, _, _)) if auc <= *best_auc => {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
            _ => {
                best = Some((auc, iteration, params.clone()));
                stale = 0;
            }
        }
    }

    let (params, best_iteration) = match best {
        Some((_, it, p)) => (p, it),
        None => (params, last_iteration),
    };
    Ok(FitResult {
        params,
        history,
        best_iteration,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, HashMap};

    use super::*;
    use crate::model::Matrix;

    fn tiny() -> (Dataset, Split) {
        // user 0 misses only item 5; user 1 has every item
        let d = Dataset::from_parts(
            vec!["u".into(), "v".into()],
            (0..6).map(|i| format!("i{i}")).collect(),
            vec![vec![0, 1, 2, 3, 4], vec![0, 1, 2, 3, 4, 5]],
            BTreeMap::new(),
        )
        .unwrap();
        let s = Split::from_parts(
            &d,
            vec![vec![0], vec![0, 5]],
            vec![vec![1, 2], vec![1, 2]],
            vec![vec![3, 4], vec![3, 4]],
        )
        .unwrap();
        (d, s)
    }

    #[test]
    fn single_valid_triple() {
        let (d, s) = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            // user 1 has N_u = I and is never chosen
            assert_eq!(
                sample_triple(&s, &d, &mut rng).unwrap(),
                Triple { user: 0, pos: 0, neg: 5 }
            );
        }
    }

    #[test]
    fn unsatisfiable_sampling() {
        let d = Dataset::from_parts(
            vec!["u".into()],
            (0..5).map(|i| format!("i{i}")).collect(),
            vec![vec![0, 1, 2, 3, 4]],
            BTreeMap::new(),
        )
        .unwrap();
        let s = Split::from_parts(&d, vec![vec![0]], vec![vec![1, 2]], vec![vec![3, 4]]).unwrap();
        assert!(matches!(
            TripleSampler::new(&s, &d),
            Err(TrainError::UnsatisfiableSampling)
        ));
    }

    fn medium() -> (Dataset, Split) {
        let n = 40;
        let mut positives = Vec::new();
        for u in 0..10 {
            positives.push((0..7).map(|k| (u * 3 + k * 5) % n).collect::<Vec<_>>());
        }
        // every item needs at least one positive
        positives.push((0..n).collect());
        let m = positives.len();
        let d = Dataset::from_parts(
            (0..m).map(|u| format!("u{u}")).collect(),
            (0..n).map(|i| format!("i{i}")).collect(),
            positives,
            BTreeMap::new(),
        )
        .unwrap();
        let s = crate::corpus::split(&d, 3).unwrap();
        (d, s)
    }

    #[test]
    fn positive_frequencies_are_uniform() {
        // user 0 has exactly two training positives
        let d2 = Dataset::from_parts(
            vec!["a".into(), "b".into()],
            (0..8).map(|i| format!("i{i}")).collect(),
            vec![vec![0, 1, 2, 3, 4, 5], vec![2, 3, 4, 5, 6, 7]],
            BTreeMap::new(),
        )
        .unwrap();
        let s2 = Split::from_parts(
            &d2,
            vec![vec![0, 1], vec![2, 3]],
            vec![vec![2, 3], vec![4, 5]],
            vec![vec![4, 5], vec![6, 7]],
        )
        .unwrap();
        let sampler = TripleSampler::new(&s2, &d2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts: HashMap<usize, usize> = HashMap::new();
        let mut user0 = 0;
        for _ in 0..10_000 {
            let t = sampler.sample(&mut rng);
            assert!(s2.train(t.user).contains(&t.pos));
            assert!(!d2.is_positive(t.user, t.neg));
            if t.user == 0 {
                user0 += 1;
                *counts.entry(t.pos).or_default() += 1;
            }
        }
        for item in [0, 1] {
            let freq = counts[&item] as f64 / user0 as f64;
            assert!((freq - 0.5).abs() < 0.02, "{freq}");
        }
    }

    #[test]
    fn membership_over_many_samples() {
        let (d, s) = medium();
        let sampler = TripleSampler::new(&s, &d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let t = sampler.sample(&mut rng);
            assert!(s.train(t.user).binary_search(&t.pos).is_ok());
            assert!(!d.is_positive(t.user, t.neg));
            assert_ne!(t.pos, t.neg);
        }
    }

    #[test]
    fn first_step_from_zero() {
        let dims = Dims::new(2, 2, 3);
        for kind in [ModelKind::Mf, ModelKind::Diff, ModelKind::Shared] {
            let mut p = Params::zeros(kind, dims, 1, 3);
            if let Some(prior) = p.text_prior.as_mut() {
                prior.sizes = vec![1];
                prior.sums.row_mut(0).copy_from_slice(&[0.3, 0.1, 0.2]);
            }
            let f = FeatureMatrix::from_rows(3, vec![0.3, 0.1, 0.2, -0.4, 0.5, 0.9, 0.0, 0.0, 0.0]);
            let cfg = TrainConfig {
                learning_rate: 0.1,
                reg_latent: 0.0,
                reg_text: 0.0,
                ..TrainConfig::default()
            };
            let x = sgd_step(&mut p, &f, Triple { user: 0, pos: 0, neg: 1 }, &cfg).unwrap();
            assert_eq!(x, 0.0);
            assert_eq!(p.item_bias, [0.05, -0.05, 0.0]);
            assert!(p.user_latent.as_slice().iter().all(|&v| v == 0.0));
            assert!(p.item_latent.as_slice().iter().all(|&v| v == 0.0));
            if let Some(tb) = &p.text_bias {
                let expected = [0.05 * 0.7, 0.05 * -0.4, 0.05 * -0.7];
                for (a, b) in tb.iter().zip(expected) {
                    assert!((a - b).abs() < 1e-15);
                }
            }
            if let Some(h) = &p.kernel {
                assert!(h.as_slice().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn untouched_entries_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dims = Dims::new(3, 3, 4);
        for kind in [ModelKind::Mf, ModelKind::Diff, ModelKind::Shared] {
            let mut p = Params::zeros(kind, dims, 3, 5);
            let mut fill = |s: &mut [f64]| s.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
            fill(&mut p.item_bias);
            fill(p.user_latent.as_mut_slice());
            fill(p.item_latent.as_mut_slice());
            if let Some(t) = p.user_text.as_mut() {
                fill(t.as_mut_slice());
            }
            if let Some(h) = p.kernel.as_mut() {
                fill(h.as_mut_slice());
            }
            if let Some(prior) = p.text_prior.as_mut() {
                fill(prior.sums.as_mut_slice());
                prior.sizes = vec![2, 3, 1];
            }
            let f = FeatureMatrix::from_rows(4, (0..20).map(|k| (k as f64 * 0.37).cos()).collect());
            let before = p.clone();
            let t = Triple { user: 1, pos: 2, neg: 4 };
            sgd_step(&mut p, &f, t, &TrainConfig::for_kind(kind)).unwrap();
            for u in [0, 2] {
                assert_eq!(p.user_latent.row(u), before.user_latent.row(u));
                if let (Some(a), Some(b)) = (&p.user_text, &before.user_text) {
                    assert_eq!(a.row(u), b.row(u));
                }
            }
            for i in [0, 1, 3] {
                assert_eq!(p.item_latent.row(i), before.item_latent.row(i));
                assert_eq!(p.item_bias[i].to_bits(), before.item_bias[i].to_bits());
            }
            assert_eq!(p.text_prior, before.text_prior);
            assert_ne!(p.user_latent.row(1), before.user_latent.row(1));
        }
    }

    #[test]
    fn zero_gradient_block_is_fixed_without_penalty() {
        // θ_u = 0 makes ∂H = 0 for the diff model; with λ = 0 H stays put
        let mut p = Params::zeros(ModelKind::Diff, Dims::new(2, 2, 2), 1, 2);
        p.kernel = Some(Matrix::from_vec(2, 2, vec![0.1, -0.2, 0.3, 0.4]));
        p.user_latent.row_mut(0).copy_from_slice(&[0.2, 0.1]);
        let f = FeatureMatrix::from_rows(2, vec![1.0, 0.0, 0.0, 1.0]);
        let cfg = TrainConfig {
            learning_rate: 0.5,
            reg_latent: 0.0,
            reg_text: 0.0,
            ..TrainConfig::default()
        };
        let h_before = p.kernel.clone();
        sgd_step(&mut p, &f, Triple { user: 0, pos: 0, neg: 1 }, &cfg).unwrap();
        assert_eq!(p.kernel, h_before);
    }

    #[test]
    fn divergence_is_reported() {
        let mut p = Params::zeros(ModelKind::Mf, Dims::new(1, 1, 1), 1, 2);
        p.user_latent.row_mut(0)[0] = f64::MAX;
        p.item_latent.row_mut(0)[0] = f64::MAX;
        let f = FeatureMatrix::from_rows(1, vec![0.0, 0.0]);
        let err = sgd_step(&mut p, &f, Triple { user: 0, pos: 0, neg: 1 }, &TrainConfig::default());
        assert!(matches!(err, Err(TrainError::Diverged { .. })));
    }

    #[test]
    fn objective_examples() {
        let p = Params::zeros(ModelKind::Mf, Dims::new(2, 2, 1), 1, 2);
        let f = FeatureMatrix::from_rows(1, vec![0.0, 0.0]);
        let cfg = TrainConfig {
            reg_latent: 0.0,
            reg_text: 0.0,
            ..TrainConfig::default()
        };
        assert_eq!(bpr_objective(&p, &f, &[], &cfg).unwrap(), 0.0);
        let one = bpr_objective(&p, &f, &[Triple { user: 0, pos: 0, neg: 1 }], &cfg).unwrap();
        assert!((one - 0.5f64.ln()).abs() < 1e-15);
        assert!((one + std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_per_triple_summation() {
        let (d, s) = medium();
        let f = FeatureMatrix::from_rows(3, (0..120).map(|k| (k as f64 * 0.11).sin()).collect());
        let cfg = TrainConfig::default();
        let p = init_params(ModelKind::Diff, Dims::new(3, 3, 3), &d, &s, &f, 4, UserTextScope::Training)
            .unwrap();
        let sampler = TripleSampler::new(&s, &d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let triples: Vec<Triple> = (0..30).map(|_| sampler.sample(&mut rng)).collect();
        let got = bpr_objective(&p, &f, &triples, &cfg).unwrap();

        let mut expected = 0.0;
        for t in &triples {
            let x = p.predict(&f, t.user, t.pos).unwrap() - p.predict(&f, t.user, t.neg).unwrap();
            expected += (1.0 / (1.0 + (-x).exp())).ln();
        }
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        expected -= cfg.reg_latent
            * (sq(&p.item_bias) + sq(p.user_latent.as_slice()) + sq(p.item_latent.as_slice()));
        expected -= cfg.reg_text
            * (sq(p.user_text.as_ref().unwrap().as_slice())
                + sq(p.kernel.as_ref().unwrap().as_slice())
                + sq(p.text_bias.as_ref().unwrap()));
        assert!((got - expected).abs() <= 1e-10);
    }

    #[test]
    fn ln_sigmoid_is_stable() {
        assert!((ln_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-16);
        assert!(ln_sigmoid(800.0) == 0.0 || ln_sigmoid(800.0) > -1e-300);
        assert!((ln_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fit_is_deterministic() {
        let (d, s) = medium();
        let f = FeatureMatrix::from_rows(3, (0..120).map(|k| (k as f64 * 0.3).cos()).collect());
        let cfg = TrainConfig {
            learning_rate: 0.05,
            reg_latent: 0.01,
            reg_text: 0.01,
            max_iterations: 8,
            patience: 3,
            seed: 5,
            ..TrainConfig::default()
        };
        for kind in ModelKind::ALL {
            let a = fit(&s, &d, &f, kind, Dims::new(3, 3, 3), &cfg, UserTextScope::Training).unwrap();
            let b = fit(&s, &d, &f, kind, Dims::new(3, 3, 3), &cfg, UserTextScope::Training).unwrap();
            assert_eq!(a, b);
            if kind.is_trainable() {
                let best_auc = a.history.iter().find(|(it, _)| *it == a.best_iteration).unwrap().1;
                assert!(a.history.iter().all(|&(_, auc)| auc <= best_auc));
            } else {
                assert!(a.history.is_empty());
            }
        }
    }

    #[test]
    fn frozen_run_stops_at_second_evaluation() {
        let (d, s) = medium();
        let f = FeatureMatrix::from_rows(1, vec![0.0; 40]);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            patience: 1,
            max_iterations: 50,
            ..TrainConfig::for_kind(ModelKind::Mf)
        };
        let r = fit(&s, &d, &f, ModelKind::Mf, Dims::new(2, 2, 1), &cfg, UserTextScope::Training).unwrap();
        assert_eq!(r.history.len(), 2);
        assert_eq!(r.history[1].0, 2);
        assert_eq!(r.best_iteration, 1);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (d, s) = medium();
        let f = FeatureMatrix::from_rows(1, vec![0.0; 40]);
        let cfg = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            fit(&s, &d, &f, ModelKind::Mf, Dims::new(2, 2, 1), &cfg, UserTextScope::Training),
            Err(TrainError::InvalidConfig(_))
        ));
    }
}
