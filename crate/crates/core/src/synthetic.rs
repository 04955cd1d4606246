//! Seeded generators with planted preferences, for tests, benchmarks and
//! sanity runs of the full pipeline.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Dataset;
use crate::model::{dot, Matrix};
use crate::textfeat::FeatureMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub users: usize,
    /// Catalog size before items without feedback are dropped.
    pub items: usize,
    /// Dimension of the planted user/item vectors.
    pub dim: usize,
    pub positives_per_user: usize,
    /// Scale of the per-user deviation from the population preference
    /// direction. Zero makes every user share one taste.
    pub personal_weight: f64,
    /// Softmax temperature when drawing positives; smaller is greedier.
    pub temperature: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            users: 200,
            items: 500,
            dim: 16,
            positives_per_user: 7,
            personal_weight: 0.5,
            temperature: 0.1,
            seed: 0,
        }
    }
}

/// A planted dataset. `item_vectors` has one row per surviving item.
#[derive(Clone, Debug)]
pub struct Planted {
    pub dataset: Dataset,
    pub user_vectors: Matrix,
    pub item_vectors: Matrix,
    pub dropped_items: usize,
}

fn unit_vector<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Users prefer items by `w_uᵀ v_i` with `w_u = c + personal_weight · e_u`,
/// where `c` is a shared direction and `e_u` a personal one. Each user draws
/// `positives_per_user` distinct items by Gumbel-top-k sampling on
/// `score / temperature`. Items nobody picked are dropped and the rest keep
/// their relative order.
pub fn planted_preferences(cfg: &PlantedConfig) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let items: Vec<Vec<f64>> = (0..cfg.items).map(|_| unit_vector(cfg.dim, &mut rng)).collect();
    let common = unit_vector(cfg.dim, &mut rng);
    let users: Vec<Vec<f64>> = (0..cfg.users)
        .map(|_| {
            let personal = unit_vector(cfg.dim, &mut rng);
            common
                .iter()
                .zip(&personal)
                .map(|(c, p)| c + cfg.personal_weight * p)
                .collect()
        })
        .collect();

    let k = cfg.positives_per_user.min(cfg.items);
    let mut chosen: Vec<Vec<usize>> = Vec::with_capacity(cfg.users);
    for w in &users {
        let mut keyed: Vec<(f64, usize)> = items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let gumbel = -(-u.ln()).ln();
                (dot(w, v) / cfg.temperature + gumbel, i)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        chosen.push(keyed[..k].iter().map(|&(_, i)| i).collect());
    }

    let mut used = vec![false; cfg.items];
    chosen.iter().flatten().for_each(|&i| used[i] = true);
    let mut remap = vec![usize::MAX; cfg.items];
    let mut kept = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            remap[i] = kept.len();
            kept.push(i);
        }
    }
    let positives = chosen
        .iter()
        .map(|set| set.iter().map(|&i| remap[i]).collect())
        .collect();
    let dataset = Dataset::from_parts(
        (0..cfg.users).map(|u| format!("u{u}")).collect(),
        kept.iter().map(|i| format!("i{i}")).collect(),
        positives,
        BTreeMap::new(),
    )
    .expect("generated dataset is consistent");

    let item_vectors = Matrix::from_vec(
        kept.len(),
        cfg.dim,
        kept.iter().flat_map(|&i| items[i].iter().copied()).collect(),
    );
    let user_vectors = Matrix::from_vec(cfg.users, cfg.dim, users.into_iter().flatten().collect());
    Planted {
        dataset,
        user_vectors,
        item_vectors,
        dropped_items: cfg.items - kept.len(),
    }
}

impl Planted {
    /// The planted item vectors used directly as text features.
    pub fn text_features(&self) -> FeatureMatrix {
        FeatureMatrix::from_rows(self.item_vectors.cols(), self.item_vectors.as_slice().to_vec())
    }
}
