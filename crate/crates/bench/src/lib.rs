//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tbpr::model::UserTextPrior;
use tbpr::{Dims, FeatureMatrix, Matrix, ModelKind, Params, Triple};

/// Small random parameters at the published shape, with a cached user
/// text prior for the shared model.
pub fn random_model(kind: ModelKind, users: usize, items: usize, dims: Dims, seed: u64) -> (Params, FeatureMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut small = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-0.01..0.01)).collect() };
    let mut p = Params::zeros(kind, dims, users, items);
    p.item_bias = small(items);
    p.user_latent = Matrix::from_vec(users, dims.latent, small(users * dims.latent));
    p.item_latent = Matrix::from_vec(items, dims.latent, small(items * dims.latent));
    if p.user_text.is_some() {
        p.user_text = Some(Matrix::from_vec(users, dims.text, small(users * dims.text)));
    }
    if p.kernel.is_some() {
        p.kernel = Some(Matrix::from_vec(dims.text, dims.feature, small(dims.text * dims.feature)));
    }
    if p.text_bias.is_some() {
        p.text_bias = Some(small(dims.feature));
    }
    if p.text_prior.is_some() {
        p.text_prior = Some(UserTextPrior {
            sums: Matrix::from_vec(users, dims.feature, small(users * dims.feature)),
            sizes: vec![5; users],
        });
    }
    let features = FeatureMatrix::from_rows(dims.feature, small(items * dims.feature));
    (p, features)
}

/// Uniform triples with `pos != neg`.
pub fn random_triples(users: usize, items: usize, count: usize, seed: u64) -> Vec<Triple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let pos = rng.gen_range(0..items);
            Triple {
                user: rng.gen_range(0..users),
                pos,
                neg: (pos + rng.gen_range(1..items)) % items,
            }
        })
        .collect()
}
