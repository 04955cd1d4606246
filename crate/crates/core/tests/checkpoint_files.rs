use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tbpr::synthetic::{planted_preferences, PlantedConfig};
use tbpr::*;

#[test]
fn reloaded_diff_model_scores_identically() {
    let planted = planted_preferences(&PlantedConfig {
        users: 40,
        items: 120,
        seed: 3,
        ..PlantedConfig::default()
    });
    let d = &planted.dataset;
    let f = planted.text_features();
    let s = split(d, 3).unwrap();
    let cfg = TrainConfig {
        max_iterations: 5,
        ..TrainConfig::for_kind(ModelKind::Diff)
    };
    let params = fit(&s, d, &f, ModelKind::Diff, Dims::new(6, 4, f.dim()), &cfg, UserTextScope::Training)
        .unwrap()
        .params;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("diff.ckpt");
    save_model(&params, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, params);

    let before = params.scorer(&f).unwrap();
    let after = loaded.scorer(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let u = rng.gen_range(0..d.user_count());
        let i = rng.gen_range(0..d.item_count());
        assert_eq!(
            before.item_score(u, i).to_bits(),
            after.item_score(u, i).to_bits()
        );
        assert_eq!(
            params.predict(&f, u, i).unwrap().to_bits(),
            loaded.predict(&f, u, i).unwrap().to_bits()
        );
    }
}

#[test]
fn every_kind_survives_a_file_roundtrip() {
    let planted = planted_preferences(&PlantedConfig {
        users: 20,
        items: 60,
        dim: 4,
        ..PlantedConfig::default()
    });
    let d = &planted.dataset;
    let f = planted.text_features();
    let s = split(d, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for kind in ModelKind::ALL {
        let params = init_params(kind, Dims::new(3, 3, 4), d, &s, &f, 9, UserTextScope::Training).unwrap();
        let path = dir.path().join(format!("{kind}.ckpt"));
        save_model(&params, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), params);
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_model(dir.path().join("absent.ckpt")),
        Err(CheckpointError::Io(_))
    ));
}
