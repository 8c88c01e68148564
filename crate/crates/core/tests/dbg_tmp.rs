use rand::{Rng, SeedableRng};
use windcast_core::features::*;
#[test]
fn dbg() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let x: Vec<Vec<f64>> = (0..100).map(|_| (0..3).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
    let y: Vec<f64> = (0..100).map(|_| rng.random_range(-5.0..5.0)).collect();
    for boot in [false, true] {
    let cfg = ForestConfig { n_trees: 1, max_depth: 5, min_samples_split: 20, max_features: MaxFeatures::All, bootstrap: boot };
    let xp: Vec<Vec<f64>> = x.iter().map(|r| vec![r[2], r[1], r[0]]).collect();
    let a = fit_forest(&x, &y, &cfg, 1).unwrap();
    let b = fit_forest(&xp, &y, &cfg, 1).unwrap();
    println!("{:?}\n{:?}", a.per_feature_gain, b.per_feature_gain);
    println!("{:?}\n{:?}", &a.trees[0].nodes[..1], &b.trees[0].nodes[..1]);
    }
}
