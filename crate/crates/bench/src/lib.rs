//! Shared fixtures for the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankforge_core::dataset::{generate_synthetic, join};
use rankforge_core::evalrank::{LabelMap, ScoredRow};
use rankforge_core::{FeatureMatrix, JoinedTable, Preprocessor, SyntheticConfig};

pub fn synthetic_table(n_queries: usize, seed: u64) -> JoinedTable {
    let cfg = SyntheticConfig {
        n_queries,
        seed,
        ..Default::default()
    };
    let (imps, prods) = generate_synthetic(&cfg).expect("valid generator config");
    join(&imps, &prods).expect("generated tables join")
}

pub fn synthetic_matrix(n_queries: usize, seed: u64) -> FeatureMatrix {
    let table = synthetic_table(n_queries, seed);
    Preprocessor::fit(&table)
        .and_then(|p| p.transform(&table))
        .expect("generated table encodes")
}

/// Random probabilities over six-row queries, one click per query.
pub fn scored_queries(n_queries: usize, seed: u64) -> (Vec<ScoredRow>, LabelMap, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_queries * 6);
    let mut labels = LabelMap::new();
    let mut y = Vec::with_capacity(n_queries * 6);
    for q in 0..n_queries {
        let clicked = rng.random_range(0..6);
        for i in 0..6 {
            let (query_id, product_id) = (format!("q{q}"), format!("p{i}"));
            let label = u8::from(i == clicked);
            labels.insert((query_id.clone(), product_id.clone()), label);
            y.push(label);
            rows.push(ScoredRow {
                query_id,
                product_id,
                probability: rng.random(),
            });
        }
    }
    (rows, labels, y)
}

/// A categorical column with `cardinality` levels, labels and a shuffled
/// permutation.
pub fn categorical_column(n: usize, cardinality: i64, seed: u64) -> (Vec<i64>, Vec<u8>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let col = (0..n).map(|_| rng.random_range(0..cardinality)).collect();
    let y = (0..n).map(|_| u8::from(rng.random_bool(1.0 / 6.0))).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
    (col, y, perm)
}
