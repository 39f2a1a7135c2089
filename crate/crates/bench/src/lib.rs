//! Input generators shared by the benchmarks.

use h2sgnn_core::sparse::{sym_normalize, CsrMatrix, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random symmetric adjacency with roughly `avg_degree` neighbours per node,
/// symmetric-normalized.
pub fn random_normalized_adjacency(n: usize, avg_degree: usize, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trips = Vec::with_capacity(n * avg_degree);
    for i in 0..n {
        for _ in 0..avg_degree / 2 {
            let j = rng.random_range(0..n);
            if i != j {
                trips.push((i, j, 1.0));
                trips.push((j, i, 1.0));
            }
        }
    }
    let a = CsrMatrix::from_triplets(n, n, trips).expect("in-bounds triplets");
    sym_normalize(&a.binarized()).expect("non-negative")
}

pub fn random_dense(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}
