#![allow(dead_code)]

pub mod gradcheck;
pub mod oracles;

use h2sgnn_core::hetgraph::{MetaPath, MetaPathSubgraph};
use h2sgnn_core::model::{forward, LocalBases, ModelConfig, ModelInput, ModelParams, Variant};
use h2sgnn_core::sparse::{sym_normalize, CsrMatrix, DenseMatrix};
use h2sgnn_core::FilterBasis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random symmetric non-negative matrix with zero diagonal.
pub fn random_symmetric(n: usize, density: f64, rng: &mut impl Rng) -> CsrMatrix {
    let mut trips = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                let w = rng.random_range(0.5..2.0);
                trips.push((i, j, w));
                trips.push((j, i, w));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, trips).unwrap()
}

pub fn random_normalized(n: usize, density: f64, rng: &mut impl Rng) -> CsrMatrix {
    sym_normalize(&random_symmetric(n, density, rng)).unwrap()
}

/// Random sparse, possibly asymmetric matrix with signed entries.
pub fn random_general(n: usize, density: f64, rng: &mut impl Rng) -> CsrMatrix {
    let mut trips = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng.random::<f64>() < density {
                trips.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, trips).unwrap()
}

pub fn random_dense(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn subgraph(name: &str, adj: CsrMatrix) -> MetaPathSubgraph {
    MetaPathSubgraph::from_normalized(MetaPath::new(name, vec![]), adj)
}

pub struct Problem {
    pub input: ModelInput,
    pub config: ModelConfig,
    pub params: ModelParams,
    pub labels: Vec<usize>,
    pub mask: Vec<usize>,
}

/// Small random model problem; parameters are perturbed away from the
/// structured initialization so every tensor gets a generic gradient.
pub fn random_problem(
    seed: u64,
    n: usize,
    r: usize,
    k: usize,
    basis: FilterBasis,
    variant: Variant,
) -> Problem {
    // Finite differences are meaningless across a ReLU kink, so draws with
    // a hidden pre-activation near zero are replaced by the next sub-seed.
    for attempt in 0.. {
        let p = draw_problem(seed * 1000 + attempt, n, r, k, basis, variant);
        if min_hidden_preactivation(&p) > KINK_MARGIN {
            return p;
        }
    }
    unreachable!()
}

pub const KINK_MARGIN: f64 = 2e-3;

pub fn min_hidden_preactivation(p: &Problem) -> f64 {
    let mut out = f64::INFINITY;
    for train_mode in [false, true] {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let t = forward(&p.input, &p.params, &p.config, train_mode, &mut rng).unwrap();
        let cache = t.cache.unwrap();
        let hidden = &cache.layer_outputs[..cache.layer_outputs.len() - 1];
        for m in hidden {
            out = out.min(m.data().iter().fold(f64::INFINITY, |a, v| a.min(v.abs())));
        }
    }
    out
}

fn draw_problem(
    seed: u64,
    n: usize,
    r: usize,
    k: usize,
    basis: FilterBasis,
    variant: Variant,
) -> Problem {
    let mut g = rng(seed);
    let (d, h, classes) = (5, 4, 3);
    let subgraphs = (0..r)
        .map(|i| subgraph(&format!("m{i}"), random_normalized(n, 0.35, &mut g)))
        .collect();
    let features = random_dense(n, d, &mut g);
    let input = ModelInput::new(subgraphs, features).unwrap();
    let config = ModelConfig {
        order: k,
        metapaths: (0..r).map(|i| format!("m{i}")).collect(),
        local_basis: LocalBases::Shared(basis),
        global_basis: basis,
        hidden_dim: h,
        num_mlp_layers: 2,
        dropout: 0.3,
        variant,
        materialize_global: false,
    };
    let mut params = ModelParams::init(&config, d, classes, &mut g);
    for (_, _, t) in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += g.random_range(-0.3..0.3);
        }
    }
    let labels = (0..n).map(|_| g.random_range(0..classes)).collect();
    let mask = (0..n).filter(|i| i % 3 != 2).collect();
    Problem {
        input,
        config,
        params,
        labels,
        mask,
    }
}
