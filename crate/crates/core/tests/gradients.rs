//! Analytic gradients against central finite differences.

mod common;

use common::gradcheck::{check, TOL};
use common::random_problem;
use h2sgnn_core::model::{forward, ModelParams, Variant};
use h2sgnn_core::train::backward;
use h2sgnn_core::FilterBasis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BASES: [FilterBasis; 4] = [
    FilterBasis::Monomial,
    FilterBasis::Legendre,
    FilterBasis::Jacobi { a: 1.0, b: 1.0 },
    FilterBasis::Jacobi { a: 0.5, b: -0.4 },
];

#[test]
fn all_parameters_match_finite_differences() {
    for basis in BASES {
        for variant in [Variant::Full, Variant::LocalOnly, Variant::GlobalOnly] {
            for seed in 0..3 {
                let p = random_problem(seed, 12, 2, 3, basis, variant);
                for (name, rel) in check(&p, false) {
                    assert!(rel <= TOL, "{basis} {variant} seed {seed}: {name} rel err {rel:e}");
                }
            }
        }
    }
}

#[test]
fn gradients_hold_with_dropout_masks() {
    let p = random_problem(5, 12, 2, 3, FilterBasis::Legendre, Variant::Full);
    for (name, rel) in check(&p, true) {
        assert!(rel <= TOL, "{name} rel err {rel:e}");
    }
}

#[test]
fn materialized_global_operator_gives_same_gradients() {
    let mut p = random_problem(8, 12, 3, 4, FilterBasis::Monomial, Variant::GlobalOnly);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let lazy = forward(&p.input, &p.params, &p.config, false, &mut rng).unwrap();
    let (_, g_lazy) = backward(&lazy, &p.input, &p.labels, &p.mask, &p.params, &p.config).unwrap();
    p.config.materialize_global = true;
    let mat = forward(&p.input, &p.params, &p.config, false, &mut rng).unwrap();
    assert!(mat.z.sub(&lazy.z).unwrap().max_abs() < 1e-12);
    let (_, g_mat) = backward(&mat, &p.input, &p.labels, &p.mask, &p.params, &p.config).unwrap();
    for ((n, _, a), (_, _, b)) in g_lazy.tensors().into_iter().zip(g_mat.tensors()) {
        let d = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d < 1e-10, "{n}: {d:e}");
    }
}

#[test]
fn single_coefficient_chain_rule() {
    // R = 1, K = 0, one linear layer: logits = α·X W V + b, so
    // ∂L/∂α = <X W V, ∂L/∂logits>.
    let mut p = random_problem(11, 6, 1, 0, FilterBasis::Monomial, Variant::LocalOnly);
    p.config.num_mlp_layers = 1;
    let mut g = common::rng(3);
    let mut params = ModelParams::init(&p.config, 5, 3, &mut g);
    params.alpha.set(0, 0, 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trace = forward(&p.input, &params, &p.config, false, &mut rng).unwrap();
    let (_, grads) = backward(&trace, &p.input, &p.labels, &p.mask, &params, &p.config).unwrap();

    let xwv = p
        .input
        .features
        .matmul(&params.w)
        .unwrap()
        .matmul(&params.mlp[0].weight)
        .unwrap();
    let (_, d_logits) =
        h2sgnn_core::model::cross_entropy_with_grad(&trace.logits, &p.labels, &p.mask).unwrap();
    let expect = xwv.dot(&d_logits).unwrap();
    assert!((grads.alpha.get(0, 0) - expect).abs() < 1e-14);
}

#[test]
fn zero_upstream_gives_zero_coefficient_gradients() {
    let mut p = random_problem(2, 12, 2, 3, FilterBasis::Monomial, Variant::Full);
    let last = p.params.mlp.len() - 1;
    p.params.mlp[last].weight.data_mut().fill(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trace = forward(&p.input, &p.params, &p.config, false, &mut rng).unwrap();
    let (_, g) = backward(&trace, &p.input, &p.labels, &p.mask, &p.params, &p.config).unwrap();
    assert!(g.alpha.data().iter().all(|&v| v == 0.0));
    assert!(g.gamma.iter().all(|&v| v == 0.0));
    assert!(g.beta.iter().all(|&v| v == 0.0));
}

#[test]
fn backward_needs_cached_trace() {
    let p = random_problem(2, 12, 2, 3, FilterBasis::Monomial, Variant::Full);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trace = forward(&p.input, &p.params, &p.config, false, &mut rng)
        .unwrap()
        .without_cache();
    let err = backward(&trace, &p.input, &p.labels, &p.mask, &p.params, &p.config).unwrap_err();
    assert!(matches!(err, h2sgnn_core::Error::State(_)));
}

#[test]
fn ablation_variants_leave_unused_gradients_zero() {
    let p = random_problem(4, 12, 2, 3, FilterBasis::Legendre, Variant::GlobalOnly);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let t = forward(&p.input, &p.params, &p.config, false, &mut rng).unwrap();
    let (_, g) = backward(&t, &p.input, &p.labels, &p.mask, &p.params, &p.config).unwrap();
    assert!(g.alpha.data().iter().all(|&v| v == 0.0));

    let p = random_problem(4, 12, 2, 3, FilterBasis::Legendre, Variant::LocalOnly);
    let t = forward(&p.input, &p.params, &p.config, false, &mut rng).unwrap();
    let (_, g) = backward(&t, &p.input, &p.labels, &p.mask, &p.params, &p.config).unwrap();
    assert!(g.beta.iter().chain(&g.gamma).all(|&v| v == 0.0));
}
