//! Central finite-difference check of [`backward`].

use h2sgnn_core::model::{cross_entropy_loss, forward, ModelParams};
use h2sgnn_core::train::backward;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Problem;

pub const EPS: f64 = 1e-4;
pub const TOL: f64 = 1e-4;

pub fn loss_at(p: &Problem, params: &ModelParams, train_mode: bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let t = forward(&p.input, params, &p.config, train_mode, &mut rng).unwrap();
    cross_entropy_loss(&t.logits, &p.labels, &p.mask).unwrap()
}

/// Per-tensor relative error `‖fd − g‖ / max(‖fd‖, ‖g‖)`.
pub fn check(p: &Problem, train_mode: bool) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trace = forward(&p.input, &p.params, &p.config, train_mode, &mut rng).unwrap();
    let (_, grads) = backward(&trace, &p.input, &p.labels, &p.mask, &p.params, &p.config).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, _, t)| (n, t.to_vec()))
        .collect();
    let mut out = Vec::new();
    for (ti, (name, g)) in analytic.iter().enumerate() {
        let mut fd = vec![0.0; g.len()];
        for (j, slot) in fd.iter_mut().enumerate() {
            let mut plus = p.params.clone();
            plus.tensors_mut()[ti].2[j] += EPS;
            let mut minus = p.params.clone();
            minus.tensors_mut()[ti].2[j] -= EPS;
            *slot = (loss_at(p, &plus, train_mode) - loss_at(p, &minus, train_mode)) / (2.0 * EPS);
        }
        let diff: f64 = fd.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
        let rel = if scale == 0.0 { 0.0 } else { diff / scale };
        out.push((name.clone(), rel));
    }
    out
}

