use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::filters::backpropagate_basis;
use crate::model::{cross_entropy_with_grad, ForwardTrace, ModelConfig, ModelInput, ModelParams};
use crate::sparse::{spmm, DenseMatrix};

/// Loss gradient with respect to every parameter, shaped like [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub ModelParams);

impl Deref for Gradients {
    type Target = ModelParams;

    fn deref(&self) -> &ModelParams {
        &self.0
    }
}

impl DerefMut for Gradients {
    fn deref_mut(&mut self) -> &mut ModelParams {
        &mut self.0
    }
}

/// Reverse-mode gradient of the masked mean cross-entropy through the MLP,
/// both filtering branches and the feature map. Adjacencies and features
/// are constants. Returns the loss alongside the gradients.
pub fn backward(
    trace: &ForwardTrace,
    input: &ModelInput,
    labels: &[usize],
    mask: &[usize],
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<(f64, Gradients)> {
    let cache = trace
        .cache
        .as_ref()
        .ok_or_else(|| Error::State("forward trace was produced without caches".into()))?;
    let mut grads = params.zeros_like();

    let (loss, mut upstream) = cross_entropy_with_grad(&trace.logits, labels, mask)?;

    // MLP, last layer first.
    for l in (0..params.mlp.len()).rev() {
        let layer = &params.mlp[l];
        let layer_in = &cache.layer_inputs[l];
        grads.mlp[l].weight = layer_in.t_matmul(&upstream)?;
        let g_bias = &mut grads.mlp[l].bias;
        for row in upstream.rows() {
            for (g, v) in g_bias.iter_mut().zip(row) {
                *g += v;
            }
        }
        let mut g_in = upstream.matmul_t(&layer.weight)?;
        if let Some(mask) = &cache.dropout_masks[l] {
            g_in.data_mut().iter_mut().zip(mask).for_each(|(g, s)| *g *= s);
        }
        if l > 0 {
            let pre = &cache.layer_outputs[l - 1];
            g_in.data_mut()
                .iter_mut()
                .zip(pre.data())
                .for_each(|(g, &p)| {
                    if p <= 0.0 {
                        *g = 0.0
                    }
                });
        }
        upstream = g_in;
    }
    let d_z = upstream;

    let mut d_mapped = DenseMatrix::zeros(cache.mapped.n_rows(), cache.mapped.n_cols());

    if config.variant.uses_local() {
        for (i, stack) in cache.local_stacks.iter().enumerate() {
            let grads_row = stack.project(&d_z)?;
            grads.alpha.row_mut(i).copy_from_slice(&grads_row);
            let adj_t = &input.adjoints[i];
            let d = backpropagate_basis(
                config.local_basis.get(i),
                stack,
                params.alpha.row(i),
                &d_z,
                |u, _| spmm(adj_t, u),
            )?;
            d_mapped.axpy(1.0, &d)?;
        }
    }

    if config.variant.uses_global() {
        let stack = cache
            .global_stack
            .as_ref()
            .ok_or_else(|| Error::State("global branch missing from the trace".into()))?;
        grads.gamma = stack.project(&d_z)?;
        let d_beta = &mut grads.beta;
        let beta = &params.beta;
        let adjoints = &input.adjoints;
        let d = backpropagate_basis(config.global_basis, stack, &params.gamma, &d_z, |u, t_prev| {
            let mut out = DenseMatrix::zeros(u.n_rows(), u.n_cols());
            for (i, adj_t) in adjoints.iter().enumerate() {
                let v = spmm(adj_t, u)?;
                d_beta[i] += v.dot(t_prev)?;
                out.axpy(beta[i], &v)?;
            }
            Ok(out)
        })?;
        d_mapped.axpy(1.0, &d)?;
    }

    grads.w = input.features.t_matmul(&d_mapped)?;
    Ok((loss, Gradients(grads)))
}
