//! Forward computation: local per-meta-path filtering, global hybrid
//! filtering over `Σ β_i Â_i`, an MLP head and the cross-entropy loss.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{propagate_basis, BasisStack, FilterBasis};
use crate::hetgraph::MetaPathSubgraph;
use crate::sparse::{add_scaled, spmm, CsrMatrix, DenseMatrix, LinearOperator};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Full,
    LocalOnly,
    GlobalOnly,
}

impl Variant {
    pub fn uses_local(self) -> bool {
        matches!(self, Variant::Full | Variant::LocalOnly)
    }

    pub fn uses_global(self) -> bool {
        matches!(self, Variant::Full | Variant::GlobalOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::LocalOnly => "local_only",
            Variant::GlobalOnly => "global_only",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "full" => Ok(Variant::Full),
            "local_only" | "local" | "l" => Ok(Variant::LocalOnly),
            "global_only" | "global" | "g" => Ok(Variant::GlobalOnly),
            other => Err(Error::Argument(format!("unknown variant `{other}`"))),
        }
    }
}

/// One basis shared by all meta-paths, or one per meta-path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LocalBases {
    Shared(FilterBasis),
    PerPath(Vec<FilterBasis>),
}

impl LocalBases {
    pub fn get(&self, i: usize) -> FilterBasis {
        match self {
            LocalBases::Shared(b) => *b,
            LocalBases::PerPath(v) => v[i],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub order: usize,
    /// Names of the meta-paths, in subgraph order.
    pub metapaths: Vec<String>,
    pub local_basis: LocalBases,
    pub global_basis: FilterBasis,
    pub hidden_dim: usize,
    pub num_mlp_layers: usize,
    pub dropout: f64,
    pub variant: Variant,
    /// Build `Σ β_i Â_i` explicitly instead of applying it lazily.
    #[serde(default)]
    pub materialize_global: bool,
}

impl ModelConfig {
    pub fn num_metapaths(&self) -> usize {
        self.metapaths.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.metapaths.len();
        if r == 0 {
            return Err(Error::Config("at least one meta-path is required".into()));
        }
        if let LocalBases::PerPath(v) = &self.local_basis {
            if v.len() != r {
                return Err(Error::Config(format!(
                    "{} local bases for {r} meta-paths",
                    v.len()
                )));
            }
        }
        if self.num_mlp_layers == 0 {
            return Err(Error::Config("num_mlp_layers must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `in x out`
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Linear {
    fn forward(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut y = x.matmul(&self.weight)?;
        let n = self.bias.len();
        if n > 0 {
            for row in y.data_mut().chunks_exact_mut(n) {
                for (v, b) in row.iter_mut().zip(&self.bias) {
                    *v += b;
                }
            }
        }
        Ok(y)
    }
}

/// Every learnable tensor of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Feature map, `d x hidden_dim`.
    pub w: DenseMatrix,
    /// Local coefficients, `R x (K+1)`.
    pub alpha: DenseMatrix,
    /// Meta-path weights of the global operator.
    pub beta: Vec<f64>,
    /// Global coefficients, `K+1`.
    pub gamma: Vec<f64>,
    pub mlp: Vec<Linear>,
}

/// Parameter group used for per-group optimizer settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamGroup {
    /// `w` and the MLP.
    Weights,
    /// `alpha`, `beta` and `gamma`.
    Coefficients,
}

/// Decaying low-pass prior `δ(1-δ)^k`, with the last term taking the
/// residual mass so the coefficients sum to one.
pub fn low_pass_init(order: usize, delta: f64) -> Vec<f64> {
    let mut c: Vec<f64> = (0..order).map(|k| delta * (1.0 - delta).powi(k as i32)).collect();
    c.push((1.0 - delta).powi(order as i32));
    c
}

pub const INIT_DELTA: f64 = 0.5;

fn uniform_fan_in<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let bound = 1.0 / (rows.max(1) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(
        config: &ModelConfig,
        in_dim: usize,
        num_classes: usize,
        rng: &mut R,
    ) -> Self {
        let r = config.num_metapaths();
        let k = config.order;
        let prior = low_pass_init(k, INIT_DELTA);
        let w = uniform_fan_in(in_dim, config.hidden_dim, rng);
        let alpha = DenseMatrix::from_fn(r, k + 1, |_, j| prior[j]);
        let beta = vec![1.0 / r as f64; r];
        let gamma = prior;
        let mut mlp = Vec::with_capacity(config.num_mlp_layers);
        for l in 0..config.num_mlp_layers {
            let out = if l + 1 == config.num_mlp_layers {
                num_classes
            } else {
                config.hidden_dim
            };
            mlp.push(Linear {
                weight: uniform_fan_in(config.hidden_dim, out, rng),
                bias: vec![0.0; out],
            });
        }
        Self {
            w,
            alpha,
            beta,
            gamma,
            mlp,
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            w: DenseMatrix::zeros(self.w.n_rows(), self.w.n_cols()),
            alpha: DenseMatrix::zeros(self.alpha.n_rows(), self.alpha.n_cols()),
            beta: vec![0.0; self.beta.len()],
            gamma: vec![0.0; self.gamma.len()],
            mlp: self
                .mlp
                .iter()
                .map(|l| Linear {
                    weight: DenseMatrix::zeros(l.weight.n_rows(), l.weight.n_cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    /// Named flat views of every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ParamGroup, &[f64])> {
        let mut out: Vec<(String, ParamGroup, &[f64])> = vec![
            ("w".into(), ParamGroup::Weights, self.w.data()),
            ("alpha".into(), ParamGroup::Coefficients, self.alpha.data()),
            ("beta".into(), ParamGroup::Coefficients, &self.beta),
            ("gamma".into(), ParamGroup::Coefficients, &self.gamma),
        ];
        for (l, layer) in self.mlp.iter().enumerate() {
            out.push((format!("mlp.{l}.weight"), ParamGroup::Weights, layer.weight.data()));
            out.push((format!("mlp.{l}.bias"), ParamGroup::Weights, &layer.bias));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ParamGroup, &mut [f64])> {
        let mut out: Vec<(String, ParamGroup, &mut [f64])> = vec![
            ("w".into(), ParamGroup::Weights, self.w.data_mut()),
            ("alpha".into(), ParamGroup::Coefficients, self.alpha.data_mut()),
            ("beta".into(), ParamGroup::Coefficients, &mut self.beta),
            ("gamma".into(), ParamGroup::Coefficients, &mut self.gamma),
        ];
        for (l, layer) in self.mlp.iter_mut().enumerate() {
            out.push((
                format!("mlp.{l}.weight"),
                ParamGroup::Weights,
                layer.weight.data_mut(),
            ));
            out.push((format!("mlp.{l}.bias"), ParamGroup::Weights, &mut layer.bias));
        }
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn check_shapes(&self, config: &ModelConfig, in_dim: usize, num_classes: usize) -> Result<()> {
        let r = config.num_metapaths();
        let k1 = config.order + 1;
        let h = config.hidden_dim;
        let mut problems = Vec::new();
        if self.w.shape() != (in_dim, h) {
            problems.push(format!("w is {:?}, expected {:?}", self.w.shape(), (in_dim, h)));
        }
        if self.alpha.shape() != (r, k1) {
            problems.push(format!(
                "alpha is {:?}, expected {:?}",
                self.alpha.shape(),
                (r, k1)
            ));
        }
        if self.beta.len() != r {
            problems.push(format!("beta has {} entries, expected {r}", self.beta.len()));
        }
        if self.gamma.len() != k1 {
            problems.push(format!("gamma has {} entries, expected {k1}", self.gamma.len()));
        }
        if self.mlp.len() != config.num_mlp_layers {
            problems.push(format!(
                "{} MLP layers, expected {}",
                self.mlp.len(),
                config.num_mlp_layers
            ));
        } else {
            for (l, layer) in self.mlp.iter().enumerate() {
                let out = if l + 1 == self.mlp.len() { num_classes } else { h };
                if layer.weight.shape() != (h, out) || layer.bias.len() != out {
                    problems.push(format!(
                        "MLP layer {l} is {:?} + bias {}, expected {:?}",
                        layer.weight.shape(),
                        layer.bias.len(),
                        (h, out)
                    ));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Shape(problems.join("; ")))
        }
    }

    /// `|β_i| / Σ_j |β_j|`, the reported share of each meta-path.
    pub fn beta_share(&self) -> Vec<f64> {
        let total: f64 = self.beta.iter().map(|b| b.abs()).sum();
        self.beta
            .iter()
            .map(|b| if total > 0.0 { b.abs() / total } else { 0.0 })
            .collect()
    }
}

/// Everything the forward pass reads besides the parameters.
#[derive(Clone, Debug)]
pub struct ModelInput {
    pub subgraphs: Vec<MetaPathSubgraph>,
    /// Transposes of each `norm_adj`, used by the backward pass.
    pub adjoints: Vec<CsrMatrix>,
    pub features: DenseMatrix,
}

impl ModelInput {
    pub fn new(subgraphs: Vec<MetaPathSubgraph>, features: DenseMatrix) -> Result<Self> {
        let n = features.n_rows();
        for s in &subgraphs {
            if s.norm_adj.shape() != (n, n) {
                return Err(Error::Shape(format!(
                    "meta-path `{}` adjacency is {:?} but there are {n} target nodes",
                    s.path.name,
                    s.norm_adj.shape()
                )));
            }
        }
        let adjoints = subgraphs.iter().map(|s| s.norm_adj.transpose()).collect();
        Ok(Self {
            subgraphs,
            adjoints,
            features,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.n_rows()
    }

    pub fn norm_adjs(&self) -> Vec<&CsrMatrix> {
        self.subgraphs.iter().map(|s| &s.norm_adj).collect()
    }
}

/// Lazily applied `v ↦ Σ_i β_i Â_i v`.
pub struct GlobalOperator<'a> {
    mats: Vec<&'a CsrMatrix>,
    beta: &'a [f64],
}

impl<'a> GlobalOperator<'a> {
    /// Sums `β_i Â_i` into one CSR matrix.
    pub fn materialize(&self) -> Result<CsrMatrix> {
        add_scaled(&self.mats, self.beta)
    }
}

impl LinearOperator for GlobalOperator<'_> {
    fn dim(&self) -> usize {
        self.mats[0].n_rows()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(x.n_rows(), x.n_cols());
        for (m, &b) in self.mats.iter().zip(self.beta) {
            if b != 0.0 {
                out.axpy(b, &spmm(m, x)?)?;
            } else if m.n_cols() != x.n_rows() {
                return Err(Error::Shape(format!(
                    "global operator {:?} applied to {:?}",
                    m.shape(),
                    x.shape()
                )));
            }
        }
        Ok(out)
    }
}

pub fn global_operator<'a>(mats: &[&'a CsrMatrix], beta: &'a [f64]) -> Result<GlobalOperator<'a>> {
    let first = mats
        .first()
        .ok_or_else(|| Error::Argument("global operator needs at least one matrix".into()))?;
    if mats.len() != beta.len() {
        return Err(Error::Shape(format!(
            "{} matrices but {} weights",
            mats.len(),
            beta.len()
        )));
    }
    for m in mats {
        if !m.is_square() || m.shape() != first.shape() {
            return Err(Error::Shape(format!(
                "global operator needs equal square matrices, got {:?} and {:?}",
                first.shape(),
                m.shape()
            )));
        }
    }
    Ok(GlobalOperator {
        mats: mats.to_vec(),
        beta,
    })
}

fn check_inputs(input: &ModelInput, params: &ModelParams, config: &ModelConfig) -> Result<()> {
    if input.subgraphs.len() != config.num_metapaths() {
        return Err(Error::Shape(format!(
            "{} subgraphs for {} configured meta-paths",
            input.subgraphs.len(),
            config.num_metapaths()
        )));
    }
    let classes = params.mlp.last().map_or(0, |l| l.bias.len());
    params.check_shapes(config, input.features.n_cols(), classes)
}

fn local_stacks(input: &ModelInput, h: &DenseMatrix, config: &ModelConfig) -> Result<Vec<BasisStack>> {
    input
        .subgraphs
        .par_iter()
        .enumerate()
        .map(|(i, s)| propagate_basis(config.local_basis.get(i), &s.norm_adj, h, config.order))
        .collect()
}

fn global_stack(
    input: &ModelInput,
    h: &DenseMatrix,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<BasisStack> {
    let mats = input.norm_adjs();
    let op = global_operator(&mats, &params.beta)?;
    if config.materialize_global {
        let m = op.materialize()?;
        propagate_basis(config.global_basis, &m, h, config.order)
    } else {
        propagate_basis(config.global_basis, &op, h, config.order)
    }
}

fn sum_local(stacks: &[BasisStack], alpha: &DenseMatrix, n: usize, d: usize) -> Result<DenseMatrix> {
    let mut z = DenseMatrix::zeros(n, d);
    for (i, s) in stacks.iter().enumerate() {
        z.axpy(1.0, &s.contract(alpha.row(i))?)?;
    }
    Ok(z)
}

/// `Z_l = Σ_i Σ_k α_{i,k} h_{i,k}(Â_i) X W`.
pub fn local_filtering(input: &ModelInput, params: &ModelParams, config: &ModelConfig) -> Result<DenseMatrix> {
    check_inputs(input, params, config)?;
    let h = input.features.matmul(&params.w)?;
    let stacks = local_stacks(input, &h, config)?;
    sum_local(&stacks, &params.alpha, h.n_rows(), h.n_cols())
}

/// `Z_g = Σ_k γ_k g_k(Σ_i β_i Â_i) X W`.
pub fn global_filtering(input: &ModelInput, params: &ModelParams, config: &ModelConfig) -> Result<DenseMatrix> {
    check_inputs(input, params, config)?;
    let h = input.features.matmul(&params.w)?;
    global_stack(input, &h, params, config)?.contract(&params.gamma)
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `X W`
    pub mapped: DenseMatrix,
    pub local_stacks: Vec<BasisStack>,
    pub global_stack: Option<BasisStack>,
    /// Input to each MLP layer after activation and dropout.
    pub layer_inputs: Vec<DenseMatrix>,
    /// Pre-activation output of each MLP layer.
    pub layer_outputs: Vec<DenseMatrix>,
    /// Per-entry dropout multipliers (0 or `1/(1-p)`) applied to each layer
    /// input; `None` when dropout was inactive.
    pub dropout_masks: Vec<Option<Vec<f64>>>,
}

#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub z_local: DenseMatrix,
    pub z_global: DenseMatrix,
    pub z: DenseMatrix,
    pub logits: DenseMatrix,
    pub cache: Option<ForwardCache>,
}

impl ForwardTrace {
    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }
}

fn dropout_mask<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

/// Full forward pass. Dropout is drawn from `rng` only when `train_mode` is
/// set, so evaluation is deterministic and leaves `rng` untouched.
pub fn forward<R: Rng + ?Sized>(
    input: &ModelInput,
    params: &ModelParams,
    config: &ModelConfig,
    train_mode: bool,
    rng: &mut R,
) -> Result<ForwardTrace> {
    check_inputs(input, params, config)?;
    let mapped = input.features.matmul(&params.w)?;
    let (n, d) = mapped.shape();

    let local = if config.variant.uses_local() {
        local_stacks(input, &mapped, config)?
    } else {
        Vec::new()
    };
    let z_local = if local.is_empty() {
        DenseMatrix::zeros(n, d)
    } else {
        sum_local(&local, &params.alpha, n, d)?
    };

    let global = if config.variant.uses_global() {
        Some(global_stack(input, &mapped, params, config)?)
    } else {
        None
    };
    let z_global = match &global {
        Some(s) => s.contract(&params.gamma)?,
        None => DenseMatrix::zeros(n, d),
    };

    let z = match config.variant {
        Variant::Full => z_local.add(&z_global)?,
        Variant::LocalOnly => z_local.clone(),
        Variant::GlobalOnly => z_global.clone(),
    };

    let use_dropout = train_mode && config.dropout > 0.0;
    let mut layer_inputs = Vec::with_capacity(params.mlp.len());
    let mut layer_outputs = Vec::with_capacity(params.mlp.len());
    let mut dropout_masks = Vec::with_capacity(params.mlp.len());
    let mut current = z.clone();
    for (l, layer) in params.mlp.iter().enumerate() {
        if l > 0 {
            current.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let mask = use_dropout.then(|| dropout_mask(current.data().len(), config.dropout, rng));
        if let Some(m) = &mask {
            current.data_mut().iter_mut().zip(m).for_each(|(v, s)| *v *= s);
        }
        let out = layer.forward(&current)?;
        layer_inputs.push(current);
        dropout_masks.push(mask);
        current = out.clone();
        layer_outputs.push(out);
    }
    let logits = current;

    Ok(ForwardTrace {
        z_local,
        z_global,
        z,
        logits,
        cache: Some(ForwardCache {
            mapped,
            local_stacks: local,
            global_stack: global,
            layer_inputs,
            layer_outputs,
            dropout_masks,
        }),
    })
}

/// Evaluation-mode logits.
pub fn predict(input: &ModelInput, params: &ModelParams, config: &ModelConfig) -> Result<DenseMatrix> {
    let mut unused = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    Ok(forward(input, params, config, false, &mut unused)?.logits)
}

fn check_mask(logits: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::Argument("loss over an empty node mask".into()));
    }
    for &i in mask {
        if i >= logits.n_rows() || i >= labels.len() {
            return Err(Error::Argument(format!("mask node {i} out of range")));
        }
        if labels[i] >= logits.n_cols() {
            return Err(Error::Argument(format!(
                "node {i} has label {} but there are {} classes",
                labels[i],
                logits.n_cols()
            )));
        }
    }
    Ok(())
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

/// Mean of `-log softmax(logits_i)[labels_i]` over `mask`.
pub fn cross_entropy_loss(logits: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    check_mask(logits, labels, mask)?;
    let total: f64 = mask
        .iter()
        .map(|&i| -log_softmax(logits.row(i))[labels[i]])
        .sum();
    Ok(total / mask.len() as f64)
}

/// Loss and its gradient with respect to the logits.
pub fn cross_entropy_with_grad(
    logits: &DenseMatrix,
    labels: &[usize],
    mask: &[usize],
) -> Result<(f64, DenseMatrix)> {
    check_mask(logits, labels, mask)?;
    let scale = 1.0 / mask.len() as f64;
    let mut grad = DenseMatrix::zeros(logits.n_rows(), logits.n_cols());
    let mut total = 0.0;
    for &i in mask {
        let ls = log_softmax(logits.row(i));
        total -= ls[labels[i]];
        let g = grad.row_mut(i);
        for (c, (gv, l)) in g.iter_mut().zip(&ls).enumerate() {
            *gv += scale * (l.exp() - f64::from(u8::from(c == labels[i])));
        }
    }
    Ok((total * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::MetaPath;
    use rand_chacha::ChaCha8Rng;

    fn sub(name: &str, adj: CsrMatrix) -> MetaPathSubgraph {
        MetaPathSubgraph::from_normalized(MetaPath::new(name, vec![]), adj)
    }

    fn config(r: usize, k: usize, layers: usize, h: usize) -> ModelConfig {
        ModelConfig {
            order: k,
            metapaths: (0..r).map(|i| format!("m{i}")).collect(),
            local_basis: LocalBases::Shared(FilterBasis::Monomial),
            global_basis: FilterBasis::Monomial,
            hidden_dim: h,
            num_mlp_layers: layers,
            dropout: 0.0,
            variant: Variant::Full,
            materialize_global: false,
        }
    }

    fn swap() -> CsrMatrix {
        CsrMatrix::from_dense(&DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]))
    }

    #[test]
    fn local_filtering_examples() {
        let x = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        let input = ModelInput::new(vec![sub("a", swap())], x.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);

        let cfg = config(1, 0, 1, 2);
        let mut p = ModelParams::init(&cfg, 2, 2, &mut rng);
        p.w = DenseMatrix::identity(2);
        p.alpha = DenseMatrix::from_rows(&[[1.0]]);
        assert_eq!(local_filtering(&input, &p, &cfg).unwrap(), x);

        let cfg = config(1, 1, 1, 2);
        let mut p = ModelParams::init(&cfg, 2, 2, &mut rng);
        p.w = DenseMatrix::identity(2);
        p.alpha = DenseMatrix::from_rows(&[[0.0, 1.0]]);
        assert_eq!(
            local_filtering(&input, &p, &cfg).unwrap(),
            DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]])
        );
    }

    #[test]
    fn zero_alpha_row_drops_a_metapath() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]);
        let other = CsrMatrix::from_dense(&DenseMatrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]));
        let two = ModelInput::new(vec![sub("a", swap()), sub("b", other)], x.clone()).unwrap();
        let one = ModelInput::new(vec![sub("a", swap())], x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg2 = config(2, 2, 1, 3);
        let mut p2 = ModelParams::init(&cfg2, 2, 2, &mut rng);
        p2.alpha.row_mut(1).fill(0.0);
        let cfg1 = config(1, 2, 1, 3);
        let mut p1 = ModelParams::init(&cfg1, 2, 2, &mut rng);
        p1.w = p2.w.clone();
        p1.alpha = DenseMatrix::from_rows(&[p2.alpha.row(0)]);
        assert_eq!(
            local_filtering(&two, &p2, &cfg2).unwrap(),
            local_filtering(&one, &p1, &cfg1).unwrap()
        );
    }

    #[test]
    fn global_operator_examples() {
        let a = swap();
        let v = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let beta = [1.0];
        let op = global_operator(&[&a], &beta).unwrap();
        assert_eq!(op.apply(&v).unwrap(), spmm(&a, &v).unwrap());

        let zero = [0.0, 0.0];
        let op = global_operator(&[&a, &a], &zero).unwrap();
        assert_eq!(op.apply(&v).unwrap(), DenseMatrix::zeros(2, 2));

        let big = CsrMatrix::identity(3);
        assert!(global_operator(&[&a, &big], &zero).is_err());
        assert!(global_operator(&[&a], &zero).is_err());
    }

    #[test]
    fn global_filtering_trivial_cases() {
        let x = DenseMatrix::from_rows(&[[1.0, 0.0], [2.0, 1.0]]);
        let input = ModelInput::new(vec![sub("a", swap())], x.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = config(1, 0, 1, 2);
        let mut p = ModelParams::init(&cfg, 2, 2, &mut rng);
        p.w = DenseMatrix::identity(2);
        p.gamma = vec![1.0];
        assert_eq!(global_filtering(&input, &p, &cfg).unwrap(), x);

        let cfg = config(1, 3, 1, 2);
        let mut p = ModelParams::init(&cfg, 2, 2, &mut rng);
        p.gamma = vec![0.0; 4];
        assert_eq!(global_filtering(&input, &p, &cfg).unwrap(), DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn loss_examples() {
        let uniform = DenseMatrix::zeros(3, 4);
        let l = cross_entropy_loss(&uniform, &[0, 1, 3], &[0, 1, 2]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);

        let confident = DenseMatrix::from_rows(&[[100.0, 0.0]]);
        assert!(cross_entropy_loss(&confident, &[0], &[0]).unwrap() < 1e-40);

        let one = DenseMatrix::from_rows(&[[1.0, 0.0]]);
        let e = std::f64::consts::E;
        let expect = -(e / (e + 1.0)).ln();
        assert!((cross_entropy_loss(&one, &[0], &[0]).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.3133).abs() < 1e-4);

        assert!(matches!(cross_entropy_loss(&one, &[0], &[]), Err(Error::Argument(_))));
        assert!(cross_entropy_loss(&one, &[2], &[0]).is_err());
    }

    #[test]
    fn loss_grad_matches_loss() {
        let logits = DenseMatrix::from_rows(&[[0.3, -1.0, 2.0], [0.0, 0.5, 0.1], [9.0, 9.0, 9.0]]);
        let labels = [2, 0, 1];
        let mask = [0, 1];
        let (l, g) = cross_entropy_with_grad(&logits, &labels, &mask).unwrap();
        assert_eq!(l, cross_entropy_loss(&logits, &labels, &mask).unwrap());
        assert!(g.row(2).iter().all(|&v| v == 0.0));
        let eps = 1e-6;
        for i in 0..2 {
            for c in 0..3 {
                let mut p = logits.clone();
                p.set(i, c, p.get(i, c) + eps);
                let mut m = logits.clone();
                m.set(i, c, m.get(i, c) - eps);
                let fd = (cross_entropy_loss(&p, &labels, &mask).unwrap()
                    - cross_entropy_loss(&m, &labels, &mask).unwrap())
                    / (2.0 * eps);
                assert!((fd - g.get(i, c)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_head_gives_zero_logits_and_eval_is_deterministic() {
        let x = DenseMatrix::from_rows(&[[1.0, 0.5], [0.2, 1.0]]);
        let input = ModelInput::new(vec![sub("a", swap())], x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut cfg = config(1, 2, 1, 3);
        cfg.dropout = 0.5;
        let mut p = ModelParams::init(&cfg, 2, 2, &mut rng);
        let a = forward(&input, &p, &cfg, false, &mut rng).unwrap();
        let b = forward(&input, &p, &cfg, false, &mut rng).unwrap();
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.z, a.z_local.add(&a.z_global).unwrap());

        p.mlp[0].weight = DenseMatrix::zeros(3, 2);
        let t = forward(&input, &p, &cfg, false, &mut rng).unwrap();
        assert_eq!(t.logits, DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn local_only_uses_local_branch() {
        let x = DenseMatrix::from_rows(&[[1.0, 0.5], [0.2, 1.0]]);
        let input = ModelInput::new(vec![sub("a", swap())], x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut cfg = config(1, 2, 2, 3);
        let p = ModelParams::init(&cfg, 2, 2, &mut rng);
        cfg.variant = Variant::LocalOnly;
        let t = forward(&input, &p, &cfg, false, &mut rng).unwrap();
        assert_eq!(t.z, local_filtering(&input, &p, &cfg).unwrap());
        assert_eq!(t.z_global, DenseMatrix::zeros(2, 3));
    }

    #[test]
    fn init_prior() {
        let c = low_pass_init(3, 0.5);
        assert_eq!(c, vec![0.5, 0.25, 0.125, 0.125]);
        assert_eq!(low_pass_init(0, 0.5), vec![1.0]);
    }

    #[test]
    fn config_validation() {
        let mut c = config(2, 2, 2, 4);
        c.validate().unwrap();
        c.local_basis = LocalBases::PerPath(vec![FilterBasis::Legendre]);
        assert!(c.validate().is_err());
        let mut c = config(0, 2, 2, 4);
        assert!(c.validate().is_err());
        c = config(1, 2, 0, 4);
        assert!(c.validate().is_err());
        c = config(1, 2, 1, 4);
        c.dropout = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn variant_parse() {
        assert_eq!("local-only".parse::<Variant>().unwrap(), Variant::LocalOnly);
        assert_eq!("global_only".parse::<Variant>().unwrap(), Variant::GlobalOnly);
        assert!("both".parse::<Variant>().is_err());
    }
}
