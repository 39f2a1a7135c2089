use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, backward, macro_f1, micro_f1, AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::model::{
    cross_entropy_loss, forward, predict, ModelConfig, ModelInput, ModelParams, Variant,
};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub adam: AdamConfig,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; `None` never stops early.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            epochs: 2000,
            patience: Some(100),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_micro_f1: f64,
    pub val_macro_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub variant: Variant,
    pub metapaths: Vec<String>,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_micro_f1: f64,
    pub test_micro_f1: f64,
    pub test_macro_f1: f64,
    /// Learned coefficients at the best epoch.
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub beta_share: Vec<f64>,
    pub gamma: Vec<f64>,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    /// Parameters restored from the best validation epoch.
    pub params: ModelParams,
}

/// Parameters a variant never reads; they are kept out of the optimizer.
pub fn frozen_tensors(variant: Variant) -> &'static [&'static str] {
    match variant {
        Variant::Full => &[],
        Variant::LocalOnly => &["beta", "gamma"],
        Variant::GlobalOnly => &["alpha"],
    }
}

fn labeled(labels: &[Option<usize>], mask: &[usize], which: &str) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::Argument(format!("{which} mask is empty")));
    }
    if let Some(&i) = mask.iter().find(|&&i| labels.get(i).copied().flatten().is_none()) {
        return Err(Error::Argument(format!("{which} node {i} has no label")));
    }
    Ok(())
}

pub struct Evaluation {
    pub loss: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

/// Evaluation-mode metrics of `params` on `mask`.
pub fn evaluate(
    input: &ModelInput,
    params: &ModelParams,
    config: &ModelConfig,
    labels: &[usize],
    num_classes: usize,
    mask: &[usize],
) -> Result<Evaluation> {
    let logits = predict(input, params, config)?;
    let preds = logits.argmax_rows();
    Ok(Evaluation {
        loss: cross_entropy_loss(&logits, labels, mask)?,
        micro_f1: micro_f1(&preds, labels, mask)?,
        macro_f1: macro_f1(&preds, labels, mask, num_classes)?,
    })
}

/// Full-graph training with early stopping on validation Micro-F1.
///
/// Each epoch runs one dropout-enabled forward/backward pass on the training
/// nodes, one optimizer step, then an evaluation pass. The best epoch is the
/// one with the highest validation Micro-F1, ties broken by lower validation
/// loss. Its parameters are restored before the test evaluation.
pub fn train(
    input: &ModelInput,
    labels: &[Option<usize>],
    num_classes: usize,
    splits: &Splits,
    config: &ModelConfig,
    hyper: &TrainHyper,
) -> Result<TrainOutcome> {
    config.validate()?;
    labeled(labels, &splits.train, "train")?;
    labeled(labels, &splits.val, "validation")?;
    labeled(labels, &splits.test, "test")?;
    let dense_labels: Vec<usize> = labels.iter().map(|l| l.unwrap_or(usize::MAX)).collect();

    let mut init_rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    dropout_rng.set_stream(1);

    let mut params = ModelParams::init(config, input.features.n_cols(), num_classes, &mut init_rng);
    let mut state = AdamState::new(&params);
    let frozen = frozen_tensors(config.variant);

    let mut best: Option<(usize, f64, f64, ModelParams)> = None;
    let mut history = Vec::new();

    for epoch in 0..hyper.epochs {
        let trace = forward(input, &params, config, true, &mut dropout_rng)?;
        let (train_loss, grads) =
            backward(&trace, input, &dense_labels, &splits.train, &params, config)?;
        drop(trace);
        adam_step(&mut params, &grads, &mut state, &hyper.adam, |n| {
            frozen.contains(&n)
        })?;

        let val = evaluate(input, &params, config, &dense_labels, num_classes, &splits.val)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: val.loss,
            val_micro_f1: val.micro_f1,
            val_macro_f1: val.macro_f1,
        });
        if epoch % 50 == 0 {
            debug!(
                "epoch {epoch}: train loss {train_loss:.4}, val micro {:.4}, val loss {:.4}",
                val.micro_f1, val.loss
            );
        }

        let improved = match &best {
            None => true,
            Some((_, f1, loss, _)) => {
                val.micro_f1 > *f1 || (val.micro_f1 == *f1 && val.loss < *loss)
            }
        };
        if improved {
            best = Some((epoch, val.micro_f1, val.loss, params.clone()));
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.0);
        if hyper.patience.is_some_and(|p| epoch - best_epoch >= p) {
            info!("early stop at epoch {epoch}, best epoch {best_epoch}");
            break;
        }
    }

    let (best_epoch, best_val, _, best_params) = match best {
        Some(b) => b,
        None => {
            let val = evaluate(input, &params, config, &dense_labels, num_classes, &splits.val)?;
            (0, val.micro_f1, val.loss, params)
        }
    };
    let test = evaluate(input, &best_params, config, &dense_labels, num_classes, &splits.test)?;
    info!(
        "seed {}: best epoch {best_epoch}, test micro {:.4}, macro {:.4}",
        hyper.seed, test.micro_f1, test.macro_f1
    );

    let report = TrainReport {
        seed: hyper.seed,
        variant: config.variant,
        metapaths: config.metapaths.clone(),
        epochs_run: history.len(),
        best_epoch,
        best_val_micro_f1: best_val,
        test_micro_f1: test.micro_f1,
        test_macro_f1: test.macro_f1,
        alpha: best_params.alpha.rows().map(|r| r.to_vec()).collect(),
        beta: best_params.beta.clone(),
        beta_share: best_params.beta_share(),
        gamma: best_params.gamma.clone(),
        history,
    };
    Ok(TrainOutcome {
        report,
        params: best_params,
    })
}
