use crate::error::{Error, Result};

fn check(preds: &[usize], labels: &[usize], mask: &[usize]) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::Argument("metric over an empty node mask".into()));
    }
    if let Some(&i) = mask.iter().find(|&&i| i >= preds.len() || i >= labels.len()) {
        return Err(Error::Argument(format!("mask node {i} out of range")));
    }
    Ok(())
}

/// Micro-averaged F1; equals accuracy for single-label multiclass.
pub fn micro_f1(preds: &[usize], labels: &[usize], mask: &[usize]) -> Result<f64> {
    check(preds, labels, mask)?;
    let hits = mask.iter().filter(|&&i| preds[i] == labels[i]).count();
    Ok(hits as f64 / mask.len() as f64)
}

/// Unweighted mean of per-class F1 over `num_classes` classes. A class with
/// no true positives (including one absent from both predictions and
/// labels) scores 0.
pub fn macro_f1(preds: &[usize], labels: &[usize], mask: &[usize], num_classes: usize) -> Result<f64> {
    check(preds, labels, mask)?;
    if num_classes == 0 {
        return Err(Error::Argument("macro F1 needs at least one class".into()));
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for &i in mask {
        let (p, y) = (preds[i], labels[i]);
        if p >= num_classes || y >= num_classes {
            return Err(Error::Argument(format!(
                "class id {} outside [0, {num_classes})",
                p.max(y)
            )));
        }
        if p == y {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[y] += 1;
        }
    }
    let total: f64 = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / num_classes as f64)
}
