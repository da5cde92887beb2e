//! Composite training objective: token cross-entropy, hormone regression with
//! a hinge margin, and query diversity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Hormone, TokenBatch, N_HORMONES};
use crate::model::{ForwardOutput, Seq2SeqModel};
use crate::tensor::{Result, Tensor, TensorError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha_seq: f64,
    pub beta_hormone: f64,
    pub gamma_diversity: f64,
    /// Weight of the margin term inside the hormone loss.
    pub margin_coeff: f64,
    /// Targets above this are "high" ...
    pub high_threshold: f64,
    /// ... and below this "low".
    pub low_threshold: f64,
    /// High predictions are pushed above this value.
    pub high_target_cut: f64,
    /// Low predictions are pushed below this value.
    pub low_target_cut: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha_seq: 1.0,
            beta_hormone: 5.0,
            gamma_diversity: 0.5,
            margin_coeff: 0.3,
            high_threshold: 0.8,
            low_threshold: 0.2,
            high_target_cut: 0.7,
            low_target_cut: 0.3,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha_seq,
            self.beta_hormone,
            self.gamma_diversity,
            self.margin_coeff,
            self.high_threshold,
            self.low_threshold,
            self.high_target_cut,
            self.low_target_cut,
        ];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(TensorError::Contract("loss weights must be finite and nonnegative".into()));
        }
        if self.low_threshold >= self.high_threshold || self.low_target_cut >= self.high_target_cut {
            return Err(TensorError::Contract("low thresholds must lie below high thresholds".into()));
        }
        Ok(())
    }
}

/// Detached per-component loss values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub seq: f64,
    pub hormone_mse: f64,
    pub margin: f64,
    pub hormone: f64,
    pub diversity: f64,
}

#[derive(Debug, Error)]
pub enum LossError {
    #[error("non-finite {part} loss ({value})")]
    NonFinite { part: &'static str, value: f64 },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Cross-entropy averaged over unmasked target positions.
pub fn sequence_loss(logits: &Tensor, target_ids: &[usize], target_mask: &[u8]) -> Result<Tensor> {
    let mask: Vec<f64> = target_mask.iter().map(|&m| f64::from(m)).collect();
    logits.cross_entropy(target_ids, &mask)
}

/// Mean squared error over components and batch rows.
pub fn hormone_mse(h_hat: &Tensor, h_star: &Tensor) -> Result<Tensor> {
    let diff = h_hat.sub(h_star)?;
    Ok(diff.mul(&diff)?.mean())
}

/// Hinge penalty: per row, the mean of `relu(high_cut - h)` over components
/// whose target exceeds `high_threshold`, plus the mean of `relu(h - low_cut)`
/// over components whose target is below `low_threshold`, averaged over rows.
/// An empty set contributes 0.
pub fn margin_loss(h_hat: &Tensor, h_star: &[f64], w: &LossWeights) -> Result<Tensor> {
    let (rows, k) = (h_hat.shape()[0], h_hat.shape()[1]);
    if h_star.len() != rows * k {
        return Err(TensorError::Contract(format!("margin_loss: {} targets for shape {:?}", h_star.len(), h_hat.shape())));
    }
    let mut w_high = vec![0.0; rows * k];
    let mut w_low = vec![0.0; rows * k];
    for (r, row) in h_star.chunks(k).enumerate() {
        let n_high = row.iter().filter(|&&t| t > w.high_threshold).count();
        let n_low = row.iter().filter(|&&t| t < w.low_threshold).count();
        for (i, &t) in row.iter().enumerate() {
            if t > w.high_threshold {
                w_high[r * k + i] = 1.0 / (n_high * rows) as f64;
            } else if t < w.low_threshold {
                w_low[r * k + i] = 1.0 / (n_low * rows) as f64;
            }
        }
    }
    let shape = [rows, k];
    let high = h_hat.neg().add_scalar(w.high_target_cut).relu().mul(&Tensor::new(&shape, w_high)?)?;
    let low = h_hat.add_scalar(-w.low_target_cut).relu().mul(&Tensor::new(&shape, w_low)?)?;
    high.sum().add(&low.sum())
}

/// `mse + margin_coeff * margin`; returns `(hormone, mse, margin)`.
pub fn hormone_loss(h_hat: &Tensor, h_star: &[f64], w: &LossWeights) -> Result<(Tensor, Tensor, Tensor)> {
    let target = Tensor::new(h_hat.shape(), h_star.to_vec())
        .map_err(|_| TensorError::Contract(format!("hormone_loss: {} targets for shape {:?}", h_star.len(), h_hat.shape())))?;
    let mse = hormone_mse(h_hat, &target)?;
    let margin = margin_loss(h_hat, h_star, w)?;
    let total = mse.add(&margin.scale(w.margin_coeff))?;
    Ok((total, mse, margin))
}

/// Mean `|cos|` over all ordered pairs of distinct query vectors.
pub fn diversity_loss(queries: &[Tensor]) -> Result<Tensor> {
    let k = queries.len();
    if k < 2 {
        return Ok(Tensor::scalar(0.0));
    }
    let mut terms = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            terms.push(queries[i].cosine_similarity(&queries[j])?.abs());
        }
    }
    // |cos| is symmetric, so the ordered-pair mean equals the unordered one.
    let mut sum = terms[0].clone();
    for t in &terms[1..] {
        sum = sum.add(t)?;
    }
    Ok(sum.scale(1.0 / terms.len() as f64))
}

/// `alpha_seq * seq + beta_hormone * hormone + gamma_diversity * diversity`.
pub fn total_loss(seq: &Tensor, hormone: &Tensor, diversity: &Tensor, w: &LossWeights) -> Result<Tensor> {
    seq.scale(w.alpha_seq)
        .add(&hormone.scale(w.beta_hormone))?
        .add(&diversity.scale(w.gamma_diversity))
}

/// Picks the columns of `[B, 6]` targets for the active hormones.
pub fn select_targets(targets: &[f64], hormones: &[Hormone]) -> Vec<f64> {
    targets
        .chunks(N_HORMONES)
        .flat_map(|row| hormones.iter().map(move |h| row[h.index()]))
        .collect()
}

/// All loss terms for one batch; the returned tensor is the differentiable
/// total, the report its detached parts.
pub fn compute_losses(
    model: &Seq2SeqModel,
    out: &ForwardOutput,
    batch: &TokenBatch,
    w: &LossWeights,
) -> std::result::Result<(Tensor, LossReport), LossError> {
    let seq = sequence_loss(&out.logits, &batch.target_ids, &batch.target_mask)?;
    let targets = select_targets(&batch.hormone_targets, &model.hormone.hormones());
    let (hormone, mse, margin) = hormone_loss(&out.h_hat, &targets, w)?;
    let diversity = diversity_loss(&model.hormone.flat_queries()?)?;
    let total = total_loss(&seq, &hormone, &diversity, w)?;
    let report = LossReport {
        total: total.item(),
        seq: seq.item(),
        hormone_mse: mse.item(),
        margin: margin.item(),
        hormone: hormone.item(),
        diversity: diversity.item(),
    };
    report.check()?;
    Ok((total, report))
}

impl LossReport {
    pub fn check(&self) -> std::result::Result<(), LossError> {
        for (part, value) in [
            ("total", self.total),
            ("sequence", self.seq),
            ("hormone mse", self.hormone_mse),
            ("margin", self.margin),
            ("hormone", self.hormone),
            ("diversity", self.diversity),
        ] {
            if !value.is_finite() {
                return Err(LossError::NonFinite { part, value });
            }
        }
        Ok(())
    }

    /// Weighted mean of reports, e.g. over batches of different sizes.
    pub fn weighted_mean(parts: &[(LossReport, f64)]) -> LossReport {
        let total_w: f64 = parts.iter().map(|(_, w)| w).sum();
        let mut acc = LossReport::default();
        for (r, w) in parts {
            let f = w / total_w;
            acc.total += r.total * f;
            acc.seq += r.seq * f;
            acc.hormone_mse += r.hormone_mse * f;
            acc.margin += r.margin * f;
            acc.hormone += r.hormone * f;
            acc.diversity += r.diversity * f;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Tone;

    fn t(shape: &[usize], v: Vec<f64>) -> Tensor {
        Tensor::new(shape, v).unwrap()
    }

    #[test]
    fn sequence_loss_cases() {
        let uniform = t(&[1, 2, 5], vec![0.3; 10]);
        let l = sequence_loss(&uniform, &[1, 4], &[1, 1]).unwrap().item();
        assert!((l - 5f64.ln()).abs() < 1e-12);
        let hand = t(&[1, 1, 2], vec![3f64.ln(), 0.0]);
        assert!((sequence_loss(&hand, &[0], &[1]).unwrap().item() + 0.75f64.ln()).abs() < 1e-12);
        assert!(sequence_loss(&hand, &[0], &[0]).is_err());
    }

    #[test]
    fn perfect_friendly_prediction_is_zero() {
        let f = Tone::Friendly.hormones().0.to_vec();
        let (h, mse, margin) = hormone_loss(&t(&[1, 6], f.clone()), &f, &LossWeights::default()).unwrap();
        assert_eq!((h.item(), mse.item(), margin.item()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn neutral_margin_is_zero() {
        let n = Tone::Neutral.hormones().0.to_vec();
        let pred = t(&[1, 6], vec![0.99, 0.01, 0.99, 0.01, 0.5, 0.5]);
        assert_eq!(margin_loss(&pred, &n, &LossWeights::default()).unwrap().item(), 0.0);
    }

    #[test]
    fn single_high_hand_case() {
        let w = LossWeights::default();
        let m = margin_loss(&t(&[1, 1], vec![0.5]), &[0.95], &w).unwrap().item();
        assert!((m - 0.2).abs() < 1e-12);
        let mse = hormone_mse(&t(&[1, 1], vec![0.5]), &t(&[1, 1], vec![0.95])).unwrap().item();
        assert!((mse - 0.2025).abs() < 1e-12);
        assert_eq!(margin_loss(&t(&[1, 1], vec![0.1]), &[0.5], &w).unwrap().item(), 0.0);
    }

    #[test]
    fn diversity_cases() {
        let basis = |i: usize| t(&[6], (0..6).map(|j| if i == j { 1.0 } else { 0.0 }).collect());
        let ortho: Vec<Tensor> = (0..6).map(basis).collect();
        assert_eq!(diversity_loss(&ortho).unwrap().item(), 0.0);
        let same: Vec<Tensor> = (0..6).map(|_| t(&[6], vec![1.0, 2.0, 0.0, -1.0, 0.5, 3.0])).collect();
        assert!((diversity_loss(&same).unwrap().item() - 1.0).abs() < 1e-12);
        let mut dup: Vec<Tensor> = (0..5).map(basis).collect();
        dup.push(basis(0));
        assert!((diversity_loss(&dup).unwrap().item() - 2.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn total_hand_case() {
        let w = LossWeights::default();
        let l = total_loss(&Tensor::scalar(2.0), &Tensor::scalar(0.1), &Tensor::scalar(0.2), &w).unwrap();
        assert!((l.item() - 2.6).abs() < 1e-12);
        let double = LossWeights { beta_hormone: 10.0, ..w };
        let l2 = total_loss(&Tensor::scalar(2.0), &Tensor::scalar(0.1), &Tensor::scalar(0.2), &double).unwrap();
        assert!((l2.item() - 3.1).abs() < 1e-12);
    }

    #[test]
    fn selects_three_hormone_columns() {
        let row = Tone::Rude.hormones().0;
        let sel = select_targets(&row, &[Hormone::Dopamine, Hormone::Cortisol, Hormone::Oxytocin]);
        assert_eq!(sel, vec![row[0], row[2], row[3]]);
    }

    #[test]
    fn weight_contracts() {
        assert!(LossWeights::default().validate().is_ok());
        assert!(LossWeights { low_threshold: 0.9, ..LossWeights::default() }.validate().is_err());
        assert!(LossWeights { beta_hormone: -1.0, ..LossWeights::default() }.validate().is_err());
    }
}
