use ndarray::{Array1, ArrayView1, Zip};

/// Probabilities are clipped to `[EPS, 1 - EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;

/// A loss over a batch, expressed as a sum of per-entry terms divided by a
/// fixed normalizer. Keeping the normalizer explicit lets chunked passes add
/// their partial sums without rescaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// Binary cross-entropy on sigmoid outputs.
    Bce { normalizer: f64 },
    /// Squared error on identity outputs.
    Mse { normalizer: f64 },
}

impl LossKind {
    pub(crate) fn partial_sum(
        &self,
        preds: ArrayView1<'_, f64>,
        targets: ArrayView1<'_, f64>,
    ) -> f64 {
        match *self {
            LossKind::Bce { normalizer } => {
                let mut sum = 0.0;
                Zip::from(&preds)
                    .and(&targets)
                    .for_each(|&p, &t| sum += bce_term(p, t));
                sum / normalizer
            }
            LossKind::Mse { normalizer } => {
                let mut sum = 0.0;
                Zip::from(&preds)
                    .and(&targets)
                    .for_each(|&p, &t| sum += (p - t) * (p - t));
                sum / normalizer
            }
        }
    }

    /// Derivative of the loss with respect to each output pre-activation.
    pub(crate) fn output_gradient(
        &self,
        preds: ArrayView1<'_, f64>,
        targets: ArrayView1<'_, f64>,
    ) -> Array1<f64> {
        match *self {
            LossKind::Bce { normalizer } => Zip::from(&preds)
                .and(&targets)
                .map_collect(|&p, &t| (p - t) / normalizer),
            LossKind::Mse { normalizer } => Zip::from(&preds)
                .and(&targets)
                .map_collect(|&p, &t| 2.0 * (p - t) / normalizer),
        }
    }
}

fn bce_term(p: f64, t: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

/// Mean binary cross-entropy over all entries.
pub fn bce_loss(predictions: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(predictions.len(), targets.len());
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &t)| bce_term(p, t))
        .sum();
    sum / predictions.len() as f64
}

/// Sum of squared errors divided by `normalizer` (the full image area, even
/// when only occupied pixels contribute).
pub fn mse_loss(predictions: &[f64], targets: &[f64], normalizer: f64) -> f64 {
    assert_eq!(predictions.len(), targets.len());
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    sum / normalizer
}
