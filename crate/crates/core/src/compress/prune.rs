use crate::error::{Error, Result};
use crate::inr::Mlp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneSpec {
    sparsity: f64,
}

impl PruneSpec {
    pub fn new(sparsity: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sparsity) {
            return Err(Error::Config(format!(
                "sparsity must lie in [0, 1], got {sparsity}"
            )));
        }
        Ok(Self { sparsity })
    }

    pub fn sparsity(&self) -> f64 {
        self.sparsity
    }

    /// Number of weights to zero out of `total`.
    pub fn target_count(&self, total: usize) -> usize {
        // The small offset keeps e.g. 0.3 * 10 from rounding up to 4.
        ((self.sparsity * total as f64 - 1e-9).ceil().max(0.0) as usize).min(total)
    }
}

/// Global unstructured magnitude pruning over every weight matrix jointly.
///
/// Biases are never pruned. The smallest `ceil(sparsity * n)` weights by
/// magnitude are zeroed and masked; among equal magnitudes the later index is
/// pruned first.
pub fn prune_global(mlp: &Mlp, spec: PruneSpec) -> Mlp {
    let weights: Vec<usize> = mlp.weight_ranges().into_iter().flatten().collect();
    let k = spec.target_count(weights.len());
    let params = mlp.params();
    let mut order = weights;
    order.sort_by(|&a, &b| {
        params[a]
            .abs()
            .total_cmp(&params[b].abs())
            .then_with(|| b.cmp(&a))
    });
    let mut keep = vec![true; params.len()];
    for &i in &order[..k] {
        keep[i] = false;
    }
    let mut pruned = mlp.clone();
    pruned
        .set_prune_mask(keep)
        .expect("mask built from the same parameter vector");
    pruned
}

/// Fraction of weight entries that are exactly zero.
pub fn weight_sparsity(mlp: &Mlp) -> f64 {
    let idx: Vec<usize> = mlp.weight_ranges().into_iter().flatten().collect();
    let zeros = idx.iter().filter(|&&i| mlp.params()[i] == 0.0).count();
    zeros as f64 / idx.len() as f64
}
