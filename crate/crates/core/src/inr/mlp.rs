use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::loss::LossKind;

/// Rows per work item when a batch is split for forward/backward passes.
/// Partial results are always reduced in chunk order, so the result does not
/// depend on how many threads ran the chunks.
pub const CHUNK_ROWS: usize = 2048;

pub const DEFAULT_OMEGA0: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Sigmoid,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    /// Number of sine-activated hidden layers.
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output: OutputActivation,
    /// Frequency applied to the first layer's pre-activation.
    pub omega0: f64,
}

impl MlpArchitecture {
    /// Pixel-wise occupancy network: `(u, v)` to a probability.
    pub fn mask(hidden_layers: usize, hidden_width: usize) -> Self {
        Self {
            input_dim: 2,
            hidden_layers,
            hidden_width,
            output: OutputActivation::Sigmoid,
            omega0: DEFAULT_OMEGA0,
        }
    }

    /// Patch-wise depth network: `(patch, in-patch u, in-patch v)` to a depth.
    pub fn depth(hidden_layers: usize, hidden_width: usize) -> Self {
        Self {
            input_dim: 3,
            hidden_layers,
            hidden_width,
            output: OutputActivation::Identity,
            omega0: DEFAULT_OMEGA0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(Error::Config(format!(
                "architecture needs positive input_dim, L and V, got {}/{}/{}",
                self.input_dim, self.hidden_layers, self.hidden_width
            )));
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(Error::Config(format!(
                "omega0 must be positive, got {}",
                self.omega0
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every linear layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let v = self.hidden_width;
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        dims.push((self.input_dim, v));
        dims.extend(std::iter::repeat_n((v, v), self.hidden_layers - 1));
        dims.push((v, 1));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| i * o + o).sum()
    }

    /// Start offset of each layer inside the flat parameter vector, plus the
    /// total length as the final entry.
    pub fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = vec![0];
        for (i, o) in self.layer_dims() {
            offsets.push(offsets.last().unwrap() + i * o + o);
        }
        offsets
    }
}

/// Fully connected sine network.
///
/// Parameters live in one flat vector; each layer contributes its weight
/// matrix (`fan_out x fan_in`, row-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    arch: MlpArchitecture,
    params: Vec<f64>,
    /// `true` keeps a parameter, `false` pins it at zero.
    prune_mask: Option<Vec<bool>>,
}

/// Per-parameter partial derivatives in the same flat layout as [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl Mlp {
    /// Uniform init in `±sqrt(6 / fan_in) / scale`, with `scale = omega0` for
    /// the first layer and 1 elsewhere. Biases start at zero.
    pub fn new(arch: MlpArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(arch.param_count());
        for (k, (fan_in, fan_out)) in arch.layer_dims().into_iter().enumerate() {
            let scale = if k == 0 { arch.omega0 } else { 1.0 };
            let bound = (6.0 / fan_in as f64).sqrt() / scale;
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            arch,
            params,
            prune_mask: None,
        })
    }

    pub fn from_params(arch: MlpArchitecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::Config(format!(
                "architecture needs {} parameters, got {}",
                arch.param_count(),
                params.len()
            )));
        }
        Ok(Self {
            arch,
            params,
            prune_mask: None,
        })
    }

    pub fn arch(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn prune_mask(&self) -> Option<&[bool]> {
        self.prune_mask.as_deref()
    }

    /// Installs a keep-mask and zeroes every parameter it drops.
    pub fn set_prune_mask(&mut self, mask: Vec<bool>) -> Result<()> {
        if mask.len() != self.params.len() {
            return Err(Error::Config(
                "prune mask length differs from parameter count".into(),
            ));
        }
        for (p, &keep) in self.params.iter_mut().zip(&mask) {
            if !keep {
                *p = 0.0;
            }
        }
        self.prune_mask = Some(mask);
        Ok(())
    }

    pub fn clear_prune_mask(&mut self) {
        self.prune_mask = None;
    }

    /// Indices of the weight (not bias) entries in the flat vector.
    pub fn weight_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let offsets = self.arch.layer_offsets();
        self.arch
            .layer_dims()
            .iter()
            .enumerate()
            .map(|(k, &(i, o))| offsets[k]..offsets[k] + i * o)
            .collect()
    }

    fn layer(&self, k: usize, offsets: &[usize]) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (fan_in, fan_out) = self.arch.layer_dims()[k];
        let start = offsets[k];
        let split = start + fan_in * fan_out;
        let w = ArrayView2::from_shape((fan_out, fan_in), &self.params[start..split])
            .expect("layer shape matches offsets");
        let b = ArrayView1::from(&self.params[split..offsets[k + 1]]);
        (w, b)
    }

    /// Evaluates one input vector.
    pub fn forward(&self, input: &[f64]) -> f64 {
        assert_eq!(
            input.len(),
            self.arch.input_dim,
            "input has {} values, network expects {}",
            input.len(),
            self.arch.input_dim
        );
        let offsets = self.arch.layer_offsets();
        let n_layers = self.arch.hidden_layers + 1;
        let mut h = input.to_vec();
        for k in 0..n_layers {
            let (w, b) = self.layer(k, &offsets);
            let mut z: Vec<f64> = w
                .outer_iter()
                .zip(b.iter())
                .map(|(row, &bias)| row.iter().zip(&h).map(|(a, x)| a * x).sum::<f64>() + bias)
                .collect();
            if k == 0 {
                z.iter_mut()
                    .for_each(|x| *x = (self.arch.omega0 * *x).sin());
            } else if k + 1 < n_layers {
                z.iter_mut().for_each(|x| *x = x.sin());
            }
            h = z;
        }
        self.head(h[0])
    }

    fn head(&self, x: f64) -> f64 {
        match self.arch.output {
            OutputActivation::Sigmoid => sigmoid(x),
            OutputActivation::Identity => x,
        }
    }

    /// Evaluates every row of `inputs`.
    pub fn predict(&self, inputs: ArrayView2<'_, f64>) -> Array1<f64> {
        assert_eq!(inputs.ncols(), self.arch.input_dim);
        let offsets = self.arch.layer_offsets();
        let n = inputs.nrows();
        let parts: Vec<Array1<f64>> = (0..n.div_ceil(CHUNK_ROWS))
            .into_par_iter()
            .map(|c| {
                let rows = inputs.slice(s![c * CHUNK_ROWS..n.min((c + 1) * CHUNK_ROWS), ..]);
                let trace = self.trace(rows, &offsets);
                trace.output.mapv(|x| self.head(x))
            })
            .collect();
        let mut out = Array1::zeros(n);
        for (c, part) in parts.into_iter().enumerate() {
            out.slice_mut(s![c * CHUNK_ROWS..c * CHUNK_ROWS + part.len()])
                .assign(&part);
        }
        out
    }

    /// Forward pass keeping every scaled pre-activation and activation.
    fn trace(&self, inputs: ArrayView2<'_, f64>, offsets: &[usize]) -> Trace {
        let n_hidden = self.arch.hidden_layers;
        let mut pre = Vec::with_capacity(n_hidden);
        let mut act: Vec<Array2<f64>> = Vec::with_capacity(n_hidden);
        for k in 0..n_hidden {
            let (w, b) = self.layer(k, offsets);
            let input = if k == 0 { inputs } else { act[k - 1].view() };
            let mut z = input.dot(&w.t());
            z += &b;
            if k == 0 {
                z *= self.arch.omega0;
            }
            act.push(z.mapv(f64::sin));
            pre.push(z);
        }
        let (w, b) = self.layer(n_hidden, offsets);
        let output = act[n_hidden - 1].dot(&w.row(0)) + b[0];
        Trace { pre, act, output }
    }

    /// Loss of the whole batch and its exact gradient.
    ///
    /// For the sigmoid head the output gradient is taken in logit form,
    /// `(p - t) / N`, which is the derivative of the BCE loss wherever the
    /// probability clip is inactive.
    pub fn backward(
        &self,
        inputs: ArrayView2<'_, f64>,
        targets: ArrayView1<'_, f64>,
        loss: LossKind,
    ) -> (f64, Gradients) {
        assert!(inputs.nrows() > 0, "backward needs a nonempty batch");
        assert_eq!(inputs.nrows(), targets.len());
        assert_eq!(inputs.ncols(), self.arch.input_dim);
        let offsets = self.arch.layer_offsets();
        let n = inputs.nrows();
        let parts: Vec<(f64, Vec<f64>)> = (0..n.div_ceil(CHUNK_ROWS))
            .into_par_iter()
            .map(|c| {
                let range = c * CHUNK_ROWS..n.min((c + 1) * CHUNK_ROWS);
                self.chunk_backward(
                    inputs.slice(s![range.clone(), ..]),
                    targets.slice(s![range]),
                    loss,
                    &offsets,
                )
            })
            .collect();

        let mut total = 0.0;
        let mut grads = vec![0.0; self.params.len()];
        for (l, g) in parts {
            total += l;
            grads.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        if let Some(mask) = &self.prune_mask {
            for (g, &keep) in grads.iter_mut().zip(mask) {
                if !keep {
                    *g = 0.0;
                }
            }
        }
        (total, Gradients { values: grads })
    }

    fn chunk_backward(
        &self,
        inputs: ArrayView2<'_, f64>,
        targets: ArrayView1<'_, f64>,
        loss: LossKind,
        offsets: &[usize],
    ) -> (f64, Vec<f64>) {
        let n_hidden = self.arch.hidden_layers;
        let trace = self.trace(inputs, offsets);
        let preds = trace.output.mapv(|x| self.head(x));
        let loss_sum = loss.partial_sum(preds.view(), targets);
        let mut delta = loss
            .output_gradient(preds.view(), targets)
            .insert_axis(Axis(1));

        let mut grads = vec![0.0; self.params.len()];
        for k in (0..=n_hidden).rev() {
            let (fan_in, fan_out) = self.arch.layer_dims()[k];
            let start = offsets[k];
            let split = start + fan_in * fan_out;
            let input = if k == 0 {
                inputs
            } else {
                trace.act[k - 1].view()
            };
            let gw = delta.t().dot(&input);
            grads[start..split].copy_from_slice(gw.as_slice().expect("standard layout"));
            for (slot, col) in grads[split..offsets[k + 1]].iter_mut().zip(delta.columns()) {
                *slot = col.sum();
            }
            if k > 0 {
                let (w, _) = self.layer(k, offsets);
                let mut back = delta.dot(&w);
                let scale = if k == 1 { self.arch.omega0 } else { 1.0 };
                ndarray::Zip::from(&mut back)
                    .and(&trace.pre[k - 1])
                    .for_each(|g, &z| *g *= scale * z.cos());
                delta = back;
            }
        }
        (loss_sum, grads)
    }

    /// Loss of the batch without gradients.
    pub fn loss(
        &self,
        inputs: ArrayView2<'_, f64>,
        targets: ArrayView1<'_, f64>,
        loss: LossKind,
    ) -> f64 {
        let preds = self.predict(inputs);
        loss.partial_sum(preds.view(), targets)
    }
}

struct Trace {
    /// Scaled pre-activations of each hidden layer.
    pre: Vec<Array2<f64>>,
    act: Vec<Array2<f64>>,
    /// Output pre-activation (before the head).
    output: Array1<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_matches_shape_arithmetic() {
        assert_eq!(MlpArchitecture::depth(6, 40).param_count(), 8401);
        for (d, l, v) in [(2, 1, 1), (2, 6, 10), (3, 3, 8), (3, 6, 45)] {
            let arch = MlpArchitecture {
                input_dim: d,
                ..MlpArchitecture::depth(l, v)
            };
            assert_eq!(
                arch.param_count(),
                d * v + v + (l - 1) * (v * v + v) + v + 1
            );
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let arch = MlpArchitecture::depth(6, 40);
        let a = Mlp::new(arch, 7).unwrap();
        let b = Mlp::new(arch, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Mlp::new(arch, 8).unwrap());

        let bound = (6.0f64 / 3.0).sqrt() / 30.0;
        assert!(a.params()[..120].iter().all(|w| w.abs() <= bound));
        assert!(a.params()[120..160].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_network_outputs() {
        let arch = MlpArchitecture::mask(3, 5);
        let zero = Mlp::from_params(arch, vec![0.0; arch.param_count()]).unwrap();
        assert_eq!(zero.forward(&[0.3, -0.8]), 0.5);
        let arch = MlpArchitecture::depth(3, 5);
        let zero = Mlp::from_params(arch, vec![0.0; arch.param_count()]).unwrap();
        assert_eq!(zero.forward(&[0.3, -0.8, 1.0]), 0.0);
    }

    #[test]
    #[should_panic]
    fn forward_rejects_wrong_arity() {
        Mlp::new(MlpArchitecture::mask(2, 4), 0)
            .unwrap()
            .forward(&[1.0, 2.0, 3.0]);
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let mlp = Mlp::new(MlpArchitecture::depth(4, 12), 3).unwrap();
        let inputs = Array2::from_shape_fn((5000, 3), |(r, c)| {
            ((r * 7 + c * 13) % 101) as f64 / 50.0 - 1.0
        });
        let batch = mlp.predict(inputs.view());
        for r in (0..5000).step_by(97) {
            let single = mlp.forward(inputs.row(r).as_slice().unwrap());
            assert!((single - batch[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn fully_pruned_gradients_vanish() {
        let mut mlp = Mlp::new(MlpArchitecture::depth(2, 8), 1).unwrap();
        let n = mlp.params().len();
        mlp.set_prune_mask(vec![false; n]).unwrap();
        let inputs = Array2::from_elem((10, 3), 0.25);
        let targets = Array1::from_elem(10, 0.7);
        let (_, g) = mlp.backward(
            inputs.view(),
            targets.view(),
            LossKind::Mse { normalizer: 10.0 },
        );
        assert!(g.values.iter().all(|&x| x == 0.0));
    }
}
