//! Full-batch training of the mask and depth networks.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::projection::{DepthDataset, MaskDataset, PatchGrid, ProjectionParams};

use super::loss::LossKind;
use super::mlp::{Mlp, MlpArchitecture};
use super::optim::{adam_step, AdamConfig, AdamState, LrSchedule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub adam: AdamConfig,
    pub schedule: LrSchedule,
    pub seed: u64,
}

impl TrainConfig {
    /// Constant 1e-3, the mask network default.
    pub fn mask_default(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            adam: AdamConfig::default(),
            schedule: LrSchedule::Constant { lr: 1e-3 },
            seed,
        }
    }

    /// Cosine decay from 1e-4 to 1e-12 after a warmup of a tenth of the run.
    pub fn depth_default(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            adam: AdamConfig::default(),
            schedule: LrSchedule::CosineWarmup {
                lr0: 1e-4,
                warmup_epochs: epochs / 10,
                lr_min: 1e-12,
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !self.schedule.validate() {
            return Err(Error::Config(format!(
                "invalid learning-rate schedule {:?}",
                self.schedule
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub initial_loss: f64,
    /// Loss of the returned parameters.
    pub best_loss: f64,
    pub epochs: usize,
}

/// Runs `cfg.epochs` full-batch Adam steps and leaves `mlp` at the
/// parameters with the lowest observed loss.
pub fn fit(
    mlp: &mut Mlp,
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView1<'_, f64>,
    loss: LossKind,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if inputs.nrows() == 0 {
        return Err(Error::DegenerateInput("training set is empty".into()));
    }
    let mut state = AdamState::new(mlp.params().len());
    let mut best_loss = f64::INFINITY;
    let mut best_params = mlp.params().to_vec();
    let mut initial_loss = f64::NAN;
    for epoch in 0..cfg.epochs {
        let (l, grads) = mlp.backward(inputs, targets, loss);
        if epoch == 0 {
            initial_loss = l;
        }
        if l < best_loss {
            best_loss = l;
            best_params.copy_from_slice(mlp.params());
        }
        let lr = cfg.schedule.lr_at(epoch, cfg.epochs);
        adam_step(mlp, &grads, &mut state, lr, &cfg.adam);
    }
    let last = mlp.loss(inputs, targets, loss);
    if last < best_loss {
        best_loss = last;
    } else {
        mlp.params_mut().copy_from_slice(&best_params);
    }
    Ok(TrainReport {
        initial_loss,
        best_loss,
        epochs: cfg.epochs,
    })
}

/// Maps an integer index in `0..extent` onto `[-1, 1]`.
pub fn normalize_index(index: usize, extent: usize) -> f64 {
    if extent <= 1 {
        0.0
    } else {
        2.0 * index as f64 / (extent - 1) as f64 - 1.0
    }
}

/// Affine depth normalization to `[0, 1]`. Bounds are `f32` values so they
/// survive the bitstream header exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationSpec {
    pub d_min: f64,
    pub d_max: f64,
}

impl NormalizationSpec {
    pub fn new(d_min: f64, d_max: f64) -> Result<Self> {
        if !(d_min.is_finite() && d_max.is_finite() && d_max > d_min) {
            return Err(Error::Config(format!(
                "need finite d_max > d_min, got {d_min}..{d_max}"
            )));
        }
        Ok(Self { d_min, d_max })
    }

    /// Bounds enclosing every depth in the dataset. A constant image gets a
    /// unit-wide range starting at its depth.
    pub fn from_dataset(ds: &DepthDataset) -> Result<Self> {
        if ds.samples.is_empty() {
            return Err(Error::DegenerateInput("depth dataset is empty".into()));
        }
        let (lo, hi) = ds
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.depth), hi.max(s.depth))
            });
        let lo32 = lo as f32;
        let d_min = if lo32 as f64 > lo {
            lo32.next_down()
        } else {
            lo32
        } as f64;
        let hi32 = hi as f32;
        let mut d_max = if (hi32 as f64) < hi {
            hi32.next_up()
        } else {
            hi32
        } as f64;
        if d_max <= d_min {
            d_max = (d_min + 1.0) as f32 as f64;
        }
        Self::new(d_min, d_max)
    }

    pub fn normalize(&self, depth: f64) -> f64 {
        (depth - self.d_min) / (self.d_max - self.d_min)
    }

    pub fn denormalize(&self, value: f64) -> f64 {
        value * (self.d_max - self.d_min) + self.d_min
    }
}

/// Normalized `(u, v)` for every mask sample.
pub fn mask_inputs(ds: &MaskDataset) -> Array2<f64> {
    let p = &ds.params;
    let mut x = Array2::zeros((ds.samples.len(), 2));
    for (mut row, s) in x.rows_mut().into_iter().zip(&ds.samples) {
        row[0] = normalize_index(s.u, p.width);
        row[1] = normalize_index(s.v, p.height);
    }
    x
}

/// Normalized `(u, v)` for every pixel in row-major order.
pub fn mask_grid_inputs(params: &ProjectionParams) -> Array2<f64> {
    Array2::from_shape_fn((params.pixel_count(), 2), |(r, c)| {
        if c == 0 {
            normalize_index(r % params.width, params.width)
        } else {
            normalize_index(r / params.width, params.height)
        }
    })
}

fn patch_row(grid: &PatchGrid, patch: usize, iu: usize, iv: usize) -> [f64; 3] {
    [
        normalize_index(patch, grid.patch_count()),
        normalize_index(iu, grid.patch_width),
        normalize_index(iv, grid.patch_height),
    ]
}

/// Normalized `(patch, iu, iv)` for every depth sample.
pub fn depth_inputs(ds: &DepthDataset) -> Array2<f64> {
    let mut x = Array2::zeros((ds.samples.len(), 3));
    for (mut row, s) in x.rows_mut().into_iter().zip(&ds.samples) {
        let r = patch_row(&ds.grid, s.patch, s.iu, s.iv);
        row.iter_mut().zip(r).for_each(|(a, b)| *a = b);
    }
    x
}

/// Normalized `(patch, iu, iv)` for every pixel in row-major `(u, v)` order.
pub fn depth_grid_inputs(params: &ProjectionParams, grid: &PatchGrid) -> Array2<f64> {
    let mut x = Array2::zeros((params.pixel_count(), 3));
    for (r, mut row) in x.rows_mut().into_iter().enumerate() {
        let (patch, iu, iv) = grid.to_patch(r % params.width, r / params.width);
        let p = patch_row(grid, patch, iu, iv);
        row.iter_mut().zip(p).for_each(|(a, b)| *a = b);
    }
    x
}

pub fn mask_targets(ds: &MaskDataset) -> Array1<f64> {
    ds.samples.iter().map(|s| s.bit as f64).collect()
}

pub fn depth_targets(ds: &DepthDataset, norm: &NormalizationSpec) -> Array1<f64> {
    ds.samples.iter().map(|s| norm.normalize(s.depth)).collect()
}

pub fn mask_loss(ds: &MaskDataset) -> LossKind {
    LossKind::Bce {
        normalizer: ds.samples.len() as f64,
    }
}

pub fn depth_loss(ds: &DepthDataset) -> LossKind {
    LossKind::Mse {
        normalizer: ds.params.pixel_count() as f64,
    }
}

/// Network inputs, targets and loss for one of the two datasets.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub inputs: Array2<f64>,
    pub targets: Array1<f64>,
    pub loss: LossKind,
}

impl TrainingSet {
    pub fn mask(ds: &MaskDataset) -> Self {
        Self {
            inputs: mask_inputs(ds),
            targets: mask_targets(ds),
            loss: mask_loss(ds),
        }
    }

    pub fn depth(ds: &DepthDataset, norm: &NormalizationSpec) -> Self {
        Self {
            inputs: depth_inputs(ds),
            targets: depth_targets(ds, norm),
            loss: depth_loss(ds),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn fit(&self, mlp: &mut Mlp, cfg: &TrainConfig) -> Result<TrainReport> {
        fit(mlp, self.inputs.view(), self.targets.view(), self.loss, cfg)
    }

    pub fn loss_of(&self, mlp: &Mlp) -> f64 {
        mlp.loss(self.inputs.view(), self.targets.view(), self.loss)
    }
}

/// Overfits a fresh sigmoid network to the occupancy mask.
pub fn train_mask_inr(
    ds: &MaskDataset,
    arch: MlpArchitecture,
    cfg: &TrainConfig,
) -> Result<(Mlp, TrainReport)> {
    if ds.samples.is_empty() {
        return Err(Error::DegenerateInput("mask dataset is empty".into()));
    }
    let mut mlp = Mlp::new(arch, cfg.seed)?;
    let report = TrainingSet::mask(ds).fit(&mut mlp, cfg)?;
    Ok((mlp, report))
}

/// Overfits a fresh identity-head network to the normalized depths.
pub fn train_depth_inr(
    ds: &DepthDataset,
    arch: MlpArchitecture,
    cfg: &TrainConfig,
    norm: &NormalizationSpec,
) -> Result<(Mlp, TrainReport)> {
    if ds.samples.is_empty() {
        return Err(Error::DegenerateInput("depth dataset is empty".into()));
    }
    let mut mlp = Mlp::new(arch, cfg.seed)?;
    let report = TrainingSet::depth(ds, norm).fit(&mut mlp, cfg)?;
    Ok((mlp, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{make_datasets, split, RangeImage};

    #[test]
    fn index_normalization_endpoints() {
        assert_eq!(normalize_index(0, 1024), -1.0);
        assert_eq!(normalize_index(1023, 1024), 1.0);
        assert_eq!(normalize_index(0, 1), 0.0);
    }

    #[test]
    fn grid_inputs_match_dataset_inputs() {
        let params = ProjectionParams::new(16, 8, 0.1, -0.3, -1.0).unwrap();
        let pixels: Vec<f64> = (0..128)
            .map(|i| if i % 3 == 0 { -1.0 } else { 1.0 + i as f64 })
            .collect();
        let ri = RangeImage::from_pixels(params, pixels).unwrap();
        let (mask, depth) = split(&ri, 4).unwrap();
        let (dm, dd) = make_datasets(&mask, &depth).unwrap();

        let grid_in = mask_grid_inputs(&params);
        assert_eq!(mask_inputs(&dm), grid_in);

        let all = depth_grid_inputs(&params, depth.grid());
        let sub = depth_inputs(&dd);
        for (k, s) in dd.samples.iter().enumerate() {
            let (u, v) = depth.grid().from_patch(s.patch, s.iu, s.iv);
            assert_eq!(all.row(v * 16 + u), sub.row(k));
        }
    }

    #[test]
    fn constant_depth_normalization() {
        let params = ProjectionParams::new(4, 4, 0.1, -0.3, -1.0).unwrap();
        let ri = RangeImage::from_pixels(params, vec![7.0; 16]).unwrap();
        let (mask, depth) = split(&ri, 2).unwrap();
        let (_, dd) = make_datasets(&mask, &depth).unwrap();
        let n = NormalizationSpec::from_dataset(&dd).unwrap();
        assert_eq!((n.d_min, n.d_max), (7.0, 8.0));
        assert_eq!(n.denormalize(n.normalize(7.5)), 7.5);
    }

    #[test]
    fn all_ones_mask_fits_quickly() {
        let params = ProjectionParams::new(16, 8, 0.1, -0.3, -1.0).unwrap();
        let ri = RangeImage::from_pixels(params, vec![3.0; 128]).unwrap();
        let (mask, depth) = split(&ri, 4).unwrap();
        let (dm, _) = make_datasets(&mask, &depth).unwrap();
        let (mlp, _) = train_mask_inr(
            &dm,
            MlpArchitecture::mask(2, 8),
            &TrainConfig::mask_default(100, 1),
        )
        .unwrap();
        let preds = mlp.predict(mask_inputs(&dm).view());
        assert!(preds.iter().all(|&p| p >= 0.5));
    }
}
