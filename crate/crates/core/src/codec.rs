//! End-to-end encoder and decoder.
//!
//! Encoding projects the cloud, trains the mask and depth networks (in
//! parallel, each with its own seed), prunes and fine-tunes them, quantizes
//! the weights and writes the `.rinc` container. Decoding needs nothing but
//! the stream.

use std::time::{Duration, Instant};

use crate::compress::{
    deserialize_model, prune_global, serialize_model, ModelBitstream, PruneSpec, QuantizedModel,
    StreamHeader,
};
use crate::error::{Error, Result};
use crate::inr::{
    depth_grid_inputs, mask_grid_inputs, train_depth_inr, train_mask_inr, LrSchedule, Mlp,
    MlpArchitecture, NormalizationSpec, TrainConfig, TrainReport, TrainingSet,
};
use crate::pointcloud::PointCloud;
use crate::projection::{
    make_datasets, project, split, unproject, MaskImage, PatchGrid, ProjectionParams, RangeImage,
};

/// Smallest and largest weight bit depth accepted by the encoder.
pub const MIN_ENCODE_BITS: u8 = 4;
pub const MAX_ENCODE_BITS: u8 = 32;

/// Mask probability at or above which a pixel is decoded as occupied.
pub const MASK_THRESHOLD: f64 = 0.5;

/// Hidden widths evaluated for the two networks.
pub const MASK_WIDTHS: [usize; 8] = [10, 19, 24, 28, 31, 34, 37, 40];
pub const DEPTH_WIDTHS: [usize; 7] = [28, 31, 34, 37, 40, 42, 45];

/// Post-pruning retraining budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineTuneConfig {
    pub epochs: usize,
    pub lr: f64,
}

impl FineTuneConfig {
    /// A tenth of the main training run at a constant 1e-4.
    pub fn for_epochs(main_epochs: usize) -> Self {
        Self {
            epochs: main_epochs / 10,
            lr: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeConfig {
    pub width: usize,
    pub height: usize,
    /// Elevation bounds; fitted to the cloud when `None`.
    pub phi_bounds: Option<(f64, f64)>,
    pub rho_null: f64,
    pub patch_factor: usize,
    pub mask_arch: MlpArchitecture,
    pub depth_arch: MlpArchitecture,
    pub mask_train: TrainConfig,
    pub depth_train: TrainConfig,
    pub fine_tune: FineTuneConfig,
    pub mask_sparsity: f64,
    pub depth_sparsity: f64,
    pub mask_bits: u8,
    pub depth_bits: u8,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self::new(40, 40, 3000, 0)
    }
}

impl EncodeConfig {
    /// Six hidden layers per network, a 1024x64 grid, 16x16 patches, no
    /// pruning and 8-bit weights. The depth network trains with `seed + 1`.
    pub fn new(mask_width: usize, depth_width: usize, epochs: usize, seed: u64) -> Self {
        Self {
            width: 1024,
            height: 64,
            phi_bounds: None,
            rho_null: -1.0,
            patch_factor: 16,
            mask_arch: MlpArchitecture::mask(6, mask_width),
            depth_arch: MlpArchitecture::depth(6, depth_width),
            mask_train: TrainConfig::mask_default(epochs, seed),
            depth_train: TrainConfig::depth_default(epochs, seed.wrapping_add(1)),
            fine_tune: FineTuneConfig::for_epochs(epochs),
            mask_sparsity: 0.0,
            depth_sparsity: 0.0,
            mask_bits: 8,
            depth_bits: 8,
        }
    }

    /// Resets both training runs and the fine-tune budget to `epochs`.
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.mask_train.epochs = epochs;
        self.depth_train.epochs = epochs;
        if let LrSchedule::CosineWarmup { warmup_epochs, .. } = &mut self.depth_train.schedule {
            *warmup_epochs = epochs / 10;
        }
        self.fine_tune = FineTuneConfig::for_epochs(epochs);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.mask_train.seed = seed;
        self.depth_train.seed = seed.wrapping_add(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width > u16::MAX as usize || self.height > u16::MAX as usize {
            return Err(Error::Config(format!(
                "image size {}x{} exceeds the stream limit of {}",
                self.width,
                self.height,
                u16::MAX
            )));
        }
        if self.patch_factor > u8::MAX as usize {
            return Err(Error::Config(format!(
                "patch factor {} exceeds 255",
                self.patch_factor
            )));
        }
        if let Some((up, down)) = self.phi_bounds {
            ProjectionParams::new(self.width, self.height, up, down, self.rho_null)?;
        } else if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        if !self.rho_null.is_finite() || self.rho_null > 0.0 {
            return Err(Error::Config(format!(
                "rho_null must be finite and <= 0, got {}",
                self.rho_null
            )));
        }
        if self.patch_factor == 0
            || self.width % self.patch_factor != 0
            || self.height % self.patch_factor != 0
        {
            return Err(Error::Config(format!(
                "patch factor {} must divide {}x{}",
                self.patch_factor, self.width, self.height
            )));
        }
        for (name, arch) in [("mask", &self.mask_arch), ("depth", &self.depth_arch)] {
            arch.validate()?;
            if arch.hidden_layers > u8::MAX as usize || arch.hidden_width > u16::MAX as usize {
                return Err(Error::Config(format!(
                    "{name} architecture does not fit the stream fields"
                )));
            }
        }
        self.mask_train.validate()?;
        self.depth_train.validate()?;
        if !(self.fine_tune.lr.is_finite() && self.fine_tune.lr >= 0.0) {
            return Err(Error::Config(format!(
                "fine-tune lr must be >= 0, got {}",
                self.fine_tune.lr
            )));
        }
        PruneSpec::new(self.mask_sparsity)?;
        PruneSpec::new(self.depth_sparsity)?;
        for bits in [self.mask_bits, self.depth_bits] {
            if !(MIN_ENCODE_BITS..=MAX_ENCODE_BITS).contains(&bits) {
                return Err(Error::Config(format!(
                    "bit depth must be {MIN_ENCODE_BITS}..={MAX_ENCODE_BITS}, got {bits}"
                )));
            }
        }
        Ok(())
    }

    fn projection_params(&self, cloud: &PointCloud) -> Result<ProjectionParams> {
        match self.phi_bounds {
            // The header stores f32, so project with exactly what the decoder will see.
            Some((up, down)) => ProjectionParams::new(
                self.width,
                self.height,
                up as f32 as f64,
                down as f32 as f64,
                self.rho_null as f32 as f64,
            ),
            None => {
                ProjectionParams::fit(cloud, self.width, self.height, self.rho_null as f32 as f64)
            }
        }
    }
}

/// Training summary of one network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkReport {
    pub train: TrainReport,
    /// Loss right after pruning, before fine-tuning.
    pub pruned_loss: f64,
    /// Loss of the fine-tuned network.
    pub fine_tuned_loss: f64,
    /// Loss after quantization, the network the decoder will run.
    pub quantized_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeReport {
    pub params: ProjectionParams,
    pub original_points: usize,
    pub occupied_pixels: usize,
    pub mask: NetworkReport,
    pub depth: NetworkReport,
    pub stream_bits: u64,
    pub bpp: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOutput {
    pub bytes: Vec<u8>,
    pub stream: ModelBitstream,
    pub report: EncodeReport,
}

/// Retrains a pruned network with its pruned weights held at zero, keeping
/// the lowest-loss parameters seen (the starting point included).
pub fn fine_tune(
    mlp: &Mlp,
    data: &TrainingSet,
    cfg: &FineTuneConfig,
    seed: u64,
) -> Result<(Mlp, TrainReport)> {
    if mlp.prune_mask().is_none() {
        return Err(Error::Config("fine-tuning needs a pruned network".into()));
    }
    let mut out = mlp.clone();
    if cfg.epochs == 0 {
        let l = data.loss_of(&out);
        return Ok((
            out,
            TrainReport {
                initial_loss: l,
                best_loss: l,
                epochs: 0,
            },
        ));
    }
    let train = TrainConfig {
        epochs: cfg.epochs,
        adam: Default::default(),
        schedule: LrSchedule::Constant { lr: cfg.lr },
        seed,
    };
    let report = data.fit(&mut out, &train)?;
    Ok((out, report))
}

fn compress_network(
    trained: Mlp,
    train: TrainReport,
    data: &TrainingSet,
    sparsity: f64,
    bits: u8,
    cfg: &EncodeConfig,
    seed: u64,
) -> Result<(QuantizedModel, NetworkReport)> {
    let pruned = prune_global(&trained, PruneSpec::new(sparsity)?);
    let pruned_loss = data.loss_of(&pruned);
    let (tuned, ft) = fine_tune(&pruned, data, &cfg.fine_tune, seed)?;
    let quantized = QuantizedModel::from_mlp(&tuned, bits)?;
    let quantized_loss = data.loss_of(&quantized.to_mlp()?);
    Ok((
        quantized,
        NetworkReport {
            train,
            pruned_loss,
            fine_tuned_loss: ft.best_loss,
            quantized_loss,
        },
    ))
}

/// Compresses `cloud` into a `.rinc` stream.
pub fn encode(cloud: &PointCloud, cfg: &EncodeConfig) -> Result<EncodeOutput> {
    let start = Instant::now();
    cfg.validate()?;
    if cloud.is_empty() {
        return Err(Error::DegenerateInput(
            "cannot encode an empty cloud".into(),
        ));
    }
    let params = cfg.projection_params(cloud)?;
    let image = project(cloud, &params)?;
    let (mask, depth) = split(&image, cfg.patch_factor)?;
    let (mask_ds, depth_ds) = make_datasets(&mask, &depth)?;
    if depth_ds.samples.is_empty() {
        return Err(Error::DegenerateInput(
            "no point projected into the image".into(),
        ));
    }
    let norm = NormalizationSpec::from_dataset(&depth_ds)?;
    let mask_set = TrainingSet::mask(&mask_ds);
    let depth_set = TrainingSet::depth(&depth_ds, &norm);

    let (mask_res, depth_res) = rayon::join(
        || -> Result<_> {
            let (mlp, train) = train_mask_inr(&mask_ds, cfg.mask_arch, &cfg.mask_train)?;
            compress_network(
                mlp,
                train,
                &mask_set,
                cfg.mask_sparsity,
                cfg.mask_bits,
                cfg,
                cfg.mask_train.seed,
            )
        },
        || -> Result<_> {
            let (mlp, train) = train_depth_inr(&depth_ds, cfg.depth_arch, &cfg.depth_train, &norm)?;
            compress_network(
                mlp,
                train,
                &depth_set,
                cfg.depth_sparsity,
                cfg.depth_bits,
                cfg,
                cfg.depth_train.seed,
            )
        },
    );
    let (mask_q, mask_report) = mask_res?;
    let (depth_q, depth_report) = depth_res?;

    let header = StreamHeader {
        width: cfg.width as u16,
        height: cfg.height as u16,
        patch_factor: cfg.patch_factor as u8,
        phi_up: params.phi_up as f32,
        phi_down: params.phi_down as f32,
        rho_null: params.rho_null as f32,
        d_min: norm.d_min as f32,
        d_max: norm.d_max as f32,
    };
    let bytes = serialize_model(&mask_q, &depth_q, &header)?;
    let stream_bits = bytes.len() as u64 * 8;
    Ok(EncodeOutput {
        report: EncodeReport {
            params,
            original_points: cloud.len(),
            occupied_pixels: image.occupied_count(),
            mask: mask_report,
            depth: depth_report,
            stream_bits,
            bpp: crate::metrics::bpp(stream_bits, cloud.len())?,
            elapsed: start.elapsed(),
        },
        stream: ModelBitstream {
            header,
            mask: mask_q,
            depth: depth_q,
        },
        bytes,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DecodeTiming {
    pub parse: Duration,
    pub mask: Duration,
    pub depth: Duration,
    pub unproject: Duration,
}

impl DecodeTiming {
    pub fn total(&self) -> Duration {
        self.parse + self.mask + self.depth + self.unproject
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub range_image: RangeImage,
    pub mask: MaskImage,
    pub cloud: PointCloud,
    pub stream_bits: u64,
    pub timing: DecodeTiming,
}

/// Parses and decodes a serialized stream.
pub fn decode_bytes(bytes: &[u8]) -> Result<DecodeResult> {
    let t = Instant::now();
    let stream = deserialize_model(bytes)?;
    let parse = t.elapsed();
    let mut out = reconstruct(&stream, bytes.len() as u64 * 8)?;
    out.timing.parse = parse;
    Ok(out)
}

/// Decodes an already parsed stream.
pub fn decode(stream: &ModelBitstream) -> Result<DecodeResult> {
    let bits = serialize_model(&stream.mask, &stream.depth, &stream.header)?.len() as u64 * 8;
    reconstruct(stream, bits)
}

fn reconstruct(stream: &ModelBitstream, stream_bits: u64) -> Result<DecodeResult> {
    let h = &stream.header;
    let corrupt = |e: Error| Error::CorruptStream(e.to_string());
    let params = ProjectionParams::new(
        h.width as usize,
        h.height as usize,
        h.phi_up as f64,
        h.phi_down as f64,
        h.rho_null as f64,
    )
    .map_err(corrupt)?;
    let grid = PatchGrid::new(&params, h.patch_factor as usize).map_err(corrupt)?;
    let norm = NormalizationSpec::new(h.d_min as f64, h.d_max as f64).map_err(corrupt)?;
    let mask_net = stream.mask.to_mlp().map_err(corrupt)?;
    let depth_net = stream.depth.to_mlp().map_err(corrupt)?;
    if mask_net.arch().input_dim != 2 || depth_net.arch().input_dim != 3 {
        return Err(Error::CorruptStream(
            "network input arity does not match its role".into(),
        ));
    }

    let t = Instant::now();
    let probs = mask_net.predict(mask_grid_inputs(&params).view());
    let bits: Vec<u8> = probs.iter().map(|&p| (p >= MASK_THRESHOLD) as u8).collect();
    let mask = MaskImage::from_bits(params, bits)?;
    let mask_time = t.elapsed();

    let t = Instant::now();
    let depths = depth_net.predict(depth_grid_inputs(&params, &grid).view());
    // Clamping keeps every decoded depth inside the encoded range, hence positive.
    let pixels: Vec<f64> = depths
        .iter()
        .zip(mask.bits())
        .map(|(&d, &m)| {
            if m == 1 {
                norm.denormalize(d).clamp(norm.d_min, norm.d_max)
            } else {
                params.rho_null
            }
        })
        .collect();
    let range_image = RangeImage::from_pixels(params, pixels)?;
    let depth_time = t.elapsed();

    let t = Instant::now();
    let cloud = unproject(&range_image);
    let unproject_time = t.elapsed();

    Ok(DecodeResult {
        range_image,
        mask,
        cloud,
        stream_bits,
        timing: DecodeTiming {
            parse: Duration::ZERO,
            mask: mask_time,
            depth: depth_time,
            unproject: unproject_time,
        },
    })
}
