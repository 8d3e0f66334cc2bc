//! Encoder settings gathered from a `key=value` file and command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use rinc::codec::EncodeConfig;
use rinc::inr::MlpArchitecture;

/// Encoder flags. Every flag can also be set in a `--config` file under the
/// same name without the leading dashes; flags win over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct EncodeFlags {
    /// Flat `key=value` file with default settings.
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Patch grid factor of the depth network.
    #[arg(long)]
    pub np: Option<usize>,
    #[arg(long)]
    pub mask_v: Option<usize>,
    #[arg(long)]
    pub depth_v: Option<usize>,
    /// Hidden layers of both networks.
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub sparsity_mask: Option<f64>,
    #[arg(long)]
    pub sparsity_depth: Option<f64>,
    #[arg(long)]
    pub nb_mask: Option<u8>,
    #[arg(long)]
    pub nb_depth: Option<u8>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho_null: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi_up: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi_down: Option<f64>,
}

/// Fully merged settings; `None` falls back to the encoder default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub np: Option<usize>,
    pub mask_v: Option<usize>,
    pub depth_v: Option<usize>,
    pub layers: Option<usize>,
    pub epochs: Option<usize>,
    pub sparsity_mask: Option<f64>,
    pub sparsity_depth: Option<f64>,
    pub nb_mask: Option<u8>,
    pub nb_depth: Option<u8>,
    pub seed: Option<u64>,
    pub rho_null: Option<f64>,
    pub phi_up: Option<f64>,
    pub phi_down: Option<f64>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    let v = value
        .parse()
        .with_context(|| format!("invalid value {value:?} for {key}"))?;
    Ok(Some(v))
}

impl Settings {
    /// Sets one field from its flag name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "width" => self.width = parse(key, value)?,
            "height" => self.height = parse(key, value)?,
            "np" => self.np = parse(key, value)?,
            "mask-v" => self.mask_v = parse(key, value)?,
            "depth-v" => self.depth_v = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "sparsity-mask" => self.sparsity_mask = parse(key, value)?,
            "sparsity-depth" => self.sparsity_depth = parse(key, value)?,
            "nb-mask" => self.nb_mask = parse(key, value)?,
            "nb-depth" => self.nb_depth = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "rho-null" => self.rho_null = parse(key, value)?,
            "phi-up" => self.phi_up = parse(key, value)?,
            "phi-down" => self.phi_down = parse(key, value)?,
            _ => bail!("unknown setting {key:?}"),
        }
        Ok(())
    }

    /// Applies whitespace-separated `key=value` pairs.
    pub fn set_pairs(&mut self, line: &str) -> Result<()> {
        for pair in line.split_whitespace() {
            let (k, v) = pair
                .split_once('=')
                .with_context(|| format!("expected key=value, got {pair:?}"))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Reads a file of `key=value` lines; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut s = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
            s.set(k.trim(), v.trim())
                .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(s)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &Settings) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            width,
            height,
            np,
            mask_v,
            depth_v,
            layers,
            epochs,
            sparsity_mask,
            sparsity_depth,
            nb_mask,
            nb_depth,
            seed,
            rho_null,
            phi_up,
            phi_down
        );
    }

    pub fn from_flags(flags: &EncodeFlags) -> Result<Self> {
        let mut s = match &flags.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        s.overlay(&Settings {
            width: flags.width,
            height: flags.height,
            np: flags.np,
            mask_v: flags.mask_v,
            depth_v: flags.depth_v,
            layers: flags.layers,
            epochs: flags.epochs,
            sparsity_mask: flags.sparsity_mask,
            sparsity_depth: flags.sparsity_depth,
            nb_mask: flags.nb_mask,
            nb_depth: flags.nb_depth,
            seed: flags.seed,
            rho_null: flags.rho_null,
            phi_up: flags.phi_up,
            phi_down: flags.phi_down,
        });
        Ok(s)
    }

    /// Builds and validates the encoder configuration.
    pub fn encode_config(&self) -> Result<EncodeConfig> {
        let base = EncodeConfig::default();
        let epochs = self.epochs.unwrap_or(base.mask_train.epochs);
        let mut cfg = EncodeConfig::new(
            self.mask_v.unwrap_or(base.mask_arch.hidden_width),
            self.depth_v.unwrap_or(base.depth_arch.hidden_width),
            epochs,
            self.seed.unwrap_or(0),
        );
        if let Some(layers) = self.layers {
            cfg.mask_arch = MlpArchitecture::mask(layers, cfg.mask_arch.hidden_width);
            cfg.depth_arch = MlpArchitecture::depth(layers, cfg.depth_arch.hidden_width);
        }
        cfg.width = self.width.unwrap_or(cfg.width);
        cfg.height = self.height.unwrap_or(cfg.height);
        cfg.patch_factor = self.np.unwrap_or(cfg.patch_factor);
        cfg.rho_null = self.rho_null.unwrap_or(cfg.rho_null);
        cfg.mask_sparsity = self.sparsity_mask.unwrap_or(cfg.mask_sparsity);
        cfg.depth_sparsity = self.sparsity_depth.unwrap_or(cfg.depth_sparsity);
        cfg.mask_bits = self.nb_mask.unwrap_or(cfg.mask_bits);
        cfg.depth_bits = self.nb_depth.unwrap_or(cfg.depth_bits);
        cfg.phi_bounds = match (self.phi_up, self.phi_down) {
            (Some(up), Some(down)) => Some((up, down)),
            (None, None) => None,
            _ => bail!("phi-up and phi-down must be given together"),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
