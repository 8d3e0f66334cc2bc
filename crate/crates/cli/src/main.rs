//! `rinc`: compress LiDAR scans with overfitted coordinate networks.
//!
//! Machine-readable CSV goes to standard output (or `-o`); progress and
//! errors go to standard error. `RINC_THREADS` caps the worker pool.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use rinc::codec::{decode_bytes, encode, EncodeConfig};
use rinc::metrics::{bd_cd, bpp, chamfer, retention_ratio, RdCurve, RdPoint};
use rinc::pointcloud::{read_cloud, write_xyz};
use rinc::projection::{project, unproject, write_range_image, ProjectionParams};
use rinc::PointCloud;

use config::{EncodeFlags, Settings};

#[derive(Parser)]
#[command(
    name = "rinc",
    version,
    about = "Range-image LiDAR codec built on overfitted sinusoidal networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project a cloud (.bin or .xyz) to a range-image dump.
    Project {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        flags: EncodeFlags,
    },
    /// Compress a cloud into a .rinc stream.
    Encode {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        flags: EncodeFlags,
    },
    /// Reconstruct a cloud from a .rinc stream as .xyz text.
    Decode {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compare a reconstruction with its original.
    Eval {
        original: PathBuf,
        reconstructed: PathBuf,
        /// Stream used for the bpp column.
        #[arg(long)]
        stream: Option<PathBuf>,
        /// Label for the frame column; defaults to the original's file stem.
        #[arg(long)]
        frame: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Encode, decode and evaluate one cloud at several rate points.
    Sweep {
        input: PathBuf,
        /// One rate point per line as `key=value` pairs overriding the flags.
        #[arg(long)]
        points: PathBuf,
        /// Sweep CSV to compare against; prints `bd_cd,<value>` with this
        /// sweep as the reference.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Rate points encoded concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        flags: EncodeFlags,
    },
    /// BD-CD between two sweep CSVs; positive means the reference has lower CD.
    Bd { reference: PathBuf, test: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = init_threads().and_then(|()| run(cli.command)) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RINC_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("RINC_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("cannot size the worker pool")?;
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Project {
            input,
            output,
            flags,
        } => cmd_project(&input, &output, &flags),
        Command::Encode {
            input,
            output,
            flags,
        } => cmd_encode(&input, &output, &flags),
        Command::Decode { input, output } => cmd_decode(&input, &output),
        Command::Eval {
            original,
            reconstructed,
            stream,
            frame,
            output,
        } => cmd_eval(
            &original,
            &reconstructed,
            stream.as_deref(),
            frame,
            output.as_deref(),
        ),
        Command::Sweep {
            input,
            points,
            compare,
            jobs,
            output,
            flags,
        } => cmd_sweep(
            &input,
            &points,
            compare.as_deref(),
            jobs,
            output.as_deref(),
            &flags,
        ),
        Command::Bd { reference, test } => {
            let v = bd_cd(&read_curve(&reference)?, &read_curve(&test)?)?;
            println!("bd_cd,{v}");
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<PointCloud> {
    read_cloud(path).with_context(|| format!("cannot load {}", path.display()))
}

/// Writes CSV text to `path`, or to standard output.
fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_project(input: &Path, output: &Path, flags: &EncodeFlags) -> Result<()> {
    let cfg = Settings::from_flags(flags)?.encode_config()?;
    let cloud = load(input)?;
    let params = match cfg.phi_bounds {
        Some((up, down)) => ProjectionParams::new(cfg.width, cfg.height, up, down, cfg.rho_null)?,
        None => ProjectionParams::fit(&cloud, cfg.width, cfg.height, cfg.rho_null)?,
    };
    let image = project(&cloud, &params)?;
    write_range_image(&image, cfg.patch_factor as u32, output)?;
    let retention = retention_ratio(&cloud, &unproject(&image))?;
    println!("width,height,occupied,retention");
    println!(
        "{},{},{},{retention}",
        params.width,
        params.height,
        image.occupied_count()
    );
    Ok(())
}

fn cmd_encode(input: &Path, output: &Path, flags: &EncodeFlags) -> Result<()> {
    let cfg = Settings::from_flags(flags)?.encode_config()?;
    let cloud = load(input)?;
    eprintln!(
        "encoding {} points: mask V={} depth V={} L={} epochs={}",
        cloud.len(),
        cfg.mask_arch.hidden_width,
        cfg.depth_arch.hidden_width,
        cfg.depth_arch.hidden_layers,
        cfg.depth_train.epochs
    );
    let out = encode(&cloud, &cfg)?;
    fs::write(output, &out.bytes).with_context(|| format!("cannot write {}", output.display()))?;
    let r = &out.report;
    eprintln!("encoded in {:.1}s", r.elapsed.as_secs_f64());
    println!("mask_loss,depth_loss,stream_bits,bpp");
    println!(
        "{},{},{},{}",
        r.mask.quantized_loss, r.depth.quantized_loss, r.stream_bits, r.bpp
    );
    Ok(())
}

fn cmd_decode(input: &Path, output: &Path) -> Result<()> {
    let bytes = fs::read(input).with_context(|| format!("cannot read {}", input.display()))?;
    let start = Instant::now();
    let dec = decode_bytes(&bytes).with_context(|| format!("cannot decode {}", input.display()))?;
    let seconds = start.elapsed().as_secs_f64();
    write_xyz(&dec.cloud, output)?;
    println!("points,decode_seconds");
    println!("{},{seconds}", dec.cloud.len());
    Ok(())
}

fn eval_row(
    original: &PointCloud,
    recon: &PointCloud,
    stream_bits: Option<u64>,
) -> Result<(String, f64, f64)> {
    let cd = chamfer(original, recon)?;
    let retention = retention_ratio(original, recon)?;
    let rate = match stream_bits {
        Some(bits) => bpp(bits, original.len())?.to_string(),
        None => String::new(),
    };
    Ok((rate, cd, retention))
}

fn cmd_eval(
    original: &Path,
    reconstructed: &Path,
    stream: Option<&Path>,
    frame: Option<String>,
    output: Option<&Path>,
) -> Result<()> {
    let p = load(original)?;
    let q = load(reconstructed)?;
    let bits = stream
        .map(|s| fs::metadata(s).map(|m| m.len() * 8))
        .transpose()
        .context("cannot stat stream")?;
    let frame = frame.unwrap_or_else(|| {
        original
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let (rate, cd, retention) = eval_row(&p, &q, bits)?;
    emit(
        &format!("frame,bpp,cd,retention\n{frame},{rate},{cd},{retention}\n"),
        output,
    )
}

const SWEEP_HEADER: &str =
    "mask_v,depth_v,sparsity_mask,sparsity_depth,nb_mask,nb_depth,bpp,cd,retention";

fn sweep_point(cloud: &PointCloud, cfg: &EncodeConfig) -> Result<String> {
    let out = encode(cloud, cfg)?;
    let dec = decode_bytes(&out.bytes)?;
    let (rate, cd, retention) = eval_row(cloud, &dec.cloud, Some(out.report.stream_bits))?;
    Ok(format!(
        "{},{},{},{},{},{},{rate},{cd},{retention}",
        cfg.mask_arch.hidden_width,
        cfg.depth_arch.hidden_width,
        cfg.mask_sparsity,
        cfg.depth_sparsity,
        cfg.mask_bits,
        cfg.depth_bits
    ))
}

fn cmd_sweep(
    input: &Path,
    points: &Path,
    compare: Option<&Path>,
    jobs: usize,
    output: Option<&Path>,
    flags: &EncodeFlags,
) -> Result<()> {
    let base = Settings::from_flags(flags)?;
    let text =
        fs::read_to_string(points).with_context(|| format!("cannot read {}", points.display()))?;
    let mut configs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut s = base.clone();
        s.set_pairs(line)
            .and_then(|()| s.encode_config())
            .map(|cfg| configs.push(cfg))
            .with_context(|| format!("{}:{}", points.display(), i + 1))?;
    }
    if configs.is_empty() {
        bail!("{} lists no rate points", points.display());
    }
    let cloud = load(input)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("cannot start sweep workers")?;
    let rows: Vec<String> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, cfg)| {
                let row =
                    sweep_point(&cloud, cfg).with_context(|| format!("rate point {}", i + 1))?;
                eprintln!("rate point {}/{} done", i + 1, configs.len());
                Ok(row)
            })
            .collect::<Result<_>>()
    })?;
    let csv = format!("{SWEEP_HEADER}\n{}\n", rows.join("\n"));
    emit(&csv, output)?;
    if let Some(other) = compare {
        let reference = parse_curve(&csv, "this sweep")?;
        println!("bd_cd,{}", bd_cd(&reference, &read_curve(other)?)?);
    }
    Ok(())
}

/// Rate-distortion points from any CSV with `bpp` and `cd` columns.
fn parse_curve(text: &str, name: &str) -> Result<RdCurve> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .context("empty CSV")?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |c: &str| {
        header
            .iter()
            .position(|h| *h == c)
            .with_context(|| format!("{name} has no {c} column"))
    };
    let (bi, ci) = (col("bpp")?, col("cd")?);
    let mut points = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64> {
            f.get(i)
                .context("short CSV row")?
                .parse()
                .with_context(|| format!("bad number in {line:?}"))
        };
        points.push(RdPoint {
            bpp: get(bi)?,
            cd: get(ci)?,
        });
    }
    Ok(RdCurve::new(points)?)
}

fn read_curve(path: &Path) -> Result<RdCurve> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_curve(&text, &path.display().to_string())
}
