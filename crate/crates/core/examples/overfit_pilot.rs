//! Trains the depth network on the synthetic piecewise-smooth range image
//! used by the acceptance suite and prints the normalized RMSE per seed.
//!
//! cargo run --release -p rinc --example overfit_pilot -- [epochs] [seeds] [lr0]

use std::time::Instant;

use rinc::inr::train::{depth_inputs, depth_targets};
use rinc::inr::{train_depth_inr, LrSchedule, MlpArchitecture, NormalizationSpec, TrainConfig};
use rinc::projection::{make_datasets, split, ProjectionParams, RangeImage};

fn synthetic_range_image() -> RangeImage {
    let params = ProjectionParams::new(1024, 64, 0.05, -0.45, -1.0).unwrap();
    let pixels = (0..params.pixel_count())
        .map(|i| {
            let (u, v) = ((i % 1024) as f64, (i / 1024) as f64);
            let ground =
                40.0 - 30.0 * v / 63.0 + 3.0 * (2.0 * std::f64::consts::PI * u / 1024.0).sin();
            if (200.0..320.0).contains(&u) && v < 40.0 {
                12.0 + 0.01 * (u - 200.0)
            } else if (600.0..680.0).contains(&u) && v > 20.0 {
                6.0 + 0.05 * (v - 20.0)
            } else {
                ground
            }
        })
        .collect();
    RangeImage::from_pixels(params, pixels).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map_or(300, |s| s.parse().unwrap());
    let seeds: u64 = args.get(2).map_or(1, |s| s.parse().unwrap());
    let lr0: f64 = args.get(3).map_or(1e-4, |s| s.parse().unwrap());
    let (mask, depth) = split(&synthetic_range_image(), 16).unwrap();
    let (_, dd) = make_datasets(&mask, &depth).unwrap();
    let norm = NormalizationSpec::from_dataset(&dd).unwrap();
    for seed in 0..seeds {
        let cfg = TrainConfig {
            schedule: LrSchedule::CosineWarmup {
                lr0,
                warmup_epochs: epochs / 10,
                lr_min: 1e-12,
            },
            ..TrainConfig::depth_default(epochs, seed)
        };
        let t = Instant::now();
        let (mlp, report) =
            train_depth_inr(&dd, MlpArchitecture::depth(6, 40), &cfg, &norm).unwrap();
        let pred = mlp.predict(depth_inputs(&dd).view());
        let target = depth_targets(&dd, &norm);
        let rmse = ((&pred - &target).mapv(|e| e * e).sum() / pred.len() as f64).sqrt();
        println!(
            "seed {seed}: rmse {rmse:.6} loss {:.3e} -> {:.3e} in {:.1}s",
            report.initial_loss,
            report.best_loss,
            t.elapsed().as_secs_f64()
        );
    }
}
