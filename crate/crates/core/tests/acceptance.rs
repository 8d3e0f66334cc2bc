//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and a
//! summary. Failures are reported but only change the exit status when
//! `RINC_ACCEPTANCE_STRICT` is set, so the rest of the test run still executes.

mod common;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;
use rinc::codec::{decode_bytes, encode, EncodeConfig};
use rinc::compress::{
    dequantize_layer, deserialize_model, huffman_build, huffman_decode, huffman_encode,
    quantize_layer, serialize_model, QuantizedModel, StreamHeader,
};
use rinc::inr::train::{depth_inputs, depth_targets};
use rinc::inr::{
    train_depth_inr, LossKind, Mlp, MlpArchitecture, NormalizationSpec, OutputActivation,
    TrainConfig,
};
use rinc::metrics::{bd_cd, chamfer, retention_ratio, RdCurve, RdPoint};
use rinc::pointcloud::{read_kitti_bin, read_xyz, write_xyz};
use rinc::projection::{
    cart_to_sph, make_datasets, pixel_to_sph, project, sph_to_cart, sph_to_pixel, split, unproject,
    ProjectionParams,
};
use rinc::{Point3, PointCloud};

use common::{brute_chamfer, piecewise_range_image, rng, scene_cloud};

/// Normalized per-pixel RMSE of the first pilot run (seed 0) of the depth
/// network on `piecewise_range_image`, 300 epochs, L=6, V=40, 16x16 patches.
/// The five checked seeds exclude the pilot seed.
const PILOT_RMSE: f64 = 0.1732;
const PILOT_TOLERANCE: f64 = 0.20;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn projection_round_trip() -> Outcome {
    let params = ProjectionParams::new(1024, 64, 0.05, -0.45, -1.0).unwrap();
    let (d_theta, d_phi) = params.angular_quantum();
    let quantum = d_theta.max(d_phi);
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    let mut failures = Vec::new();
    for cloud_id in 0..10u64 {
        let mut r = rng(100 + cloud_id);
        let pts: Vec<Point3> = (0..5000)
            .map(|_| {
                let u = r.random_range(0..params.width);
                let v = r.random_range(0..params.height);
                let rho = r.random_range(1.0..80.0);
                sph_to_cart(&pixel_to_sph(u, v, rho, &params))
            })
            .collect();
        let cloud = PointCloud::from_points(pts).unwrap();
        let start = Instant::now();
        let image = project(&cloud, &params).unwrap();
        let back = unproject(&image);
        slowest = slowest.max(start.elapsed().as_secs_f64());

        // Unprojection walks occupied pixels in row-major order.
        let occupied: Vec<usize> = (0..params.pixel_count())
            .filter(|&i| image.pixels()[i] != params.rho_null)
            .collect();
        let by_pixel: HashMap<usize, Point3> =
            occupied.iter().copied().zip(back.iter().copied()).collect();
        let mut survivors = 0;
        for p in cloud.iter() {
            let rho = p.norm();
            let (u, v) = sph_to_pixel(&cart_to_sph(p).unwrap(), &params);
            let pixel = v * params.width + u;
            if image.pixels()[pixel] != rho {
                continue;
            }
            survivors += 1;
            let q = by_pixel[&pixel];
            let bound = rho * quantum;
            let err = (p.x - q.x)
                .abs()
                .max((p.y - q.y).abs())
                .max((p.z - q.z).abs());
            worst = worst.max(err / bound);
            if err > bound {
                failures.push(format!("cloud {cloud_id}: error {err:.3e} > {bound:.3e}"));
            }
        }
        if survivors != occupied.len() {
            failures.push(format!(
                "cloud {cloud_id}: {survivors} survivors vs {} occupied pixels",
                occupied.len()
            ));
        }
    }
    let ok = failures.is_empty() && slowest < 1.0;
    verdict(
        ok,
        format!(
            "worst error {worst:.3} of rho*quantum, slowest cloud {slowest:.3}s{}",
            failures
                .first()
                .map(|f| format!(", {f}"))
                .unwrap_or_default()
        ),
    )
}

fn gradient_check() -> Outcome {
    let mut r = rng(7);
    let (mut total, mut within_strict, mut within_loose) = (0usize, 0usize, 0usize);
    let h = 1e-6;
    for _ in 0..100 {
        let layers = r.random_range(1..=3);
        let input_dim = r.random_range(2..=3);
        let output = if r.random_bool(0.5) {
            OutputActivation::Sigmoid
        } else {
            OutputActivation::Identity
        };
        let arch = MlpArchitecture {
            input_dim,
            hidden_layers: layers,
            hidden_width: 8,
            output,
            omega0: 30.0,
        };
        let mut mlp = Mlp::new(arch, r.random()).unwrap();
        let rows = r.random_range(4..32);
        let x = Array2::from_shape_fn((rows, input_dim), |_| r.random_range(-1.0..1.0));
        let (t, loss): (Array1<f64>, LossKind) = match output {
            OutputActivation::Sigmoid => (
                Array1::from_shape_fn(rows, |_| r.random_range(0..2) as f64),
                LossKind::Bce {
                    normalizer: rows as f64,
                },
            ),
            OutputActivation::Identity => (
                Array1::from_shape_fn(rows, |_| r.random_range(0.0..1.0)),
                LossKind::Mse {
                    normalizer: rows as f64,
                },
            ),
        };
        let (_, grads) = mlp.backward(x.view(), t.view(), loss);
        for i in 0..mlp.params().len() {
            let orig = mlp.params()[i];
            mlp.params_mut()[i] = orig + h;
            let up = mlp.loss(x.view(), t.view(), loss);
            mlp.params_mut()[i] = orig - h;
            let down = mlp.loss(x.view(), t.view(), loss);
            mlp.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.values[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            total += 1;
            within_strict += (rel < 1e-4) as usize;
            within_loose += (rel < 1e-3) as usize;
        }
    }
    let strict = within_strict as f64 / total as f64;
    verdict(
        strict >= 0.99 && within_loose == total,
        format!(
            "{total} parameters, {:.2}% within 1e-4, {:.2}% within 1e-3",
            100.0 * strict,
            100.0 * within_loose as f64 / total as f64
        ),
    )
}

fn overfit_capability() -> Outcome {
    let (mask, depth) = split(&piecewise_range_image(), 16).unwrap();
    let (_, ds) = make_datasets(&mask, &depth).unwrap();
    let norm = NormalizationSpec::from_dataset(&ds).unwrap();
    let bound = PILOT_RMSE * (1.0 + PILOT_TOLERANCE);
    let start = Instant::now();
    let mut rmses = Vec::new();
    for seed in 1..=5 {
        let cfg = TrainConfig::depth_default(300, seed);
        let (mlp, _) = train_depth_inr(&ds, MlpArchitecture::depth(6, 40), &cfg, &norm).unwrap();
        let pred = mlp.predict(depth_inputs(&ds).view());
        let target = depth_targets(&ds, &norm);
        let mse = (&pred - &target).mapv(|e| e * e).mean().unwrap();
        rmses.push(mse.sqrt());
    }
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    let ok = rmses.iter().all(|&r| r <= bound) && minutes < 30.0;
    verdict(
        ok,
        format!(
            "normalized RMSE per seed {:?} vs bound {bound:.4} (pilot {PILOT_RMSE:.4} +{:.0}%), {minutes:.1} min",
            rmses.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>(),
            100.0 * PILOT_TOLERANCE
        ),
    )
}

fn quantization_bound() -> Outcome {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for i in 0..1000 {
        let bits = [4u8, 8, 16, 32][i % 4];
        let n = r.random_range(1..400);
        let scale = 10f64.powi(r.random_range(-3..3));
        let values: Vec<f64> = (0..n).map(|_| scale * r.random_range(-1.0..1.0)).collect();
        let q = quantize_layer(&values, bits).unwrap();
        let back = dequantize_layer(&q);
        let half = q.step() / 2.0 + 1e-9;
        for (v, b) in values.iter().zip(&back) {
            let e = (v - b).abs();
            worst = worst.max(e / half);
            failures += (e > half) as usize;
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        failures += !back.contains(&lo) as usize + !back.contains(&hi) as usize;
    }
    verdict(
        failures == 0,
        format!("{failures} violations, worst error {worst:.3} of s/2 + 1e-9"),
    )
}

fn entropy_coding_lossless() -> Outcome {
    let mut r = rng(13);
    let mut failures = 0;
    for _ in 0..1000 {
        let bits = r.random_range(4..=16u8);
        let n = r.random_range(1..600);
        // Skewed distributions resemble real weight histograms.
        let spread = r.random_range(1..(1u32 << bits.min(10)));
        let codes: Vec<u32> = (0..n)
            .map(|_| {
                let a = r.random_range(0..spread);
                let b = r.random_range(0..spread);
                a.min(b)
            })
            .collect();
        let table = huffman_build(&codes).unwrap();
        let payload = huffman_encode(&codes, &table).unwrap();
        let back = huffman_decode(&payload.bytes, payload.bit_len, &table, codes.len()).unwrap();
        failures += (back != codes) as usize;
    }
    let mut stream_failures = 0;
    for seed in 0..20 {
        let mask = Mlp::new(
            MlpArchitecture::mask(r.random_range(1..=6), r.random_range(4..=40)),
            seed,
        )
        .unwrap();
        let depth = Mlp::new(
            MlpArchitecture::depth(r.random_range(1..=6), r.random_range(4..=45)),
            seed + 100,
        )
        .unwrap();
        let mq = QuantizedModel::from_mlp(&mask, r.random_range(4..=16)).unwrap();
        let dq = QuantizedModel::from_mlp(&depth, r.random_range(4..=32)).unwrap();
        let header = StreamHeader {
            width: 1024,
            height: 64,
            patch_factor: 16,
            phi_up: 0.05,
            phi_down: -0.45,
            rho_null: -1.0,
            d_min: 1.25,
            d_max: 79.5,
        };
        let bytes = serialize_model(&mq, &dq, &header).unwrap();
        let parsed = deserialize_model(&bytes).unwrap();
        let again = serialize_model(&parsed.mask, &parsed.depth, &parsed.header).unwrap();
        stream_failures += (parsed.mask != mq
            || parsed.depth != dq
            || parsed.header != header
            || again != bytes
            || parsed.mask.to_mlp().unwrap() != mq.to_mlp().unwrap())
            as usize;
    }
    verdict(
        failures == 0 && stream_failures == 0,
        format!(
            "1000 layers: {failures} mismatches; 20 model streams: {stream_failures} mismatches"
        ),
    )
}

fn chamfer_oracle() -> Outcome {
    let mut r = rng(17);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = r.random_range(1..=500);
        let m = r.random_range(1..=500);
        let p = common::random_cloud(&mut r, n, 20.0);
        let q = common::random_cloud(&mut r, m, 20.0);
        worst = worst.max((chamfer(&p, &q).unwrap() - brute_chamfer(&p, &q)).abs());
    }
    verdict(
        worst <= 1e-12,
        format!("max |kd-tree - brute force| = {worst:.3e} over 200 pairs"),
    )
}

fn bd_sanity() -> Outcome {
    let mk = |pts: &[(f64, f64)]| {
        RdCurve::new(pts.iter().map(|&(bpp, cd)| RdPoint { bpp, cd }).collect()).unwrap()
    };
    let base = [
        (0.4, 0.31),
        (0.9, 0.18),
        (1.7, 0.11),
        (3.2, 0.07),
        (6.0, 0.045),
    ];
    let reference = mk(&base);
    let identical = bd_cd(&reference, &reference).unwrap();
    let delta = 0.0375;
    let shifted = mk(&base.map(|(b, c)| (b, c + delta)));
    let offset = bd_cd(&reference, &shifted).unwrap();
    let other = mk(&[(0.5, 0.4), (1.1, 0.2), (2.0, 0.15), (4.5, 0.06)]);
    let anti = bd_cd(&reference, &other).unwrap() + bd_cd(&other, &reference).unwrap();
    verdict(
        identical.abs() <= 1e-9 && (offset - delta).abs() <= 1e-6 && anti.abs() <= 1e-9,
        format!("identical {identical:.2e}, offset {offset:.9} (expected {delta}), a+b {anti:.2e}"),
    )
}

fn kitti_frame(root: &Path, seq: u32, frame: u32) -> PathBuf {
    root.join(format!("sequences/{seq:02}/velodyne/{frame:06}.bin"))
}

fn kitti_reproduction() -> Outcome {
    let Some(root) = std::env::var_os("RINC_KITTI_ROOT").map(PathBuf::from) else {
        return Outcome::Skip("set RINC_KITTI_ROOT to a KITTI odometry root to run".into());
    };
    let mut ratios = Vec::new();
    for seq in 0..=6 {
        for frame in [0, 25, 50, 75, 100] {
            let cloud = match read_kitti_bin(kitti_frame(&root, seq, frame)) {
                Ok(c) => c,
                Err(e) => return Outcome::Fail(e.to_string()),
            };
            let params = ProjectionParams::fit(&cloud, 1024, 64, -1.0).unwrap();
            let back = unproject(&project(&cloud, &params).unwrap());
            ratios.push(retention_ratio(&cloud, &back).unwrap());
        }
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let retention_ok = (mean - 0.4102).abs() <= 0.01;

    let epochs = std::env::var("RINC_KITTI_EPOCHS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(3000);
    let cloud = read_kitti_bin(kitti_frame(&root, 0, 0)).unwrap();
    let mut points = Vec::new();
    for v in [28, 34, 40] {
        let cfg = EncodeConfig::new(40, v, epochs, 0);
        let out = encode(&cloud, &cfg).unwrap();
        let dec = decode_bytes(&out.bytes).unwrap();
        points.push((out.report.bpp, chamfer(&cloud, &dec.cloud).unwrap()));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = points.windows(2).filter(|w| w[1].1 <= w[0].1).count();
    verdict(
        retention_ok && monotone >= 2,
        format!(
            "mean retention {:.2}% over {} frames; R-D points {points:?}, {monotone}/2 non-increasing pairs",
            100.0 * mean,
            ratios.len()
        ),
    )
}

fn end_to_end_smoke() -> Outcome {
    let cloud = scene_cloud(1024, 64);
    let cfg = EncodeConfig::new(24, 28, 30, 3);
    let dir = tempfile::tempdir().unwrap();
    let stream_path = dir.path().join("scene.rinc");
    let out = encode(&cloud, &cfg).unwrap();
    std::fs::write(&stream_path, &out.bytes).unwrap();
    let file_bytes = std::fs::metadata(&stream_path).unwrap().len();
    let expected = file_bytes as f64 * 8.0 / cloud.len() as f64;
    let bpp_err = (out.report.bpp - expected).abs() / expected;

    let dec = decode_bytes(&std::fs::read(&stream_path).unwrap()).unwrap();
    let recon_path = dir.path().join("scene.xyz");
    write_xyz(&dec.cloud, &recon_path).unwrap();
    let recon = read_xyz(&recon_path).unwrap();
    let ones = dec.mask.ones();
    let cd = if recon.is_empty() {
        f64::NAN
    } else {
        chamfer(&cloud, &recon).unwrap()
    };
    verdict(
        bpp_err <= 0.01 && dec.cloud.len() == ones && recon.len() == ones && cd.is_finite(),
        format!(
            "bpp {:.4} vs file {expected:.4}, decoded {} points, mask ones {ones}, CD {cd:.4}",
            out.report.bpp,
            dec.cloud.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("projection round trip", projection_round_trip),
        ("gradient correctness", gradient_check),
        ("overfit capability", overfit_capability),
        ("quantization bound", quantization_bound),
        ("entropy-coding losslessness", entropy_coding_lossless),
        ("Chamfer oracle equivalence", chamfer_oracle),
        ("BD-CD sanity", bd_sanity),
        ("KITTI retention and R-D monotonicity", kitti_reproduction),
        ("end-to-end smoke", end_to_end_smoke),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match run() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!(
            "criterion {}: {tag} {name} ({detail}) [{:.1}s]",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {failed} of {} criteria failed", criteria.len());
    if failed > 0 && std::env::var_os("RINC_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
