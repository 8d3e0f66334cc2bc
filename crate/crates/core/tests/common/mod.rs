//! Scenes and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rinc::projection::{unproject, ProjectionParams, RangeImage};
use rinc::{Point3, PointCloud};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fully occupied 1024x64 image: a tilted ground with a gentle azimuthal
/// ripple and two flat obstacles with sharp edges.
pub fn piecewise_range_image() -> RangeImage {
    let params = ProjectionParams::new(1024, 64, 0.05, -0.45, -1.0).unwrap();
    let pixels = (0..params.pixel_count())
        .map(|i| {
            let (u, v) = ((i % 1024) as f64, (i / 1024) as f64);
            let ground = 40.0 - 30.0 * v / 63.0 + 3.0 * (2.0 * PI * u / 1024.0).sin();
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

/// A small street-like scene on a `width x height` grid with empty sky in the
/// upper rows and scattered dropouts elsewhere.
pub fn scene_range_image(width: usize, height: usize) -> RangeImage {
    let params = ProjectionParams::new(width, height, 0.05, -0.45, -1.0).unwrap();
    let pixels = (0..params.pixel_count())
        .map(|i| {
            let (u, v) = (i % width, i / width);
            let (x, y) = (u as f64 / width as f64, v as f64 / (height - 1) as f64);
            let dropout = (u * 7 + v * 13) % 17 == 0;
            if y < 0.2 || dropout {
                -1.0
            } else if (0.3..0.45).contains(&x) && y < 0.7 {
                8.0 + 2.0 * x
            } else {
                30.0 - 20.0 * y + 2.0 * (2.0 * PI * x).sin()
            }
        })
        .collect();
    RangeImage::from_pixels(params, pixels).unwrap()
}

pub fn scene_cloud(width: usize, height: usize) -> PointCloud {
    unproject(&scene_range_image(width, height))
}

pub fn random_cloud(rng: &mut impl Rng, n: usize, extent: f64) -> PointCloud {
    let pts = (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(-extent..extent),
                rng.random_range(-extent..extent),
                rng.random_range(-extent..extent),
            )
        })
        .collect();
    PointCloud::from_points(pts).unwrap()
}

/// Chamfer distance by exhaustive search.
pub fn brute_chamfer(p: &PointCloud, q: &PointCloud) -> f64 {
    let directed = |a: &PointCloud, b: &PointCloud| {
        a.iter()
            .map(|x| {
                b.iter()
                    .map(|y| x.distance_squared(y))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .sum::<f64>()
            / a.len() as f64
    };
    0.5 * (directed(p, q) + directed(q, p))
}
