//! Distortion and rate measures.

pub mod bd;
pub mod kdtree;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pointcloud::{Point3, PointCloud};

pub use bd::{bd_cd, RdCurve, RdPoint};
pub use kdtree::KdTree;

/// Mean over `from` of the distance to the nearest point of `to`. Distances
/// are summed in input order.
fn mean_nearest(from: &[Point3], to: &KdTree) -> f64 {
    let dists: Vec<f64> = from
        .par_iter()
        .map(|p| {
            to.nearest_distance_squared(p)
                .expect("nonempty tree")
                .sqrt()
        })
        .collect();
    dists.iter().sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance: the average of the two directed mean
/// nearest-neighbour distances.
pub fn chamfer(p: &PointCloud, q: &PointCloud) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::UndefinedMetric(
            "Chamfer distance needs two nonempty clouds".into(),
        ));
    }
    let (tp, tq) = rayon::join(|| KdTree::build(p.points()), || KdTree::build(q.points()));
    let (pq, qp) = rayon::join(
        || mean_nearest(p.points(), &tq),
        || mean_nearest(q.points(), &tp),
    );
    Ok(0.5 * (pq + qp))
}

/// Stream size divided by the number of points in the original cloud.
pub fn bpp(stream_bits: u64, original_count: usize) -> Result<f64> {
    if original_count == 0 {
        return Err(Error::UndefinedMetric(
            "bits per point of an empty cloud".into(),
        ));
    }
    Ok(stream_bits as f64 / original_count as f64)
}

/// Fraction of original points that survive the round trip.
pub fn retention_ratio(original: &PointCloud, reconstructed: &PointCloud) -> Result<f64> {
    if original.is_empty() {
        return Err(Error::UndefinedMetric(
            "retention ratio of an empty cloud".into(),
        ));
    }
    Ok(reconstructed.len() as f64 / original.len() as f64)
}
