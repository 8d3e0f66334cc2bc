//! Bjøntegaard-delta over Chamfer distance.
//!
//! Each rate-distortion curve is fitted with a cubic `CD(ln bpp)` by least
//! squares; the difference of the two fits is averaged over the shared
//! log-rate interval.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MIN_CURVE_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    pub bpp: f64,
    pub cd: f64,
}

/// Rate-distortion samples sorted by strictly increasing bitrate.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl RdCurve {
    /// Sorts `points` by bitrate and validates them.
    pub fn new(mut points: Vec<RdPoint>) -> Result<Self> {
        if points.len() < MIN_CURVE_POINTS {
            return Err(Error::UndefinedMetric(format!(
                "BD fitting needs at least {MIN_CURVE_POINTS} points, got {}",
                points.len()
            )));
        }
        if let Some(p) = points
            .iter()
            .find(|p| !(p.bpp.is_finite() && p.bpp > 0.0 && p.cd.is_finite() && p.cd >= 0.0))
        {
            return Err(Error::UndefinedMetric(format!(
                "invalid rate-distortion point bpp={} cd={}",
                p.bpp, p.cd
            )));
        }
        points.sort_by(|a, b| a.bpp.total_cmp(&b.bpp));
        if points.windows(2).any(|w| w[0].bpp == w[1].bpp) {
            return Err(Error::UndefinedMetric("bitrates must be distinct".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    fn log_range(&self) -> (f64, f64) {
        (
            self.points[0].bpp.ln(),
            self.points[self.points.len() - 1].bpp.ln(),
        )
    }

    /// Least-squares cubic coefficients `[c0, c1, c2, c3]` of CD over `ln bpp`.
    pub fn fit_cubic(&self) -> Result<[f64; 4]> {
        let n = self.points.len();
        let vander = DMatrix::from_fn(n, 4, |r, c| self.points[r].bpp.ln().powi(c as i32));
        let rhs = DVector::from_iterator(n, self.points.iter().map(|p| p.cd));
        let coeffs = vander
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::UndefinedMetric(format!("cubic fit failed: {e}")))?;
        Ok([coeffs[0], coeffs[1], coeffs[2], coeffs[3]])
    }
}

pub fn eval_poly(c: &[f64; 4], x: f64) -> f64 {
    c[0] + x * (c[1] + x * (c[2] + x * c[3]))
}

fn integral(c: &[f64; 4], lo: f64, hi: f64) -> f64 {
    let antideriv = |x: f64| x * (c[0] + x * (c[1] / 2.0 + x * (c[2] / 3.0 + x * c[3] / 4.0)));
    antideriv(hi) - antideriv(lo)
}

/// Average CD of `test` minus that of `reference` over the common log-rate
/// range. Positive means the reference reaches lower distortion.
pub fn bd_cd(reference: &RdCurve, test: &RdCurve) -> Result<f64> {
    let (r_lo, r_hi) = reference.log_range();
    let (t_lo, t_hi) = test.log_range();
    let lo = r_lo.max(t_lo);
    let hi = r_hi.min(t_hi);
    if hi <= lo {
        return Err(Error::UndefinedMetric(
            "rate ranges of the two curves do not overlap".into(),
        ));
    }
    let r = reference.fit_cubic()?;
    let t = test.fit_cubic()?;
    Ok((integral(&t, lo, hi) - integral(&r, lo, hi)) / (hi - lo))
}
