//! Spherical projection between point clouds and panoramic range images, the
//! mask/depth split of a range image, and the training datasets built from
//! them.
//!
//! Image coordinates follow the usual convention: `u` is the column
//! (azimuth, `0..W`) and `v` the row (elevation, `0..H`, row 0 at the top).
//! Pixels are stored row-major, `index = v * W + u`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pointcloud::{Point3, PointCloud};

pub const DEFAULT_WIDTH: usize = 1024;
pub const DEFAULT_HEIGHT: usize = 64;
pub const DEFAULT_RHO_NULL: f64 = -1.0;

/// Size of the fixed header that precedes the pixels of a range image dump.
pub const RANGE_IMAGE_HEADER_BYTES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionParams {
    pub width: usize,
    pub height: usize,
    /// Upper elevation bound in radians (maps to row 0).
    pub phi_up: f64,
    /// Lower elevation bound in radians (maps to the last row).
    pub phi_down: f64,
    /// Sentinel stored in pixels that received no point.
    pub rho_null: f64,
}

impl ProjectionParams {
    pub fn new(
        width: usize,
        height: usize,
        phi_up: f64,
        phi_down: f64,
        rho_null: f64,
    ) -> Result<Self> {
        let params = Self {
            width,
            height,
            phi_up,
            phi_down,
            rho_null,
        };
        params.validate()?;
        Ok(params)
    }

    /// Derives the elevation bounds from the extrema of `cloud`.
    ///
    /// The bounds are widened to the nearest `f32` values so that they survive
    /// the bitstream header unchanged and still enclose every point.
    pub fn fit(cloud: &PointCloud, width: usize, height: usize, rho_null: f64) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::DegenerateInput(
                "cannot derive elevation bounds from an empty cloud".into(),
            ));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, p) in cloud.iter().enumerate() {
            let s = cart_to_sph(p).map_err(|_| Error::DegeneratePoint(i))?;
            lo = lo.min(s.phi);
            hi = hi.max(s.phi);
        }
        let phi_down = f32_round_down(lo);
        let mut phi_up = f32_round_up(hi);
        if phi_up <= phi_down {
            phi_up = f32_round_up(phi_down + 1e-6);
        }
        Self::new(width, height, phi_up, phi_down, rho_null)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config(format!(
                "image size must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.phi_up.is_finite() && self.phi_down.is_finite()) || self.phi_up <= self.phi_down {
            return Err(Error::Config(format!(
                "need phi_up > phi_down, got phi_up={} phi_down={}",
                self.phi_up, self.phi_down
            )));
        }
        if !self.rho_null.is_finite() {
            return Err(Error::Config("rho_null must be finite".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Sum used as the elevation span by both directions of the mapping.
    fn phi_span(&self) -> f64 {
        self.phi_up + self.phi_down.abs()
    }

    /// Angular size of one column and one row, in radians.
    pub fn angular_quantum(&self) -> (f64, f64) {
        (
            2.0 * PI / self.width as f64,
            self.phi_span() / self.height as f64,
        )
    }
}

fn f32_round_down(x: f64) -> f64 {
    let f = x as f32;
    if (f as f64) > x {
        f.next_down() as f64
    } else {
        f as f64
    }
}

fn f32_round_up(x: f64) -> f64 {
    let f = x as f32;
    if (f as f64) < x {
        f.next_up() as f64
    } else {
        f as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    pub rho: f64,
    /// Elevation (pitch).
    pub phi: f64,
    /// Azimuth (yaw) in `(-pi, pi]`.
    pub theta: f64,
}

pub fn cart_to_sph(p: &Point3) -> Result<SphericalPoint> {
    let rho = p.norm();
    if rho == 0.0 {
        return Err(Error::DegeneratePoint(0));
    }
    Ok(SphericalPoint {
        rho,
        phi: (p.z / rho).clamp(-1.0, 1.0).asin(),
        theta: p.y.atan2(p.x),
    })
}

/// Maps a direction to its `(u, v)` pixel, clamping the extremal angles into
/// the grid.
pub fn sph_to_pixel(s: &SphericalPoint, params: &ProjectionParams) -> (usize, usize) {
    let w = params.width as f64;
    let h = params.height as f64;
    let u = (w / 2.0 * (s.theta / PI + 1.0)).floor();
    let v = (h * (1.0 - (s.phi + params.phi_down.abs()) / params.phi_span())).floor();
    let clamp = |x: f64, n: usize| (x.max(0.0) as usize).min(n - 1);
    (clamp(u, params.width), clamp(v, params.height))
}

/// Inverse of [`sph_to_pixel`] for the top-left corner of a pixel.
pub fn pixel_to_sph(u: usize, v: usize, rho: f64, params: &ProjectionParams) -> SphericalPoint {
    let phi = (1.0 - v as f64 / params.height as f64) * params.phi_span() - params.phi_down.abs();
    let theta = (2.0 * u as f64 / params.width as f64 - 1.0) * PI;
    SphericalPoint { rho, phi, theta }
}

pub fn sph_to_cart(s: &SphericalPoint) -> Point3 {
    let (sin_phi, cos_phi) = s.phi.sin_cos();
    let (sin_theta, cos_theta) = s.theta.sin_cos();
    Point3::new(
        s.rho * cos_phi * cos_theta,
        s.rho * cos_phi * sin_theta,
        s.rho * sin_phi,
    )
}

/// A panoramic depth image. Each pixel is either a positive depth or
/// `params.rho_null`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    params: ProjectionParams,
    pixels: Vec<f64>,
}

impl RangeImage {
    pub fn empty(params: ProjectionParams) -> Self {
        Self {
            pixels: vec![params.rho_null; params.pixel_count()],
            params,
        }
    }

    /// Wraps a row-major pixel buffer, checking its size and contents.
    pub fn from_pixels(params: ProjectionParams, pixels: Vec<f64>) -> Result<Self> {
        params.validate()?;
        if pixels.len() != params.pixel_count() {
            return Err(Error::Config(format!(
                "expected {} pixels, got {}",
                params.pixel_count(),
                pixels.len()
            )));
        }
        if let Some(i) = pixels
            .iter()
            .position(|&d| d != params.rho_null && !(d.is_finite() && d > 0.0))
        {
            return Err(Error::MalformedInput(format!(
                "pixel {i} holds {} which is neither rho_null nor a positive depth",
                pixels[i]
            )));
        }
        Ok(Self { params, pixels })
    }

    pub fn params(&self) -> &ProjectionParams {
        &self.params
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.pixels[v * self.params.width + u]
    }

    pub fn is_null(&self, u: usize, v: usize) -> bool {
        self.get(u, v) == self.params.rho_null
    }

    pub fn occupied_count(&self) -> usize {
        self.pixels
            .iter()
            .filter(|&&d| d != self.params.rho_null)
            .count()
    }
}

/// Projects every point into the range image. When several points fall in
/// the same pixel the nearest one is kept.
pub fn project(cloud: &PointCloud, params: &ProjectionParams) -> Result<RangeImage> {
    params.validate()?;
    let mut image = RangeImage::empty(*params);
    for (i, p) in cloud.iter().enumerate() {
        let s = cart_to_sph(p).map_err(|_| Error::DegeneratePoint(i))?;
        if s.rho == params.rho_null {
            return Err(Error::Config(format!(
                "rho_null {} collides with the depth of point {i}",
                params.rho_null
            )));
        }
        let (u, v) = sph_to_pixel(&s, params);
        let slot = &mut image.pixels[v * params.width + u];
        if *slot == params.rho_null || s.rho < *slot {
            *slot = s.rho;
        }
    }
    Ok(image)
}

/// Maps every occupied pixel back to 3D, scanning rows top to bottom.
pub fn unproject(image: &RangeImage) -> PointCloud {
    let params = &image.params;
    let mut points = Vec::with_capacity(image.occupied_count());
    for v in 0..params.height {
        for u in 0..params.width {
            let rho = image.get(u, v);
            if rho != params.rho_null {
                points.push(sph_to_cart(&pixel_to_sph(u, v, rho, params)));
            }
        }
    }
    PointCloud::from_points_unchecked(points)
}

/// Even tiling of the image into `patch_factor x patch_factor` patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub patch_factor: usize,
    pub patch_width: usize,
    pub patch_height: usize,
}

impl PatchGrid {
    pub fn new(params: &ProjectionParams, patch_factor: usize) -> Result<Self> {
        if patch_factor == 0
            || params.width % patch_factor != 0
            || params.height % patch_factor != 0
        {
            return Err(Error::Config(format!(
                "patch factor {patch_factor} must divide both {}x{}",
                params.width, params.height
            )));
        }
        Ok(Self {
            patch_factor,
            patch_width: params.width / patch_factor,
            patch_height: params.height / patch_factor,
        })
    }

    pub fn patch_count(&self) -> usize {
        self.patch_factor * self.patch_factor
    }

    /// `(u, v)` to `(patch index, in-patch column, in-patch row)`. Patches are
    /// numbered row-major over the patch grid.
    pub fn to_patch(&self, u: usize, v: usize) -> (usize, usize, usize) {
        let patch = (v / self.patch_height) * self.patch_factor + u / self.patch_width;
        (patch, u % self.patch_width, v % self.patch_height)
    }

    pub fn from_patch(&self, patch: usize, iu: usize, iv: usize) -> (usize, usize) {
        let pu = patch % self.patch_factor;
        let pv = patch / self.patch_factor;
        (pu * self.patch_width + iu, pv * self.patch_height + iv)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskImage {
    params: ProjectionParams,
    bits: Vec<u8>,
}

impl MaskImage {
    pub fn from_bits(params: ProjectionParams, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != params.pixel_count() || bits.iter().any(|&b| b > 1) {
            return Err(Error::Config("mask must hold W*H values in {0, 1}".into()));
        }
        Ok(Self { params, bits })
    }

    pub fn params(&self) -> &ProjectionParams {
        &self.params
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, u: usize, v: usize) -> u8 {
        self.bits[v * self.params.width + u]
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

/// The range image with unoccupied pixels marked "do not care" (`None`).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    params: ProjectionParams,
    grid: PatchGrid,
    pixels: Vec<Option<f64>>,
}

impl DepthImage {
    pub fn params(&self) -> &ProjectionParams {
        &self.params
    }

    pub fn grid(&self) -> &PatchGrid {
        &self.grid
    }

    pub fn pixels(&self) -> &[Option<f64>] {
        &self.pixels
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        self.pixels[v * self.params.width + u]
    }

    pub fn get_patched(&self, patch: usize, iu: usize, iv: usize) -> Option<f64> {
        let (u, v) = self.grid.from_patch(patch, iu, iv);
        self.get(u, v)
    }
}

pub fn split(image: &RangeImage, patch_factor: usize) -> Result<(MaskImage, DepthImage)> {
    let params = image.params;
    let grid = PatchGrid::new(&params, patch_factor)?;
    let bits = image
        .pixels
        .iter()
        .map(|&d| u8::from(d != params.rho_null))
        .collect();
    let pixels = image
        .pixels
        .iter()
        .map(|&d| (d != params.rho_null).then_some(d))
        .collect();
    Ok((
        MaskImage { params, bits },
        DepthImage {
            params,
            grid,
            pixels,
        },
    ))
}

/// Depth where the mask is set, `rho_null` elsewhere. Missing depth under a
/// set mask bit is an error.
pub fn recombine(mask: &MaskImage, depth: &DepthImage) -> Result<RangeImage> {
    if mask.params != depth.params {
        return Err(Error::Config(
            "mask and depth images disagree on parameters".into(),
        ));
    }
    let params = mask.params;
    let pixels = mask
        .bits
        .iter()
        .zip(&depth.pixels)
        .enumerate()
        .map(|(i, (&bit, &d))| match (bit, d) {
            (0, _) => Ok(params.rho_null),
            (_, Some(d)) => Ok(d),
            (_, None) => Err(Error::MalformedInput(format!(
                "pixel {i} is masked in but has no depth"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RangeImage { params, pixels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskSample {
    pub u: usize,
    pub v: usize,
    pub bit: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub patch: usize,
    pub iu: usize,
    pub iv: usize,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskDataset {
    pub params: ProjectionParams,
    pub samples: Vec<MaskSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthDataset {
    pub params: ProjectionParams,
    pub grid: PatchGrid,
    pub samples: Vec<DepthSample>,
}

/// Builds the mask dataset (every pixel, row-major) and the depth dataset
/// (occupied pixels only, patch by patch, row-major inside each patch).
pub fn make_datasets(mask: &MaskImage, depth: &DepthImage) -> Result<(MaskDataset, DepthDataset)> {
    if mask.params != depth.params {
        return Err(Error::Config(
            "mask and depth images disagree on parameters".into(),
        ));
    }
    let params = mask.params;
    let mut mask_samples = Vec::with_capacity(params.pixel_count());
    for v in 0..params.height {
        for u in 0..params.width {
            mask_samples.push(MaskSample {
                u,
                v,
                bit: mask.get(u, v),
            });
        }
    }

    let grid = depth.grid;
    let mut depth_samples = Vec::new();
    for patch in 0..grid.patch_count() {
        for iv in 0..grid.patch_height {
            for iu in 0..grid.patch_width {
                if let Some(d) = depth.get_patched(patch, iu, iv) {
                    depth_samples.push(DepthSample {
                        patch,
                        iu,
                        iv,
                        depth: d,
                    });
                }
            }
        }
    }
    Ok((
        MaskDataset {
            params,
            samples: mask_samples,
        },
        DepthDataset {
            params,
            grid,
            samples: depth_samples,
        },
    ))
}

/// Serializes a range image dump: a 24-byte little-endian header
/// (`W:u32 H:u32 phi_up:f32 phi_down:f32 rho_null:f32 N_p:u32`) followed by
/// `W*H` row-major `f32` pixels.
pub fn encode_range_image(image: &RangeImage, patch_factor: u32) -> Result<Vec<u8>> {
    let p = &image.params;
    let dim = |n: usize| {
        u32::try_from(n).map_err(|_| Error::Config(format!("dimension {n} exceeds u32")))
    };
    let mut out = Vec::with_capacity(RANGE_IMAGE_HEADER_BYTES + 4 * p.pixel_count());
    out.extend(dim(p.width)?.to_le_bytes());
    out.extend(dim(p.height)?.to_le_bytes());
    out.extend((p.phi_up as f32).to_le_bytes());
    out.extend((p.phi_down as f32).to_le_bytes());
    out.extend((p.rho_null as f32).to_le_bytes());
    out.extend(patch_factor.to_le_bytes());
    for &d in &image.pixels {
        out.extend((d as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_range_image(bytes: &[u8]) -> Result<(RangeImage, u32)> {
    let word = |i: usize| -> Result<[u8; 4]> {
        bytes
            .get(i..i + 4)
            .map(|b| [b[0], b[1], b[2], b[3]])
            .ok_or_else(|| Error::Format {
                offset: i,
                reason: "range image dump truncated".into(),
            })
    };
    let width = u32::from_le_bytes(word(0)?) as usize;
    let height = u32::from_le_bytes(word(4)?) as usize;
    let phi_up = f32::from_le_bytes(word(8)?) as f64;
    let phi_down = f32::from_le_bytes(word(12)?) as f64;
    let rho_null = f32::from_le_bytes(word(16)?) as f64;
    let patch_factor = u32::from_le_bytes(word(20)?);
    let params = ProjectionParams::new(width, height, phi_up, phi_down, rho_null)?;
    let expected = RANGE_IMAGE_HEADER_BYTES + 4 * params.pixel_count();
    if bytes.len() != expected {
        return Err(Error::Format {
            offset: bytes.len().min(expected),
            reason: format!(
                "range image dump has {} bytes, expected {expected}",
                bytes.len()
            ),
        });
    }
    let pixels = bytes[RANGE_IMAGE_HEADER_BYTES..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((RangeImage::from_pixels(params, pixels)?, patch_factor))
}

pub fn write_range_image(
    image: &RangeImage,
    patch_factor: u32,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_range_image(image, patch_factor)?).map_err(|e| Error::io(path, e))
}

pub fn read_range_image(path: impl AsRef<Path>) -> Result<(RangeImage, u32)> {
    let path = path.as_ref();
    decode_range_image(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
