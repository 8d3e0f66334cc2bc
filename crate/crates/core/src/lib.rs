//! Lossy compression of single LiDAR scans through range-image projection and
//! two overfitted sinusoidal networks.
//!
//! The encoder projects a point cloud onto a panoramic range image, splits it
//! into an occupancy mask and a patched depth image, overfits one small
//! sine-activated MLP to each, then prunes, quantizes and Huffman-codes the
//! weights into a self-describing bitstream. The decoder evaluates both
//! networks over the pixel grid, gates depth by the mask and maps the result
//! back to 3D.
//!
//! Module map:
//!
//! * [`pointcloud`] - point types plus KITTI `.bin` and ASCII `.xyz` I/O
//! * [`projection`] - 3D/2D transforms, range/mask/depth images, datasets
//! * [`inr`] - the MLP, its gradients, Adam and the training loops
//! * [`compress`] - pruning, quantization, canonical Huffman, bitstream
//! * [`codec`] - end-to-end encode/decode
//! * [`metrics`] - Chamfer distance, bpp, retention ratio, BD-CD

pub mod codec;
pub mod compress;
pub mod error;
pub mod inr;
pub mod metrics;
pub mod pointcloud;
pub mod projection;

pub use codec::{
    decode, decode_bytes, encode, DecodeResult, EncodeConfig, EncodeOutput, EncodeReport,
};
pub use error::{Error, Result};
pub use pointcloud::{Point3, PointCloud};
pub use projection::{DepthImage, MaskImage, ProjectionParams, RangeImage};
