//! Python bindings: point clouds, projection, the codec and its metrics.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use rinc::codec::{decode_bytes, encode as encode_cloud, EncodeConfig as CoreConfig};
use rinc::compress::{
    dequantize_layer, huffman_build, huffman_decode as core_huffman_decode,
    huffman_encode as core_huffman_encode, quantize_layer as core_quantize, HuffmanTable,
    QuantizedLayer,
};
use rinc::inr::MlpArchitecture;
use rinc::metrics::{self, RdCurve, RdPoint};
use rinc::projection::{self, ProjectionParams};

fn py_err(e: rinc::Error) -> PyErr {
    match e {
        rinc::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// An immutable set of 3D points.
#[pyclass(name = "PointCloud", module = "rinc_py", frozen)]
struct PyPointCloud {
    inner: rinc::PointCloud,
}

#[pymethods]
impl PyPointCloud {
    #[new]
    fn new(points: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let pts = points
            .into_iter()
            .map(|(x, y, z)| rinc::Point3::new(x, y, z))
            .collect();
        Ok(Self {
            inner: rinc::PointCloud::from_points(pts).map_err(py_err)?,
        })
    }

    /// Reads `.bin` (KITTI) or `.xyz` text, chosen by extension.
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: rinc::pointcloud::read_cloud(path).map_err(py_err)?,
        })
    }

    /// Parses the bytes of a KITTI velodyne scan.
    #[staticmethod]
    fn from_kitti_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: rinc::pointcloud::parse_kitti_bin(data).map_err(py_err)?,
        })
    }

    fn write_xyz(&self, path: PathBuf) -> PyResult<()> {
        rinc::pointcloud::write_xyz(&self.inner, path).map_err(py_err)
    }

    fn to_list(&self) -> Vec<(f64, f64, f64)> {
        self.inner.iter().map(|p| (p.x, p.y, p.z)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __getitem__(&self, index: isize) -> PyResult<(f64, f64, f64)> {
        let n = self.inner.len() as isize;
        let i = if index < 0 { index + n } else { index };
        if !(0..n).contains(&i) {
            return Err(PyIndexError::new_err("point index out of range"));
        }
        let p = self.inner.points()[i as usize];
        Ok((p.x, p.y, p.z))
    }

    fn __repr__(&self) -> String {
        format!("PointCloud({} points)", self.inner.len())
    }
}

/// A panoramic range image; empty pixels hold `rho_null`.
#[pyclass(name = "RangeImage", module = "rinc_py", frozen)]
struct PyRangeImage {
    inner: projection::RangeImage,
}

#[pymethods]
impl PyRangeImage {
    #[getter]
    fn width(&self) -> usize {
        self.inner.params().width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.params().height
    }

    #[getter]
    fn phi_bounds(&self) -> (f64, f64) {
        (self.inner.params().phi_up, self.inner.params().phi_down)
    }

    #[getter]
    fn rho_null(&self) -> f64 {
        self.inner.params().rho_null
    }

    /// Row-major pixel values.
    fn pixels(&self) -> Vec<f64> {
        self.inner.pixels().to_vec()
    }

    fn occupied_count(&self) -> usize {
        self.inner.occupied_count()
    }

    fn unproject(&self) -> PyPointCloud {
        PyPointCloud {
            inner: projection::unproject(&self.inner),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "RangeImage({}x{}, {} occupied)",
            self.width(),
            self.height(),
            self.occupied_count()
        )
    }
}

/// Projects `cloud`; elevation bounds are fitted to the cloud unless both are given.
#[pyfunction]
#[pyo3(signature = (cloud, width=1024, height=64, phi_up=None, phi_down=None, rho_null=-1.0))]
fn project(
    cloud: &PyPointCloud,
    width: usize,
    height: usize,
    phi_up: Option<f64>,
    phi_down: Option<f64>,
    rho_null: f64,
) -> PyResult<PyRangeImage> {
    let params = match (phi_up, phi_down) {
        (Some(up), Some(down)) => ProjectionParams::new(width, height, up, down, rho_null),
        (None, None) => ProjectionParams::fit(&cloud.inner, width, height, rho_null),
        _ => {
            return Err(PyValueError::new_err(
                "give both phi_up and phi_down or neither",
            ))
        }
    }
    .map_err(py_err)?;
    Ok(PyRangeImage {
        inner: projection::project(&cloud.inner, &params).map_err(py_err)?,
    })
}

/// Encoder settings. Defaults match the command-line tool.
#[pyclass(name = "EncodeConfig", module = "rinc_py", get_all, set_all)]
struct PyEncodeConfig {
    width: usize,
    height: usize,
    patch_factor: usize,
    layers: usize,
    mask_width: usize,
    depth_width: usize,
    epochs: usize,
    mask_sparsity: f64,
    depth_sparsity: f64,
    mask_bits: u8,
    depth_bits: u8,
    seed: u64,
    rho_null: f64,
    phi_bounds: Option<(f64, f64)>,
}

#[pymethods]
impl PyEncodeConfig {
    #[new]
    #[pyo3(signature = (
        width=1024, height=64, patch_factor=16, layers=6, mask_width=40, depth_width=40,
        epochs=3000, mask_sparsity=0.0, depth_sparsity=0.0, mask_bits=8, depth_bits=8,
        seed=0, rho_null=-1.0, phi_bounds=None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        width: usize,
        height: usize,
        patch_factor: usize,
        layers: usize,
        mask_width: usize,
        depth_width: usize,
        epochs: usize,
        mask_sparsity: f64,
        depth_sparsity: f64,
        mask_bits: u8,
        depth_bits: u8,
        seed: u64,
        rho_null: f64,
        phi_bounds: Option<(f64, f64)>,
    ) -> PyResult<Self> {
        let cfg = Self {
            width,
            height,
            patch_factor,
            layers,
            mask_width,
            depth_width,
            epochs,
            mask_sparsity,
            depth_sparsity,
            mask_bits,
            depth_bits,
            seed,
            rho_null,
            phi_bounds,
        };
        cfg.to_core()?;
        Ok(cfg)
    }
}

impl PyEncodeConfig {
    fn to_core(&self) -> PyResult<CoreConfig> {
        let mut cfg = CoreConfig::new(self.mask_width, self.depth_width, self.epochs, self.seed);
        cfg.width = self.width;
        cfg.height = self.height;
        cfg.patch_factor = self.patch_factor;
        cfg.mask_arch = MlpArchitecture::mask(self.layers, self.mask_width);
        cfg.depth_arch = MlpArchitecture::depth(self.layers, self.depth_width);
        cfg.mask_sparsity = self.mask_sparsity;
        cfg.depth_sparsity = self.depth_sparsity;
        cfg.mask_bits = self.mask_bits;
        cfg.depth_bits = self.depth_bits;
        cfg.rho_null = self.rho_null;
        cfg.phi_bounds = self.phi_bounds;
        cfg.validate().map_err(py_err)?;
        Ok(cfg)
    }
}

/// Compresses `cloud`; returns the stream and `(stream_bits, bpp)`.
#[pyfunction]
fn encode<'py>(
    py: Python<'py>,
    cloud: &PyPointCloud,
    config: &PyEncodeConfig,
) -> PyResult<(Bound<'py, PyBytes>, u64, f64)> {
    let cfg = config.to_core()?;
    let cloud = cloud.inner.clone();
    let out = py
        .detach(move || encode_cloud(&cloud, &cfg))
        .map_err(py_err)?;
    Ok((
        PyBytes::new(py, &out.bytes),
        out.report.stream_bits,
        out.report.bpp,
    ))
}

/// Decodes a stream; returns the cloud and the range image.
#[pyfunction]
fn decode(py: Python<'_>, stream: &[u8]) -> PyResult<(PyPointCloud, PyRangeImage)> {
    let bytes = stream.to_vec();
    let dec = py.detach(move || decode_bytes(&bytes)).map_err(py_err)?;
    Ok((
        PyPointCloud { inner: dec.cloud },
        PyRangeImage {
            inner: dec.range_image,
        },
    ))
}

#[pyfunction]
fn chamfer(py: Python<'_>, p: &PyPointCloud, q: &PyPointCloud) -> PyResult<f64> {
    let (p, q) = (p.inner.clone(), q.inner.clone());
    py.detach(move || metrics::chamfer(&p, &q)).map_err(py_err)
}

#[pyfunction]
fn retention_ratio(original: &PyPointCloud, reconstructed: &PyPointCloud) -> PyResult<f64> {
    metrics::retention_ratio(&original.inner, &reconstructed.inner).map_err(py_err)
}

fn curve(points: Vec<(f64, f64)>) -> PyResult<RdCurve> {
    RdCurve::new(
        points
            .into_iter()
            .map(|(bpp, cd)| RdPoint { bpp, cd })
            .collect(),
    )
    .map_err(py_err)
}

/// Average CD gap of `test` over `reference`; each curve is `[(bpp, cd), ...]`.
#[pyfunction]
fn bd_cd(reference: Vec<(f64, f64)>, test: Vec<(f64, f64)>) -> PyResult<f64> {
    metrics::bd_cd(&curve(reference)?, &curve(test)?).map_err(py_err)
}

/// Uniform quantization; returns `(codes, mu_min, mu_max)`.
#[pyfunction]
fn quantize_layer(values: Vec<f64>, bits: u8) -> PyResult<(Vec<u32>, f64, f64)> {
    let q = core_quantize(&values, bits).map_err(py_err)?;
    Ok((q.codes, q.mu_min, q.mu_max))
}

#[pyfunction]
fn dequantize(codes: Vec<u32>, bits: u8, mu_min: f64, mu_max: f64) -> Vec<f64> {
    dequantize_layer(&QuantizedLayer {
        codes,
        bits,
        mu_min,
        mu_max,
    })
}

/// Canonical Huffman coding; returns `(table, payload, bit_len)` where the
/// table lists `(symbol, code_length)`.
#[pyfunction]
fn huffman_encode<'py>(
    py: Python<'py>,
    symbols: Vec<u32>,
) -> PyResult<(Vec<(u32, u8)>, Bound<'py, PyBytes>, u64)> {
    let table = huffman_build(&symbols).map_err(py_err)?;
    let buf = core_huffman_encode(&symbols, &table).map_err(py_err)?;
    Ok((
        table.entries().to_vec(),
        PyBytes::new(py, &buf.bytes),
        buf.bit_len,
    ))
}

#[pyfunction]
fn huffman_decode(
    table: Vec<(u32, u8)>,
    payload: &[u8],
    bit_len: u64,
    count: usize,
) -> PyResult<Vec<u32>> {
    let table = HuffmanTable::from_lengths(table).map_err(py_err)?;
    core_huffman_decode(payload, bit_len, &table, count).map_err(py_err)
}

#[pymodule]
fn rinc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyRangeImage>()?;
    m.add_class::<PyEncodeConfig>()?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(chamfer, m)?)?;
    m.add_function(wrap_pyfunction!(retention_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(bd_cd, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_layer, m)?)?;
    m.add_function(wrap_pyfunction!(dequantize, m)?)?;
    m.add_function(wrap_pyfunction!(huffman_encode, m)?)?;
    m.add_function(wrap_pyfunction!(huffman_decode, m)?)?;
    Ok(())
}
