//! The `.rinc` container.
//!
//! All multi-byte integers and floats are little-endian:
//!
//! ```text
//! magic "RINC" | version u8 | W u16 | H u16 | N_p u8
//! phi_up f32 | phi_down f32 | rho_null f32 | d_min f32 | d_max f32
//! 2 x model (mask first, then depth):
//!     input_dim u8 | L u8 | V u16 | omega0 f32
//!     (L + 1) x layer:
//!         N_b u8 | mu_min f32 | mu_max f32 | symbol_count u16
//!         symbol_count x (symbol u32, length u8)
//!         payload_bit_count u32 | payload, zero-padded to a byte
//! ```
//!
//! The number of codes per layer follows from the architecture, so it is not
//! stored.

use crate::error::{Error, Result};
use crate::inr::{MlpArchitecture, OutputActivation};

use super::huffman::{huffman_build, huffman_decode, huffman_encode, HuffmanTable};
use super::quant::{QuantizedLayer, QuantizedModel, MAX_BITS, MIN_BITS};

pub const MAGIC: &[u8; 4] = b"RINC";
pub const VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 30;

/// Everything the decoder needs besides the two networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamHeader {
    pub width: u16,
    pub height: u16,
    pub patch_factor: u8,
    pub phi_up: f32,
    pub phi_down: f32,
    pub rho_null: f32,
    pub d_min: f32,
    pub d_max: f32,
}

/// Parsed form of a `.rinc` stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBitstream {
    pub header: StreamHeader,
    pub mask: QuantizedModel,
    pub depth: QuantizedModel,
}

fn f32_exact(x: f64, what: &str) -> Result<f32> {
    let f = x as f32;
    if f as f64 != x {
        return Err(Error::Config(format!(
            "{what} = {x} is not representable as f32"
        )));
    }
    Ok(f)
}

struct Writer {
    out: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.out.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.out.extend(v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.out.extend(v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.out.extend(v.to_le_bytes());
    }
}

fn narrow<T: TryFrom<usize>>(v: usize, what: &str) -> Result<T> {
    T::try_from(v).map_err(|_| Error::Config(format!("{what} = {v} does not fit the stream field")))
}

fn write_model(w: &mut Writer, model: &QuantizedModel, head: OutputActivation) -> Result<()> {
    let arch = &model.arch;
    if arch.output != head {
        return Err(Error::Config(format!(
            "model slot expects a {head:?} head, got {:?}",
            arch.output
        )));
    }
    if model.layers.len() != arch.hidden_layers + 1 {
        return Err(Error::Config(
            "layer count disagrees with the architecture".into(),
        ));
    }
    w.u8(narrow(arch.input_dim, "input_dim")?);
    w.u8(narrow(arch.hidden_layers, "L")?);
    w.u16(narrow(arch.hidden_width, "V")?);
    w.f32(f32_exact(arch.omega0, "omega0")?);
    for (layer, (fan_in, fan_out)) in model.layers.iter().zip(arch.layer_dims()) {
        if layer.codes.len() != fan_in * fan_out + fan_out {
            return Err(Error::Config(
                "layer code count disagrees with the architecture".into(),
            ));
        }
        let table = huffman_build(&layer.codes)?;
        let payload = huffman_encode(&layer.codes, &table)?;
        w.u8(layer.bits);
        w.f32(f32_exact(layer.mu_min, "mu_min")?);
        w.f32(f32_exact(layer.mu_max, "mu_max")?);
        w.u16(narrow(table.entries().len(), "symbol_count")?);
        for &(sym, len) in table.entries() {
            w.u32(sym);
            w.u8(len);
        }
        w.u32(narrow(payload.bit_len as usize, "payload_bit_count")?);
        w.out.extend(&payload.bytes);
    }
    Ok(())
}

/// Serializes both quantized networks behind `header`.
pub fn serialize_model(
    mask: &QuantizedModel,
    depth: &QuantizedModel,
    header: &StreamHeader,
) -> Result<Vec<u8>> {
    let mut w = Writer { out: Vec::new() };
    w.out.extend(MAGIC);
    w.u8(VERSION);
    w.u16(header.width);
    w.u16(header.height);
    w.u8(header.patch_factor);
    w.f32(header.phi_up);
    w.f32(header.phi_down);
    w.f32(header.rho_null);
    w.f32(header.d_min);
    w.f32(header.d_max);
    write_model(&mut w, mask, OutputActivation::Sigmoid)?;
    write_model(&mut w, depth, OutputActivation::Identity)?;
    Ok(w.out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| self.fail(format!("stream truncated while reading {what}")))?;
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
    fn f32(&mut self, what: &str) -> Result<f32> {
        let b = self.take(4, what)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn read_model(r: &mut Reader<'_>, head: OutputActivation) -> Result<QuantizedModel> {
    let input_dim = r.u8("input_dim")? as usize;
    let hidden_layers = r.u8("L")? as usize;
    let hidden_width = r.u16("V")? as usize;
    let omega0 = r.f32("omega0")? as f64;
    let arch = MlpArchitecture {
        input_dim,
        hidden_layers,
        hidden_width,
        output: head,
        omega0,
    };
    arch.validate().map_err(|e| r.fail(e.to_string()))?;
    let mut layers = Vec::with_capacity(hidden_layers + 1);
    for (fan_in, fan_out) in arch.layer_dims() {
        let bits = r.u8("N_b")?;
        if !(MIN_BITS..=MAX_BITS).contains(&bits) {
            return Err(r.fail(format!("bit depth {bits} out of range")));
        }
        let mu_min = r.f32("mu_min")? as f64;
        let mu_max = r.f32("mu_max")? as f64;
        if !(mu_min.is_finite() && mu_max.is_finite() && mu_max >= mu_min) {
            return Err(r.fail(format!("bad quantization range {mu_min}..{mu_max}")));
        }
        let symbol_count = r.u16("symbol_count")? as usize;
        let mut entries = Vec::with_capacity(symbol_count);
        for _ in 0..symbol_count {
            let sym = r.u32("table symbol")?;
            let len = r.u8("table length")?;
            if bits < 32 && sym >> bits != 0 {
                return Err(r.fail(format!("symbol {sym} exceeds {bits}-bit range")));
            }
            entries.push((sym, len));
        }
        let table_at = r.pos;
        let table = HuffmanTable::from_lengths(entries).map_err(|e| Error::Format {
            offset: table_at,
            reason: e.to_string(),
        })?;
        let bit_len = r.u32("payload_bit_count")? as u64;
        let payload_at = r.pos;
        let payload = r.take(bit_len.div_ceil(8) as usize, "payload")?;
        let codes =
            huffman_decode(payload, bit_len, &table, fan_in * fan_out + fan_out).map_err(|e| {
                Error::Format {
                    offset: payload_at,
                    reason: e.to_string(),
                }
            })?;
        layers.push(QuantizedLayer {
            codes,
            bits,
            mu_min,
            mu_max,
        });
    }
    Ok(QuantizedModel { arch, layers })
}

pub fn deserialize_model(bytes: &[u8]) -> Result<ModelBitstream> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: "bad magic, not a RINC stream".into(),
        });
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    let header = StreamHeader {
        width: r.u16("W")?,
        height: r.u16("H")?,
        patch_factor: r.u8("N_p")?,
        phi_up: r.f32("phi_up")?,
        phi_down: r.f32("phi_down")?,
        rho_null: r.f32("rho_null")?,
        d_min: r.f32("d_min")?,
        d_max: r.f32("d_max")?,
    };
    let mask = read_model(&mut r, OutputActivation::Sigmoid)?;
    let depth = read_model(&mut r, OutputActivation::Identity)?;
    if r.pos != bytes.len() {
        return Err(r.fail(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(ModelBitstream {
        header,
        mask,
        depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inr::Mlp;

    fn header() -> StreamHeader {
        StreamHeader {
            width: 64,
            height: 16,
            patch_factor: 4,
            phi_up: 0.05,
            phi_down: -0.45,
            rho_null: -1.0,
            d_min: 1.5,
            d_max: 80.25,
        }
    }

    fn models() -> (QuantizedModel, QuantizedModel) {
        let mask = Mlp::new(MlpArchitecture::mask(2, 5), 1).unwrap();
        let depth = Mlp::new(MlpArchitecture::depth(3, 4), 2).unwrap();
        (
            QuantizedModel::from_mlp(&mask, 8).unwrap(),
            QuantizedModel::from_mlp(&depth, 6).unwrap(),
        )
    }

    #[test]
    fn round_trip_is_exact() {
        let (mask, depth) = models();
        let bytes = serialize_model(&mask, &depth, &header()).unwrap();
        let back = deserialize_model(&bytes).unwrap();
        assert_eq!(back.header, header());
        assert_eq!(back.mask, mask);
        assert_eq!(back.depth, depth);
        assert_eq!(back.mask.to_mlp().unwrap(), mask.to_mlp().unwrap());
    }

    #[test]
    fn bad_magic_and_version() {
        let (mask, depth) = models();
        let mut bytes = serialize_model(&mask, &depth, &header()).unwrap();
        bytes[4] = 9;
        assert!(matches!(
            deserialize_model(&bytes),
            Err(Error::Format { offset: 4, .. })
        ));
        bytes[0] = b'X';
        assert!(matches!(
            deserialize_model(&bytes),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn every_truncation_is_a_format_error() {
        let (mask, depth) = models();
        let bytes = serialize_model(&mask, &depth, &header()).unwrap();
        for cut in 0..bytes.len() {
            assert!(
                matches!(deserialize_model(&bytes[..cut]), Err(Error::Format { .. })),
                "prefix of {cut} bytes decoded"
            );
        }
    }

    #[test]
    fn rejects_non_f32_bounds() {
        let (mut mask, depth) = models();
        mask.layers[0].mu_min = 0.1;
        assert!(serialize_model(&mask, &depth, &header()).is_err());
    }
}
