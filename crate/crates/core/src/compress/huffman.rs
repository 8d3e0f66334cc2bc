//! Canonical Huffman coding of quantization codes.
//!
//! Only `(symbol, length)` pairs are stored; codewords are reassigned
//! canonically from the lengths, sorted by `(length, symbol)`. Bits are
//! packed MSB-first.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use crate::error::{Error, Result};

pub const MAX_CODE_LEN: u8 = 64;

/// A packed bit sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitBuffer {
    pub bytes: Vec<u8>,
    pub bit_len: u64,
}

#[derive(Debug, Default)]
pub struct BitWriter {
    buf: BitBuffer,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `len` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, len: u8) {
        for i in (0..len).rev() {
            let bit = (value >> i) & 1;
            let pos = self.buf.bit_len;
            if pos % 8 == 0 {
                self.buf.bytes.push(0);
            }
            if bit == 1 {
                *self.buf.bytes.last_mut().unwrap() |= 0x80 >> (pos % 8);
            }
            self.buf.bit_len += 1;
        }
    }

    pub fn finish(self) -> BitBuffer {
        self.buf
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    bit_len: u64,
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], bit_len: u64) -> Self {
        Self {
            bytes,
            bit_len: bit_len.min(bytes.len() as u64 * 8),
            pos: 0,
        }
    }

    pub fn read_bit(&mut self) -> Option<u8> {
        if self.pos >= self.bit_len {
            return None;
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = (byte >> (7 - self.pos % 8)) & 1;
        self.pos += 1;
        Some(bit)
    }

    pub fn position(&self) -> u64 {
        self.pos
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTable {
    /// `(symbol, code length)` sorted by `(length, symbol)`.
    entries: Vec<(u32, u8)>,
    codes: HashMap<u32, (u64, u8)>,
    /// Per length: first canonical code, index of its entry, entry count.
    decode_rows: Vec<(u64, usize, usize)>,
}

impl HuffmanTable {
    /// Rebuilds a table from stored lengths, checking that they describe a
    /// prefix code.
    pub fn from_lengths(mut entries: Vec<(u32, u8)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::CorruptStream("Huffman table has no symbols".into()));
        }
        if let Some(&(s, l)) = entries.iter().find(|&&(_, l)| l == 0 || l > MAX_CODE_LEN) {
            return Err(Error::CorruptStream(format!(
                "symbol {s} has code length {l}"
            )));
        }
        entries.sort_by_key(|&(s, l)| (l, s));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::CorruptStream(
                "Huffman table repeats a symbol".into(),
            ));
        }
        // Kraft sum scaled by 2^64.
        let kraft: u128 = entries.iter().map(|&(_, l)| 1u128 << (64 - l)).sum();
        if kraft > 1u128 << 64 {
            return Err(Error::CorruptStream(
                "code lengths violate the Kraft inequality".into(),
            ));
        }

        let max_len = entries.last().unwrap().1 as usize;
        let mut decode_rows = vec![(0u64, 0usize, 0usize); max_len + 1];
        let mut codes = HashMap::with_capacity(entries.len());
        let mut code: u64 = 0;
        let mut prev_len = entries[0].1;
        for (idx, &(sym, len)) in entries.iter().enumerate() {
            if idx > 0 {
                code += 1;
                code <<= len - prev_len;
            }
            prev_len = len;
            let row = &mut decode_rows[len as usize];
            if row.2 == 0 {
                *row = (code, idx, 0);
            }
            row.2 += 1;
            codes.insert(sym, (code, len));
        }
        Ok(Self {
            entries,
            codes,
            decode_rows,
        })
    }

    pub fn entries(&self) -> &[(u32, u8)] {
        &self.entries
    }

    pub fn code_of(&self, symbol: u32) -> Option<(u64, u8)> {
        self.codes.get(&symbol).copied()
    }

    /// Sum of `2^-len` over all codewords.
    pub fn kraft_sum(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, l)| 0.5f64.powi(l as i32))
            .sum()
    }
}

/// Canonical Huffman table for the symbol frequencies of `symbols`. A
/// single-symbol alphabet gets a one-bit code.
pub fn huffman_build(symbols: &[u32]) -> Result<HuffmanTable> {
    if symbols.is_empty() {
        return Err(Error::Config(
            "cannot build a Huffman table from no symbols".into(),
        ));
    }
    let mut freq: BTreeMap<u32, u64> = BTreeMap::new();
    for &s in symbols {
        *freq.entry(s).or_default() += 1;
    }
    if freq.len() == 1 {
        let sym = *freq.keys().next().unwrap();
        return HuffmanTable::from_lengths(vec![(sym, 1)]);
    }

    // Leaves are 0..n, internal nodes follow. Ties break on node id so the
    // result depends only on the frequencies.
    let syms: Vec<u32> = freq.keys().copied().collect();
    let mut parent: Vec<usize> = vec![usize::MAX; 2 * syms.len() - 1];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = freq
        .values()
        .enumerate()
        .map(|(i, &f)| Reverse((f, i)))
        .collect();
    let mut next = syms.len();
    while heap.len() > 1 {
        let Reverse((fa, a)) = heap.pop().unwrap();
        let Reverse((fb, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((fa + fb, next)));
        next += 1;
    }
    let root = next - 1;
    let mut depth = vec![0u8; parent.len()];
    for node in (0..root).rev() {
        depth[node] = depth[parent[node]] + 1;
    }
    if let Some(&too_long) = depth[..syms.len()].iter().find(|&&d| d > MAX_CODE_LEN) {
        return Err(Error::Config(format!(
            "Huffman code length {too_long} exceeds {MAX_CODE_LEN}"
        )));
    }
    HuffmanTable::from_lengths(syms.iter().copied().zip(depth).collect())
}

pub fn huffman_encode(symbols: &[u32], table: &HuffmanTable) -> Result<BitBuffer> {
    let mut w = BitWriter::new();
    for &s in symbols {
        let (code, len) = table
            .code_of(s)
            .ok_or_else(|| Error::Config(format!("symbol {s} is not in the Huffman table")))?;
        w.write_bits(code, len);
    }
    Ok(w.finish())
}

/// Decodes exactly `count` symbols from the first `bit_len` bits of `bytes`.
pub fn huffman_decode(
    bytes: &[u8],
    bit_len: u64,
    table: &HuffmanTable,
    count: usize,
) -> Result<Vec<u32>> {
    let mut reader = BitReader::new(bytes, bit_len);
    let mut out = Vec::with_capacity(count);
    let max_len = table.decode_rows.len() - 1;
    while out.len() < count {
        let mut code: u64 = 0;
        let mut len = 0;
        loop {
            let bit = reader.read_bit().ok_or_else(|| {
                Error::CorruptStream(format!(
                    "payload exhausted after {} of {count} symbols",
                    out.len()
                ))
            })?;
            code = (code << 1) | bit as u64;
            len += 1;
            let (first, index, n) = table.decode_rows[len];
            if n > 0 && code >= first && code - first < n as u64 {
                out.push(table.entries[index + (code - first) as usize].0);
                break;
            }
            if len == max_len {
                return Err(Error::CorruptStream(format!(
                    "invalid codeword at bit {}",
                    reader.position()
                )));
            }
        }
    }
    Ok(out)
}
