//! Weight compression: global magnitude pruning, per-layer uniform
//! quantization, canonical Huffman coding and the `.rinc` container.

pub mod bitstream;
pub mod huffman;
pub mod prune;
pub mod quant;

pub use bitstream::{deserialize_model, serialize_model, ModelBitstream, StreamHeader};
pub use huffman::{huffman_build, huffman_decode, huffman_encode, BitBuffer, HuffmanTable};
pub use prune::{prune_global, weight_sparsity, PruneSpec};
pub use quant::{dequantize_layer, quantize_layer, QuantizedLayer, QuantizedModel};
