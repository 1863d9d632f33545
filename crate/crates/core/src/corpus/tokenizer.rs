use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// One token and the half-open byte range it covers in the completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenOffset {
    pub id: u32,
    pub start: usize,
    pub end: usize,
}

pub const BOS: u32 = 256;
pub const EOS: u32 = 257;
pub const PAD: u32 = 258;

pub trait Tokenizer {
    fn encode(&self, text: &str) -> Vec<TokenOffset>;
    fn vocab_size(&self) -> usize;
}

/// One token per byte; ids 0..=255 are bytes, then BOS, EOS, PAD.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteTokenizer;

impl ByteTokenizer {
    pub fn ids(text: &str) -> Vec<u32> {
        text.bytes().map(u32::from).collect()
    }

    /// Lossy decode of byte tokens; special ids are skipped.
    pub fn decode(ids: &[u32]) -> alloc::string::String {
        let bytes: Vec<u8> = ids.iter().filter(|&&t| t < 256).map(|&t| t as u8).collect();
        alloc::string::String::from_utf8_lossy(&bytes).into_owned()
    }
}

impl Tokenizer for ByteTokenizer {
    fn encode(&self, text: &str) -> Vec<TokenOffset> {
        text.bytes()
            .enumerate()
            .map(|(i, b)| TokenOffset { id: u32::from(b), start: i, end: i + 1 })
            .collect()
    }

    fn vocab_size(&self) -> usize {
        259
    }
}
