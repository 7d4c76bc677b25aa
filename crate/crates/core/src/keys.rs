//! Binary key material shared by the commitment and the record cipher.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const KEY_BITS: usize = 120;
pub const KEY_BYTES: usize = KEY_BITS / 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyParseError {
    #[error("expected {want} hex chars, got {0}", want = KEY_BYTES * 2)]
    Length(usize),
    #[error("invalid hex")]
    Hex,
}

/// A 120-bit symmetric key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyBits(pub [u8; KEY_BYTES]);

impl KeyBits {
    /// SHA-256 of the decimal key string, truncated to 120 bits.
    pub fn from_digits(digits: &str) -> Self {
        let digest = Sha256::digest(digits.as_bytes());
        let mut out = [0u8; KEY_BYTES];
        out.copy_from_slice(&digest[..KEY_BYTES]);
        KeyBits(out)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_BYTES] {
        &self.0
    }

    /// MSB-first bits.
    pub fn to_bits(&self) -> Vec<bool> {
        bytes_to_bits(&self.0)
    }

    pub fn from_bits(bits: &[bool]) -> Option<Self> {
        if bits.len() != KEY_BITS {
            return None;
        }
        let bytes = bits_to_bytes(bits);
        let mut out = [0u8; KEY_BYTES];
        out.copy_from_slice(&bytes);
        Some(KeyBits(out))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.0).into()
    }

    /// Flips bit `index` (MSB-first).
    pub fn with_bit_flipped(mut self, index: usize) -> Self {
        self.0[index / 8] ^= 0x80 >> (index % 8);
        self
    }
}

impl fmt::Debug for KeyBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyBits({})", self.to_hex())
    }
}

impl FromStr for KeyBits {
    type Err = KeyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let s = s.strip_prefix("0x").unwrap_or(s);
        let bytes = hex::decode(s).map_err(|_| KeyParseError::Hex)?;
        if bytes.len() != KEY_BYTES {
            return Err(KeyParseError::Length(s.len()));
        }
        let mut out = [0u8; KEY_BYTES];
        out.copy_from_slice(&bytes);
        Ok(KeyBits(out))
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes.iter().flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1 == 1)).collect()
}

/// Packs MSB-first; a trailing partial byte is zero-padded.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits_map_to_truncated_digest() {
        let k = KeyBits::from_digits("123456789012345");
        let full = sha256_hex(b"123456789012345");
        assert_eq!(k.to_hex(), full[..30]);
    }

    #[test]
    fn bit_round_trip() {
        let k = KeyBits::from_digits("42");
        assert_eq!(KeyBits::from_bits(&k.to_bits()), Some(k));
        assert_eq!(k.to_hex().parse::<KeyBits>(), Ok(k));
        assert_eq!(format!("0x{}", k.to_hex()).parse::<KeyBits>(), Ok(k));
        assert!("abcd".parse::<KeyBits>().is_err());
    }

    #[test]
    fn empty_digest() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
