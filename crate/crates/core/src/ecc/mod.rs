//! Error-correcting codes backing the iris commitment: Reed–Solomon over
//! GF(2^m) as the outer code for burst/block errors and an augmented
//! Hadamard code as the inner code for scattered bit errors.

pub mod gf;
pub mod hadamard;
pub mod rs;
pub mod selftest;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gf::{GaloisField, Symbol};
pub use hadamard::{HadamardCode, HadamardDecoded};
pub use rs::{ReedSolomon, RsDecoded, RsError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EccError {
    #[error(transparent)]
    Rs(#[from] RsError),
    #[error(transparent)]
    Hadamard(#[from] hadamard::HadamardError),
    #[error("Hadamard order {hadamard_m} carries {} bits but RS symbols have {field_m}", hadamard_m + 1)]
    SymbolWidthMismatch { field_m: u32, hadamard_m: u32 },
}

/// Parameters of the concatenated code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EccParams {
    pub field_m: u32,
    pub rs_n: usize,
    pub rs_k: usize,
    pub hadamard_m: u32,
}

impl Default for EccParams {
    /// GF(2^7), RS(32,20), Hadamard order 6: a 2048-bit codeword.
    fn default() -> Self {
        Self { field_m: 7, rs_n: 32, rs_k: 20, hadamard_m: 6 }
    }
}

impl EccParams {
    pub fn codeword_bits(&self) -> usize {
        self.rs_n << self.hadamard_m
    }

    pub fn message_bits(&self) -> usize {
        self.rs_k * self.field_m as usize
    }

    pub fn build(&self) -> Result<ConcatenatedCode, EccError> {
        ConcatenatedCode::new(*self)
    }
}

/// Outcome of decoding a concatenated codeword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcatDecoded {
    pub message: Vec<Symbol>,
    pub rs_corrections: usize,
    pub inner_ties: usize,
}

#[derive(Debug, Clone)]
pub struct ConcatenatedCode {
    params: EccParams,
    rs: ReedSolomon,
    inner: HadamardCode,
}

impl ConcatenatedCode {
    pub fn new(params: EccParams) -> Result<Self, EccError> {
        if params.hadamard_m + 1 != params.field_m {
            return Err(EccError::SymbolWidthMismatch { field_m: params.field_m, hadamard_m: params.hadamard_m });
        }
        let rs = ReedSolomon::with_degree(params.field_m, params.rs_n, params.rs_k)?;
        let inner = HadamardCode::new(params.hadamard_m)?;
        Ok(Self { params, rs, inner })
    }

    pub fn params(&self) -> EccParams {
        self.params
    }

    pub fn rs(&self) -> &ReedSolomon {
        &self.rs
    }

    pub fn inner(&self) -> &HadamardCode {
        &self.inner
    }

    pub fn codeword_bits(&self) -> usize {
        self.params.codeword_bits()
    }

    pub fn encode(&self, message: &[Symbol]) -> Result<Vec<bool>, EccError> {
        let outer = self.rs.encode(message)?;
        self.encode_outer(&outer)
    }

    /// Hadamard-encodes an already RS-encoded symbol vector.
    pub fn encode_outer(&self, outer: &[Symbol]) -> Result<Vec<bool>, EccError> {
        let mut bits = Vec::with_capacity(outer.len() * self.inner.codeword_len());
        for &sym in outer {
            bits.extend(self.inner.encode(sym as u32)?);
        }
        Ok(bits)
    }

    /// Maximum-likelihood decode of each inner block.
    pub fn decode_inner(&self, bits: &[bool]) -> Result<Vec<HadamardDecoded>, EccError> {
        let block = self.inner.codeword_len();
        if bits.len() != self.codeword_bits() {
            return Err(hadamard::HadamardError::Length { expected: self.codeword_bits(), got: bits.len() }.into());
        }
        bits.chunks(block).map(|chunk| self.inner.decode(chunk).map_err(EccError::from)).collect()
    }

    pub fn decode(&self, bits: &[bool]) -> Result<ConcatDecoded, EccError> {
        let inner = self.decode_inner(bits)?;
        let symbols: Vec<Symbol> = inner.iter().map(|d| d.message as Symbol).collect();
        let decoded = self.rs.decode(&symbols)?;
        Ok(ConcatDecoded {
            message: decoded.message,
            rs_corrections: decoded.corrected,
            inner_ties: inner.iter().filter(|d| d.tie).count(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_stack_shape() {
        let code = EccParams::default().build().unwrap();
        assert_eq!(code.codeword_bits(), 2048);
        assert_eq!(EccParams::default().message_bits(), 140);
        assert_eq!(code.inner().capacity(), 15);
        assert_eq!(code.rs().t(), 6);
    }

    #[test]
    fn mismatched_widths_rejected() {
        let p = EccParams { hadamard_m: 5, ..EccParams::default() };
        assert!(matches!(p.build(), Err(EccError::SymbolWidthMismatch { .. })));
    }

    #[test]
    fn concatenated_round_trip_with_block_and_bit_errors() {
        let code = EccParams::default().build().unwrap();
        let msg: Vec<Symbol> = (0..20).map(|i| (i * 37 % 128) as Symbol).collect();
        let mut bits = code.encode(&msg).unwrap();
        // wipe six whole blocks
        for block in [0, 5, 9, 17, 25, 31] {
            for b in &mut bits[block * 64..block * 64 + 64] {
                *b = !*b;
            }
        }
        // and scatter 15 flips in every other block
        for block in (1..31).filter(|b| ![5, 9, 17, 25].contains(b)) {
            for i in 0..15 {
                bits[block * 64 + i * 4] ^= true;
            }
        }
        let d = code.decode(&bits).unwrap();
        assert_eq!(d.message, msg);
        assert_eq!(d.rs_corrections, 6);
    }
}
