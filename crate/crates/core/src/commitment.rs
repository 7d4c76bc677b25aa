//! Fuzzy commitment for iris codes.
//!
//! The 120-bit key is padded with bits of its own digest, encoded by the
//! concatenated RS/Hadamard code and XOR-masked with the enrollment iris
//! code. Only the masked word and a SHA-256 digest of the key are stored.
//! A query within the code's correction radius of the enrollment iris
//! unmasks a word that decodes back to the key.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ecc::{ConcatenatedCode, EccError, EccParams, Symbol};
use crate::keys::{bits_to_bytes, bytes_to_bits, KeyBits, KEY_BITS};
use crate::time::Timestamp;

pub const DEFAULT_THRESHOLD: f64 = 0.30;

#[derive(Debug, Error, PartialEq)]
pub enum CommitmentError {
    #[error("bit string length {got} does not match {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Ecc(#[from] EccError),
    #[error("code carries {0} message bits; need between {KEY_BITS} and {max}", max = KEY_BITS + 256)]
    MessageWidth(usize),
    #[error("threshold must lie in (0, 0.5), got {0}")]
    BadThreshold(f64),
    #[error("iris code parse error: {0}")]
    Parse(String),
    #[error("commitment decommit rejected: {0}")]
    Rejected(RejectReason),
}

/// Why a decommit released nothing. Each reason is reported separately so
/// an evaluation can tell the gates apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ThresholdExceeded,
    EccFailure,
    DigestMismatch,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::ThresholdExceeded => "threshold_exceeded",
            RejectReason::EccFailure => "ecc_failure",
            RejectReason::DigestMismatch => "digest_mismatch",
        })
    }
}

/// Where the Hamming threshold is applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateOrder {
    /// Distance between the fully decoded-and-re-encoded codeword and the
    /// unmasked candidate.
    #[default]
    AfterDecode,
    /// Distance between the candidate and its nearest inner codewords,
    /// checked before the outer code runs.
    BeforeDecode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitParams {
    pub ecc: EccParams,
    pub threshold: f64,
    #[serde(default)]
    pub gate: GateOrder,
}

impl Default for CommitParams {
    fn default() -> Self {
        Self { ecc: EccParams::default(), threshold: DEFAULT_THRESHOLD, gate: GateOrder::AfterDecode }
    }
}

impl CommitParams {
    pub fn validate(&self) -> Result<ConcatenatedCode, CommitmentError> {
        if !(self.threshold > 0.0 && self.threshold < 0.5) {
            return Err(CommitmentError::BadThreshold(self.threshold));
        }
        let width = self.ecc.message_bits();
        if !(KEY_BITS..=KEY_BITS + 256).contains(&width) {
            return Err(CommitmentError::MessageWidth(width));
        }
        Ok(self.ecc.build()?)
    }

    pub fn iris_bits(&self) -> usize {
        self.ecc.codeword_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrisCode {
    pub id: String,
    pub bits: Vec<bool>,
}

impl IrisCode {
    pub fn new(id: impl Into<String>, bits: Vec<bool>) -> Self {
        Self { id: id.into(), bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_binary_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(bits_to_bytes(&self.bits)))
    }
}

impl FromStr for IrisCode {
    type Err = CommitmentError;

    /// A single line of `0`/`1` characters, or hex with a `0x` prefix.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bits = if let Some(h) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
            bytes_to_bits(&hex::decode(h).map_err(|e| CommitmentError::Parse(e.to_string()))?)
        } else {
            s.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(CommitmentError::Parse(format!("unexpected character {other:?}"))),
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        Ok(IrisCode::new("", bits))
    }
}

pub fn hamming_distance(a: &[bool], b: &[bool]) -> Result<usize, CommitmentError> {
    if a.len() != b.len() {
        return Err(CommitmentError::LengthMismatch { expected: a.len(), got: b.len() });
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

pub fn hamming_fraction(a: &[bool], b: &[bool]) -> Result<f64, CommitmentError> {
    let d = hamming_distance(a, b)?;
    Ok(if a.is_empty() { 0.0 } else { d as f64 / a.len() as f64 })
}

fn xor(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commitment {
    pub masked: Vec<bool>,
    pub key_digest: [u8; 32],
    pub params: CommitParams,
    pub created_at: Timestamp,
}

/// The key followed by the leading bits of SHA-256(key), filling the outer
/// code's message width.
fn pad_key(key: &KeyBits, message_bits: usize) -> Vec<bool> {
    let mut bits = key.to_bits();
    let digest = bytes_to_bits(&Sha256::digest(key.as_bytes()));
    bits.extend_from_slice(&digest[..message_bits - KEY_BITS]);
    bits
}

fn unpad_key(bits: &[bool]) -> Option<KeyBits> {
    let key = KeyBits::from_bits(&bits[..KEY_BITS])?;
    let digest = bytes_to_bits(&Sha256::digest(key.as_bytes()));
    (bits[KEY_BITS..] == digest[..bits.len() - KEY_BITS]).then_some(key)
}

fn bits_to_symbols(bits: &[bool], width: u32) -> Vec<Symbol> {
    bits.chunks(width as usize).map(|c| c.iter().fold(0, |acc, &b| (acc << 1) | b as Symbol)).collect()
}

fn symbols_to_bits(symbols: &[Symbol], width: u32) -> Vec<bool> {
    symbols.iter().flat_map(|&s| (0..width).rev().map(move |i| (s >> i) & 1 == 1)).collect()
}

pub fn commit(iris: &IrisCode, key: &KeyBits, params: CommitParams, now: Timestamp) -> Result<Commitment, CommitmentError> {
    let code = params.validate()?;
    if iris.len() != code.codeword_bits() {
        return Err(CommitmentError::LengthMismatch { expected: code.codeword_bits(), got: iris.len() });
    }
    let message = bits_to_symbols(&pad_key(key, params.ecc.message_bits()), params.ecc.field_m);
    let codeword = code.encode(&message)?;
    Ok(Commitment { masked: xor(&codeword, &iris.bits), key_digest: key.digest(), params, created_at: now })
}

/// Releases the key when `query` is close enough to the enrollment iris.
pub fn decommit(query: &IrisCode, commitment: &Commitment) -> Result<KeyBits, CommitmentError> {
    let code = commitment.params.validate()?;
    if query.len() != commitment.masked.len() || query.len() != code.codeword_bits() {
        return Err(CommitmentError::LengthMismatch { expected: commitment.masked.len(), got: query.len() });
    }
    let reject = |r| Err(CommitmentError::Rejected(r));
    let threshold = commitment.params.threshold;
    let candidate = xor(&commitment.masked, &query.bits);
    let inner = code.decode_inner(&candidate)?;

    if commitment.params.gate == GateOrder::BeforeDecode {
        let dist: usize = inner.iter().map(|d| d.distance).sum();
        if dist as f64 / candidate.len() as f64 >= threshold {
            return reject(RejectReason::ThresholdExceeded);
        }
    }

    let outer: Vec<Symbol> = inner.iter().map(|d| d.message as Symbol).collect();
    let message = match code.rs().decode(&outer) {
        Ok(d) => d.message,
        Err(_) => return reject(RejectReason::EccFailure),
    };

    if commitment.params.gate == GateOrder::AfterDecode {
        let reencoded = code.encode(&message)?;
        if hamming_fraction(&reencoded, &candidate)? >= threshold {
            return reject(RejectReason::ThresholdExceeded);
        }
    }

    let bits = symbols_to_bits(&message, commitment.params.ecc.field_m);
    let Some(key) = unpad_key(&bits) else {
        return reject(RejectReason::DigestMismatch);
    };
    if key.digest() != commitment.key_digest {
        return reject(RejectReason::DigestMismatch);
    }
    Ok(key)
}

impl Commitment {
    /// Text form: `FC1 <field_m> <rs_n> <rs_k> <hadamard_m> <N> <threshold> <gate> <created_at>`,
    /// then the masked word and the digest as hex lines.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let gate = match p.gate {
            GateOrder::AfterDecode => "after",
            GateOrder::BeforeDecode => "before",
        };
        format!(
            "FC1 {} {} {} {} {} {} {} {}\n{}\n{}\n",
            p.ecc.field_m,
            p.ecc.rs_n,
            p.ecc.rs_k,
            p.ecc.hadamard_m,
            self.masked.len(),
            p.threshold,
            gate,
            self.created_at,
            hex::encode(bits_to_bytes(&self.masked)),
            hex::encode(self.key_digest)
        )
    }
}

impl FromStr for Commitment {
    type Err = CommitmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |what: &str| CommitmentError::Parse(format!("commitment file: {what}"));
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if header.len() != 9 || header[0] != "FC1" {
            return Err(bad("header"));
        }
        let num = |i: usize| header[i].parse::<usize>().map_err(|_| bad("header number"));
        let ecc = EccParams { field_m: num(1)? as u32, rs_n: num(2)?, rs_k: num(3)?, hadamard_m: num(4)? as u32 };
        let n = num(5)?;
        let threshold: f64 = header[6].parse().map_err(|_| bad("threshold"))?;
        let gate = match header[7] {
            "after" => GateOrder::AfterDecode,
            "before" => GateOrder::BeforeDecode,
            _ => return Err(bad("gate")),
        };
        let created_at = header[8].parse().map_err(|_| bad("created_at"))?;
        let masked_bytes = hex::decode(lines.next().ok_or_else(|| bad("missing masked"))?).map_err(|_| bad("masked hex"))?;
        let mut masked = bytes_to_bits(&masked_bytes);
        if masked.len() < n || masked.len() >= n + 8 {
            return Err(bad("masked length"));
        }
        masked.truncate(n);
        let digest = hex::decode(lines.next().ok_or_else(|| bad("missing digest"))?).map_err(|_| bad("digest hex"))?;
        let key_digest: [u8; 32] = digest.try_into().map_err(|_| bad("digest length"))?;
        let params = CommitParams { ecc, threshold, gate };
        params.validate()?;
        if n != params.iris_bits() {
            return Err(bad("N does not match code parameters"));
        }
        Ok(Commitment { masked, key_digest, params, created_at })
    }
}
