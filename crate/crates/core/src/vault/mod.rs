//! Polynomial fuzzy vault for fingerprint templates.
//!
//! A decimal key is cut into four chunks that become the roots of a monic
//! quartic. The five coefficients are written as fixed-width base64 fields
//! and spliced into the template's canonical byte stream at offsets derived
//! from a seed recorded in the header. Unlocking strips the fields, matches
//! the embedded template against a query, and on success factors the
//! polynomial back into its chunks.

pub mod poly;
pub mod template;

use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glcm::KeyStatus;

pub use template::{Minutia, MinutiaKind, MinutiaeTemplate, Tolerances};

/// Number of key chunks, hence the polynomial degree.
pub const CHUNKS: usize = 4;
/// Coefficient fields spliced into the payload (degree + 1).
pub const FIELDS: usize = CHUNKS + 1;
pub const MAX_CHUNK_WIDTH: u32 = 8;
pub const HELPER_VERSION: u8 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Error, PartialEq)]
pub enum VaultError {
    #[error("template must have {min}..={max} points, got {0}", min = template::MIN_POINTS, max = template::MAX_POINTS)]
    PointCount(usize),
    #[error("template: {0}")]
    Template(String),
    #[error("chunk width must be in 1..={MAX_CHUNK_WIDTH}, got {0}")]
    ChunkWidth(u32),
    #[error("key {0:?} is not a decimal string that fits four chunks")]
    BadKey(String),
    #[error("coefficient {value} does not fit in {width} bytes")]
    Overflow { value: i128, width: usize },
    #[error("template byte stream too short: {0} < 5")]
    TemplateTooShort(usize),
    #[error("helper data has expired")]
    ExpiredHelper,
    #[error("match score {score:.3} below threshold {threshold:.3}")]
    MatchBelowThreshold { score: f64, threshold: f64 },
    #[error("coefficients do not factor into the stored key chunks")]
    RootRecoveryFailure,
    #[error("malformed helper data: {0}")]
    Malformed(String),
}

/// Four decimal chunks of a key, each below 10^width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyChunks {
    width: u32,
    chunks: [u64; CHUNKS],
}

impl KeyChunks {
    pub fn new(width: u32, chunks: [u64; CHUNKS]) -> Result<Self, VaultError> {
        if !(1..=MAX_CHUNK_WIDTH).contains(&width) {
            return Err(VaultError::ChunkWidth(width));
        }
        let limit = 10u64.pow(width);
        if chunks.iter().any(|&c| c >= limit) {
            return Err(VaultError::BadKey(format!("{chunks:?}")));
        }
        Ok(Self { width, chunks })
    }

    /// Smallest width that holds the whole key.
    pub fn width_for(key_len: usize) -> u32 {
        key_len.div_ceil(CHUNKS).max(1) as u32
    }

    /// Left-pads `digits` with zeros to `4 × width` and cuts it into chunks.
    pub fn from_digits(digits: &str, width: u32) -> Result<Self, VaultError> {
        let w = width as usize;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.len() > CHUNKS * w {
            return Err(VaultError::BadKey(digits.to_owned()));
        }
        let padded = format!("{digits:0>len$}", len = CHUNKS * w);
        let mut chunks = [0u64; CHUNKS];
        for (slot, piece) in chunks.iter_mut().zip(padded.as_bytes().chunks(w)) {
            *slot = std::str::from_utf8(piece).expect("ascii").parse().expect("digits");
        }
        Self::new(width, chunks)
    }

    pub fn from_key(digits: &str) -> Result<Self, VaultError> {
        Self::from_digits(digits, Self::width_for(digits.len()))
    }

    /// Inverse of [`KeyChunks::from_digits`] for keys without leading zeros.
    pub fn to_digits(&self) -> String {
        let w = self.width as usize;
        let joined: String = self.chunks.iter().map(|c| format!("{c:0w$}")).collect();
        let trimmed = joined.trim_start_matches('0');
        if trimmed.is_empty() {
            "0".to_owned()
        } else {
            trimmed.to_owned()
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn chunks(&self) -> [u64; CHUNKS] {
        self.chunks
    }

    /// Root for chunk `i` is (i + 1)·10^w + chunk, so positions survive the
    /// symmetric coefficients and equal chunks still give distinct roots.
    pub fn roots(&self) -> [i128; CHUNKS] {
        let base = 10i128.pow(self.width);
        let mut out = [0i128; CHUNKS];
        for (i, (slot, &c)) in out.iter_mut().zip(&self.chunks).enumerate() {
            *slot = (i as i128 + 1) * base + c as i128;
        }
        out
    }

    fn from_roots(width: u32, roots: &[i128]) -> Option<Self> {
        if roots.len() != CHUNKS {
            return None;
        }
        let base = 10i128.pow(width);
        let mut chunks = [None; CHUNKS];
        for &r in roots {
            let tag = r / base;
            if !(1..=CHUNKS as i128).contains(&tag) {
                return None;
            }
            let slot = &mut chunks[(tag - 1) as usize];
            if slot.is_some() {
                return None;
            }
            *slot = Some((r % base) as u64);
        }
        let mut out = [0u64; CHUNKS];
        for (o, c) in out.iter_mut().zip(chunks) {
            *o = c?;
        }
        Some(Self { width, chunks: out })
    }
}

/// Coefficients of ∏(x − rootᵢ) over the tagged chunk roots, highest degree
/// first, so `[0]` is always 1.
pub fn chunks_to_coefficients(chunks: &KeyChunks) -> [i128; FIELDS] {
    let coeffs = poly::expand_roots(&chunks.roots()).expect("width ≤ 8 keeps coefficients inside i128");
    coeffs.try_into().expect("degree-4 polynomial")
}

/// Bytes per coefficient for chunk width `w`: ⌈(4w + 2)·log₂10 / 8⌉.
pub fn field_bytes(width: u32) -> usize {
    ((4.0 * width as f64 + 2.0) * 10f64.log2() / 8.0).ceil() as usize
}

/// Length of one base64 coefficient field.
pub fn field_chars(width_bytes: usize) -> usize {
    width_bytes.div_ceil(3) * 4
}

/// Standard padded base64 of the big-endian two's-complement value.
pub fn encode_coefficient(c: i128, width: usize) -> Result<String, VaultError> {
    if width == 0 || width > 16 {
        return Err(VaultError::Overflow { value: c, width });
    }
    let bits = 8 * width as u32;
    if bits < 128 {
        let half = 1i128 << (bits - 1);
        if c < -half || c >= half {
            return Err(VaultError::Overflow { value: c, width });
        }
    }
    let bytes = c.to_be_bytes();
    Ok(B64.encode(&bytes[16 - width..]))
}

pub fn decode_coefficient(field: &str, width: usize) -> Option<i128> {
    let bytes = B64.decode(field).ok()?;
    if bytes.len() != width || width == 0 || width > 16 {
        return None;
    }
    let fill = if bytes[0] & 0x80 != 0 { 0xff } else { 0 };
    let mut full = [fill; 16];
    full[16 - width..].copy_from_slice(&bytes);
    Some(i128::from_be_bytes(full))
}

/// Five strictly increasing insertion points in `0..=n`:
/// (z + i·⌊n/5⌋) mod (n+1), sorted, collisions bumped forward.
pub fn insertion_offsets(n: usize, z_seed: u64) -> Result<[usize; FIELDS], VaultError> {
    if n < FIELDS {
        return Err(VaultError::TemplateTooShort(n));
    }
    let modulus = n as u64 + 1;
    let stride = (n / FIELDS) as u64;
    let z = z_seed % modulus;
    let mut offsets = [0usize; FIELDS];
    for (i, slot) in offsets.iter_mut().enumerate() {
        *slot = ((z + i as u64 * stride) % modulus) as usize;
    }
    offsets.sort_unstable();
    for i in 1..FIELDS {
        if offsets[i] <= offsets[i - 1] {
            offsets[i] = offsets[i - 1] + 1;
        }
    }
    if offsets[FIELDS - 1] > n {
        return Err(VaultError::TemplateTooShort(n));
    }
    Ok(offsets)
}

/// Inserts field `i` before original byte `offsets[i]`.
pub fn splice(bytes: &[u8], fields: &[Vec<u8>], offsets: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len() + fields.iter().map(Vec::len).sum::<usize>());
    let mut cursor = 0;
    for (field, &off) in fields.iter().zip(offsets) {
        out.extend_from_slice(&bytes[cursor..off]);
        out.extend_from_slice(field);
        cursor = off;
    }
    out.extend_from_slice(&bytes[cursor..]);
    out
}

/// Inverse of [`splice`] for equal-length fields.
pub fn extract(payload: &[u8], field_len: usize, offsets: &[usize]) -> Option<(Vec<u8>, Vec<Vec<u8>>)> {
    if payload.len() < field_len * offsets.len() {
        return None;
    }
    let mut bytes = Vec::with_capacity(payload.len() - field_len * offsets.len());
    let mut fields = Vec::with_capacity(offsets.len());
    let mut cursor = 0;
    for (i, &off) in offsets.iter().enumerate() {
        let start = off + i * field_len;
        if start < cursor || start + field_len > payload.len() {
            return None;
        }
        bytes.extend_from_slice(&payload[cursor..start]);
        fields.push(payload[start..start + field_len].to_vec());
        cursor = start + field_len;
    }
    bytes.extend_from_slice(&payload[cursor..]);
    Some((bytes, fields))
}

/// Public helper data: the template stream with coefficient fields spliced in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaultHelperData {
    pub version: u8,
    /// Length of the template byte stream.
    pub n: usize,
    pub z_seed: u64,
    pub chunk_width: u32,
    pub payload: Vec<u8>,
    pub status: KeyStatus,
}

impl VaultHelperData {
    pub fn field_bytes(&self) -> usize {
        field_bytes(self.chunk_width)
    }

    pub fn field_len(&self) -> usize {
        field_chars(self.field_bytes())
    }

    pub fn offsets(&self) -> Result<[usize; FIELDS], VaultError> {
        insertion_offsets(self.n, self.z_seed)
    }

    fn split(&self) -> Result<(Vec<u8>, Vec<Vec<u8>>), VaultError> {
        if self.payload.len() != self.n + FIELDS * self.field_len() {
            return Err(VaultError::Malformed(format!(
                "payload is {} bytes, header implies {}",
                self.payload.len(),
                self.n + FIELDS * self.field_len()
            )));
        }
        extract(&self.payload, self.field_len(), &self.offsets()?)
            .ok_or_else(|| VaultError::Malformed("fields do not fit the payload".into()))
    }

    /// The embedded template, coefficient fields removed.
    pub fn template(&self) -> Result<MinutiaeTemplate, VaultError> {
        let (bytes, _) = self.split()?;
        MinutiaeTemplate::from_bytes(&bytes)
    }

    pub fn expire(&mut self) {
        self.status = KeyStatus::Expired;
    }
}

impl fmt::Display for VaultHelperData {
    /// `FV1 <n> <z_seed> <w>` (plus `EXPIRED` once retired), then base64 payload.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FV{} {} {} {}", self.version, self.n, self.z_seed, self.chunk_width)?;
        if self.status == KeyStatus::Expired {
            write!(f, " EXPIRED")?;
        }
        writeln!(f)?;
        writeln!(f, "{}", B64.encode(&self.payload))
    }
}

impl FromStr for VaultHelperData {
    type Err = VaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| VaultError::Malformed("empty helper file".into()))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        let bad = |what: &str| VaultError::Malformed(format!("bad header {what}: {header:?}"));
        if !(4..=5).contains(&tokens.len()) || tokens[0] != "FV1" {
            return Err(bad("tag"));
        }
        let n = tokens[1].parse().map_err(|_| bad("n"))?;
        let z_seed = tokens[2].parse().map_err(|_| bad("z_seed"))?;
        let chunk_width: u32 = tokens[3].parse().map_err(|_| bad("w"))?;
        if !(1..=MAX_CHUNK_WIDTH).contains(&chunk_width) {
            return Err(VaultError::ChunkWidth(chunk_width));
        }
        let status = match tokens.get(4) {
            None | Some(&"ACTIVE") => KeyStatus::Active,
            Some(&"EXPIRED") => KeyStatus::Expired,
            Some(_) => return Err(bad("status")),
        };
        let body: String = lines.map(str::trim).collect();
        let payload = B64.decode(body.as_bytes()).map_err(|e| VaultError::Malformed(e.to_string()))?;
        Ok(Self { version: HELPER_VERSION, n, z_seed, chunk_width, payload, status })
    }
}

/// Splices encoded coefficients into raw bytes.
pub fn lock_bytes(
    bytes: &[u8],
    coefficients: &[i128; FIELDS],
    chunk_width: u32,
    z_seed: u64,
) -> Result<VaultHelperData, VaultError> {
    let n = bytes.len();
    let offsets = insertion_offsets(n, z_seed)?;
    let width = field_bytes(chunk_width);
    let fields = coefficients
        .iter()
        .map(|&c| encode_coefficient(c, width).map(String::into_bytes))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VaultHelperData {
        version: HELPER_VERSION,
        n,
        z_seed,
        chunk_width,
        payload: splice(bytes, &fields, &offsets),
        status: KeyStatus::Active,
    })
}

pub fn lock_vault(template: &MinutiaeTemplate, chunks: &KeyChunks, z_seed: u64) -> Result<VaultHelperData, VaultError> {
    let bytes = template.to_bytes();
    lock_bytes(&bytes, &chunks_to_coefficients(chunks), chunks.width(), z_seed)
}

pub fn match_template(query: &MinutiaeTemplate, helper: &VaultHelperData, tol: Tolerances) -> Result<f64, VaultError> {
    if helper.status == KeyStatus::Expired {
        return Err(VaultError::ExpiredHelper);
    }
    Ok(query.match_score(&helper.template()?, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    pub tolerances: Tolerances,
    pub threshold: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self { tolerances: Tolerances::default(), threshold: DEFAULT_THRESHOLD }
    }
}

/// Recovers the chunks from the coefficient fields alone.
pub fn recover_chunks(helper: &VaultHelperData) -> Result<KeyChunks, VaultError> {
    let (_, fields) = helper.split()?;
    let width = helper.field_bytes();
    let mut coeffs = [0i128; FIELDS];
    for (slot, field) in coeffs.iter_mut().zip(&fields) {
        let text = std::str::from_utf8(field).map_err(|_| VaultError::RootRecoveryFailure)?;
        *slot = decode_coefficient(text, width).ok_or(VaultError::RootRecoveryFailure)?;
    }
    if coeffs[0] != 1 {
        return Err(VaultError::RootRecoveryFailure);
    }
    // Tagging puts exactly one root in each [t·10^w, (t+1)·10^w), so each
    // interval is searched on its own instead of scanning every candidate.
    let base = 10i128.pow(helper.chunk_width);
    let roots = (1..=CHUNKS as i128)
        .map(|t| poly::root_in(&coeffs, t * base, (t + 1) * base - 1))
        .collect::<Option<Vec<_>>>()
        .ok_or(VaultError::RootRecoveryFailure)?;
    let chunks = KeyChunks::from_roots(helper.chunk_width, &roots).ok_or(VaultError::RootRecoveryFailure)?;
    if poly::expand_roots(&chunks.roots()).as_deref() != Some(&coeffs[..]) {
        return Err(VaultError::RootRecoveryFailure);
    }
    Ok(chunks)
}

pub fn unlock_vault(query: &MinutiaeTemplate, helper: &VaultHelperData, params: MatchParams) -> Result<KeyChunks, VaultError> {
    let score = match_template(query, helper, params.tolerances)?;
    if score < params.threshold {
        return Err(VaultError::MatchBelowThreshold { score, threshold: params.threshold });
    }
    recover_chunks(helper)
}
