//! Key generation from second-order image texture statistics.
//!
//! A gray-level co-occurrence matrix (GLCM) is built for one pixel offset,
//! six Haralick-style descriptors are computed from it, and their product is
//! turned into a fixed-length decimal key. The same image and parameters
//! always reproduce the same key.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::Timestamp;

/// Default quantization used when intensities come from 8-bit images.
pub const DEFAULT_LEVELS: usize = 32;
/// Default decimal key length.
pub const DEFAULT_KEY_LEN: usize = 15;
/// Longest key an `f64` product can carry without inventing digits.
pub const MAX_KEY_LEN: usize = 17;

#[derive(Debug, Error, PartialEq)]
pub enum GlcmError {
    #[error("image must be at least 2x2, got {width}x{height}")]
    TooSmall { width: usize, height: usize },
    #[error("pixel buffer has {got} entries, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("pixel value {value} at index {index} is outside 0..{levels}")]
    LevelOutOfRange { index: usize, value: u16, levels: usize },
    #[error("levels must be in 2..=256, got {0}")]
    BadLevels(usize),
    #[error("distance must be positive")]
    ZeroDistance,
    #[error("unsupported angle {0}; expected 0, 45, 90 or 135")]
    BadAngle(u32),
    #[error("offset leaves no in-bounds pixel pair")]
    NoPairs,
    #[error("correlation undefined: a marginal has zero variance")]
    DegenerateCorrelation,
    #[error("feature product is zero")]
    ZeroProduct,
    #[error("feature product is not finite")]
    NonFinite,
    #[error("key length must be in 1..={MAX_KEY_LEN}, got {0}")]
    BadKeyLength(usize),
    #[error("key lifetime must be positive, got {0}s")]
    NonPositiveDuration(i64),
    #[error("gray matrix parse error: {0}")]
    Parse(String),
}

/// Row-major gray matrix quantized to `levels` bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    levels: usize,
    pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, levels: usize, pixels: Vec<u16>) -> Result<Self, GlcmError> {
        if !(2..=256).contains(&levels) {
            return Err(GlcmError::BadLevels(levels));
        }
        if width < 2 || height < 2 {
            return Err(GlcmError::TooSmall { width, height });
        }
        if pixels.len() != width * height {
            return Err(GlcmError::BadLength { expected: width * height, got: pixels.len() });
        }
        if let Some((index, &value)) = pixels.iter().enumerate().find(|(_, &v)| v as usize >= levels) {
            return Err(GlcmError::LevelOutOfRange { index, value, levels });
        }
        Ok(Self { width, height, levels, pixels })
    }

    /// Uniformly bins 8-bit intensities into `levels` gray levels.
    ///
    /// This is the seam where decoded JPEG/PNG/BMP data enters; codecs stay
    /// outside the crate.
    pub fn from_intensities(width: usize, height: usize, levels: usize, data: &[u8]) -> Result<Self, GlcmError> {
        if !(2..=256).contains(&levels) {
            return Err(GlcmError::BadLevels(levels));
        }
        let pixels = data.iter().map(|&v| (v as usize * levels / 256) as u16).collect();
        Self::new(width, height, levels, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.pixels[row * self.width + col]
    }

    /// Serializes as `P-GRAY <width> <height> <levels>` followed by one row per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("P-GRAY {} {} {}\n", self.width, self.height, self.levels);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(u16::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

impl FromStr for GrayImage {
    type Err = GlcmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut tokens = s.split_whitespace();
        if tokens.next() != Some("P-GRAY") {
            return Err(GlcmError::Parse("missing P-GRAY header".into()));
        }
        let mut header = [0usize; 3];
        for (slot, name) in header.iter_mut().zip(["width", "height", "levels"]) {
            let tok = tokens.next().ok_or_else(|| GlcmError::Parse(format!("missing {name}")))?;
            *slot = tok.parse().map_err(|_| GlcmError::Parse(format!("bad {name}: {tok}")))?;
        }
        let pixels = tokens
            .map(|t| t.parse::<u16>().map_err(|_| GlcmError::Parse(format!("bad level: {t}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(header[0], header[1], header[2], pixels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Angle {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl Angle {
    pub const ALL: [Angle; 4] = [Angle::Deg0, Angle::Deg45, Angle::Deg90, Angle::Deg135];

    pub fn from_degrees(deg: u32) -> Result<Self, GlcmError> {
        match deg {
            0 => Ok(Angle::Deg0),
            45 => Ok(Angle::Deg45),
            90 => Ok(Angle::Deg90),
            135 => Ok(Angle::Deg135),
            other => Err(GlcmError::BadAngle(other)),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            Angle::Deg0 => 0,
            Angle::Deg45 => 45,
            Angle::Deg90 => 90,
            Angle::Deg135 => 135,
        }
    }

    /// Unit (row, col) step: 0° → [0 1], 45° → [-1 1], 90° → [-1 0], 135° → [-1 -1].
    fn unit_offset(self) -> (isize, isize) {
        match self {
            Angle::Deg0 => (0, 1),
            Angle::Deg45 => (-1, 1),
            Angle::Deg90 => (-1, 0),
            Angle::Deg135 => (-1, -1),
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.degrees())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlcmParams {
    pub distance: usize,
    pub angle: Angle,
}

impl GlcmParams {
    pub fn new(distance: usize, angle: Angle) -> Result<Self, GlcmError> {
        if distance == 0 {
            return Err(GlcmError::ZeroDistance);
        }
        Ok(Self { distance, angle })
    }

    pub fn offset(&self) -> (isize, isize) {
        let (dr, dc) = self.angle.unit_offset();
        let r = self.distance as isize;
        (dr * r, dc * r)
    }
}

/// Normalized, directional co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    matrix: Vec<f64>,
    pair_count: u64,
}

impl Glcm {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn pair_count(&self) -> u64 {
        self.pair_count
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.levels + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.matrix
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let l = self.levels;
        self.matrix.iter().enumerate().map(move |(idx, &p)| (idx / l, idx % l, p))
    }
}

/// Counts pairs `(p, p + offset)` for every pixel `p` whose partner is in
/// bounds, then normalizes by the number of pairs.
pub fn compute_glcm(image: &GrayImage, params: GlcmParams) -> Result<Glcm, GlcmError> {
    let (dr, dc) = params.offset();
    let l = image.levels;
    let mut counts = vec![0u64; l * l];
    let mut pair_count = 0u64;
    for row in 0..image.height {
        let r2 = row as isize + dr;
        if r2 < 0 || r2 >= image.height as isize {
            continue;
        }
        for col in 0..image.width {
            let c2 = col as isize + dc;
            if c2 < 0 || c2 >= image.width as isize {
                continue;
            }
            let a = image.get(row, col) as usize;
            let b = image.get(r2 as usize, c2 as usize) as usize;
            counts[a * l + b] += 1;
            pair_count += 1;
        }
    }
    if pair_count == 0 {
        return Err(GlcmError::NoPairs);
    }
    let total = pair_count as f64;
    let matrix = counts.into_iter().map(|c| c as f64 / total).collect();
    Ok(Glcm { levels: l, matrix, pair_count })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub trace: f64,
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub entropy: f64,
    pub homogeneity: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 6] {
        [self.trace, self.contrast, self.correlation, self.energy, self.entropy, self.homogeneity]
    }

    pub fn product(&self) -> f64 {
        self.as_array().iter().product()
    }
}

/// Descriptors that never fail; correlation is computed separately because
/// a zero-variance marginal leaves it undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseFeatures {
    pub trace: f64,
    pub contrast: f64,
    pub energy: f64,
    pub entropy: f64,
    pub homogeneity: f64,
}

pub fn base_features(glcm: &Glcm) -> BaseFeatures {
    let mut f = BaseFeatures { trace: 0.0, contrast: 0.0, energy: 0.0, entropy: 0.0, homogeneity: 0.0 };
    for (i, j, p) in glcm.cells() {
        let d = i as f64 - j as f64;
        if i == j {
            f.trace += p;
        }
        f.contrast += d * d * p;
        f.energy += p * p;
        if p > 0.0 {
            f.entropy -= p * p.log2();
        }
        f.homogeneity += p / (1.0 + d.abs());
    }
    f
}

pub fn correlation(glcm: &Glcm) -> Result<f64, GlcmError> {
    let (mut mu_i, mut mu_j) = (0.0, 0.0);
    for (i, j, p) in glcm.cells() {
        mu_i += i as f64 * p;
        mu_j += j as f64 * p;
    }
    let (mut var_i, mut var_j, mut cov) = (0.0, 0.0, 0.0);
    for (i, j, p) in glcm.cells() {
        let di = i as f64 - mu_i;
        let dj = j as f64 - mu_j;
        var_i += di * di * p;
        var_j += dj * dj * p;
        cov += di * dj * p;
    }
    // Variances below this are rounding noise on a single-valued marginal.
    const EPS: f64 = 1e-12;
    if var_i <= EPS || var_j <= EPS {
        return Err(GlcmError::DegenerateCorrelation);
    }
    Ok(cov / (var_i.sqrt() * var_j.sqrt()))
}

pub fn extract_features(glcm: &Glcm) -> Result<FeatureVector, GlcmError> {
    let b = base_features(glcm);
    let correlation = correlation(glcm)?;
    Ok(FeatureVector {
        trace: b.trace,
        contrast: b.contrast,
        correlation,
        energy: b.energy,
        entropy: b.entropy,
        homogeneity: b.homogeneity,
    })
}

/// Turns the absolute feature product into `key_len` significant decimal
/// digits (decimal point shifted so the leading digit is nonzero).
pub fn derive_key(features: &FeatureVector, key_len: usize) -> Result<String, GlcmError> {
    if key_len == 0 || key_len > MAX_KEY_LEN {
        return Err(GlcmError::BadKeyLength(key_len));
    }
    let values = features.as_array();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(GlcmError::NonFinite);
    }
    if values.contains(&0.0) {
        return Err(GlcmError::ZeroProduct);
    }
    let k = features.product().abs();
    if !k.is_finite() {
        return Err(GlcmError::NonFinite);
    }
    if k == 0.0 {
        // underflow of a product of nonzero factors
        return Err(GlcmError::ZeroProduct);
    }
    significant_digits(k, key_len)
}

fn significant_digits(k: f64, key_len: usize) -> Result<String, GlcmError> {
    let sci = format!("{:.*e}", key_len - 1, k);
    let mantissa = sci.split('e').next().unwrap_or_default();
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    debug_assert_eq!(digits.len(), key_len);
    debug_assert!(!digits.starts_with('0'));
    Ok(digits)
}

/// Full pipeline: image → GLCM → features → key digits.
pub fn key_from_image(image: &GrayImage, params: GlcmParams, key_len: usize) -> Result<String, GlcmError> {
    let glcm = compute_glcm(image, params)?;
    let features = extract_features(&glcm)?;
    derive_key(&features, key_len)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KeyStatus {
    Active,
    Expired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Enrollment {
    Enrolled,
    Unenrolled,
}

impl fmt::Display for KeyStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KeyStatus::Active => "ACTIVE",
            KeyStatus::Expired => "EXPIRED",
        })
    }
}

impl fmt::Display for Enrollment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Enrollment::Enrolled => "ENROLLED",
            Enrollment::Unenrolled => "UNENROLLED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedKey {
    pub digits: String,
    pub created_at: Timestamp,
    pub active_from: Timestamp,
    pub expires_at: Timestamp,
    pub status: KeyStatus,
    pub enrollment: Enrollment,
}

impl TimedKey {
    /// Status as of `now`; a key is still usable at the instant it expires.
    pub fn status_at(&self, now: Timestamp) -> KeyStatus {
        if self.status == KeyStatus::Expired || now > self.expires_at {
            KeyStatus::Expired
        } else {
            KeyStatus::Active
        }
    }

    pub fn refresh(&mut self, now: Timestamp) {
        self.status = self.status_at(now);
    }
}

pub fn attach_validity(digits: &str, now: Timestamp, duration_secs: i64) -> Result<TimedKey, GlcmError> {
    if duration_secs <= 0 {
        return Err(GlcmError::NonPositiveDuration(duration_secs));
    }
    Ok(TimedKey {
        digits: digits.to_owned(),
        created_at: now,
        active_from: now,
        expires_at: now + duration_secs,
        status: KeyStatus::Active,
        enrollment: Enrollment::Unenrolled,
    })
}
