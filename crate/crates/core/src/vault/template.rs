//! Fingerprint minutiae templates and their canonical byte form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::VaultError;

pub const MIN_POINTS: usize = 10;
pub const MAX_POINTS: usize = 128;
/// Bytes per serialized minutia: x, y, θ as big-endian u16, then the kind.
pub const POINT_BYTES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MinutiaKind {
    Ending,
    Bifurcation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Minutia {
    pub x: u16,
    pub y: u16,
    /// Degrees, 0..360.
    pub theta: u16,
    pub kind: MinutiaKind,
}

impl Minutia {
    pub fn new(x: u16, y: u16, theta: u16, kind: MinutiaKind) -> Self {
        Self { x, y, theta: theta % 360, kind }
    }
}

/// Point tolerances for matching two templates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Chebyshev distance in pixels.
    pub xy: u16,
    /// Circular angle difference in degrees.
    pub theta: u16,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { xy: 8, theta: 15 }
    }
}

pub fn angle_distance(a: u16, b: u16) -> u16 {
    let d = (a as i32 - b as i32).unsigned_abs() as u16 % 360;
    d.min(360 - d)
}

/// A sorted minutiae set; equal sets serialize to equal bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MinutiaeTemplate {
    points: Vec<Minutia>,
}

impl MinutiaeTemplate {
    pub fn new(mut points: Vec<Minutia>) -> Result<Self, VaultError> {
        if !(MIN_POINTS..=MAX_POINTS).contains(&points.len()) {
            return Err(VaultError::PointCount(points.len()));
        }
        if let Some(p) = points.iter().find(|p| p.theta >= 360) {
            return Err(VaultError::Template(format!("angle {} out of range", p.theta)));
        }
        points.sort();
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Minutia] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.points.len() * POINT_BYTES);
        for p in &self.points {
            out.extend_from_slice(&p.x.to_be_bytes());
            out.extend_from_slice(&p.y.to_be_bytes());
            out.extend_from_slice(&p.theta.to_be_bytes());
            out.push(match p.kind {
                MinutiaKind::Ending => 0,
                MinutiaKind::Bifurcation => 1,
            });
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, VaultError> {
        if !bytes.len().is_multiple_of(POINT_BYTES) {
            return Err(VaultError::Template(format!("{} bytes is not a whole number of points", bytes.len())));
        }
        let points = bytes
            .chunks(POINT_BYTES)
            .map(|c| {
                let kind = match c[6] {
                    0 => MinutiaKind::Ending,
                    1 => MinutiaKind::Bifurcation,
                    other => return Err(VaultError::Template(format!("bad minutia kind byte {other}"))),
                };
                Ok(Minutia {
                    x: u16::from_be_bytes([c[0], c[1]]),
                    y: u16::from_be_bytes([c[2], c[3]]),
                    theta: u16::from_be_bytes([c[4], c[5]]),
                    kind,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let template = Self::new(points)?;
        if template.to_bytes() != bytes {
            return Err(VaultError::Template("points are not in canonical order".into()));
        }
        Ok(template)
    }

    /// Fraction of points paired one-to-one within `tol`, over the larger
    /// template size. Pairing is greedy in query order, each query point
    /// taking the closest still-free stored point of the same kind.
    pub fn match_score(&self, stored: &MinutiaeTemplate, tol: Tolerances) -> f64 {
        let mut taken = vec![false; stored.points.len()];
        let mut matched = 0usize;
        for q in &self.points {
            let best = stored
                .points
                .iter()
                .enumerate()
                .filter(|(i, s)| !taken[*i] && s.kind == q.kind)
                .filter_map(|(i, s)| {
                    let dxy = s.x.abs_diff(q.x).max(s.y.abs_diff(q.y));
                    let dth = angle_distance(s.theta, q.theta);
                    (dxy <= tol.xy && dth <= tol.theta).then_some((dxy, dth, i))
                })
                .min();
            if let Some((_, _, i)) = best {
                taken[i] = true;
                matched += 1;
            }
        }
        matched as f64 / self.points.len().max(stored.points.len()) as f64
    }
}

impl fmt::Display for MinutiaeTemplate {
    /// One `MIN <x> <y> <theta> <E|B>` line per point.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.points {
            let kind = match p.kind {
                MinutiaKind::Ending => 'E',
                MinutiaKind::Bifurcation => 'B',
            };
            writeln!(f, "MIN {} {} {} {}", p.x, p.y, p.theta, kind)?;
        }
        Ok(())
    }
}

impl FromStr for MinutiaeTemplate {
    type Err = VaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut points = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || VaultError::Template(format!("line {}: expected `MIN x y theta E|B`", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 || fields[0] != "MIN" {
                return Err(bad());
            }
            let num = |t: &str| t.parse::<u16>().map_err(|_| bad());
            let kind = match fields[4] {
                "E" => MinutiaKind::Ending,
                "B" => MinutiaKind::Bifurcation,
                _ => return Err(bad()),
            };
            let theta = num(fields[3])?;
            if theta >= 360 {
                return Err(bad());
            }
            points.push(Minutia { x: num(fields[1])?, y: num(fields[2])?, theta, kind });
        }
        Self::new(points)
    }
}
