//! Augmented Hadamard codes: rows of the 2^m Sylvester matrix and their
//! complements, with maximum-likelihood decoding through a fast
//! Walsh–Hadamard transform.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HadamardError {
    #[error("order must be in 1..=15, got {0}")]
    BadOrder(u32),
    #[error("message {message} needs more than {bits} bits")]
    MessageOutOfRange { message: u32, bits: u32 },
    #[error("expected {expected} bits, got {got}")]
    Length { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HadamardDecoded {
    pub message: u32,
    /// Another index reached the same maximal |correlation|; the lowest one won.
    pub tie: bool,
    /// Hamming distance between the received word and the chosen codeword.
    pub distance: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HadamardCode {
    m: u32,
}

impl HadamardCode {
    pub fn new(m: u32) -> Result<Self, HadamardError> {
        if !(1..=15).contains(&m) {
            return Err(HadamardError::BadOrder(m));
        }
        Ok(Self { m })
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn codeword_len(&self) -> usize {
        1 << self.m
    }

    pub fn message_bits(&self) -> u32 {
        self.m + 1
    }

    /// Flips guaranteed to decode correctly, 2^(m−2) − 1.
    pub fn capacity(&self) -> usize {
        (self.codeword_len() / 4).saturating_sub(1)
    }

    /// Bit `j` of row `i` is parity(i & j); the top message bit complements.
    pub fn encode(&self, message: u32) -> Result<Vec<bool>, HadamardError> {
        if message >> self.message_bits() != 0 {
            return Err(HadamardError::MessageOutOfRange { message, bits: self.message_bits() });
        }
        let row = message & ((1 << self.m) - 1);
        let complement = message >> self.m == 1;
        Ok((0..self.codeword_len() as u32).map(|j| ((row & j).count_ones() % 2 == 1) ^ complement).collect())
    }

    pub fn decode(&self, received: &[bool]) -> Result<HadamardDecoded, HadamardError> {
        let n = self.codeword_len();
        if received.len() != n {
            return Err(HadamardError::Length { expected: n, got: received.len() });
        }
        let mut spectrum: Vec<i32> = received.iter().map(|&b| if b { -1 } else { 1 }).collect();
        fwht(&mut spectrum);
        let mut best = 0usize;
        let mut tie = false;
        for (i, v) in spectrum.iter().enumerate().skip(1) {
            let (cur, top) = (v.abs(), spectrum[best].abs());
            if cur > top {
                best = i;
                tie = false;
            } else if cur == top {
                tie = true;
            }
        }
        let corr = spectrum[best];
        let complement = corr < 0;
        // agreements − disagreements = |corr| against the chosen word
        let distance = (n - corr.unsigned_abs() as usize) / 2;
        let message = best as u32 | ((complement as u32) << self.m);
        Ok(HadamardDecoded { message, tie, distance })
    }
}

/// In-place unnormalized fast Walsh–Hadamard transform; length must be a
/// power of two.
pub fn fwht(data: &mut [i32]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (data[i], data[i + h]);
                data[i] = a + b;
                data[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    /// Correlates against every codeword explicitly.
    fn brute_decode(code: &HadamardCode, received: &[bool]) -> (u32, usize) {
        (0..1u32 << code.message_bits())
            .map(|msg| {
                let cw = code.encode(msg).unwrap();
                (msg, cw.iter().zip(received).filter(|(a, b)| a != b).count())
            })
            .min_by_key(|&(msg, d)| (d, msg & ((1 << code.order()) - 1), msg))
            .unwrap()
    }

    #[test]
    fn small_codewords() {
        let c = HadamardCode::new(3).unwrap();
        assert_eq!(c.encode(0).unwrap(), bits("00000000"));
        assert_eq!(c.encode(8).unwrap(), bits("11111111"));
        assert_eq!(c.encode(1).unwrap(), bits("01010101"));
        assert_eq!(c.encode(3).unwrap(), bits("01100110"));
        assert_eq!(c.encode(16), Err(HadamardError::MessageOutOfRange { message: 16, bits: 4 }));
    }

    #[test]
    fn pairwise_distance_is_half_length() {
        for m in 1..=5 {
            let c = HadamardCode::new(m).unwrap();
            let words: Vec<_> = (0..1u32 << (m + 1)).map(|x| c.encode(x).unwrap()).collect();
            for i in 0..words.len() {
                for j in i + 1..words.len() {
                    let d = words[i].iter().zip(&words[j]).filter(|(a, b)| a != b).count();
                    let complements = (i ^ j) == 1 << m;
                    let expected = if complements { 1 << m } else { 1 << (m - 1) };
                    assert_eq!(d, expected, "m={m} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn exhaustive_m3_matches_brute_force() {
        let c = HadamardCode::new(3).unwrap();
        for word in 0u32..256 {
            let received: Vec<bool> = (0..8).map(|i| word >> (7 - i) & 1 == 1).collect();
            let fast = c.decode(&received).unwrap();
            let (msg, dist) = brute_decode(&c, &received);
            assert_eq!(fast.distance, dist, "word {word:08b}");
            if !fast.tie {
                assert_eq!(fast.message, msg, "word {word:08b}");
            }
        }
    }

    #[test]
    fn capacity_values() {
        assert_eq!(HadamardCode::new(3).unwrap().capacity(), 1);
        assert_eq!(HadamardCode::new(5).unwrap().capacity(), 7);
        assert_eq!(HadamardCode::new(6).unwrap().capacity(), 15);
    }

    #[test]
    fn tie_is_flagged_with_lowest_index() {
        let c = HadamardCode::new(3).unwrap();
        // midway between rows 0 and 1: differs from row 0 in two places and row 1 in two
        let received = bits("01010000");
        let d = c.decode(&received).unwrap();
        assert!(d.tie);
        assert_eq!(d.message, 0);
    }

    #[test]
    fn fwht_of_delta() {
        let mut v = vec![1, 0, 0, 0];
        fwht(&mut v);
        assert_eq!(v, vec![1, 1, 1, 1]);
        fwht(&mut v);
        assert_eq!(v, vec![4, 0, 0, 0]);
    }
}
