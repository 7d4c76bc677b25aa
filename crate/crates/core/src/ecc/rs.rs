//! Systematic Reed–Solomon codes over GF(2^m).
//!
//! Codeword symbol `j` is the coefficient of x^(n−1−j), so the message
//! occupies the first `k` positions and the parity the last `n − k`.
//! The generator has roots α^1 .. α^(n−k). Decoding computes syndromes,
//! synthesizes the error locator with Berlekamp–Massey, finds its roots with
//! a Chien search over the `n` valid positions and evaluates magnitudes with
//! Forney's formula.

use thiserror::Error;

use super::gf::{FieldError, GaloisField, Symbol};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RsError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid code parameters n={n}, k={k} for field size {field_size}")]
    BadParams { n: usize, k: usize, field_size: usize },
    #[error("expected {expected} symbols, got {got}")]
    Length { expected: usize, got: usize },
    #[error("symbol {symbol} at position {position} is outside the field")]
    SymbolOutOfField { position: usize, symbol: Symbol },
    #[error("too many errors to correct")]
    DecodeFailure,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsDecoded {
    pub message: Vec<Symbol>,
    pub corrected: usize,
}

#[derive(Debug, Clone)]
pub struct ReedSolomon {
    field: GaloisField,
    n: usize,
    k: usize,
    /// Highest-degree-first, monic.
    generator: Vec<Symbol>,
}

impl ReedSolomon {
    pub fn new(field: GaloisField, n: usize, k: usize) -> Result<Self, RsError> {
        if k == 0 || k >= n || n > field.order() {
            return Err(RsError::BadParams { n, k, field_size: field.size() });
        }
        // ∏ (x − α^i), built lowest-first then reversed
        let mut g: Vec<Symbol> = vec![1];
        for i in 1..=(n - k) {
            g = field.poly_mul(&g, &[field.alpha_pow(i as i64), 1]);
        }
        g.reverse();
        Ok(Self { field, n, k, generator: g })
    }

    /// Convenience constructor with the default primitive polynomial.
    pub fn with_degree(m: u32, n: usize, k: usize) -> Result<Self, RsError> {
        Self::new(GaloisField::with_degree(m)?, n, k)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn parity_len(&self) -> usize {
        self.n - self.k
    }

    /// Correctable symbol errors, ⌊(n−k)/2⌋.
    pub fn t(&self) -> usize {
        (self.n - self.k) / 2
    }

    pub fn field(&self) -> &GaloisField {
        &self.field
    }

    pub fn generator(&self) -> &[Symbol] {
        &self.generator
    }

    fn check_symbols(&self, symbols: &[Symbol], expected: usize) -> Result<(), RsError> {
        if symbols.len() != expected {
            return Err(RsError::Length { expected, got: symbols.len() });
        }
        if let Some((position, &symbol)) = symbols.iter().enumerate().find(|(_, &s)| !self.field.contains(s)) {
            return Err(RsError::SymbolOutOfField { position, symbol });
        }
        Ok(())
    }

    pub fn encode(&self, message: &[Symbol]) -> Result<Vec<Symbol>, RsError> {
        self.check_symbols(message, self.k)?;
        let nk = self.parity_len();
        let mut rem = vec![0 as Symbol; nk];
        for &sym in message {
            let feedback = sym ^ rem[0];
            rem.rotate_left(1);
            rem[nk - 1] = 0;
            if feedback != 0 {
                for (r, &g) in rem.iter_mut().zip(&self.generator[1..]) {
                    *r ^= self.field.mul(feedback, g);
                }
            }
        }
        let mut codeword = message.to_vec();
        codeword.extend_from_slice(&rem);
        Ok(codeword)
    }

    /// S_i = r(α^i) for i = 1..=n−k, returned lowest index first.
    pub fn syndromes(&self, received: &[Symbol]) -> Vec<Symbol> {
        (1..=self.parity_len())
            .map(|i| {
                let x = self.field.alpha_pow(i as i64);
                received.iter().fold(0, |acc, &c| self.field.mul(acc, x) ^ c)
            })
            .collect()
    }

    pub fn decode(&self, received: &[Symbol]) -> Result<RsDecoded, RsError> {
        self.check_symbols(received, self.n)?;
        let syndromes = self.syndromes(received);
        if syndromes.iter().all(|&s| s == 0) {
            return Ok(RsDecoded { message: received[..self.k].to_vec(), corrected: 0 });
        }
        let locator = self.berlekamp_massey(&syndromes).ok_or(RsError::DecodeFailure)?;
        let errors = locator.len() - 1;
        if errors == 0 || errors > self.t() {
            return Err(RsError::DecodeFailure);
        }
        let positions = self.chien_search(&locator);
        if positions.len() != errors {
            return Err(RsError::DecodeFailure);
        }
        let magnitudes = self.forney(&syndromes, &locator, &positions)?;
        let mut corrected = received.to_vec();
        for (&pos, &mag) in positions.iter().zip(&magnitudes) {
            corrected[pos] ^= mag;
        }
        if self.syndromes(&corrected).iter().any(|&s| s != 0) {
            return Err(RsError::DecodeFailure);
        }
        corrected.truncate(self.k);
        Ok(RsDecoded { message: corrected, corrected: errors })
    }

    /// Shortest LFSR generating the syndrome sequence, lowest-degree first.
    /// `None` when the connection polynomial's degree falls short of the
    /// register length, which cannot happen for a correctable pattern.
    fn berlekamp_massey(&self, s: &[Symbol]) -> Option<Vec<Symbol>> {
        let f = &self.field;
        let mut c: Vec<Symbol> = vec![1];
        let mut b: Vec<Symbol> = vec![1];
        let mut l = 0usize;
        let mut shift = 1usize;
        let mut last_disc: Symbol = 1;
        for step in 0..s.len() {
            let mut disc = s[step];
            for i in 1..=l.min(c.len() - 1) {
                disc ^= f.mul(c[i], s[step - i]);
            }
            if disc == 0 {
                shift += 1;
                continue;
            }
            let coef = f.div(disc, last_disc).expect("nonzero discrepancy");
            let mut next = c.clone();
            if next.len() < b.len() + shift {
                next.resize(b.len() + shift, 0);
            }
            for (i, &bi) in b.iter().enumerate() {
                next[i + shift] ^= f.mul(coef, bi);
            }
            if 2 * l <= step {
                l = step + 1 - l;
                b = c;
                last_disc = disc;
                shift = 1;
            } else {
                shift += 1;
            }
            c = next;
        }
        if c.len() <= l || c[l + 1..].iter().any(|&x| x != 0) || c[l] == 0 {
            return None;
        }
        c.truncate(l + 1);
        Some(c)
    }

    /// Codeword positions `j` such that Λ(α^−(n−1−j)) = 0.
    fn chien_search(&self, locator: &[Symbol]) -> Vec<usize> {
        (0..self.n)
            .filter(|&j| {
                let power = (self.n - 1 - j) as i64;
                self.field.eval(locator, self.field.alpha_pow(-power)) == 0
            })
            .collect()
    }

    fn forney(&self, s: &[Symbol], locator: &[Symbol], positions: &[usize]) -> Result<Vec<Symbol>, RsError> {
        let f = &self.field;
        let mut omega = f.poly_mul(s, locator);
        omega.truncate(s.len());
        let derivative: Vec<Symbol> =
            locator.iter().enumerate().skip(1).map(|(i, &c)| if i % 2 == 1 { c } else { 0 }).collect();
        positions
            .iter()
            .map(|&j| {
                let x_inv = f.alpha_pow(-((self.n - 1 - j) as i64));
                let num = f.eval(&omega, x_inv);
                let den = f.eval(&derivative, x_inv);
                f.div(num, den).ok_or(RsError::DecodeFailure)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rs73() -> ReedSolomon {
        ReedSolomon::with_degree(3, 7, 3).unwrap()
    }

    /// Every message of RS(7,3) enumerated into a codebook.
    fn codebook(code: &ReedSolomon) -> Vec<(Vec<Symbol>, Vec<Symbol>)> {
        let q = code.field().size() as Symbol;
        let mut out = Vec::new();
        for a in 0..q {
            for b in 0..q {
                for c in 0..q {
                    let msg = vec![a, b, c];
                    out.push((msg.clone(), code.encode(&msg).unwrap()));
                }
            }
        }
        out
    }

    fn distance(a: &[Symbol], b: &[Symbol]) -> usize {
        a.iter().zip(b).filter(|(x, y)| x != y).count()
    }

    #[test]
    fn codebook_is_the_full_code() {
        let code = rs73();
        let book = codebook(&code);
        let mut words: Vec<_> = book.iter().map(|(_, c)| c.clone()).collect();
        words.sort();
        words.dedup();
        assert_eq!(words.len(), 512);
        for (msg, cw) in &book {
            assert_eq!(&cw[..3], &msg[..]);
            // membership checked by direct root evaluation
            for i in 1..=4 {
                let x = code.field().alpha_pow(i);
                assert_eq!(cw.iter().fold(0, |acc, &c| code.field().mul(acc, x) ^ c), 0);
            }
        }
        let min_dist = (0..words.len())
            .flat_map(|i| (i + 1..words.len()).map(move |j| (i, j)))
            .map(|(i, j)| distance(&words[i], &words[j]))
            .min()
            .unwrap();
        assert_eq!(min_dist, 5);
    }

    #[test]
    fn decoder_agrees_with_nearest_codeword_oracle() {
        let code = rs73();
        let book = codebook(&code);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let (msg, cw) = &book[rng.gen_range(0..book.len())];
            let mut received = cw.clone();
            let errs = rng.gen_range(0..=2);
            let mut positions: Vec<usize> = (0..7).collect();
            for i in 0..errs {
                let p = rng.gen_range(i..7);
                positions.swap(i, p);
                received[positions[i]] ^= rng.gen_range(1..8);
            }
            let nearest = book.iter().min_by_key(|(_, c)| distance(c, &received)).unwrap();
            assert_eq!(&nearest.0, msg);
            let decoded = code.decode(&received).unwrap();
            assert_eq!(decoded.message, nearest.0);
            assert_eq!(decoded.corrected, errs);
        }
    }

    #[test]
    fn zero_message_zero_codeword() {
        let code = ReedSolomon::with_degree(7, 32, 20).unwrap();
        assert_eq!(code.encode(&[0; 20]).unwrap(), vec![0; 32]);
        assert_eq!(code.t(), 6);
        assert_eq!(code.generator().len(), 13);
    }

    #[test]
    fn three_errors_in_rs73_are_not_silently_corrected_to_the_original() {
        let code = rs73();
        let msg = vec![1, 2, 3];
        let cw = code.encode(&msg).unwrap();
        let mut received = cw.clone();
        received[0] ^= 1;
        received[3] ^= 2;
        received[6] ^= 3;
        match code.decode(&received) {
            Err(RsError::DecodeFailure) => {}
            Ok(d) => assert_ne!(d.message, msg),
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn input_validation() {
        let code = rs73();
        assert_eq!(code.encode(&[1, 2]), Err(RsError::Length { expected: 3, got: 2 }));
        assert_eq!(code.encode(&[1, 8, 0]), Err(RsError::SymbolOutOfField { position: 1, symbol: 8 }));
        assert!(matches!(code.decode(&[0; 6]), Err(RsError::Length { .. })));
        assert!(matches!(ReedSolomon::with_degree(3, 8, 3), Err(RsError::BadParams { .. })));
        assert!(matches!(ReedSolomon::with_degree(3, 7, 7), Err(RsError::BadParams { .. })));
        assert!(matches!(ReedSolomon::with_degree(3, 7, 0), Err(RsError::BadParams { .. })));
    }

    #[test]
    fn clean_round_trip_random() {
        let code = ReedSolomon::with_degree(7, 32, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let msg: Vec<Symbol> = (0..20).map(|_| rng.gen_range(0..128)).collect();
            let cw = code.encode(&msg).unwrap();
            assert_eq!(code.decode(&cw).unwrap(), RsDecoded { message: msg, corrected: 0 });
        }
    }
}
