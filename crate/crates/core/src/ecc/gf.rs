//! Arithmetic in GF(2^m) through exp/log tables.

use thiserror::Error;

pub type Symbol = u16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("extension degree must be in 2..=12, got {0}")]
    BadDegree(u32),
    #[error("polynomial {poly:#x} does not have degree {m}")]
    DegreeMismatch { m: u32, poly: u32 },
    #[error("polynomial {0:#x} is not primitive")]
    NotPrimitive(u32),
}

/// Primitive polynomials (bit masks including the x^m term) for m = 2..=12.
pub fn default_primitive_polynomial(m: u32) -> Option<u32> {
    Some(match m {
        2 => 0x7,
        3 => 0xb,
        4 => 0x13,
        5 => 0x25,
        6 => 0x43,
        7 => 0x89,
        8 => 0x11d,
        9 => 0x211,
        10 => 0x409,
        11 => 0x805,
        12 => 0x1053,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaloisField {
    m: u32,
    poly: u32,
    order: usize,
    exp: Vec<Symbol>,
    log: Vec<usize>,
}

impl GaloisField {
    pub fn new(m: u32, poly: u32) -> Result<Self, FieldError> {
        if !(2..=12).contains(&m) {
            return Err(FieldError::BadDegree(m));
        }
        if poly >> m != 1 {
            return Err(FieldError::DegreeMismatch { m, poly });
        }
        let size = 1usize << m;
        let order = size - 1;
        let mut exp = vec![0 as Symbol; 2 * order];
        let mut log = vec![usize::MAX; size];
        let mut x: u32 = 1;
        for (i, slot) in exp.iter_mut().take(order).enumerate() {
            // α = x must cycle through every nonzero element exactly once;
            // that also rules out any factor, so the polynomial is irreducible.
            if log[x as usize] != usize::MAX {
                return Err(FieldError::NotPrimitive(poly));
            }
            *slot = x as Symbol;
            log[x as usize] = i;
            x <<= 1;
            if x & (1 << m) != 0 {
                x ^= poly;
            }
        }
        if x != 1 {
            return Err(FieldError::NotPrimitive(poly));
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Self { m, poly, order, exp, log })
    }

    pub fn with_degree(m: u32) -> Result<Self, FieldError> {
        let poly = default_primitive_polynomial(m).ok_or(FieldError::BadDegree(m))?;
        Self::new(m, poly)
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn polynomial(&self) -> u32 {
        self.poly
    }

    /// Number of elements, 2^m.
    pub fn size(&self) -> usize {
        self.order + 1
    }

    /// Multiplicative group order, 2^m − 1.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn contains(&self, a: Symbol) -> bool {
        (a as usize) < self.size()
    }

    /// α^i for any integer exponent.
    pub fn alpha_pow(&self, i: i64) -> Symbol {
        self.exp[i.rem_euclid(self.order as i64) as usize]
    }

    /// Discrete log of a nonzero element.
    pub fn log(&self, a: Symbol) -> usize {
        debug_assert!(a != 0);
        self.log[a as usize]
    }

    #[inline]
    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] + self.log[b as usize]]
        }
    }

    pub fn inv(&self, a: Symbol) -> Option<Symbol> {
        if a == 0 {
            None
        } else {
            Some(self.exp[(self.order - self.log[a as usize]) % self.order])
        }
    }

    pub fn div(&self, a: Symbol, b: Symbol) -> Option<Symbol> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }

    pub fn pow(&self, a: Symbol, e: usize) -> Symbol {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] * e) % self.order]
    }

    /// Evaluates a polynomial given lowest-degree-first coefficients.
    pub fn eval(&self, poly: &[Symbol], x: Symbol) -> Symbol {
        poly.iter().rev().fold(0, |acc, &c| self.mul(acc, x) ^ c)
    }

    /// Product of two lowest-degree-first polynomials.
    pub fn poly_mul(&self, a: &[Symbol], b: &[Symbol]) -> Vec<Symbol> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] ^= self.mul(x, y);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Carry-less multiply then reduce, independent of the tables.
    fn slow_mul(a: u32, b: u32, m: u32, poly: u32) -> u32 {
        let mut acc = 0u32;
        for i in 0..m {
            if b >> i & 1 == 1 {
                acc ^= a << i;
            }
        }
        for bit in (m..2 * m).rev() {
            if acc >> bit & 1 == 1 {
                acc ^= poly << (bit - m);
            }
        }
        acc
    }

    #[test]
    fn every_default_polynomial_is_primitive() {
        for m in 2..=12 {
            let f = GaloisField::with_degree(m).unwrap();
            assert_eq!(f.size(), 1 << m);
        }
    }

    #[test]
    fn tables_are_mutually_inverse() {
        for m in 2..=12 {
            let f = GaloisField::with_degree(m).unwrap();
            for a in 1..f.size() as Symbol {
                assert_eq!(f.alpha_pow(f.log(a) as i64), a);
            }
            for i in 0..f.order() {
                assert_eq!(f.log(f.alpha_pow(i as i64)), i);
            }
        }
    }

    #[test]
    fn every_nonzero_element_has_inverse() {
        for m in 2..=12 {
            let f = GaloisField::with_degree(m).unwrap();
            assert_eq!(f.inv(0), None);
            for a in 1..f.size() as Symbol {
                assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
        }
    }

    #[test]
    fn table_mul_matches_carryless_mul() {
        for m in [3, 4, 7] {
            let f = GaloisField::with_degree(m).unwrap();
            for a in 0..f.size() as u32 {
                for b in 0..f.size() as u32 {
                    assert_eq!(f.mul(a as Symbol, b as Symbol) as u32, slow_mul(a, b, m, f.polynomial()));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_polynomials() {
        assert_eq!(GaloisField::new(1, 0x3), Err(FieldError::BadDegree(1)));
        assert_eq!(GaloisField::new(13, 0x201b), Err(FieldError::BadDegree(13)));
        assert!(matches!(GaloisField::new(3, 0x13), Err(FieldError::DegreeMismatch { .. })));
        // x^3 + 1 = (x + 1)(x^2 + x + 1)
        assert_eq!(GaloisField::new(3, 0x9), Err(FieldError::NotPrimitive(0x9)));
        // x^4 + x^3 + x^2 + x + 1 is irreducible but x has order 5
        assert_eq!(GaloisField::new(4, 0x1f), Err(FieldError::NotPrimitive(0x1f)));
    }
}
