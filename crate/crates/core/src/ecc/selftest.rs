//! Exhaustive and randomized capacity checks for the codes, runnable from
//! the command line.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{GaloisField, HadamardCode, ReedSolomon, Symbol};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn result(name: &str, trials: usize, failures: usize) -> SuiteResult {
    SuiteResult { name: name.to_owned(), trials, failures }
}

/// exp/log inverse and multiplicative inverses for every m in 2..=12.
pub fn field_tables() -> SuiteResult {
    let mut trials = 0;
    let mut failures = 0;
    for m in 2..=12 {
        let f = match GaloisField::with_degree(m) {
            Ok(f) => f,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        for a in 1..f.size() as Symbol {
            trials += 1;
            let ok = f.alpha_pow(f.log(a) as i64) == a && f.inv(a).map(|i| f.mul(a, i)) == Some(1);
            failures += usize::from(!ok);
        }
    }
    result("gf-tables-m2..12", trials, failures)
}

/// Every message of RS(7,3) over GF(8) under every pattern of at most two
/// symbol errors.
pub fn rs73_exhaustive(exec: Execution) -> SuiteResult {
    let code = ReedSolomon::with_degree(3, 7, 3).expect("RS(7,3) parameters");
    let per_message = par::map_range(exec, 512, |idx| {
        let msg = [(idx >> 6) as Symbol, ((idx >> 3) & 7) as Symbol, (idx & 7) as Symbol];
        let cw = code.encode(&msg).expect("in-field message");
        let mut trials = 0usize;
        let mut failures = 0usize;
        let mut check = |received: &[Symbol]| {
            trials += 1;
            if code.decode(received).map(|d| d.message) != Ok(msg.to_vec()) {
                failures += 1;
            }
        };
        check(&cw);
        for p in 0..7 {
            for e in 1..8 {
                let mut r = cw.clone();
                r[p] ^= e;
                check(&r);
            }
        }
        for p in 0..7 {
            for q in p + 1..7 {
                for e1 in 1..8 {
                    for e2 in 1..8 {
                        let mut r = cw.clone();
                        r[p] ^= e1;
                        r[q] ^= e2;
                        check(&r);
                    }
                }
            }
        }
        (trials, failures)
    });
    let (t, f) = per_message.into_iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    result("rs(7,3)-gf8-all-<=2-errors", t, f)
}

/// Random error patterns of at most `t` symbols for RS(n,k) over GF(2^m).
pub fn rs_random(exec: Execution, m: u32, n: usize, k: usize, trials: usize, seed: u64) -> SuiteResult {
    let code = ReedSolomon::with_degree(m, n, k).expect("valid RS parameters");
    let t = code.t();
    let q = code.field().size() as Symbol;
    let failures = par::count_range(exec, trials, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let msg: Vec<Symbol> = (0..k).map(|_| rng.gen_range(0..q)).collect();
        let mut r = code.encode(&msg).expect("in-field message");
        let errors = rng.gen_range(0..=t);
        for p in sample(&mut rng, n, errors) {
            r[p] ^= rng.gen_range(1..q);
        }
        code.decode(&r).map(|d| d.message) != Ok(msg)
    });
    result(&format!("rs({n},{k})-gf2^{m}-random-<={t}-errors"), trials, failures)
}

/// All messages under all patterns of at most `max_flips` bit flips.
pub fn hadamard_exhaustive(m: u32, max_flips: usize) -> SuiteResult {
    let code = HadamardCode::new(m).expect("valid order");
    let n = code.codeword_len();
    let mut trials = 0;
    let mut failures = 0;
    for msg in 0..1u32 << code.message_bits() {
        let cw = code.encode(msg).expect("in-range message");
        for mask in 0u64..1 << n {
            if mask.count_ones() as usize > max_flips {
                continue;
            }
            let r: Vec<bool> = cw.iter().enumerate().map(|(i, &b)| b ^ (mask >> i & 1 == 1)).collect();
            trials += 1;
            if code.decode(&r).map(|d| d.message) != Ok(msg) {
                failures += 1;
            }
        }
    }
    result(&format!("hadamard-m{m}-all-<={max_flips}-flips"), trials, failures)
}

pub fn hadamard_random(exec: Execution, m: u32, trials: usize, seed: u64) -> SuiteResult {
    let code = HadamardCode::new(m).expect("valid order");
    let cap = code.capacity();
    let failures = par::count_range(exec, trials, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let msg = rng.gen_range(0..1u32 << code.message_bits());
        let mut r = code.encode(msg).expect("in-range message");
        let flips = rng.gen_range(0..=cap);
        for p in sample(&mut rng, r.len(), flips) {
            r[p] = !r[p];
        }
        code.decode(&r).map(|d| d.message) != Ok(msg)
    });
    result(&format!("hadamard-m{m}-random-<={cap}-flips"), trials, failures)
}

/// Every codeword pair of every order up to `max_m` sits at distance 2^(m−1)
/// (2^m for complements).
pub fn hadamard_distance(max_m: u32) -> SuiteResult {
    let mut trials = 0;
    let mut failures = 0;
    for m in 1..=max_m {
        let code = HadamardCode::new(m).expect("valid order");
        let words: Vec<Vec<bool>> = (0..1u32 << (m + 1)).map(|x| code.encode(x).expect("in range")).collect();
        for i in 0..words.len() {
            for j in i + 1..words.len() {
                trials += 1;
                let d = words[i].iter().zip(&words[j]).filter(|(a, b)| a != b).count();
                let expected = if i ^ j == 1 << m { 1 << m } else { 1 << (m - 1) };
                failures += usize::from(d != expected);
            }
        }
    }
    result(&format!("hadamard-distance-m1..{max_m}"), trials, failures)
}

/// The full battery used by `ecc selftest`.
pub fn run_all(exec: Execution, seed: u64) -> Vec<SuiteResult> {
    vec![
        field_tables(),
        rs73_exhaustive(exec),
        rs_random(exec, 7, 32, 20, 10_000, seed),
        hadamard_exhaustive(3, 1),
        hadamard_random(exec, 5, 1000, seed),
        hadamard_distance(5),
    ]
}
