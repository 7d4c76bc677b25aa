//! Exact integer polynomials for the vault: expansion from roots and
//! recovery of nonnegative integer roots.

/// Coefficients of ∏ (x − rᵢ), highest degree first (leading 1).
/// `None` on i128 overflow.
pub fn expand_roots(roots: &[i128]) -> Option<Vec<i128>> {
    let mut coeffs = vec![1i128];
    for &r in roots {
        let mut next = vec![0i128; coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] = next[i].checked_add(c)?;
            next[i + 1] = next[i + 1].checked_sub(c.checked_mul(r)?)?;
        }
        coeffs = next;
    }
    Some(coeffs)
}

/// Horner evaluation with overflow reported as `None`.
pub fn eval(coeffs: &[i128], x: i128) -> Option<i128> {
    coeffs.iter().try_fold(0i128, |acc, &c| acc.checked_mul(x)?.checked_add(c))
}

/// Divides by (x − r), assuming r is a root; highest degree first.
fn deflate(coeffs: &[i128], r: i128) -> Option<Vec<i128>> {
    let mut out = Vec::with_capacity(coeffs.len() - 1);
    let mut carry = 0i128;
    for &c in &coeffs[..coeffs.len() - 1] {
        carry = carry.checked_mul(r)?.checked_add(c)?;
        out.push(carry);
    }
    Some(out)
}

/// All nonnegative integer roots no larger than `bound`, with multiplicity,
/// ascending. Candidates are divisors of the constant term, so the search is
/// a single pass over `1..=bound` that deflates each root as it is found.
pub fn integer_roots(coeffs: &[i128], bound: i128) -> Vec<i128> {
    let mut poly: Vec<i128> = coeffs.to_vec();
    while poly.first() == Some(&0) {
        poly.remove(0);
    }
    let mut roots = Vec::new();
    while poly.len() > 1 && *poly.last().unwrap() == 0 {
        poly.pop();
        roots.push(0);
    }
    let mut r: i128 = 1;
    while poly.len() > 1 && r <= bound {
        let constant = *poly.last().unwrap();
        if divides(r, constant) && eval(&poly, r) == Some(0) {
            match deflate(&poly, r) {
                Some(next) => {
                    poly = next;
                    roots.push(r);
                    // same r again for repeated roots
                    continue;
                }
                None => break,
            }
        }
        r += 1;
    }
    roots
}

/// The single integer root in `lo..=hi`, found by bisection on the sign of
/// `p` and confirmed as an exact zero dividing the constant term. `None` when
/// the interval holds no simple integer root.
pub fn root_in(coeffs: &[i128], mut lo: i128, mut hi: i128) -> Option<i128> {
    let constant = *coeffs.last()?;
    let confirm = |r: i128| (r != 0 && divides(r, constant) || r == 0 && constant == 0).then_some(r);
    let (mut f_lo, f_hi) = (eval(coeffs, lo)?, eval(coeffs, hi)?);
    if f_lo == 0 {
        return confirm(lo);
    }
    if f_hi == 0 {
        return confirm(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let f_mid = eval(coeffs, mid)?;
        if f_mid == 0 {
            return confirm(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    None
}

#[inline]
fn divides(d: i128, value: i128) -> bool {
    let v = value.unsigned_abs();
    match (u64::try_from(v), u64::try_from(d)) {
        (Ok(v), Ok(d)) => v % d == 0,
        _ => v.is_multiple_of(d.unsigned_abs()),
    }
}
