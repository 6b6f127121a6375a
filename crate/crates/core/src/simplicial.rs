//! Simplicial numbers `s_d(n)`: `s_0(n) = 1` and `s_d(n) = sum_{i=1..n} s_{d-1}(i)`.
//!
//! `s_1` are the naturals, `s_2` the triangular numbers, `s_3` the
//! tetrahedral numbers. Every packed offset in this crate is a sum of
//! products of these.

use crate::error::{Error, Result};

/// Closed form `s_d(n) = (n)(n+1)...(n+d-1) / d!`, evaluated as a running
/// binomial so no intermediate exceeds the final value.
pub fn simplicial(d: usize, n: u128) -> Result<u128> {
    let overflow = || Error::Overflow { d, n };
    // After step i the accumulator holds C(n + i - 1, i) = s_i(n).
    let mut acc: u128 = 1;
    for i in 1..=d as u128 {
        let factor = n.checked_add(i - 1).ok_or_else(overflow)?;
        let g = gcd(acc, i);
        let (acc_r, div_r) = (acc / g, i / g);
        assert_eq!(factor % div_r, 0, "inexact division in s_{d}({n})");
        acc = acc_r.checked_mul(factor / div_r).ok_or_else(overflow)?;
    }
    Ok(acc)
}

/// `simplicial` for values already known to be small.
pub fn simplicial_usize(d: usize, n: usize) -> Result<usize> {
    let value = simplicial(d, n as u128)?;
    usize::try_from(value).map_err(|_| Error::SizeOverflow)
}

/// Literal summation of the defining recurrence, one row per dimension.
///
/// Kept as an independent reference for [`simplicial`].
pub fn simplicial_recurrence(d: usize, n: u128) -> Result<u128> {
    let overflow = || Error::Overflow { d, n };
    let len = usize::try_from(n).map_err(|_| overflow())?;
    // row[i] = s_k(i + 1) for i in 0..n
    let mut row = vec![1u128; len];
    for _ in 1..=d {
        let mut sum: u128 = 0;
        for slot in row.iter_mut() {
            sum = sum.checked_add(*slot).ok_or_else(overflow)?;
            *slot = sum;
        }
    }
    if d == 0 {
        return Ok(1);
    }
    Ok(row.last().copied().unwrap_or(0))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_cases() {
        assert_eq!(simplicial(0, 7).unwrap(), 1);
        assert_eq!(simplicial(0, 0).unwrap(), 1);
        assert_eq!(simplicial(1, 5).unwrap(), 5);
        assert_eq!(simplicial(3, 0).unwrap(), 0);
    }

    #[test]
    fn small_values_match_hand_sums() {
        // s_1(1) + s_1(2) + s_1(3)
        assert_eq!(simplicial(2, 3).unwrap(), 6);
        // s_2(1) + s_2(2) = 1 + 3
        assert_eq!(simplicial(3, 2).unwrap(), 4);
        assert_eq!(simplicial_recurrence(2, 3).unwrap(), 6);
        assert_eq!(simplicial_recurrence(0, 0).unwrap(), 1);
        assert_eq!(simplicial_recurrence(4, 1).unwrap(), 1);
    }

    #[test]
    fn pascal_difference() {
        for d in 1..8 {
            for n in 1..40u128 {
                let lhs = simplicial(d, n).unwrap() - simplicial(d, n - 1).unwrap();
                assert_eq!(lhs, simplicial(d - 1, n).unwrap(), "d={d} n={n}");
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(
            simplicial(2, u128::MAX),
            Err(Error::Overflow { .. })
        ));
        assert!(matches!(
            simplicial(40, 1 << 40),
            Err(Error::Overflow { .. })
        ));
        // C(129, 64) is just below 2^127 and must still be exact.
        assert!(simplicial(64, 66).is_ok());
    }
}
