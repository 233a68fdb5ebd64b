//! Deterministic enumeration of oracle queries.
//!
//! With `R` registered machines, the 1-based query `q_i` is built from
//! `j = i - 1` as follows: the machine is `j mod R + 1`; `j div R` is split by
//! the inverse Cantor pairing `π(s, d) = (s + d)(s + d + 1)/2 + d` into an
//! input-string position `s` (length-lexicographic: ε, 0, 1, 00, ...) and a
//! threshold position `d`. Thresholds run over odd numerators level by level:
//! 1/2, 1/4, 3/4, 1/8, 3/8, ...

use num::ToPrimitive;

use super::bits::Bits;
use crate::rational::{as_dyadic, dyadic, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub machine: usize,
    pub input: Bits,
    pub threshold: Rational,
}

impl std::fmt::Display for Query {
    /// `machine input n/2^level`, the golden-file line format.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (n, k) = as_dyadic(&self.threshold).expect("dyadic threshold");
        write!(f, "{} {} {}/2^{}", self.machine, self.input, n, k)
    }
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

pub fn cantor_pair(s: u64, d: u64) -> u64 {
    (s + d) * (s + d + 1) / 2 + d
}

pub fn cantor_unpair(j: u64) -> (u64, u64) {
    let w = (isqrt(8 * j + 1) - 1) / 2;
    let t = w * (w + 1) / 2;
    let d = j - t;
    (w - d, d)
}

/// The `d`-th threshold (0-based).
pub fn threshold_at(d: u64) -> Rational {
    let level = 64 - (d + 1).leading_zeros();
    let offset = d + 1 - (1u64 << (level - 1));
    dyadic(2 * offset + 1, level)
}

/// Inverse of [`threshold_at`]; `None` for 0, 1, non-dyadics and anything outside (0, 1).
pub fn threshold_position(p: &Rational) -> Option<u64> {
    let (n, k) = as_dyadic(p)?;
    let n = n.to_u64()?;
    if k == 0 || k > 62 || n == 0 || n >= (1u64 << k) {
        return None;
    }
    Some((1u64 << (k - 1)) - 1 + (n - 1) / 2)
}

/// `q_i` for a registry of `registry_size` machines (1-based `i`).
pub fn query_at(registry_size: usize, i: u64) -> Option<Query> {
    if registry_size == 0 || i == 0 {
        return None;
    }
    let r = registry_size as u64;
    let j = i - 1;
    let (s, d) = cantor_unpair(j / r);
    Some(Query { machine: (j % r) as usize + 1, input: Bits::from_length_lex_index(s), threshold: threshold_at(d) })
}

/// Position of `q` in the enumeration, or `None` if it is never enumerated.
pub fn query_index(registry_size: usize, q: &Query) -> Option<u64> {
    if q.machine == 0 || q.machine > registry_size {
        return None;
    }
    let s = q.input.length_lex_index()?;
    let d = threshold_position(&q.threshold)?;
    let j = cantor_pair(s, d).checked_mul(registry_size as u64)?;
    Some(j + (q.machine as u64 - 1) + 1)
}

/// The first `n` queries for a registry of the given size.
pub fn enumerate(registry_size: usize, n: usize) -> Vec<Query> {
    if registry_size == 0 {
        return Vec::new();
    }
    (1..=n as u64).filter_map(|i| query_at(registry_size, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn threshold_order() {
        let t: Vec<Rational> = (0..7).map(threshold_at).collect();
        assert_eq!(t, vec![rat(1, 2), rat(1, 4), rat(3, 4), rat(1, 8), rat(3, 8), rat(5, 8), rat(7, 8)]);
        for d in 0..500 {
            assert_eq!(threshold_position(&threshold_at(d)), Some(d));
        }
        assert_eq!(threshold_position(&rat(0, 1)), None);
        assert_eq!(threshold_position(&rat(1, 1)), None);
        assert_eq!(threshold_position(&rat(1, 3)), None);
    }

    #[test]
    fn cantor_round_trip() {
        for j in 0..2000 {
            let (s, d) = cantor_unpair(j);
            assert_eq!(cantor_pair(s, d), j);
        }
        assert_eq!(cantor_unpair(0), (0, 0));
        assert_eq!(cantor_unpair(1), (1, 0));
        assert_eq!(cantor_unpair(2), (0, 1));
    }

    #[test]
    fn index_round_trip() {
        for r in 1..4 {
            for i in 1..300 {
                let q = query_at(r, i).unwrap();
                assert_eq!(query_index(r, &q), Some(i));
            }
        }
        let q = Query { machine: 3, input: Bits::empty(), threshold: rat(1, 2) };
        assert_eq!(query_index(2, &q), None);
    }
}
