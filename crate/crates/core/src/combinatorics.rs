//! Exact binomials and the combinatorial number system.
//!
//! Subsets are ranked in colexicographic order: the sorted subset
//! `c_1 < c_2 < .. < c_k` has rank `sum_i C(c_i, i)`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::dataset::{Dataset, Elem};

/// Exact binomial coefficient `C(u, k)`; zero when `k > u`.
pub fn binom_exact(u: u64, k: u64) -> BigUint {
    if k > u {
        return BigUint::zero();
    }
    let k = k.min(u - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= u - i;
        acc /= i + 1;
    }
    acc
}

/// `C(u, k)` in `u128`, or `None` on overflow.
pub fn binom_u128(u: u64, k: u64) -> Option<u128> {
    if k > u {
        return Some(0);
    }
    let k = k.min(u - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        // acc * (u - i) is divisible by (i + 1) at every step.
        let g = num_integer::gcd(acc, i + 1);
        let num = (u as u128 - i) / ((i + 1) / g);
        acc = (acc / g).checked_mul(num)?;
    }
    Some(acc)
}

/// `sum_{j=0}^{k} C(u, j)`: the number of subsets of a `u`-set with at most `k` elements.
pub fn binom_prefix_sum(u: u64, k: u64) -> BigUint {
    (0..=k).map(|j| binom_exact(u, j)).sum()
}

/// Number of bits needed to write any integer in `0..count`. Zero for `count <= 1`.
pub fn bits_for_count(count: &BigUint) -> u64 {
    if *count <= BigUint::one() {
        0
    } else {
        (count - 1u32).bits()
    }
}

/// Colex rank of an ascending list of distinct nonnegative integers.
pub fn colex_rank(sorted: &[u64]) -> BigUint {
    sorted.iter().enumerate().map(|(i, &c)| binom_exact(c, i as u64 + 1)).sum()
}

/// Inverse of [`colex_rank`] for `k`-subsets.
pub fn colex_unrank(mut rank: BigUint, k: u64) -> Vec<u64> {
    let mut out = vec![0u64; k as usize];
    for i in (1..=k).rev() {
        // Largest c with C(c, i) <= rank; C(c, i) is increasing in c for c >= i - 1.
        let mut c = i - 1;
        while binom_exact(c + 1, i) <= rank {
            c += 1;
        }
        rank -= binom_exact(c, i);
        out[(i - 1) as usize] = c;
    }
    out
}

/// Rank of a subset of an `m`-element ambient set in graded order: all subsets of
/// size 0 first, then size 1, and so on; colex within one size.
pub fn graded_rank(m: u64, sorted: &[u64]) -> BigUint {
    let k = sorted.len() as u64;
    binom_prefix_sum_below(m, k) + colex_rank(sorted)
}

/// Inverse of [`graded_rank`]. Returns `None` if `index` is at or beyond the
/// number of subsets of size at most `max_k`.
pub fn graded_unrank(m: u64, max_k: u64, index: &BigUint) -> Option<Vec<u64>> {
    let mut rest = index.clone();
    for k in 0..=max_k.min(m) {
        let layer = binom_exact(m, k);
        if rest < layer {
            return Some(colex_unrank(rest, k));
        }
        rest -= layer;
    }
    None
}

fn binom_prefix_sum_below(m: u64, k: u64) -> BigUint {
    (0..k).map(|j| binom_exact(m, j)).sum()
}

/// Iterator over all `k`-subsets of `[u]` in colex order.
#[derive(Debug, Clone)]
pub struct Combinations {
    u: u32,
    current: Option<Vec<Elem>>,
}

impl Combinations {
    pub fn new(u: u32, k: u32) -> Self {
        let current = (k <= u).then(|| (0..k).collect());
        Combinations { u, current }
    }
}

impl Iterator for Combinations {
    type Item = Dataset;

    fn next(&mut self) -> Option<Dataset> {
        let cur = self.current.as_mut()?;
        let out: Dataset = cur.iter().copied().collect();
        let k = cur.len();
        let mut i = 0;
        loop {
            if i == k {
                self.current = None;
                break;
            }
            let limit = if i + 1 < k { cur[i + 1] } else { self.u };
            if cur[i] + 1 < limit {
                cur[i] += 1;
                for (j, c) in cur.iter_mut().enumerate().take(i) {
                    *c = j as Elem;
                }
                break;
            }
            i += 1;
        }
        Some(out)
    }
}

/// All `k`-subsets of `[u]`, colex order.
pub fn combinations(u: u32, k: u32) -> Combinations {
    Combinations::new(u, k)
}

/// `log2(x)` for a big integer, accurate to double precision. `-inf` for zero.
pub fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return x.to_u64().map_or(f64::NAN, |v| (v as f64).log2());
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    (top as f64).log2() + shift as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pascal_row(u: usize) -> Vec<BigUint> {
        let mut row = vec![BigUint::one()];
        for _ in 0..u {
            let mut next = vec![BigUint::one(); row.len() + 1];
            for j in 1..row.len() {
                next[j] = &row[j - 1] + &row[j];
            }
            row = next;
        }
        row
    }

    #[test]
    fn binom_examples() {
        assert_eq!(binom_exact(8, 2), BigUint::from(28u32));
        assert_eq!(binom_exact(5, 0), BigUint::one());
        assert_eq!(binom_exact(3, 7), BigUint::zero());
        assert_eq!(binom_exact(0, 0), BigUint::one());
    }

    #[test]
    fn binom_100_10_matches_pascal_oracle() {
        let row = pascal_row(100);
        assert_eq!(row[10], BigUint::from(17_310_309_456_440u64));
        assert_eq!(binom_exact(100, 10), row[10]);
    }

    #[test]
    fn binom_matches_pascal_rows_up_to_60() {
        for u in 0..=60 {
            let row = pascal_row(u);
            for (k, expected) in row.iter().enumerate() {
                assert_eq!(&binom_exact(u as u64, k as u64), expected, "C({u},{k})");
                assert_eq!(binom_u128(u as u64, k as u64).map(BigUint::from).as_ref(), Some(expected));
            }
        }
    }

    #[test]
    fn bits_for_count_small() {
        assert_eq!(bits_for_count(&BigUint::from(37u32)), 6);
        assert_eq!(bits_for_count(&BigUint::from(22u32)), 5);
        assert_eq!(bits_for_count(&BigUint::from(32u32)), 5);
        assert_eq!(bits_for_count(&BigUint::from(33u32)), 6);
        assert_eq!(bits_for_count(&BigUint::one()), 0);
    }

    #[test]
    fn combinations_are_colex_and_ranked_in_order() {
        for u in 0..=8u32 {
            for k in 0..=u + 1 {
                let all: Vec<Dataset> = combinations(u, k).collect();
                assert_eq!(BigUint::from(all.len()), binom_exact(u as u64, k as u64));
                for (i, s) in all.iter().enumerate() {
                    assert_eq!(s.len(), k as usize);
                    let v: Vec<u64> = s.iter().map(u64::from).collect();
                    assert_eq!(colex_rank(&v), BigUint::from(i));
                    assert_eq!(colex_unrank(BigUint::from(i), k as u64), v);
                }
            }
        }
    }

    #[test]
    fn graded_order_starts_with_empty_set() {
        assert_eq!(graded_rank(6, &[]), BigUint::zero());
        assert_eq!(graded_rank(6, &[0]), BigUint::one());
        assert_eq!(graded_rank(6, &[0, 1]), BigUint::from(7u32));
        assert_eq!(graded_unrank(6, 1, &BigUint::from(7u32)), None);
        assert_eq!(graded_unrank(6, 2, &BigUint::from(7u32)), Some(vec![0, 1]));
    }

    #[test]
    fn log2_big_matches_f64() {
        assert!((log2_big(&BigUint::from(120u32)) - 120f64.log2()).abs() < 1e-12);
        let big = BigUint::one() << 200u32;
        assert!((log2_big(&big) - 200.0).abs() < 1e-12);
        assert_eq!(log2_big(&BigUint::zero()), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn pascal_and_symmetry(u in 1u64..200, k in 0u64..200) {
            let k = k % (u + 1);
            prop_assert_eq!(binom_exact(u, k), binom_exact(u, u - k));
            if k >= 1 {
                prop_assert_eq!(binom_exact(u, k), binom_exact(u - 1, k - 1) + binom_exact(u - 1, k));
            }
        }

        #[test]
        fn graded_round_trip(m in 0u64..20, mask in any::<u32>()) {
            let v: Vec<u64> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let r = graded_rank(m, &v);
            prop_assert!(r < binom_prefix_sum(m, v.len() as u64));
            prop_assert_eq!(graded_unrank(m, v.len() as u64, &r), Some(v));
        }
    }
}
