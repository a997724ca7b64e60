//! Lehmer-code permutation ranking.
//!
//! The rank of an ordering of `k` distinct ids is `Σ_i l_i · (k−1−i)!`, where
//! `l_i` counts the later entries smaller than entry `i`. Ascending order has
//! rank 0 and descending order has rank `k! − 1`.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use super::bits::{BitReader, BitStream};
use super::subset::check_sorted;
use super::CodecError;
use crate::numerics::{ceil_log2_big, factorial};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermCode {
    pub rank: BigUint,
    /// Number of permuted items `k`.
    pub size: usize,
}

/// `⌈log2 k!⌉`.
pub fn perm_width(k: usize) -> u64 {
    ceil_log2_big(&factorial(k as u64))
}

impl PermCode {
    pub fn width(&self) -> u64 {
        perm_width(self.size)
    }

    pub fn write(&self, out: &mut BitStream) -> Result<u64, CodecError> {
        let w = self.width();
        out.write_big(&self.rank, w)?;
        Ok(w)
    }

    pub fn read(r: &mut BitReader<'_>, size: usize) -> Result<Self, CodecError> {
        let count = factorial(size as u64);
        let rank = r.read_big(ceil_log2_big(&count))?;
        if rank >= count {
            return Err(CodecError::RankOutOfRange {
                what: "permutation",
                at: r.position(),
            });
        }
        Ok(PermCode { rank, size })
    }
}

/// Fenwick tree over positions `0..n` counting still-present items.
struct Fenwick(Vec<u32>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick(vec![0; n + 1])
    }

    fn add(&mut self, i: usize, delta: i32) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] = (self.0[i] as i32 + delta) as u32;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `0..i`.
    fn prefix(&self, i: usize) -> u32 {
        let mut i = i;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Lehmer rank of `order`, which must list distinct ids.
pub fn perm_rank(order: &[u32]) -> Result<PermCode, CodecError> {
    let k = order.len();
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(CodecError::NotPermutation(format!("duplicate id {}", w[0])));
    }
    let mut tree = Fenwick::new(k);
    for i in 0..k {
        tree.add(i, 1);
    }
    let mut rank = BigUint::zero();
    for (i, id) in order.iter().enumerate() {
        let pos = sorted.binary_search(id).expect("present");
        let smaller_remaining = tree.prefix(pos);
        tree.add(pos, -1);
        rank = rank * (k - i) as u64 + smaller_remaining;
    }
    Ok(PermCode { rank, size: k })
}

/// Rebuild the ordering of the sorted id list `ids` from its rank.
pub fn perm_unrank(code: &PermCode, ids: &[u32]) -> Result<Vec<u32>, CodecError> {
    check_sorted(ids, "permutation ids")?;
    let k = ids.len();
    if code.size != k {
        return Err(CodecError::NotPermutation(format!(
            "code permutes {} items but {} ids supplied",
            code.size, k
        )));
    }
    if code.rank >= factorial(k as u64) {
        return Err(CodecError::RankOutOfRange {
            what: "permutation",
            at: 0,
        });
    }
    let mut digits = vec![0usize; k];
    let mut r = code.rank.clone();
    for i in (0..k).rev() {
        let base = BigUint::from((k - i) as u64);
        let (q, d) = r.div_rem(&base);
        digits[i] = d.to_usize().expect("digit below k");
        r = q;
    }
    let mut remaining = ids.to_vec();
    Ok(digits.into_iter().map(|d| remaining.remove(d)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use proptest::prelude::*;

    #[test]
    fn extremes() {
        let ids = [2u32, 4, 6, 8, 10];
        assert_eq!(perm_rank(&ids).unwrap().rank, BigUint::zero());
        let rev: Vec<u32> = ids.iter().rev().copied().collect();
        assert_eq!(
            perm_rank(&rev).unwrap().rank,
            factorial(5) - BigUint::one()
        );
    }

    /// All orders of 4 ids in lexicographic order must rank 0..24 in turn.
    #[test]
    fn all_orders_of_four() {
        let ids = [1u32, 2, 3, 4];
        let mut orders = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let o = [a, b, c, d];
                        let mut s = o;
                        s.sort();
                        if s == [0, 1, 2, 3] {
                            orders.push(o.map(|i| ids[i]));
                        }
                    }
                }
            }
        }
        assert_eq!(orders.len(), 24);
        for (expected, o) in orders.iter().enumerate() {
            let code = perm_rank(o).unwrap();
            assert_eq!(code.rank, BigUint::from(expected));
            assert_eq!(perm_unrank(&code, &ids).unwrap(), o.to_vec());
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            perm_rank(&[1, 2, 1]),
            Err(CodecError::NotPermutation(_))
        ));
        let code = perm_rank(&[3, 1, 2]).unwrap();
        assert!(perm_unrank(&code, &[1, 2]).is_err());
        let bad = PermCode {
            rank: BigUint::from(6u32),
            size: 3,
        };
        assert!(perm_unrank(&bad, &[1, 2, 3]).is_err());
    }

    #[test]
    fn widths() {
        assert_eq!(perm_width(0), 0);
        assert_eq!(perm_width(1), 0);
        assert_eq!(perm_width(2), 1);
        assert_eq!(perm_width(4), 5);
        assert_eq!(perm_width(52), 226);
    }

    proptest! {
        #[test]
        fn round_trip(mut keys in prop::collection::vec(any::<u32>(), 0..200)) {
            keys.sort_unstable();
            keys.dedup();
            let ids = keys.clone();
            // Shuffle deterministically by a derived key.
            let mut order = keys;
            order.sort_by_key(|x| x.wrapping_mul(2_654_435_761).rotate_left(7));
            let code = perm_rank(&order).unwrap();
            prop_assert!(code.rank < factorial(ids.len() as u64));
            prop_assert_eq!(perm_unrank(&code, &ids).unwrap(), order);
        }
    }
}
