//! Binomial coefficients and colexicographic subset ranking.
//!
//! A `k`-subset of an `m`-set is identified with the sorted positions
//! `c_1 < … < c_k` of its members inside the sorted universe, and ranked by
//! the combinatorial number system `Σ_i C(c_i, i)`. Rank 0 is the first `k`
//! positions.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::bits::{BitReader, BitStream};
use super::CodecError;
use crate::numerics::ceil_log2_big;

/// Exact `C(n, k)`.
pub fn binomial(n: u64, k: u64) -> Result<BigUint, CodecError> {
    if k > n {
        return Err(CodecError::Domain(format!("C({n}, {k}) needs k ≤ n")));
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for t in 1..=k {
        acc *= n - k + t;
        acc /= t;
    }
    Ok(acc)
}

/// `⌈log2 C(n, k)⌉`, the field width of a subset rank.
pub fn binomial_width(n: u64, k: u64) -> Result<u64, CodecError> {
    Ok(ceil_log2_big(&binomial(n, k)?))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetCode {
    pub rank: BigUint,
    /// `|B|`
    pub universe: usize,
    /// `|A|`
    pub size: usize,
}

impl SubsetCode {
    pub fn count(&self) -> BigUint {
        binomial(self.universe as u64, self.size as u64).expect("size ≤ universe")
    }

    pub fn width(&self) -> u64 {
        ceil_log2_big(&self.count())
    }

    pub fn write(&self, out: &mut BitStream) -> Result<u64, CodecError> {
        let w = self.width();
        out.write_big(&self.rank, w)?;
        Ok(w)
    }

    pub fn read(r: &mut BitReader<'_>, universe: usize, size: usize) -> Result<Self, CodecError> {
        let count = binomial(universe as u64, size as u64)?;
        let rank = r.read_big(ceil_log2_big(&count))?;
        if rank >= count {
            return Err(CodecError::RankOutOfRange {
                what: "subset",
                at: r.position(),
            });
        }
        Ok(SubsetCode {
            rank,
            universe,
            size,
        })
    }
}

pub(crate) fn check_sorted(ids: &[u32], what: &'static str) -> Result<(), CodecError> {
    if ids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CodecError::NotSorted(what));
    }
    Ok(())
}

/// Positions of the members of `a` inside `b`. Both must be strictly
/// increasing.
fn positions(a: &[u32], b: &[u32]) -> Result<Vec<u64>, CodecError> {
    check_sorted(a, "subset")?;
    check_sorted(b, "universe")?;
    let mut out = Vec::with_capacity(a.len());
    let mut bi = 0usize;
    for &x in a {
        while bi < b.len() && b[bi] < x {
            bi += 1;
        }
        if bi == b.len() || b[bi] != x {
            return Err(CodecError::NotSubset { id: x });
        }
        out.push(bi as u64);
        bi += 1;
    }
    Ok(out)
}

/// Colex rank of the sorted position list.
pub fn rank_positions(pos: &[u64]) -> BigUint {
    let mut rank = BigUint::zero();
    // `val` tracks C(c, i) as c and i advance together.
    let mut val = BigUint::zero();
    let mut c = 0u64;
    for (idx, &target) in pos.iter().enumerate() {
        let i = idx as u64 + 1;
        if idx == 0 {
            c = target;
            val = BigUint::from(target); // C(c, 1)
        } else {
            // C(c, i-1) -> C(c+1, i)
            val = if c + 1 < i {
                BigUint::zero()
            } else if c + 1 == i {
                BigUint::one()
            } else {
                val * (c + 1) / i
            };
            c += 1;
            while c < target {
                // C(c, i) -> C(c+1, i)
                val = if c + 1 < i {
                    BigUint::zero()
                } else if c + 1 == i {
                    BigUint::one()
                } else {
                    val * (c + 1) / (c + 1 - i)
                };
                c += 1;
            }
        }
        rank += &val;
    }
    rank
}

/// Inverse of [`rank_positions`] for `k`-subsets of `m` positions.
pub fn unrank_positions(rank: &BigUint, m: u64, k: u64) -> Result<Vec<u64>, CodecError> {
    let count = binomial(m, k)?;
    if rank >= &count {
        return Err(CodecError::RankOutOfRange {
            what: "subset",
            at: 0,
        });
    }
    let mut out = vec![0u64; k as usize];
    let mut r = rank.clone();
    let mut upper = m; // exclusive bound on the next position
    let mut carry: Option<BigUint> = None; // C(upper-1, i) when known
    for i in (1..=k).rev() {
        let mut c = upper - 1;
        let mut val = match carry.take() {
            Some(v) => v,
            None if i > c => BigUint::zero(),
            None => binomial(c, i)?,
        };
        while val > r {
            // val = C(c, i) > 0 so c ≥ i ≥ 1.
            val = val * (c - i) / c;
            c -= 1;
        }
        r -= &val;
        out[(i - 1) as usize] = c;
        // C(c, i) -> C(c-1, i-1)
        if i > 1 {
            carry = Some(if c == 0 { BigUint::zero() } else { val * i / c });
        }
        upper = c;
    }
    Ok(out)
}

/// Rank the sorted id list `a` as a subset of the sorted id list `b`.
pub fn subset_rank(a: &[u32], b: &[u32]) -> Result<SubsetCode, CodecError> {
    let pos = positions(a, b)?;
    Ok(SubsetCode {
        rank: rank_positions(&pos),
        universe: b.len(),
        size: a.len(),
    })
}

/// Recover the sorted id list from its rank within `b`.
pub fn subset_unrank(code: &SubsetCode, b: &[u32]) -> Result<Vec<u32>, CodecError> {
    check_sorted(b, "universe")?;
    if code.universe != b.len() {
        return Err(CodecError::InconsistentSizes(format!(
            "code universe {} but {} ids supplied",
            code.universe,
            b.len()
        )));
    }
    if code.size > code.universe {
        return Err(CodecError::InconsistentSizes(format!(
            "subset size {} exceeds universe {}",
            code.size, code.universe
        )));
    }
    let pos = unrank_positions(&code.rank, b.len() as u64, code.size as u64)?;
    Ok(pos.into_iter().map(|p| b[p as usize]).collect())
}
