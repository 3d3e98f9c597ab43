//! Rank primitives shared by every other module.
//!
//! Values are plain slices of a [`Scalar`]; every entry must be finite.
//! Ordering uses the IEEE total order, so `-0.0 < +0.0` is the only place
//! it differs from `<` on finite inputs.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A bijection on `0..n`, stored as the sorted-order index list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    /// Validates that `order` contains each of `0..order.len()` exactly once.
    pub fn try_from_vec(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::DegenerateInput(format!(
                    "index {i} repeated or out of range in permutation of length {}",
                    order.len()
                )));
            }
        }
        Ok(Self(order))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// `inverse()[order[k]] == k`: maps an element to its 0-based position.
    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (pos, &i) in self.0.iter().enumerate() {
            inv[i] = pos;
        }
        Self(inv)
    }
}

/// 1-based tied ranks. Entries are integers or half-integers and sum to
/// `n(n+1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector<T>(Vec<T>);

impl<T: Scalar> RankVector<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

pub(crate) fn check_finite<T: Scalar>(v: &[T]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::InvalidValue { index }),
        None => Ok(()),
    }
}

/// Indices that sort `v` ascending. Ties keep their original order.
pub fn argsort<T: Scalar>(v: &[T]) -> Result<Permutation> {
    check_finite(v)?;
    Ok(Permutation(argsort_unchecked(v)))
}

pub(crate) fn argsort_unchecked<T: Scalar>(v: &[T]) -> Vec<usize> {
    // Unstable sort on a total (value, index) key gives the stable result
    // without the merge buffer; keys sit next to their index for locality.
    let mut keyed: Vec<(T, usize)> = v.iter().copied().zip(0..).collect();
    keyed.sort_unstable_by(|a, b| a.0.total_order(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Averaged 1-based ranks: a run of equal values occupying sorted positions
/// `k+1..=m` all receive `(k+1+m)/2`.
pub fn tied_ranks<T: Scalar>(v: &[T]) -> Result<RankVector<T>> {
    check_finite(v)?;
    Ok(RankVector(tied_ranks_unchecked(v)))
}

pub(crate) fn tied_ranks_unchecked<T: Scalar>(v: &[T]) -> Vec<T> {
    let order = argsort_unchecked(v);
    let mut ranks = vec![T::zero(); v.len()];
    let two = T::one() + T::one();
    let mut start = 0;
    while start < order.len() {
        let head = v[order[start]];
        let mut end = start + 1;
        while end < order.len() && v[order[end]].total_order(&head) == Ordering::Equal {
            end += 1;
        }
        // positions start+1 ..= end (1-based)
        let rank = T::from_usize_lossy(start + 1 + end) / two;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Number of unordered pairs among `t` items.
fn pairs(t: u64) -> u64 {
    t * t.saturating_sub(1) / 2
}

/// Sum of `pairs(run)` over runs of equal adjacent values in a sorted slice.
fn tied_pairs_sorted<T: Scalar>(sorted: &[T]) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0].total_order(&w[1]) == Ordering::Equal {
            run += 1;
        } else {
            total += pairs(run);
            run = 1;
        }
    }
    if !sorted.is_empty() {
        total += pairs(run);
    }
    total
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count_inversions<T: Scalar>(v: &mut [T]) -> u64 {
    let n = v.len();
    let mut buf = v.to_vec();
    let mut swaps = 0u64;
    let mut width = 1;
    let mut src_is_v = true;
    while width < n {
        {
            let (src, dst): (&[T], &mut [T]) = if src_is_v {
                (&*v, &mut buf[..])
            } else {
                (&buf[..], &mut *v)
            };
            let mut lo = 0;
            while lo < n {
                let mid = (lo + width).min(n);
                let hi = (lo + 2 * width).min(n);
                let (mut i, mut j, mut k) = (lo, mid, lo);
                while i < mid && j < hi {
                    if src[j].total_order(&src[i]) == Ordering::Less {
                        dst[k] = src[j];
                        swaps += (mid - i) as u64;
                        j += 1;
                    } else {
                        dst[k] = src[i];
                        i += 1;
                    }
                    k += 1;
                }
                dst[k..k + (mid - i)].copy_from_slice(&src[i..mid]);
                k += mid - i;
                dst[k..k + (hi - j)].copy_from_slice(&src[j..hi]);
                lo = hi;
            }
        }
        src_is_v = !src_is_v;
        width *= 2;
    }
    if !src_is_v {
        v.copy_from_slice(&buf);
    }
    swaps
}

/// Pair counts behind tau-b. `discordant` counts pairs strictly ordered in
/// both inputs in opposite directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub total: u64,
    pub tied_a: u64,
    pub tied_b: u64,
    pub tied_both: u64,
    pub discordant: u64,
}

impl PairCounts {
    pub fn concordant(&self) -> u64 {
        self.total + self.tied_both - self.tied_a - self.tied_b - self.discordant
    }

    pub fn tau_b(&self) -> f64 {
        let num = self.concordant() as f64 - self.discordant as f64;
        let den = ((self.total - self.tied_a) as f64 * (self.total - self.tied_b) as f64).sqrt();
        num / den
    }
}

fn check_pair<T: Scalar>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "kendall tau inputs have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::DegenerateInput(
            "kendall tau needs at least 2 entries".into(),
        ));
    }
    check_finite(a)?;
    check_finite(b)?;
    for (name, v) in [("first", a), ("second", b)] {
        if v.iter().all(|x| x.total_order(&v[0]) == Ordering::Equal) {
            return Err(Error::DegenerateInput(format!(
                "{name} input has all entries tied"
            )));
        }
    }
    Ok(())
}

/// Exact pair counts in `O(n log n)` (Knight's merge-count).
pub fn pair_counts<T: Scalar>(a: &[T], b: &[T]) -> Result<PairCounts> {
    check_pair(a, b)?;
    let n = a.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&i, &j| a[i].total_order(&a[j]).then(b[i].total_order(&b[j])));

    let mut tied_a = 0;
    let mut tied_both = 0;
    let mut run_a = 1u64;
    let mut run_ab = 1u64;
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        if a[i].total_order(&a[j]) == Ordering::Equal {
            run_a += 1;
            if b[i].total_order(&b[j]) == Ordering::Equal {
                run_ab += 1;
            } else {
                tied_both += pairs(run_ab);
                run_ab = 1;
            }
        } else {
            tied_a += pairs(run_a);
            tied_both += pairs(run_ab);
            run_a = 1;
            run_ab = 1;
        }
    }
    tied_a += pairs(run_a);
    tied_both += pairs(run_ab);

    let mut b_sorted: Vec<T> = order.iter().map(|&i| b[i]).collect();
    let discordant = merge_count_inversions(&mut b_sorted);
    let tied_b = tied_pairs_sorted(&b_sorted);

    Ok(PairCounts {
        total: pairs(n as u64),
        tied_a,
        tied_b,
        tied_both,
        discordant,
    })
}

/// Tie-corrected Kendall tau-b, exact, in `O(n log n)`.
pub fn kendall_tau<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    Ok(T::from_f64_lossy(pair_counts(a, b)?.tau_b()))
}

/// Monte Carlo tau-a estimate from `num_pairs` index pairs drawn uniformly
/// with replacement (the two indices of a pair are always distinct). Tied
/// pairs score 0. Returns `(estimate, standard_error)`.
pub fn kendall_tau_sampled<T: Scalar>(
    a: &[T],
    b: &[T],
    num_pairs: usize,
    seed: u64,
) -> Result<(T, T)> {
    check_pair(a, b)?;
    if num_pairs == 0 {
        return Err(Error::DegenerateInput("num_pairs must be positive".into()));
    }
    let n = a.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sign = |o: Ordering| match o {
        Ordering::Less => -1i64,
        Ordering::Equal => 0,
        Ordering::Greater => 1,
    };
    let mut sum = 0i64;
    let mut sum_sq = 0i64;
    for _ in 0..num_pairs {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let s = sign(a[i].total_order(&a[j])) * sign(b[i].total_order(&b[j]));
        sum += s;
        sum_sq += s * s;
    }
    let m = num_pairs as f64;
    let mean = sum as f64 / m;
    let stderr = if num_pairs > 1 {
        let var = ((sum_sq as f64) - m * mean * mean) / (m - 1.0);
        (var.max(0.0) / m).sqrt()
    } else {
        0.0
    };
    Ok((T::from_f64_lossy(mean), T::from_f64_lossy(stderr)))
}
