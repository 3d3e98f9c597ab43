//! Slow reference implementations used as oracles by the integration tests.
#![allow(dead_code)]

use enhance_core::consensus::{Canvas, ConsensusState, ObservedImage};
use rand::seq::SliceRandom;
use rand::Rng;

/// Average rank by counting: `1 + #less + (#equal - 1) / 2`.
pub fn naive_tied_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Consensus update written straight from its definition with quadratic
/// loops and a selection sort.
pub fn naive_update(
    ranks: &[u64],
    votes: &[f64],
    values: &[f64],
    mask: &[bool],
    weights: Option<&[f64]>,
) -> (Vec<u64>, Vec<f64>) {
    let s: Vec<usize> = (0..ranks.len()).filter(|&p| mask[p]).collect();
    let data: Vec<f64> = s.iter().map(|&p| values[p]).collect();
    let rd = naive_tied_ranks(&data);
    let rc: Vec<f64> = s
        .iter()
        .map(|&p| 1.0 + s.iter().filter(|&&q| ranks[q] < ranks[p]).count() as f64)
        .collect();
    let w = |p: usize| weights.map_or(1.0, |w| w[p]);
    let score: Vec<f64> = s
        .iter()
        .enumerate()
        .map(|(k, &p)| (votes[p] * rc[k] + w(p) * rd[k]) / (votes[p] + w(p)))
        .collect();

    let mut held: Vec<u64> = s.iter().map(|&p| ranks[p]).collect();
    held.sort();
    let mut remaining: Vec<usize> = (0..s.len()).collect();
    let mut out_ranks = ranks.to_vec();
    let mut out_votes = votes.to_vec();
    for &rank in &held {
        let mut best = 0;
        for j in 1..remaining.len() {
            let (a, b) = (remaining[j], remaining[best]);
            if score[a] < score[b] || (score[a] == score[b] && rc[a] < rc[b]) {
                best = j;
            }
        }
        let k = remaining.remove(best);
        out_ranks[s[k]] = rank;
        out_votes[s[k]] += w(s[k]);
    }
    (out_ranks, out_votes)
}

/// Tau-b by enumerating every pair.
pub fn naive_tau_b(a: &[f64], b: &[f64]) -> f64 {
    let (mut num, mut na, mut nb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let sa = (a[i] - a[j]).signum() * f64::from(a[i] != a[j]);
            let sb = (b[i] - b[j]).signum() * f64::from(b[i] != b[j]);
            num += sa * sb;
            na += sa * sa;
            nb += sb * sb;
        }
    }
    num / (na * nb).sqrt()
}

pub fn is_permutation(ranks: &[u64]) -> bool {
    let mut seen = vec![false; ranks.len()];
    ranks.iter().all(|&r| {
        let i = r as usize;
        (1..=ranks.len()).contains(&i) && !std::mem::replace(&mut seen[i - 1], true)
    })
}

/// Random state with a random permutation and votes, some of them zero.
pub fn random_state<R: Rng>(rng: &mut R, canvas: Canvas) -> ConsensusState<f64> {
    let p = canvas.len();
    let mut ranks: Vec<u64> = (1..=p as u64).collect();
    ranks.shuffle(rng);
    let votes = (0..p)
        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..5.0) })
        .collect();
    ConsensusState::from_parts(canvas, ranks, votes).unwrap()
}

/// Random masked image with at least two masked pixels; values are drawn
/// from a small integer range when `ties` is set.
pub fn random_image<R: Rng>(rng: &mut R, canvas: Canvas, ties: bool) -> ObservedImage<f64> {
    let p = canvas.len();
    let values: Vec<f64> = (0..p)
        .map(|_| {
            if ties {
                rng.random_range(0..4) as f64
            } else {
                rng.random_range(-50.0..50.0)
            }
        })
        .collect();
    let frac = rng.random_range(0.2..=1.0);
    let mut mask: Vec<bool> = (0..p).map(|_| rng.random_bool(frac)).collect();
    let mut idx: Vec<usize> = (0..p).collect();
    idx.shuffle(rng);
    mask[idx[0]] = true;
    mask[idx[1]] = true;
    ObservedImage::new(canvas, values, mask).unwrap()
}
