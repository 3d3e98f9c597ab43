use super::{ConsensusState, ObservedImage};
use crate::error::{Error, Result};
use crate::rankcore::{check_finite, tied_ranks_unchecked};
use crate::scalar::Scalar;

impl<T: Scalar> ConsensusState<T> {
    /// Folds one observation into the consensus.
    ///
    /// Inside the mask both the data and the current consensus are re-ranked
    /// `1..=n`. Each pixel scores `(v*rc + w*rd) / (v + w)`; the rank values
    /// the masked pixels already held are handed back out in score order,
    /// ties going to the lower current rank. Votes grow by `w`. Pixels
    /// outside the mask are untouched.
    pub fn update(&mut self, image: &ObservedImage<T>) -> Result<()> {
        self.canvas.check_same(&image.canvas)?;
        let idx = image.masked_indices();
        let n = idx.len();
        if n < 2 {
            return Err(Error::DegenerateMask {
                masked: n,
                required: 2,
            });
        }
        let values: Vec<T> = idx.iter().map(|&p| image.values[p]).collect();
        check_finite(&values).map_err(|e| match e {
            Error::InvalidValue { index } => Error::InvalidValue { index: idx[index] },
            e => e,
        })?;
        let data_ranks = tied_ranks_unchecked(&values);

        // Local positions ordered by current consensus rank, paired with the
        // rank values the mask owns.
        let by_rank = self.order_by_rank(&idx);
        let mut local_rank = vec![0u32; n];
        for (pos, &(_, k)) in by_rank.iter().enumerate() {
            local_rank[k as usize] = pos as u32 + 1;
        }

        let mut scored: Vec<(T, u32, u32)> = (0..n)
            .map(|k| {
                let p = idx[k];
                let v = self.votes[p];
                let w = image.weight(p);
                let score = (v * T::from_usize_lossy(local_rank[k] as usize) + w * data_ranks[k])
                    / (v + w);
                (score, local_rank[k], k as u32)
            })
            .collect();
        scored.sort_unstable_by(|a, b| a.0.total_order(&b.0).then(a.1.cmp(&b.1)));

        // the j-th lowest score takes the j-th lowest held rank
        let mut new_rank = vec![0u64; n];
        for (&(_, _, k), &(rank, _)) in scored.iter().zip(&by_rank) {
            new_rank[k as usize] = rank;
        }
        for (&p, rank) in idx.iter().zip(new_rank) {
            self.ranks[p] = rank;
            self.votes[p] += image.weight(p);
        }
        Ok(())
    }

    /// `(rank, local position)` for the masked pixels, ascending by rank.
    /// Ranks are a permutation of `1..=P`, so a dense mask is bucketed
    /// directly instead of sorted.
    fn order_by_rank(&self, idx: &[usize]) -> Vec<(u64, u32)> {
        let total = self.ranks.len();
        if idx.len() < total / 8 {
            let mut v: Vec<(u64, u32)> = idx
                .iter()
                .enumerate()
                .map(|(k, &p)| (self.ranks[p], k as u32))
                .collect();
            v.sort_unstable();
            return v;
        }
        let mut slot = vec![u32::MAX; total];
        for (k, &p) in idx.iter().enumerate() {
            slot[self.ranks[p] as usize - 1] = k as u32;
        }
        slot.iter()
            .enumerate()
            .filter(|&(_, &k)| k != u32::MAX)
            .map(|(r, &k)| (r as u64 + 1, k))
            .collect()
    }

    /// Combines two states built on the same canvas, e.g. a mini-batch
    /// consensus into the main one. Scores are the vote-weighted mean rank
    /// (plain mean where both votes are zero); ties go to the lower pixel
    /// index. Votes add.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        self.canvas.check_same(&other.canvas)?;
        let two = T::one() + T::one();
        let scores: Vec<T> = (0..self.canvas.len())
            .map(|p| {
                let (va, vb) = (self.votes[p], other.votes[p]);
                let ra = T::from_u64(self.ranks[p]).unwrap_or_else(T::infinity);
                let rb = T::from_u64(other.ranks[p]).unwrap_or_else(T::infinity);
                if va + vb == T::zero() {
                    (ra + rb) / two
                } else {
                    (va * ra + vb * rb) / (va + vb)
                }
            })
            .collect();
        let order = crate::rankcore::argsort_unchecked(&scores);
        let mut ranks = vec![0u64; scores.len()];
        for (pos, &p) in order.iter().enumerate() {
            ranks[p] = pos as u64 + 1;
        }
        let votes = self
            .votes
            .iter()
            .zip(&other.votes)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            canvas: self.canvas,
            ranks,
            votes,
        })
    }
}
