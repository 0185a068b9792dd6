//! Cycling over a randomly permuted training set, with observable epoch
//! boundaries.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::float::Float;

/// Cycles over `0..n` in a fresh uniform permutation each epoch.
pub struct IndexCycle {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl IndexCycle {
    pub fn new(n: usize, rng_seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySource);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Ok(IndexCycle {
            order,
            cursor: 0,
            rng,
        })
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// Next index, plus whether this draw completed an epoch.
    pub fn next_index(&mut self) -> (usize, bool) {
        let idx = self.order[self.cursor];
        self.cursor += 1;
        let crossed = self.cursor == self.order.len();
        if crossed {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        (idx, crossed)
    }
}

/// Yields the columns of a data matrix in a fresh uniform permutation each
/// epoch.
pub struct PermutedCycle<'a, F> {
    data: ArrayView2<'a, F>,
    cycle: IndexCycle,
}

impl<'a, F: Float> PermutedCycle<'a, F> {
    pub fn new(data: ArrayView2<'a, F>, rng_seed: u64) -> Result<Self> {
        let cycle = IndexCycle::new(data.ncols(), rng_seed)?;
        Ok(PermutedCycle { data, cycle })
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    /// Mini-batches per epoch at a given batch size.
    pub fn steps_per_epoch(&self, batch: usize) -> usize {
        self.n().div_ceil(batch)
    }

    /// Draws the next `count` samples as columns; the flag reports whether
    /// an epoch boundary was crossed while filling the batch.
    pub fn next_batch(&mut self, count: usize) -> (Array2<F>, bool) {
        let mut out = Array2::zeros((self.data.nrows(), count));
        let mut crossed = false;
        for i in 0..count {
            let (idx, c) = self.cycle.next_index();
            out.column_mut(i).assign(&self.data.column(idx));
            crossed |= c;
        }
        (out, crossed)
    }
}
