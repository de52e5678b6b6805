use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::train::seeded_rng;

/// Partition of `items` (frame, flow) pairs into batches, reshuffled per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchPlan {
    pub items: usize,
    pub batch_size: usize,
    pub shuffle: bool,
    pub seed: u64,
}

/// Shuffle streams start here so they never collide with init/dropout streams.
const SHUFFLE_STREAM_BASE: u64 = 1 << 32;

impl BatchPlan {
    pub fn new(items: usize, batch_size: usize, shuffle: bool, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if items == 0 {
            return Err(Error::Input("dataset has no (frame, flow) pairs".into()));
        }
        Ok(BatchPlan {
            items,
            batch_size,
            shuffle,
            seed,
        })
    }

    /// Item order for `epoch`; a pure function of `(seed, epoch)`.
    pub fn order(&self, epoch: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.items).collect();
        if self.shuffle {
            let mut rng = seeded_rng(self.seed, SHUFFLE_STREAM_BASE + epoch);
            order.shuffle(&mut rng);
        }
        order
    }

    /// Batches for `epoch`; the last one may be short.
    pub fn batches(&self, epoch: u64) -> Vec<Vec<usize>> {
        self.order(epoch).chunks(self.batch_size).map(<[usize]>::to_vec).collect()
    }
}
