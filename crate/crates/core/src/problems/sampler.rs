use rand::seq::SliceRandom;
use rand::Rng;

use super::{invalid, Batch, ProblemError};

/// Epoch-based minibatch sampler.
///
/// Each epoch shuffles `0..count` and cuts it into consecutive,
/// non-overlapping batches of exactly `batch_size`; a trailing short batch is
/// dropped so every step averages over the same number of examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinibatchSampler {
    count: usize,
    batch_size: usize,
}

impl MinibatchSampler {
    pub fn new(count: usize, batch_size: usize) -> Result<Self, ProblemError> {
        if batch_size == 0 || batch_size > count {
            return Err(invalid(
                "batch size",
                format!("{batch_size} is outside 1..={count}"),
            ));
        }
        Ok(Self { count, batch_size })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.count / self.batch_size
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// The batches of one epoch, drawing the shuffle from `rng`.
    pub fn epoch<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Batch> {
        let mut order: Vec<usize> = (0..self.count).collect();
        order.shuffle(rng);
        order
            .chunks_exact(self.batch_size)
            .map(|chunk| Batch::new(chunk.to_vec()))
            .collect()
    }
}
