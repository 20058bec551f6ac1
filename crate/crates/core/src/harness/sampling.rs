use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Ordered `(x1, x2)` index pairs into a dataset, labels always distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSample {
    pub pairs: Vec<(usize, usize)>,
    /// Set when `count` exceeded the number of distinct cross-class pairs.
    pub with_replacement: bool,
}

// Enumerates ordered cross-class pairs without materializing them: pair t
// belongs to the first x1 whose cumulative partner count exceeds t, and its
// x2 is found by walking the other classes in label order.
struct CrossPairs {
    by_class: Vec<Vec<usize>>,
    labels: Vec<usize>,
    cumulative: Vec<usize>,
}

impl CrossPairs {
    fn new(ds: &LabeledDataset) -> Self {
        let mut by_class = vec![Vec::new(); ds.num_classes()];
        let labels: Vec<usize> = ds.items().iter().map(|it| it.label).collect();
        for (i, &l) in labels.iter().enumerate() {
            by_class[l].push(i);
        }
        let mut cumulative = Vec::with_capacity(labels.len());
        let mut total = 0;
        for &l in &labels {
            total += labels.len() - by_class[l].len();
            cumulative.push(total);
        }
        Self {
            by_class,
            labels,
            cumulative,
        }
    }

    fn total(&self) -> usize {
        self.cumulative.last().copied().unwrap_or(0)
    }

    fn pair(&self, t: usize) -> (usize, usize) {
        let i = self.cumulative.partition_point(|&c| c <= t);
        let mut r = t - if i == 0 { 0 } else { self.cumulative[i - 1] };
        for (class, members) in self.by_class.iter().enumerate() {
            if class == self.labels[i] {
                continue;
            }
            if r < members.len() {
                return (i, members[r]);
            }
            r -= members.len();
        }
        unreachable!("pair index {t} out of range")
    }
}

/// Draws `count` pairs uniformly from the ordered cross-class pairs of `dataset`.
///
/// Sampling is without replacement when `count` does not exceed the number
/// of such pairs, and with replacement otherwise.
pub fn sample_pairs(dataset: &LabeledDataset, count: usize, seed: u64) -> Result<PairSample> {
    if count == 0 {
        return Err(Error::Config("pair count must be at least 1".into()));
    }
    let cross = CrossPairs::new(dataset);
    let total = cross.total();
    if total == 0 {
        return Err(Error::Dataset(
            "all images share one class; pairs must come from different classes".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_replacement = count > total;
    let pairs = if with_replacement {
        (0..count).map(|_| cross.pair(rng.gen_range(0..total))).collect()
    } else {
        index::sample(&mut rng, total, count)
            .into_iter()
            .map(|t| cross.pair(t))
            .collect()
    };
    Ok(PairSample {
        pairs,
        with_replacement,
    })
}
