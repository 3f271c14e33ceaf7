//! Adapts simulator datasets to the training loop.

use crate::error::Result;
use crate::scalar::Scalar;
use crate::simulator::{Dataset, Split};

use super::model::Sequence;
use super::train::SequenceSet;

/// One split of a [`Dataset`], rendering frames when a window is requested.
#[derive(Debug, Clone, Copy)]
pub struct DatasetSplit<'a> {
    pub dataset: &'a Dataset,
    pub split: Split,
}

impl<'a> DatasetSplit<'a> {
    pub fn new(dataset: &'a Dataset, split: Split) -> Self {
        DatasetSplit { dataset, split }
    }
}

impl<T: Scalar> SequenceSet<T> for DatasetSplit<'_> {
    fn len(&self) -> usize {
        self.dataset.windows(self.split).len()
    }

    fn get(&self, index: usize) -> Result<Sequence<T>> {
        let (frames, labels) = self.dataset.materialize(&self.dataset.windows(self.split)[index]);
        Ok(Sequence {
            inputs: frames
                .into_iter()
                .map(|f| f.data.into_iter().map(T::lit).collect())
                .collect(),
            targets: labels.into_iter().map(T::lit).collect(),
        })
    }
}
