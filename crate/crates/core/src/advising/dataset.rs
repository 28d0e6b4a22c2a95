use crate::env::Observation;

/// A demonstration sample: the teacher advised `action` in `state`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvicePair {
    pub state: Observation,
    pub action: usize,
}

/// Append-only list of collected advice, `D`.
#[derive(Debug, Clone, Default)]
pub struct AdviceDataset {
    pairs: Vec<AdvicePair>,
}

impl AdviceDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, pair: AdvicePair) {
        self.pairs.push(pair);
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[AdvicePair] {
        &self.pairs
    }
}

impl FromIterator<AdvicePair> for AdviceDataset {
    fn from_iter<I: IntoIterator<Item = AdvicePair>>(iter: I) -> Self {
        Self {
            pairs: iter.into_iter().collect(),
        }
    }
}
