use serde::{Deserialize, Serialize};

use super::{KnnParams, Matrix, TrainingSet};
use crate::synth::EventClass;

/// Lazy learner: keeps the normalized training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Matrix,
    pub y: Vec<usize>,
}

pub fn train_knn(set: &TrainingSet, p: &KnnParams) -> KnnModel {
    KnnModel {
        k: p.k,
        x: set.x.clone(),
        y: set.y.clone(),
    }
}

impl KnnModel {
    /// Majority vote of the `k` nearest rows by Euclidean distance. Distance
    /// ties go to the earlier training row, vote ties to the lower class code.
    pub fn predict(&self, z: &[f64]) -> usize {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .iter_rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(dist.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let mut votes = [0usize; EventClass::COUNT];
        for &(_, i) in &dist[..k] {
            votes[self.y[i]] += 1;
        }
        let mut best = 0;
        for c in 1..votes.len() {
            if votes[c] > votes[best] {
                best = c;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> TrainingSet {
        let rows = [[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0], [5.0, 5.2]];
        TrainingSet::new(Matrix::from_rows(&rows), vec![3, 3, 7, 7, 7]).unwrap()
    }

    #[test]
    fn one_nn_returns_training_label() {
        let m = train_knn(&set(), &KnnParams { k: 1 });
        assert_eq!(m.x, set().x);
        for (i, r) in set().x.iter_rows().enumerate() {
            assert_eq!(m.predict(r), set().y[i]);
        }
    }

    #[test]
    fn majority_and_ties() {
        let m = train_knn(&set(), &KnnParams { k: 3 });
        assert_eq!(m.predict(&[0.0, 0.1]), 3);
        let m = train_knn(&set(), &KnnParams { k: 4 });
        // Two votes each: the lower code wins.
        assert_eq!(m.predict(&[2.5, 2.5]), 3);
        let m = train_knn(&set(), &KnnParams { k: 50 });
        assert_eq!(m.predict(&[0.0, 0.0]), 7);
    }
}
