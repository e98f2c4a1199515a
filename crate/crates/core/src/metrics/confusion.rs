use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// `counts[i][j]`: samples of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
    names: Vec<String>,
}

impl ConfusionMatrix {
    /// Matrix from row-major counts; class names default to `class_<i>`.
    pub fn from_counts(n_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if n_classes == 0 || counts.len() != n_classes * n_classes {
            return Err(Error::Shape(format!(
                "{} counts do not form a {n_classes}x{n_classes} matrix",
                counts.len()
            )));
        }
        let names = (0..n_classes).map(|i| format!("class_{i}")).collect();
        Ok(ConfusionMatrix { n_classes, counts, names })
    }

    pub fn with_names(mut self, names: &[String]) -> Result<Self> {
        if names.len() != self.n_classes {
            return Err(Error::Shape(format!("{} names for {} classes", names.len(), self.n_classes)));
        }
        self.names = names.to_vec();
        Ok(self)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n_classes + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, i)).sum()
    }

    /// Samples whose true class is `i` (the class support).
    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i * self.n_classes..(i + 1) * self.n_classes].iter().sum()
    }

    /// Samples predicted as `j`.
    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, j)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n_classes).all(|i| (0..self.n_classes).all(|j| i == j || self.get(i, j) == 0))
    }

    pub fn binary_counts(&self, class: usize) -> Result<BinaryCounts> {
        if class >= self.n_classes {
            return Err(Error::Key(format!("class id {class} outside 0..{}", self.n_classes)));
        }
        let tp = self.get(class, class);
        let fp = self.col_sum(class) - tp;
        let fn_ = self.row_sum(class) - tp;
        Ok(BinaryCounts { tp, fp, fn_, tn: self.total() - tp - fp - fn_ })
    }

    /// Same matrix with classes relabelled: class `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let c = self.n_classes;
        let mut seen = vec![false; c];
        if perm.len() != c || perm.iter().any(|&p| p >= c || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Config(format!("{perm:?} is not a permutation of 0..{c}")));
        }
        let mut counts = vec![0; c * c];
        let mut names = vec![String::new(); c];
        for i in 0..c {
            names[perm[i]] = self.names[i].clone();
            for j in 0..c {
                counts[perm[i] * c + perm[j]] = self.get(i, j);
            }
        }
        Ok(ConfusionMatrix { n_classes: c, counts, names })
    }
}

/// Count `(truth, prediction)` pairs into a `n_classes`-square matrix.
pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension { op: "confusion", lhs: vec![y_true.len()], rhs: vec![y_pred.len()] });
    }
    let mut cm = ConfusionMatrix::from_counts(n_classes, vec![0; n_classes * n_classes])?;
    for (row, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        for label in [t, p] {
            if label >= n_classes {
                return Err(Error::Label { row, label, n_classes });
            }
        }
        cm.counts[t * n_classes + p] += 1;
    }
    Ok(cm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_labels_give_diagonal() {
        let y = [0, 1, 2, 2, 1];
        let cm = confusion(&y, &y, 3).unwrap();
        assert!(cm.is_diagonal());
        assert_eq!(cm.trace(), 5);
    }

    #[test]
    fn swapped_pair_is_antidiagonal() {
        let cm = confusion(&[0, 1], &[1, 0], 2).unwrap();
        assert_eq!(cm.counts(), &[0, 1, 1, 0]);
    }

    #[test]
    fn out_of_range_label_rejected() {
        assert!(matches!(confusion(&[0, 3], &[0, 0], 3), Err(Error::Label { row: 1, label: 3, .. })));
    }

    #[test]
    fn binary_counts_partition_total() {
        let cm = confusion(&[0, 0, 1, 2, 2, 2], &[0, 1, 1, 2, 0, 2], 3).unwrap();
        for c in 0..3 {
            assert_eq!(cm.binary_counts(c).unwrap().total(), 6);
        }
        assert_eq!(cm.binary_counts(0).unwrap(), BinaryCounts { tp: 1, fp: 1, fn_: 1, tn: 3 });
    }
}
