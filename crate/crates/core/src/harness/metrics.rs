use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Rows are true occupants, columns predicted occupants. Episodes whose
/// occupant was not matched to any known profile land in `unmatched`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub unmatched: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
            unmatched: vec![0; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let n = counts.len();
        Self {
            counts,
            unmatched: vec![0; n],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, truth: usize, predicted: Option<usize>) {
        match predicted {
            Some(p) => self.counts[truth][p] += 1,
            None => self.unmatched[truth] += 1,
        }
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.counts[row].iter().sum::<u64>() + self.unmatched[row]
    }

    pub fn total(&self) -> u64 {
        (0..self.classes()).map(|r| self.row_total(r)).sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (r, row) in other.counts.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                self.counts[r][c] += v;
            }
            self.unmatched[r] += other.unmatched[r];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: Vec<f64>,
    pub f1: Vec<f64>,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
}

/// Per-class accuracy (recall) and one-vs-rest F1.
pub fn score(matrix: &ConfusionMatrix) -> Result<Scores> {
    let n = matrix.classes();
    if n == 0 {
        return Err(Error::Config("empty confusion matrix".into()));
    }
    if matrix.counts.iter().any(|r| r.len() != n) || matrix.unmatched.len() != n {
        return Err(Error::Config("confusion matrix must be square".into()));
    }
    let mut accuracy = Vec::with_capacity(n);
    let mut f1 = Vec::with_capacity(n);
    for i in 0..n {
        let row = matrix.row_total(i);
        if row == 0 {
            return Err(Error::Config(format!("confusion matrix row {i} is empty")));
        }
        let tp = matrix.counts[i][i] as f64;
        let recall = tp / row as f64;
        let col: u64 = (0..n).map(|r| matrix.counts[r][i]).sum();
        let precision = if col == 0 { 0.0 } else { tp / col as f64 };
        accuracy.push(recall);
        f1.push(if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        });
    }
    let mean_accuracy = accuracy.iter().sum::<f64>() / n as f64;
    let mean_f1 = f1.iter().sum::<f64>() / n as f64;
    Ok(Scores {
        accuracy,
        f1,
        mean_accuracy,
        mean_f1,
    })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    if n == 0 {
        return MeanStd {
            mean: f64::NAN,
            std: f64::NAN,
            n,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std, n }
}

/// One-sided paired t-test of `mean(a - b) < 0`. Returns (t, p).
pub fn paired_t_less(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::Config("paired test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let MeanStd { mean, std, n } = mean_std(&diffs);
    if std == 0.0 {
        let p = if mean < 0.0 { 0.0 } else { 1.0 };
        return Ok((if mean < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY }, p));
    }
    let t = mean / (std / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::Config(format!("t distribution: {e}")))?;
    Ok((t, dist.cdf(t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_diagonal() {
        let m = ConfusionMatrix::from_counts(vec![vec![5, 0, 0], vec![0, 4, 0], vec![0, 0, 7]]);
        let s = score(&m).unwrap();
        assert_eq!(s.accuracy, vec![1.0; 3]);
        assert_eq!(s.f1, vec![1.0; 3]);
    }

    #[test]
    fn two_class_arithmetic() {
        let m = ConfusionMatrix::from_counts(vec![vec![9, 1], vec![2, 8]]);
        let s = score(&m).unwrap();
        assert!((s.accuracy[0] - 0.9).abs() < 1e-15);
        let (p, r) = (9.0 / 11.0, 9.0 / 10.0);
        assert!((s.f1[0] - 2.0 * p * r / (p + r)).abs() < 1e-15);
    }

    #[test]
    fn uniform_five_class_is_chance() {
        let m = ConfusionMatrix::from_counts(vec![vec![10; 5]; 5]);
        let s = score(&m).unwrap();
        assert!((s.mean_accuracy - 0.2).abs() < 1e-15);
    }

    #[test]
    fn unmatched_counts_against_recall() {
        let mut m = ConfusionMatrix::new(2);
        m.record(0, Some(0));
        m.record(0, None);
        m.record(1, Some(1));
        let s = score(&m).unwrap();
        assert_eq!(s.accuracy, vec![0.5, 1.0]);
        assert_eq!(m.row_total(0), 2);
    }

    #[test]
    fn empty_row_rejected() {
        let m = ConfusionMatrix::from_counts(vec![vec![1, 0], vec![0, 0]]);
        assert!(score(&m).is_err());
        assert!(score(&ConfusionMatrix::new(0)).is_err());
    }

    #[test]
    fn paired_test_detects_shift() {
        let a: Vec<f64> = (0..30).map(|i| 5.0 + (i % 3) as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| 7.0 + (i % 4) as f64).collect();
        let (t, p) = paired_t_less(&a, &b).unwrap();
        assert!(t < 0.0 && p < 1e-6);
        let (_, p) = paired_t_less(&b, &a).unwrap();
        assert!(p > 0.99);
    }

    #[test]
    fn mean_std_basic() {
        let m = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
    }
}
