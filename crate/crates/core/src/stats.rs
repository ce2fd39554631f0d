//! Small robust statistics shared by the estimators and the evaluation code.

use serde::{Deserialize, Serialize};

/// Lower weighted median: the smallest value whose cumulative weight reaches
/// half of the total. Returns `None` for empty input or non-positive total
/// weight.
pub fn weighted_median(values: &[(f64, f64)]) -> Option<f64> {
    let total: f64 = values.iter().map(|&(_, w)| w).sum();
    if values.is_empty() || !(total > 0.0) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * total;
    let mut acc = 0.0;
    for &(v, w) in &sorted {
        acc += w;
        if acc >= half {
            return Some(v);
        }
    }
    sorted.last().map(|&(v, _)| v)
}

/// Mean, population standard deviation and lower median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub count: usize,
}

pub fn summarize(samples: &[f64]) -> Option<Summary> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Summary {
        mean,
        std: var.sqrt(),
        median: sorted[(sorted.len() - 1) / 2],
        count: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn weighted_median_examples() {
        assert_eq!(weighted_median(&[]), None);
        assert_eq!(weighted_median(&[(3.0, 1.0)]), Some(3.0));
        assert_eq!(weighted_median(&[(1.6, 1.0), (1.6, 1.0), (40.0, 1.0)]), Some(1.6));
        assert_eq!(weighted_median(&[(1.0, 1.0), (2.0, 1.0)]), Some(1.0));
        assert_eq!(weighted_median(&[(1.0, 1.0), (2.0, 5.0)]), Some(2.0));
        assert_eq!(weighted_median(&[(1.0, 0.0)]), None);
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(s.mean, 2.0);
        assert_relative_eq!(s.std, 0.816496580927726, max_relative = 1e-12);
        assert_relative_eq!(s.median, 2.0);

        let s = summarize(&[4.5]).unwrap();
        assert_eq!((s.mean, s.std, s.median), (4.5, 0.0, 4.5));

        assert_eq!(summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap().median, 2.0);
        assert!(summarize(&[]).is_none());
    }

    proptest! {
        #[test]
        fn summary_permutation_invariant(mut xs in prop::collection::vec(-10.0f64..10.0, 1..40)) {
            let a = summarize(&xs).unwrap();
            xs.reverse();
            let b = summarize(&xs).unwrap();
            prop_assert_eq!(a.median, b.median);
            prop_assert!((a.mean - b.mean).abs() < 1e-12);
            prop_assert!((a.std - b.std).abs() < 1e-12);
        }
    }
}
