use std::collections::HashMap;

use super::EvalError;

/// Fraction of positions where prediction equals truth.
pub fn accuracy(y_true: &[bool], y_pred: &[bool]) -> Result<f64, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// ROC AUC through the Mann–Whitney rank statistic with mid-ranks for ties.
pub fn roc_auc(y_true: &[bool], scores: &[f64]) -> Result<f64, EvalError> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch { left: y_true.len(), right: scores.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore);
    }
    let n_pos = y_true.iter().filter(|&&y| y).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the mean rank
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        let positives = order[i..=j].iter().filter(|&&k| y_true[k]).count();
        pos_rank_sum += mid_rank * positives as f64;
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Adjusted Rand index between two labelings. Noise (`-1`) is treated as an
/// ordinary label.
pub fn adjusted_rand_index(a: &[i32], b: &[i32]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let n = a.len() as f64;
    let comb2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: HashMap<(i32, i32), usize> = HashMap::new();
    let mut rows: HashMap<i32, usize> = HashMap::new();
    let mut cols: HashMap<i32, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| comb2(c as f64)).sum();
    let sum_a: f64 = rows.values().map(|&c| comb2(c as f64)).sum();
    let sum_b: f64 = cols.values().map(|&c| comb2(c as f64)).sum();
    let expected = sum_a * sum_b / comb2(n);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&x| x == 1).collect()
    }

    /// Exhaustive pairwise count: wins score 1, ties 1/2.
    fn brute_auc(y: &[bool], s: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] && !y[j] {
                    pairs += 1.0;
                    total += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
                }
            }
        }
        total / pairs
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&labels(&[1, 0, 1]), &labels(&[1, 0, 1])).unwrap(), 1.0);
        assert_eq!(accuracy(&labels(&[1, 0, 1, 0]), &labels(&[1, 1, 1, 0])).unwrap(), 0.75);
        let y: Vec<bool> = (0..100).map(|i| i < 65).collect();
        assert_eq!(accuracy(&y, &vec![true; 100]).unwrap(), 0.65);
        assert_eq!(accuracy(&[], &[]).unwrap_err(), EvalError::EmptyInput);
        assert!(matches!(accuracy(&[true], &[]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&labels(&[0, 0, 1, 1]), &[0.1, 0.2, 0.7, 0.9]).unwrap(), 1.0);
        assert_eq!(roc_auc(&labels(&[0, 0, 1, 1]), &[0.1, 0.4, 0.35, 0.8]).unwrap(), 0.75);
        assert_eq!(roc_auc(&labels(&[0, 1, 0, 1, 1]), &[0.3; 5]).unwrap(), 0.5);
        assert_eq!(roc_auc(&labels(&[1, 1]), &[0.3, 0.4]).unwrap_err(), EvalError::SingleClass);
        assert_eq!(roc_auc(&labels(&[1, 0]), &[f64::NAN, 0.4]).unwrap_err(), EvalError::NonFiniteScore);
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 7, 7]), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
    }

    fn instance() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
        (2usize..50).prop_flat_map(|n| {
            (
                proptest::collection::vec(any::<bool>(), n).prop_filter("both classes", |y| y.iter().any(|&b| b) && y.iter().any(|&b| !b)),
                proptest::collection::vec((0u8..8).prop_map(|v| v as f64 / 4.0), n),
            )
        })
    }

    proptest! {
        #[test]
        fn auc_equals_pairwise_count((y, s) in instance()) {
            prop_assert!((roc_auc(&y, &s).unwrap() - brute_auc(&y, &s)).abs() < 1e-12);
        }

        #[test]
        fn auc_invariant_under_monotone_transform((y, s) in instance()) {
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert_eq!(roc_auc(&y, &s).unwrap(), roc_auc(&y, &t).unwrap());
        }

        #[test]
        fn auc_of_negated_scores_complements(y in proptest::collection::vec(any::<bool>(), 2..40), seed in any::<u64>()) {
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            // distinct scores: a permutation of 0..n
            let mut s: Vec<f64> = (0..y.len()).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1_000_003) as f64 + i as f64 * 1e-3).collect();
            s.dedup();
            prop_assume!(s.len() == y.len());
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            prop_assert!((roc_auc(&y, &s).unwrap() + roc_auc(&y, &neg).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
