//! ROC curves over run-level anomaly scores.

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RocError {
    #[error("ROC needs both benign and attacked runs")]
    OneClassOnly,
}

/// Run label for ROC bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunLabel {
    Benign,
    Attacked,
}

/// Threshold-sweep ROC over run-level scores (higher score = more anomalous).
/// Points are ordered from (0, 0) to (1, 1) as the threshold drops from above
/// the largest score to below the smallest.
pub fn roc_points(scores: &[f64], labels: &[RunLabel]) -> Result<Vec<(f64, f64)>, RocError> {
    assert_eq!(scores.len(), labels.len(), "scores and labels must pair up");
    let n_pos = labels.iter().filter(|l| **l == RunLabel::Attacked).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(RocError::OneClassOnly);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        // advance over the whole tie group before emitting a point
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            match labels[order[i]] {
                RunLabel::Attacked => tp += 1,
                RunLabel::Benign => fp += 1,
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    debug_assert_eq!(points.last(), Some(&(1.0, 1.0)));
    Ok(points)
}

/// Area under the ROC curve by trapezoid rule.
pub fn roc_auc(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// True-positive rate at exactly zero false positives.
pub fn tpr_at_zero_fpr(points: &[(f64, f64)]) -> f64 {
    points
        .iter()
        .filter(|(fpr, _)| *fpr == 0.0)
        .map(|(_, tpr)| *tpr)
        .fold(0.0, f64::max)
}
