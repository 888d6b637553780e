//! Clustering and recommendation quality metrics.
//!
//! Clustering metrics compare a predicted assignment against a reference
//! labeling: accuracy under the best label matching (computed with the
//! Hungarian algorithm on the contingency matrix), pairwise F1, and
//! normalized mutual information with sqrt normalization. Recommendation
//! quality is measured as precision/recall at k, macro-averaged over users.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("label vectors have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("label vectors are empty")]
    EmptyInput,
    #[error("no test user has a non-empty relevant set")]
    EmptyTestSet,
    #[error("k must be positive")]
    ZeroK,
}

fn contingency(pred: &[usize], truth: &[usize]) -> Result<Vec<Vec<u64>>, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let side = 1 + pred
        .iter()
        .chain(truth.iter())
        .copied()
        .max()
        .unwrap_or(0);
    let mut table = vec![vec![0u64; side]; side];
    for (&p, &t) in pred.iter().zip(truth.iter()) {
        table[p][t] += 1;
    }
    Ok(table)
}

/// Maximum-weight perfect matching on a square profit matrix, O(n^3).
///
/// Returns the total profit of the best assignment of rows to columns.
fn max_assignment(profit: &[Vec<u64>]) -> u64 {
    let n = profit.len();
    if n == 0 {
        return 0;
    }
    let inf = i64::MAX / 4;
    let top = profit.iter().flatten().copied().max().unwrap_or(0) as i64;
    // Minimize cost = top - profit; potentials formulation with a virtual row 0.
    let cost = |i: usize, j: usize| top - profit[i - 1][j - 1] as i64;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0u64;
    for j in 1..=n {
        if matched_row[j] != 0 {
            total += profit[matched_row[j] - 1][j - 1];
        }
    }
    total
}

/// Clustering accuracy: the fraction of items matched under the best
/// one-to-one relabeling of predicted clusters onto reference clusters.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let table = contingency(pred, truth)?;
    Ok(max_assignment(&table) as f64 / pred.len() as f64)
}

/// Pairwise F1: over all unordered item pairs, a true positive is a pair
/// co-clustered in both labelings. Returns 0 when precision and recall are
/// both undefined or zero.
pub fn pairwise_f1(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let table = contingency(pred, truth)?;
    let choose2 = |x: u64| x * x.saturating_sub(1) / 2;
    let mut tp = 0u64;
    let mut same_pred = 0u64;
    let mut same_truth = 0u64;
    for (p, row) in table.iter().enumerate() {
        let row_sum: u64 = row.iter().sum();
        same_pred += choose2(row_sum);
        let col_sum: u64 = table.iter().map(|r| r[p]).sum();
        same_truth += choose2(col_sum);
        for &cell in row {
            tp += choose2(cell);
        }
    }
    let fp = same_pred - tp;
    let fnn = same_truth - tp;
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fnn) as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Normalized mutual information with sqrt normalization
/// (MI / sqrt(H(pred) * H(truth)), natural logs). Returns 0 when either
/// labeling has zero entropy.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let table = contingency(pred, truth)?;
    let n = pred.len() as f64;
    let side = table.len();
    let row_sums: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..side).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let entropy = |sums: &[u64]| -> f64 {
        sums.iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_pred = entropy(&row_sums);
    let h_truth = entropy(&col_sums);
    if h_pred <= 0.0 || h_truth <= 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &cell) in row.iter().enumerate() {
            if cell > 0 {
                let p_joint = cell as f64 / n;
                let p_i = row_sums[i] as f64 / n;
                let p_j = col_sums[j] as f64 / n;
                mi += p_joint * (p_joint / (p_i * p_j)).ln();
            }
        }
    }
    // Clamp tiny negative MI from float roundoff.
    Ok((mi.max(0.0) / (h_pred * h_truth).sqrt()).min(1.0))
}

/// Precision and recall at `k`, macro-averaged over the users whose relevant
/// set is non-empty. Lists shorter than `k` are evaluated as-is; precision
/// keeps `k` in the denominator.
pub fn precision_recall_at_k(
    recommendations: &[Vec<u32>],
    relevant: &[BTreeSet<u32>],
    k: usize,
) -> Result<(f64, f64), MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    if recommendations.len() != relevant.len() {
        return Err(MetricsError::LengthMismatch {
            left: recommendations.len(),
            right: relevant.len(),
        });
    }
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut users = 0usize;
    for (recs, rel) in recommendations.iter().zip(relevant.iter()) {
        if rel.is_empty() {
            continue;
        }
        let hits = recs.iter().take(k).filter(|item| rel.contains(item)).count();
        precision_sum += hits as f64 / k as f64;
        recall_sum += hits as f64 / rel.len() as f64;
        users += 1;
    }
    if users == 0 {
        return Err(MetricsError::EmptyTestSet);
    }
    Ok((precision_sum / users as f64, recall_sum / users as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    // Brute-force matching oracle for the Hungarian routine.
    fn brute_force_assignment(profit: &[Vec<u64>]) -> u64 {
        fn recurse(profit: &[Vec<u64>], row: usize, used: &mut [bool]) -> u64 {
            if row == profit.len() {
                return 0;
            }
            let mut best = 0;
            for col in 0..profit.len() {
                if !used[col] {
                    used[col] = true;
                    best = best.max(profit[row][col] + recurse(profit, row + 1, used));
                    used[col] = false;
                }
            }
            best
        }
        let mut used = vec![false; profit.len()];
        recurse(profit, 0, &mut used)
    }

    #[test]
    fn hungarian_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6);
            let profit: Vec<Vec<u64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0..50)).collect())
                .collect();
            assert_eq!(max_assignment(&profit), brute_force_assignment(&profit));
        }
    }

    #[test]
    fn accuracy_identity_and_permutation() {
        let truth = [0, 0, 1, 1, 2, 2];
        assert_eq!(clustering_accuracy(&truth, &truth).unwrap(), 1.0);
        let relabeled = [2, 2, 0, 0, 1, 1];
        assert_eq!(clustering_accuracy(&relabeled, &truth).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_hand_case() {
        // Best mapping 0->1, 1->0 matches 3 of 4.
        let pred = [0, 0, 1, 1];
        let truth = [1, 1, 1, 0];
        assert_eq!(clustering_accuracy(&pred, &truth).unwrap(), 0.75);
    }

    #[test]
    fn f1_trivial_and_hand_cases() {
        let truth = [0, 0, 1, 1];
        assert_eq!(pairwise_f1(&truth, &truth).unwrap(), 1.0);
        // All singletons vs one cluster: TP = 0.
        assert_eq!(pairwise_f1(&[0, 1, 2, 3], &[0, 0, 0, 0]).unwrap(), 0.0);
        // TP=1, FP=1, FN=2 -> P=0.5, R=1/3, F1=0.4.
        let f1 = pairwise_f1(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap();
        assert!((f1 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn nmi_trivial_and_hand_cases() {
        let truth = [0, 0, 1, 1];
        assert!((nmi(&truth, &truth).unwrap() - 1.0).abs() < 1e-12);
        // Constant prediction has zero entropy.
        assert_eq!(nmi(&[0, 0, 0, 0], &truth).unwrap(), 0.0);
        // Uniform 2x2 contingency: MI = 0.
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn metrics_reject_mismatched_lengths() {
        assert!(matches!(
            clustering_accuracy(&[0, 1], &[0]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(
            pairwise_f1(&[0], &[0, 1]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(
            nmi(&[], &[]),
            Err(MetricsError::EmptyInput)
        ));
    }

    #[test]
    fn precision_recall_basics() {
        let rel: BTreeSet<u32> = [1, 2, 3, 4].into_iter().collect();
        // Top-5 contains 2 of 4 relevant.
        let recs = vec![vec![1, 9, 2, 8, 7]];
        let (p, r) = precision_recall_at_k(&recs, &[rel.clone()], 5).unwrap();
        assert!((p - 0.4).abs() < 1e-12);
        assert!((r - 0.5).abs() < 1e-12);
        // Exact match of size k.
        let recs = vec![vec![1, 2, 3, 4]];
        let (p, r) = precision_recall_at_k(&recs, &[rel.clone()], 4).unwrap();
        assert_eq!((p, r), (1.0, 1.0));
        // Disjoint.
        let recs = vec![vec![10, 11, 12, 13]];
        let (p, r) = precision_recall_at_k(&recs, &[rel], 4).unwrap();
        assert_eq!((p, r), (0.0, 0.0));
    }

    #[test]
    fn precision_recall_requires_relevant_users() {
        let recs = vec![vec![1, 2]];
        let empty: Vec<BTreeSet<u32>> = vec![BTreeSet::new()];
        assert!(matches!(
            precision_recall_at_k(&recs, &empty, 3),
            Err(MetricsError::EmptyTestSet)
        ));
    }
}
