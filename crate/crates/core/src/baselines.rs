//! Classical clustering baselines: Lloyd's k-means with k-means++ seeding,
//! truncated-SVD spectral embedding followed by k-means, and single-view
//! NMF with argmax assignment.

use alloc::vec;
use alloc::vec::Vec;
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::nmf::{nmf_factorize, MultiViewConfig, NmfError, ViewMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BaselineError {
    #[error("k must be in 1..=m (k={k}, m={m})")]
    InvalidK { k: usize, m: usize },
    #[error("input matrix is empty")]
    EmptyInput,
    #[error("non-finite entry in input")]
    NonFinite,
    #[error(transparent)]
    Nmf(#[from] NmfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    KMeans,
    Svd,
    Nmf,
}

fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

fn validate(data: &ArrayView2<f64>, k: usize) -> Result<(), BaselineError> {
    if data.nrows() == 0 || data.ncols() == 0 {
        return Err(BaselineError::EmptyInput);
    }
    if k == 0 || k > data.nrows() {
        return Err(BaselineError::InvalidK {
            k,
            m: data.nrows(),
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(BaselineError::NonFinite);
    }
    Ok(())
}

/// Lloyd's algorithm with k-means++ seeding. An emptied cluster is reseeded
/// with the point farthest from its assigned centroid.
pub fn kmeans(
    data: ArrayView2<f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<Vec<usize>, BaselineError> {
    validate(&data, k)?;
    let m = data.nrows();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    // k-means++ seeding.
    let mut centroids = Array2::zeros((k, data.ncols()));
    let first = rng.gen_range(0..m);
    centroids.row_mut(0).assign(&data.row(first));
    let mut min_dist: Vec<f64> = (0..m)
        .map(|i| squared_distance(data.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = min_dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = m - 1;
            for (i, &d) in min_dist.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..m)
        };
        centroids.row_mut(c).assign(&data.row(next));
        for i in 0..m {
            let d = squared_distance(data.row(i), centroids.row(c));
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }

    let mut assignment = vec![0usize; m];
    for _ in 0..max_iter {
        // Assign to the nearest centroid, ties to the lowest index.
        let mut changed = false;
        for i in 0..m {
            let mut best = 0usize;
            let mut best_dist = squared_distance(data.row(i), centroids.row(0));
            for c in 1..k {
                let d = squared_distance(data.row(i), centroids.row(c));
                if d < best_dist {
                    best = c;
                    best_dist = d;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        // Recompute means; fix any emptied cluster.
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((k, data.ncols()));
        for i in 0..m {
            counts[assignment[i]] += 1;
            let mut row = sums.row_mut(assignment[i]);
            row += &data.row(i);
        }
        for c in 0..k {
            if counts[c] == 0 {
                let farthest = (0..m)
                    .max_by(|&a, &b| {
                        let da = squared_distance(data.row(a), centroids.row(assignment[a]));
                        let db = squared_distance(data.row(b), centroids.row(assignment[b]));
                        da.partial_cmp(&db).unwrap_or(core::cmp::Ordering::Equal)
                    })
                    .unwrap_or(0);
                centroids.row_mut(c).assign(&data.row(farthest));
            } else {
                let mut row = centroids.row_mut(c);
                row.assign(&(&sums.row(c) / counts[c] as f64));
            }
        }
    }
    Ok(assignment)
}

/// Rows of `U_k Sigma_k` for the rank-`k` truncated SVD, computed by
/// subspace iteration on `A A^T x` (never forming the Gram matrix). Scaling
/// by the singular values keeps rank-deficient directions from injecting
/// noise into the embedding.
fn left_singular_embedding(data: ArrayView2<f64>, k: usize, seed: u64) -> Array2<f64> {
    let m = data.nrows();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut basis = Array2::from_shape_fn((m, k), |_| rng.gen::<f64>() - 0.5);
    orthonormalize(&mut basis, &mut rng);
    for _ in 0..60 {
        let projected = data.t().dot(&basis);
        basis = data.dot(&projected);
        orthonormalize(&mut basis, &mut rng);
    }
    for j in 0..k {
        let image = data.t().dot(&basis.column(j));
        let sigma = image.dot(&image).sqrt();
        let mut col = basis.column_mut(j);
        col *= sigma;
    }
    basis
}

/// Modified Gram-Schmidt; degenerate columns are re-randomized.
fn orthonormalize(basis: &mut Array2<f64>, rng: &mut ChaCha20Rng) {
    let (m, k) = basis.dim();
    for j in 0..k {
        loop {
            for prev in 0..j {
                let dot = basis.column(j).dot(&basis.column(prev));
                let prev_col = basis.column(prev).to_owned();
                let mut col = basis.column_mut(j);
                col -= &(&prev_col * dot);
            }
            let norm = basis.column(j).dot(&basis.column(j)).sqrt();
            if norm > 1e-12 {
                let mut col = basis.column_mut(j);
                col /= norm;
                break;
            }
            for i in 0..m {
                basis[(i, j)] = rng.gen::<f64>() - 0.5;
            }
        }
    }
}

/// Run one baseline clusterer over the item rows.
pub fn baseline_cluster(
    data: ArrayView2<f64>,
    k: usize,
    method: BaselineMethod,
    seed: u64,
) -> Result<Vec<usize>, BaselineError> {
    match method {
        BaselineMethod::KMeans => kmeans(data, k, seed, 100),
        BaselineMethod::Svd => {
            validate(&data, k)?;
            let embedding = left_singular_embedding(data, k, seed);
            kmeans(embedding.view(), k, seed, 100)
        }
        BaselineMethod::Nmf => {
            let view = ViewMatrix::new(data.to_owned(), 0)?;
            let mut config = MultiViewConfig::new(k, 1);
            config.seed = seed;
            let model = nmf_factorize(&view, k, &config)?;
            Ok(model.assignment)
        }
    }
}

/// Stack views side by side for baselines that expect one matrix.
pub fn concat_views(views: &[ViewMatrix]) -> Result<Array2<f64>, NmfError> {
    if views.is_empty() {
        return Err(NmfError::NoViews);
    }
    let m = views[0].items();
    for (s, view) in views.iter().enumerate() {
        if view.items() != m {
            return Err(NmfError::MismatchedRows {
                view: s,
                rows: view.items(),
                expected: m,
            });
        }
    }
    let total: usize = views.iter().map(|v| v.data().ncols()).sum();
    let mut out = Array2::zeros((m, total));
    let mut offset = 0;
    for view in views {
        let n = view.data().ncols();
        out.slice_mut(ndarray::s![.., offset..offset + n])
            .assign(view.data());
        offset += n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three well-separated non-negative blobs in 5D.
    fn blobs() -> (Array2<f64>, Vec<usize>) {
        let centers: [[f64; 5]; 3] = [
            [10.0, 1.0, 1.0, 1.0, 1.0],
            [1.0, 10.0, 1.0, 1.0, 1.0],
            [1.0, 1.0, 10.0, 1.0, 1.0],
        ];
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (label, center) in centers.iter().enumerate() {
            for _ in 0..10 {
                for &c in center {
                    rows.push(c + rng.gen::<f64>());
                }
                truth.push(label);
            }
        }
        (Array2::from_shape_vec((30, 5), rows).unwrap(), truth)
    }

    #[test]
    fn all_methods_recover_separated_blobs() {
        let (data, truth) = blobs();
        for method in [BaselineMethod::KMeans, BaselineMethod::Svd, BaselineMethod::Nmf] {
            let assignment = baseline_cluster(data.view(), 3, method, 4).unwrap();
            let acc = crate::metrics::clustering_accuracy(&assignment, &truth).unwrap();
            assert_eq!(acc, 1.0, "method {method:?}");
        }
    }

    #[test]
    fn k_equal_one_groups_everything() {
        let (data, _) = blobs();
        let assignment = baseline_cluster(data.view(), 1, BaselineMethod::KMeans, 0).unwrap();
        assert!(assignment.iter().all(|&a| a == 0));
    }

    #[test]
    fn same_seed_is_deterministic() {
        let (data, _) = blobs();
        for method in [BaselineMethod::KMeans, BaselineMethod::Svd, BaselineMethod::Nmf] {
            let a = baseline_cluster(data.view(), 3, method, 11).unwrap();
            let b = baseline_cluster(data.view(), 3, method, 11).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        let (data, _) = blobs();
        assert!(matches!(
            kmeans(data.view(), 31, 0, 10),
            Err(BaselineError::InvalidK { .. })
        ));
        assert!(matches!(
            kmeans(data.view(), 0, 0, 10),
            Err(BaselineError::InvalidK { .. })
        ));
    }

    #[test]
    fn concat_views_stacks_columns() {
        let a = ViewMatrix::new(Array2::from_elem((2, 2), 1.0), 0).unwrap();
        let b = ViewMatrix::new(Array2::from_elem((2, 3), 2.0), 1).unwrap();
        let cat = concat_views(&[a, b]).unwrap();
        assert_eq!(cat.dim(), (2, 5));
        assert_eq!(cat[(0, 0)], 1.0);
        assert_eq!(cat[(0, 4)], 2.0);
    }
}
