//! Non-negative matrix factorization: single-view multiplicative updates and
//! the regularized multi-view co-factorization that couples per-view basis
//! matrices so items cluster consistently across views.
//!
//! The multi-view objective is
//!
//! ```text
//! J = sum_s lambda_s * ||V_s - W_s H_s||_F^2
//!   + sum_{s<t} lambda_st * ||W_s - W_t||_F^2
//! ```
//!
//! minimized by alternating multiplicative updates. Every view is scaled to
//! unit Frobenius norm before factorization, so the recorded objective trace
//! is relative to the scaled problem; the original norms are kept on the
//! model. Single-view factorization runs the same engine with one view and
//! unit view weight, which makes the one-view degeneration exact.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use ndarray::Array2;
use rand::distributions::OpenClosed01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NmfError {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("negative entry at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("cluster count {k} must be in 1..=min(m={m}, n={n})")]
    InvalidK { k: usize, m: usize, n: usize },
    #[error("all views must share the item count (view {view} has {rows} rows, expected {expected})")]
    MismatchedRows {
        view: usize,
        rows: usize,
        expected: usize,
    },
    #[error("no views supplied")]
    NoViews,
    #[error("invalid pair-weight matrix: {0}")]
    BadPairWeights(&'static str),
    #[error("invalid configuration: {0}")]
    BadConfig(&'static str),
    #[error("per-view weights must sum to a positive value")]
    AllViewWeightsZero,
    #[error("explicit initialization has wrong shape for view {view}")]
    BadInit { view: usize },
    #[error("item {item} out of range for {len} items")]
    ItemOutOfRange { item: usize, len: usize },
}

/// One non-negative data matrix describing all items from a single view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatrix {
    data: Array2<f64>,
    view_id: usize,
}

impl ViewMatrix {
    pub fn new(data: Array2<f64>, view_id: usize) -> Result<Self, NmfError> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(NmfError::EmptyMatrix {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        for ((row, col), &value) in data.indexed_iter() {
            if !value.is_finite() {
                return Err(NmfError::NonFiniteEntry { row, col });
            }
            if value < 0.0 {
                return Err(NmfError::NegativeEntry { row, col });
            }
        }
        Ok(Self { data, view_id })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view_id(&self) -> usize {
        self.view_id
    }

    pub fn items(&self) -> usize {
        self.data.nrows()
    }
}

/// Parameters for the factorization engine.
///
/// `lambda_pair` is symmetric with a zero diagonal; each unordered view pair
/// is counted once in the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewConfig {
    pub k: usize,
    pub lambda_view: Vec<f64>,
    pub lambda_pair: Vec<Vec<f64>>,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub epsilon: f64,
}

pub const DEFAULT_PAIR_WEIGHT: f64 = 0.1;

impl MultiViewConfig {
    /// Defaults: unit view weights, 0.1 off-diagonal pair weights, 300
    /// iterations, relative tolerance 1e-5, denominator guard 1e-12.
    pub fn new(k: usize, n_views: usize) -> Self {
        let lambda_pair = (0..n_views)
            .map(|s| {
                (0..n_views)
                    .map(|t| if s == t { 0.0 } else { DEFAULT_PAIR_WEIGHT })
                    .collect()
            })
            .collect();
        Self {
            k,
            lambda_view: vec![1.0; n_views],
            lambda_pair,
            max_iters: 300,
            rel_tol: 1e-5,
            seed: 0,
            epsilon: 1e-12,
        }
    }

    fn validate(&self, n_views: usize) -> Result<(), NmfError> {
        if self.k == 0 {
            return Err(NmfError::BadConfig("k must be positive"));
        }
        if self.max_iters == 0 {
            return Err(NmfError::BadConfig("max_iters must be positive"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(NmfError::BadConfig("rel_tol must be positive"));
        }
        if !(self.epsilon > 0.0) {
            return Err(NmfError::BadConfig("epsilon must be positive"));
        }
        if self.lambda_view.len() != n_views {
            return Err(NmfError::BadConfig("lambda_view length must match view count"));
        }
        if self.lambda_view.iter().any(|&l| !(l >= 0.0)) {
            return Err(NmfError::BadConfig("view weights must be non-negative"));
        }
        if self.lambda_pair.len() != n_views
            || self.lambda_pair.iter().any(|row| row.len() != n_views)
        {
            return Err(NmfError::BadPairWeights("shape must be n_views x n_views"));
        }
        for s in 0..n_views {
            if self.lambda_pair[s][s] != 0.0 {
                return Err(NmfError::BadPairWeights("diagonal must be zero"));
            }
            for t in 0..n_views {
                let w = self.lambda_pair[s][t];
                if !(w >= 0.0) {
                    return Err(NmfError::BadPairWeights("weights must be non-negative"));
                }
                if w != self.lambda_pair[t][s] {
                    return Err(NmfError::BadPairWeights("matrix must be symmetric"));
                }
            }
        }
        Ok(())
    }
}

/// Factorization result: per-view factor pairs on the unit-norm problem, the
/// objective trace per sweep, and the consensus cluster assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub w: Vec<Array2<f64>>,
    pub h: Vec<Array2<f64>>,
    pub k: usize,
    pub objective_trace: Vec<f64>,
    pub assignment: Vec<usize>,
    /// Frobenius norms of the input views before scaling.
    pub input_norms: Vec<f64>,
}

impl FactorModel {
    pub fn items(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_views(&self) -> usize {
        self.w.len()
    }
}

fn frobenius_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

fn objective(
    views: &[Array2<f64>],
    w: &[Array2<f64>],
    h: &[Array2<f64>],
    lambda_view: &[f64],
    lambda_pair: &[Vec<f64>],
) -> f64 {
    let mut j = 0.0;
    for s in 0..views.len() {
        let diff = &views[s] - &w[s].dot(&h[s]);
        j += lambda_view[s] * diff.iter().map(|&x| x * x).sum::<f64>();
    }
    for s in 0..views.len() {
        for t in (s + 1)..views.len() {
            if lambda_pair[s][t] > 0.0 {
                let diff = &w[s] - &w[t];
                j += lambda_pair[s][t] * diff.iter().map(|&x| x * x).sum::<f64>();
            }
        }
    }
    j
}

fn seeded_init(
    views: &[Array2<f64>],
    k: usize,
    seed: u64,
) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut w = Vec::with_capacity(views.len());
    let mut h = Vec::with_capacity(views.len());
    for view in views {
        let (m, n) = (view.nrows(), view.ncols());
        let mean = view.mean().unwrap_or(0.0);
        let scale = (mean / k as f64).sqrt();
        let mut draw = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| {
                let u: f64 = rng.sample(OpenClosed01);
                u * scale
            })
        };
        w.push(draw(m, k));
        h.push(draw(k, n));
    }
    (w, h)
}

fn factorize_engine(
    raw_views: &[&Array2<f64>],
    config: &MultiViewConfig,
    explicit_init: Option<&[(Array2<f64>, Array2<f64>)]>,
) -> Result<FactorModel, NmfError> {
    let n_views = raw_views.len();
    if n_views == 0 {
        return Err(NmfError::NoViews);
    }
    config.validate(n_views)?;
    let m = raw_views[0].nrows();
    for (s, view) in raw_views.iter().enumerate() {
        if view.nrows() != m {
            return Err(NmfError::MismatchedRows {
                view: s,
                rows: view.nrows(),
                expected: m,
            });
        }
        if config.k > m.min(view.ncols()) {
            return Err(NmfError::InvalidK {
                k: config.k,
                m,
                n: view.ncols(),
            });
        }
    }

    // Scale each view to unit Frobenius norm (zero views stay zero).
    let mut input_norms = Vec::with_capacity(n_views);
    let views: Vec<Array2<f64>> = raw_views
        .iter()
        .map(|view| {
            let norm = frobenius_norm(view);
            input_norms.push(norm);
            if norm > 0.0 {
                (*view).clone() / norm
            } else {
                (*view).clone()
            }
        })
        .collect();

    let (mut w, mut h) = match explicit_init {
        Some(init) => {
            if init.len() != n_views {
                return Err(NmfError::BadInit { view: init.len() });
            }
            for (s, (w0, h0)) in init.iter().enumerate() {
                let n = views[s].ncols();
                let shapes_ok = w0.nrows() == m
                    && w0.ncols() == config.k
                    && h0.nrows() == config.k
                    && h0.ncols() == n;
                let nonneg = w0.iter().chain(h0.iter()).all(|&x| x.is_finite() && x >= 0.0);
                if !shapes_ok || !nonneg {
                    return Err(NmfError::BadInit { view: s });
                }
            }
            let w = init.iter().map(|(w0, _)| w0.clone()).collect();
            let h = init.iter().map(|(_, h0)| h0.clone()).collect();
            (w, h)
        }
        None => seeded_init(&views, config.k, config.seed),
    };

    let eps = config.epsilon;
    let mut trace: Vec<f64> = Vec::new();
    for _sweep in 0..config.max_iters {
        // H updates: H_s <- H_s .* (W_s^T V_s) ./ (W_s^T W_s H_s + eps).
        for s in 0..n_views {
            let numer = w[s].t().dot(&views[s]);
            let denom = w[s].t().dot(&w[s]).dot(&h[s]) + eps;
            h[s] = &h[s] * &(numer / &denom);
        }
        // W updates: coupled across views through the pair weights.
        for s in 0..n_views {
            let ratio = {
                let w_s = &w[s];
                let hht = h[s].dot(&h[s].t());
                let mut numer = views[s].dot(&h[s].t()) * config.lambda_view[s];
                let mut denom = w_s.dot(&hht) * config.lambda_view[s];
                for t in 0..n_views {
                    if t != s && config.lambda_pair[s][t] > 0.0 {
                        numer += &(&w[t] * config.lambda_pair[s][t]);
                        denom += &(w_s * config.lambda_pair[s][t]);
                    }
                }
                numer / &(denom + eps)
            };
            w[s] = &w[s] * &ratio;
        }
        debug_assert!(w
            .iter()
            .chain(h.iter())
            .all(|f| f.iter().all(|&x| x >= 0.0)));

        let j = objective(&views, &w, &h, &config.lambda_view, &config.lambda_pair);
        let converged = match trace.last() {
            Some(&prev) => {
                if prev <= 0.0 {
                    true
                } else {
                    (prev - j) / prev < config.rel_tol
                }
            }
            None => false,
        };
        trace.push(j);
        if converged {
            break;
        }
    }

    let assignment = assign_clusters(&w, &config.lambda_view)?;
    Ok(FactorModel {
        w,
        h,
        k: config.k,
        objective_trace: trace,
        assignment,
        input_norms,
    })
}

/// Single-view NMF by multiplicative updates on `||V - WH||_F^2`.
///
/// `k` overrides `config.k`; the view and pair weights in `config` are
/// ignored (a single view always carries unit weight).
pub fn nmf_factorize(
    view: &ViewMatrix,
    k: usize,
    config: &MultiViewConfig,
) -> Result<FactorModel, NmfError> {
    let single = MultiViewConfig {
        k,
        lambda_view: vec![1.0],
        lambda_pair: vec![vec![0.0]],
        max_iters: config.max_iters,
        rel_tol: config.rel_tol,
        seed: config.seed,
        epsilon: config.epsilon,
    };
    factorize_engine(&[view.data()], &single, None)
}

/// Multi-view co-factorization: scale views, initialize from the seed, and
/// alternate the H and W updates until the relative objective change drops
/// below `rel_tol` or `max_iters` sweeps complete.
pub fn multiview_factorize(
    views: &[ViewMatrix],
    config: &MultiViewConfig,
) -> Result<FactorModel, NmfError> {
    let raw: Vec<&Array2<f64>> = views.iter().map(|v| v.data()).collect();
    factorize_engine(&raw, config, None)
}

/// Same as [`multiview_factorize`] but with caller-supplied initial factors
/// (applied to the unit-norm problem). Used to pin initialization when seeded
/// randomness would confound a comparison.
pub fn multiview_factorize_with_init(
    views: &[ViewMatrix],
    config: &MultiViewConfig,
    init: &[(Array2<f64>, Array2<f64>)],
) -> Result<FactorModel, NmfError> {
    let raw: Vec<&Array2<f64>> = views.iter().map(|v| v.data()).collect();
    factorize_engine(&raw, config, Some(init))
}

/// Weighted consensus matrix `sum_s lambda_s W_s / sum_s lambda_s`.
pub fn consensus_matrix(
    w: &[Array2<f64>],
    lambda_view: &[f64],
) -> Result<Array2<f64>, NmfError> {
    if w.is_empty() {
        return Err(NmfError::NoViews);
    }
    if w.len() != lambda_view.len() {
        return Err(NmfError::BadConfig("lambda_view length must match view count"));
    }
    let total: f64 = lambda_view.iter().sum();
    if !(total > 0.0) {
        return Err(NmfError::AllViewWeightsZero);
    }
    let mut consensus = Array2::zeros(w[0].dim());
    for (w_s, &lambda) in w.iter().zip(lambda_view.iter()) {
        consensus += &(w_s * lambda);
    }
    Ok(consensus / total)
}

/// Per-item argmax over the consensus matrix rows; ties break to the lowest
/// cluster index.
pub fn assign_clusters(
    w: &[Array2<f64>],
    lambda_view: &[f64],
) -> Result<Vec<usize>, NmfError> {
    let consensus = consensus_matrix(w, lambda_view)?;
    Ok(consensus
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            for (idx, &value) in row.iter().enumerate() {
                if value > row[best] {
                    best = idx;
                }
            }
            best
        })
        .collect())
}

/// All items sharing `item`'s cluster, excluding `item` itself.
pub fn nearest_neighbors(
    assignment: &[usize],
    item: usize,
) -> Result<BTreeSet<usize>, NmfError> {
    if item >= assignment.len() {
        return Err(NmfError::ItemOutOfRange {
            item,
            len: assignment.len(),
        });
    }
    let label = assignment[item];
    Ok(assignment
        .iter()
        .enumerate()
        .filter(|&(other, &l)| other != item && l == label)
        .map(|(other, _)| other)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    fn random_nonneg(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.gen::<f64>())
    }

    #[test]
    fn rejects_invalid_inputs() {
        let neg = Array2::from_shape_vec((2, 2), vec![1.0, -0.5, 0.0, 2.0]).unwrap();
        assert!(matches!(
            ViewMatrix::new(neg, 0),
            Err(NmfError::NegativeEntry { row: 0, col: 1 })
        ));
        let nan = Array2::from_shape_vec((1, 2), vec![1.0, f64::NAN]).unwrap();
        assert!(matches!(
            ViewMatrix::new(nan, 0),
            Err(NmfError::NonFiniteEntry { .. })
        ));
        let v = ViewMatrix::new(random_nonneg(4, 3, 1), 0).unwrap();
        let config = MultiViewConfig::new(4, 1);
        assert!(matches!(
            nmf_factorize(&v, 4, &config),
            Err(NmfError::InvalidK { .. })
        ));
    }

    #[test]
    fn zero_matrix_has_zero_objective_every_iteration() {
        let v = ViewMatrix::new(Array2::zeros((4, 4)), 0).unwrap();
        let config = MultiViewConfig::new(2, 1);
        let model = nmf_factorize(&v, 2, &config).unwrap();
        assert!(model.objective_trace.iter().all(|&j| j == 0.0));
        let product = model.w[0].dot(&model.h[0]);
        assert!(product.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn exact_low_rank_input_is_recovered() {
        // V = W* H* with known non-negative rank-3 factors.
        let w_star = random_nonneg(20, 3, 11);
        let h_star = random_nonneg(3, 15, 12);
        let v = ViewMatrix::new(w_star.dot(&h_star), 0).unwrap();
        let mut config = MultiViewConfig::new(3, 1);
        config.max_iters = 2000;
        config.rel_tol = 1e-14;
        config.seed = 5;
        let model = nmf_factorize(&v, 3, &config).unwrap();
        // The view is scaled to unit norm, so the trace is already relative.
        assert!(*model.objective_trace.last().unwrap() < 1e-6);
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        let v = ViewMatrix::new(random_nonneg(10, 8, 3), 0).unwrap();
        let mut config = MultiViewConfig::new(4, 1);
        config.max_iters = 100;
        config.rel_tol = 1e-15;
        let model = nmf_factorize(&v, 4, &config).unwrap();
        for pair in model.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-9));
        }
    }

    #[test]
    fn identical_views_with_strong_coupling_agree() {
        let data = random_nonneg(20, 10, 21);
        let views = vec![
            ViewMatrix::new(data.clone(), 0).unwrap(),
            ViewMatrix::new(data, 1).unwrap(),
        ];
        let mut config = MultiViewConfig::new(3, 2);
        config.lambda_pair = vec![vec![0.0, 10.0], vec![10.0, 0.0]];
        config.max_iters = 500;
        config.seed = 2;
        let model = multiview_factorize(&views, &config).unwrap();
        let diff = frobenius_norm(&(&model.w[0] - &model.w[1]));
        let scale = frobenius_norm(&model.w[0]);
        assert!(diff / scale < 0.05, "relative gap {}", diff / scale);
    }

    #[test]
    fn single_view_degenerates_to_plain_nmf() {
        let data = random_nonneg(12, 9, 31);
        let view = ViewMatrix::new(data, 0).unwrap();
        let mut config = MultiViewConfig::new(3, 1);
        config.seed = 77;
        config.max_iters = 50;
        config.rel_tol = 1e-15;
        let multi = multiview_factorize(core::slice::from_ref(&view), &config).unwrap();
        let single = nmf_factorize(&view, 3, &config).unwrap();
        assert_eq!(multi.w, single.w);
        assert_eq!(multi.h, single.h);
        assert_eq!(multi.objective_trace, single.objective_trace);
        assert_eq!(multi.assignment, single.assignment);
    }

    #[test]
    fn assignment_argmax_and_tie_break() {
        let w = vec![Array2::from_shape_vec(
            (2, 3),
            vec![0.1, 0.7, 0.2, 0.5, 0.5, 0.0],
        )
        .unwrap()];
        let assignment = assign_clusters(&w, &[1.0]).unwrap();
        assert_eq!(assignment, vec![1, 0]);
        assert!(matches!(
            assign_clusters(&w, &[0.0]),
            Err(NmfError::AllViewWeightsZero)
        ));
    }

    #[test]
    fn neighbors_share_cluster() {
        let neighbors = nearest_neighbors(&[0, 0, 1, 0], 0).unwrap();
        let expected: BTreeSet<usize> = [1, 3].into_iter().collect();
        assert_eq!(neighbors, expected);
        assert!(nearest_neighbors(&[0, 1, 2], 1).unwrap().is_empty());
        assert!(matches!(
            nearest_neighbors(&[0, 1], 5),
            Err(NmfError::ItemOutOfRange { .. })
        ));
    }
}
