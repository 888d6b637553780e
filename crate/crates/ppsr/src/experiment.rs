//! The recommendation experiment: split users 75/25, build the four model
//! variants, and measure precision/recall over k.
//!
//! Variants:
//!
//! * `RM-SV`  - single-view clustering, no social data
//! * `RM-MV`  - multi-view clustering, no social data
//! * `RM-SVS` - single-view clustering merged with the socialized list
//! * `PPSR`   - multi-view clustering merged with the socialized list
//!
//! Test users keep a few visible "seed" items (their top-rated ones); the
//! rest of their ratings at or above the relevance threshold form the
//! relevant set. The rating matrix used by the protocol contains training
//! users only. Clustering candidates are the non-seed items sharing a
//! cluster with a seed item, ordered by seed-cluster matches, then training
//! popularity, then item id; a user with no usable seeds falls back to the
//! popularity ranking. One master seed per run drives dataset generation,
//! the split, factorization, key generation, and the protocol sessions.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ppsr_core::metrics::precision_recall_at_k;
use ppsr_core::nmf::{multiview_factorize, nmf_factorize, FactorModel};
use ppsr_core::paillier::{keygen, FixedPointCodec, Keypair};
use ppsr_core::protocol::{
    merge_lists, run_protocol, validate_transcript, AliceSession, BobSession, CandidateList,
    Provenance, RankMatrix,
};
use ppsr_core::similarity::{similarity_table, SimilarityWeights, UserProfile};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::config::AppConfig;
use crate::dataset::{load_dataset, Dataset};
use crate::error::CliError;
use crate::model_io::write_atomic;
use crate::transport::run_protocol_tcp;

pub const MODEL_NAMES: [&str; 4] = ["RM-SV", "RM-MV", "RM-SVS", "PPSR"];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSplit {
    pub train: Vec<u32>,
    pub test: Vec<u32>,
    pub seed: u64,
}

/// Random user split; the train side holds `round(n * fraction)` users.
pub fn split_users(n_users: usize, train_fraction: f64, seed: u64) -> EvalSplit {
    let mut users: Vec<u32> = (0..n_users as u32).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    users.shuffle(&mut rng);
    let train_count = ((n_users as f64) * train_fraction).round() as usize;
    let train_count = train_count.clamp(1, n_users.saturating_sub(1).max(1));
    let (train, test) = users.split_at(train_count.min(users.len()));
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    EvalSplit { train, test, seed }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub model: &'static str,
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub runs: Vec<SeedRun>,
    pub median: Vec<CurvePoint>,
    pub config_digest: String,
    pub seeds: Vec<u64>,
}

/// Kept ratings for training users; test users' rows are zeroed.
pub fn training_rank(ratings: &RankMatrix, test_users: &[u32]) -> RankMatrix {
    let test: BTreeSet<u32> = test_users.iter().copied().collect();
    let mut data = ratings.data().clone();
    for user in &test {
        for item in 0..data.ncols() {
            data[(*user as usize, item)] = 0;
        }
    }
    RankMatrix::new(data, ratings.rank_max()).expect("zeroing keeps ranks in range")
}

/// Column sums of the training ratings.
pub fn item_popularity(training: &RankMatrix) -> Vec<f64> {
    let data = training.data();
    (0..data.ncols())
        .map(|item| data.column(item).iter().map(|&r| r as f64).sum())
        .collect()
}

/// Ranked clustering-based candidates for one user: non-excluded items in a
/// seed item's cluster, by (seed-cluster matches, popularity, item id);
/// popularity order alone when there are no seeds.
pub fn clustering_candidates(
    assignment: &[usize],
    seed_items: &[u32],
    popularity: &[f64],
    exclude: &BTreeSet<u32>,
) -> CandidateList {
    let m = assignment.len();
    let mut scored: Vec<(usize, f64, u32)> = Vec::new();
    for item in 0..m as u32 {
        if exclude.contains(&item) {
            continue;
        }
        let matches = seed_items
            .iter()
            .filter(|&&s| assignment[s as usize] == assignment[item as usize])
            .count();
        if seed_items.is_empty() {
            scored.push((0, popularity[item as usize], item));
        } else if matches > 0 {
            scored.push((matches, popularity[item as usize], item));
        }
    }
    scored.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then_with(|| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal))
            .then_with(|| a.2.cmp(&b.2))
    });
    CandidateList {
        items: scored.into_iter().map(|(_, _, item)| item).collect(),
        provenance: Provenance::Clustering,
    }
}

/// Run the two-party protocol for one target user and return the socialized
/// list with already-seen items removed. Every transcript is schema-checked.
#[allow(clippy::too_many_arguments)]
pub fn socialized_candidates(
    profiles: &[UserProfile],
    weights: &SimilarityWeights,
    keypair: &Keypair,
    training: &RankMatrix,
    target: u32,
    codec: FixedPointCodec,
    session_seed: u64,
    use_socket: bool,
    exclude: &BTreeSet<u32>,
) -> Result<CandidateList, CliError> {
    let table = similarity_table(target, profiles, weights).map_err(CliError::data)?;
    let bob = BobSession::new(keypair.clone(), table, codec, session_seed);
    let alice = AliceSession::new(training.clone(), target, codec.scale(), session_seed + 1)?;
    let (list, transcript) = if use_socket {
        run_protocol_tcp(alice, bob).map_err(CliError::protocol)?
    } else {
        let mut alice = alice;
        let mut bob = bob;
        run_protocol(&mut alice, &mut bob)?
    };
    validate_transcript(&transcript)?;
    let items: Vec<u32> = list
        .items
        .into_iter()
        .filter(|item| !exclude.contains(item))
        .collect();
    Ok(CandidateList {
        items,
        provenance: Provenance::Socialized,
    })
}

struct UserEval {
    relevant: BTreeSet<u32>,
    recommendations: [Vec<u32>; 4],
}

fn evaluate_seed(config: &AppConfig, seed: u64) -> Result<SeedRun, CliError> {
    let dataset: Dataset = load_dataset(config, Some(seed))?;
    let exp = &config.experiment;
    let n_users = dataset.ratings.n_users();
    if n_users < 2 {
        return Err(CliError::Data("need at least two users".into()));
    }
    let split = split_users(n_users, exp.train_fraction, seed);
    let training = training_rank(&dataset.ratings, &split.test);
    let popularity = item_popularity(&training);

    let mv_config = config.clustering.to_multiview(dataset.views.len(), Some(seed));
    let sv_model: FactorModel =
        nmf_factorize(&dataset.views[0], mv_config.k, &mv_config).map_err(CliError::data)?;
    let mv_model = multiview_factorize(&dataset.views, &mv_config).map_err(CliError::data)?;

    let weights = config.similarity.to_weights().map_err(CliError::config)?;
    let codec = FixedPointCodec::new(config.crypto.scale).map_err(CliError::config)?;
    let mut key_rng = ChaCha20Rng::seed_from_u64(config.crypto.key_seed.wrapping_add(seed));
    let keypair = keygen(config.crypto.key_bits, &mut key_rng).map_err(CliError::config)?;
    let use_socket = exp.transport == "socket";

    let mut evals: Vec<UserEval> = Vec::new();
    for (idx, &user) in split.test.iter().enumerate() {
        let mut rated: Vec<(u32, u32)> = (0..dataset.ratings.n_items() as u32)
            .filter_map(|item| {
                let r = dataset.ratings.get(user, item);
                (r > 0).then_some((item, r))
            })
            .collect();
        rated.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let seed_items: Vec<u32> = rated
            .iter()
            .take(exp.seed_items_per_test_user)
            .map(|&(item, _)| item)
            .collect();
        let exclude: BTreeSet<u32> = seed_items.iter().copied().collect();
        let relevant: BTreeSet<u32> = rated
            .iter()
            .skip(exp.seed_items_per_test_user)
            .filter(|&&(_, r)| r >= exp.relevance_threshold)
            .map(|&(item, _)| item)
            .collect();
        if relevant.is_empty() {
            continue;
        }

        let clust_sv = clustering_candidates(&sv_model.assignment, &seed_items, &popularity, &exclude);
        let clust_mv = clustering_candidates(&mv_model.assignment, &seed_items, &popularity, &exclude);
        let socialized = socialized_candidates(
            &dataset.profiles,
            &weights,
            &keypair,
            &training,
            user,
            codec,
            seed.wrapping_mul(1000).wrapping_add(idx as u64 * 2),
            use_socket,
            &exclude,
        )?;

        let k_max = exp.k_max;
        let rm_sv: Vec<u32> = clust_sv.items.iter().copied().take(k_max).collect();
        let rm_mv: Vec<u32> = clust_mv.items.iter().copied().take(k_max).collect();
        let rm_svs = merge_lists(&socialized, &clust_sv, k_max)?.items;
        let ppsr = merge_lists(&socialized, &clust_mv, k_max)?.items;
        evals.push(UserEval {
            relevant,
            recommendations: [rm_sv, rm_mv, rm_svs, ppsr],
        });
    }
    if evals.is_empty() {
        return Err(CliError::Data(format!(
            "seed {seed}: no test user has a non-empty relevant set"
        )));
    }

    let relevant: Vec<BTreeSet<u32>> = evals.iter().map(|e| e.relevant.clone()).collect();
    let mut points = Vec::new();
    for (model_idx, model) in MODEL_NAMES.iter().enumerate() {
        let recs: Vec<Vec<u32>> = evals
            .iter()
            .map(|e| e.recommendations[model_idx].clone())
            .collect();
        for k in exp.k_min..=exp.k_max {
            let (precision, recall) =
                precision_recall_at_k(&recs, &relevant, k).map_err(CliError::data)?;
            points.push(CurvePoint {
                model,
                k,
                precision,
                recall,
            });
        }
    }
    Ok(SeedRun { seed, points })
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn config_digest(config: &AppConfig) -> String {
    let repr = format!("{config:?}");
    let hash = Sha256::digest(repr.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in hash {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

/// Run every seed and aggregate per-(model, k) medians.
pub fn run_experiment(config: &AppConfig) -> Result<ExperimentOutput, CliError> {
    let seeds = config.experiment.seeds.clone();
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        runs.push(evaluate_seed(config, seed)?);
    }
    let mut median_points = Vec::new();
    for model in MODEL_NAMES {
        for k in config.experiment.k_min..=config.experiment.k_max {
            let mut precisions: Vec<f64> = runs
                .iter()
                .flat_map(|r| &r.points)
                .filter(|p| p.model == model && p.k == k)
                .map(|p| p.precision)
                .collect();
            let mut recalls: Vec<f64> = runs
                .iter()
                .flat_map(|r| &r.points)
                .filter(|p| p.model == model && p.k == k)
                .map(|p| p.recall)
                .collect();
            median_points.push(CurvePoint {
                model,
                k,
                precision: median(&mut precisions),
                recall: median(&mut recalls),
            });
        }
    }
    Ok(ExperimentOutput {
        runs,
        median: median_points,
        config_digest: config_digest(config),
        seeds,
    })
}

/// Write one curve file per model plus the per-seed table. Returns the
/// written paths.
pub fn write_experiment_outputs(
    output: &ExperimentOutput,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    let seeds_csv = output
        .seeds
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let mut written = Vec::new();
    for model in MODEL_NAMES {
        let mut text = format!(
            "# ppsr-curves v1 model={model} seeds={seeds_csv} config_sha256={}\n",
            output.config_digest
        );
        text.push_str("model\tk\tprecision\trecall\n");
        for point in output.median.iter().filter(|p| p.model == model) {
            let _ = writeln!(
                text,
                "{}\t{}\t{:.6}\t{:.6}",
                point.model, point.k, point.precision, point.recall
            );
        }
        let path = dir.join(format!("curve_{}.tsv", model.to_lowercase().replace('-', "_")));
        write_atomic(&path, &text).map_err(CliError::data)?;
        written.push(path);
    }
    let mut text = format!(
        "# ppsr-runs v1 seeds={seeds_csv} config_sha256={}\n",
        output.config_digest
    );
    text.push_str("seed\tmodel\tk\tprecision\trecall\n");
    for run in &output.runs {
        for point in &run.points {
            let _ = writeln!(
                text,
                "{}\t{}\t{}\t{:.6}\t{:.6}",
                run.seed, point.model, point.k, point.precision, point.recall
            );
        }
    }
    let path = dir.join("runs.tsv");
    write_atomic(&path, &text).map_err(CliError::data)?;
    written.push(path);
    Ok(written)
}

/// Clustering metric comparison (accuracy, pairwise F1, NMI) of the three
/// baselines plus the multi-view consensus against a reference labeling.
pub mod baseline_table {
    use super::*;
    use ppsr_core::baselines::{baseline_cluster, concat_views, BaselineMethod};
    use ppsr_core::metrics::{clustering_accuracy, nmi, pairwise_f1};

    #[derive(Debug, Clone)]
    pub struct MetricReport {
        pub algorithm: &'static str,
        pub accuracy_mean: f64,
        pub accuracy_std: f64,
        pub f1_mean: f64,
        pub f1_std: f64,
        pub nmi_mean: f64,
        pub nmi_std: f64,
    }

    fn mean_std(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    /// Evaluate all four algorithms over the configured seeds. Requires a
    /// reference truth (synthetic data).
    pub fn run(config: &AppConfig) -> Result<Vec<MetricReport>, CliError> {
        let algorithms: [&'static str; 4] = ["K-Means", "SVD", "NMF", "Multi-C"];
        let mut scores: Vec<[Vec<f64>; 3]> = (0..4)
            .map(|_| [Vec::new(), Vec::new(), Vec::new()])
            .collect();
        for &seed in &config.experiment.seeds {
            let dataset = load_dataset(config, Some(seed))?;
            let truth = dataset
                .truth
                .clone()
                .ok_or_else(|| CliError::Data("baselines need planted truth (synthetic data)".into()))?;
            let k = config.clustering.k;
            let concatenated = concat_views(&dataset.views).map_err(CliError::data)?;
            let mv_config = config.clustering.to_multiview(dataset.views.len(), Some(seed));
            for (idx, algorithm) in algorithms.iter().enumerate() {
                let assignment = match *algorithm {
                    "K-Means" => baseline_cluster(concatenated.view(), k, BaselineMethod::KMeans, seed)
                        .map_err(CliError::data)?,
                    "SVD" => baseline_cluster(concatenated.view(), k, BaselineMethod::Svd, seed)
                        .map_err(CliError::data)?,
                    "NMF" => baseline_cluster(
                        dataset.views[0].data().view(),
                        k,
                        BaselineMethod::Nmf,
                        seed,
                    )
                    .map_err(CliError::data)?,
                    _ => multiview_factorize(&dataset.views, &mv_config)
                        .map_err(CliError::data)?
                        .assignment,
                };
                scores[idx][0].push(clustering_accuracy(&assignment, &truth).map_err(CliError::data)?);
                scores[idx][1].push(pairwise_f1(&assignment, &truth).map_err(CliError::data)?);
                scores[idx][2].push(nmi(&assignment, &truth).map_err(CliError::data)?);
            }
        }
        Ok(algorithms
            .iter()
            .zip(scores)
            .map(|(algorithm, [acc, f1, nmi_scores])| {
                let (accuracy_mean, accuracy_std) = mean_std(&acc);
                let (f1_mean, f1_std) = mean_std(&f1);
                let (nmi_mean, nmi_std) = mean_std(&nmi_scores);
                MetricReport {
                    algorithm,
                    accuracy_mean,
                    accuracy_std,
                    f1_mean,
                    f1_std,
                    nmi_mean,
                    nmi_std,
                }
            })
            .collect())
    }

    pub fn to_tsv(reports: &[MetricReport]) -> String {
        let mut out = String::from("algorithm\taccuracy\taccuracy_std\tf1\tf1_std\tnmi\tnmi_std\n");
        for r in reports {
            let _ = writeln!(
                out,
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                r.algorithm, r.accuracy_mean, r.accuracy_std, r.f1_mean, r.f1_std, r.nmi_mean, r.nmi_std
            );
        }
        out
    }

    pub use MetricReport as Report;
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn split_is_three_quarters_within_one_user() {
        for n in [8usize, 20, 60, 61] {
            let split = split_users(n, 0.75, 3);
            assert_eq!(split.train.len() + split.test.len(), n);
            let expected = (n as f64 * 0.75).round();
            assert!((split.train.len() as f64 - expected).abs() <= 1.0);
            let train: BTreeSet<u32> = split.train.iter().copied().collect();
            let test: BTreeSet<u32> = split.test.iter().copied().collect();
            assert_eq!(train.intersection(&test).count(), 0);
        }
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let a = split_users(40, 0.75, 9);
        let b = split_users(40, 0.75, 9);
        let c = split_users(40, 0.75, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn clustering_candidates_rank_by_match_then_popularity() {
        // Items 0,1 in cluster 0; 2,3 in cluster 1; seeds {0} target cluster 0.
        let assignment = vec![0, 0, 1, 1];
        let popularity = vec![1.0, 5.0, 9.0, 9.0];
        let exclude: BTreeSet<u32> = [0u32].into_iter().collect();
        let list = clustering_candidates(&assignment, &[0], &popularity, &exclude);
        assert_eq!(list.items, vec![1]);
        // No seeds: popularity order, ties by id.
        let list = clustering_candidates(&assignment, &[], &popularity, &BTreeSet::new());
        assert_eq!(list.items, vec![2, 3, 1, 0]);
    }

    #[test]
    fn training_rank_zeroes_test_rows() {
        let data = Array2::from_shape_vec((3, 2), vec![1u32, 2, 3, 4, 5, 0]).unwrap();
        let ratings = RankMatrix::new(data, 5).unwrap();
        let training = training_rank(&ratings, &[1]);
        assert_eq!(training.get(0, 1), 2);
        assert_eq!(training.get(1, 0), 0);
        assert_eq!(training.get(1, 1), 0);
        assert_eq!(training.get(2, 0), 5);
        assert_eq!(item_popularity(&training), vec![6.0, 2.0]);
    }

    #[test]
    fn median_handles_even_and_odd_counts() {
        assert_eq!(median(&mut vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&mut vec![]), 0.0);
    }
}
