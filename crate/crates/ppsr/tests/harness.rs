//! Experiment-harness integration: transport-independent metrics and
//! byte-identical reruns.

use ppsr::config::AppConfig;
use ppsr::experiment::{run_experiment, write_experiment_outputs};
use tempfile::TempDir;

fn small_config(transport: &str) -> AppConfig {
    let text = format!(
        r#"
[dataset.synthetic]
n_items = 30
n_users = 16
k_true = 2
n_views = 2
noise = 0.4
pattern = "complementary"
rating_density = 0.6
seed = 3

[clustering]
k = 2
lambda_pair = 0.5
max_iters = 120

[experiment]
seeds = [4, 5]
k_min = 3
k_max = 6
transport = "{transport}"
"#
    );
    let config: AppConfig = toml::from_str(&text).unwrap();
    config.validate().unwrap();
    config
}

#[test]
fn socket_and_in_process_evaluations_agree() {
    let in_process = run_experiment(&small_config("in-process")).unwrap();
    let socket = run_experiment(&small_config("socket")).unwrap();
    // The transport field changes the config digest but must not change a
    // single metric.
    assert_eq!(in_process.runs.len(), socket.runs.len());
    for (a, b) in in_process.runs.iter().zip(&socket.runs) {
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.points, b.points);
    }
    assert_eq!(in_process.median, socket.median);
}

#[test]
fn identical_configs_write_identical_bytes() {
    let config = small_config("in-process");
    let dir_a = TempDir::new().unwrap();
    let dir_b = TempDir::new().unwrap();
    let out_a = run_experiment(&config).unwrap();
    let out_b = run_experiment(&config).unwrap();
    let files_a = write_experiment_outputs(&out_a, dir_a.path()).unwrap();
    let files_b = write_experiment_outputs(&out_b, dir_b.path()).unwrap();
    assert_eq!(files_a.len(), files_b.len());
    for (a, b) in files_a.iter().zip(&files_b) {
        assert_eq!(a.file_name(), b.file_name());
        let bytes_a = std::fs::read(a).unwrap();
        let bytes_b = std::fs::read(b).unwrap();
        assert_eq!(bytes_a, bytes_b, "{:?} differs between reruns", a.file_name());
    }
}
