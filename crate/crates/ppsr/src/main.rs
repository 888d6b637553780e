use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ppsr_core::metrics::{clustering_accuracy, nmi, pairwise_f1};
use ppsr_core::nmf::multiview_factorize;
use ppsr_core::paillier::{keygen, FixedPointCodec};
use ppsr_core::protocol::merge_lists;
use ppsr_core::similarity::similarity_table;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use ppsr::config::AppConfig;
use ppsr::dataset::load_dataset;
use ppsr::error::CliError;
use ppsr::experiment::{
    baseline_table, clustering_candidates, config_digest, item_popularity, run_experiment,
    socialized_candidates, write_experiment_outputs,
};
use ppsr::model_io::{
    similarity_table_to_string, write_atomic, write_factor_model, write_matrix,
    write_public_key, write_secret_key,
};

#[derive(Parser)]
#[command(name = "ppsr", about = "Privacy-preserving socialized recommendation toolkit")]
struct Cli {
    /// Path to the declarative TOML configuration.
    #[arg(long, global = true, default_value = "ppsr.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run multi-view clustering and write the factor model.
    Cluster {
        #[arg(long, default_value = "model.fm")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare K-Means / SVD / NMF / multi-view clustering on planted data.
    Baselines {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build profiles and write similarity tables as (target, other, score).
    Similarity {
        #[arg(long)]
        target: Option<u32>,
        #[arg(long, default_value = "similarity.tsv")]
        out: PathBuf,
    },
    /// Generate a Paillier keypair.
    Keygen {
        #[arg(long)]
        bits: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run the two-party protocol for one target user.
    Recommend {
        #[arg(long)]
        target: u32,
        /// "in-process" or "socket".
        #[arg(long)]
        mode: Option<String>,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Run the full four-variant experiment and write curve files.
    Eval {
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Emit a synthetic dataset to disk.
    Synth {
        #[arg(long, default_value = "synth")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = AppConfig::load(&cli.config)?;
    match cli.command {
        Command::Cluster { out, seed } => cluster(&config, &out, seed),
        Command::Baselines { out } => baselines(&config, out.as_deref()),
        Command::Similarity { target, out } => similarity(&config, target, &out),
        Command::Keygen { bits, seed, out_dir } => keygen_cmd(&config, bits, seed, &out_dir),
        Command::Recommend { target, mode, top_k } => recommend(&config, target, mode, top_k),
        Command::Eval { out_dir } => eval(&config, &out_dir),
        Command::Synth { out_dir } => synth(&config, &out_dir),
    }
}

fn cluster(config: &AppConfig, out: &std::path::Path, seed: Option<u64>) -> Result<(), CliError> {
    let dataset = load_dataset(config, None)?;
    for warning in &dataset.warnings {
        eprintln!("warning: {warning}");
    }
    let mv_config = config.clustering.to_multiview(dataset.views.len(), seed);
    let model = multiview_factorize(&dataset.views, &mv_config).map_err(CliError::data)?;
    write_factor_model(out, &model)?;
    println!(
        "factorized {} items x {} views into k={} clusters in {} sweeps (final objective {:.6e})",
        model.items(),
        model.n_views(),
        model.k,
        model.objective_trace.len(),
        model.objective_trace.last().copied().unwrap_or(0.0)
    );
    println!("model written to {}", out.display());
    if let Some(truth) = &dataset.truth {
        let acc = clustering_accuracy(&model.assignment, truth).map_err(CliError::data)?;
        let f1 = pairwise_f1(&model.assignment, truth).map_err(CliError::data)?;
        let nmi_score = nmi(&model.assignment, truth).map_err(CliError::data)?;
        println!("vs planted truth: accuracy {acc:.4}  f1 {f1:.4}  nmi {nmi_score:.4}");
    }
    Ok(())
}

fn baselines(config: &AppConfig, out: Option<&std::path::Path>) -> Result<(), CliError> {
    let reports = baseline_table::run(config)?;
    let table = baseline_table::to_tsv(&reports);
    print!("{table}");
    if let Some(path) = out {
        write_atomic(path, &table)?;
        println!("table written to {}", path.display());
    }
    Ok(())
}

fn similarity(config: &AppConfig, target: Option<u32>, out: &std::path::Path) -> Result<(), CliError> {
    let dataset = load_dataset(config, None)?;
    let weights = config.similarity.to_weights().map_err(CliError::config)?;
    let targets: Vec<u32> = match target {
        Some(t) => vec![t],
        None => (0..dataset.profiles.len() as u32).collect(),
    };
    let mut text = String::from("target\tother\tscore\n");
    for t in targets {
        let table = similarity_table(t, &dataset.profiles, &weights).map_err(CliError::data)?;
        let labeled: Vec<(String, f64)> = table
            .into_iter()
            .map(|(other, score)| (dataset.user_labels[other as usize].clone(), score))
            .collect();
        let block = similarity_table_to_string(&dataset.user_labels[t as usize], &labeled);
        text.push_str(block.lines().skip(1).collect::<Vec<_>>().join("\n").as_str());
        if !labeled.is_empty() {
            text.push('\n');
        }
    }
    write_atomic(out, &text)?;
    println!("similarity tables written to {}", out.display());
    Ok(())
}

fn keygen_cmd(
    config: &AppConfig,
    bits: Option<u64>,
    seed: Option<u64>,
    out_dir: &std::path::Path,
) -> Result<(), CliError> {
    let bits = bits.unwrap_or(config.crypto.key_bits);
    let mut rng = ChaCha20Rng::seed_from_u64(seed.unwrap_or(config.crypto.key_seed));
    let keypair = keygen(bits, &mut rng).map_err(CliError::config)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    let pk_path = out_dir.join("ppsr.pk");
    let sk_path = out_dir.join("ppsr.sk");
    write_public_key(&pk_path, &keypair)?;
    write_secret_key(&sk_path, &keypair)?;
    println!("wrote {} and {}", pk_path.display(), sk_path.display());
    Ok(())
}

fn recommend(
    config: &AppConfig,
    target: u32,
    mode: Option<String>,
    top_k: usize,
) -> Result<(), CliError> {
    let dataset = load_dataset(config, None)?;
    if target as usize >= dataset.ratings.n_users() {
        return Err(CliError::Data(format!(
            "target {target} out of range for {} users",
            dataset.ratings.n_users()
        )));
    }
    let transport = mode.unwrap_or_else(|| config.experiment.transport.clone());
    let use_socket = match transport.as_str() {
        "socket" => true,
        "in-process" => false,
        other => {
            return Err(CliError::Config(format!(
                "unknown mode {other:?} (expected \"in-process\" or \"socket\")"
            )))
        }
    };
    let weights = config.similarity.to_weights().map_err(CliError::config)?;
    let codec = FixedPointCodec::new(config.crypto.scale).map_err(CliError::config)?;
    let mut key_rng = ChaCha20Rng::seed_from_u64(config.crypto.key_seed);
    let keypair = keygen(config.crypto.key_bits, &mut key_rng).map_err(CliError::config)?;

    // Items the target already rated are known preferences: they seed the
    // clustering candidates and are excluded from the recommendations.
    let rated: Vec<(u32, u32)> = (0..dataset.ratings.n_items() as u32)
        .filter_map(|item| {
            let r = dataset.ratings.get(target, item);
            (r > 0).then_some((item, r))
        })
        .collect();
    let exclude: BTreeSet<u32> = rated.iter().map(|&(item, _)| item).collect();
    let seeds: Vec<u32> = rated
        .iter()
        .filter(|&&(_, r)| r >= config.experiment.relevance_threshold)
        .map(|&(item, _)| item)
        .collect();

    let mv_config = config.clustering.to_multiview(dataset.views.len(), None);
    let model = multiview_factorize(&dataset.views, &mv_config).map_err(CliError::data)?;
    let popularity = item_popularity(&dataset.ratings);
    let clustering = clustering_candidates(&model.assignment, &seeds, &popularity, &exclude);

    let socialized = socialized_candidates(
        &dataset.profiles,
        &weights,
        &keypair,
        &dataset.ratings,
        target,
        codec,
        config.crypto.key_seed.wrapping_add(target as u64),
        use_socket,
        &exclude,
    )?;
    let merged = merge_lists(&socialized, &clustering, top_k)?;
    println!(
        "top-{} recommendations for {} ({} transport):",
        top_k, dataset.user_labels[target as usize], transport
    );
    for (rank, item) in merged.items.iter().enumerate() {
        println!("{:2}. {}", rank + 1, dataset.item_labels[*item as usize]);
    }
    Ok(())
}

fn eval(config: &AppConfig, out_dir: &std::path::Path) -> Result<(), CliError> {
    let output = run_experiment(config)?;
    let written = write_experiment_outputs(&output, out_dir)?;
    println!(
        "evaluated {} seeds (config sha256 {})",
        output.seeds.len(),
        &output.config_digest[..16]
    );
    println!("model      k  precision  recall");
    for point in &output.median {
        println!(
            "{:<9} {:>2}  {:>9.4}  {:>6.4}",
            point.model, point.k, point.precision, point.recall
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn synth(config: &AppConfig, out_dir: &std::path::Path) -> Result<(), CliError> {
    let dataset = load_dataset(config, None)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    for (s, view) in dataset.views.iter().enumerate() {
        write_matrix(&out_dir.join(format!("view_{s}.mtx")), view.data())?;
    }
    let mut ratings = String::from("user\titem\trating\n");
    for user in 0..dataset.ratings.n_users() as u32 {
        for item in 0..dataset.ratings.n_items() as u32 {
            let r = dataset.ratings.get(user, item);
            if r > 0 {
                let _ = writeln!(ratings, "{user}\t{item}\t{r}");
            }
        }
    }
    write_atomic(&out_dir.join("ratings.tsv"), &ratings)?;
    let mut follows = String::from("follower\tfollowee\n");
    for &(a, b) in &dataset.social.follows {
        let _ = writeln!(follows, "{a}\t{b}");
    }
    write_atomic(&out_dir.join("follows.tsv"), &follows)?;
    let mut likes = String::from("user\tarticle\n");
    for &(u, a) in &dataset.social.likes {
        let _ = writeln!(likes, "{u}\t{a}");
    }
    write_atomic(&out_dir.join("likes.tsv"), &likes)?;
    for (name, events) in [
        ("comments.tsv", &dataset.social.comments),
        ("reposts.tsv", &dataset.social.reposts),
    ] {
        let mut text = String::from("user\tarticle\ttext\n");
        for e in events {
            let _ = writeln!(text, "{}\t{}\t{}", e.user, e.article, e.text);
        }
        write_atomic(&out_dir.join(name), &text)?;
    }
    let mut pubs = String::from("user\ttext\n");
    for (u, posts) in dataset.social.publications.iter().enumerate() {
        for post in posts {
            let _ = writeln!(pubs, "{u}\t{post}");
        }
    }
    write_atomic(&out_dir.join("publications.tsv"), &pubs)?;
    if let Some(truth) = &dataset.truth {
        let mut text = String::from("item\tcluster\n");
        for (item, cluster) in truth.iter().enumerate() {
            let _ = writeln!(text, "{item}\t{cluster}");
        }
        write_atomic(&out_dir.join("truth.tsv"), &text)?;
    }
    if let Some(groups) = &dataset.user_groups {
        let mut text = String::from("user\tgroup\n");
        for (user, group) in groups.iter().enumerate() {
            let _ = writeln!(text, "{user}\t{group}");
        }
        write_atomic(&out_dir.join("user_groups.tsv"), &text)?;
    }
    println!(
        "synthetic dataset written to {} (config sha256 {})",
        out_dir.display(),
        &config_digest(config)[..16]
    );
    Ok(())
}
