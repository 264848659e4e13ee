//! Command-line front end: generate datasets, reconstruct, classify, and
//! run the experiment harnesses.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use htl::baselines::{local_classify, shallow_classify, trivial_classify, BaselineKind, LocalKind};
use htl::compress::{compress, write_histogram_csv, CompressionScheme};
use htl::experiment::{
    run_count_tv_experiment, run_separation_experiment, write_count_tv_csv, write_report_csv,
    write_report_json, ExperimentConfig,
};
use htl::io;
use htl::label::LabelId;
use htl::model::{ModelParams, ModelVariant, Perm, Regime};
use htl::par::Parallelism;
use htl::reconstruct::{reconstruct_tree, result_to_json, ReconstructParams};
use htl::rng::{stream, StreamTag};
use htl::sample::{generate_instance, make_dataset, sample_model, with_instance, InstanceSpec, RootSpec};
use htl::tree::TreeTopology;

#[derive(Parser)]
#[command(name = "htl", about = "Hierarchical tree labeling: simulation and inference lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for data-parallel sections (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labeled dataset from one of the generative models.
    Generate {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        h: u32,
        #[arg(long)]
        q: u16,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        lambda: f64,
        /// IIDM, VRM, or FIM.
        #[arg(long)]
        model: String,
        /// random or shared (adversarial parameters are API-only).
        #[arg(long, default_value = "random")]
        regime: String,
        #[arg(long)]
        h0: u32,
        #[arg(long)]
        h1: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the full generator state (all nodes + edge parameters).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Recover the tree and leaf labels from a dataset file.
    Reconstruct {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        out: PathBuf,
        /// Channel copy probability the data was generated with.
        #[arg(long)]
        lambda: f64,
        /// File carrying `rewire <level> <perm>` lines (FIM datasets).
        #[arg(long)]
        rewire: Option<PathBuf>,
    },
    /// Label the unlabeled rows with one baseline classifier.
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        /// local_nn, local_ml, shallow_nb, shallow_s<width>, or trivial.
        #[arg(long)]
        baseline: String,
        #[arg(long)]
        out: PathBuf,
        /// Channel parameter (local_ml).
        #[arg(long)]
        lambda: Option<f64>,
        /// Assumed path depth (local_ml).
        #[arg(long)]
        ml_depth: Option<u32>,
        /// Also dump the compressed histograms as CSV.
        #[arg(long)]
        histograms_out: Option<PathBuf>,
    },
    /// Run separation experiments from a JSON config file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Census total-variation decay across tree heights.
    CountTv {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        q: u16,
        #[arg(long)]
        k: usize,
        /// Comma-separated heights, e.g. 2,4,6,8.
        #[arg(long)]
        h_list: String,
        #[arg(long)]
        samples: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parallelism(workers: usize) -> Parallelism {
    if workers == 0 {
        Parallelism::default()
    } else {
        Parallelism::Workers(workers)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let par = parallelism(cli.workers);
    match cli.command {
        Command::Generate { d, h, q, k, lambda, model, regime, h0, h1, seed, out, truth } => {
            let variant = ModelVariant::parse(&model)
                .with_context(|| format!("unknown model {model:?} (expected IIDM, VRM, or FIM)"))?;
            let regime = Regime::parse(&regime)
                .with_context(|| format!("unknown regime {regime:?}"))?;
            if regime == Regime::Adversarial {
                bail!("adversarial parameters must be supplied through the library API");
            }
            let tree = TreeTopology::new(d, h)?;
            let mut params = ModelParams::new(variant, q, k, lambda, seed);
            params.regime = regime;
            if variant == ModelVariant::Fim {
                params.rewiring = Some(
                    (1..=h)
                        .map(|level| {
                            let mut rng = stream(seed, StreamTag::Rewiring, level, 0);
                            htl::model::random_rewiring(k, &mut rng)
                        })
                        .collect(),
                );
            }
            let gt = sample_model(&tree, &params, RootSpec::Uniform, par)?;
            let (labels, sample_set) = generate_instance(&tree, InstanceSpec { h0, h1 }, seed)?;
            let gt = with_instance(gt, labels, sample_set);
            let data = make_dataset(&gt)?;
            io::write_dataset(&out, &data)?;
            if let Some(path) = truth {
                io::write_ground_truth(&path, &gt)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reconstruct { input, r, out, lambda, rewire } => {
            let data = io::read_dataset(&input)?;
            let mut params = ReconstructParams::new(lambda, r);
            params.par = par;
            if let Some(path) = rewire {
                let truth = io::read_ground_truth(&path)?;
                let mut rewiring: Vec<(u32, Perm)> = truth.rewiring;
                rewiring.sort_by_key(|(level, _)| *level);
                params.rewiring = Some(rewiring.into_iter().map(|(_, p)| p).collect());
            }
            match reconstruct_tree(&data, &params) {
                Ok(result) => {
                    let json = result_to_json(&result);
                    std::fs::write(&out, serde_json::to_string_pretty(&json)?)?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    let json = serde_json::json!({
                        "tree": serde_json::Value::Null,
                        "labels": serde_json::Value::Null,
                        "diagnostics": { "failure": e.to_string() },
                    });
                    std::fs::write(&out, serde_json::to_string_pretty(&json)?)?;
                    eprintln!("reconstruction failed: {e}");
                    Ok(ExitCode::from(2))
                }
            }
        }
        Command::Classify { input, baseline, out, lambda, ml_depth, histograms_out } => {
            let data = io::read_dataset(&input)?;
            let kind = parse_baseline(&baseline)?;
            let k = data.header.k;
            let predictions: Vec<(String, Option<LabelId>)> = match kind {
                BaselineKind::LocalNn | BaselineKind::LocalMl => {
                    let local_kind = match kind {
                        BaselineKind::LocalNn => LocalKind::NearestNeighbor,
                        _ => LocalKind::MaxLikelihood {
                            lambda: lambda
                                .context("--lambda is required for the local_ml baseline")?,
                            depth: ml_depth
                                .context("--ml-depth is required for the local_ml baseline")?,
                        },
                    };
                    let labeled: Vec<_> =
                        data.labeled.iter().map(|(_, r, l)| (r.clone(), *l)).collect();
                    data.unlabeled
                        .iter()
                        .map(|(node, rep)| {
                            (node.to_string(), local_classify(rep, &labeled, local_kind, data.header.q))
                        })
                        .collect()
                }
                BaselineKind::ShallowNb | BaselineKind::ShallowS(_) | BaselineKind::Trivial => {
                    let scheme = match kind {
                        BaselineKind::ShallowS(s) => CompressionScheme::windows(k, s),
                        _ => CompressionScheme::canonical(k),
                    };
                    let compressed = compress(&data, &scheme)?;
                    if let Some(path) = &histograms_out {
                        write_histogram_csv(path, &compressed)?;
                    }
                    let preds = match kind {
                        BaselineKind::Trivial => {
                            vec![trivial_classify(&compressed); data.unlabeled.len()]
                        }
                        _ => shallow_classify(&compressed, 1.0),
                    };
                    data.unlabeled
                        .iter()
                        .zip(preds)
                        .map(|((node, _), p)| (node.to_string(), p))
                        .collect()
                }
            };
            let mut w = csv::Writer::from_path(&out)?;
            w.write_record(["leaf", "label"])?;
            for (leaf, label) in predictions {
                w.write_record([leaf, label.map(|l| l.to_string()).unwrap_or_else(|| "-".into())])?;
            }
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { config, out_dir } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let configs: Vec<ExperimentConfig> = match serde_json::from_str::<ExperimentConfig>(&text)
            {
                Ok(single) => vec![single],
                Err(_) => serde_json::from_str(&text).context("config must be an experiment object or an array of them")?,
            };
            std::fs::create_dir_all(&out_dir)?;
            let started = Instant::now();
            let report = run_separation_experiment(&configs, par)?;
            let elapsed = started.elapsed();
            write_report_csv(&out_dir.join("report.csv"), &report)?;
            write_report_json(&out_dir.join("report.json"), &report)?;
            // Wall-clock timing is scheduling-dependent; it lives outside
            // the deterministic report files.
            std::fs::write(
                out_dir.join("timing.txt"),
                format!("wall_seconds={}\n", elapsed.as_secs_f64()),
            )?;
            if report.any_failures() {
                eprintln!("one or more trials recorded reconstruction failures");
                Ok(ExitCode::from(2))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::CountTv { d, lambda, q, k, h_list, samples, seed, out } => {
            let heights: Vec<u32> = h_list
                .split(',')
                .map(|t| t.trim().parse::<u32>())
                .collect::<Result<_, _>>()
                .context("bad --h-list")?;
            let rows = run_count_tv_experiment(d, lambda, q, k, &heights, samples, seed, par)?;
            write_count_tv_csv(&out, &rows)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_baseline(name: &str) -> Result<BaselineKind> {
    match name {
        "local_nn" => Ok(BaselineKind::LocalNn),
        "local_ml" => Ok(BaselineKind::LocalMl),
        "shallow_nb" => Ok(BaselineKind::ShallowNb),
        "trivial" => Ok(BaselineKind::Trivial),
        other => {
            if let Some(width) = other.strip_prefix("shallow_s") {
                let s: usize = width.parse().context("bad shallow_s width")?;
                if s == 0 {
                    bail!("shallow_s width must be at least 1");
                }
                return Ok(BaselineKind::ShallowS(s));
            }
            bail!("unknown baseline {other:?}")
        }
    }
}
