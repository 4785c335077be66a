//! Experiment runner CLI: dataset checks, training, evaluation,
//! parameter sweeps and end-to-end protocol runs.

mod config;
mod experiment;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use gtagcdcf::eval::{wilcoxon_signed_rank, EvalReport};
use gtagcdcf::model::{save_checkpoint, DomainMatrices};
use gtagcdcf::trainer::{substream_seed, train};

use config::{ExperimentConfig, Protocol};
use experiment::{dataset_stats, ingest, run_experiment, sweep};

#[derive(Parser)]
#[command(name = "gtagcdcf", about = "Cross-domain tag-linked collaborative filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate input files and print dataset statistics.
    IngestCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train one model on the full datasets and write a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two metric reports with the signed-rank test.
    Evaluate {
        #[arg(long)]
        report_a: PathBuf,
        #[arg(long)]
        report_b: PathBuf,
    },
    /// Evaluate one parameter over a value grid on the validation split.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        parameter: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full experimental protocol end to end.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        folds: Option<u32>,
        #[arg(long, value_delimiter = ',')]
        upl: Option<Vec<usize>>,
    },
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    folds: Option<u32>,
    upl: Option<Vec<usize>>,
) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(out) = out {
        config.output = out;
    }
    if folds.is_some() || upl.is_some() {
        if let Protocol::Upl {
            upl_values,
            folds: f,
        } = &mut config.protocol
        {
            if let Some(folds) = folds {
                *f = folds;
            }
            if let Some(upl) = upl {
                *upl_values = upl;
            }
        }
    }
    config.validate()?;
    Ok(config)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::IngestCheck { config } => {
            let config = ExperimentConfig::load(&config)?;
            let exp = ingest(&config)?;
            println!("#common tags: {}", exp.vocab.len());
            println!(
                "{:<12} {:>8} {:>8} {:>13} {:>11} {:>10} {:>10}",
                "domain", "#users", "#items", "#preferences", "sparseness", "#user-tag", "#item-tag"
            );
            for ds in &exp.datasets {
                let s = dataset_stats(ds);
                println!(
                    "{:<12} {:>8} {:>8} {:>13} {:>10.2}% {:>10} {:>10}",
                    s.name,
                    s.n_users,
                    s.n_items,
                    s.n_preferences,
                    s.sparseness * 100.0,
                    s.user_tag_relations,
                    s.item_tag_relations
                );
            }
        }
        Command::Train { config, seed, out } => {
            let config = load_config(&config, seed, out, None, None)?;
            let exp = ingest(&config)?;
            std::fs::create_dir_all(&config.output)?;
            let domains: Vec<DomainMatrices> =
                exp.datasets.iter().map(|ds| ds.matrices()).collect();
            let train_config = config
                .train
                .to_train_config(substream_seed(config.seed, "init", 0));
            let (model, trace) = train(&domains, &train_config)?;
            trace.write_csv(&config.output.join("trace.csv"))?;
            save_checkpoint(&model, &config.output.join("model.ckpt"))?;
            println!(
                "trained {} iterations, objective {:.6} -> {:.6}, converged: {}",
                trace.records.len(),
                trace.initial_objective,
                trace.final_objective(),
                trace.converged
            );
        }
        Command::Evaluate { report_a, report_b } => {
            let a = EvalReport::load(&report_a)?;
            let b = EvalReport::load(&report_b)?;
            let series_a = a.paired_series();
            let series_b = b.paired_series();
            println!(
                "{:<12} {:>5} {:>8} {:>10} {:>10} {:>12}",
                "domain", "upl", "metric", a.method, b.method, "p-value"
            );
            for (key, values_a) in &series_a {
                let Some(values_b) = series_b.get(key) else {
                    continue;
                };
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                let p = match wilcoxon_signed_rank(values_a, values_b) {
                    Ok(r) => format!("{:.6}", r.p_value),
                    Err(e) => format!("n/a ({})", e),
                };
                println!(
                    "{:<12} {:>5} {:>8} {:>10.4} {:>10.4} {:>12}",
                    key.0,
                    key.1.map(|u| u.to_string()).unwrap_or_else(|| "-".into()),
                    key.2,
                    mean(values_a),
                    mean(values_b),
                    p
                );
            }
        }
        Command::Sweep {
            config,
            parameter,
            values,
            seed,
            out,
        } => {
            let config = load_config(&config, seed, out, None, None)?;
            std::fs::create_dir_all(&config.output)?;
            let rows = sweep(&config, &parameter, &values)?;
            let csv_path = config.output.join(format!("sweep_{}.csv", parameter));
            let mut csv = String::from("param_value,domain,metric,value\n");
            for (value, domain, metric, metric_value) in &rows {
                csv.push_str(&format!("{},{},{},{}\n", value, domain, metric, metric_value));
            }
            std::fs::write(&csv_path, &csv)
                .with_context(|| format!("writing {}", csv_path.display()))?;
            print!("{}", csv);
            println!("# written to {}", csv_path.display());
        }
        Command::Run {
            config,
            seed,
            out,
            folds,
            upl,
        } => {
            let config = load_config(&config, seed, out, folds, upl)?;
            let outcome = run_experiment(&config)?;
            println!(
                "{:<12} {:>5} {:>8} {:>8} {:>18}",
                "domain", "upl", "metric", "folds", "mean +/- std"
            );
            for ((domain, upl, metric), (mean, std, n)) in outcome.report.summary() {
                println!(
                    "{:<12} {:>5} {:>8} {:>8} {:>11.4} +/- {:.4}",
                    domain,
                    upl.map(|u| u.to_string()).unwrap_or_else(|| "-".into()),
                    metric,
                    n,
                    mean,
                    std
                );
            }
            println!(
                "report: {} ({} artifacts)",
                config.output.join("report.json").display(),
                outcome.artifacts.len()
            );
        }
    }
    Ok(())
}
