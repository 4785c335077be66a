//! End-to-end experiment execution: ingestion, per-fold training,
//! evaluation and artifact writing.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use gtagcdcf::baselines::NeighborhoodModel;
use gtagcdcf::eval::{
    make_cv_split, make_upl_split, mae, mean_average_precision, rank_items, relevance_labels,
    write_upl_manifest, EvalReport, HoldoutSet, MetricRecord, UplSplit,
};
use gtagcdcf::ingest::{
    build_domain, build_tag_vocabulary, parse_interactions, parse_tag_assignments, DomainDataset,
    TagVocabulary,
};
use gtagcdcf::model::{predict, save_checkpoint, DomainMatrices, FactorModel};
use gtagcdcf::tensor::SparseMatrix;
use gtagcdcf::trainer::{substream_seed, train, TrainConfig};

use crate::config::{ExperimentConfig, Method, Metric, Protocol};

/// Relevance threshold coefficient for implicit-feedback ranking.
pub const RELEVANCE_COEFFICIENT: f64 = 0.7;

pub struct IngestedExperiment {
    pub vocab: TagVocabulary,
    pub datasets: Vec<DomainDataset>,
}

pub fn ingest(config: &ExperimentConfig) -> Result<IngestedExperiment> {
    let mut per_domain_assignments = Vec::new();
    let mut per_domain_interactions = Vec::new();
    for spec in &config.domains {
        per_domain_interactions.push(
            parse_interactions(&spec.interactions)
                .with_context(|| format!("domain {:?} interactions", spec.name))?,
        );
        per_domain_assignments.push(
            parse_tag_assignments(&spec.tags)
                .with_context(|| format!("domain {:?} tags", spec.name))?,
        );
    }
    let vocab = build_tag_vocabulary(&per_domain_assignments)?;
    let mut datasets = Vec::new();
    for ((spec, interactions), assignments) in config
        .domains
        .iter()
        .zip(&per_domain_interactions)
        .zip(&per_domain_assignments)
    {
        datasets.push(build_domain(
            &spec.name,
            interactions,
            assignments,
            &vocab,
            spec.feedback,
        )?);
    }
    Ok(IngestedExperiment { vocab, datasets })
}

/// Table-I-style statistics for one domain.
#[derive(Debug, Serialize)]
pub struct DomainStats {
    pub name: String,
    pub n_users: usize,
    pub n_items: usize,
    pub n_preferences: usize,
    pub sparseness: f64,
    pub user_tag_relations: usize,
    pub item_tag_relations: usize,
}

pub fn dataset_stats(dataset: &DomainDataset) -> DomainStats {
    let cells = dataset.n_users() * dataset.n_items();
    DomainStats {
        name: dataset.name.clone(),
        n_users: dataset.n_users(),
        n_items: dataset.n_items(),
        n_preferences: dataset.r.nnz(),
        sparseness: if cells == 0 {
            0.0
        } else {
            1.0 - dataset.r.nnz() as f64 / cells as f64
        },
        user_tag_relations: dataset.f_u.nnz(),
        item_tag_relations: dataset.f_v.nnz(),
    }
}

/// Raw-scale rating matrix from normalized training entries.
fn denormalized(matrix: &SparseMatrix, max_preference: f64) -> Result<SparseMatrix> {
    Ok(SparseMatrix::from_triplets(
        matrix.n_rows(),
        matrix.n_cols(),
        matrix
            .iter()
            .map(|e| (e.row, e.col, e.value * max_preference)),
    )?)
}

/// Scores every holdout item of every holdout user and reduces to the
/// domain's metric value and sample size.
fn evaluate_holdout(
    metric: Metric,
    holdout: &HoldoutSet,
    mut score: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<(f64, usize)> {
    match metric {
        Metric::Mae => {
            let mut err = None;
            let value = mae(
                |u, i| match score(u, i) {
                    Ok(s) => s,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                },
                holdout,
            )?;
            if let Some(e) = err {
                return Err(e);
            }
            Ok((value, holdout.n_pairs()))
        }
        Metric::Map => {
            let mut per_user = Vec::new();
            for (&user, pairs) in &holdout.users {
                let counts: Vec<f64> = pairs.iter().map(|&(_, c)| c).collect();
                let labels = match relevance_labels(&counts, RELEVANCE_COEFFICIENT) {
                    Ok(l) => l,
                    Err(gtagcdcf::Error::NoRelevance) => continue,
                    Err(e) => return Err(e.into()),
                };
                let relevant: HashSet<usize> = pairs
                    .iter()
                    .zip(&labels)
                    .filter(|(_, &rel)| rel)
                    .map(|(&(item, _), _)| item)
                    .collect();
                let mut scored = Vec::with_capacity(pairs.len());
                for &(item, _) in pairs {
                    scored.push((item, score(user, item)?));
                }
                let ranked = rank_items(&scored);
                per_user.push(ranked.iter().map(|item| relevant.contains(item)).collect());
            }
            let outcome = mean_average_precision(&per_user)?;
            Ok((outcome.value, outcome.evaluated))
        }
    }
}

/// Predictor trained for one fold, covering all domains of the experiment.
enum FoldModel {
    Factor {
        /// One joint model, or one single-domain model per domain.
        models: Vec<FactorModel>,
        joint: bool,
    },
    Neighborhood(Vec<NeighborhoodModel>),
}

impl FoldModel {
    /// Score in the original preference scale of the domain.
    fn score(
        &mut self,
        datasets: &[DomainDataset],
        domain: usize,
        user: usize,
        item: usize,
    ) -> Result<f64> {
        match self {
            FoldModel::Factor { models, joint } => {
                let (model, k) = if *joint {
                    (&models[0], domain)
                } else {
                    (&models[domain], 0)
                };
                Ok(predict(model, k, user, item)? * datasets[domain].max_preference)
            }
            FoldModel::Neighborhood(models) => Ok(models[domain].predict(user, item)?),
        }
    }
}

fn train_fold(
    config: &ExperimentConfig,
    datasets: &[DomainDataset],
    training: &[SparseMatrix],
    train_config: &TrainConfig,
    out_dir: &Path,
) -> Result<FoldModel> {
    match config.method {
        Method::Gtagcdcf => {
            let domains: Vec<DomainMatrices> = datasets
                .iter()
                .zip(training)
                .map(|(ds, r)| DomainMatrices {
                    r,
                    f_u: &ds.f_u,
                    f_v: &ds.f_v,
                })
                .collect();
            let (model, trace) = train(&domains, train_config)?;
            trace.write_csv(&out_dir.join("trace.csv"))?;
            save_checkpoint(&model, &out_dir.join("model.ckpt"))?;
            Ok(FoldModel::Factor {
                models: vec![model],
                joint: true,
            })
        }
        Method::Pmf => {
            let pmf_cfg = TrainConfig {
                hyperparams: gtagcdcf::model::Hyperparams {
                    alpha: 0.0,
                    beta: 0.0,
                    lambda: train_config.hyperparams.lambda,
                },
                ..*train_config
            };
            let mut models = Vec::new();
            for (k, (ds, r)) in datasets.iter().zip(training).enumerate() {
                let domains = [DomainMatrices {
                    r,
                    f_u: &ds.f_u,
                    f_v: &ds.f_v,
                }];
                let cfg = TrainConfig {
                    seed: substream_seed(pmf_cfg.seed, "pmf-domain", k as u64),
                    ..pmf_cfg
                };
                let (model, trace) = train(&domains, &cfg)?;
                trace.write_csv(&out_dir.join(format!("trace_{}.csv", ds.name)))?;
                save_checkpoint(&model, &out_dir.join(format!("model_{}.ckpt", ds.name)))?;
                models.push(model);
            }
            Ok(FoldModel::Factor {
                models,
                joint: false,
            })
        }
        Method::Ubcf => {
            let mut models = Vec::new();
            for (ds, r) in datasets.iter().zip(training) {
                let raw = denormalized(r, ds.max_preference)?;
                models.push(NeighborhoodModel::new(raw, config.neighborhood)?);
            }
            Ok(FoldModel::Neighborhood(models))
        }
    }
}

fn fold_dir(output: &Path, upl: Option<usize>, fold: u32) -> PathBuf {
    match upl {
        Some(u) => output.join(format!("upl{}", u)).join(format!("fold{}", fold)),
        None => output.join("cv").join(format!("fold{}", fold)),
    }
}

pub struct RunOutcome {
    pub report: EvalReport,
    pub artifacts: Vec<PathBuf>,
}

fn method_name(method: Method) -> &'static str {
    match method {
        Method::Gtagcdcf => "gtagcdcf",
        Method::Pmf => "pmf",
        Method::Ubcf => "ubcf",
    }
}

/// Runs one fold of the UPL protocol and appends its metric records.
#[allow(clippy::too_many_arguments)]
fn run_upl_fold(
    config: &ExperimentConfig,
    exp: &IngestedExperiment,
    upl: usize,
    fold: u32,
    validation: bool,
    report: &mut EvalReport,
    artifacts: &mut Vec<PathBuf>,
) -> Result<()> {
    let out_dir = fold_dir(&config.output, Some(upl), fold);
    std::fs::create_dir_all(&out_dir)?;

    let mut splits: Vec<UplSplit> = Vec::new();
    let mut training = Vec::new();
    for (k, ds) in exp.datasets.iter().enumerate() {
        let split_seed = substream_seed(config.seed, "split", k as u64);
        let split = make_upl_split(ds, upl, fold, split_seed)?;
        let manifest = out_dir.join(format!("split_{}.txt", ds.name));
        write_upl_manifest(&split, &manifest)?;
        artifacts.push(manifest);
        training.push(split.training_matrix(ds)?);
        splits.push(split);
    }

    let train_config = config
        .train
        .to_train_config(substream_seed(config.seed, "init", fold as u64));
    let mut fold_model = train_fold(config, &exp.datasets, &training, &train_config, &out_dir)?;

    for (k, (spec, split)) in config.domains.iter().zip(&splits).enumerate() {
        let holdout = split.holdout_set(&exp.datasets[k], validation);
        if holdout.users.is_empty() {
            bail!(
                "domain {:?}: no qualifying evaluation users at UPL={} fold {}",
                spec.name,
                upl,
                fold
            );
        }
        let datasets = &exp.datasets;
        let (value, n) = evaluate_holdout(spec.metric, &holdout, |u, i| {
            fold_model.score(datasets, k, u, i)
        })?;
        report.push(MetricRecord {
            domain: spec.name.clone(),
            fold,
            upl: Some(upl as u32),
            metric: spec.metric.name().to_string(),
            value,
            n,
        });
    }
    Ok(())
}

fn run_cv(
    config: &ExperimentConfig,
    exp: &IngestedExperiment,
    report: &mut EvalReport,
    artifacts: &mut Vec<PathBuf>,
) -> Result<()> {
    // 5 disjoint folds per domain; the tuning fold never serves as test.
    let cv_splits: Vec<_> = exp
        .datasets
        .iter()
        .enumerate()
        .map(|(k, ds)| make_cv_split(ds, substream_seed(config.seed, "split", k as u64)))
        .collect::<gtagcdcf::Result<Vec<_>>>()?;

    let mut fold_no = 0;
    for test_fold in 0..5 {
        if cv_splits.iter().any(|cv| cv.tuning_fold == test_fold) {
            continue;
        }
        fold_no += 1;
        let out_dir = fold_dir(&config.output, None, fold_no);
        std::fs::create_dir_all(&out_dir)?;

        let mut training = Vec::new();
        let mut holdouts = Vec::new();
        for (ds, cv) in exp.datasets.iter().zip(&cv_splits) {
            let held: HashSet<usize> = cv.folds[test_fold].iter().copied().collect();
            let entries: Vec<_> = ds.r.iter().collect();
            let train_matrix = SparseMatrix::from_triplets(
                ds.r.n_rows(),
                ds.r.n_cols(),
                entries
                    .iter()
                    .enumerate()
                    .filter(|(idx, _)| !held.contains(idx))
                    .map(|(_, e)| (e.row, e.col, e.value)),
            )?;
            let mut holdout = HoldoutSet::default();
            for &idx in &cv.folds[test_fold] {
                let e = entries[idx];
                holdout
                    .users
                    .entry(e.row)
                    .or_default()
                    .push((e.col, e.value * ds.max_preference));
            }
            training.push(train_matrix);
            holdouts.push(holdout);
        }

        let train_config = config
            .train
            .to_train_config(substream_seed(config.seed, "init", fold_no as u64));
        let mut fold_model =
            train_fold(config, &exp.datasets, &training, &train_config, &out_dir)?;
        artifacts.push(out_dir.clone());

        for (k, spec) in config.domains.iter().enumerate() {
            let datasets = &exp.datasets;
            let (value, n) = evaluate_holdout(spec.metric, &holdouts[k], |u, i| {
                fold_model.score(datasets, k, u, i)
            })?;
            report.push(MetricRecord {
                domain: spec.name.clone(),
                fold: fold_no,
                upl: None,
                metric: spec.metric.name().to_string(),
                value,
                n,
            });
        }
    }
    Ok(())
}

/// Full protocol run on the test split. Writes split manifests, traces,
/// checkpoints and the metric report under the configured output
/// directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    let exp = ingest(config)?;
    std::fs::create_dir_all(&config.output)?;
    let mut report = EvalReport {
        method: method_name(config.method).to_string(),
        ..Default::default()
    };
    let mut artifacts = Vec::new();

    match &config.protocol {
        Protocol::Upl { upl_values, folds } => {
            for &upl in upl_values {
                for fold in 1..=*folds {
                    run_upl_fold(config, &exp, upl, fold, false, &mut report, &mut artifacts)?;
                }
            }
        }
        Protocol::Cv => run_cv(config, &exp, &mut report, &mut artifacts)?,
    }

    let report_path = config.output.join("report.json");
    report.save(&report_path)?;
    artifacts.push(report_path);

    let manifest_path = config.output.join("run_manifest.json");
    let listed: Vec<String> = artifacts
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&listed)?)?;

    // Timestamps live in a separate metadata file so reruns stay
    // byte-identical elsewhere.
    let meta_path = config.output.join("run_meta.json");
    let meta = serde_json::json!({
        "unix_time": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        "method": method_name(config.method),
        "seed": config.seed,
    });
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;

    Ok(RunOutcome { report, artifacts })
}

/// One validation-set evaluation per parameter value, all other settings
/// held fixed. Returns `(value, domain, metric, metric_value)` rows.
pub fn sweep(
    config: &ExperimentConfig,
    parameter: &str,
    values: &[f64],
) -> Result<Vec<(f64, String, String, f64)>> {
    if values.is_empty() {
        bail!("empty sweep value list");
    }
    let exp = ingest(config)?;
    let (upl, fold) = match &config.protocol {
        Protocol::Upl { upl_values, .. } => (upl_values[0], 1),
        Protocol::Cv => bail!("sweep requires the upl protocol (validation users)"),
    };

    let mut rows = Vec::new();
    for &value in values {
        let mut swept = config.clone();
        match parameter {
            "alpha" => swept.train.alpha = value,
            "beta" => swept.train.beta = value,
            "lambda" => swept.train.lambda = value,
            "d" => {
                if value <= 0.0 || value.fract() != 0.0 {
                    bail!("d sweep values must be positive integers");
                }
                swept.train.d = value as usize;
            }
            other => bail!(
                "unknown sweep parameter {:?} (expected alpha, beta, lambda or d)",
                other
            ),
        }
        swept.output = config.output.join(format!("sweep_{}_{}", parameter, value));
        let mut report = EvalReport {
            method: method_name(config.method).to_string(),
            ..Default::default()
        };
        let mut artifacts = Vec::new();
        run_upl_fold(&swept, &exp, upl, fold, true, &mut report, &mut artifacts)?;
        for record in &report.records {
            rows.push((
                value,
                record.domain.clone(),
                record.metric.clone(),
                record.value,
            ));
        }
    }
    Ok(rows)
}
