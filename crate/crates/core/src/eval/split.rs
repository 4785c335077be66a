//! Experimental splitting protocols: the user-profile-length (UPL) holdout
//! protocol and plain 5-fold cross-validation over preference entries.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::DomainDataset;
use crate::tensor::SparseMatrix;

use super::metrics::HoldoutSet;

/// Test and validation users must have at least this many preferences so
/// that enough holdout items remain even at UPL=15.
pub const MIN_EVAL_PREFERENCES: usize = 20;

/// One retained evaluation user: the observed profile that joins the
/// training data and the held-out remainder. Values are normalized (as
/// stored in the dataset's preference matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalUser {
    pub user: usize,
    pub profile: Vec<(usize, f64)>,
    pub holdout: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct UplSplit {
    pub fold: u32,
    pub upl: usize,
    pub train_users: Vec<usize>,
    pub validation_users: Vec<usize>,
    pub test_users: Vec<usize>,
    /// Test users that passed the minimum-preference filter, with profiles.
    pub test_eval: Vec<EvalUser>,
    /// Validation users that passed the filter, with profiles.
    pub validation_eval: Vec<EvalUser>,
}

impl UplSplit {
    /// Training matrix for this split: full rows of training users plus
    /// the UPL-sized profiles of the retained evaluation users.
    pub fn training_matrix(&self, dataset: &DomainDataset) -> Result<SparseMatrix> {
        let mut triplets = Vec::new();
        for &u in &self.train_users {
            for e in dataset.r.row(u) {
                triplets.push((e.row, e.col, e.value));
            }
        }
        for eval_user in self.test_eval.iter().chain(&self.validation_eval) {
            for &(item, value) in &eval_user.profile {
                triplets.push((eval_user.user, item, value));
            }
        }
        SparseMatrix::from_triplets(dataset.r.n_rows(), dataset.r.n_cols(), triplets)
    }

    /// Holdout ground truth in the original preference scale.
    pub fn holdout_set(&self, dataset: &DomainDataset, validation: bool) -> HoldoutSet {
        let users = if validation {
            &self.validation_eval
        } else {
            &self.test_eval
        };
        let mut set = HoldoutSet::default();
        for eval_user in users {
            set.users.insert(
                eval_user.user,
                eval_user
                    .holdout
                    .iter()
                    .map(|&(item, value)| (item, value * dataset.max_preference))
                    .collect(),
            );
        }
        set
    }
}

fn sample_profile(
    rng: &mut ChaCha8Rng,
    dataset: &DomainDataset,
    user: usize,
    upl: usize,
) -> Option<EvalUser> {
    let row = dataset.r.row(user);
    if row.len() < MIN_EVAL_PREFERENCES {
        return None;
    }
    let mut indices: Vec<usize> = (0..row.len()).collect();
    indices.shuffle(rng);
    let chosen: BTreeSet<usize> = indices[..upl].iter().copied().collect();
    let mut profile = Vec::with_capacity(upl);
    let mut holdout = Vec::with_capacity(row.len() - upl);
    for (i, e) in row.iter().enumerate() {
        if chosen.contains(&i) {
            profile.push((e.col, e.value));
        } else {
            holdout.push((e.col, e.value));
        }
    }
    Some(EvalUser {
        user,
        profile,
        holdout,
    })
}

/// Splits users 60/20/20 into train/validation/test and samples an
/// UPL-sized observed profile for every retained evaluation user.
/// Deterministic given (seed, fold).
pub fn make_upl_split(
    dataset: &DomainDataset,
    upl: usize,
    fold: u32,
    seed: u64,
) -> Result<UplSplit> {
    if !matches!(upl, 5 | 10 | 15) {
        return Err(Error::InvalidConfig(format!(
            "UPL must be 5, 10 or 15, got {}",
            upl
        )));
    }
    let n = dataset.n_users();
    if n < 5 {
        return Err(Error::UserPoolTooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fold as u64);
    let mut users: Vec<usize> = (0..n).collect();
    users.shuffle(&mut rng);

    let n_train = (n as f64 * 0.6).floor() as usize;
    let n_val = (n as f64 * 0.2).floor() as usize;
    let mut train_users = users[..n_train].to_vec();
    let mut validation_users = users[n_train..n_train + n_val].to_vec();
    let mut test_users = users[n_train + n_val..].to_vec();
    train_users.sort_unstable();
    validation_users.sort_unstable();
    test_users.sort_unstable();

    let mut validation_eval = Vec::new();
    for &u in &validation_users {
        if let Some(eval_user) = sample_profile(&mut rng, dataset, u, upl) {
            validation_eval.push(eval_user);
        }
    }
    let mut test_eval = Vec::new();
    for &u in &test_users {
        if let Some(eval_user) = sample_profile(&mut rng, dataset, u, upl) {
            test_eval.push(eval_user);
        }
    }

    Ok(UplSplit {
        fold,
        upl,
        train_users,
        validation_users,
        test_users,
        test_eval,
        validation_eval,
    })
}

#[derive(Debug, Clone)]
pub struct CvSplit {
    /// Disjoint folds of preference entry indices (positions in the
    /// dataset's entry order), partitioning all entries.
    pub folds: Vec<Vec<usize>>,
    /// Index of the fold reserved for hyperparameter tuning.
    pub tuning_fold: usize,
}

/// Random 5-way partition of the preference entries; one fold is tagged as
/// the tuning fold. Deterministic given the seed.
pub fn make_cv_split(dataset: &DomainDataset, seed: u64) -> Result<CvSplit> {
    let nnz = dataset.r.nnz();
    if nnz == 0 {
        return Err(Error::EmptyEvalSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..nnz).collect();
    indices.shuffle(&mut rng);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); 5];
    for (pos, idx) in indices.into_iter().enumerate() {
        folds[pos % 5].push(idx);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    let tuning_fold = (rand::Rng::gen_range(&mut rng, 0..5u32)) as usize;
    Ok(CvSplit { folds, tuning_fold })
}

/// Writes the split as line-oriented text so folds can be re-materialized
/// exactly: role, user index and (for evaluation users) the profile item
/// indices.
pub fn write_upl_manifest(split: &UplSplit, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let write = |file: &mut std::fs::File| -> std::io::Result<()> {
        writeln!(file, "# upl-split fold={} upl={}", split.fold, split.upl)?;
        for &u in &split.train_users {
            writeln!(file, "train\t{}", u)?;
        }
        for eval_user in &split.validation_eval {
            let items: Vec<String> = eval_user
                .profile
                .iter()
                .map(|(item, _)| item.to_string())
                .collect();
            writeln!(file, "validation\t{}\t{}", eval_user.user, items.join(","))?;
        }
        for eval_user in &split.test_eval {
            let items: Vec<String> = eval_user
                .profile
                .iter()
                .map(|(item, _)| item.to_string())
                .collect();
            writeln!(file, "test\t{}\t{}", eval_user.user, items.join(","))?;
        }
        Ok(())
    };
    write(&mut file).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a manifest back as (role, user, profile items) triples.
pub fn read_upl_manifest(path: &Path) -> Result<Vec<(String, usize, Vec<usize>)>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        if fields.len() < 2 {
            return Err(parse_err("expected at least 2 fields".into()));
        }
        let user: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("bad user index {:?}", fields[1])))?;
        let items = if fields.len() > 2 && !fields[2].is_empty() {
            fields[2]
                .split(',')
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(format!("bad item index {:?}", s)))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        out.push((fields[0].to_string(), user, items));
    }
    Ok(out)
}
