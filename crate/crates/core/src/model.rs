//! The joint factorization model: objective, gradients, prediction and the
//! block-diagonal compact formulation.
//!
//! K preference matrices, K user-tag matrices and K item-tag matrices are
//! factorized simultaneously; the tag factor matrix T is shared across
//! domains and couples them. Sums run over observed entries only.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::DomainDataset;
use crate::tensor::{dot, DenseFactorMatrix, SparseMatrix};

/// Squashing function applied to inner products during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    Logistic,
    Identity,
}

impl LinkFunction {
    #[inline]
    pub fn g(self, x: f64) -> f64 {
        match self {
            LinkFunction::Logistic => 1.0 / (1.0 + (-x).exp()),
            LinkFunction::Identity => x,
        }
    }

    #[inline]
    pub fn g_prime(self, x: f64) -> f64 {
        match self {
            LinkFunction::Logistic => {
                let g = self.g(x);
                g * (1.0 - g)
            }
            LinkFunction::Identity => 1.0,
        }
    }
}

/// Tradeoff weights for the user-tag and item-tag terms plus the
/// regularization strength.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Hyperparams {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || self.lambda < 0.0 {
            return Err(Error::InvalidConfig(
                "alpha, beta and lambda must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Borrowed view of one domain's three matrices, so the objective and
/// gradient code works both on ingested datasets and on synthetic or
/// compact-form instances.
#[derive(Debug, Clone, Copy)]
pub struct DomainMatrices<'a> {
    pub r: &'a SparseMatrix,
    pub f_u: &'a SparseMatrix,
    pub f_v: &'a SparseMatrix,
}

impl<'a> DomainMatrices<'a> {
    pub fn n_users(&self) -> usize {
        self.r.n_rows()
    }

    pub fn n_items(&self) -> usize {
        self.r.n_cols()
    }
}

impl DomainDataset {
    pub fn matrices(&self) -> DomainMatrices<'_> {
        DomainMatrices {
            r: &self.r,
            f_u: &self.f_u,
            f_v: &self.f_v,
        }
    }
}

/// Latent factors: one user matrix and one item matrix per domain plus the
/// shared tag matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub d: usize,
    pub u: Vec<DenseFactorMatrix>,
    pub v: Vec<DenseFactorMatrix>,
    pub t: DenseFactorMatrix,
    pub link: LinkFunction,
    /// When set, predictions go through the link function instead of using
    /// the raw inner product.
    pub predict_through_link: bool,
}

impl FactorModel {
    pub fn n_domains(&self) -> usize {
        self.u.len()
    }

    fn check_shapes(&self, domains: &[DomainMatrices]) -> Result<()> {
        if self.u.len() != domains.len() || self.v.len() != domains.len() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} domains, data has {}",
                self.u.len(),
                domains.len()
            )));
        }
        for (k, dom) in domains.iter().enumerate() {
            if self.u[k].d() != self.d || self.v[k].d() != self.d || self.t.d() != self.d {
                return Err(Error::DimensionMismatch("inconsistent latent d".into()));
            }
            if self.u[k].n_cols() != dom.n_users()
                || self.v[k].n_cols() != dom.n_items()
                || dom.f_u.n_rows() != dom.n_users()
                || dom.f_v.n_rows() != dom.n_items()
                || dom.f_u.n_cols() != self.t.n_cols()
                || dom.f_v.n_cols() != self.t.n_cols()
            {
                return Err(Error::DimensionMismatch(format!(
                    "shape mismatch in domain {}",
                    k
                )));
            }
        }
        Ok(())
    }
}

/// The training objective: squared reconstruction error of the observed
/// preference, user-tag and item-tag entries (the latter two weighted by
/// alpha and beta) plus the Frobenius regularizer. Summation order is fixed
/// (domain, then row, then stored entry order) for reproducibility.
pub fn objective(
    model: &FactorModel,
    domains: &[DomainMatrices],
    h: &Hyperparams,
) -> Result<f64> {
    model.check_shapes(domains)?;
    let g = model.link;
    let mut total = 0.0;

    for (k, dom) in domains.iter().enumerate() {
        let u = &model.u[k];
        let v = &model.v[k];
        let mut pref = 0.0;
        for e in dom.r.iter() {
            let x = dot(u.col(e.row), v.col(e.col));
            let diff = e.value - g.g(x);
            pref += diff * diff;
        }
        total += 0.5 * pref;

        let mut user_tag = 0.0;
        for e in dom.f_u.iter() {
            let x = dot(u.col(e.row), model.t.col(e.col));
            let diff = e.value - g.g(x);
            user_tag += diff * diff;
        }
        total += 0.5 * h.alpha * user_tag;

        let mut item_tag = 0.0;
        for e in dom.f_v.iter() {
            let x = dot(v.col(e.row), model.t.col(e.col));
            let diff = e.value - g.g(x);
            item_tag += diff * diff;
        }
        total += 0.5 * h.beta * item_tag;
    }

    let mut reg = model.t.frobenius_norm_sq();
    for k in 0..model.n_domains() {
        reg += model.u[k].frobenius_norm_sq() + model.v[k].frobenius_norm_sq();
    }
    total += 0.5 * h.lambda * reg;

    if !total.is_finite() {
        return Err(Error::Diverged { iteration: 0 });
    }
    Ok(total)
}

/// Analytic gradients of [`objective`] with respect to every factor matrix.
pub struct Gradients {
    pub u: Vec<DenseFactorMatrix>,
    pub v: Vec<DenseFactorMatrix>,
    pub t: DenseFactorMatrix,
}

pub fn gradients(
    model: &FactorModel,
    domains: &[DomainMatrices],
    h: &Hyperparams,
) -> Result<Gradients> {
    model.check_shapes(domains)?;
    let g = model.link;
    let d = model.d;

    let mut grad_u: Vec<DenseFactorMatrix> = model
        .u
        .iter()
        .map(|m| DenseFactorMatrix::zeros(d, m.n_cols()))
        .collect();
    let mut grad_v: Vec<DenseFactorMatrix> = model
        .v
        .iter()
        .map(|m| DenseFactorMatrix::zeros(d, m.n_cols()))
        .collect();
    let mut grad_t = DenseFactorMatrix::zeros(d, model.t.n_cols());

    for (k, dom) in domains.iter().enumerate() {
        let u = &model.u[k];
        let v = &model.v[k];

        for e in dom.r.iter() {
            let ui = u.col(e.row);
            let vj = v.col(e.col);
            let x = dot(ui, vj);
            let w = (g.g(x) - e.value) * g.g_prime(x);
            let gu = grad_u[k].col_mut(e.row);
            for (out, &vv) in gu.iter_mut().zip(vj) {
                *out += w * vv;
            }
            let gv = grad_v[k].col_mut(e.col);
            for (out, &uu) in gv.iter_mut().zip(ui) {
                *out += w * uu;
            }
        }

        if h.alpha != 0.0 {
            for e in dom.f_u.iter() {
                let ui = u.col(e.row);
                let tl = model.t.col(e.col);
                let x = dot(ui, tl);
                let w = h.alpha * (g.g(x) - e.value) * g.g_prime(x);
                let gu = grad_u[k].col_mut(e.row);
                for (out, &tv) in gu.iter_mut().zip(tl) {
                    *out += w * tv;
                }
                let gt = grad_t.col_mut(e.col);
                for (out, &uu) in gt.iter_mut().zip(ui) {
                    *out += w * uu;
                }
            }
        }

        if h.beta != 0.0 {
            for e in dom.f_v.iter() {
                let vj = v.col(e.row);
                let tl = model.t.col(e.col);
                let x = dot(vj, tl);
                let w = h.beta * (g.g(x) - e.value) * g.g_prime(x);
                let gv = grad_v[k].col_mut(e.row);
                for (out, &tv) in gv.iter_mut().zip(tl) {
                    *out += w * tv;
                }
                let gt = grad_t.col_mut(e.col);
                for (out, &vv) in gt.iter_mut().zip(vj) {
                    *out += w * vv;
                }
            }
        }
    }

    for k in 0..model.n_domains() {
        add_scaled_in_place(&mut grad_u[k], &model.u[k], h.lambda);
        add_scaled_in_place(&mut grad_v[k], &model.v[k], h.lambda);
    }
    add_scaled_in_place(&mut grad_t, &model.t, h.lambda);

    Ok(Gradients {
        u: grad_u,
        v: grad_v,
        t: grad_t,
    })
}

fn add_scaled_in_place(target: &mut DenseFactorMatrix, source: &DenseFactorMatrix, scale: f64) {
    if scale == 0.0 {
        return;
    }
    for j in 0..target.n_cols() {
        let src = source.col(j).to_vec();
        for (out, s) in target.col_mut(j).iter_mut().zip(src) {
            *out += scale * s;
        }
    }
}

/// Predicted normalized preference: the raw inner product of the user and
/// item latent vectors, clamped to [0, 1]. With `predict_through_link` the
/// link function is applied instead of clamping the raw product.
pub fn predict(model: &FactorModel, domain: usize, user: usize, item: usize) -> Result<f64> {
    if domain >= model.n_domains() {
        return Err(Error::IndexOutOfRange(format!("domain {}", domain)));
    }
    let u = &model.u[domain];
    let v = &model.v[domain];
    if user >= u.n_cols() || item >= v.n_cols() {
        return Err(Error::IndexOutOfRange(format!(
            "user {} / item {} in domain {}",
            user, item, domain
        )));
    }
    let raw = dot(u.col(user), v.col(item));
    let score = if model.predict_through_link {
        model.link.g(raw)
    } else {
        raw
    };
    Ok(score.clamp(0.0, 1.0))
}

/// Prediction scaled back to the original rating scale of an
/// explicit-rating domain.
pub fn predict_rating(
    model: &FactorModel,
    dataset: &DomainDataset,
    domain: usize,
    user: usize,
    item: usize,
) -> Result<f64> {
    if dataset.feedback_kind != crate::ingest::FeedbackKind::ExplicitRating {
        return Err(Error::InvalidInput(
            "predict_rating on an implicit-feedback domain".into(),
        ));
    }
    Ok(predict(model, domain, user, item)? * dataset.max_preference)
}

/// The compact single-"domain" assembly: R matrices on the block diagonal,
/// tag matrices row-stacked. The compact objective on stacked factors
/// equals the per-domain sum.
pub struct CompactForm {
    pub r: SparseMatrix,
    pub f_u: SparseMatrix,
    pub f_v: SparseMatrix,
}

impl CompactForm {
    pub fn matrices(&self) -> DomainMatrices<'_> {
        DomainMatrices {
            r: &self.r,
            f_u: &self.f_u,
            f_v: &self.f_v,
        }
    }
}

pub fn assemble_compact(domains: &[DomainMatrices]) -> Result<CompactForm> {
    if domains.is_empty() {
        return Err(Error::InvalidInput("no domains to assemble".into()));
    }
    let l = domains[0].f_u.n_cols();
    let total_users: usize = domains.iter().map(|d| d.n_users()).sum();
    let total_items: usize = domains.iter().map(|d| d.n_items()).sum();

    let mut r_triplets = Vec::new();
    let mut fu_triplets = Vec::new();
    let mut fv_triplets = Vec::new();
    let mut row_off = 0;
    let mut col_off = 0;
    for dom in domains {
        for e in dom.r.iter() {
            r_triplets.push((e.row + row_off, e.col + col_off, e.value));
        }
        for e in dom.f_u.iter() {
            fu_triplets.push((e.row + row_off, e.col, e.value));
        }
        for e in dom.f_v.iter() {
            fv_triplets.push((e.row + col_off, e.col, e.value));
        }
        row_off += dom.n_users();
        col_off += dom.n_items();
    }

    Ok(CompactForm {
        r: SparseMatrix::from_triplets(total_users, total_items, r_triplets)?,
        f_u: SparseMatrix::from_triplets(total_users, l, fu_triplets)?,
        f_v: SparseMatrix::from_triplets(total_items, l, fv_triplets)?,
    })
}

/// Stacks a K-domain model into the single-domain model matching
/// [`assemble_compact`]'s matrix layout.
pub fn stack_model(model: &FactorModel) -> Result<FactorModel> {
    let u_refs: Vec<&DenseFactorMatrix> = model.u.iter().collect();
    let v_refs: Vec<&DenseFactorMatrix> = model.v.iter().collect();
    Ok(FactorModel {
        d: model.d,
        u: vec![DenseFactorMatrix::hstack(&u_refs)?],
        v: vec![DenseFactorMatrix::hstack(&v_refs)?],
        t: model.t.clone(),
        link: model.link,
        predict_through_link: model.predict_through_link,
    })
}

const CHECKPOINT_MAGIC: &str = "GTAGCDCF/1";

#[derive(serde::Serialize, serde::Deserialize)]
struct CheckpointBody {
    d: usize,
    k: usize,
    link: LinkFunction,
    predict_through_link: bool,
    n_users: Vec<usize>,
    n_items: Vec<usize>,
    n_tags: usize,
    /// Row-major d x n blocks, one per factor matrix, in U..., V..., T order.
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: Vec<f64>,
}

fn to_row_major(m: &DenseFactorMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.d() * m.n_cols());
    for r in 0..m.d() {
        for j in 0..m.n_cols() {
            out.push(m.col(j)[r]);
        }
    }
    out
}

fn from_row_major(d: usize, n_cols: usize, values: &[f64]) -> Result<DenseFactorMatrix> {
    if values.len() != d * n_cols {
        return Err(Error::BadCheckpoint(format!(
            "expected {} values, got {}",
            d * n_cols,
            values.len()
        )));
    }
    Ok(DenseFactorMatrix::from_fn(d, n_cols, |r, j| {
        values[r * n_cols + j]
    }))
}

/// Writes the model as a magic header line followed by a JSON body.
pub fn save_checkpoint(model: &FactorModel, path: &Path) -> Result<()> {
    let body = CheckpointBody {
        d: model.d,
        k: model.n_domains(),
        link: model.link,
        predict_through_link: model.predict_through_link,
        n_users: model.u.iter().map(|m| m.n_cols()).collect(),
        n_items: model.v.iter().map(|m| m.n_cols()).collect(),
        n_tags: model.t.n_cols(),
        u: model.u.iter().map(to_row_major).collect(),
        v: model.v.iter().map(to_row_major).collect(),
        t: to_row_major(&model.t),
    };
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let write = |file: &mut std::fs::File| -> std::io::Result<()> {
        writeln!(file, "{}", CHECKPOINT_MAGIC)?;
        serde_json::to_writer(&mut *file, &body)?;
        writeln!(file)
    };
    write(&mut file).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<FactorModel> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = BufReader::new(file);
    let mut magic = String::new();
    reader.read_line(&mut magic).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if magic.trim_end() != CHECKPOINT_MAGIC {
        return Err(Error::BadCheckpoint(format!(
            "bad magic {:?}, expected {:?}",
            magic.trim_end(),
            CHECKPOINT_MAGIC
        )));
    }
    let body: CheckpointBody = serde_json::from_reader(reader)
        .map_err(|e| Error::BadCheckpoint(e.to_string()))?;
    if body.u.len() != body.k || body.v.len() != body.k || body.n_users.len() != body.k {
        return Err(Error::BadCheckpoint("inconsistent domain count".into()));
    }
    let u = body
        .u
        .iter()
        .zip(&body.n_users)
        .map(|(vals, &n)| from_row_major(body.d, n, vals))
        .collect::<Result<Vec<_>>>()?;
    let v = body
        .v
        .iter()
        .zip(&body.n_items)
        .map(|(vals, &n)| from_row_major(body.d, n, vals))
        .collect::<Result<Vec<_>>>()?;
    let t = from_row_major(body.d, body.n_tags, &body.t)?;
    Ok(FactorModel {
        d: body.d,
        u,
        v,
        t,
        link: body.link,
        predict_through_link: body.predict_through_link,
    })
}
