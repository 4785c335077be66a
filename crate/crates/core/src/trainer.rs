//! Alternating full-batch gradient descent with per-step halving line
//! search and a relative-decrease stop condition.
//!
//! One iteration sweeps the domains in order; for each domain the step size
//! starts at 1 and is halved until the joint candidate update of that
//! domain's user factors, item factors and the shared tag factors strictly
//! decreases the objective. The tag gradient is always the full
//! cross-domain sum.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{gradients, objective, DomainMatrices, FactorModel, Hyperparams, LinkFunction};
use crate::tensor::DenseFactorMatrix;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub hyperparams: Hyperparams,
    pub d: usize,
    /// Stop when the relative objective decrease of a sweep drops to this.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Step halvings allowed per line search before giving up on the step.
    pub max_halvings: usize,
    pub init_scale: f64,
    pub seed: u64,
    pub link: LinkFunction,
    pub predict_through_link: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        if self.d == 0 {
            return Err(Error::InvalidConfig("d must be >= 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be > 0".into()));
        }
        if self.max_iterations == 0 || self.max_halvings == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations and max_halvings must be >= 1".into(),
            ));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::InvalidConfig("init_scale must be > 0".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hyperparams: Hyperparams {
                alpha: 0.1,
                beta: 0.1,
                lambda: 0.01,
            },
            d: 10,
            epsilon: 1e-4,
            max_iterations: 500,
            max_halvings: 40,
            init_scale: 0.01,
            seed: 0,
            link: LinkFunction::Logistic,
            predict_through_link: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceRecord {
    /// Sweep counter, 1-based.
    pub t: usize,
    /// Objective after the sweep.
    pub objective: f64,
    /// Step size accepted in the last domain step of the sweep.
    pub eta: f64,
    /// Halvings spent across the whole sweep.
    pub halvings: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub initial_objective: f64,
    pub records: Vec<TraceRecord>,
    pub converged: bool,
}

impl TrainTrace {
    pub fn final_objective(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.objective)
            .unwrap_or(self.initial_objective)
    }

    /// One CSV row per iteration: `t,objective,eta,halvings`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let write = |file: &mut std::fs::File| -> std::io::Result<()> {
            writeln!(file, "t,objective,eta,halvings")?;
            for r in &self.records {
                writeln!(file, "{},{},{},{}", r.t, r.objective, r.eta, r.halvings)?;
            }
            Ok(())
        };
        write(&mut file).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Fills all factor matrices with i.i.d. values uniform in
/// (0, init_scale], deterministically from the seed. Domains are drawn in
/// order (U then V per domain), then T.
pub fn init_model(domains: &[DomainMatrices], config: &TrainConfig) -> Result<FactorModel> {
    config.validate()?;
    if domains.is_empty() {
        return Err(Error::InvalidInput("no domains".into()));
    }
    let l = domains[0].f_u.n_cols();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // 1 - gen::<f64>() maps [0,1) onto (0,1].
    let draw = move |d: usize, n: usize, rng: &mut ChaCha8Rng| {
        DenseFactorMatrix::from_fn(d, n, |_, _| (1.0 - rng.gen::<f64>()) * config.init_scale)
    };
    let mut u = Vec::with_capacity(domains.len());
    let mut v = Vec::with_capacity(domains.len());
    for dom in domains {
        u.push(draw(config.d, dom.n_users(), &mut rng));
        v.push(draw(config.d, dom.n_items(), &mut rng));
    }
    let t = draw(config.d, l, &mut rng);
    Ok(FactorModel {
        d: config.d,
        u,
        v,
        t,
        link: config.link,
        predict_through_link: config.predict_through_link,
    })
}

pub fn train(domains: &[DomainMatrices], config: &TrainConfig) -> Result<(FactorModel, TrainTrace)> {
    let model = init_model(domains, config)?;
    train_from(model, domains, config)
}

/// Runs the descent loop from a given starting model. Exposed separately so
/// callers can control initialization (warm starts, degeneracy checks).
pub fn train_from(
    mut model: FactorModel,
    domains: &[DomainMatrices],
    config: &TrainConfig,
) -> Result<(FactorModel, TrainTrace)> {
    config.validate()?;
    let h = &config.hyperparams;
    let mut current = objective(&model, domains, h)?;
    let mut trace = TrainTrace {
        initial_objective: current,
        ..TrainTrace::default()
    };

    for t in 1..=config.max_iterations {
        let previous = current;
        let mut sweep_halvings = 0;
        let mut last_eta = 0.0;
        let mut stalled = false;

        for k in 0..domains.len() {
            let grads = gradients(&model, domains, h)?;
            let base_u = model.u[k].clone();
            let base_v = model.v[k].clone();
            let base_t = model.t.clone();

            let mut eta = 1.0;
            let mut accepted = false;
            for _ in 0..config.max_halvings {
                model.u[k] = base_u.sub_scaled(&grads.u[k], eta);
                model.v[k] = base_v.sub_scaled(&grads.v[k], eta);
                model.t = base_t.sub_scaled(&grads.t, eta);
                let candidate = objective(&model, domains, h)
                    .map_err(|_| Error::Diverged { iteration: t })?;
                if candidate < current {
                    current = candidate;
                    last_eta = eta;
                    accepted = true;
                    break;
                }
                eta /= 2.0;
                sweep_halvings += 1;
            }
            if !accepted {
                // Line search exhausted: keep the old factors and treat the
                // run as converged after this sweep.
                model.u[k] = base_u;
                model.v[k] = base_v;
                model.t = base_t;
                stalled = true;
            }
        }

        if !current.is_finite() {
            return Err(Error::Diverged { iteration: t });
        }
        trace.records.push(TraceRecord {
            t,
            objective: current,
            eta: last_eta,
            halvings: sweep_halvings,
        });

        let f = 1.0 - current / previous;
        if stalled || f <= config.epsilon {
            trace.converged = true;
            break;
        }
    }

    Ok((model, trace))
}

/// Deterministic substream seed derivation, so split and init randomness
/// stay independent under one root seed.
pub fn substream_seed(root: u64, label: &str, index: u64) -> u64 {
    let mut state = root ^ 0x9e37_79b9_7f4a_7c15;
    for &b in label.as_bytes() {
        state = splitmix(state ^ b as u64);
    }
    splitmix(state ^ index)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
