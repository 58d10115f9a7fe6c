//! Multi-restart driver.

use serde::{Deserialize, Serialize};

use super::problem::{MixtureUpdate, Problem};
use super::selection::{icl, prune_and_count};
use super::variational::{e_step, VariationalState};
use super::{run_vbgem, RunConfig};
use crate::error::{Result, WecanError};
use crate::family::{NoiseLaw, WeightFamily};
use crate::graph::Network;
use crate::init::initialize;
use crate::model::{MixtureWeights, ModelParams, PriorConfig};

/// Settings of [`fit`]. Model dimensions live in [`PriorConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Number of random restarts.
    pub seeds: usize,
    /// Restart `r` uses seed `seed_base + r`.
    pub seed_base: u64,
    pub run: RunConfig,
    /// Outer loop of the count-only pre-fit.
    pub prefit: RunConfig,
    /// Minimum expected size of a retained cluster.
    pub mass_threshold: f64,
    pub mixture: MixtureUpdate,
    /// Worker threads for restarts; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seeds: 15,
            seed_base: 0,
            run: RunConfig::default(),
            prefit: RunConfig {
                max_outer_iter: 200,
                ..RunConfig::default()
            },
            mass_threshold: 1.0,
            mixture: MixtureUpdate::SparseFinite,
            threads: None,
        }
    }
}

/// One line per restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub seed: u64,
    /// `None` when the restart failed.
    pub icl: Option<f64>,
    pub k_effective: Option<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Per-edge labels: `0` noise, `1..=k_effective` occupied clusters.
    pub assignments: Vec<usize>,
    pub k_effective: usize,
    /// Parameters over the full `K_max` cluster budget.
    pub params: ModelParams,
    /// `cluster_of[l - 1]` is the zero-based index in `params` of label `l`.
    pub cluster_of: Vec<usize>,
    pub elbo_trace: Vec<f64>,
    pub icl: f64,
    pub n_outer_iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub family: WeightFamily,
    pub noise_rate: f64,
    /// Expected cluster sizes, noise first, over the full budget.
    pub cluster_mass: Vec<f64>,
    /// Maximum-likelihood weights at the hard assignments (full budget).
    pub mixture: MixtureWeights,
    pub beta_t0: (f64, f64),
    pub dir_t: Vec<f64>,
    /// Hard labels of the count-only pre-fit (`1..=K_max`, no noise).
    pub init_assignments: Vec<usize>,
    pub restarts: Vec<RestartSummary>,
}

/// Resolves the noise law: explicit rate, prior setting, or data default.
fn noise_law(net: &Network, prior: &PriorConfig, noise: Option<NoiseLaw>) -> Result<NoiseLaw> {
    match (noise, prior.lambda_a) {
        (Some(law), _) => Ok(law),
        (None, Some(rate)) => NoiseLaw::new(rate),
        (None, None) => Ok(NoiseLaw::default_for_weights(net.weights())),
    }
}

/// Fits the model from one seed.
pub fn fit_single(
    net: &Network,
    family: WeightFamily,
    noise: Option<NoiseLaw>,
    prior: &PriorConfig,
    options: &FitOptions,
    seed: u64,
) -> Result<FitResult> {
    let noise = noise_law(net, prior, noise)?;
    let problem = Problem::new(net, family, noise, prior)?.with_mixture(options.mixture);
    let (mut params, pre) = initialize(net, family, prior, &options.prefit, seed)?;
    let init_assignments = (0..pre.resp.rows())
        .map(|m| super::variational::argmax(pre.resp.row(m)))
        .collect();

    // first E-step under the full model, starting from the pre-fit labels
    let mut state = VariationalState::from_resp(&problem, params.alpha, pre.resp);
    e_step(&problem, &params, &mut state, &options.run.estep)?;
    let report = run_vbgem(&problem, &mut params, &mut state, &options.run)?;

    let pruning = prune_and_count(&state, options.mass_threshold);
    let restricted = pruning.restricted_assignments(&state);
    let score = icl(&params, family, &noise, net, &restricted, pruning.k_effective)?;
    if !score.is_finite() {
        return Err(WecanError::InvalidArgument(format!("ICL is not finite ({score})")));
    }
    Ok(FitResult {
        assignments: pruning.relabel(&restricted),
        k_effective: pruning.k_effective,
        mixture: MixtureWeights::from_assignments(&restricted, params.k()),
        params,
        cluster_of: pruning.cluster_of,
        elbo_trace: report.elbo_trace,
        icl: score,
        n_outer_iterations: report.iterations,
        converged: report.converged,
        seed,
        family,
        noise_rate: noise.rate(),
        cluster_mass: state.column_mass(),
        beta_t0: state.beta_t0,
        dir_t: state.dir_t,
        init_assignments,
        restarts: Vec::new(),
    })
}

fn run_restarts(
    net: &Network,
    family: WeightFamily,
    noise: Option<NoiseLaw>,
    prior: &PriorConfig,
    options: &FitOptions,
) -> Vec<(u64, Result<FitResult>)> {
    let seeds: Vec<u64> = (0..options.seeds as u64).map(|r| options.seed_base + r).collect();
    let one = |&seed: &u64| (seed, fit_single(net, family, noise, prior, options, seed));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let run = || seeds.par_iter().map(one).collect::<Vec<_>>();
        match options.threads {
            Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
                Ok(pool) => pool.install(run),
                Err(_) => run(),
            },
            None => run(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        seeds.iter().map(one).collect()
    }
}

/// Runs `options.seeds` restarts and keeps the one with the highest ICL
/// (ties to the lowest seed).
pub fn fit(
    net: &Network,
    family: WeightFamily,
    noise: Option<NoiseLaw>,
    prior: &PriorConfig,
    options: &FitOptions,
) -> Result<FitResult> {
    if options.seeds == 0 {
        return Err(WecanError::InvalidArgument("at least one seed is required".into()));
    }
    // configuration errors are reported once instead of per seed
    prior.validate()?;
    let law = noise_law(net, prior, noise)?;
    Problem::new(net, family, law, prior)?;

    let outcomes = run_restarts(net, family, Some(law), prior, options);
    let mut summaries = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    let mut best: Option<FitResult> = None;
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(res) => {
                summaries.push(RestartSummary {
                    seed,
                    icl: Some(res.icl),
                    k_effective: Some(res.k_effective),
                    iterations: res.n_outer_iterations,
                    converged: res.converged,
                    error: None,
                });
                if best.as_ref().is_none_or(|b| res.icl > b.icl) {
                    best = Some(res);
                }
            }
            Err(e) => {
                summaries.push(RestartSummary {
                    seed,
                    icl: None,
                    k_effective: None,
                    iterations: 0,
                    converged: false,
                    error: Some(e.to_string()),
                });
                failures.push((seed, e.to_string()));
            }
        }
    }
    match best {
        Some(mut res) => {
            res.restarts = summaries;
            Ok(res)
        }
        None => Err(WecanError::AllRestartsFailed(failures)),
    }
}
