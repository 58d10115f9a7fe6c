//! Variational generalised EM for the mixture model.

mod fit;
mod mstep;
mod objective;
mod problem;
mod selection;
mod variational;

pub use fit::{fit, fit_single, FitOptions, FitResult, RestartSummary};
pub use mstep::{
    cg_block, m_step, update_alpha, update_lambda_var, update_sigma_pair, update_sigma_uv, Block,
    CgConfig, MStepOutcome, StepMemory,
};
pub use objective::{alpha_term, theta_log_prior, Gradient, Objective};
pub use problem::{MixtureUpdate, Problem};
pub use selection::{
    check_convergence, free_parameters, icl, prune_and_count, Convergence, Pruning,
};
pub use variational::{
    dirichlet_map_weights, e_step, elbo, elbo_from_scores, log_scores, EStepConfig, EStepOutcome,
    ElboParts, VariationalState,
};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WecanError};
use crate::model::ModelParams;

/// Outer-loop settings shared by the weighted fit and the count-only pre-fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub cg: CgConfig,
    pub estep: EStepConfig,
    pub max_outer_iter: usize,
    /// Assignment agreement is ignored before this many iterations.
    pub min_outer_iter: usize,
    /// When `false` the loop always runs `max_outer_iter` iterations.
    pub stop_on_convergence: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cg: CgConfig::default(),
            estep: EStepConfig::default(),
            max_outer_iter: 500,
            min_outer_iter: 3,
            stop_on_convergence: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// ELBO after each outer iteration.
    pub elbo_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternates M- and E-steps from the given state until the hard
/// assignments stop changing.
pub fn run_vbgem(
    problem: &Problem,
    params: &mut ModelParams,
    state: &mut VariationalState,
    config: &RunConfig,
) -> Result<RunReport> {
    if config.max_outer_iter == 0 {
        return Err(WecanError::InvalidArgument("max_outer_iter must be positive".into()));
    }
    let mut memory = StepMemory::default();
    let mut prev = state.hard_assignments();
    let mut report = RunReport {
        elbo_trace: Vec::new(),
        iterations: 0,
        converged: false,
    };
    for iter in 1..=config.max_outer_iter {
        m_step(problem, params, state, &config.cg, &mut memory);
        if !params.all_finite() {
            return Err(WecanError::InvalidArgument(format!(
                "non-finite parameters after M-step {iter}"
            )));
        }
        let out = e_step(problem, params, state, &config.estep)?;
        report.elbo_trace.push(out.elbo);
        report.iterations = iter;
        let next = state.hard_assignments();
        match check_convergence(&prev, &next, iter, config.max_outer_iter) {
            Convergence::Converged if iter >= config.min_outer_iter => {
                report.converged = true;
                if config.stop_on_convergence {
                    break;
                }
            }
            Convergence::MaxIterReached => break,
            _ => {}
        }
        prev = next;
    }
    Ok(report)
}
