//! Mean-field E-step over the cluster indicators and mixture weights, and
//! the evidence lower bound it ascends.

use serde::{Deserialize, Serialize};

use super::objective::theta_log_prior;
use super::problem::{MixtureUpdate, Problem};
use crate::error::{Result, WecanError};
use crate::linalg::Mat;
use crate::model::{ModelParams, NodeTerms};
use crate::special::{digamma, ln_beta, ln_gamma};

/// Variational factors `q(Z) q(t0) q(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    /// `M x (K + 1)` responsibilities, noise in column 0.
    pub resp: Mat,
    /// Beta parameters of `q(t0)`.
    pub beta_t0: (f64, f64),
    /// Dirichlet parameters of `q(t_1..t_K)` (or point weights under
    /// [`MixtureUpdate::DirichletMap`]).
    pub dir_t: Vec<f64>,
    pub e_log_t0: f64,
    pub e_log_1m_t0: f64,
    pub e_log_t: Vec<f64>,
}

impl VariationalState {
    /// State with the given responsibilities, `q(t0)` at its prior, and
    /// `q(t)` matched to the responsibilities.
    pub fn from_resp(problem: &Problem, alpha: f64, resp: Mat) -> Self {
        let k = resp.cols() - 1;
        let mut state = Self {
            resp,
            beta_t0: (problem.prior.c0, problem.prior.d0),
            dir_t: vec![1.0; k],
            e_log_t0: 0.0,
            e_log_1m_t0: 0.0,
            e_log_t: vec![0.0; k],
        };
        state.refresh_t0_expectations();
        state.update_t(problem, alpha);
        state
    }

    pub fn k(&self) -> usize {
        self.dir_t.len()
    }

    pub fn column_mass(&self) -> Vec<f64> {
        self.resp.col_sums()
    }

    fn refresh_t0_expectations(&mut self) {
        let (a, b) = self.beta_t0;
        let total = digamma(a + b);
        self.e_log_t0 = digamma(a) - total;
        self.e_log_1m_t0 = digamma(b) - total;
    }

    /// Expected log prior weight of each label.
    pub fn log_weights(&self, problem: &Problem) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.k() + 1);
        if problem.with_noise {
            out.push(self.e_log_t0);
            out.extend(self.e_log_t.iter().map(|x| x + self.e_log_1m_t0));
        } else {
            out.push(f64::NEG_INFINITY);
            out.extend(self.e_log_t.iter().copied());
        }
        out
    }

    /// Responsibilities from fixed log-scores; rows are softmaxes of
    /// `score + E[log weight]`.
    pub fn update_z(&mut self, problem: &Problem, scores: &Mat) {
        let lw = self.log_weights(problem);
        for m in 0..scores.rows() {
            let row = scores.row(m);
            let mut max = f64::NEG_INFINITY;
            for (s, w) in row.iter().zip(&lw) {
                max = max.max(s + w);
            }
            let out = self.resp.row_mut(m);
            let mut total = 0.0;
            for ((o, s), w) in out.iter_mut().zip(row).zip(&lw) {
                let v = s + w;
                *o = if v == f64::NEG_INFINITY { 0.0 } else { (v - max).exp() };
                total += *o;
            }
            out.iter_mut().for_each(|o| *o /= total);
        }
    }

    /// `q(t0) = Beta(c0 + N0, d0 + M - N0)`.
    pub fn update_t0(&mut self, problem: &Problem) {
        if !problem.with_noise {
            return;
        }
        let m = self.resp.rows() as f64;
        let n0: f64 = (0..self.resp.rows()).map(|r| self.resp.get(r, 0)).sum();
        self.beta_t0 = (problem.prior.c0 + n0, problem.prior.d0 + (m - n0).max(0.0));
        self.refresh_t0_expectations();
    }

    /// `q(t) = Dirichlet(alpha + N_1, ..., alpha + N_K)`.
    pub fn update_t(&mut self, problem: &Problem, alpha: f64) {
        let mass = self.column_mass();
        match problem.mixture {
            MixtureUpdate::SparseFinite => {
                for (d, n_k) in self.dir_t.iter_mut().zip(&mass[1..]) {
                    *d = alpha + n_k;
                }
                let total = digamma(self.dir_t.iter().sum());
                for (e, d) in self.e_log_t.iter_mut().zip(&self.dir_t) {
                    *e = digamma(*d) - total;
                }
            }
            MixtureUpdate::DirichletMap => {
                let raw = dirichlet_map_weights(&mass[1..], alpha, self.resp.rows());
                let clamped: Vec<f64> = raw.iter().map(|w| w.max(0.0)).collect();
                let total: f64 = clamped.iter().sum();
                for ((d, e), w) in self.dir_t.iter_mut().zip(self.e_log_t.iter_mut()).zip(&clamped) {
                    *d = if total > 0.0 { w / total } else { 1.0 / clamped.len() as f64 };
                    *e = d.ln();
                }
            }
        }
    }

    /// Hard labels: row-wise argmax, ties to the lowest label.
    pub fn hard_assignments(&self) -> Vec<usize> {
        (0..self.resp.rows()).map(|m| argmax(self.resp.row(m))).collect()
    }
}

/// Point estimates `(alpha0 + N_k - 1) / (K alpha0 + M - K)` of the
/// structural mixture weights.
pub fn dirichlet_map_weights(cluster_mass: &[f64], alpha0: f64, m: usize) -> Vec<f64> {
    let k = cluster_mass.len() as f64;
    let denom = k * alpha0 + m as f64 - k;
    cluster_mass.iter().map(|n| (alpha0 + n - 1.0) / denom).collect()
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// Per-edge, per-label log-densities `log pi(e_m | Z_mk = 1)`; `M x (K + 1)`.
pub fn log_scores(problem: &Problem, params: &ModelParams, nodes: &NodeTerms) -> Result<Mat> {
    let k = params.k();
    let mut scores = Mat::zeros(problem.m(), k + 1);
    for (m, e) in problem.net.edges().iter().enumerate() {
        let row = scores.row_mut(m);
        row[0] = if problem.with_noise {
            problem.noise_score[m]
        } else {
            f64::NEG_INFINITY
        };
        for c in 0..k {
            let mut s = nodes.count_log_prob(e.sender, e.receiver, c);
            if problem.weighted {
                let eta = params.eta(e.sender, e.receiver, c);
                s += problem
                    .family
                    .log_density_stat(problem.stat[m], problem.log_jac[m], eta, params.phi[c]);
            }
            if !s.is_finite() {
                return Err(WecanError::NonFiniteDensity { edge: m });
            }
            row[c + 1] = s;
        }
        if row[0].is_nan() || row[0] == f64::INFINITY {
            return Err(WecanError::NonFiniteDensity { edge: m });
        }
    }
    Ok(scores)
}

/// ELBO split into the part involving the variational factors and the
/// log prior of the parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboParts {
    /// `E_q[log p(E, Z, t | theta)] - E_q[log q(Z, t)]`.
    pub latent: f64,
    /// `log p(theta)` up to constants.
    pub theta_prior: f64,
}

impl ElboParts {
    pub fn total(&self) -> f64 {
        self.latent + self.theta_prior
    }
}

/// ELBO with precomputed scores.
pub fn elbo_from_scores(
    problem: &Problem,
    params: &ModelParams,
    state: &VariationalState,
    scores: &Mat,
) -> ElboParts {
    let lw = state.log_weights(problem);
    let mut latent = 0.0;
    for m in 0..scores.rows() {
        for ((&r, &s), &w) in state.resp.row(m).iter().zip(scores.row(m)).zip(&lw) {
            if r > 0.0 {
                latent += r * (s + w - r.ln());
            }
        }
    }
    let prior = problem.prior;
    if problem.with_noise {
        let (a, b) = state.beta_t0;
        let e_log_p = (prior.c0 - 1.0) * state.e_log_t0 + (prior.d0 - 1.0) * state.e_log_1m_t0
            - ln_beta(prior.c0, prior.d0);
        let e_log_q = (a - 1.0) * digamma(a) + (b - 1.0) * digamma(b)
            - (a + b - 2.0) * digamma(a + b)
            - ln_beta(a, b);
        latent += e_log_p - e_log_q;
    }
    latent += mixture_terms(problem, params.alpha, state);
    ElboParts {
        latent,
        theta_prior: theta_log_prior(problem, params),
    }
}

/// `E[log p(t | alpha)] - E[log q(t)]`.
fn mixture_terms(problem: &Problem, alpha: f64, state: &VariationalState) -> f64 {
    let k = state.k() as f64;
    match problem.mixture {
        MixtureUpdate::SparseFinite => {
            let sum_elog: f64 = state.e_log_t.iter().sum();
            let e_log_p = ln_gamma(k * alpha) - k * ln_gamma(alpha) + (alpha - 1.0) * sum_elog;
            let total: f64 = state.dir_t.iter().sum();
            let e_log_q = ln_gamma(total) - state.dir_t.iter().map(|&g| ln_gamma(g)).sum::<f64>()
                + state
                    .dir_t
                    .iter()
                    .zip(&state.e_log_t)
                    .map(|(g, e)| (g - 1.0) * e)
                    .sum::<f64>();
            e_log_p - e_log_q
        }
        MixtureUpdate::DirichletMap => state
            .e_log_t
            .iter()
            .filter(|e| e.is_finite())
            .map(|e| (alpha - 1.0) * e)
            .sum(),
    }
}

pub fn elbo(problem: &Problem, params: &ModelParams, state: &VariationalState) -> Result<f64> {
    let nodes = NodeTerms::new(params);
    let scores = log_scores(problem, params, &nodes)?;
    Ok(elbo_from_scores(problem, params, state, &scores).total())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EStepConfig {
    /// Stop once the relative ELBO change of a full cycle is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Record the ELBO after every coordinate update.
    pub record_trace: bool,
}

impl Default for EStepConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EStepOutcome {
    pub elbo: f64,
    pub iterations: usize,
    /// ELBO after each coordinate update when requested.
    pub trace: Vec<f64>,
}

/// Cycles `q(Z) -> q(t0) -> q(t)` with the parameters held fixed until the
/// ELBO stabilises.
pub fn e_step(
    problem: &Problem,
    params: &ModelParams,
    state: &mut VariationalState,
    config: &EStepConfig,
) -> Result<EStepOutcome> {
    if !(config.tol > 0.0) {
        return Err(WecanError::InvalidArgument("E-step tolerance must be positive".into()));
    }
    let nodes = NodeTerms::new(params);
    let scores = log_scores(problem, params, &nodes)?;
    let mut trace = Vec::new();
    let eval = |state: &VariationalState| elbo_from_scores(problem, params, state, &scores).total();
    let mut prev = eval(state);
    if config.record_trace {
        trace.push(prev);
    }
    let mut iterations = 0;
    let mut current = prev;
    while iterations < config.max_iter {
        iterations += 1;
        state.update_z(problem, &scores);
        if config.record_trace {
            trace.push(eval(state));
        }
        state.update_t0(problem);
        if config.record_trace {
            trace.push(eval(state));
        }
        state.update_t(problem, params.alpha);
        current = eval(state);
        if config.record_trace {
            trace.push(current);
        }
        if (current - prev).abs() <= config.tol * current.abs().max(1.0) {
            break;
        }
        prev = current;
    }
    Ok(EStepOutcome {
        elbo: current,
        iterations,
        trace,
    })
}
