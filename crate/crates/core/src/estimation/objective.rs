//! The M-step objective `Q(theta)`: the expected complete log posterior
//! under the current responsibilities, and its gradient.
//!
//! The count factors are evaluated through node-level aggregates so that
//! both the value and the gradient cost `O(nKp + MKp)`.

use super::problem::{MixtureUpdate, Problem};
use super::variational::VariationalState;
use crate::linalg::{dot, Cov2, Mat};
use crate::model::{ModelParams, NodeTerms, Precompute, RespAggregates};
use crate::special::ln_gamma;

/// Log prior of the parameters (up to constants).
pub fn theta_log_prior(problem: &Problem, params: &ModelParams) -> f64 {
    let prior = problem.prior;
    let n = params.n() as f64;
    let (k, p) = (params.k() as f64, params.p() as f64);
    let mut lp = 0.0;

    lp += pair_prior(&params.s1, &params.r1, &params.sigma_sr1, 1.0)
        + inverse_wishart(&params.sigma_sr1, &prior.psi0_sr1, prior.nu0_sr1);
    lp += pair_prior(&params.s2, &params.r2, &params.sigma_sr2, 1.0)
        + inverse_wishart(&params.sigma_sr2, &prior.psi0_sr2, prior.nu0_sr2);

    let prec = params.sigma_uv.inverse();
    let mut quad = 0.0;
    for i in 0..params.n() {
        let (ui, vi) = (params.u.row(i), params.v.row(i));
        quad += prec.0[0][0] * dot(ui, ui) + 2.0 * prec.0[0][1] * dot(ui, vi) + prec.0[1][1] * dot(vi, vi);
    }
    lp += -0.5 * quad - 0.5 * n * p * params.sigma_uv.det().ln()
        + inverse_wishart(&params.sigma_uv, &prior.psi0_uv, prior.nu0_uv);

    lp -= 0.5 * params.y.as_slice().iter().map(|x| x * x).sum::<f64>();

    let lam_sq: f64 = params.lambda.as_slice().iter().map(|x| x * x).sum();
    lp -= (lam_sq + 2.0 * prior.b0) / (2.0 * params.lambda_var)
        + (prior.a0 + 1.0 + k * p / 2.0) * params.lambda_var.ln();

    lp -= 0.5
        * (prior.nu0_t + 1.0)
        * params
            .phi
            .iter()
            .map(|f| (f * f / (prior.nu0_t * prior.eta0_t * prior.eta0_t)).ln_1p())
            .sum::<f64>();

    if problem.mixture == MixtureUpdate::SparseFinite {
        lp += prior.a_alpha * params.alpha.ln() - prior.b_alpha * params.alpha;
    }
    lp
}

/// `-1/2 sum_i x_i' S^-1 x_i - n/2 log|S|` for `x_i = (a_i, b_i)`.
fn pair_prior(a: &[f64], b: &[f64], sigma: &Cov2, reps: f64) -> f64 {
    let prec = sigma.inverse();
    let quad: f64 = a.iter().zip(b).map(|(x, y)| prec.quad(*x, *y)).sum();
    -0.5 * quad - 0.5 * reps * a.len() as f64 * sigma.det().ln()
}

/// Inverse-Wishart log-density of a 2x2 matrix up to constants.
fn inverse_wishart(sigma: &Cov2, psi: &Cov2, nu: f64) -> f64 {
    -(nu + 3.0) / 2.0 * sigma.det().ln() - 0.5 * sigma.inverse().trace_with(psi)
}

/// `logG(K alpha) - K logG(alpha) + (alpha - 1) sum_k E[log t_k]`.
pub fn alpha_term(alpha: f64, k: usize, sum_e_log_t: f64) -> f64 {
    let k = k as f64;
    ln_gamma(k * alpha) - k * ln_gamma(alpha) + (alpha - 1.0) * sum_e_log_t
}

/// Gradient of `Q` in the natural parameterisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub s1: Vec<f64>,
    pub r1: Vec<f64>,
    pub s2: Vec<f64>,
    pub r2: Vec<f64>,
    pub u: Mat,
    pub v: Mat,
    pub lambda: Mat,
    pub y: Mat,
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl Gradient {
    pub fn zeros(n: usize, k: usize, p: usize) -> Self {
        Self {
            s1: vec![0.0; n],
            r1: vec![0.0; n],
            s2: vec![0.0; n],
            r2: vec![0.0; n],
            u: Mat::zeros(n, p),
            v: Mat::zeros(n, p),
            lambda: Mat::zeros(k, p),
            y: Mat::zeros(k, p),
            beta: vec![0.0; k],
            phi: vec![0.0; k],
        }
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        let vecs = [&self.s1, &self.r1, &self.s2, &self.r2, &self.beta, &self.phi];
        let mats = [&self.u, &self.v, &self.lambda, &self.y];
        vecs.iter()
            .flat_map(|v| v.iter())
            .chain(mats.iter().flat_map(|m| m.as_slice().iter()))
            .fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

/// `Q` for fixed responsibilities and mixture expectations.
pub struct Objective<'p, 'a> {
    pub problem: &'p Problem<'a>,
    pub resp: &'p Mat,
    pub agg: RespAggregates,
    /// `sum_k E[log t_k]`, which multiplies `alpha - 1`.
    pub sum_e_log_t: f64,
}

impl<'p, 'a> Objective<'p, 'a> {
    pub fn new(problem: &'p Problem<'a>, state: &'p VariationalState) -> Self {
        Self {
            problem,
            resp: &state.resp,
            agg: RespAggregates::new(problem.net, &state.resp),
            sum_e_log_t: state.e_log_t.iter().sum(),
        }
    }

    /// Full objective value.
    pub fn value(&self, params: &ModelParams) -> f64 {
        let nodes = NodeTerms::new(params);
        self.count_value(&nodes) + self.weight_value(params) + self.prior_value(params)
    }

    /// Sender and receiver terms: `sum_m sum_k p_mk log pi(e_m1, e_m2 | k)`.
    pub fn count_value(&self, nodes: &NodeTerms) -> f64 {
        let agg = &self.agg;
        let mut total = 0.0;
        for i in 0..nodes.n() {
            for k in 0..nodes.k() {
                let ps = agg.p_send.get(i, k);
                let pr = agg.p_recv.get(i, k);
                if ps != 0.0 {
                    total += ps * (nodes.send_logp.get(i, k) - nodes.log_recv_denom.get(i, k));
                }
                if pr != 0.0 {
                    total += pr * nodes.recv_score.get(i, k);
                }
            }
        }
        total
    }

    /// Weight terms: `sum_m sum_k p_mk log pi(w_m | e_m1, e_m2, k)`.
    pub fn weight_value(&self, params: &ModelParams) -> f64 {
        let problem = self.problem;
        if !problem.weighted {
            return 0.0;
        }
        let mut total = 0.0;
        for (m, e) in problem.net.edges().iter().enumerate() {
            let row = &self.resp.row(m)[1..];
            for (k, &pmk) in row.iter().enumerate() {
                if pmk == 0.0 {
                    continue;
                }
                let eta = params.eta(e.sender, e.receiver, k);
                total += pmk
                    * problem
                        .family
                        .log_density_stat(problem.stat[m], problem.log_jac[m], eta, params.phi[k]);
            }
        }
        total
    }

    /// Parameter priors plus the concentration terms.
    pub fn prior_value(&self, params: &ModelParams) -> f64 {
        let mut v = theta_log_prior(self.problem, params);
        if self.problem.mixture == MixtureUpdate::SparseFinite {
            v += alpha_term(params.alpha, params.k(), self.sum_e_log_t);
        }
        v
    }

    /// Gradient of the count and prior terms; adds the weight terms when
    /// `with_weights` is set.
    pub fn gradient(&self, params: &ModelParams, with_weights: bool) -> Gradient {
        let pre = Precompute::from_parts(params, NodeTerms::new(params), self.agg.clone());
        self.gradient_with(params, &pre, with_weights)
    }

    pub fn gradient_with(&self, params: &ModelParams, pre: &Precompute, with_weights: bool) -> Gradient {
        let (n, k, p) = (params.n(), params.k(), params.p());
        let mut g = Gradient::zeros(n, k, p);
        self.count_gradient(params, pre, &mut g);
        if with_weights && self.problem.weighted {
            self.weight_gradient(params, &mut g);
        }
        self.prior_gradient(params, &mut g);
        g
    }

    fn count_gradient(&self, params: &ModelParams, pre: &Precompute, g: &mut Gradient) {
        let nodes = &pre.nodes;
        let agg = &pre.agg;
        let (n, k, p) = (params.n(), params.k(), params.p());
        for c in 0..k {
            let yk = params.y.row(c);
            let p_dot = agg.p_dot[c];
            let h = pre.h_scaled[c];
            let (su, sv) = (pre.s_u_ratio.row(c), pre.s_v_ratio.row(c));
            let mut gy = vec![0.0; p];
            for i in 0..n {
                let ps = agg.p_send.get(i, c);
                let pr = agg.p_recv.get(i, c);
                // d/dS1_i: p_(i1)k - p_.k exp(S1_i + U_i Y_k') / f_uk
                let ga = ps - p_dot * nodes.send_logp.get(i, c).exp();
                // d/dR1_i: p_(i2)k - exp(R1_i + V_i Y_k') (H_k - p_(i1)k / (f_vk - exp(R1_i + V_i Y_k')))
                let rest = (nodes.log_recv_denom.get(i, c) - nodes.log_f_v[c]).exp();
                let share = nodes.recv_share.get(i, c);
                let gb = pr - share * (h - ps / rest);
                g.s1[i] += ga;
                g.r1[i] += gb;
                let (ui, vi) = (params.u.row(i), params.v.row(i));
                for d in 0..p {
                    g.u.add(i, d, ga * yk[d]);
                    g.v.add(i, d, gb * yk[d]);
                    // Y_k: sum_m p_mk (U_{e_m1} + V_{e_m2} - s_uk/f_uk
                    //        - (s_vk - exp(R1_{e_m1} + V_{e_m1} Y_k') V_{e_m1}) / (f_vk - exp(...)))
                    gy[d] += ps * ui[d] + pr * vi[d];
                    if ps != 0.0 {
                        gy[d] -= ps * (sv[d] - share * vi[d]) / rest;
                    }
                }
            }
            for d in 0..p {
                gy[d] -= p_dot * su[d];
                g.y.add(c, d, gy[d]);
            }
        }
    }

    fn weight_gradient(&self, params: &ModelParams, g: &mut Gradient) {
        let problem = self.problem;
        let p = params.p();
        for (m, e) in problem.net.edges().iter().enumerate() {
            let (i, j) = (e.sender, e.receiver);
            let row = &self.resp.row(m)[1..];
            for (k, &pmk) in row.iter().enumerate() {
                if pmk == 0.0 {
                    continue;
                }
                let eta = params.eta(i, j, k);
                let (d_eta, d_phi) = problem.family.derivatives_stat(problem.stat[m], eta, params.phi[k]);
                let ge = pmk * d_eta;
                g.beta[k] += ge;
                g.s2[i] += ge;
                g.r2[j] += ge;
                g.phi[k] += pmk * d_phi;
                let lk = params.lambda.row(k);
                for d in 0..p {
                    let (uid, vjd) = (params.u.get(i, d), params.v.get(j, d));
                    g.u.add(i, d, ge * lk[d] * vjd);
                    g.v.add(j, d, ge * lk[d] * uid);
                    g.lambda.add(k, d, ge * uid * vjd);
                }
            }
        }
    }

    fn prior_gradient(&self, params: &ModelParams, g: &mut Gradient) {
        let prior = self.problem.prior;
        let sr1 = params.sigma_sr1.inverse();
        let sr2 = params.sigma_sr2.inverse();
        let uv = params.sigma_uv.inverse();
        for i in 0..params.n() {
            let (s1, r1) = (params.s1[i], params.r1[i]);
            g.s1[i] -= sr1.0[0][0] * s1 + sr1.0[0][1] * r1;
            g.r1[i] -= sr1.0[1][1] * r1 + sr1.0[0][1] * s1;
            let (s2, r2) = (params.s2[i], params.r2[i]);
            g.s2[i] -= sr2.0[0][0] * s2 + sr2.0[0][1] * r2;
            g.r2[i] -= sr2.0[1][1] * r2 + sr2.0[0][1] * s2;
            for d in 0..params.p() {
                let (u, v) = (params.u.get(i, d), params.v.get(i, d));
                g.u.add(i, d, -(uv.0[0][0] * u + uv.0[0][1] * v));
                g.v.add(i, d, -(uv.0[1][1] * v + uv.0[0][1] * u));
            }
        }
        for (gy, y) in g.y.as_mut_slice().iter_mut().zip(params.y.as_slice()) {
            *gy -= y;
        }
        for (gl, l) in g.lambda.as_mut_slice().iter_mut().zip(params.lambda.as_slice()) {
            *gl -= l / params.lambda_var;
        }
        let scale = prior.nu0_t * prior.eta0_t * prior.eta0_t;
        for (gp, f) in g.phi.iter_mut().zip(&params.phi) {
            *gp -= (prior.nu0_t + 1.0) * f / (scale + f * f);
        }
    }
}
