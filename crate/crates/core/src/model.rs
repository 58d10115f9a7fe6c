//! Model parameters and the per-edge likelihood factors.
//!
//! A structural edge `i -> j` in cluster `k` is generated by
//!
//! * a sender drawn with probability `exp(S1_i + U_i.Y_k) / f_uk`,
//! * a receiver drawn among the other nodes with probability
//!   `exp(R1_j + V_j.Y_k) / (f_vk - exp(R1_i + V_i.Y_k))`,
//! * a weight from the structural family with canonical parameter
//!   `eta_ijk = beta_k + S2_i + R2_j + U_i Lambda_k V_j'`.
//!
//! A noise edge picks a uniform ordered pair and an exponential weight.
//!
//! Cluster labels use `0` for noise and `1..=K` for structural clusters.
//! Internally structural cluster `k` (zero-based) is label `k + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WecanError};
use crate::family::{NoiseLaw, WeightFamily};
use crate::graph::{Edge, Network};
use crate::linalg::{dot, Cov2, Mat};
use crate::special::log_sum_exp;

/// Relative floor applied to the receiver normaliser `f_vk - exp(R1_i + V_i.Y_k)`.
pub const RECEIVER_DENOM_EPS: f64 = 1e-12;

/// Hyperparameters of the priors plus the model dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Latent dimension.
    pub p: usize,
    /// Overfitted structural-cluster budget.
    pub k_max: usize,
    pub psi0_sr1: Cov2,
    pub psi0_sr2: Cov2,
    pub psi0_uv: Cov2,
    pub nu0_sr1: f64,
    pub nu0_sr2: f64,
    pub nu0_uv: f64,
    /// Inverse-gamma shape for the variance of `diag(Lambda_k)`.
    pub a0: f64,
    /// Inverse-gamma scale for the variance of `diag(Lambda_k)`.
    pub b0: f64,
    /// Gamma shape for the Dirichlet concentration.
    pub a_alpha: f64,
    /// Gamma rate for the Dirichlet concentration.
    pub b_alpha: f64,
    /// Beta prior on the noise proportion.
    pub c0: f64,
    pub d0: f64,
    /// Half-t degrees of freedom on each dispersion.
    pub nu0_t: f64,
    /// Half-t scale on each dispersion.
    pub eta0_t: f64,
    /// Noise rate; `None` picks a data-driven default at fit time.
    pub lambda_a: Option<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self::new(10, 4)
    }
}

impl PriorConfig {
    pub fn new(k_max: usize, p: usize) -> Self {
        Self {
            p,
            k_max,
            psi0_sr1: Cov2::identity(),
            psi0_sr2: Cov2::identity(),
            psi0_uv: Cov2::identity(),
            nu0_sr1: 3.0,
            nu0_sr2: 3.0,
            nu0_uv: 3.0,
            a0: 1.0,
            b0: 1.0,
            a_alpha: 1.0,
            b_alpha: 10.0 * k_max as f64,
            c0: 1.0,
            d0: 1.0,
            nu0_t: 3.0,
            eta0_t: 1.0,
            lambda_a: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(WecanError::InvalidArgument(format!("prior: {what}")));
        if self.p == 0 {
            return bad("latent dimension p must be at least 1");
        }
        if self.k_max == 0 {
            return bad("k_max must be at least 1");
        }
        for (name, m) in [
            ("psi0_sr1", &self.psi0_sr1),
            ("psi0_sr2", &self.psi0_sr2),
            ("psi0_uv", &self.psi0_uv),
        ] {
            if !m.is_spd() {
                return bad(&format!("{name} must be symmetric positive definite"));
            }
        }
        for (name, v) in [
            ("nu0_sr1", self.nu0_sr1),
            ("nu0_sr2", self.nu0_sr2),
            ("nu0_uv", self.nu0_uv),
        ] {
            if !(v > 1.0) {
                return bad(&format!("{name} must exceed 1"));
            }
        }
        for (name, v) in [
            ("a0", self.a0),
            ("b0", self.b0),
            ("a_alpha", self.a_alpha),
            ("b_alpha", self.b_alpha),
            ("c0", self.c0),
            ("d0", self.d0),
            ("nu0_t", self.nu0_t),
            ("eta0_t", self.eta0_t),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if let Some(r) = self.lambda_a {
            if !(r > 0.0 && r.is_finite()) {
                return bad("lambda_a must be positive");
            }
        }
        Ok(())
    }
}

/// All continuous unknowns of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub s1: Vec<f64>,
    pub r1: Vec<f64>,
    pub s2: Vec<f64>,
    pub r2: Vec<f64>,
    /// `n x p` latent sending features.
    pub u: Mat,
    /// `n x p` latent receiving features.
    pub v: Mat,
    /// `K x p` cluster features.
    pub y: Mat,
    /// `K x p` diagonals of the cluster weight interactions.
    pub lambda: Mat,
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
    pub sigma_sr1: Cov2,
    pub sigma_sr2: Cov2,
    pub sigma_uv: Cov2,
    /// Prior variance of `diag(Lambda_k)`.
    pub lambda_var: f64,
    /// Dirichlet concentration.
    pub alpha: f64,
}

impl ModelParams {
    pub fn zeros(n: usize, k: usize, p: usize) -> Self {
        Self {
            s1: vec![0.0; n],
            r1: vec![0.0; n],
            s2: vec![0.0; n],
            r2: vec![0.0; n],
            u: Mat::zeros(n, p),
            v: Mat::zeros(n, p),
            y: Mat::zeros(k, p),
            lambda: Mat::zeros(k, p),
            beta: vec![0.0; k],
            phi: vec![1.0; k],
            sigma_sr1: Cov2::identity(),
            sigma_sr2: Cov2::identity(),
            sigma_uv: Cov2::identity(),
            lambda_var: 1.0,
            alpha: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.s1.len()
    }

    pub fn k(&self) -> usize {
        self.beta.len()
    }

    pub fn p(&self) -> usize {
        self.u.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k, p) = (self.n(), self.k(), self.p());
        let dims_ok = [self.s1.len(), self.r1.len(), self.s2.len(), self.r2.len()]
            .iter()
            .all(|&l| l == n)
            && self.u.rows() == n
            && self.v.rows() == n
            && self.v.cols() == p
            && self.y.rows() == k
            && self.y.cols() == p
            && self.lambda.rows() == k
            && self.lambda.cols() == p
            && self.phi.len() == k;
        if !dims_ok {
            return Err(WecanError::InvalidArgument(
                "parameter dimensions are inconsistent".into(),
            ));
        }
        if self.phi.iter().any(|&f| !(f > 0.0)) {
            return Err(WecanError::InvalidArgument("dispersions must be positive".into()));
        }
        if !(self.sigma_sr1.is_spd() && self.sigma_sr2.is_spd() && self.sigma_uv.is_spd()) {
            return Err(WecanError::InvalidArgument(
                "covariance matrices must be positive definite".into(),
            ));
        }
        if !(self.lambda_var > 0.0 && self.alpha > 0.0) {
            return Err(WecanError::InvalidArgument(
                "lambda variance and concentration must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        let vecs = [&self.s1, &self.r1, &self.s2, &self.r2, &self.beta, &self.phi];
        vecs.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && [&self.u, &self.v, &self.y, &self.lambda]
                .iter()
                .all(|m| m.as_slice().iter().all(|x| x.is_finite()))
            && self.lambda_var.is_finite()
            && self.alpha.is_finite()
    }

    /// Canonical weight parameter of an `i -> j` edge in structural cluster `k`.
    #[inline]
    pub fn eta(&self, i: usize, j: usize, k: usize) -> f64 {
        let ui = self.u.row(i);
        let vj = self.v.row(j);
        let lk = self.lambda.row(k);
        let mut inter = 0.0;
        for d in 0..ui.len() {
            inter += ui[d] * lk[d] * vj[d];
        }
        self.beta[k] + self.s2[i] + self.r2[j] + inter
    }
}

/// Node-level quantities that depend only on the parameters.
#[derive(Debug, Clone)]
pub struct NodeTerms {
    /// `S1_i + U_i.Y_k`, `n x K`.
    pub send_score: Mat,
    /// `R1_i + V_i.Y_k`, `n x K`.
    pub recv_score: Mat,
    /// `ln f_uk`.
    pub log_f_u: Vec<f64>,
    /// `ln f_vk`.
    pub log_f_v: Vec<f64>,
    /// `ln(exp(send_score) / f_uk)`.
    pub send_logp: Mat,
    /// `exp(recv_score) / f_vk`.
    pub recv_share: Mat,
    /// `ln(f_vk - exp(recv_score))`, floored at `ln(eps * f_vk)`.
    pub log_recv_denom: Mat,
}

impl NodeTerms {
    pub fn new(params: &ModelParams) -> Self {
        let (n, k) = (params.n(), params.k());
        let send_score = Mat::from_fn(n, k, |i, c| params.s1[i] + dot(params.u.row(i), params.y.row(c)));
        let recv_score = Mat::from_fn(n, k, |i, c| params.r1[i] + dot(params.v.row(i), params.y.row(c)));
        let mut log_f_u = vec![0.0; k];
        let mut log_f_v = vec![0.0; k];
        for c in 0..k {
            log_f_u[c] = log_sum_exp((0..n).map(|i| send_score.get(i, c)));
            log_f_v[c] = log_sum_exp((0..n).map(|i| recv_score.get(i, c)));
        }
        let send_logp = Mat::from_fn(n, k, |i, c| send_score.get(i, c) - log_f_u[c]);
        let recv_share = Mat::from_fn(n, k, |i, c| (recv_score.get(i, c) - log_f_v[c]).exp());
        let floor = RECEIVER_DENOM_EPS.ln();
        let mut log_recv_denom = Mat::zeros(n, k);
        for c in 0..k {
            // only the top node can hold more than half the mass; its
            // complement is summed directly instead of by subtraction
            let top = (0..n)
                .max_by(|&a, &b| recv_score.get(a, c).total_cmp(&recv_score.get(b, c)))
                .unwrap_or(0);
            for i in 0..n {
                let log_rest = if i == top {
                    log_sum_exp((0..n).filter(|&j| j != top).map(|j| recv_score.get(j, c))) - log_f_v[c]
                } else {
                    (-recv_share.get(i, c)).ln_1p()
                };
                log_recv_denom.set(i, c, log_f_v[c] + log_rest.max(floor));
            }
        }
        Self {
            send_score,
            recv_score,
            log_f_u,
            log_f_v,
            send_logp,
            recv_share,
            log_recv_denom,
        }
    }

    pub fn n(&self) -> usize {
        self.send_score.rows()
    }

    pub fn k(&self) -> usize {
        self.send_score.cols()
    }

    /// Whether the receiver normaliser for sender `i` in cluster `k` was floored.
    pub fn receiver_denominator_clamped(&self, i: usize, k: usize) -> bool {
        self.log_recv_denom.get(i, k) - self.log_f_v[k] <= RECEIVER_DENOM_EPS.ln()
    }

    /// `ln P(sender = i | cluster)`; label `0` is noise.
    pub fn sender_log_prob(&self, i: usize, label: usize) -> f64 {
        if label == 0 {
            -(self.n() as f64).ln()
        } else {
            self.send_logp.get(i, label - 1)
        }
    }

    /// `ln P(receiver = j | sender = i, cluster)`; `-inf` when `i == j`.
    pub fn receiver_log_prob(&self, j: usize, i: usize, label: usize) -> f64 {
        if i == j {
            return f64::NEG_INFINITY;
        }
        if label == 0 {
            -((self.n() - 1) as f64).ln()
        } else {
            let k = label - 1;
            self.recv_score.get(j, k) - self.log_recv_denom.get(i, k)
        }
    }

    /// Sender plus receiver log-probability of a structural edge in cluster `k`.
    #[inline]
    pub fn count_log_prob(&self, i: usize, j: usize, k: usize) -> f64 {
        self.send_logp.get(i, k) + self.recv_score.get(j, k) - self.log_recv_denom.get(i, k)
    }
}

/// Responsibility-weighted node and cluster aggregates.
#[derive(Debug, Clone)]
pub struct RespAggregates {
    /// `p_(i1)k`: responsibility mass of edges sent by `i`, `n x K`.
    pub p_send: Mat,
    /// `p_(i2)k`: responsibility mass of edges received by `i`, `n x K`.
    pub p_recv: Mat,
    /// `p_.k`: total responsibility of each structural cluster.
    pub p_dot: Vec<f64>,
}

impl RespAggregates {
    /// `resp` is `M x (K + 1)` with the noise column first.
    pub fn new(net: &Network, resp: &Mat) -> Self {
        let k = resp.cols() - 1;
        let n = net.n_nodes();
        let mut p_send = Mat::zeros(n, k);
        let mut p_recv = Mat::zeros(n, k);
        let mut p_dot = vec![0.0; k];
        for (m, e) in net.edges().iter().enumerate() {
            let row = &resp.row(m)[1..];
            for (c, &pmk) in row.iter().enumerate() {
                p_send.add(e.sender, c, pmk);
                p_recv.add(e.receiver, c, pmk);
                p_dot[c] += pmk;
            }
        }
        Self {
            p_send,
            p_recv,
            p_dot,
        }
    }
}

/// Aggregates that make the gradient cost linear in `n + M`.
#[derive(Debug, Clone)]
pub struct Precompute {
    pub nodes: NodeTerms,
    pub agg: RespAggregates,
    /// `H_k * f_vk = sum_i p_(i1)k / (1 - exp(R1_i + V_i.Y_k) / f_vk)`.
    pub h_scaled: Vec<f64>,
    /// `s_uk / f_uk`, `K x p`.
    pub s_u_ratio: Mat,
    /// `s_vk / f_vk`, `K x p`.
    pub s_v_ratio: Mat,
}

impl Precompute {
    pub fn new(params: &ModelParams, net: &Network, resp: &Mat) -> Self {
        let agg = RespAggregates::new(net, resp);
        Self::from_parts(params, NodeTerms::new(params), agg)
    }

    pub fn from_parts(params: &ModelParams, nodes: NodeTerms, agg: RespAggregates) -> Self {
        let (n, k, p) = (params.n(), params.k(), params.p());
        let mut h_scaled = vec![0.0; k];
        let mut s_u_ratio = Mat::zeros(k, p);
        let mut s_v_ratio = Mat::zeros(k, p);
        for c in 0..k {
            let su = s_u_ratio.row_mut(c);
            for i in 0..n {
                let w = nodes.send_logp.get(i, c).exp();
                for (acc, x) in su.iter_mut().zip(params.u.row(i)) {
                    *acc += w * x;
                }
            }
            let sv = s_v_ratio.row_mut(c);
            let mut h = 0.0;
            for i in 0..n {
                let w = nodes.recv_share.get(i, c);
                for (acc, x) in sv.iter_mut().zip(params.v.row(i)) {
                    *acc += w * x;
                }
                let pi = agg.p_send.get(i, c);
                if pi != 0.0 {
                    h += pi * (nodes.log_f_v[c] - nodes.log_recv_denom.get(i, c)).exp();
                }
            }
            h_scaled[c] = h;
        }
        Self {
            nodes,
            agg,
            h_scaled,
            s_u_ratio,
            s_v_ratio,
        }
    }

    pub fn f_u(&self, k: usize) -> f64 {
        self.nodes.log_f_u[k].exp()
    }

    pub fn f_v(&self, k: usize) -> f64 {
        self.nodes.log_f_v[k].exp()
    }

    /// `H_k = sum_m p_mk / (f_vk - exp(R1_{e_m1} + V_{e_m1}.Y_k))`.
    pub fn h(&self, k: usize) -> f64 {
        self.h_scaled[k] / self.f_v(k)
    }

    /// `s_uk = sum_i exp(S1_i + U_i.Y_k) U_i`.
    pub fn s_u(&self, k: usize) -> Vec<f64> {
        let f = self.f_u(k);
        self.s_u_ratio.row(k).iter().map(|x| x * f).collect()
    }

    /// `s_vk = sum_i exp(R1_i + V_i.Y_k) V_i`.
    pub fn s_v(&self, k: usize) -> Vec<f64> {
        let f = self.f_v(k);
        self.s_v_ratio.row(k).iter().map(|x| x * f).collect()
    }
}

/// Log-density of edge `edge` under cluster `label` (0 = noise), including
/// the sender, receiver and weight factors.
pub fn edge_cluster_log_density(
    params: &ModelParams,
    nodes: &NodeTerms,
    family: WeightFamily,
    noise: &NoiseLaw,
    edge: &Edge,
    label: usize,
) -> f64 {
    let (i, j) = (edge.sender, edge.receiver);
    if label == 0 {
        let n = nodes.n() as f64;
        -(n * (n - 1.0)).ln() + noise.log_density_unchecked(edge.weight)
    } else {
        let k = label - 1;
        nodes.count_log_prob(i, j, k)
            + family.log_density_unchecked(edge.weight, params.eta(i, j, k), params.phi[k])
    }
}

/// Mixture weights `(t0, t_1..t_K)`: noise share and the structural shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureWeights {
    pub t0: f64,
    pub t: Vec<f64>,
}

impl MixtureWeights {
    /// Log prior weight of a cluster label.
    pub fn log_weight(&self, label: usize) -> f64 {
        if label == 0 {
            self.t0.ln()
        } else {
            self.t[label - 1].ln() + (-self.t0).ln_1p()
        }
    }

    /// Maximum-likelihood weights from hard assignments.
    pub fn from_assignments(assignments: &[usize], k: usize) -> Self {
        let mut counts = vec![0usize; k + 1];
        for &a in assignments {
            counts[a] += 1;
        }
        let m = assignments.len() as f64;
        let structural = m - counts[0] as f64;
        let t = counts[1..]
            .iter()
            .map(|&c| if structural > 0.0 { c as f64 / structural } else { 1.0 / k as f64 })
            .collect();
        Self {
            t0: counts[0] as f64 / m,
            t,
        }
    }
}

/// Complete-data log-likelihood at hard assignments.
pub fn complete_log_likelihood(
    params: &ModelParams,
    family: WeightFamily,
    noise: &NoiseLaw,
    net: &Network,
    assignments: &[usize],
    mix: &MixtureWeights,
) -> Result<f64> {
    if assignments.len() != net.n_edges() {
        return Err(WecanError::LengthMismatch {
            left: assignments.len(),
            right: net.n_edges(),
        });
    }
    let nodes = NodeTerms::new(params);
    let mut total = 0.0;
    for (e, &z) in net.edges().iter().zip(assignments) {
        if z > params.k() {
            return Err(WecanError::InvalidArgument(format!(
                "assignment {z} exceeds K = {}",
                params.k()
            )));
        }
        total += mix.log_weight(z) + edge_cluster_log_density(params, &nodes, family, noise, e, z);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(n: usize, k: usize, p: usize, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || rng.random_range(-1.5..1.5);
        let mut prm = ModelParams::zeros(n, k, p);
        for v in [&mut prm.s1, &mut prm.r1, &mut prm.s2, &mut prm.r2, &mut prm.beta] {
            v.iter_mut().for_each(|x| *x = g());
        }
        for m in [&mut prm.u, &mut prm.v, &mut prm.y, &mut prm.lambda] {
            m.as_mut_slice().iter_mut().for_each(|x| *x = g());
        }
        prm.phi.iter_mut().for_each(|x| *x = 0.2 + g().abs());
        prm
    }

    #[test]
    fn eta_examples() {
        let mut prm = ModelParams::zeros(3, 2, 2);
        prm.beta[1] = 0.7;
        assert_eq!(prm.eta(0, 1, 1), 0.7);
        prm.beta[0] = 1.0;
        prm.s2[0] = 0.5;
        prm.r2[2] = -0.25;
        // U_0 Lambda_0 V_2' = 0.5 * 0.4 * 1.0 = 0.2
        prm.u.set(0, 0, 0.5);
        prm.lambda.set(0, 0, 0.4);
        prm.v.set(2, 0, 1.0);
        assert!((prm.eta(0, 2, 0) - 1.45).abs() < 1e-15);
    }

    #[test]
    fn eta_matches_loop_oracle() {
        let prm = random_params(6, 3, 4, 11);
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..3 {
                    let mut want = prm.beta[k] + prm.s2[i] + prm.r2[j];
                    for a in 0..4 {
                        for b in 0..4 {
                            let lam = if a == b { prm.lambda.get(k, a) } else { 0.0 };
                            want += prm.u.get(i, a) * lam * prm.v.get(j, b);
                        }
                    }
                    assert!((prm.eta(i, j, k) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sender_probabilities() {
        let mut prm = ModelParams::zeros(3, 1, 2);
        prm.s1[1] = 2f64.ln();
        let nodes = NodeTerms::new(&prm);
        let probs: Vec<f64> = (0..3).map(|i| nodes.sender_log_prob(i, 1).exp()).collect();
        for (a, b) in probs.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        let big = NodeTerms::new(&ModelParams::zeros(167, 2, 2));
        assert!((big.sender_log_prob(5, 0) - (1.0f64 / 167.0).ln()).abs() < 1e-15);
        assert!((big.sender_log_prob(5, 2) + 167f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn receiver_probabilities() {
        let nodes = NodeTerms::new(&ModelParams::zeros(3, 1, 2));
        assert!((nodes.receiver_log_prob(1, 0, 1).exp() - 0.5).abs() < 1e-15);
        assert!((nodes.receiver_log_prob(2, 0, 1).exp() - 0.5).abs() < 1e-15);
        assert_eq!(nodes.receiver_log_prob(0, 0, 1), f64::NEG_INFINITY);
        let ten = NodeTerms::new(&ModelParams::zeros(10, 1, 2));
        assert!((ten.receiver_log_prob(3, 4, 0) - (1.0f64 / 9.0).ln()).abs() < 1e-15);
        assert_eq!(ten.receiver_log_prob(4, 4, 0), f64::NEG_INFINITY);
    }

    #[test]
    fn probabilities_normalised_on_random_params() {
        for seed in 0..20 {
            let prm = random_params(9, 3, 2, seed);
            let nodes = NodeTerms::new(&prm);
            for label in 1..=3 {
                let s: f64 = (0..9).map(|i| nodes.sender_log_prob(i, label).exp()).sum();
                assert!((s - 1.0).abs() < 1e-12);
                for i in 0..9 {
                    let r: f64 = (0..9).map(|j| nodes.receiver_log_prob(j, i, label).exp()).sum();
                    assert!((r - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn receiver_guard_when_one_node_dominates() {
        let mut prm = ModelParams::zeros(4, 1, 1);
        prm.r1[2] = 60.0;
        let nodes = NodeTerms::new(&prm);
        assert!(nodes.receiver_denominator_clamped(2, 0));
        assert!(!nodes.receiver_denominator_clamped(0, 0));
        assert!(nodes.receiver_log_prob(1, 2, 1).is_finite());
    }

    #[test]
    fn edge_density_examples() {
        let prm = ModelParams::zeros(10, 2, 2);
        let nodes = NodeTerms::new(&prm);
        let law = NoiseLaw::new(20.0).unwrap();
        let fam = WeightFamily::Normal;
        let noise = edge_cluster_log_density(&prm, &nodes, fam, &law, &Edge::new(0, 1, 0.1), 0);
        let want = (1.0f64 / 90.0).ln() + 20f64.ln() - 2.0;
        assert!((noise - want).abs() < 1e-12);
        let structural = edge_cluster_log_density(&prm, &nodes, fam, &law, &Edge::new(0, 1, 0.0), 1);
        let want = -(10f64.ln()) - 9f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((structural - want).abs() < 1e-12);
    }

    #[test]
    fn complete_likelihood_factorises() {
        let prm = random_params(5, 2, 2, 5);
        let net = Network::new(
            5,
            vec![Edge::new(0, 1, 0.3), Edge::new(2, 4, 1.1), Edge::new(3, 0, 0.8)],
        )
        .unwrap();
        let law = NoiseLaw::new(5.0).unwrap();
        let fam = WeightFamily::Normal;
        let nodes = NodeTerms::new(&prm);
        let mix = MixtureWeights { t0: 0.2, t: vec![0.3, 0.7] };

        let single = Network::new(5, vec![Edge::new(0, 1, 0.3)]).unwrap();
        let one = complete_log_likelihood(&prm, fam, &law, &single, &[0], &mix).unwrap();
        let want = 0.2f64.ln() + edge_cluster_log_density(&prm, &nodes, fam, &law, &single.edges()[0], 0);
        assert!((one - want).abs() < 1e-12);

        let all = complete_log_likelihood(&prm, fam, &law, &net, &[2, 2, 2], &mix).unwrap();
        let dens: f64 = net
            .edges()
            .iter()
            .map(|e| edge_cluster_log_density(&prm, &nodes, fam, &law, e, 2))
            .sum();
        let want = 3.0 * (0.7f64.ln() + 0.8f64.ln()) + dens;
        assert!((all - want).abs() < 1e-12);
        assert!(complete_log_likelihood(&prm, fam, &law, &net, &[0, 1], &mix).is_err());
    }

    #[test]
    fn precompute_small_cases() {
        let prm = ModelParams::zeros(2, 1, 2);
        let net = Network::new(2, vec![Edge::new(0, 1, 1.0)]).unwrap();
        let resp = Mat::from_rows(&[vec![0.0, 1.0]]);
        let pre = Precompute::new(&prm, &net, &resp);
        assert!((pre.f_u(0) - 2.0).abs() < 1e-15);
        assert!((pre.f_v(0) - 2.0).abs() < 1e-15);
        assert_eq!(pre.s_u(0), vec![0.0, 0.0]);
        assert_eq!(pre.agg.p_dot, vec![1.0]);
    }

    #[test]
    fn precompute_h_matches_edge_loop() {
        let prm = random_params(7, 3, 2, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut edges = Vec::new();
        for _ in 0..25 {
            let i = rng.random_range(0..7);
            let mut j = rng.random_range(0..6);
            if j >= i {
                j += 1;
            }
            edges.push(Edge::new(i, j, rng.random_range(0.1..2.0)));
        }
        let net = Network::new(7, edges).unwrap();
        let resp = Mat::from_fn(25, 4, |m, c| ((m * 7 + c * 3) % 5 + 1) as f64);
        let resp = {
            let mut r = resp;
            for m in 0..25 {
                let s: f64 = r.row(m).iter().sum();
                r.row_mut(m).iter_mut().for_each(|x| *x /= s);
            }
            r
        };
        let pre = Precompute::new(&prm, &net, &resp);
        for k in 0..3 {
            let fv: f64 = (0..7).map(|i| (prm.r1[i] + dot(prm.v.row(i), prm.y.row(k))).exp()).sum();
            let naive: f64 = net
                .edges()
                .iter()
                .enumerate()
                .map(|(m, e)| {
                    let own = (prm.r1[e.sender] + dot(prm.v.row(e.sender), prm.y.row(k))).exp();
                    resp.get(m, k + 1) / (fv - own)
                })
                .sum();
            assert!((pre.h(k) - naive).abs() < 1e-12 * naive.abs().max(1.0));
            let col: f64 = (0..25).map(|m| resp.get(m, k + 1)).sum();
            assert!((pre.agg.p_dot[k] - col).abs() < 1e-12);
            let sum_send: f64 = (0..7).map(|i| pre.agg.p_send.get(i, k)).sum();
            let sum_recv: f64 = (0..7).map(|i| pre.agg.p_recv.get(i, k)).sum();
            assert!((sum_send - col).abs() < 1e-12 && (sum_recv - col).abs() < 1e-12);
        }
    }
}
