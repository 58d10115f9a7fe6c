//! Synthetic networks drawn from the generative model.
//!
//! Node propensities are correlated bivariate normals. Each node picks one
//! cluster direction uniformly; its `U` and `V` directions are von
//! Mises-Fisher draws around that direction, scaled by independent gamma
//! magnitudes. Cluster positions `Y_k` sit equally spaced on the unit circle
//! in the first two latent coordinates.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WecanError};
use crate::family::WeightFamily;
use crate::graph::{Edge, Network};
use crate::linalg::{dot, Cov2, Mat};
use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_nodes: usize,
    /// Exact number of generated edges.
    pub n_edges: usize,
    pub k_true: usize,
    pub noise_proportion: f64,
    pub p: usize,
    /// Marginal variance of every propensity.
    pub propensity_var: f64,
    /// Correlation between the sender and receiver propensity of a node.
    pub propensity_corr: f64,
    pub vmf_kappa: f64,
    pub magnitude_shape: f64,
    pub magnitude_rate: f64,
    /// Intercepts are drawn from this pool without replacement.
    pub beta_pool: Vec<f64>,
    pub lambda_magnitude: f64,
    pub noise_shape: f64,
    pub noise_rate: f64,
    pub phi_low: f64,
    pub phi_high: f64,
    /// Radius of the circle holding the cluster positions.
    pub y_radius: f64,
    pub family: WeightFamily,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl SimConfig {
    /// 400 nodes, 7065 edges, four clusters, 15% noise.
    pub fn paper() -> Self {
        Self {
            n_nodes: 400,
            n_edges: 7065,
            k_true: 4,
            noise_proportion: 0.15,
            p: 2,
            propensity_var: 2.0,
            propensity_corr: 0.75,
            vmf_kappa: 50.0,
            magnitude_shape: 150.0,
            magnitude_rate: 40.0,
            beta_pool: vec![-1.0, -2.0, 1.0, 2.0],
            lambda_magnitude: 0.4,
            noise_shape: 2.0,
            noise_rate: 20.0,
            phi_low: 0.05,
            phi_high: 0.5,
            y_radius: 1.0,
            family: WeightFamily::Normal,
            seed: 0,
        }
    }

    /// 150 nodes and 1200 edges; otherwise as [`SimConfig::paper`].
    pub fn desk() -> Self {
        Self {
            n_nodes: 150,
            n_edges: 1200,
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(WecanError::InvalidArgument(msg));
        if self.n_nodes < 2 {
            return bad("n_nodes must be at least 2".into());
        }
        if self.n_edges == 0 {
            return bad("n_edges must be positive".into());
        }
        if self.k_true == 0 || self.k_true > self.beta_pool.len() {
            return bad(format!(
                "k_true must be between 1 and the beta pool size {}",
                self.beta_pool.len()
            ));
        }
        if !(0.0..1.0).contains(&self.noise_proportion) {
            return bad("noise_proportion must lie in [0, 1)".into());
        }
        if self.p < 2 {
            return bad("p must be at least 2".into());
        }
        if !(self.propensity_var > 0.0) || !(self.propensity_corr.abs() < 1.0) {
            return bad("propensity covariance must be positive definite".into());
        }
        if !(self.vmf_kappa >= 0.0) {
            return bad("vmf_kappa must be non-negative".into());
        }
        for (name, v) in [
            ("magnitude_shape", self.magnitude_shape),
            ("magnitude_rate", self.magnitude_rate),
            ("noise_shape", self.noise_shape),
            ("noise_rate", self.noise_rate),
            ("phi_low", self.phi_low),
            ("y_radius", self.y_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.phi_high >= self.phi_low) {
            return bad("phi_high must be at least phi_low".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub network: Network,
    /// `0` noise, `k + 1` structural cluster `k`.
    pub truth: Vec<usize>,
    /// Generating parameters (covariances hold the propensity law).
    pub params: ModelParams,
    /// Cluster direction picked by each node.
    pub node_component: Vec<usize>,
}

/// Wood's rejection sampler for the von Mises-Fisher distribution on the
/// unit sphere in `mu.len()` dimensions.
pub fn sample_vmf<R: Rng + ?Sized>(mu: &[f64], kappa: f64, rng: &mut R) -> Result<Vec<f64>> {
    let p = mu.len();
    if p < 2 {
        return Err(WecanError::InvalidArgument("vMF dimension must be at least 2".into()));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(WecanError::InvalidArgument(format!("kappa must be >= 0, got {kappa}")));
    }
    let norm = dot(mu, mu).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(WecanError::InvalidArgument("mu must be a unit vector".into()));
    }
    let d = (p - 1) as f64;
    let b = d / ((4.0 * kappa * kappa + d * d).sqrt() + 2.0 * kappa);
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + d * (1.0 - x0 * x0).ln();
    let beta = Beta::new(d / 2.0, d / 2.0).expect("valid beta parameters");
    let w = loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + d * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };
    // uniform direction orthogonal to mu
    let orth = loop {
        let mut v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let proj = dot(&v, mu);
        v.iter_mut().zip(mu).for_each(|(x, m)| *x -= proj * m);
        let len = dot(&v, &v).sqrt();
        if len > 1e-12 {
            v.iter_mut().for_each(|x| *x /= len);
            break v;
        }
    };
    let s = (1.0 - w * w).max(0.0).sqrt();
    Ok(mu.iter().zip(&orth).map(|(m, o)| w * m + s * o).collect())
}

/// Correlated pair `(a_i, b_i)` for every node.
fn propensity_pairs<R: Rng>(n: usize, var: f64, corr: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let sd = var.sqrt();
    let tail = (1.0 - corr * corr).sqrt();
    (0..n)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            (sd * z1, sd * (corr * z1 + tail * z2))
        })
        .unzip()
}

/// Sign of coordinate `d` of cluster `k`: bit `p - 1 - d` of `k`.
fn lambda_sign(k: usize, d: usize, p: usize) -> f64 {
    let shift = (p - 1 - d) % usize::BITS as usize;
    if (k >> shift) & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

pub fn generate(config: &SimConfig) -> Result<Simulation> {
    config.validate()?;
    let (n, k, p) = (config.n_nodes, config.k_true, config.p);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut params = ModelParams::zeros(n, k, p);
    let cov = Cov2::new(
        config.propensity_var,
        config.propensity_corr * config.propensity_var,
        config.propensity_var,
    );
    (params.s1, params.r1) = propensity_pairs(n, config.propensity_var, config.propensity_corr, &mut rng);
    (params.s2, params.r2) = propensity_pairs(n, config.propensity_var, config.propensity_corr, &mut rng);
    params.sigma_sr1 = cov;
    params.sigma_sr2 = cov;

    for c in 0..k {
        let angle = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
        params.y.set(c, 0, config.y_radius * angle.cos());
        params.y.set(c, 1, config.y_radius * angle.sin());
    }
    let directions: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let row = params.y.row(c);
            let len = dot(row, row).sqrt();
            row.iter().map(|x| x / len).collect()
        })
        .collect();

    let magnitude = Gamma::new(config.magnitude_shape, 1.0 / config.magnitude_rate)
        .map_err(|e| WecanError::InvalidArgument(e.to_string()))?;
    let mut node_component = Vec::with_capacity(n);
    for i in 0..n {
        let c = rng.random_range(0..k);
        node_component.push(c);
        let du = sample_vmf(&directions[c], config.vmf_kappa, &mut rng)?;
        let mu: f64 = magnitude.sample(&mut rng);
        let dv = sample_vmf(&directions[c], config.vmf_kappa, &mut rng)?;
        let mv: f64 = magnitude.sample(&mut rng);
        for d in 0..p {
            params.u.set(i, d, mu * du[d]);
            params.v.set(i, d, mv * dv[d]);
        }
    }

    let mut pool = config.beta_pool.clone();
    pool.shuffle(&mut rng);
    params.beta = pool[..k].to_vec();
    for c in 0..k {
        for d in 0..p {
            params.lambda.set(c, d, config.lambda_magnitude * lambda_sign(c, d, p));
        }
    }
    params.lambda_var = config.lambda_magnitude * config.lambda_magnitude;
    params.phi = (0..k)
        .map(|_| rng.random_range(config.phi_low..=config.phi_high))
        .collect();

    let softmax_index = |prop: &[f64], pos: &Mat, c: usize| -> Result<WeightedIndex<f64>> {
        let scores: Vec<f64> = (0..n).map(|i| prop[i] + dot(pos.row(i), params.y.row(c))).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        WeightedIndex::new(scores.iter().map(|s| (s - max).exp()))
            .map_err(|e| WecanError::InvalidArgument(e.to_string()))
    };
    let senders = (0..k)
        .map(|c| softmax_index(&params.s1, &params.u, c))
        .collect::<Result<Vec<_>>>()?;
    let receivers = (0..k)
        .map(|c| softmax_index(&params.r1, &params.v, c))
        .collect::<Result<Vec<_>>>()?;
    let noise_weight = Gamma::new(config.noise_shape, 1.0 / config.noise_rate)
        .map_err(|e| WecanError::InvalidArgument(e.to_string()))?;

    let mut edges = Vec::with_capacity(config.n_edges);
    let mut truth = Vec::with_capacity(config.n_edges);
    for _ in 0..config.n_edges {
        if rng.random::<f64>() < config.noise_proportion {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            edges.push(Edge::new(i, j, noise_weight.sample(&mut rng)));
            truth.push(0);
        } else {
            let c = rng.random_range(0..k);
            let i = senders[c].sample(&mut rng);
            // receiver softmax with the sender removed, by rejection
            let j = loop {
                let j = receivers[c].sample(&mut rng);
                if j != i {
                    break j;
                }
            };
            let w = config.family.sample(params.eta(i, j, c), params.phi[c], &mut rng);
            edges.push(Edge::new(i, j, w));
            truth.push(c + 1);
        }
    }
    Ok(Simulation {
        network: Network::new(n, edges)?,
        truth,
        params,
        node_component,
    })
}
