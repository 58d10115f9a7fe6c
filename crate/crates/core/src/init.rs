//! Starting values.
//!
//! Count-structure parameters `(S1, R1, U, V, Y)` come from a fit of the
//! count-only sub-model (no weight factor, no noise component). Weight
//! propensities start from log weighted degrees, dispersions from the
//! spread of the weights, and the rest from the priors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::estimation::{run_vbgem, EStepConfig, Problem, RunConfig, RunReport, VariationalState};
use crate::family::WeightFamily;
use crate::graph::Network;
use crate::linalg::Mat;
use crate::model::{ModelParams, PriorConfig};

/// Lower bound on an initial dispersion.
pub const PHI_FLOOR: f64 = 1e-3;

/// Output of the count-only pre-fit.
#[derive(Debug, Clone)]
pub struct UnweightedInit {
    /// Fitted count parameters; weight parameters are left at zero.
    pub params: ModelParams,
    /// Responsibilities with an all-zero noise column.
    pub resp: Mat,
    pub report: RunReport,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fits the count-only sub-model from a random start.
pub fn init_unweighted(
    net: &Network,
    prior: &PriorConfig,
    config: &RunConfig,
    seed: u64,
) -> Result<UnweightedInit> {
    let problem = Problem::unweighted(net, prior)?;
    let (n, k, p) = (net.n_nodes(), prior.k_max, prior.p);
    let mut rng = rng_for(seed, 1);
    let mut params = ModelParams::zeros(n, k, p);
    for x in params
        .u
        .as_mut_slice()
        .iter_mut()
        .chain(params.v.as_mut_slice())
        .chain(params.y.as_mut_slice())
    {
        *x = rng.sample(StandardNormal);
    }
    params.sigma_sr1 = prior.psi0_sr1.scaled(1.0 / (prior.nu0_sr1 + 3.0));
    params.sigma_uv = prior.psi0_uv.scaled(1.0 / (prior.nu0_uv + 3.0));
    params.alpha = prior.a_alpha / prior.b_alpha;

    let resp = Mat::from_fn(net.n_edges(), k + 1, |_, c| if c == 0 { 0.0 } else { 1.0 / k as f64 });
    let mut state = VariationalState::from_resp(&problem, params.alpha, resp);
    // a single sweep: iterating to convergence here lets the sparse weight
    // prior empty most clusters before the parameters have adapted
    let first = EStepConfig {
        max_iter: 1,
        ..config.estep
    };
    crate::estimation::e_step(&problem, &params, &mut state, &first)?;
    let report = run_vbgem(&problem, &mut params, &mut state, config)?;
    Ok(UnweightedInit {
        params,
        resp: state.resp,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightInit {
    pub s2: Vec<f64>,
    pub r2: Vec<f64>,
    pub phi: f64,
}

/// `S2_i = log(1 + out-weight of i)` and `R2_j = log(1 + in-weight of j)`,
/// each centred to mean zero, and the sample standard deviation of the
/// weight statistics (floored at [`PHI_FLOOR`]).
///
/// For the log-normal family the weights are replaced by their logarithms.
pub fn init_weight_params(net: &Network, family: WeightFamily) -> WeightInit {
    let n = net.n_nodes();
    let stats: Vec<f64> = net.weights().map(|w| family.statistic(w)).collect();
    let mut out_sum = vec![0.0; n];
    let mut in_sum = vec![0.0; n];
    for (e, s) in net.edges().iter().zip(&stats) {
        out_sum[e.sender] += s;
        in_sum[e.receiver] += s;
    }
    // negative sums (possible for normal weights) are treated as zero
    let transform = |sums: Vec<f64>| -> Vec<f64> {
        let logged: Vec<f64> = sums.iter().map(|s| s.max(0.0).ln_1p()).collect();
        let mean = logged.iter().sum::<f64>() / n as f64;
        logged.iter().map(|x| x - mean).collect()
    };
    let m = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / m;
    let sd = if stats.len() > 1 {
        (stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    WeightInit {
        s2: transform(out_sum),
        r2: transform(in_sum),
        phi: sd.max(PHI_FLOOR),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemainingInit {
    pub lambda: Mat,
    pub beta: Vec<f64>,
    pub sigma_sr1: crate::linalg::Cov2,
    pub sigma_sr2: crate::linalg::Cov2,
    pub sigma_uv: crate::linalg::Cov2,
    pub lambda_var: f64,
    pub alpha: f64,
}

/// `Lambda = 0`, `beta_k ~ N(mean_stat, 0.1^2)`, covariances at
/// `Psi0 / (nu0 + 3)`, `lambda = b0 / (a0 + 1)`, `alpha = a_alpha / b_alpha`.
pub fn init_remaining(prior: &PriorConfig, mean_stat: f64, seed: u64) -> RemainingInit {
    let mut rng = rng_for(seed, 2);
    let beta = (0..prior.k_max)
        .map(|_| mean_stat + 0.1 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    RemainingInit {
        lambda: Mat::zeros(prior.k_max, prior.p),
        beta,
        sigma_sr1: prior.psi0_sr1.scaled(1.0 / (prior.nu0_sr1 + 3.0)),
        sigma_sr2: prior.psi0_sr2.scaled(1.0 / (prior.nu0_sr2 + 3.0)),
        sigma_uv: prior.psi0_uv.scaled(1.0 / (prior.nu0_uv + 3.0)),
        lambda_var: prior.b0 / (prior.a0 + 1.0),
        alpha: prior.a_alpha / prior.b_alpha,
    }
}

/// Complete starting point for the weighted fit.
pub fn initialize(
    net: &Network,
    family: WeightFamily,
    prior: &PriorConfig,
    prefit: &RunConfig,
    seed: u64,
) -> Result<(ModelParams, UnweightedInit)> {
    let unweighted = init_unweighted(net, prior, prefit, seed)?;
    let weights = init_weight_params(net, family);
    let mean_stat = net.weights().map(|w| family.statistic(w)).sum::<f64>() / net.n_edges() as f64;
    let rest = init_remaining(prior, mean_stat, seed);

    let mut params = unweighted.params.clone();
    balance_scales(&mut params, &unweighted.resp, prior);
    params.s2 = weights.s2;
    params.r2 = weights.r2;
    params.phi = vec![weights.phi; prior.k_max];
    params.lambda = rest.lambda;
    params.beta = rest.beta;
    params.sigma_sr2 = rest.sigma_sr2;
    params.lambda_var = rest.lambda_var;
    Ok((params, unweighted))
}

/// Rescales `U, V` by `c` and `Y` by `1 / c` so the node features and the
/// occupied cluster features have equal root-mean-square size. The count
/// likelihood depends only on `U Y'` and `V Y'`, so it is unchanged.
pub fn balance_scales(params: &mut ModelParams, resp: &Mat, prior: &PriorConfig) {
    let mass = resp.col_sums();
    let rms = |xs: &mut dyn Iterator<Item = f64>| {
        let (mut s, mut c) = (0.0, 0usize);
        for x in xs {
            s += x * x;
            c += 1;
        }
        if c == 0 { 0.0 } else { (s / c as f64).sqrt() }
    };
    let node = rms(&mut params.u.as_slice().iter().chain(params.v.as_slice()).copied());
    let occupied: Vec<usize> = (0..params.k()).filter(|&k| mass[k + 1] >= 1.0).collect();
    let clus = rms(&mut occupied.iter().flat_map(|&k| params.y.row(k).to_vec()));
    if !(node > 0.0 && clus > 0.0) {
        return;
    }
    let c = (clus / node).sqrt();
    params.u.as_mut_slice().iter_mut().for_each(|x| *x *= c);
    params.v.as_mut_slice().iter_mut().for_each(|x| *x *= c);
    params.y.as_mut_slice().iter_mut().for_each(|x| *x /= c);
    params.sigma_uv = crate::estimation::update_sigma_uv(&params.u, &params.v, &prior.psi0_uv, prior.nu0_uv);
}
