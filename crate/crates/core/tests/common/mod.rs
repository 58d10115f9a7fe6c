//! Independent reference implementations used by the integration tests.
//!
//! Everything here is written edge by edge from the model definition and
//! shares no code with the library beyond the data containers.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use wecan::estimation::{Gradient, MixtureUpdate, Objective, Problem, VariationalState};
use wecan::linalg::{Cov2, Mat};
use wecan::model::{ModelParams, PriorConfig};
use wecan::{Edge, Network, NoiseLaw, WeightFamily};

pub struct Instance {
    pub net: Network,
    pub params: ModelParams,
    pub resp: Mat,
    pub prior: PriorConfig,
    pub noise: NoiseLaw,
}

pub fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    sd * rng.sample::<f64, _>(StandardNormal)
}

pub fn random_spd(rng: &mut ChaCha8Rng) -> Cov2 {
    let a: f64 = rng.random_range(0.5..2.0);
    let c = rng.random_range(0.5..2.0);
    let b = rng.random_range(-0.6..0.6) * (a * c).sqrt();
    Cov2::new(a, b, c)
}

/// Random parameters, edges and responsibilities (noise column first).
pub fn random_instance(seed: u64, n: usize, k: usize, p: usize, m: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(n, k, p);
    for x in params
        .s1
        .iter_mut()
        .chain(params.r1.iter_mut())
        .chain(params.s2.iter_mut())
        .chain(params.r2.iter_mut())
        .chain(params.beta.iter_mut())
    {
        *x = normal(&mut rng, 0.8);
    }
    for x in params
        .u
        .as_mut_slice()
        .iter_mut()
        .chain(params.v.as_mut_slice())
        .chain(params.y.as_mut_slice())
        .chain(params.lambda.as_mut_slice())
    {
        *x = normal(&mut rng, 0.7);
    }
    for f in params.phi.iter_mut() {
        *f = rng.random_range(0.3..1.5);
    }
    params.sigma_sr1 = random_spd(&mut rng);
    params.sigma_sr2 = random_spd(&mut rng);
    params.sigma_uv = random_spd(&mut rng);
    params.lambda_var = rng.random_range(0.3..2.0);
    params.alpha = rng.random_range(0.05..2.0);

    let edges: Vec<Edge> = (0..m)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            Edge::new(i, j, rng.random_range(0.05..3.0))
        })
        .collect();
    let net = Network::new(n, edges).unwrap();
    let gamma = Gamma::new(1.0, 1.0).unwrap();
    let resp = Mat::from_rows(
        &(0..m)
            .map(|_| {
                let row: Vec<f64> = (0..=k).map(|_| gamma.sample(&mut rng)).collect();
                let s: f64 = row.iter().sum();
                row.into_iter().map(|x| x / s).collect()
            })
            .collect::<Vec<_>>(),
    );
    let mut prior = PriorConfig::new(k, p);
    prior.psi0_sr1 = random_spd(&mut rng);
    prior.psi0_sr2 = random_spd(&mut rng);
    prior.psi0_uv = random_spd(&mut rng);
    prior.nu0_sr1 = rng.random_range(2.0..6.0);
    prior.nu0_sr2 = rng.random_range(2.0..6.0);
    prior.nu0_uv = rng.random_range(2.0..6.0);
    prior.a0 = rng.random_range(0.5..3.0);
    prior.b0 = rng.random_range(0.5..3.0);
    prior.nu0_t = rng.random_range(1.0..6.0);
    prior.eta0_t = rng.random_range(0.5..2.0);
    let noise = NoiseLaw::new(rng.random_range(1.0..20.0)).unwrap();
    Instance {
        net,
        params,
        resp,
        prior,
        noise,
    }
}

pub fn problem<'a>(inst: &'a Instance, family: WeightFamily) -> Problem<'a> {
    Problem::new(&inst.net, family, inst.noise, &inst.prior).unwrap()
}

/// Variational state carrying `inst.resp` with arbitrary `E[log t]`.
pub fn state_for(inst: &Instance, problem: &Problem) -> VariationalState {
    VariationalState::from_resp(problem, inst.params.alpha, inst.resp.clone())
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inv2(s: &Cov2) -> [[f64; 2]; 2] {
    let [[a, b], [_, c]] = s.0;
    let det = a * c - b * b;
    [[c / det, -b / det], [-b / det, a / det]]
}

/// Sender probabilities of cluster `k`, computed directly.
pub fn sender_probs(params: &ModelParams, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..params.n())
        .map(|i| (params.s1[i] + dotp(params.u.row(i), params.y.row(k))).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Receiver probabilities of cluster `k` given sender `i`.
pub fn receiver_probs(params: &ModelParams, i: usize, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..params.n())
        .map(|j| {
            if j == i {
                0.0
            } else {
                (params.r1[j] + dotp(params.v.row(j), params.y.row(k))).exp()
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

pub fn eta(params: &ModelParams, i: usize, j: usize, k: usize) -> f64 {
    let mut e = params.beta[k] + params.s2[i] + params.r2[j];
    for d in 0..params.p() {
        e += params.u.get(i, d) * params.lambda.get(k, d) * params.v.get(j, d);
    }
    e
}

/// Normal or log-normal weight log-density written out in full.
pub fn weight_log_density(family: WeightFamily, w: f64, eta: f64, phi: f64) -> f64 {
    let (y, jac) = match family {
        WeightFamily::Normal => (w, 0.0),
        WeightFamily::LogNormal => (w.ln(), -w.ln()),
    };
    -0.5 * (2.0 * std::f64::consts::PI).ln() - phi.ln() - (y - eta).powi(2) / (2.0 * phi * phi) + jac
}

/// Parameter log prior restricted to the optimised blocks (covariances and
/// hyperparameters held fixed, constants dropped).
pub fn naive_prior(params: &ModelParams, prior: &PriorConfig) -> f64 {
    let mut lp = 0.0;
    let pair = |a: f64, b: f64, s: &Cov2| {
        let q = inv2(s);
        -0.5 * (q[0][0] * a * a + 2.0 * q[0][1] * a * b + q[1][1] * b * b)
    };
    for i in 0..params.n() {
        lp += pair(params.s1[i], params.r1[i], &params.sigma_sr1);
        lp += pair(params.s2[i], params.r2[i], &params.sigma_sr2);
        for d in 0..params.p() {
            lp += pair(params.u.get(i, d), params.v.get(i, d), &params.sigma_uv);
        }
    }
    lp -= 0.5 * params.y.as_slice().iter().map(|x| x * x).sum::<f64>();
    lp -= 0.5 * params.lambda.as_slice().iter().map(|x| x * x).sum::<f64>() / params.lambda_var;
    for &f in &params.phi {
        lp -= 0.5 * (prior.nu0_t + 1.0) * (1.0 + f * f / (prior.nu0_t * prior.eta0_t.powi(2))).ln();
    }
    lp
}

/// `sum_m sum_k p_mk log pi(e_m | k)` over structural clusters plus the
/// parameter prior, edge by edge.
pub fn naive_q(inst: &Instance, params: &ModelParams, family: WeightFamily, weighted: bool) -> f64 {
    let k_max = params.k();
    let send: Vec<Vec<f64>> = (0..k_max).map(|k| sender_probs(params, k)).collect();
    let mut q = 0.0;
    for (m, e) in inst.net.edges().iter().enumerate() {
        for k in 0..k_max {
            let pmk = inst.resp.get(m, k + 1);
            let mut lp = send[k][e.sender].ln() + receiver_probs(params, e.sender, k)[e.receiver].ln();
            if weighted {
                lp += weight_log_density(family, e.weight, eta(params, e.sender, e.receiver, k), params.phi[k]);
            }
            q += pmk * lp;
        }
    }
    q + naive_prior(params, &inst.prior)
}

/// Gradient of [`naive_q`] accumulated edge by edge in `O(n M K)`, in the
/// order s1, r1, s2, r2, u, v, lambda, y, beta, phi.
pub struct NaiveGradient {
    pub s1: Vec<f64>,
    pub r1: Vec<f64>,
    pub s2: Vec<f64>,
    pub r2: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
}

pub fn naive_gradient(inst: &Instance, params: &ModelParams, family: WeightFamily, weighted: bool) -> NaiveGradient {
    let (n, k_max, p) = (params.n(), params.k(), params.p());
    let mut g = NaiveGradient {
        s1: vec![0.0; n],
        r1: vec![0.0; n],
        s2: vec![0.0; n],
        r2: vec![0.0; n],
        u: vec![vec![0.0; p]; n],
        v: vec![vec![0.0; p]; n],
        lambda: vec![vec![0.0; p]; k_max],
        y: vec![vec![0.0; p]; k_max],
        beta: vec![0.0; k_max],
        phi: vec![0.0; k_max],
    };
    for (m, e) in inst.net.edges().iter().enumerate() {
        let (i, j) = (e.sender, e.receiver);
        for k in 0..k_max {
            let pmk = inst.resp.get(m, k + 1);
            let yk = params.y.row(k).to_vec();
            let ps = sender_probs(params, k);
            let pr = receiver_probs(params, i, k);
            for l in 0..n {
                let ds = if l == i { 1.0 } else { 0.0 } - ps[l];
                let dr = if l == j { 1.0 } else { 0.0 } - pr[l];
                g.s1[l] += pmk * ds;
                g.r1[l] += pmk * dr;
                for d in 0..p {
                    g.u[l][d] += pmk * ds * yk[d];
                    g.v[l][d] += pmk * dr * yk[d];
                    g.y[k][d] -= pmk * (ps[l] * params.u.get(l, d) + pr[l] * params.v.get(l, d));
                }
            }
            for d in 0..p {
                g.y[k][d] += pmk * (params.u.get(i, d) + params.v.get(j, d));
            }
            if weighted {
                let (y, _) = match family {
                    WeightFamily::Normal => (e.weight, 0.0),
                    WeightFamily::LogNormal => (e.weight.ln(), 0.0),
                };
                let phi = params.phi[k];
                let r = y - eta(params, i, j, k);
                let de = pmk * r / (phi * phi);
                g.beta[k] += de;
                g.s2[i] += de;
                g.r2[j] += de;
                for d in 0..p {
                    let (ui, vj, lk) = (params.u.get(i, d), params.v.get(j, d), params.lambda.get(k, d));
                    g.u[i][d] += de * lk * vj;
                    g.v[j][d] += de * lk * ui;
                    g.lambda[k][d] += de * ui * vj;
                }
                g.phi[k] += pmk * (r * r / phi.powi(3) - 1.0 / phi);
            }
        }
    }
    let prior = &inst.prior;
    let (a, b, c) = (inv2(&params.sigma_sr1), inv2(&params.sigma_sr2), inv2(&params.sigma_uv));
    for l in 0..n {
        g.s1[l] -= a[0][0] * params.s1[l] + a[0][1] * params.r1[l];
        g.r1[l] -= a[1][1] * params.r1[l] + a[0][1] * params.s1[l];
        g.s2[l] -= b[0][0] * params.s2[l] + b[0][1] * params.r2[l];
        g.r2[l] -= b[1][1] * params.r2[l] + b[0][1] * params.s2[l];
        for d in 0..p {
            let (u, v) = (params.u.get(l, d), params.v.get(l, d));
            g.u[l][d] -= c[0][0] * u + c[0][1] * v;
            g.v[l][d] -= c[1][1] * v + c[0][1] * u;
        }
    }
    for k in 0..k_max {
        for d in 0..p {
            g.y[k][d] -= params.y.get(k, d);
            g.lambda[k][d] -= params.lambda.get(k, d) / params.lambda_var;
        }
        let f = params.phi[k];
        g.phi[k] -= (prior.nu0_t + 1.0) * f / (prior.nu0_t * prior.eta0_t.powi(2) + f * f);
    }
    g
}

pub fn sparse_finite() -> MixtureUpdate {
    MixtureUpdate::SparseFinite
}

pub const BLOCKS: [&str; 10] = ["s1", "r1", "s2", "r2", "u", "v", "lambda", "y", "beta", "phi"];

pub fn field_mut(p: &mut ModelParams, b: usize) -> &mut [f64] {
    match b {
        0 => &mut p.s1,
        1 => &mut p.r1,
        2 => &mut p.s2,
        3 => &mut p.r2,
        4 => p.u.as_mut_slice(),
        5 => p.v.as_mut_slice(),
        6 => p.lambda.as_mut_slice(),
        7 => p.y.as_mut_slice(),
        8 => &mut p.beta,
        _ => &mut p.phi,
    }
}

pub fn grad_field(g: &Gradient, b: usize) -> &[f64] {
    match b {
        0 => &g.s1,
        1 => &g.r1,
        2 => &g.s2,
        3 => &g.r2,
        4 => g.u.as_slice(),
        5 => g.v.as_slice(),
        6 => g.lambda.as_slice(),
        7 => g.y.as_slice(),
        8 => &g.beta,
        _ => &g.phi,
    }
}

pub fn naive_field(g: &NaiveGradient, b: usize) -> Vec<f64> {
    match b {
        0 => g.s1.clone(),
        1 => g.r1.clone(),
        2 => g.s2.clone(),
        3 => g.r2.clone(),
        4 => g.u.concat(),
        5 => g.v.concat(),
        6 => g.lambda.concat(),
        7 => g.y.concat(),
        8 => g.beta.clone(),
        _ => g.phi.clone(),
    }
}

/// Worst `|a - b| / max(|a|, |b|, 1)` between the library gradient and
/// central differences of the reference objective, per block.
pub fn fd_errors(seed: u64, family: WeightFamily) -> [f64; 10] {
    let inst = random_instance(seed, 12, 3, 2, 40);
    let problem = problem(&inst, family);
    let state = state_for(&inst, &problem);
    let obj = Objective::new(&problem, &state);
    let g = obj.gradient(&inst.params, true);
    let mut worst = [0.0; 10];
    for b in 0..10 {
        let len = field_mut(&mut inst.params.clone(), b).len();
        for idx in 0..len {
            let h = 1e-5;
            let mut plus = inst.params.clone();
            field_mut(&mut plus, b)[idx] += h;
            let mut minus = inst.params.clone();
            field_mut(&mut minus, b)[idx] -= h;
            let fd = (naive_q(&inst, &plus, family, true) - naive_q(&inst, &minus, family, true)) / (2.0 * h);
            let an = grad_field(&g, b)[idx];
            let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1.0);
            worst[b] = f64::max(worst[b], err);
        }
    }
    worst
}

