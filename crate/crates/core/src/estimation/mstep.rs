//! Generalised M-step: block-wise nonlinear conjugate gradient on `Q`
//! followed by closed-form updates of the covariance, interaction-variance
//! and concentration hyperparameters.

use serde::{Deserialize, Serialize};

use super::objective::{alpha_term, Gradient, Objective};
use super::problem::{MixtureUpdate, Problem};
use super::variational::VariationalState;
use crate::linalg::{dot, Cov2, Mat};
use crate::model::{ModelParams, NodeTerms};
use crate::special::{digamma, trigamma};

/// Parameter groups optimised by conjugate gradient, one at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    /// `(S1, R1)`
    CountPropensities,
    /// `(U, V)`
    LatentFeatures,
    /// `Y`
    ClusterFeatures,
    /// `(S2, R2)`
    WeightPropensities,
    /// `diag(Lambda_k)`
    Interactions,
    /// `beta`
    Intercepts,
    /// `phi`, optimised as `log phi`.
    Dispersions,
}

impl Block {
    pub const ALL: [Block; 7] = [
        Block::CountPropensities,
        Block::LatentFeatures,
        Block::ClusterFeatures,
        Block::WeightPropensities,
        Block::Interactions,
        Block::Intercepts,
        Block::Dispersions,
    ];

    pub const COUNT_ONLY: [Block; 3] = [
        Block::CountPropensities,
        Block::LatentFeatures,
        Block::ClusterFeatures,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn touches_nodes(self) -> bool {
        matches!(
            self,
            Block::CountPropensities | Block::LatentFeatures | Block::ClusterFeatures
        )
    }

    fn touches_weights(self) -> bool {
        !matches!(self, Block::CountPropensities | Block::ClusterFeatures)
    }

    pub fn extract(self, params: &ModelParams) -> Vec<f64> {
        match self {
            Block::CountPropensities => [params.s1.as_slice(), &params.r1].concat(),
            Block::LatentFeatures => [params.u.as_slice(), params.v.as_slice()].concat(),
            Block::ClusterFeatures => params.y.as_slice().to_vec(),
            Block::WeightPropensities => [params.s2.as_slice(), &params.r2].concat(),
            Block::Interactions => params.lambda.as_slice().to_vec(),
            Block::Intercepts => params.beta.clone(),
            Block::Dispersions => params.phi.iter().map(|f| f.ln()).collect(),
        }
    }

    pub fn assign(self, params: &mut ModelParams, x: &[f64]) {
        fn split(x: &[f64], a: &mut [f64], b: &mut [f64]) {
            let (xa, xb) = x.split_at(a.len());
            a.copy_from_slice(xa);
            b.copy_from_slice(xb);
        }
        match self {
            Block::CountPropensities => split(x, &mut params.s1, &mut params.r1),
            Block::LatentFeatures => split(x, params.u.as_mut_slice(), params.v.as_mut_slice()),
            Block::ClusterFeatures => params.y.as_mut_slice().copy_from_slice(x),
            Block::WeightPropensities => split(x, &mut params.s2, &mut params.r2),
            Block::Interactions => params.lambda.as_mut_slice().copy_from_slice(x),
            Block::Intercepts => params.beta.copy_from_slice(x),
            Block::Dispersions => {
                for (f, l) in params.phi.iter_mut().zip(x) {
                    *f = l.exp();
                }
            }
        }
    }

    /// Block gradient in the optimisation coordinates.
    pub fn gradient(self, g: &Gradient, params: &ModelParams) -> Vec<f64> {
        match self {
            Block::CountPropensities => [g.s1.as_slice(), &g.r1].concat(),
            Block::LatentFeatures => [g.u.as_slice(), g.v.as_slice()].concat(),
            Block::ClusterFeatures => g.y.as_slice().to_vec(),
            Block::WeightPropensities => [g.s2.as_slice(), &g.r2].concat(),
            Block::Interactions => g.lambda.as_slice().to_vec(),
            Block::Intercepts => g.beta.clone(),
            Block::Dispersions => g.phi.iter().zip(&params.phi).map(|(d, f)| d * f).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    /// Conjugate-gradient iterations per block per M-step.
    pub iters: usize,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            iters: 5,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 30,
        }
    }
}

/// Last accepted step length per block, reused as the next trial step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMemory([f64; 7]);

impl Default for StepMemory {
    fn default() -> Self {
        StepMemory([1e-2; 7])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MStepOutcome {
    pub q_before: f64,
    pub q_after: f64,
    /// Blocks whose line search failed; those keep their previous values.
    pub failed_blocks: Vec<Block>,
}

fn block_value(obj: &Objective, params: &ModelParams, block: Block) -> f64 {
    let mut v = obj.prior_value(params);
    if block.touches_nodes() {
        v += obj.count_value(&NodeTerms::new(params));
    }
    if block.touches_weights() {
        v += obj.weight_value(params);
    }
    v
}

/// Polak-Ribiere+ conjugate gradient ascent on one block with Armijo
/// backtracking. Returns `false` if the first line search fails.
pub fn cg_block(
    obj: &Objective,
    params: &mut ModelParams,
    block: Block,
    config: &CgConfig,
    memory: &mut StepMemory,
) -> bool {
    let mut x = block.extract(params);
    let mut f = block_value(obj, params, block);
    let mut g = block.gradient(&obj.gradient(params, block.touches_weights()), params);
    let mut d = g.clone();
    let mut gg = dot(&g, &g);
    let mut trial = vec![0.0; x.len()];
    let mut ok = true;

    for it in 0..config.iters {
        if !(gg > 1e-24) {
            break;
        }
        let mut slope = dot(&g, &d);
        if !(slope > 0.0) {
            d.copy_from_slice(&g);
            slope = gg;
        }
        let eval_at = |t: f64, params: &mut ModelParams, trial: &mut Vec<f64>| -> f64 {
            for ((o, a), b) in trial.iter_mut().zip(&x).zip(&d) {
                *o = a + t * b;
            }
            block.assign(params, trial);
            let v = block_value(obj, params, block);
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        };

        let mut t = memory.0[block.index()];
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let ft = eval_at(t, params, &mut trial);
            if ft >= f + config.armijo * t * slope && ft > f {
                accepted = Some((t, ft));
                break;
            }
            t *= config.shrink;
        }
        let Some((mut t_acc, mut f_acc)) = accepted else {
            block.assign(params, &x);
            if it == 0 {
                ok = false;
            }
            break;
        };
        if t_acc == memory.0[block.index()] {
            for _ in 0..4 {
                let t2 = 2.0 * t_acc;
                let f2 = eval_at(t2, params, &mut trial);
                if f2 > f_acc {
                    t_acc = t2;
                    f_acc = f2;
                } else {
                    break;
                }
            }
        }
        memory.0[block.index()] = t_acc;
        for (a, b) in x.iter_mut().zip(&d) {
            *a += t_acc * b;
        }
        block.assign(params, &x);
        f = f_acc;

        let g_new = block.gradient(&obj.gradient(params, block.touches_weights()), params);
        let num: f64 = g_new.iter().zip(&g).map(|(a, b)| a * (a - b)).sum();
        let beta_pr = (num / gg).max(0.0);
        for (di, gi) in d.iter_mut().zip(&g_new) {
            *di = gi + beta_pr * *di;
        }
        g = g_new;
        gg = dot(&g, &g);
    }
    ok
}

/// `(Psi0 + sum_i x_i x_i') / (nu0 + n + 3)` for `x_i = (a_i, b_i)`.
pub fn update_sigma_pair(a: &[f64], b: &[f64], psi0: &Cov2, nu0: f64) -> Cov2 {
    let (mut saa, mut sab, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        saa += x * x;
        sab += x * y;
        sbb += y * y;
    }
    psi0.plus(&Cov2::new(saa, sab, sbb))
        .scaled(1.0 / (nu0 + a.len() as f64 + 3.0))
}

/// `(Psi0 + sum_i sum_d (U_id, V_id)(U_id, V_id)') / (nu0 + n p + 3)`.
pub fn update_sigma_uv(u: &Mat, v: &Mat, psi0: &Cov2, nu0: f64) -> Cov2 {
    // entries are paired row-major, so the flat slices line up coordinate-wise
    update_sigma_pair(u.as_slice(), v.as_slice(), psi0, nu0)
}

/// `(b0 + 1/2 sum_k ||diag(Lambda_k)||^2) / (a0 + K p / 2 + 1)`.
pub fn update_lambda_var(lambda: &Mat, a0: f64, b0: f64) -> f64 {
    let sq: f64 = lambda.as_slice().iter().map(|x| x * x).sum();
    let kp = lambda.as_slice().len() as f64;
    (b0 + 0.5 * sq) / (a0 + kp / 2.0 + 1.0)
}

/// Maximises `logG(K a) - K logG(a) + (a - 1) S + a_alpha log a - b_alpha a`
/// over `a > 0` by Newton steps on `log a`.
pub fn update_alpha(start: f64, k: usize, sum_e_log_t: f64, a_alpha: f64, b_alpha: f64) -> f64 {
    let kf = k as f64;
    let f = |a: f64| alpha_term(a, k, sum_e_log_t) + a_alpha * a.ln() - b_alpha * a;
    let mut x = start.max(1e-12).ln();
    for _ in 0..100 {
        let a = x.exp();
        let d1 = kf * digamma(kf * a) - kf * digamma(a) + sum_e_log_t + a_alpha / a - b_alpha;
        let d2 = kf * kf * trigamma(kf * a) - kf * trigamma(a) - a_alpha / (a * a);
        let gx = a * d1;
        let hx = a * d1 + a * a * d2;
        if gx.abs() < 1e-12 {
            break;
        }
        let mut step = if hx < 0.0 { -gx / hx } else { gx.signum() * 0.5 };
        step = step.clamp(-3.0, 3.0);
        let f0 = f(a);
        let mut moved = false;
        for _ in 0..40 {
            let cand = x + step;
            if f(cand.exp()) >= f0 {
                x = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved || step.abs() < 1e-14 {
            break;
        }
    }
    x.exp()
}

/// One generalised M-step. `Q` never decreases: each CG block only accepts
/// increasing steps and the closed-form blocks are exact maximisers.
pub fn m_step(
    problem: &Problem,
    params: &mut ModelParams,
    state: &VariationalState,
    config: &CgConfig,
    memory: &mut StepMemory,
) -> MStepOutcome {
    let obj = Objective::new(problem, state);
    let q_before = obj.value(params);
    let blocks: &[Block] = if problem.weighted {
        &Block::ALL
    } else {
        &Block::COUNT_ONLY
    };
    let mut failed = Vec::new();
    for &block in blocks {
        if !cg_block(&obj, params, block, config, memory) {
            failed.push(block);
        }
    }

    let prior = problem.prior;
    params.sigma_sr1 = update_sigma_pair(&params.s1, &params.r1, &prior.psi0_sr1, prior.nu0_sr1);
    params.sigma_uv = update_sigma_uv(&params.u, &params.v, &prior.psi0_uv, prior.nu0_uv);
    if problem.weighted {
        params.sigma_sr2 = update_sigma_pair(&params.s2, &params.r2, &prior.psi0_sr2, prior.nu0_sr2);
        params.lambda_var = update_lambda_var(&params.lambda, prior.a0, prior.b0);
    }
    if problem.mixture == MixtureUpdate::SparseFinite {
        params.alpha = update_alpha(
            params.alpha,
            params.k(),
            obj.sum_e_log_t,
            prior.a_alpha,
            prior.b_alpha,
        );
    }
    MStepOutcome {
        q_before,
        q_after: obj.value(params),
        failed_blocks: failed,
    }
}
