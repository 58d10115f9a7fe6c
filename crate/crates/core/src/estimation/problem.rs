use serde::{Deserialize, Serialize};

use crate::error::{Result, WecanError};
use crate::family::{NoiseLaw, WeightFamily};
use crate::graph::Network;
use crate::model::PriorConfig;

/// How the structural mixture weights are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixtureUpdate {
    /// Variational Dirichlet over `(t_1..t_K)` with a gamma hyperprior on the
    /// concentration, maximised by Newton steps.
    #[default]
    SparseFinite,
    /// Point estimates `(alpha0 + N_k - 1) / (K alpha0 + M - K)` (clamped at
    /// zero and renormalised) with the concentration held fixed.
    DirichletMap,
}

/// A network paired with the likelihood choices of one fit.
///
/// Per-edge weight statistics are computed once here so the inner loops do
/// not re-evaluate logarithms.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub net: &'a Network,
    pub family: WeightFamily,
    pub noise: NoiseLaw,
    pub prior: &'a PriorConfig,
    /// Include the weight factor of structural edges.
    pub weighted: bool,
    /// Include the noise component.
    pub with_noise: bool,
    pub mixture: MixtureUpdate,
    pub(crate) stat: Vec<f64>,
    pub(crate) log_jac: Vec<f64>,
    /// Noise-column log-density of each edge (uniform pair plus weight).
    pub(crate) noise_score: Vec<f64>,
}

impl<'a> Problem<'a> {
    /// The full weighted model with a noise component.
    pub fn new(
        net: &'a Network,
        family: WeightFamily,
        noise: NoiseLaw,
        prior: &'a PriorConfig,
    ) -> Result<Self> {
        prior.validate()?;
        for (m, e) in net.edges().iter().enumerate() {
            if !family.in_support(e.weight) {
                return Err(WecanError::InvalidEdge {
                    edge: m,
                    reason: format!(
                        "weight {} is outside the support of the {} family",
                        e.weight, family
                    ),
                });
            }
        }
        let n = net.n_nodes() as f64;
        let pair = -(n * (n - 1.0)).ln();
        Ok(Self {
            net,
            family,
            noise,
            prior,
            weighted: true,
            with_noise: true,
            mixture: MixtureUpdate::SparseFinite,
            stat: net.weights().map(|w| family.statistic(w)).collect(),
            log_jac: net.weights().map(|w| family.log_jacobian(w)).collect(),
            noise_score: net
                .weights()
                .map(|w| pair + noise.log_density_unchecked(w))
                .collect(),
        })
    }

    /// The count-only sub-model: no weight factor and no noise component.
    pub fn unweighted(net: &'a Network, prior: &'a PriorConfig) -> Result<Self> {
        prior.validate()?;
        Ok(Self {
            net,
            family: WeightFamily::Normal,
            noise: NoiseLaw::new(1.0)?,
            prior,
            weighted: false,
            with_noise: false,
            mixture: MixtureUpdate::SparseFinite,
            stat: vec![0.0; net.n_edges()],
            log_jac: vec![0.0; net.n_edges()],
            noise_score: vec![f64::NEG_INFINITY; net.n_edges()],
        })
    }

    pub fn with_mixture(mut self, mixture: MixtureUpdate) -> Self {
        self.mixture = mixture;
        self
    }

    pub fn n(&self) -> usize {
        self.net.n_nodes()
    }

    pub fn m(&self) -> usize {
        self.net.n_edges()
    }

    pub fn k(&self) -> usize {
        self.prior.k_max
    }

    pub fn p(&self) -> usize {
        self.prior.p
    }
}
