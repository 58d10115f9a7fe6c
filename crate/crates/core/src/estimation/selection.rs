//! Convergence control, empty-cluster pruning and the ICL score used to
//! rank restarts.

use serde::{Deserialize, Serialize};

use super::variational::VariationalState;
use crate::error::Result;
use crate::family::{NoiseLaw, WeightFamily};
use crate::graph::Network;
use crate::model::{complete_log_likelihood, ModelParams, MixtureWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convergence {
    Continue,
    Converged,
    MaxIterReached,
}

/// Converged when consecutive hard assignments agree; stops at `max_iter`.
pub fn check_convergence(prev: &[usize], new: &[usize], iter: usize, max_iter: usize) -> Convergence {
    assert_eq!(prev.len(), new.len(), "assignment vectors differ in length");
    if prev == new {
        Convergence::Converged
    } else if iter >= max_iter {
        Convergence::MaxIterReached
    } else {
        Convergence::Continue
    }
}

/// Occupied structural clusters and the relabelling onto `1..=K_effective`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pruning {
    pub k_effective: usize,
    /// `label_of[k]` is the dense label of structural cluster `k`, if occupied.
    pub label_of: Vec<Option<usize>>,
    /// `cluster_of[l - 1]` is the structural cluster behind dense label `l`.
    pub cluster_of: Vec<usize>,
}

/// Marks structural cluster `k` occupied iff its expected size `p_.k`
/// reaches `mass_threshold`.
pub fn prune_and_count(state: &VariationalState, mass_threshold: f64) -> Pruning {
    let mass = state.column_mass();
    let mut label_of = vec![None; state.k()];
    let mut cluster_of = Vec::new();
    for (k, &m) in mass[1..].iter().enumerate() {
        if m >= mass_threshold {
            cluster_of.push(k);
            label_of[k] = Some(cluster_of.len());
        }
    }
    Pruning {
        k_effective: cluster_of.len(),
        label_of,
        cluster_of,
    }
}

impl Pruning {
    /// Hard labels restricted to noise and occupied clusters, in the
    /// original cluster numbering (`0` noise, `k + 1` cluster `k`).
    pub fn restricted_assignments(&self, state: &VariationalState) -> Vec<usize> {
        (0..state.resp.rows())
            .map(|m| {
                let row = state.resp.row(m);
                let mut best = 0;
                for (k, label) in self.label_of.iter().enumerate() {
                    if label.is_some() && row[k + 1] > row[best] {
                        best = k + 1;
                    }
                }
                best
            })
            .collect()
    }

    /// Maps original labels onto the dense numbering.
    pub fn relabel(&self, assignments: &[usize]) -> Vec<usize> {
        assignments
            .iter()
            .map(|&a| if a == 0 { 0 } else { self.label_of[a - 1].expect("occupied cluster") })
            .collect()
    }
}

/// Number of free parameters counted by the ICL penalty.
pub fn free_parameters(n: usize, p: usize, k_effective: usize) -> usize {
    4 * n + 2 * n * p + k_effective * (2 * p + 2) + k_effective + 1
}

/// Complete-data log-likelihood at the hard assignments and their
/// maximum-likelihood mixture weights, minus `d/2 log M`.
pub fn icl(
    params: &ModelParams,
    family: WeightFamily,
    noise: &NoiseLaw,
    net: &Network,
    assignments: &[usize],
    k_effective: usize,
) -> Result<f64> {
    let mix = MixtureWeights::from_assignments(assignments, params.k());
    let ll = complete_log_likelihood(params, family, noise, net, assignments, &mix)?;
    let d = free_parameters(net.n_nodes(), params.p(), k_effective) as f64;
    Ok(ll - 0.5 * d * (net.n_edges() as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    fn state_with(resp: Vec<Vec<f64>>) -> VariationalState {
        let k = resp[0].len() - 1;
        VariationalState {
            resp: Mat::from_rows(&resp),
            beta_t0: (1.0, 1.0),
            dir_t: vec![1.0; k],
            e_log_t0: 0.0,
            e_log_1m_t0: 0.0,
            e_log_t: vec![0.0; k],
        }
    }

    #[test]
    fn convergence_decisions() {
        assert_eq!(check_convergence(&[0, 1, 2], &[0, 1, 2], 3, 10), Convergence::Converged);
        assert_eq!(check_convergence(&[0, 1, 2], &[0, 2, 2], 3, 10), Convergence::Continue);
        assert_eq!(check_convergence(&[0, 1, 2], &[0, 2, 2], 10, 10), Convergence::MaxIterReached);
    }

    #[test]
    fn pruning_drops_empty_cluster() {
        let st = state_with(vec![
            vec![0.1, 0.9, 0.0, 0.0],
            vec![0.0, 0.2, 0.0, 0.8],
            vec![0.0, 0.0, 0.0, 1.0],
        ]);
        let pr = prune_and_count(&st, 1.0);
        assert_eq!(pr.k_effective, 2);
        assert_eq!(pr.label_of, vec![Some(1), None, Some(2)]);
        assert_eq!(pr.cluster_of, vec![0, 2]);
        let hard = pr.restricted_assignments(&st);
        assert_eq!(hard, vec![1, 3, 3]);
        assert_eq!(pr.relabel(&hard), vec![1, 2, 2]);
        let all = prune_and_count(&st, 0.0);
        assert_eq!(all.k_effective, 3);
    }

    #[test]
    fn pruned_argmax_falls_back_to_occupied() {
        let st = state_with(vec![
            vec![0.2, 0.3, 0.5],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ]);
        let pr = prune_and_count(&st, 1.0);
        assert_eq!(pr.k_effective, 1);
        assert_eq!(pr.restricted_assignments(&st), vec![1, 1, 1]);
    }

    #[test]
    fn parameter_count() {
        assert_eq!(free_parameters(10, 2, 3), 40 + 40 + 18 + 3 + 1);
    }
}
