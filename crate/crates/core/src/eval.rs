//! Partition agreement and fit summaries.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WecanError};
use crate::estimation::FitResult;
use crate::graph::Network;

fn entropy(counts: impl Iterator<Item = usize>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let q = c as f64 / total;
            -q * q.ln()
        })
        .sum()
}

/// Normalised mutual information, `I(a; b) / ((H(a) + H(b)) / 2)`.
///
/// Two single-cluster partitions score 1; a single-cluster partition
/// against a split one scores 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(WecanError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(WecanError::InvalidArgument("NMI needs at least one item".into()));
    }
    let total = a.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut ca: HashMap<usize, usize> = HashMap::new();
    let mut cb: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    match (ca.len(), cb.len()) {
        (1, 1) => return Ok(1.0),
        (1, _) | (_, 1) => return Ok(0.0),
        _ => {}
    }
    // sort cells so the sum is independent of hash order (keeps symmetry exact)
    let mut cells: Vec<(f64, f64)> = joint
        .iter()
        .map(|(&(x, y), &c)| {
            let (nx, ny) = (ca[&x] as f64, cb[&y] as f64);
            let pxy = c as f64 / total;
            (pxy, pxy * (c as f64 * total / (nx * ny)).ln())
        })
        .collect();
    cells.sort_by(|l, r| l.0.total_cmp(&r.0).then(l.1.total_cmp(&r.1)));
    let mi: f64 = cells.iter().map(|c| c.1).sum();
    let sorted = |m: &HashMap<usize, usize>| {
        let mut v: Vec<usize> = m.values().copied().collect();
        v.sort_unstable();
        v
    };
    let (ha, hb) = (
        entropy(sorted(&ca).into_iter(), total),
        entropy(sorted(&cb).into_iter(), total),
    );
    Ok((mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0))
}

/// Cross-tabulation of the noise label against a weight cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub cutoff: f64,
    pub noise_at_or_below: usize,
    pub noise_above: usize,
    pub structural_at_or_below: usize,
    pub structural_above: usize,
    /// `None` when no edge is labelled noise.
    pub mean_noise_weight: Option<f64>,
}

impl NoiseReport {
    pub fn n_noise(&self) -> usize {
        self.noise_at_or_below + self.noise_above
    }
}

/// Noise cross-tabulation for any label vector (`0` is noise).
pub fn noise_report_from_labels(labels: &[usize], net: &Network, cutoff: f64) -> Result<NoiseReport> {
    if labels.len() != net.n_edges() {
        return Err(WecanError::LengthMismatch {
            left: labels.len(),
            right: net.n_edges(),
        });
    }
    let mut r = NoiseReport {
        cutoff,
        noise_at_or_below: 0,
        noise_above: 0,
        structural_at_or_below: 0,
        structural_above: 0,
        mean_noise_weight: None,
    };
    let mut noise_sum = 0.0;
    for (&z, e) in labels.iter().zip(net.edges()) {
        let low = e.weight <= cutoff;
        match (z == 0, low) {
            (true, true) => r.noise_at_or_below += 1,
            (true, false) => r.noise_above += 1,
            (false, true) => r.structural_at_or_below += 1,
            (false, false) => r.structural_above += 1,
        }
        if z == 0 {
            noise_sum += e.weight;
        }
    }
    if r.n_noise() > 0 {
        r.mean_noise_weight = Some(noise_sum / r.n_noise() as f64);
    }
    Ok(r)
}

pub fn noise_report(fit: &FitResult, net: &Network, cutoff: f64) -> Result<NoiseReport> {
    noise_report_from_labels(&fit.assignments, net, cutoff)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub label: usize,
    pub n_edges: usize,
    pub weight_mean: f64,
    /// Sample standard deviation; `0` for a single edge.
    pub weight_sd: f64,
    /// Up to `top` nodes sending the most edges, as `(node, count)`.
    pub top_senders: Vec<(usize, usize)>,
    pub top_receivers: Vec<(usize, usize)>,
}

fn top_nodes(counts: HashMap<usize, usize>, top: usize) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(top);
    v
}

/// One record per label present in `labels`, in increasing label order.
pub fn cluster_summary_from_labels(labels: &[usize], net: &Network, top: usize) -> Result<Vec<ClusterSummary>> {
    if labels.len() != net.n_edges() {
        return Err(WecanError::LengthMismatch {
            left: labels.len(),
            right: net.n_edges(),
        });
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (m, &z) in labels.iter().enumerate() {
        groups.entry(z).or_default().push(m);
    }
    let edges = net.edges();
    Ok(groups
        .into_iter()
        .map(|(label, members)| {
            let count = members.len() as f64;
            let mean = members.iter().map(|&m| edges[m].weight).sum::<f64>() / count;
            let sd = if members.len() > 1 {
                (members.iter().map(|&m| (edges[m].weight - mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
            } else {
                0.0
            };
            let mut send = HashMap::new();
            let mut recv = HashMap::new();
            for &m in &members {
                *send.entry(edges[m].sender).or_default() += 1;
                *recv.entry(edges[m].receiver).or_default() += 1;
            }
            ClusterSummary {
                label,
                n_edges: members.len(),
                weight_mean: mean,
                weight_sd: sd,
                top_senders: top_nodes(send, top),
                top_receivers: top_nodes(recv, top),
            }
        })
        .collect())
}

pub fn cluster_summary(fit: &FitResult, net: &Network, top: usize) -> Result<Vec<ClusterSummary>> {
    cluster_summary_from_labels(&fit.assignments, net, top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    #[test]
    fn nmi_examples() {
        assert_eq!(nmi(&[1, 1, 2, 2], &[1, 1, 2, 2]).unwrap(), 1.0);
        assert_eq!(nmi(&[1, 1, 1, 1], &[1, 1, 2, 2]).unwrap(), 0.0);
        assert!(nmi(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap().abs() < 1e-15);
        assert_eq!(nmi(&[3, 3], &[0, 0]).unwrap(), 1.0);
        assert!(nmi(&[1], &[1, 2]).is_err());
        assert!(nmi(&[], &[]).is_err());
    }

    #[test]
    fn nmi_relabelled_identity() {
        let v = nmi(&[0, 0, 1, 2, 2], &[7, 7, 5, 9, 9]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    fn net() -> Network {
        Network::new(
            3,
            vec![
                Edge::new(0, 1, 0.5),
                Edge::new(1, 2, 1.0),
                Edge::new(2, 0, 3.0),
                Edge::new(0, 2, 4.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn noise_table() {
        let r = noise_report_from_labels(&[0, 1, 0, 2], &net(), 1.0).unwrap();
        assert_eq!(
            (r.noise_at_or_below, r.noise_above, r.structural_at_or_below, r.structural_above),
            (1, 1, 1, 1)
        );
        assert_eq!(r.mean_noise_weight, Some(1.75));
        let none = noise_report_from_labels(&[1, 1, 1, 1], &net(), 1.0).unwrap();
        assert_eq!(none.n_noise(), 0);
        assert_eq!(none.mean_noise_weight, None);
        let all = noise_report_from_labels(&[0; 4], &net(), 10.0).unwrap();
        assert_eq!(all.noise_at_or_below, 4);
    }

    #[test]
    fn summary_records() {
        let s = cluster_summary_from_labels(&[0, 1, 1, 1], &net(), 2).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.iter().map(|c| c.n_edges).sum::<usize>(), 4);
        assert_eq!(s[0].weight_sd, 0.0);
        assert!((s[1].weight_mean - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(s[1].top_senders, vec![(0, 1), (1, 1)]);
    }
}
