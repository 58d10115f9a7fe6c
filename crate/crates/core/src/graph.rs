//! Directed weighted edge lists.
//!
//! A [`Network`] is an immutable multigraph stored as a list of
//! `(sender, receiver, weight)` records over densely indexed nodes.
//! Node indices are zero-based; the original labels from an input file are
//! kept alongside so results can be written back in the caller's vocabulary.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WecanError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub sender: usize,
    pub receiver: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(sender: usize, receiver: usize, weight: f64) -> Self {
        Self {
            sender,
            receiver,
            weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeListFormat {
    Csv,
    Tsv,
}

impl EdgeListFormat {
    fn delimiter(self) -> u8 {
        match self {
            EdgeListFormat::Csv => b',',
            EdgeListFormat::Tsv => b'\t',
        }
    }

    /// Picks TSV for `.tsv`/`.tab` extensions and CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => EdgeListFormat::Tsv,
            _ => EdgeListFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    n_nodes: usize,
    edges: Vec<Edge>,
    node_labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub mean_weight: f64,
    pub sd_weight: f64,
    /// Distinct ordered pairs divided by `n(n-1)`.
    pub density: f64,
    /// Edges whose ordered pair already appeared earlier in the list.
    pub duplicate_pairs: usize,
}

impl Network {
    pub fn new(n_nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        if n_nodes < 2 {
            return Err(WecanError::InvalidArgument(format!(
                "a network needs at least 2 nodes, got {n_nodes}"
            )));
        }
        if edges.is_empty() {
            return Err(WecanError::EmptyNetwork);
        }
        for (m, e) in edges.iter().enumerate() {
            if e.sender >= n_nodes || e.receiver >= n_nodes {
                return Err(WecanError::InvalidEdge {
                    edge: m,
                    reason: format!(
                        "node index out of range ({} -> {}, n = {n_nodes})",
                        e.sender, e.receiver
                    ),
                });
            }
            if e.sender == e.receiver {
                return Err(WecanError::InvalidEdge {
                    edge: m,
                    reason: format!("self-loop on node {}", e.sender),
                });
            }
            if !e.weight.is_finite() {
                return Err(WecanError::InvalidEdge {
                    edge: m,
                    reason: "weight is not finite".into(),
                });
            }
        }
        Ok(Self {
            n_nodes,
            edges,
            node_labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_nodes {
            return Err(WecanError::LengthMismatch {
                left: labels.len(),
                right: self.n_nodes,
            });
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_labels(&self) -> Option<&[String]> {
        self.node_labels.as_deref()
    }

    /// Label of node `i`, falling back to its one-based index.
    pub fn label(&self, i: usize) -> String {
        match &self.node_labels {
            Some(labels) => labels[i].clone(),
            None => (i + 1).to_string(),
        }
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.iter().map(|e| e.weight)
    }

    pub fn out_weight_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_nodes];
        for e in &self.edges {
            sums[e.sender] += e.weight;
        }
        sums
    }

    pub fn in_weight_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_nodes];
        for e in &self.edges {
            sums[e.receiver] += e.weight;
        }
        sums
    }

    pub fn load_edge_list(
        path: impl AsRef<Path>,
        format: EdgeListFormat,
        has_header: bool,
    ) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| WecanError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_edge_list(file, format, has_header)
    }

    /// Parses `sender, receiver, weight` rows. Nodes are indexed in order of
    /// first appearance; row numbers in errors count data rows from 1.
    pub fn read_edge_list<R: Read>(
        reader: R,
        format: EdgeListFormat,
        has_header: bool,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(format.delimiter())
            .has_headers(has_header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut index: HashMap<String, usize> = HashMap::new();
        let mut labels: Vec<String> = Vec::new();
        let mut edges = Vec::new();
        let mut intern = |label: &str| -> usize {
            if let Some(&i) = index.get(label) {
                return i;
            }
            let i = labels.len();
            index.insert(label.to_string(), i);
            labels.push(label.to_string());
            i
        };

        for (row0, record) in rdr.records().enumerate() {
            let row = row0 + 1;
            let record = record.map_err(|e| WecanError::MalformedRow {
                row,
                message: e.to_string(),
            })?;
            if record.len() != 3 {
                return Err(WecanError::MalformedRow {
                    row,
                    message: format!("expected 3 fields, found {}", record.len()),
                });
            }
            let (s, r, w) = (&record[0], &record[1], &record[2]);
            if s.is_empty() || r.is_empty() {
                return Err(WecanError::MalformedRow {
                    row,
                    message: "empty node identifier".into(),
                });
            }
            if s == r {
                return Err(WecanError::SelfLoop {
                    row,
                    node: s.to_string(),
                });
            }
            let weight: f64 = w.parse().map_err(|_| WecanError::MalformedRow {
                row,
                message: format!("cannot parse weight {w:?}"),
            })?;
            if !weight.is_finite() {
                return Err(WecanError::NonFiniteWeight { row });
            }
            let sender = intern(s);
            let receiver = intern(r);
            edges.push(Edge::new(sender, receiver, weight));
        }

        if edges.is_empty() {
            return Err(WecanError::EmptyNetwork);
        }
        Network::new(labels.len(), edges)?.with_labels(labels)
    }

    /// Writes the edge list with node labels (or one-based indices) and
    /// weights printed to 17 significant digits.
    pub fn write_edge_list<W: Write>(
        &self,
        writer: W,
        format: EdgeListFormat,
        header: bool,
    ) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .delimiter(format.delimiter())
            .from_writer(writer);
        if header {
            wtr.write_record(["sender", "receiver", "weight"])?;
        }
        for e in &self.edges {
            wtr.write_record([
                self.label(e.sender),
                self.label(e.receiver),
                format_g17(e.weight),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_edge_list(
        &self,
        path: impl AsRef<Path>,
        format: EdgeListFormat,
        header: bool,
    ) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| WecanError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_edge_list(std::io::BufWriter::new(file), format, header)
    }

    pub fn summarize(&self) -> NetworkSummary {
        let m = self.edges.len() as f64;
        let mean = self.weights().sum::<f64>() / m;
        let var = if self.edges.len() > 1 {
            self.weights().map(|w| (w - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        let mut seen = HashSet::with_capacity(self.edges.len());
        let mut duplicates = 0;
        for e in &self.edges {
            if !seen.insert((e.sender, e.receiver)) {
                duplicates += 1;
            }
        }
        let n = self.n_nodes as f64;
        NetworkSummary {
            n_nodes: self.n_nodes,
            n_edges: self.edges.len(),
            mean_weight: mean,
            sd_weight: var.sqrt(),
            density: seen.len() as f64 / (n * (n - 1.0)),
            duplicate_pairs: duplicates,
        }
    }
}

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros removed,
/// scientific notation outside `1e-5 <= |x| < 1e17`.
pub fn format_g17(x: f64) -> String {
    const PRECISION: i32 = 17;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..PRECISION).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
