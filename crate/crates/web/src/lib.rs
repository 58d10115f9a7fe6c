//! WebAssembly entry points. Everything crosses the boundary as JSON text.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;
use wecan::{EdgeListFormat, FitOptions, Network, PriorConfig, SimConfig, WeightFamily};

#[derive(Debug, Serialize)]
pub struct SimulateOutput {
    pub edges_csv: String,
    pub truth: Vec<usize>,
    pub n_nodes: usize,
    pub n_edges: usize,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitRequest {
    pub family: WeightFamily,
    pub k_max: usize,
    pub p: usize,
    pub seeds: usize,
    pub noise_rate: Option<f64>,
}

impl Default for FitRequest {
    fn default() -> Self {
        Self {
            family: WeightFamily::Normal,
            k_max: 10,
            p: 2,
            seeds: 3,
            noise_rate: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FitOutput {
    pub k_effective: usize,
    pub assignments: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    pub icl: f64,
    pub noise_rate: f64,
    pub iterations: usize,
    pub elbo_trace: Vec<f64>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// `config` is a partial simulation config laid over a named preset
/// (`"desk"` when absent).
pub fn simulate_json(config: &str) -> Result<String, String> {
    let mut overrides: serde_json::Map<String, serde_json::Value> = if config.trim().is_empty() {
        Default::default()
    } else {
        serde_json::from_str(config).map_err(|e| e.to_string())?
    };
    let preset = match overrides.remove("preset") {
        Some(serde_json::Value::String(name)) => name,
        Some(_) => return Err("preset must be a string".into()),
        None => "desk".into(),
    };
    let base = SimConfig::preset(&preset).ok_or_else(|| format!("unknown preset {preset}"))?;
    let mut merged = serde_json::to_value(base).map_err(|e| e.to_string())?;
    if let Some(obj) = merged.as_object_mut() {
        obj.extend(overrides);
    }
    let cfg: SimConfig = serde_json::from_value(merged).map_err(|e| e.to_string())?;
    let sim = wecan::generate(&cfg).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    sim.network
        .write_edge_list(&mut buf, EdgeListFormat::Csv, true)
        .map_err(|e| e.to_string())?;
    to_json(&SimulateOutput {
        edges_csv: String::from_utf8(buf).map_err(|e| e.to_string())?,
        n_nodes: sim.network.n_nodes(),
        n_edges: sim.network.n_edges(),
        truth: sim.truth,
    })
}

/// Fits a CSV edge list with a `sender,receiver,weight` header.
pub fn fit_json(edges_csv: &str, request: &str) -> Result<String, String> {
    let req: FitRequest = if request.trim().is_empty() {
        FitRequest::default()
    } else {
        serde_json::from_str(request).map_err(|e| e.to_string())?
    };
    let net = Network::read_edge_list(edges_csv.as_bytes(), EdgeListFormat::Csv, true).map_err(|e| e.to_string())?;
    let prior = PriorConfig {
        lambda_a: req.noise_rate,
        ..PriorConfig::new(req.k_max, req.p)
    };
    let options = FitOptions {
        seeds: req.seeds,
        ..FitOptions::default()
    };
    let res = wecan::fit(&net, req.family, None, &prior, &options).map_err(|e| e.to_string())?;
    let mut cluster_sizes = vec![0; res.k_effective + 1];
    for &l in &res.assignments {
        cluster_sizes[l] += 1;
    }
    to_json(&FitOutput {
        k_effective: res.k_effective,
        cluster_sizes,
        icl: res.icl,
        noise_rate: res.noise_rate,
        iterations: res.n_outer_iterations,
        elbo_trace: res.elbo_trace,
        assignments: res.assignments,
    })
}

/// NMI of two JSON arrays of labels.
pub fn nmi_json(a: &str, b: &str) -> Result<f64, String> {
    let a: Vec<usize> = serde_json::from_str(a).map_err(|e| e.to_string())?;
    let b: Vec<usize> = serde_json::from_str(b).map_err(|e| e.to_string())?;
    wecan::nmi(&a, &b).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn simulate(config: &str) -> Result<String, JsError> {
    simulate_json(config).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fit(edges_csv: &str, request: &str) -> Result<String, JsError> {
    fit_json(edges_csv, request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn nmi(a: &str, b: &str) -> Result<f64, JsError> {
    nmi_json(a, b).map_err(|e| JsError::new(&e))
}
