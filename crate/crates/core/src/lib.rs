//! Weighted edge clustering with a noise component.
//!
//! Fits a mixture model to a directed weighted edge list. Each edge belongs
//! either to a noise component (uniform endpoints, exponential weight) or to
//! one of up to `K_max` structural clusters, which are pruned to those that
//! the data supports.
//!
//! ```no_run
//! use wecan::{fit, FitOptions, Network, PriorConfig, WeightFamily};
//! let net = Network::load_edge_list("edges.csv", wecan::EdgeListFormat::Csv, true)?;
//! let result = fit(&net, WeightFamily::Normal, None, &PriorConfig::new(10, 2), &FitOptions::default())?;
//! println!("{} clusters", result.k_effective);
//! # Ok::<(), wecan::WecanError>(())
//! ```

pub mod error;
pub mod estimation;
pub mod eval;
pub mod family;
pub mod graph;
pub mod init;
pub mod linalg;
pub mod model;
pub mod simgen;
pub mod special;

pub use error::{Result, WecanError};
pub use estimation::{fit, fit_single, FitOptions, FitResult, MixtureUpdate, RunConfig};
pub use eval::{nmi, noise_report, NoiseReport};
pub use family::{NoiseLaw, WeightFamily};
pub use graph::{Edge, EdgeListFormat, Network};
pub use model::{ModelParams, PriorConfig};
pub use simgen::{generate, SimConfig, Simulation};
