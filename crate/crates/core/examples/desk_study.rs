//! Simulates desk-scale networks and reports recovery.
//!
//! `cargo run --release --example desk_study -- <networks> <noise> <seeds> [lambda_a] [first_seed]`

use std::time::Instant;

use wecan::{fit, generate, nmi, FitOptions, PriorConfig, SimConfig, WeightFamily};

fn main() -> wecan::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize| args.get(i).map(String::as_str);
    let networks: u64 = arg(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let noise: f64 = arg(2).and_then(|s| s.parse().ok()).unwrap_or(0.15);
    let seeds: usize = arg(3).and_then(|s| s.parse().ok()).unwrap_or(15);
    let prior = PriorConfig {
        lambda_a: arg(4).and_then(|s| s.parse().ok()),
        ..PriorConfig::new(10, 2)
    };
    let options = FitOptions {
        seeds,
        ..FitOptions::default()
    };
    let offset: u64 = arg(5).and_then(|s| s.parse().ok()).unwrap_or(1000);
    for r in 0..networks {
        let sim = generate(&SimConfig {
            noise_proportion: noise,
            seed: offset + r,
            ..SimConfig::desk()
        })?;
        let start = Instant::now();
        let res = fit(&sim.network, WeightFamily::Normal, None, &prior, &options)?;
        println!(
            "net {r}: K_eff {} NMI {:.3} init NMI {:.3} iters {} noise edges {} ({:.1}s)",
            res.k_effective,
            nmi(&res.assignments, &sim.truth)?,
            nmi(&res.init_assignments, &sim.truth)?,
            res.n_outer_iterations,
            res.assignments.iter().filter(|&&a| a == 0).count(),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
