//! Generates one dataset on a four-treatment network given by its pair
//! counts, fits it once with the default chain and prints timing, posterior
//! means and acceptance rates.
//!
//! ```text
//! cargo run --release --example fit_once -- 1 5 15 0 0 0 [seed]
//! ```

use std::time::Instant;

use nma_forge::generate::generate_dataset;
use nma_forge::rng::{data_stream, derive_seed};
use nma_forge::sampler::run_chain;
use nma_forge::{ChainConfig, DgmKind, EvidenceNetwork, ModelParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    if args.len() < 6 {
        return Err("expected six pair counts".into());
    }
    let counts: Vec<u32> = args[..6].iter().map(|&c| c as u32).collect();
    let seed = derive_seed(args.get(6).copied().unwrap_or(1), 1);
    let network = EvidenceNetwork::from_pair_counts(4, &counts, 25)?;
    let params = ModelParams::null(4, 0.1)?;
    let (data, _) = generate_dataset(&network, &params, DgmKind::Normal, &mut data_stream(seed))?;
    let config = ChainConfig {
        seed,
        ..ChainConfig::default()
    };
    let start = Instant::now();
    let samples = run_chain(&network, &data, &config)?;
    let secs = start.elapsed().as_secs_f64();
    let sweeps = (config.burn_in + config.iterations) as f64;
    println!("M = {}, {:.3} s, {:.2} us/sweep", network.n_trials(), secs, secs / sweeps * 1e6);
    println!("posterior mean d = {:?}, tau = {:.4}", samples.mean_d(), samples.mean_tau());
    let d = &samples.diagnostics;
    println!(
        "acceptance: b in [{:.2}, {:.2}], delta in [{:.2}, {:.2}], d = {:?}, tau = {:.2}",
        d.b.iter().copied().fold(1.0, f64::min),
        d.b.iter().copied().fold(0.0, f64::max),
        d.delta.iter().copied().fold(1.0, f64::min),
        d.delta.iter().copied().fold(0.0, f64::max),
        d.d,
        d.tau
    );
    Ok(())
}
