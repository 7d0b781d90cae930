//! Statistical oracle checks shared by the integration tests and the
//! acceptance runner.

#![allow(dead_code)]

use nma_forge::generate::Dataset;
use nma_forge::network::TreatmentId as T;
use nma_forge::sampler::run_chain;
use nma_forge::stats::{mean, sample_sd};
use nma_forge::{ChainConfig, EvidenceNetwork, Trial};

/// Standard error of the mean of a correlated series by non-overlapping
/// batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let len = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&xs[b * len..(b + 1) * len])).collect();
    sample_sd(&means) / (batches as f64).sqrt()
}

/// Kolmogorov-Smirnov distance of `xs` from the uniform law on `(lo, hi)`.
pub fn ks_uniform(xs: &[f64], lo: f64, hi: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level 0.01.
pub fn ks_critical_001(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Fits a network whose arms have no participants, so the posterior is the
/// prior: each `d` is N(0, 100^2) and `tau` is U(0, 5).
pub fn prior_recovery() -> Result<String, String> {
    let net = EvidenceNetwork::new(2, vec![Trial::two_arm(T(0), T(1), 1).unwrap()])
        .unwrap()
        .with_participants_zeroed();
    let data = Dataset { events: vec![vec![0, 0]] };
    let config = ChainConfig {
        seed: 2024,
        ..ChainConfig::with_lengths(20_000, 4_000_000, 400)
    };
    let s = run_chain(&net, &data, &config).map_err(|e| e.to_string())?;
    let d: Vec<f64> = s.d_samples.iter().map(|x| x[0]).collect();
    let m = mean(&d);
    let se_mean = batch_means_se(&d, 25);
    let sq: Vec<f64> = d.iter().map(|x| (x - m) * (x - m)).collect();
    let sd = sample_sd(&d);
    let se_sd = batch_means_se(&sq, 25) / (2.0 * sd);
    let ks = ks_uniform(&s.tau_samples, 0.0, 5.0);
    let crit = ks_critical_001(s.tau_samples.len());
    let detail = format!(
        "d mean {m:.2} (SE {se_mean:.2}), d SD {sd:.2} (SE {se_sd:.2}), tau KS {ks:.4} (critical {crit:.4})"
    );
    if m.abs() <= 3.0 * se_mean && (sd - 100.0).abs() <= 3.0 * se_sd && ks <= crit {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// One huge two-arm trial: the posterior median of `d_12` must sit on the
/// empirical log odds ratio.
pub fn mega_trial() -> Result<String, String> {
    let net = EvidenceNetwork::new(2, vec![Trial::two_arm(T(0), T(1), 100_000).unwrap()]).unwrap();
    let data = Dataset {
        events: vec![vec![50_000, 75_000]],
    };
    let config = ChainConfig {
        seed: 7,
        ..ChainConfig::with_lengths(20_000, 2_000_000, 10)
    };
    let s = run_chain(&net, &data, &config).map_err(|e| e.to_string())?;
    let mut d: Vec<f64> = s.d_samples.iter().map(|x| x[0]).collect();
    d.sort_by(f64::total_cmp);
    let median = 0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2]);
    let target = 3f64.ln();
    let detail = format!("posterior median {median:.4}, empirical log OR {target:.4}");
    if (median - target).abs() <= 0.05 {
        Ok(detail)
    } else {
        Err(detail)
    }
}
