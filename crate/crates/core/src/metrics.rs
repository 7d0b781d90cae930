//! Bias and spread of NMA estimates against the parameters that generated
//! the data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::ModelParams;
use crate::network::TreatmentId;
use crate::rank::{add_ranking, rank_probabilities, sucra, RankProbabilityMatrix};
use crate::sampler::PosteriorSamples;
use crate::stats::{mean, sample_sd};

/// Rank probabilities and SUCRA implied by the true effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub p_true: RankProbabilityMatrix,
    pub sucra_true: Vec<f64>,
}

/// Ranks `(0, d)` once; tied treatments share their ranks uniformly.
pub fn true_rank_probabilities(params: &ModelParams) -> Result<TruthSummary> {
    params.validate()?;
    let n = params.n_treatments();
    let full: Vec<f64> = (0..n).map(|t| params.basic(TreatmentId(t))).collect();
    let mut p = vec![vec![0.0; n]; n];
    add_ranking(&full, 1.0, &mut p);
    let p_true = RankProbabilityMatrix { p };
    let sucra_true = sucra(&p_true)?.values;
    Ok(TruthSummary { p_true, sucra_true })
}

/// Estimates from one realisation and their deviation from the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    /// 1-based replication index.
    pub rep: u64,
    /// Posterior means of `d_12, ..., d_1N`.
    pub d_hat: Vec<f64>,
    pub tau_hat: f64,
    pub p_hat: RankProbabilityMatrix,
    /// `p_hat - p_true`.
    pub delta_p: Vec<Vec<f64>>,
    pub sucra_hat: Vec<f64>,
    pub min_acceptance: f64,
    pub max_acceptance: f64,
}

impl ReplicationResult {
    /// Estimated `d_ab = d_1b - d_1a`.
    pub fn contrast(&self, a: usize, b: usize) -> f64 {
        let basic = |t: usize| if t == 0 { 0.0 } else { self.d_hat[t - 1] };
        basic(b) - basic(a)
    }
}

pub fn replication_result(
    rep: u64,
    samples: &PosteriorSamples,
    truth: &TruthSummary,
) -> Result<ReplicationResult> {
    let p_hat = rank_probabilities(samples);
    let sucra_hat = sucra(&p_hat)?.values;
    let delta_p = p_hat
        .p
        .iter()
        .zip(&truth.p_true.p)
        .map(|(est, tru)| est.iter().zip(tru).map(|(e, t)| e - t).collect())
        .collect();
    Ok(ReplicationResult {
        rep,
        d_hat: samples.mean_d(),
        tau_hat: samples.mean_tau(),
        p_hat,
        delta_p,
        sucra_hat,
        min_acceptance: samples.diagnostics.min_rate(),
        max_acceptance: samples.diagnostics.max_rate(),
    })
}

/// Per-treatment indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSummary {
    /// Mean over `b != a` of the bias of `d_ab`.
    pub mean_bias_d: f64,
    /// Mean over `b != a` of the SD of `d_ab` across replications.
    pub sd_d: f64,
    pub mean_delta_sucra: f64,
    pub sd_delta_sucra: f64,
}

/// Network-level totals; `*_norm` divide by the largest value the total can
/// take (`2N` for rank probabilities, `N` for SUCRA).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub sd_bar: f64,
    pub abs_dp_bar: f64,
    pub abs_dp_bar_norm: f64,
    pub abs_dsucra_bar: f64,
    pub abs_dsucra_bar_norm: f64,
    pub abs_dd_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub omega: usize,
    /// `mean_d[a][b]`: mean over replications of the estimate of `d_ab`.
    pub mean_d: Vec<Vec<f64>>,
    pub sd_d: Vec<Vec<f64>>,
    pub mean_tau: f64,
    pub sd_tau: f64,
    /// `mean_delta_p[a][r - 1]`.
    pub mean_delta_p: Vec<Vec<f64>>,
    pub sd_delta_p: Vec<Vec<f64>>,
    pub treatments: Vec<TreatmentSummary>,
    pub totals: Totals,
    pub mean_min_acceptance: f64,
    pub lowest_acceptance: f64,
    pub highest_acceptance: f64,
}

impl AggregateReport {
    /// Standard error of `mean_delta_p[a][r]`.
    pub fn delta_p_standard_error(&self, a: usize, r: usize) -> f64 {
        self.sd_delta_p[a][r] / (self.omega as f64).sqrt()
    }

    pub fn n_treatments(&self) -> usize {
        self.mean_d.len()
    }
}

/// Means and `(Omega - 1)`-denominator SDs over replications.
pub fn aggregate(results: &[ReplicationResult], truth: &TruthSummary, params: &ModelParams) -> Result<AggregateReport> {
    let omega = results.len();
    if omega < 2 {
        return Err(Error::TooFewReplications { needed: 2, got: omega });
    }
    let n = params.n_treatments();
    let nf = n as f64;
    let over = |f: &dyn Fn(&ReplicationResult) -> f64| -> (f64, f64) {
        let xs: Vec<f64> = results.iter().map(f).collect();
        (mean(&xs), sample_sd(&xs))
    };

    let mut mean_d = vec![vec![0.0; n]; n];
    let mut sd_d = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                let (m, s) = over(&|r| r.contrast(a, b));
                mean_d[a][b] = m;
                sd_d[a][b] = s;
            }
        }
    }
    let (mean_tau, sd_tau) = over(&|r| r.tau_hat);

    let mut mean_delta_p = vec![vec![0.0; n]; n];
    let mut sd_delta_p = vec![vec![0.0; n]; n];
    for a in 0..n {
        for k in 0..n {
            let (m, s) = over(&|r| r.delta_p[a][k]);
            mean_delta_p[a][k] = m;
            sd_delta_p[a][k] = s;
        }
    }

    let treatments: Vec<TreatmentSummary> = (0..n)
        .map(|a| {
            let others = (0..n).filter(|&b| b != a);
            let mean_bias_d = others
                .clone()
                .map(|b| mean_d[a][b] - params.contrast(TreatmentId(a), TreatmentId(b)))
                .sum::<f64>()
                / (nf - 1.0);
            let sd = others.map(|b| sd_d[a][b]).sum::<f64>() / (nf - 1.0);
            let (mean_delta_sucra, sd_delta_sucra) = over(&|r| r.sucra_hat[a] - truth.sucra_true[a]);
            TreatmentSummary {
                mean_bias_d,
                sd_d: sd,
                mean_delta_sucra,
                sd_delta_sucra,
            }
        })
        .collect();

    let abs_dp_bar: f64 = mean_delta_p.iter().flatten().map(|x| x.abs()).sum();
    let abs_dsucra_bar: f64 = treatments.iter().map(|t| t.mean_delta_sucra.abs()).sum();
    let totals = Totals {
        sd_bar: treatments.iter().map(|t| t.sd_d).sum(),
        abs_dp_bar,
        abs_dp_bar_norm: abs_dp_bar / (2.0 * nf),
        abs_dsucra_bar,
        abs_dsucra_bar_norm: abs_dsucra_bar / nf,
        abs_dd_bar: treatments.iter().map(|t| t.mean_bias_d.abs()).sum(),
    };

    Ok(AggregateReport {
        omega,
        mean_d,
        sd_d,
        mean_tau,
        sd_tau,
        mean_delta_p,
        sd_delta_p,
        treatments,
        totals,
        mean_min_acceptance: over(&|r| r.min_acceptance).0,
        lowest_acceptance: results.iter().map(|r| r.min_acceptance).fold(f64::INFINITY, f64::min),
        highest_acceptance: results.iter().map(|r| r.max_acceptance).fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::ChainDiagnostics;

    fn samples(d: Vec<Vec<f64>>, tau: Vec<f64>) -> PosteriorSamples {
        PosteriorSamples {
            n_treatments: d[0].len() + 1,
            d_samples: d,
            tau_samples: tau,
            diagnostics: ChainDiagnostics {
                b: vec![0.4],
                delta: vec![0.3],
                d: vec![0.5],
                tau: 0.6,
            },
        }
    }

    #[test]
    fn truth_for_null_effects_is_uniform() {
        let t = true_rank_probabilities(&ModelParams::null(4, 0.1).unwrap()).unwrap();
        assert!(t.p_true.p.iter().flatten().all(|&x| x == 0.25));
        assert!(t.sucra_true.iter().all(|&s| s == 0.5));
    }

    #[test]
    fn truth_for_ordered_effects_is_an_indicator() {
        let t = true_rank_probabilities(&ModelParams::new(vec![0.5, 1.0, 1.4], 0.1).unwrap()).unwrap();
        for a in 0..4 {
            for r in 0..4 {
                assert_eq!(t.p_true.p[a][r], if a == r { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(t.sucra_true, vec![1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0]);
    }

    #[test]
    fn truth_with_partial_ties() {
        let t = true_rank_probabilities(&ModelParams::new(vec![0.0, 0.5, 0.5], 0.1).unwrap()).unwrap();
        assert_eq!(t.p_true.p[0], vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(t.p_true.p[1], vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(t.p_true.p[2], vec![0.0, 0.0, 0.5, 0.5]);
        assert_eq!(t.p_true.p[3], vec![0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn uniform_estimate_against_ordered_truth() {
        let params = ModelParams::new(vec![0.5, 1.0, 1.4], 0.1).unwrap();
        let truth = true_rank_probabilities(&params).unwrap();
        // Four draws realising every rotation of a 4-cycle give a uniform P.
        let draws: Vec<Vec<f64>> = (0..4)
            .map(|s| {
                let full: Vec<f64> = (0..4).map(|a| ((a + s) % 4) as f64).collect();
                full[1..].iter().map(|v| v - full[0]).collect()
            })
            .collect();
        let r = replication_result(1, &samples(draws, vec![0.1; 4]), &truth).unwrap();
        assert_eq!(r.delta_p[0], vec![-0.75, 0.25, 0.25, 0.25]);
        for row in &r.delta_p {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn exact_estimate_has_no_bias() {
        let params = ModelParams::new(vec![0.5, 1.0, 1.4], 0.1).unwrap();
        let truth = true_rank_probabilities(&params).unwrap();
        let r = replication_result(1, &samples(vec![vec![0.5, 1.0, 1.4]; 3], vec![0.1; 3]), &truth).unwrap();
        assert!(r.delta_p.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(r.min_acceptance, 0.3);
        assert_eq!(r.max_acceptance, 0.6);
    }

    #[test]
    fn too_few_replications() {
        let params = ModelParams::null(3, 0.1).unwrap();
        let truth = true_rank_probabilities(&params).unwrap();
        let r = replication_result(1, &samples(vec![vec![0.1, 0.2]], vec![0.2]), &truth).unwrap();
        assert!(matches!(
            aggregate(&[r], &truth, &params),
            Err(Error::TooFewReplications { .. })
        ));
    }

    #[test]
    fn identical_replications_have_zero_spread() {
        let params = ModelParams::null(3, 0.1).unwrap();
        let truth = true_rank_probabilities(&params).unwrap();
        let r = replication_result(1, &samples(vec![vec![0.1, 0.2], vec![-0.3, 0.4]], vec![0.2, 0.3]), &truth).unwrap();
        let agg = aggregate(&[r.clone(), r.clone()], &truth, &params).unwrap();
        assert!(agg.sd_d.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(agg.sd_tau, 0.0);
        assert!(agg.treatments.iter().all(|t| t.sd_d == 0.0));
        let direct: f64 = r.delta_p.iter().flatten().map(|x| x.abs()).sum();
        assert!((agg.totals.abs_dp_bar - direct).abs() < 1e-12);
    }

    // Hand-built fixture recomputed with plain loops and no shared helpers.
    #[test]
    fn three_replication_fixture() {
        let params = ModelParams::new(vec![0.2, -0.1], 0.1).unwrap();
        let truth = true_rank_probabilities(&params).unwrap();
        let fixtures = [
            (vec![vec![0.3, -0.2], vec![0.1, 0.4], vec![-0.5, 0.0]], vec![0.15, 0.25, 0.2]),
            (vec![vec![0.2, 0.2], vec![0.6, -0.1]], vec![0.3, 0.1]),
            (vec![vec![-0.1, -0.4], vec![0.0, 0.1], vec![0.25, 0.05], vec![0.7, -0.2]], vec![0.05, 0.4, 0.3, 0.2]),
        ];
        let results: Vec<ReplicationResult> = fixtures
            .iter()
            .enumerate()
            .map(|(i, (d, t))| replication_result(i as u64 + 1, &samples(d.clone(), t.clone()), &truth).unwrap())
            .collect();
        let agg = aggregate(&results, &truth, &params).unwrap();

        // Posterior means by hand.
        let d_hat: Vec<[f64; 3]> = fixtures
            .iter()
            .map(|(d, _)| {
                let k = d.len() as f64;
                [0.0, d.iter().map(|x| x[0]).sum::<f64>() / k, d.iter().map(|x| x[1]).sum::<f64>() / k]
            })
            .collect();
        let true_d = [0.0, 0.2, -0.1];
        let mut sd_bar = 0.0;
        let mut dd_bar = 0.0;
        for a in 0..3 {
            let mut bias_sum = 0.0;
            let mut sd_sum = 0.0;
            for b in 0..3 {
                if a == b {
                    continue;
                }
                let v: Vec<f64> = d_hat.iter().map(|x| x[b] - x[a]).collect();
                let m = (v[0] + v[1] + v[2]) / 3.0;
                let var = ((v[0] - m).powi(2) + (v[1] - m).powi(2) + (v[2] - m).powi(2)) / 2.0;
                assert!((agg.mean_d[a][b] - m).abs() < 1e-10);
                assert!((agg.sd_d[a][b] - var.sqrt()).abs() < 1e-10);
                bias_sum += m - (true_d[b] - true_d[a]);
                sd_sum += var.sqrt();
            }
            assert!((agg.treatments[a].mean_bias_d - bias_sum / 2.0).abs() < 1e-10);
            assert!((agg.treatments[a].sd_d - sd_sum / 2.0).abs() < 1e-10);
            sd_bar += sd_sum / 2.0;
            dd_bar += (bias_sum / 2.0).abs();
        }
        assert!((agg.totals.sd_bar - sd_bar).abs() < 1e-10);
        assert!((agg.totals.abs_dd_bar - dd_bar).abs() < 1e-10);

        let tau: Vec<f64> = fixtures.iter().map(|(_, t)| t.iter().sum::<f64>() / t.len() as f64).collect();
        let mt = (tau[0] + tau[1] + tau[2]) / 3.0;
        assert!((agg.mean_tau - mt).abs() < 1e-10);

        // Rank counts by hand: truth is T3 < T1 < T2.
        let p_true = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let mut mean_dp = [[0.0; 3]; 3];
        for (d, _) in &fixtures {
            let mut counts = [[0.0; 3]; 3];
            for x in d {
                let v = [0.0, x[0], x[1]];
                for a in 0..3 {
                    let better = (0..3).filter(|&b| v[b] < v[a]).count();
                    let tied = (0..3).filter(|&b| v[b] == v[a]).count();
                    for r in better..better + tied {
                        counts[a][r] += 1.0 / tied as f64;
                    }
                }
            }
            for a in 0..3 {
                for r in 0..3 {
                    mean_dp[a][r] += (counts[a][r] / d.len() as f64 - p_true[a][r]) / 3.0;
                }
            }
        }
        let mut dp_bar = 0.0;
        let mut ds_bar = 0.0;
        for a in 0..3 {
            for r in 0..3 {
                assert!((agg.mean_delta_p[a][r] - mean_dp[a][r]).abs() < 1e-10);
                dp_bar += mean_dp[a][r].abs();
            }
            let ds = -(0..3).map(|r| (r + 1) as f64 * mean_dp[a][r]).sum::<f64>() / 2.0;
            assert!((agg.treatments[a].mean_delta_sucra - ds).abs() < 1e-10);
            ds_bar += ds.abs();
        }
        assert!((agg.totals.abs_dp_bar - dp_bar).abs() < 1e-10);
        assert!((agg.totals.abs_dsucra_bar - ds_bar).abs() < 1e-10);
        assert!((agg.totals.abs_dp_bar_norm - dp_bar / 6.0).abs() < 1e-10);
        assert!((agg.totals.abs_dsucra_bar_norm - ds_bar / 3.0).abs() < 1e-10);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(agg.mean_d[a][b], -agg.mean_d[b][a]);
            }
        }
    }
}
