//! Rank probabilities, cumulative ranking curves and SUCRA.
//!
//! Lower basic effect means better treatment: in every draw the vector
//! `(0, d_12, ..., d_1N)` is sorted ascending and the smallest entry gets
//! rank 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::PosteriorSamples;

/// Largest allowed gap between the two SUCRA formulas.
pub const SUCRA_TOLERANCE: f64 = 1e-12;

/// `p[a][r - 1]`: probability that treatment `a` has rank `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankProbabilityMatrix {
    pub p: Vec<Vec<f64>>,
}

impl RankProbabilityMatrix {
    pub fn n_treatments(&self) -> usize {
        self.p.len()
    }

    pub fn uniform(n: usize) -> Self {
        RankProbabilityMatrix {
            p: vec![vec![1.0 / n as f64; n]; n],
        }
    }

    pub fn row(&self, treatment: usize) -> &[f64] {
        &self.p[treatment]
    }

    /// Largest deviation of any row or column sum from one.
    pub fn stochastic_error(&self) -> f64 {
        let n = self.n_treatments();
        let rows = self.p.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs());
        let cols = (0..n).map(|c| (self.p.iter().map(|r| r[c]).sum::<f64>() - 1.0).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }
}

/// Adds the rank indicator of one draw, scaled by `weight`, to `acc`.
/// Tied values share their ranks' mass equally.
pub(crate) fn add_ranking(values: &[f64], weight: f64, acc: &mut [Vec<f64>]) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        if end - start == 1 {
            acc[order[start]][start] += weight;
        } else {
            let share = weight / (end - start) as f64;
            for &t in &order[start..end] {
                for slot in &mut acc[t][start..end] {
                    *slot += share;
                }
            }
        }
        start = end;
    }
}

/// Rank probabilities of a set of full effect vectors `(0, d_12, ..., d_1N)`.
pub fn rank_probabilities_of_draws<'a, I>(n: usize, draws: I) -> RankProbabilityMatrix
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = vec![vec![0.0; n]; n];
    let mut count = 0usize;
    let mut full = vec![0.0; n];
    for d in draws {
        full[1..].copy_from_slice(d);
        add_ranking(&full, 1.0, &mut acc);
        count += 1;
    }
    let s = count as f64;
    for row in &mut acc {
        row.iter_mut().for_each(|x| *x /= s);
    }
    RankProbabilityMatrix { p: acc }
}

/// Proportion of retained draws in which each treatment takes each rank.
pub fn rank_probabilities(samples: &PosteriorSamples) -> RankProbabilityMatrix {
    rank_probabilities_of_draws(
        samples.n_treatments,
        samples.d_samples.iter().map(Vec::as_slice),
    )
}

/// `F[a][r - 1]`: probability that treatment `a` has rank `r` or better.
pub fn cumulative_ranks(p: &RankProbabilityMatrix) -> Vec<Vec<f64>> {
    p.p.iter()
        .map(|row| {
            row.iter()
                .scan(0.0, |acc, &x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SucraVector {
    pub values: Vec<f64>,
    pub expected_ranks: Vec<f64>,
}

/// SUCRA of every treatment, `(N - E[rank]) / (N - 1)`.
///
/// Also evaluates the mean of the cumulative curve over ranks `1..N-1` and
/// fails if the two disagree by more than [`SUCRA_TOLERANCE`].
pub fn sucra(p: &RankProbabilityMatrix) -> Result<SucraVector> {
    let n = p.n_treatments();
    let nf = n as f64;
    let expected_ranks: Vec<f64> = p
        .p
        .iter()
        .map(|row| row.iter().enumerate().map(|(r, &x)| (r + 1) as f64 * x).sum())
        .collect();
    let values: Vec<f64> = expected_ranks.iter().map(|&e| (nf - e) / (nf - 1.0)).collect();
    for (f, &v) in cumulative_ranks(p).iter().zip(&values) {
        let area = f[..n - 1].iter().sum::<f64>() / (nf - 1.0);
        let gap = (area - v).abs();
        if gap > SUCRA_TOLERANCE {
            return Err(Error::SucraMismatch(gap));
        }
    }
    Ok(SucraVector {
        values,
        expected_ranks,
    })
}
