//! Ranking future two-arm trials by the degree irregularity they leave.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{fmt_float, run_experiment, ExperimentConfig, ExperimentRecord};
use crate::network::{treatment_pairs, EvidenceNetwork, GeometrySummary, TreatmentId, Trial};

/// Largest number of any-split allocations that will be enumerated.
pub const MAX_CANDIDATES: u128 = 1_000_000;

/// How the budget of new trials may be spread over comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Allocation {
    /// All new trials on one comparison.
    #[default]
    Single,
    /// Every way of splitting the budget over comparisons.
    AnySplit,
}

impl FromStr for Allocation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "single" => Ok(Allocation::Single),
            "any-split" => Ok(Allocation::AnySplit),
            other => Err(format!("unknown allocation `{other}` (expected single or any-split)")),
        }
    }
}

/// New trials on one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Addition {
    pub a: TreatmentId,
    pub b: TreatmentId,
    pub trials: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCandidate {
    /// Comparisons receiving trials, in lexicographic pair order.
    pub additions: Vec<Addition>,
    pub resulting_k: Vec<Vec<u32>>,
    pub resulting_irregularity: f64,
    /// Resulting minus current normalised irregularity.
    pub delta_irregularity: f64,
    #[serde(skip)]
    ratio: (u128, u128),
}

impl PlanCandidate {
    /// `T1-T4 x10`, or `T1-T3 x4 + T2-T4 x6`.
    pub fn label(&self) -> String {
        self.additions
            .iter()
            .map(|x| format!("{}-{} x{}", x.a, x.b, x.trials))
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// The new two-arm trials, `n_per_arm` participants per arm.
    pub fn trials(&self, n_per_arm: u32) -> Vec<Trial> {
        self.additions
            .iter()
            .flat_map(|x| {
                (0..x.trials).map(move |_| Trial::two_arm(x.a, x.b, n_per_arm).expect("distinct pair"))
            })
            .collect()
    }

    pub fn apply(&self, network: &EvidenceNetwork, n_per_arm: u32) -> Result<EvidenceNetwork> {
        Ok(network.with_trials(self.trials(n_per_arm))?)
    }
}

fn compare_ratio(x: (u128, u128), y: (u128, u128)) -> Ordering {
    (x.0 * y.1).cmp(&(y.0 * x.1))
}

fn candidate_order(x: &PlanCandidate, y: &PlanCandidate) -> Ordering {
    compare_ratio(x.ratio, y.ratio)
        .then(x.additions.len().cmp(&y.additions.len()))
        .then_with(|| x.additions.cmp(&y.additions))
}

/// Number of ways to spread `budget` trials over `pairs` comparisons.
pub fn count_allocations(pairs: u128, budget: u128) -> u128 {
    // C(budget + pairs - 1, pairs - 1), saturating.
    let k = (pairs - 1).min(budget);
    let n = budget + pairs - 1;
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    c
}

fn candidate(base: &GeometrySummary, pairs: &[(TreatmentId, TreatmentId)], alloc: &[u32]) -> PlanCandidate {
    let mut k = base.k.clone();
    let mut additions = Vec::new();
    for (&(a, b), &c) in pairs.iter().zip(alloc) {
        if c > 0 {
            k[a.0][b.0] += c;
            k[b.0][a.0] += c;
            additions.push(Addition { a, b, trials: c });
        }
    }
    let g = GeometrySummary::from_counts(k);
    PlanCandidate {
        additions,
        resulting_irregularity: g.normalised_irregularity,
        delta_irregularity: g.normalised_irregularity - base.normalised_irregularity,
        ratio: g.irregularity_ratio(),
        resulting_k: g.k,
    }
}

// Visits every weak composition of `budget` into `slots` parts.
fn compositions(slots: usize, budget: u32, visit: &mut impl FnMut(&[u32])) {
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, visit: &mut impl FnMut(&[u32])) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            visit(cur);
            return;
        }
        for c in (0..=left).rev() {
            cur[pos] = c;
            rec(pos + 1, left - c, cur, visit);
        }
    }
    let mut cur = vec![0; slots];
    rec(0, budget, &mut cur, visit);
}

/// Candidate additions of `budget` two-arm trials, best (least irregular)
/// first. Ties go to plans touching fewer comparisons, then to the
/// lexicographically first comparisons.
pub fn enumerate_plans(network: &EvidenceNetwork, budget: u32, allocation: Allocation) -> Result<Vec<PlanCandidate>> {
    if budget == 0 {
        return Err(Error::EmptyBudget);
    }
    let base = network.geometry();
    let pairs = treatment_pairs(network.n_treatments());
    let mut out = Vec::new();
    match allocation {
        Allocation::Single => {
            for i in 0..pairs.len() {
                let mut alloc = vec![0; pairs.len()];
                alloc[i] = budget;
                out.push(candidate(&base, &pairs, &alloc));
            }
        }
        Allocation::AnySplit => {
            let count = count_allocations(pairs.len() as u128, u128::from(budget));
            if count > MAX_CANDIDATES {
                return Err(Error::TooManyCandidates {
                    count,
                    limit: MAX_CANDIDATES,
                });
            }
            out.reserve(count as usize);
            compositions(pairs.len(), budget, &mut |alloc| out.push(candidate(&base, &pairs, alloc)));
        }
    }
    out.sort_by(candidate_order);
    Ok(out)
}

/// Candidate table with columns `rank,comparisons,h2_over_k2,delta_h2_over_k2`.
pub fn plans_csv(plans: &[PlanCandidate]) -> String {
    let mut out = String::from("rank,comparisons,h2_over_k2,delta_h2_over_k2\n");
    for (i, p) in plans.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            i + 1,
            p.label(),
            fmt_float(p.resulting_irregularity),
            fmt_float(p.delta_irregularity)
        )
        .unwrap();
    }
    out
}

pub fn plans_table(plans: &[PlanCandidate]) -> String {
    let width = plans.iter().map(|p| p.label().len()).max().unwrap_or(0).max(11);
    let mut out = format!("{:>4}  {:<width$}  {:>8}  {:>9}\n", "rank", "comparisons", "h2/k2", "change");
    for (i, p) in plans.iter().enumerate() {
        writeln!(
            out,
            "{:>4}  {:<width$}  {:>8.2}  {:>+9.2}",
            i + 1,
            p.label(),
            p.resulting_irregularity,
            p.delta_irregularity
        )
        .unwrap();
    }
    out
}

/// One row of the simulated comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub label: String,
    pub n_trials: usize,
    pub h2_over_k2: f64,
    pub sd_bar: f64,
    pub abs_dp_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEvaluation {
    /// The current network first, then each candidate in the given order.
    pub rows: Vec<PlanRow>,
    pub records: Vec<ExperimentRecord>,
}

impl PlanEvaluation {
    pub fn csv(&self) -> String {
        let mut out = String::from("network,M,h2_over_k2,sd_bar,abs_dP_bar\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.label,
                r.n_trials,
                fmt_float(r.h2_over_k2),
                fmt_float(r.sd_bar),
                fmt_float(r.abs_dp_bar)
            )
            .unwrap();
        }
        out
    }

    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(7);
        let mut out = format!("{:<width$}  {:>4}  {:>6}  {:>7}  {:>7}\n", "network", "M", "h2/k2", "SDbar", "|dP|bar");
        for r in &self.rows {
            writeln!(
                out,
                "{:<width$}  {:>4}  {:>6.2}  {:>7.2}  {:>7.2}",
                r.label, r.n_trials, r.h2_over_k2, r.sd_bar, r.abs_dp_bar
            )
            .unwrap();
        }
        out
    }
}

/// Simulates the current network and every candidate with the same
/// parameters, chain settings and master seed.
pub fn evaluate_plans(candidates: &[PlanCandidate], base_config: &ExperimentConfig, n_per_arm: u32) -> Result<PlanEvaluation> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidates to evaluate".into()));
    }
    let mut configs = vec![("original".to_string(), base_config.clone())];
    for (i, c) in candidates.iter().enumerate() {
        let config = ExperimentConfig {
            name: format!("{}_plan{}", base_config.name, i + 1),
            network: c.apply(&base_config.network, n_per_arm)?,
            ..base_config.clone()
        };
        configs.push((c.label(), config));
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (label, config) in configs {
        let record = run_experiment(&config)?;
        rows.push(PlanRow {
            label,
            n_trials: config.network.n_trials(),
            h2_over_k2: record.geometry.normalised_irregularity,
            sd_bar: record.aggregate.totals.sd_bar,
            abs_dp_bar: record.aggregate.totals.abs_dp_bar,
        });
        records.push(record);
    }
    Ok(PlanEvaluation { rows, records })
}
