//! Treatment networks and their degree statistics.
//!
//! A network is a set of `N` treatments and a list of trials, each trial
//! comparing two or more of them. The comparison matrix `K` counts, for every
//! unordered pair, the trials containing both treatments; a treatment's
//! weighted degree is its row sum of `K`. Irregularity is the population
//! variance of the degree sequence and is reported both raw and normalised
//! by the squared mean degree.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

/// Participants per arm when a network description leaves them out.
pub const DEFAULT_PARTICIPANTS: u32 = 25;

/// Zero-based treatment index; `TreatmentId(0)` is the global baseline `T1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreatmentId(pub usize);

impl TreatmentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for TreatmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0 + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrialError {
    #[error("a trial needs at least two arms, got {0}")]
    TooFewArms(usize),
    #[error("arms[{position}] = {arm} is not a treatment index in [0, {n_treatments})")]
    ArmOutOfRange {
        position: usize,
        arm: i64,
        n_treatments: usize,
    },
    #[error("treatment {0} appears in more than one arm")]
    DuplicateArm(TreatmentId),
    #[error("{arms} arms but {participants} participant counts")]
    LengthMismatch { arms: usize, participants: usize },
    #[error("n[{position}] = {value} must be a positive integer")]
    NonPositiveParticipants { position: usize, value: i64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("a network needs at least two treatments, got {0}")]
    TooFewTreatments(i64),
    #[error("a network needs at least one trial")]
    NoTrials,
    #[error("trials[{index}]: {source}")]
    Trial {
        index: usize,
        #[source]
        source: TrialError,
    },
    #[error("treatment {0} does not appear in any trial")]
    UnusedTreatment(TreatmentId),
    #[error("the comparison graph is not connected")]
    Disconnected,
    #[error("invalid shorthand: {0}")]
    Shorthand(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
}

/// One trial: distinct arms sorted by treatment index, with a participant
/// count per arm. The first arm is the trial's own baseline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    arms: Vec<TreatmentId>,
    participants: Vec<u32>,
}

impl Trial {
    /// Builds a trial, sorting arms (and their participant counts) by
    /// treatment index.
    pub fn new(arms: Vec<TreatmentId>, participants: Vec<u32>) -> Result<Self, TrialError> {
        if arms.len() != participants.len() {
            return Err(TrialError::LengthMismatch {
                arms: arms.len(),
                participants: participants.len(),
            });
        }
        if arms.len() < 2 {
            return Err(TrialError::TooFewArms(arms.len()));
        }
        if let Some(position) = participants.iter().position(|&n| n == 0) {
            return Err(TrialError::NonPositiveParticipants { position, value: 0 });
        }
        let mut pairs: Vec<(TreatmentId, u32)> = arms.into_iter().zip(participants).collect();
        pairs.sort_by_key(|&(t, _)| t);
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(TrialError::DuplicateArm(w[0].0));
        }
        let (arms, participants) = pairs.into_iter().unzip();
        Ok(Trial { arms, participants })
    }

    /// Two-arm trial with `n` participants in each arm.
    pub fn two_arm(a: TreatmentId, b: TreatmentId, n: u32) -> Result<Self, TrialError> {
        Trial::new(vec![a, b], vec![n, n])
    }

    pub fn arms(&self) -> &[TreatmentId] {
        &self.arms
    }

    pub fn participants(&self) -> &[u32] {
        &self.participants
    }

    pub fn arm_count(&self) -> usize {
        self.arms.len()
    }

    pub fn baseline(&self) -> TreatmentId {
        self.arms[0]
    }

    pub fn contains(&self, t: TreatmentId) -> bool {
        self.arms.binary_search(&t).is_ok()
    }
}

/// Treatments plus trials. Always valid: every arm refers to a known
/// treatment, every treatment is used, and the comparison graph is connected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NetworkFile", into = "NetworkFile")]
pub struct EvidenceNetwork {
    n_treatments: usize,
    trials: Vec<Trial>,
}

impl EvidenceNetwork {
    pub fn new(n_treatments: usize, trials: Vec<Trial>) -> Result<Self, NetworkError> {
        if n_treatments < 2 {
            return Err(NetworkError::TooFewTreatments(n_treatments as i64));
        }
        if trials.is_empty() {
            return Err(NetworkError::NoTrials);
        }
        for (index, trial) in trials.iter().enumerate() {
            if let Some((position, &arm)) = trial
                .arms
                .iter()
                .enumerate()
                .find(|(_, t)| t.0 >= n_treatments)
            {
                return Err(NetworkError::Trial {
                    index,
                    source: TrialError::ArmOutOfRange {
                        position,
                        arm: arm.0 as i64,
                        n_treatments,
                    },
                });
            }
        }
        let mut used = vec![false; n_treatments];
        for trial in &trials {
            for t in &trial.arms {
                used[t.0] = true;
            }
        }
        if let Some(t) = used.iter().position(|&u| !u) {
            return Err(NetworkError::UnusedTreatment(TreatmentId(t)));
        }
        let network = EvidenceNetwork {
            n_treatments,
            trials,
        };
        if !network.is_connected() {
            return Err(NetworkError::Disconnected);
        }
        Ok(network)
    }

    /// Expands a pair-count vector (pairs in lexicographic order, e.g.
    /// `K12, K13, K14, K23, K24, K34` for four treatments) into two-arm trials.
    pub fn from_pair_counts(
        n_treatments: usize,
        counts: &[u32],
        n_per_arm: u32,
    ) -> Result<Self, NetworkError> {
        let pairs = treatment_pairs(n_treatments);
        if counts.len() != pairs.len() {
            return Err(NetworkError::Shorthand(format!(
                "expected {} pair counts for {} treatments, got {}",
                pairs.len(),
                n_treatments,
                counts.len()
            )));
        }
        if n_per_arm == 0 {
            return Err(NetworkError::Shorthand(
                "n_per_arm must be a positive integer".into(),
            ));
        }
        let mut trials = Vec::new();
        for (&(a, b), &k) in pairs.iter().zip(counts) {
            for _ in 0..k {
                trials.push(Trial::two_arm(a, b, n_per_arm).expect("distinct pair"));
            }
        }
        EvidenceNetwork::new(n_treatments, trials)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("network description", e))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialises")
    }

    pub fn n_treatments(&self) -> usize {
        self.n_treatments
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn treatments(&self) -> impl Iterator<Item = TreatmentId> {
        (0..self.n_treatments).map(TreatmentId)
    }

    /// Same network with `extra` trials appended.
    pub fn with_trials(&self, extra: impl IntoIterator<Item = Trial>) -> Result<Self, NetworkError> {
        let mut trials = self.trials.clone();
        trials.extend(extra);
        EvidenceNetwork::new(self.n_treatments, trials)
    }

    /// Copy with every participant count set to zero. Only useful for
    /// checking that a fit without data returns the prior.
    #[doc(hidden)]
    pub fn with_participants_zeroed(&self) -> Self {
        let mut out = self.clone();
        for trial in &mut out.trials {
            trial.participants.iter_mut().for_each(|n| *n = 0);
        }
        out
    }

    /// `K[a][b]`: number of trials containing both `a` and `b`.
    pub fn comparison_counts(&self) -> Vec<Vec<u32>> {
        let n = self.n_treatments;
        let mut k = vec![vec![0u32; n]; n];
        for trial in &self.trials {
            for (i, a) in trial.arms.iter().enumerate() {
                for b in &trial.arms[i + 1..] {
                    k[a.0][b.0] += 1;
                    k[b.0][a.0] += 1;
                }
            }
        }
        k
    }

    /// Upper triangle of `K` in lexicographic pair order.
    pub fn pair_counts(&self) -> Vec<u32> {
        let k = self.comparison_counts();
        treatment_pairs(self.n_treatments)
            .into_iter()
            .map(|(a, b)| k[a.0][b.0])
            .collect()
    }

    pub fn geometry(&self) -> GeometrySummary {
        GeometrySummary::from_counts(self.comparison_counts())
    }

    fn is_connected(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n_treatments).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for trial in &self.trials {
            let root = find(&mut parent, trial.arms[0].0);
            for t in &trial.arms[1..] {
                let other = find(&mut parent, t.0);
                parent[other] = root;
            }
        }
        let root = find(&mut parent, 0);
        (1..self.n_treatments).all(|t| find(&mut parent, t) == root)
    }
}

/// All unordered pairs `(a, b)` with `a < b`, lexicographic.
pub fn treatment_pairs(n_treatments: usize) -> Vec<(TreatmentId, TreatmentId)> {
    let mut pairs = Vec::with_capacity(n_treatments * n_treatments.saturating_sub(1) / 2);
    for a in 0..n_treatments {
        for b in a + 1..n_treatments {
            pairs.push((TreatmentId(a), TreatmentId(b)));
        }
    }
    pairs
}

/// Degree statistics of a comparison matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    #[serde(rename = "K")]
    pub k: Vec<Vec<u32>>,
    pub degrees: Vec<u64>,
    pub mean_degree: f64,
    pub irregularity: f64,
    pub normalised_irregularity: f64,
}

impl GeometrySummary {
    pub fn from_counts(k: Vec<Vec<u32>>) -> Self {
        let n = k.len();
        let degrees: Vec<u64> = k
            .iter()
            .enumerate()
            .map(|(a, row)| {
                row.iter()
                    .enumerate()
                    .filter(|&(b, _)| b != a)
                    .map(|(_, &c)| u64::from(c))
                    .sum()
            })
            .collect();
        let mean_degree = degrees.iter().sum::<u64>() as f64 / n as f64;
        let irregularity = degrees
            .iter()
            .map(|&k| (k as f64 - mean_degree).powi(2))
            .sum::<f64>()
            / n as f64;
        let normalised_irregularity = if mean_degree > 0.0 {
            irregularity / (mean_degree * mean_degree)
        } else {
            0.0
        };
        GeometrySummary {
            k,
            degrees,
            mean_degree,
            irregularity,
            normalised_irregularity,
        }
    }

    pub fn n_treatments(&self) -> usize {
        self.k.len()
    }

    /// Upper triangle of `K` in lexicographic pair order.
    pub fn pair_counts(&self) -> Vec<u32> {
        treatment_pairs(self.k.len())
            .into_iter()
            .map(|(a, b)| self.k[a.0][b.0])
            .collect()
    }

    /// Exact `h^2 / k^2` as the fraction `N * sum(k^2) / (sum k)^2 - 1`,
    /// returned as `(numerator, denominator)` of the first term so that
    /// irregularities can be ordered without rounding.
    pub fn irregularity_ratio(&self) -> (u128, u128) {
        let n = self.degrees.len() as u128;
        let sum: u128 = self.degrees.iter().map(|&k| u128::from(k)).sum();
        let sum_sq: u128 = self.degrees.iter().map(|&k| u128::from(k) * u128::from(k)).sum();
        (n * sum_sq, sum * sum)
    }
}

// On-disk description. Either explicit trials or, for two-arm-only
// networks, a pair-count shorthand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_treatments: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trials: Option<Vec<TrialFile>>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    k: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_per_arm: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialFile {
    arms: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<Vec<i64>>,
}

impl TryFrom<NetworkFile> for EvidenceNetwork {
    type Error = NetworkError;

    fn try_from(file: NetworkFile) -> Result<Self, NetworkError> {
        let n_per_arm = match file.n_per_arm {
            None => DEFAULT_PARTICIPANTS,
            Some(n) if n >= 1 && n <= i64::from(u32::MAX) => n as u32,
            Some(n) => {
                return Err(NetworkError::Shorthand(format!(
                    "n_per_arm = {n} must be a positive integer"
                )))
            }
        };
        if let Some(k) = file.k {
            if file.trials.is_some() {
                return Err(NetworkError::Shorthand(
                    "give either `K` or `trials`, not both".into(),
                ));
            }
            let n_treatments = file.n_treatments.unwrap_or(4);
            if n_treatments != 4 {
                return Err(NetworkError::Shorthand(
                    "the `K` shorthand is defined for four treatments".into(),
                ));
            }
            let counts = k
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    u32::try_from(c).map_err(|_| {
                        NetworkError::Shorthand(format!("K[{i}] = {c} must be a non-negative integer"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            return EvidenceNetwork::from_pair_counts(4, &counts, n_per_arm);
        }

        let n_treatments = file.n_treatments.ok_or(NetworkError::MissingField("n_treatments"))?;
        if n_treatments < 2 {
            return Err(NetworkError::TooFewTreatments(n_treatments));
        }
        let n_treatments = n_treatments as usize;
        let raw_trials = file.trials.ok_or(NetworkError::MissingField("trials"))?;
        let mut trials = Vec::with_capacity(raw_trials.len());
        for (index, raw) in raw_trials.into_iter().enumerate() {
            let wrap = |source| NetworkError::Trial { index, source };
            let mut arms = Vec::with_capacity(raw.arms.len());
            for (position, &arm) in raw.arms.iter().enumerate() {
                if arm < 0 || arm as u64 >= n_treatments as u64 {
                    return Err(wrap(TrialError::ArmOutOfRange {
                        position,
                        arm,
                        n_treatments,
                    }));
                }
                arms.push(TreatmentId(arm as usize));
            }
            let participants = match raw.n {
                None => vec![n_per_arm; arms.len()],
                Some(ns) => {
                    let mut out = Vec::with_capacity(ns.len());
                    for (position, &value) in ns.iter().enumerate() {
                        if value < 1 || value > i64::from(u32::MAX) {
                            return Err(wrap(TrialError::NonPositiveParticipants { position, value }));
                        }
                        out.push(value as u32);
                    }
                    out
                }
            };
            trials.push(Trial::new(arms, participants).map_err(wrap)?);
        }
        EvidenceNetwork::new(n_treatments, trials)
    }
}

impl From<EvidenceNetwork> for NetworkFile {
    fn from(network: EvidenceNetwork) -> Self {
        NetworkFile {
            n_treatments: Some(network.n_treatments as i64),
            trials: Some(
                network
                    .trials
                    .into_iter()
                    .map(|t| TrialFile {
                        arms: t.arms.iter().map(|a| a.0 as i64).collect(),
                        n: Some(t.participants.iter().map(|&n| i64::from(n)).collect()),
                    })
                    .collect(),
            ),
            ..NetworkFile::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(i: usize) -> TreatmentId {
        TreatmentId(i)
    }

    fn k4(counts: [u32; 6]) -> EvidenceNetwork {
        EvidenceNetwork::from_pair_counts(4, &counts, 25).unwrap()
    }

    // Independent degree computation straight from the trial list.
    fn brute_force_geometry(network: &EvidenceNetwork) -> (Vec<f64>, f64, f64, f64) {
        let n = network.n_treatments();
        let mut degrees = vec![0.0; n];
        for trial in network.trials() {
            for a in trial.arms() {
                for b in trial.arms() {
                    if a != b {
                        degrees[a.0] += 1.0;
                    }
                }
            }
        }
        let mean = degrees.iter().sum::<f64>() / n as f64;
        let h2 = degrees.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / n as f64;
        (degrees, mean, h2, h2 / (mean * mean))
    }

    #[test]
    fn star_comparison_counts() {
        let net = k4([1, 5, 15, 0, 0, 0]);
        assert_eq!(net.n_trials(), 21);
        assert_eq!(net.pair_counts(), vec![1, 5, 15, 0, 0, 0]);
    }

    #[test]
    fn multi_arm_trial_counts_every_pair() {
        let three = Trial::new(vec![t(0), t(2), t(3)], vec![25; 3]).unwrap();
        let bridge = Trial::two_arm(t(0), t(1), 25).unwrap();
        let net = EvidenceNetwork::new(4, vec![three, bridge]).unwrap();
        assert_eq!(net.pair_counts(), vec![1, 1, 1, 0, 0, 1]);

        let four = Trial::new(vec![t(3), t(1), t(0), t(2)], vec![25; 4]).unwrap();
        let net = EvidenceNetwork::new(4, vec![four]).unwrap();
        assert_eq!(net.pair_counts(), vec![1; 6]);
        let g = net.geometry();
        assert_eq!(g.degrees, vec![3, 3, 3, 3]);
        assert_eq!(g.irregularity, 0.0);
    }

    #[test]
    fn star_geometry_matches_hand_and_brute_force() {
        let net = k4([1, 5, 15, 0, 0, 0]);
        let g = net.geometry();
        assert_eq!(g.degrees, vec![21, 1, 5, 15]);
        assert_eq!(g.mean_degree, 10.5);
        assert_eq!(g.irregularity, 62.75);
        assert!((g.normalised_irregularity - 62.75 / 110.25).abs() < 1e-15);
        assert!((g.normalised_irregularity - 0.5692).abs() < 5e-5);

        let (degrees, mean, h2, ratio) = brute_force_geometry(&net);
        assert_eq!(degrees, vec![21.0, 1.0, 5.0, 15.0]);
        assert_eq!(mean, g.mean_degree);
        assert_eq!(h2, g.irregularity);
        assert_eq!(ratio, g.normalised_irregularity);
    }

    #[test]
    fn planning_example_irregularities() {
        let cases = [
            ([1, 0, 0, 19, 0, 1], 0.82),
            ([1, 0, 0, 29, 0, 1], 0.88),
            ([1, 10, 0, 19, 0, 1], 0.48),
            ([1, 0, 10, 19, 0, 1], 0.08),
        ];
        for (k, expected) in cases {
            let ratio = k4(k).geometry().normalised_irregularity;
            assert_eq!(format!("{ratio:.2}"), format!("{expected:.2}"), "K = {k:?}");
        }
    }

    #[test]
    fn regular_complete_loop_has_zero_irregularity() {
        let g = k4([1, 1, 1, 1, 1, 1]).geometry();
        assert_eq!(g.irregularity, 0.0);
        assert_eq!(g.normalised_irregularity, 0.0);
    }

    #[test]
    fn arms_are_sorted_with_their_participants() {
        let trial = Trial::new(vec![t(3), t(0), t(2)], vec![30, 10, 20]).unwrap();
        assert_eq!(trial.arms(), &[t(0), t(2), t(3)]);
        assert_eq!(trial.participants(), &[10, 20, 30]);
        assert_eq!(trial.baseline(), t(0));
    }

    #[test]
    fn trial_validation() {
        assert_eq!(
            Trial::new(vec![t(0)], vec![5]),
            Err(TrialError::TooFewArms(1))
        );
        assert_eq!(
            Trial::new(vec![t(1), t(1)], vec![5, 5]),
            Err(TrialError::DuplicateArm(t(1)))
        );
        assert!(matches!(
            Trial::new(vec![t(0), t(1)], vec![5]),
            Err(TrialError::LengthMismatch { .. })
        ));
        assert!(matches!(
            Trial::new(vec![t(0), t(1)], vec![5, 0]),
            Err(TrialError::NonPositiveParticipants { position: 1, .. })
        ));
    }

    #[test]
    fn network_validation() {
        let t01 = Trial::two_arm(t(0), t(1), 25).unwrap();
        let t23 = Trial::two_arm(t(2), t(3), 25).unwrap();
        assert_eq!(
            EvidenceNetwork::new(4, vec![t01.clone(), t23]),
            Err(NetworkError::Disconnected)
        );
        assert_eq!(
            EvidenceNetwork::new(3, vec![t01.clone()]),
            Err(NetworkError::UnusedTreatment(t(2)))
        );
        assert!(matches!(
            EvidenceNetwork::new(1, vec![t01.clone()]),
            Err(NetworkError::TooFewTreatments(1))
        ));
        assert_eq!(EvidenceNetwork::new(2, vec![]), Err(NetworkError::NoTrials));
        assert!(matches!(
            EvidenceNetwork::new(2, vec![Trial::two_arm(t(0), t(5), 1).unwrap()]),
            Err(NetworkError::Trial { index: 0, .. })
        ));
    }

    #[test]
    fn parses_explicit_and_shorthand_files() {
        let explicit = r#"{"n_treatments": 4, "trials": [
            {"arms": [0, 2, 3], "n": [25, 25, 25]},
            {"arms": [1, 0], "n": [30, 20]}
        ]}"#;
        let net = EvidenceNetwork::from_json_str(explicit).unwrap();
        assert_eq!(net.trials()[1].arms(), &[t(0), t(1)]);
        assert_eq!(net.trials()[1].participants(), &[20, 30]);

        let short = r#"{"K": [1, 0, 0, 19, 0, 1], "n_per_arm": 25}"#;
        let net = EvidenceNetwork::from_json_str(short).unwrap();
        assert_eq!(net.n_trials(), 21);
        assert_eq!(net.pair_counts(), vec![1, 0, 0, 19, 0, 1]);

        let back = EvidenceNetwork::from_json_str(&net.to_json_pretty()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn negative_participants_name_the_trial() {
        let bad = r#"{"n_treatments": 2, "trials": [
            {"arms": [0, 1], "n": [25, 25]},
            {"arms": [0, 1], "n": [25, -3]}
        ]}"#;
        let err = EvidenceNetwork::from_json_str(bad).unwrap_err().to_string();
        assert!(err.contains("trials[1]"), "{err}");
        assert!(err.contains("n[1] = -3"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{"n_treatments": 2, "trials": [{"arms": [0, 1]}], "extra": 1}"#;
        assert!(EvidenceNetwork::from_json_str(bad).is_err());
    }

    #[test]
    fn irregularity_ratio_is_exact() {
        let g = k4([1, 0, 10, 19, 0, 1]).geometry();
        let (num, den) = g.irregularity_ratio();
        assert!((num as f64 / den as f64 - 1.0 - g.normalised_irregularity).abs() < 1e-12);
    }

    fn arb_network() -> impl Strategy<Value = EvidenceNetwork> {
        // A spanning path keeps every network connected; extra trials are
        // arbitrary subsets of size >= 2.
        (2usize..6).prop_flat_map(|n| {
            let extra = proptest::collection::vec(
                proptest::collection::btree_set(0..n, 2..=n),
                0..12,
            );
            (Just(n), extra)
        })
        .prop_map(|(n, extra)| {
            let mut trials: Vec<Trial> = (1..n)
                .map(|b| Trial::two_arm(t(b - 1), t(b), 10).unwrap())
                .collect();
            for set in extra {
                let arms: Vec<_> = set.into_iter().map(t).collect();
                let m = arms.len();
                trials.push(Trial::new(arms, vec![10; m]).unwrap());
            }
            EvidenceNetwork::new(n, trials).unwrap()
        })
    }

    proptest! {
        #[test]
        fn degree_sum_counts_arm_pairs(net in arb_network()) {
            let g = net.geometry();
            let expected: u64 = net
                .trials()
                .iter()
                .map(|tr| (tr.arm_count() * (tr.arm_count() - 1)) as u64)
                .sum();
            prop_assert_eq!(g.degrees.iter().sum::<u64>(), expected);
            let (degrees, _, h2, ratio) = brute_force_geometry(&net);
            prop_assert_eq!(g.degrees.iter().map(|&d| d as f64).collect::<Vec<_>>(), degrees);
            prop_assert!((g.irregularity - h2).abs() <= 1e-9 * (1.0 + h2));
            prop_assert!((g.normalised_irregularity - ratio).abs() <= 1e-12);
            prop_assert_eq!(g.irregularity == 0.0, g.degrees.iter().all(|&d| d == g.degrees[0]));
        }

        #[test]
        fn relabelling_preserves_irregularity(net in arb_network(), shift in 0usize..6) {
            let n = net.n_treatments();
            let relabel = |x: TreatmentId| t((x.0 + shift) % n);
            let trials = net
                .trials()
                .iter()
                .map(|tr| {
                    Trial::new(tr.arms().iter().map(|&a| relabel(a)).collect(), tr.participants().to_vec())
                        .unwrap()
                })
                .collect();
            let moved = EvidenceNetwork::new(n, trials).unwrap();
            let (a, b) = (net.geometry(), moved.geometry());
            prop_assert!((a.irregularity - b.irregularity).abs() < 1e-9);
            prop_assert!((a.normalised_irregularity - b.normalised_irregularity).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { max_global_rejects: 50_000, ..ProptestConfig::default() })]

        #[test]
        fn bridging_two_low_degree_treatments_does_not_raise_h2(net in arb_network()) {
            let g = net.geometry();
            let mut order: Vec<usize> = (0..net.n_treatments()).collect();
            order.sort_by_key(|&a| (g.degrees[a], a));
            let (lo, next) = (order[0], order[1]);
            prop_assume!((g.degrees[next] as f64) < g.mean_degree - 1.0);
            let more = net.with_trials([Trial::two_arm(t(lo), t(next), 10).unwrap()]).unwrap();
            prop_assert!(more.geometry().irregularity <= g.irregularity + 1e-9);
        }
    }
}
