//! Random-effects network meta-analysis fitted by Metropolis-within-Gibbs.
//!
//! Model, for trial `i` with arms `t(i,1) < ... < t(i,m)`:
//!
//! ```text
//! r(i,l) ~ Bin(n(i,l), expit(b(i) + delta(i,l)))      delta(i,1) = 0
//! (delta(i,2..m)) ~ MVN(d[t(i,l)] - d[t(i,1)], Sigma_i)
//! Sigma_i = tau^2 (I + J) / 2
//! b(i), d[a] ~ N(0, 10^4)        tau ~ U(0, 5)
//! ```
//!
//! Every scalar is updated in turn by a Gaussian random-walk Metropolis
//! step. Only the factors touched by a parameter are re-evaluated: the
//! sampler caches each arm's binomial term and each trial's quadratic form
//! `q = sum(e^2) - (sum e)^2 / m`, with `e` the deviations of the relative
//! effects from their means, so that `e' Sigma^-1 e / 2 = q / tau^2`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::Dataset;
use crate::math::{ln_binomial, logit, softplus};
use crate::network::{EvidenceNetwork, TreatmentId};
use crate::rng::{chain_stream, RandomSource};

/// Prior variance of every `b(i)` and `d[a]`.
pub const PRIOR_VARIANCE: f64 = 1e4;
/// Upper end of the uniform prior on `tau`.
pub const TAU_MAX: f64 = 5.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MIN_LOG_SCALE: f64 = -18.0;
const MAX_LOG_SCALE: f64 = 9.0;

fn default_burn_in() -> usize {
    5_000
}
fn default_iterations() -> usize {
    20_000
}
fn default_thin() -> usize {
    10
}
fn default_initial_scale() -> f64 {
    0.5
}
fn default_initial_tau_scale() -> f64 {
    0.1
}
fn default_target_acceptance() -> f64 {
    0.44
}
fn default_adaptation_decay() -> f64 {
    0.6
}
fn default_min_acceptance() -> f64 {
    0.05
}
fn default_max_acceptance() -> f64 {
    0.95
}

/// Length, thinning and proposal tuning of one chain.
///
/// Proposal scales adapt during burn-in only (Robbins-Monro on the log
/// scale toward `target_acceptance`, step `t^-adaptation_decay`); after
/// burn-in they are frozen. The adapted quantities are multipliers: steps
/// for relative effects and basic parameters are scaled by
/// `tau / sqrt(1 + tau^2)`, and steps for `tau` by the mode of its full
/// conditional, so the chain does not get stuck when `tau` is small.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Sweeps after burn-in; every `thin`-th is retained.
    #[serde(default = "default_iterations", alias = "iterations_after_burn_in")]
    pub iterations: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_initial_scale")]
    pub initial_scale: f64,
    #[serde(default = "default_initial_tau_scale")]
    pub initial_tau_scale: f64,
    #[serde(default = "default_target_acceptance")]
    pub target_acceptance: f64,
    #[serde(default = "default_adaptation_decay")]
    pub adaptation_decay: f64,
    #[serde(default = "default_min_acceptance")]
    pub min_acceptance: f64,
    #[serde(default = "default_max_acceptance")]
    pub max_acceptance: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burn_in: default_burn_in(),
            iterations: default_iterations(),
            thin: default_thin(),
            initial_scale: default_initial_scale(),
            initial_tau_scale: default_initial_tau_scale(),
            target_acceptance: default_target_acceptance(),
            adaptation_decay: default_adaptation_decay(),
            min_acceptance: default_min_acceptance(),
            max_acceptance: default_max_acceptance(),
            seed: 0,
        }
    }
}

impl ChainConfig {
    /// Short chain with the given lengths and otherwise default settings.
    pub fn with_lengths(burn_in: usize, iterations: usize, thin: usize) -> Self {
        ChainConfig {
            burn_in,
            iterations,
            thin,
            ..ChainConfig::default()
        }
    }

    pub fn retained(&self) -> usize {
        self.iterations / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidChain(msg));
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.iterations < self.thin || self.iterations % self.thin != 0 {
            return bad(format!(
                "iterations ({}) must be a positive multiple of thin ({})",
                self.iterations, self.thin
            ));
        }
        if !(self.initial_scale > 0.0 && self.initial_tau_scale > 0.0) {
            return bad("initial proposal scales must be positive".into());
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad("target acceptance must lie in (0, 1)".into());
        }
        if !(self.adaptation_decay > 0.5 && self.adaptation_decay <= 1.0) {
            return bad("adaptation decay must lie in (0.5, 1]".into());
        }
        if !(0.0..=self.max_acceptance).contains(&self.min_acceptance) || self.max_acceptance > 1.0 {
            return bad("acceptance bounds must satisfy 0 <= min <= max <= 1".into());
        }
        Ok(())
    }
}

/// Every unknown of the model at one point of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    /// Baseline log odds, one per trial.
    pub b: Vec<f64>,
    /// Relative effects of arms 2..m, one vector per trial.
    pub delta: Vec<Vec<f64>>,
    /// `d[a - 1]`: effect of treatment `a` against `T1`.
    pub d: Vec<f64>,
    pub tau: f64,
}

impl LatentState {
    /// All-zero effects and baselines with the given `tau`.
    pub fn zeros(network: &EvidenceNetwork, tau: f64) -> Self {
        LatentState {
            b: vec![0.0; network.n_trials()],
            delta: network
                .trials()
                .iter()
                .map(|t| vec![0.0; t.arm_count() - 1])
                .collect(),
            d: vec![0.0; network.n_treatments() - 1],
            tau,
        }
    }

    fn basic(&self, t: TreatmentId) -> f64 {
        if t.0 == 0 {
            0.0
        } else {
            self.d[t.0 - 1]
        }
    }
}

fn ln_normal_prior(x: f64) -> f64 {
    -0.5 * (LN_2PI + PRIOR_VARIANCE.ln()) - x * x / (2.0 * PRIOR_VARIANCE)
}

/// Log prior density; `-inf` when `tau` is outside `(0, 5)`.
pub fn log_prior(state: &LatentState) -> f64 {
    if !(state.tau > 0.0 && state.tau < TAU_MAX) {
        return f64::NEG_INFINITY;
    }
    state.b.iter().chain(&state.d).map(|&x| ln_normal_prior(x)).sum::<f64>() - TAU_MAX.ln()
}

/// Inverse of `Sigma = tau^2 (I + J) / 2` for an `m`-arm trial, which is
/// `(2 / tau^2) (I - J / m)`.
pub fn sigma_inverse(arm_count: usize, tau: f64) -> Result<Vec<Vec<f64>>> {
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTau(tau));
    }
    let k = arm_count.saturating_sub(1);
    let m = arm_count as f64;
    let s = 2.0 / (tau * tau);
    Ok((0..k)
        .map(|i| {
            (0..k)
                .map(|j| s * (if i == j { 1.0 } else { 0.0 } - 1.0 / m))
                .collect()
        })
        .collect())
}

/// `ln det Sigma = (m - 1) ln(tau^2 / 2) + ln m`.
pub fn sigma_log_det(arm_count: usize, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTau(tau));
    }
    let m = arm_count as f64;
    Ok((m - 1.0) * (0.5 * tau * tau).ln() + m.ln())
}

/// Binomial log probability of `r` events among `n` at log odds `eta`.
pub fn arm_log_likelihood(n: u32, r: u32, eta: f64) -> f64 {
    ln_binomial(n, r) + f64::from(r) * eta - f64::from(n) * softplus(eta)
}

/// Log density of a trial's relative effects given their means and `tau`.
pub fn relative_effect_log_density(deltas: &[f64], means: &[f64], tau: f64) -> f64 {
    let m = deltas.len() + 1;
    let (s1, s2) = deltas
        .iter()
        .zip(means)
        .map(|(x, mu)| x - mu)
        .fold((0.0, 0.0), |(s1, s2), e| (s1 + e, s2 + e * e));
    let q = s2 - s1 * s1 / m as f64;
    let log_det = match sigma_log_det(m, tau) {
        Ok(v) => v,
        Err(_) => return f64::NEG_INFINITY,
    };
    -0.5 * (m - 1) as f64 * LN_2PI - 0.5 * log_det - q / (tau * tau)
}

/// Binomial terms of every arm plus the multivariate normal term of every
/// trial.
pub fn log_likelihood(network: &EvidenceNetwork, dataset: &Dataset, state: &LatentState) -> f64 {
    let mut total = 0.0;
    for (i, trial) in network.trials().iter().enumerate() {
        let events = &dataset.events[i];
        let n = trial.participants();
        total += arm_log_likelihood(n[0], events[0], state.b[i]);
        for l in 1..trial.arm_count() {
            total += arm_log_likelihood(n[l], events[l], state.b[i] + state.delta[i][l - 1]);
        }
        let base = state.basic(trial.baseline());
        let means: Vec<f64> = trial.arms()[1..].iter().map(|&t| state.basic(t) - base).collect();
        total += relative_effect_log_density(&state.delta[i], &means, state.tau);
    }
    total
}

/// Unnormalised log posterior.
pub fn log_posterior(network: &EvidenceNetwork, dataset: &Dataset, state: &LatentState) -> f64 {
    let prior = log_prior(state);
    if prior == f64::NEG_INFINITY {
        return prior;
    }
    prior + log_likelihood(network, dataset, state)
}

/// Post-burn-in acceptance rate of every parameter.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub b: Vec<f64>,
    pub delta: Vec<f64>,
    pub d: Vec<f64>,
    pub tau: f64,
}

impl ChainDiagnostics {
    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.b
            .iter()
            .chain(&self.delta)
            .chain(&self.d)
            .copied()
            .chain(std::iter::once(self.tau))
    }

    pub fn min_rate(&self) -> f64 {
        self.rates().fold(f64::INFINITY, f64::min)
    }

    pub fn max_rate(&self) -> f64 {
        self.rates().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Retained draws of the basic effects and `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub n_treatments: usize,
    /// `d_samples[s][a - 1]`: draw `s` of the effect of treatment `a` against `T1`.
    pub d_samples: Vec<Vec<f64>>,
    pub tau_samples: Vec<f64>,
    pub diagnostics: ChainDiagnostics,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.tau_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_samples.is_empty()
    }

    /// Draw `s` as the full vector `(0, d_12, ..., d_1N)`.
    pub fn full_draw(&self, s: usize) -> Vec<f64> {
        std::iter::once(0.0).chain(self.d_samples[s].iter().copied()).collect()
    }

    pub fn mean_d(&self) -> Vec<f64> {
        let k = self.n_treatments - 1;
        let mut out = vec![0.0; k];
        for draw in &self.d_samples {
            for (o, x) in out.iter_mut().zip(draw) {
                *o += x;
            }
        }
        let s = self.len() as f64;
        out.iter_mut().for_each(|x| *x /= s);
        out
    }

    pub fn mean_tau(&self) -> f64 {
        self.tau_samples.iter().sum::<f64>() / self.len() as f64
    }

    /// CSV with header `iter,d_T1T2,...,d_T1TN,tau`; `iter` counts sweeps
    /// after burn-in.
    pub fn write_csv<W: Write>(&self, mut out: W, thin: usize) -> std::io::Result<()> {
        write!(out, "iter")?;
        for a in 2..=self.n_treatments {
            write!(out, ",d_T1T{a}")?;
        }
        writeln!(out, ",tau")?;
        for (s, (draw, tau)) in self.d_samples.iter().zip(&self.tau_samples).enumerate() {
            write!(out, "{}", (s + 1) * thin)?;
            for x in draw {
                write!(out, ",{x:.16e}")?;
            }
            writeln!(out, ",{tau:.16e}")?;
        }
        Ok(())
    }
}

/// Per-draw samples of `d_ab = d_1b - d_1a`.
pub fn contrast_samples(samples: &PosteriorSamples, a: TreatmentId, b: TreatmentId) -> Result<Vec<f64>> {
    if a == b {
        return Err(Error::SelfContrast(a.0));
    }
    let basic = |draw: &[f64], t: TreatmentId| if t.0 == 0 { 0.0 } else { draw[t.0 - 1] };
    Ok(samples
        .d_samples
        .iter()
        .map(|draw| basic(draw, b) - basic(draw, a))
        .collect())
}

// Flattened arm data plus the cached pieces of the log posterior.
struct Chain {
    n: Vec<f64>,
    r: Vec<f64>,
    treat: Vec<usize>,
    /// Arms of trial `i` are `start[i]..start[i + 1]`.
    start: Vec<usize>,
    /// Trials containing treatment `a`, for `a >= 1`.
    trials_with: Vec<Vec<usize>>,
    /// `sum_i (m_i - 1)`.
    effect_dims: f64,

    b: Vec<f64>,
    /// Per arm; baseline arms stay at zero.
    delta: Vec<f64>,
    /// Per treatment; `d[0] = 0`.
    d: Vec<f64>,
    tau: f64,

    arm_ll: Vec<f64>,
    q: Vec<f64>,
    scratch: Vec<f64>,
}

#[inline]
fn binomial_kernel(n: f64, r: f64, eta: f64) -> f64 {
    r * eta - n * softplus(eta)
}

impl Chain {
    fn new(network: &EvidenceNetwork, dataset: &Dataset) -> Self {
        let mut n = Vec::new();
        let mut r = Vec::new();
        let mut treat = Vec::new();
        let mut start = vec![0];
        let mut trials_with = vec![Vec::new(); network.n_treatments()];
        let mut b = Vec::with_capacity(network.n_trials());
        for (i, trial) in network.trials().iter().enumerate() {
            for (l, &t) in trial.arms().iter().enumerate() {
                n.push(f64::from(trial.participants()[l]));
                r.push(f64::from(dataset.events[i][l]));
                treat.push(t.0);
                trials_with[t.0].push(i);
            }
            start.push(n.len());
            let (r1, n1) = (f64::from(dataset.events[i][0]), f64::from(trial.participants()[0]));
            b.push(logit((r1 + 0.5) / (n1 + 1.0)));
        }
        let effect_dims = (n.len() - network.n_trials()) as f64;
        let arms = n.len();
        let mut chain = Chain {
            n,
            r,
            treat,
            start,
            trials_with,
            effect_dims,
            b,
            delta: vec![0.0; arms],
            d: vec![0.0; network.n_treatments()],
            tau: 0.5,
            arm_ll: vec![0.0; arms],
            q: vec![0.0; network.n_trials()],
            scratch: Vec::new(),
        };
        chain.refresh_caches();
        chain
    }

    fn n_trials(&self) -> usize {
        self.start.len() - 1
    }

    fn trial_of_arm(&self, arm: usize) -> usize {
        self.start.partition_point(|&s| s <= arm) - 1
    }

    fn refresh_caches(&mut self) {
        for i in 0..self.n_trials() {
            for a in self.start[i]..self.start[i + 1] {
                self.arm_ll[a] = binomial_kernel(self.n[a], self.r[a], self.b[i] + self.delta[a]);
            }
            self.q[i] = self.trial_q(i);
        }
    }

    #[inline]
    fn trial_q(&self, i: usize) -> f64 {
        let (s, e) = (self.start[i], self.start[i + 1]);
        let base = self.d[self.treat[s]];
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for a in s + 1..e {
            let x = self.delta[a] - (self.d[self.treat[a]] - base);
            s1 += x;
            s2 += x * x;
        }
        s2 - s1 * s1 / (e - s) as f64
    }

    fn non_baseline_arms(&self) -> Vec<usize> {
        (0..self.n_trials())
            .flat_map(|i| self.start[i] + 1..self.start[i + 1])
            .collect()
    }

    // Each `log_ratio_*` returns log pi(proposal) - log pi(current) and leaves
    // the state unchanged; candidate cache values go to `scratch`.

    fn log_ratio_b(&mut self, i: usize, proposal: f64) -> f64 {
        self.scratch.clear();
        let mut diff = 0.0;
        for a in self.start[i]..self.start[i + 1] {
            let ll = binomial_kernel(self.n[a], self.r[a], proposal + self.delta[a]);
            diff += ll - self.arm_ll[a];
            self.scratch.push(ll);
        }
        let cur = self.b[i];
        diff - (proposal * proposal - cur * cur) / (2.0 * PRIOR_VARIANCE)
    }

    fn commit_b(&mut self, i: usize, proposal: f64) {
        self.b[i] = proposal;
        let s = self.start[i];
        for (k, &ll) in self.scratch.iter().enumerate() {
            self.arm_ll[s + k] = ll;
        }
    }

    fn log_ratio_delta(&mut self, arm: usize, proposal: f64) -> f64 {
        let i = self.trial_of_arm(arm);
        let ll = binomial_kernel(self.n[arm], self.r[arm], self.b[i] + proposal);
        let cur = self.delta[arm];
        self.delta[arm] = proposal;
        let q = self.trial_q(i);
        self.delta[arm] = cur;
        self.scratch.clear();
        self.scratch.push(ll);
        self.scratch.push(q);
        ll - self.arm_ll[arm] - (q - self.q[i]) / (self.tau * self.tau)
    }

    fn commit_delta(&mut self, arm: usize, proposal: f64) {
        let i = self.trial_of_arm(arm);
        self.delta[arm] = proposal;
        self.arm_ll[arm] = self.scratch[0];
        self.q[i] = self.scratch[1];
    }

    fn log_ratio_d(&mut self, t: usize, proposal: f64) -> f64 {
        let cur = self.d[t];
        self.d[t] = proposal;
        self.scratch.clear();
        let mut dq = 0.0;
        for k in 0..self.trials_with[t].len() {
            let i = self.trials_with[t][k];
            let q = self.trial_q(i);
            dq += q - self.q[i];
            self.scratch.push(q);
        }
        self.d[t] = cur;
        -dq / (self.tau * self.tau) - (proposal * proposal - cur * cur) / (2.0 * PRIOR_VARIANCE)
    }

    fn commit_d(&mut self, t: usize, proposal: f64) {
        self.d[t] = proposal;
        for (k, &i) in self.trials_with[t].iter().enumerate() {
            self.q[i] = self.scratch[k];
        }
    }

    // Reference step for relative effects and basic parameters: about tau
    // when heterogeneity is small, about 1 when it is large. Depends only
    // on tau, which is held fixed while these are updated.
    fn effect_scale(&self) -> f64 {
        self.tau / (1.0 + self.tau * self.tau).sqrt()
    }

    // Reference step for tau: the mode of its full conditional, a function
    // of the other parameters only.
    fn tau_scale(&self) -> f64 {
        let q: f64 = self.q.iter().sum();
        (2.0 * q / self.effect_dims).sqrt().clamp(1e-6, TAU_MAX)
    }

    fn log_ratio_tau(&self, proposal: f64) -> f64 {
        if !(proposal > 0.0 && proposal < TAU_MAX) {
            return f64::NEG_INFINITY;
        }
        let q: f64 = self.q.iter().sum();
        let (t0, t1) = (self.tau, proposal);
        -self.effect_dims * (t1.ln() - t0.ln()) - q * (1.0 / (t1 * t1) - 1.0 / (t0 * t0))
    }

    #[cfg(test)]
    fn state(&self) -> LatentState {
        LatentState {
            b: self.b.clone(),
            delta: (0..self.n_trials())
                .map(|i| self.delta[self.start[i] + 1..self.start[i + 1]].to_vec())
                .collect(),
            d: self.d[1..].to_vec(),
            tau: self.tau,
        }
    }

    #[cfg(test)]
    fn set_state(&mut self, state: &LatentState) {
        self.b.clone_from(&state.b);
        for (i, ds) in state.delta.iter().enumerate() {
            for (k, &x) in ds.iter().enumerate() {
                self.delta[self.start[i] + 1 + k] = x;
            }
        }
        self.d[1..].copy_from_slice(&state.d);
        self.tau = state.tau;
        self.refresh_caches();
    }
}

/// Reflects `x` into `(0, hi)`.
fn reflect(x: f64, hi: f64) -> f64 {
    let period = 2.0 * hi;
    let mut x = if x.abs() > period { x.rem_euclid(period) } else { x };
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > hi {
            x = 2.0 * hi - x;
        } else {
            return x;
        }
    }
}

// Proposal scale and acceptance bookkeeping for one scalar.
#[derive(Clone, Copy)]
struct Tuner {
    log_scale: f64,
    accepted: u64,
}

impl Tuner {
    fn new(scale: f64) -> Self {
        Tuner {
            log_scale: scale.ln(),
            accepted: 0,
        }
    }

    #[inline]
    fn scale(&self) -> f64 {
        self.log_scale.exp()
    }
}

struct Step {
    adapt_gain: Option<f64>,
    target: f64,
}

impl Step {
    #[inline]
    fn record(&self, tuner: &mut Tuner, accepted: bool) {
        match self.adapt_gain {
            Some(gain) => {
                let a = if accepted { 1.0 } else { 0.0 };
                tuner.log_scale =
                    (tuner.log_scale + gain * (a - self.target)).clamp(MIN_LOG_SCALE, MAX_LOG_SCALE);
            }
            None => tuner.accepted += u64::from(accepted),
        }
    }
}

#[inline]
fn accept<R: RandomSource>(rng: &mut R, log_ratio: f64) -> bool {
    rng.next_uniform().ln() < log_ratio
}

/// Runs one chain and returns its thinned post-burn-in draws.
///
/// Fails if any parameter's post-burn-in acceptance rate falls outside
/// `[min_acceptance, max_acceptance]`.
pub fn run_chain(
    network: &EvidenceNetwork,
    dataset: &Dataset,
    config: &ChainConfig,
) -> Result<PosteriorSamples> {
    config.validate()?;
    dataset.check_against(network)?;
    let mut rng = chain_stream(config.seed);
    let mut chain = Chain::new(network, dataset);

    let n_trials = chain.n_trials();
    let n_t = network.n_treatments();
    let effect_arms = chain.non_baseline_arms();
    let mut b_tuners = vec![Tuner::new(config.initial_scale); n_trials];
    let mut delta_tuners = vec![Tuner::new(config.initial_scale); effect_arms.len()];
    let mut d_tuners = vec![Tuner::new(config.initial_scale); n_t - 1];
    let mut tau_tuner = Tuner::new(config.initial_tau_scale);

    let mut d_samples = Vec::with_capacity(config.retained());
    let mut tau_samples = Vec::with_capacity(config.retained());

    let total = config.burn_in + config.iterations;
    for sweep in 1..=total {
        let step = Step {
            adapt_gain: (sweep <= config.burn_in)
                .then(|| (sweep as f64).powf(-config.adaptation_decay)),
            target: config.target_acceptance,
        };

        for (i, tuner) in b_tuners.iter_mut().enumerate() {
            let proposal = chain.b[i] + tuner.scale() * rng.next_gaussian();
            let ok = accept(&mut rng, chain.log_ratio_b(i, proposal));
            if ok {
                chain.commit_b(i, proposal);
            }
            step.record(tuner, ok);
        }
        let effect_scale = chain.effect_scale();
        for (k, tuner) in delta_tuners.iter_mut().enumerate() {
            let arm = effect_arms[k];
            let proposal = chain.delta[arm] + effect_scale * tuner.scale() * rng.next_gaussian();
            let ok = accept(&mut rng, chain.log_ratio_delta(arm, proposal));
            if ok {
                chain.commit_delta(arm, proposal);
            }
            step.record(tuner, ok);
        }
        for (k, tuner) in d_tuners.iter_mut().enumerate() {
            let t = k + 1;
            let proposal = chain.d[t] + effect_scale * tuner.scale() * rng.next_gaussian();
            let ok = accept(&mut rng, chain.log_ratio_d(t, proposal));
            if ok {
                chain.commit_d(t, proposal);
            }
            step.record(tuner, ok);
        }
        {
            let width = chain.tau_scale() * tau_tuner.scale();
            let proposal = reflect(chain.tau + width * rng.next_gaussian(), TAU_MAX);
            let ok = accept(&mut rng, chain.log_ratio_tau(proposal));
            if ok {
                chain.tau = proposal;
            }
            step.record(&mut tau_tuner, ok);
        }

        if sweep > config.burn_in && (sweep - config.burn_in) % config.thin == 0 {
            d_samples.push(chain.d[1..].to_vec());
            tau_samples.push(chain.tau);
        }
    }

    let rate = |t: &Tuner| t.accepted as f64 / config.iterations as f64;
    let diagnostics = ChainDiagnostics {
        b: b_tuners.iter().map(rate).collect(),
        delta: delta_tuners.iter().map(rate).collect(),
        d: d_tuners.iter().map(rate).collect(),
        tau: rate(&tau_tuner),
    };
    check_mixing(&diagnostics, &chain, &effect_arms, config)?;

    Ok(PosteriorSamples {
        n_treatments: n_t,
        d_samples,
        tau_samples,
        diagnostics,
    })
}

fn check_mixing(
    diagnostics: &ChainDiagnostics,
    chain: &Chain,
    effect_arms: &[usize],
    config: &ChainConfig,
) -> Result<()> {
    let out_of_range = |r: f64| r < config.min_acceptance || r > config.max_acceptance;
    let fail = |parameter: String, rate: f64| {
        Err(Error::PoorMixing {
            parameter,
            rate,
            min: config.min_acceptance,
            max: config.max_acceptance,
        })
    };
    for (i, &r) in diagnostics.b.iter().enumerate() {
        if out_of_range(r) {
            return fail(format!("b[{i}]"), r);
        }
    }
    for (k, &r) in diagnostics.delta.iter().enumerate() {
        if out_of_range(r) {
            let arm = effect_arms[k];
            let i = chain.trial_of_arm(arm);
            return fail(format!("delta[{i}][{}]", arm - chain.start[i] + 1), r);
        }
    }
    for (k, &r) in diagnostics.d.iter().enumerate() {
        if out_of_range(r) {
            return fail(format!("d_T1T{}", k + 2), r);
        }
    }
    if out_of_range(diagnostics.tau) {
        return fail("tau".into(), diagnostics.tau);
    }
    Ok(())
}
