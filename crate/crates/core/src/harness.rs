//! Replicated simulation experiments and suites of them.
//!
//! One experiment repeats, for `rep = 1..=omega`: draw a dataset from the
//! true parameters, fit it, score the fit against the truth. Every
//! replication owns generators seeded from `(master seed, rep)`, so the
//! output does not depend on how many workers run it.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::{generate_dataset, DgmKind, ModelParams};
use crate::metrics::{aggregate, replication_result, true_rank_probabilities, AggregateReport, ReplicationResult, TruthSummary};
use crate::network::{EvidenceNetwork, GeometrySummary};
use crate::rng::{data_stream, derive_seed};
use crate::sampler::{run_chain, ChainConfig, PosteriorSamples};

pub const DEFAULT_OMEGA: usize = 1000;
pub const DEFAULT_TAU: f64 = 0.1;

/// Column header of `suite.csv`.
pub const SUITE_HEADER: &str = "network_id,M,h2_over_k2,sd_bar,abs_dP_bar,abs_dP_bar_norm,abs_dSUCRA_bar,abs_dSUCRA_bar_norm,abs_dd_bar,mean_tau,sd_tau";

const NORMALISATION_NOTE: &str =
    "abs_dP_bar_norm = abs_dP_bar / (2N) and abs_dSUCRA_bar_norm = abs_dSUCRA_bar / N, the analytic maxima of each total";

/// Formats a float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Participants per arm come from the network description (default 25,
    /// overridable per trial).
    pub network: EvidenceNetwork,
    pub params: ModelParams,
    pub dgm: DgmKind,
    pub omega: usize,
    pub chain: ChainConfig,
    pub master_seed: u64,
    /// `None` means one worker per available core.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Write each replication's retained draws under `samples/`.
    #[serde(default)]
    pub dump_samples: bool,
}

// On-disk form: network inline or by path, optional params and seed.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    name: String,
    #[serde(default)]
    network: Option<EvidenceNetwork>,
    #[serde(default)]
    network_file: Option<PathBuf>,
    #[serde(default)]
    params: Option<ParamsFile>,
    #[serde(default)]
    dgm: DgmKind,
    #[serde(default)]
    omega: Option<usize>,
    #[serde(default)]
    chain: ChainConfig,
    #[serde(default, alias = "master_seed")]
    seed: Option<u64>,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default)]
    dump_samples: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    #[serde(default)]
    d: Option<Vec<f64>>,
    #[serde(default)]
    tau: Option<f64>,
}

impl ExperimentConfig {
    /// Config with the reference defaults: null effects, `tau = 0.1`,
    /// Normal baselines, 1000 replications, default chain.
    pub fn new(name: impl Into<String>, network: EvidenceNetwork, master_seed: u64) -> Self {
        let n = network.n_treatments();
        ExperimentConfig {
            name: name.into(),
            network,
            params: ModelParams {
                d: vec![0.0; n - 1],
                tau: DEFAULT_TAU,
            },
            dgm: DgmKind::default(),
            omega: DEFAULT_OMEGA,
            chain: ChainConfig::default(),
            master_seed,
            workers: None,
            dump_samples: false,
        }
    }

    /// Parses a config file. `network_file` is resolved against `base_dir`;
    /// `seed_override` replaces the file's seed, and one of the two must be
    /// present.
    pub fn from_json_str(text: &str, base_dir: &Path, seed_override: Option<u64>) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::json("config", e))?;
        let network = match (file.network, file.network_file) {
            (Some(n), None) => n,
            (None, Some(p)) => EvidenceNetwork::from_path(base_dir.join(p))?,
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig("give either `network` or `network_file`, not both".into()))
            }
            (None, None) => return Err(Error::InvalidConfig("missing `network` or `network_file`".into())),
        };
        let master_seed = seed_override.or(file.seed).ok_or_else(|| {
            Error::InvalidConfig("a seed is required (set `seed` in the config or pass --seed)".into())
        })?;
        let n = network.n_treatments();
        let params = match file.params {
            None => ModelParams {
                d: vec![0.0; n - 1],
                tau: DEFAULT_TAU,
            },
            Some(p) => ModelParams {
                d: p.d.unwrap_or_else(|| vec![0.0; n - 1]),
                tau: p.tau.unwrap_or(DEFAULT_TAU),
            },
        };
        let config = ExperimentConfig {
            name: file.name,
            network,
            params,
            dgm: file.dgm,
            omega: file.omega.unwrap_or(DEFAULT_OMEGA),
            chain: file.chain,
            master_seed,
            workers: file.workers,
            dump_samples: file.dump_samples,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json_str(&text, base, seed_override).map_err(|e| match e {
            Error::Json { source, .. } => Error::json(path.display().to_string(), source),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(Error::InvalidConfig(format!(
                "name `{}` must be non-empty and usable as a directory name",
                self.name
            )));
        }
        if self.omega < 2 {
            return Err(Error::TooFewReplications {
                needed: 2,
                got: self.omega,
            });
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        self.params.check_against(&self.network)?;
        self.chain.validate()
    }

    /// Chain settings for one replication.
    fn chain_for(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            seed,
            ..self.chain.clone()
        }
    }
}

/// Full outcome of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub geometry: GeometrySummary,
    pub truth: TruthSummary,
    pub replications: Vec<ReplicationResult>,
    pub aggregate: AggregateReport,
    pub wall_seconds: f64,
}

impl ExperimentRecord {
    pub fn name(&self) -> &str {
        &self.config.name
    }

    /// One `suite.csv` row.
    pub fn suite_row(&self) -> String {
        let t = &self.aggregate.totals;
        let mut row = format!("{},{}", self.config.name, self.config.network.n_trials());
        for x in [
            self.geometry.normalised_irregularity,
            t.sd_bar,
            t.abs_dp_bar,
            t.abs_dp_bar_norm,
            t.abs_dsucra_bar,
            t.abs_dsucra_bar_norm,
            t.abs_dd_bar,
            self.aggregate.mean_tau,
            self.aggregate.sd_tau,
        ] {
            row.push(',');
            row.push_str(&fmt_float(x));
        }
        row
    }

    /// Short human-readable summary line.
    pub fn summary_line(&self) -> String {
        format!(
            "{}: M = {}, h2/k2 = {:.2}, SDbar = {:.3}, |dP|bar = {:.3}, mean tau = {:.3}",
            self.config.name,
            self.config.network.n_trials(),
            self.geometry.normalised_irregularity,
            self.aggregate.totals.sd_bar,
            self.aggregate.totals.abs_dp_bar,
            self.aggregate.mean_tau
        )
    }
}

fn worker_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

/// Draws and fits replication `rep` alone.
pub fn run_replication(config: &ExperimentConfig, truth: &TruthSummary, rep: u64) -> Result<(ReplicationResult, PosteriorSamples)> {
    let seed = derive_seed(config.master_seed, rep);
    let mut rng = data_stream(seed);
    let (dataset, _) = generate_dataset(&config.network, &config.params, config.dgm, &mut rng)?;
    let samples = run_chain(&config.network, &dataset, &config.chain_for(seed))?;
    let result = replication_result(rep, &samples, truth)?;
    Ok((result, samples))
}

/// Runs every replication and aggregates them.
///
/// A failed replication fails the experiment; the error names the lowest
/// failing replication index.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    run_experiment_inner(config, None)
}

fn run_experiment_inner(config: &ExperimentConfig, sample_dir: Option<&Path>) -> Result<ExperimentRecord> {
    config.validate()?;
    let started = Instant::now();
    let truth = true_rank_probabilities(&config.params)?;
    let pool = worker_pool(config.workers)?;
    let outcomes: Vec<Result<ReplicationResult>> = pool.install(|| {
        (1..=config.omega as u64)
            .into_par_iter()
            .map(|rep| {
                let (result, samples) = run_replication(config, &truth, rep)?;
                if let Some(dir) = sample_dir {
                    let path = dir.join(format!("rep_{rep:06}.csv"));
                    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    samples
                        .write_csv(BufWriter::new(file), config.chain.thin)
                        .map_err(|e| Error::io(&path, e))?;
                }
                Ok(result)
            })
            .collect()
    });
    let mut replications = Vec::with_capacity(config.omega);
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => replications.push(r),
            Err(source) => {
                return Err(Error::Replication {
                    rep: i as u64 + 1,
                    source: Box::new(source),
                })
            }
        }
    }
    let aggregate = aggregate(&replications, &truth, &config.params)?;
    Ok(ExperimentRecord {
        config: config.clone(),
        geometry: config.network.geometry(),
        truth,
        replications,
        aggregate,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs an experiment and writes its outputs under `out_dir/<name>/`.
pub fn run_experiment_to(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentRecord> {
    config.validate()?;
    let dir = out_dir.join(&config.name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let sample_dir = if config.dump_samples {
        let s = dir.join("samples");
        fs::create_dir_all(&s).map_err(|e| Error::io(&s, e))?;
        Some(s)
    } else {
        None
    };
    let record = run_experiment_inner(config, sample_dir.as_deref())?;
    write_record(&record, &dir)?;
    Ok(record)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `rep,d_hat_T1T2..,tau_hat,P_hat_T{a}_r{r}..,dP_T{a}_r{r}..,sucra_T{a}..`
pub fn replications_csv(record: &ExperimentRecord) -> String {
    let n = record.config.network.n_treatments();
    let mut out = String::from("rep");
    for a in 2..=n {
        write!(out, ",d_hat_T1T{a}").unwrap();
    }
    out.push_str(",tau_hat");
    for prefix in ["P_hat", "dP"] {
        for a in 1..=n {
            for r in 1..=n {
                write!(out, ",{prefix}_T{a}_r{r}").unwrap();
            }
        }
    }
    for a in 1..=n {
        write!(out, ",sucra_T{a}").unwrap();
    }
    out.push('\n');
    for rep in &record.replications {
        write!(out, "{}", rep.rep).unwrap();
        let values = rep
            .d_hat
            .iter()
            .chain(std::iter::once(&rep.tau_hat))
            .chain(rep.p_hat.p.iter().flatten())
            .chain(rep.delta_p.iter().flatten())
            .chain(&rep.sucra_hat);
        for &x in values {
            out.push(',');
            out.push_str(&fmt_float(x));
        }
        out.push('\n');
    }
    out
}

/// Per-treatment table: degree, bias and SD of effects, SUCRA bias, and the
/// mean rank-probability bias with its standard error for every rank.
pub fn treatments_csv(record: &ExperimentRecord) -> String {
    let agg = &record.aggregate;
    let n = agg.n_treatments();
    let mut out = String::from("treatment,degree,mean_bias_d,sd_d,mean_delta_sucra");
    for r in 1..=n {
        write!(out, ",mean_dP_r{r}").unwrap();
    }
    for r in 1..=n {
        write!(out, ",se_dP_r{r}").unwrap();
    }
    out.push('\n');
    for (a, t) in agg.treatments.iter().enumerate() {
        write!(out, "T{},{}", a + 1, record.geometry.degrees[a]).unwrap();
        for x in [t.mean_bias_d, t.sd_d, t.mean_delta_sucra] {
            out.push(',');
            out.push_str(&fmt_float(x));
        }
        for r in 0..n {
            out.push(',');
            out.push_str(&fmt_float(agg.mean_delta_p[a][r]));
        }
        for r in 0..n {
            out.push(',');
            out.push_str(&fmt_float(agg.delta_p_standard_error(a, r)));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct AggregateFile<'a> {
    name: &'a str,
    n_trials: usize,
    geometry: &'a GeometrySummary,
    params: &'a ModelParams,
    dgm: DgmKind,
    truth: &'a TruthSummary,
    aggregate: &'a AggregateReport,
    normalisation: &'static str,
}

/// Writes `replications.csv`, `treatments.csv`, `aggregate.json` and the
/// full `record.json` into `dir`.
pub fn write_record(record: &ExperimentRecord, dir: &Path) -> Result<()> {
    write_file(&dir.join("replications.csv"), &replications_csv(record))?;
    write_file(&dir.join("treatments.csv"), &treatments_csv(record))?;
    let summary = AggregateFile {
        name: &record.config.name,
        n_trials: record.config.network.n_trials(),
        geometry: &record.geometry,
        params: &record.config.params,
        dgm: record.config.dgm,
        truth: &record.truth,
        aggregate: &record.aggregate,
        normalisation: NORMALISATION_NOTE,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::json("aggregate", e))?;
    write_file(&dir.join("aggregate.json"), &(json + "\n"))?;
    let json = serde_json::to_string_pretty(record).map_err(|e| Error::json("record", e))?;
    write_file(&dir.join("record.json"), &(json + "\n"))
}

pub fn read_record(path: &Path) -> Result<ExperimentRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

/// `suite.csv` contents for a set of finished experiments.
pub fn suite_csv<'a>(records: impl IntoIterator<Item = &'a ExperimentRecord>) -> String {
    let mut out = format!("{SUITE_HEADER}\n");
    for r in records {
        out.push_str(&r.suite_row());
        out.push('\n');
    }
    out
}

/// Outcome of a suite: finished experiments in input order plus failures.
#[derive(Debug)]
pub struct SuiteOutcome {
    pub records: Vec<ExperimentRecord>,
    pub failures: Vec<(String, Error)>,
}

/// Rejects an empty suite or repeated experiment names.
pub fn check_suite(configs: &[ExperimentConfig]) -> Result<()> {
    if configs.is_empty() {
        return Err(Error::EmptySuite);
    }
    let mut seen = HashSet::new();
    for c in configs {
        if !seen.insert(c.name.as_str()) {
            return Err(Error::DuplicateName(c.name.clone()));
        }
    }
    Ok(())
}

/// Runs every experiment, writing each under `out_dir/<name>/` and the
/// combined table to `out_dir/suite.csv`. Failed experiments are listed in
/// `out_dir/failures.csv` and do not stop the suite.
pub fn run_suite(configs: &[ExperimentConfig], out_dir: &Path) -> Result<SuiteOutcome> {
    check_suite(configs)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for config in configs {
        match run_experiment_to(config, out_dir) {
            Ok(r) => records.push(r),
            Err(e) => failures.push((config.name.clone(), e)),
        }
    }
    write_file(&out_dir.join("suite.csv"), &suite_csv(&records))?;
    let failure_path = out_dir.join("failures.csv");
    if failures.is_empty() {
        if failure_path.exists() {
            fs::remove_file(&failure_path).map_err(|e| Error::io(&failure_path, e))?;
        }
    } else {
        let file = fs::File::create(&failure_path).map_err(|e| Error::io(&failure_path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(&failure_path, e);
        writeln!(w, "network_id,error").map_err(io)?;
        for (name, e) in &failures {
            writeln!(w, "{name},\"{}\"", e.to_string().replace('"', "\"\"")).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    Ok(SuiteOutcome { records, failures })
}

/// Loads every `*.json` config in `dir`, in file-name order.
pub fn load_suite_dir(dir: &Path, seed_override: Option<u64>) -> Result<Vec<ExperimentConfig>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| ExperimentConfig::from_path(p, seed_override))
        .collect()
}
