use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nma_forge::harness::{self, fmt_float, ExperimentRecord};
use nma_forge::planner::{self, Allocation};
use nma_forge::{Error, EvidenceNetwork, ExperimentConfig, GeometrySummary, Result};

/// Bayesian network meta-analysis simulation engine.
#[derive(Parser)]
#[command(name = "nma-forge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum AllocationArg {
    Single,
    AnySplit,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, env = "NMA_FORGE_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print comparison counts, degrees and irregularity of a network.
    Geometry {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run one experiment.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every `*.json` config in a directory and write `suite.csv`.
    Suite {
        #[arg(long)]
        configs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Rank candidate additions of two-arm trials by resulting irregularity.
    Plan {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        budget: u32,
        #[arg(long, value_enum, default_value = "single")]
        allocation: AllocationArg,
        /// Participants per arm in the new trials.
        #[arg(long, default_value_t = 25)]
        n_per_arm: u32,
        /// Candidates to list (all if omitted) and, with --simulate, to simulate.
        #[arg(long)]
        top: Option<usize>,
        /// Simulate the current network and the top candidates.
        #[arg(long, requires = "config")]
        simulate: bool,
        /// Experiment config for --simulate; its network is replaced by --network.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for plan tables and simulation outputs.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Summarise finished experiments found under a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Geometry { network, format } => {
            let net = EvidenceNetwork::from_path(&network)?;
            print!("{}", geometry_report(&net.geometry(), format));
            Ok(())
        }
        Command::Simulate { config, out, run } => {
            let mut config = ExperimentConfig::from_path(&config, run.seed)?;
            apply_workers(&mut config, run.workers)?;
            let record = harness::run_experiment_to(&config, &out)?;
            write_out(&out.join("suite.csv"), &harness::suite_csv([&record]))?;
            println!("{}", record.summary_line());
            Ok(())
        }
        Command::Suite { configs, out, run } => {
            let mut configs = harness::load_suite_dir(&configs, run.seed)?;
            for c in &mut configs {
                apply_workers(c, run.workers)?;
            }
            let outcome = harness::run_suite(&configs, &out)?;
            for r in &outcome.records {
                println!("{}", r.summary_line());
            }
            for (name, e) in &outcome.failures {
                eprintln!("{name}: failed: {e}");
            }
            match outcome.failures.into_iter().next() {
                None => Ok(()),
                Some((_, e)) => Err(e),
            }
        }
        Command::Plan {
            network,
            budget,
            allocation,
            n_per_arm,
            top,
            simulate,
            config,
            out,
            format,
            run,
        } => {
            let net = EvidenceNetwork::from_path(&network)?;
            let allocation = match allocation {
                AllocationArg::Single => Allocation::Single,
                AllocationArg::AnySplit => Allocation::AnySplit,
            };
            let mut plans = planner::enumerate_plans(&net, budget, allocation)?;
            if let Some(k) = top {
                plans.truncate(k);
            }
            let csv = planner::plans_csv(&plans);
            match format {
                Format::Text => print!("{}", planner::plans_table(&plans)),
                Format::Csv => print!("{csv}"),
            }
            if let Some(dir) = &out {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                write_out(&dir.join("plans.csv"), &csv)?;
            }
            if simulate {
                let path = config.expect("clap enforces --config with --simulate");
                let mut base = ExperimentConfig::from_path(&path, run.seed)?;
                base.network = net;
                base.validate()?;
                apply_workers(&mut base, run.workers)?;
                let shortlist = &plans[..plans.len().min(top.unwrap_or(3))];
                let eval = planner::evaluate_plans(shortlist, &base, n_per_arm)?;
                println!();
                match format {
                    Format::Text => print!("{}", eval.table()),
                    Format::Csv => print!("{}", eval.csv()),
                }
                if let Some(dir) = &out {
                    write_out(&dir.join("plan_comparison.csv"), &eval.csv())?;
                    for r in &eval.records {
                        let d = dir.join(r.name());
                        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
                        harness::write_record(r, &d)?;
                    }
                }
            }
            Ok(())
        }
        Command::Report { input, format } => {
            let records = find_records(&input)?;
            if records.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "no record.json found under {}",
                    input.display()
                )));
            }
            match format {
                Format::Csv => print!("{}", harness::suite_csv(&records)),
                Format::Text => {
                    for r in &records {
                        println!("{}", r.summary_line());
                    }
                }
            }
            Ok(())
        }
    }
}

fn apply_workers(config: &mut ExperimentConfig, workers: Option<usize>) -> Result<()> {
    if workers == Some(0) {
        return Err(Error::InvalidConfig("--workers must be at least 1".into()));
    }
    if workers.is_some() {
        config.workers = workers;
    }
    Ok(())
}

fn write_out(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn find_records(dir: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path().join("record.json")))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths.iter().map(|p| harness::read_record(p)).collect()
}

fn pair_names(n: usize) -> Vec<String> {
    nma_forge::network::treatment_pairs(n)
        .into_iter()
        .map(|(a, b)| format!("{a}{b}"))
        .collect()
}

fn geometry_report(g: &GeometrySummary, format: Format) -> String {
    let n = g.n_treatments();
    let counts = g.pair_counts();
    let join = |xs: Vec<String>| xs.join(", ");
    match format {
        Format::Text => {
            let mut out = String::new();
            writeln!(out, "K ({}) = ({})", join(pair_names(n)), join(counts.iter().map(u32::to_string).collect())).unwrap();
            writeln!(out, "degrees = ({})", join(g.degrees.iter().map(u64::to_string).collect())).unwrap();
            writeln!(out, "k_hat = {:.2}", g.mean_degree).unwrap();
            writeln!(out, "h2 = {:.2}", g.irregularity).unwrap();
            writeln!(out, "h2/k2 = {:.2}", g.normalised_irregularity).unwrap();
            out
        }
        Format::Csv => {
            // Columns in sorted key order.
            let mut cols: Vec<(String, String)> = pair_names(n)
                .into_iter()
                .zip(&counts)
                .map(|(p, c)| (format!("K_{p}"), c.to_string()))
                .collect();
            cols.extend(g.degrees.iter().enumerate().map(|(a, k)| (format!("degree_T{}", a + 1), k.to_string())));
            cols.push(("h2".into(), fmt_float(g.irregularity)));
            cols.push(("h2_over_k2".into(), fmt_float(g.normalised_irregularity)));
            cols.push(("k_hat".into(), fmt_float(g.mean_degree)));
            cols.sort_by(|a, b| a.0.cmp(&b.0));
            let (keys, values): (Vec<String>, Vec<String>) = cols.into_iter().unzip();
            format!("{}\n{}\n", keys.join(","), values.join(","))
        }
    }
}
