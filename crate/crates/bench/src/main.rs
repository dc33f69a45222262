use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pdsds_core::distributed::AgentGraph;
use pdsds_bench::config::{ExperimentConfig, ScheduleSpec, SolverKind};
use pdsds_bench::experiment::run_experiment;
use pdsds_bench::lasso::{gen_lasso, LassoFile, DEFAULT_LAMBDA_FACTOR};
use pdsds_bench::report::{read_runs_jsonl, render_table, summarize, write_outputs, RUNS_JSONL};
use pdsds_bench::BenchError;

#[derive(Parser)]
#[command(name = "pdsds-bench", version, about = "LASSO benchmarks for primal-dual splitting with dynamic stepsizes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a LASSO instance and write it as JSON.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_LAMBDA_FACTOR)]
        lambda_factor: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run a solver over seeds and tolerances.
    Run {
        /// Base configuration file; flags given here override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        solver: Option<SolverKind>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        batches: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        seed: Option<Vec<u64>>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        lambda_factor: Option<f64>,
        #[arg(long)]
        schedule_file: Option<PathBuf>,
        /// Edge list with 1-indexed node pairs.
        #[arg(long)]
        graph_file: Option<PathBuf>,
        #[arg(long)]
        trace_every: Option<usize>,
        /// Report 0 seconds so output files are reproducible byte for byte.
        #[arg(long)]
        no_timing: bool,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Summarize the runs stored in an output directory.
    Report {
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let schedule = e.downcast_ref::<BenchError>().is_some_and(BenchError::is_schedule);
            ExitCode::from(if schedule { 2 } else { 1 })
        }
    }
}

fn read(path: &PathBuf) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen {
            n,
            seed,
            lambda_factor,
            out_dir,
        } => {
            let inst = gen_lasso(n, lambda_factor, seed)?;
            fs::create_dir_all(&out_dir)?;
            let path = out_dir.join(format!("lasso_n{n}_seed{seed}.json"));
            serde_json::to_writer(fs::File::create(&path)?, &LassoFile::from(&inst))?;
            println!(
                "wrote {} (m = {}, n = {}, K = {}, lambda = {:.6e})",
                path.display(),
                inst.m(),
                inst.n(),
                inst.sparsity(),
                inst.lambda
            );
        }
        Command::Run {
            config,
            solver,
            n,
            batches,
            eps,
            seed,
            max_iters,
            lambda_factor,
            schedule_file,
            graph_file,
            trace_every,
            no_timing,
            out_dir,
        } => {
            let mut cfg = ExperimentConfig::default();
            if let Some(p) = &config {
                cfg.apply(&read(p)?)?;
            }
            if let Some(p) = &schedule_file {
                cfg.schedule = ScheduleSpec::parse(&read(p)?)?;
            }
            if let Some(p) = &graph_file {
                cfg.graph = Some(AgentGraph::parse_edge_list(&read(p)?).map_err(BenchError::from)?);
            }
            cfg.solver = solver.unwrap_or(cfg.solver);
            cfg.n = n.unwrap_or(cfg.n);
            cfg.batches = batches.unwrap_or(cfg.batches);
            cfg.eps = eps.unwrap_or(cfg.eps);
            cfg.seeds = seed.unwrap_or(cfg.seeds);
            cfg.max_iters = max_iters.unwrap_or(cfg.max_iters);
            cfg.lambda_factor = lambda_factor.unwrap_or(cfg.lambda_factor);
            cfg.trace_every = trace_every.unwrap_or(cfg.trace_every);
            cfg.timing &= !no_timing;

            let runs = run_experiment(&cfg)?;
            write_outputs(&out_dir, &runs)?;
            let reports: Vec<_> = runs.into_iter().map(|r| r.report).collect();
            print!("{}", render_table(&summarize(&reports)));
        }
        Command::Report { out_dir } => {
            let reports = read_runs_jsonl(&out_dir.join(RUNS_JSONL))?;
            print!("{}", render_table(&summarize(&reports)));
        }
    }
    Ok(())
}
