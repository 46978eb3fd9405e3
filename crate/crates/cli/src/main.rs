use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tabgfm::pipeline::{self, MetricsReport, PipelineError, RunConfig, SynthParams};
use tabgfm::selftest::{self, Fixtures};
use tabgfm::tabular::protocol::echo_response;

#[derive(Parser)]
#[command(name = "tabgfm", version, about = "Zero-shot node classification by tabular label inpainting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline for every configured seed.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run once per table count, sharing encodings.
    SweepB {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated table counts.
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<usize>,
    },
    /// Write a stochastic-block-model dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        blocks: usize,
        #[arg(long, default_value_t = 400)]
        nodes: usize,
        #[arg(long, default_value_t = 0.1)]
        p_in: f64,
        #[arg(long, default_value_t = 0.01)]
        p_out: f64,
        /// Class mean offset in units of the noise level.
        #[arg(long, default_value_t = 2.0)]
        shift: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, default_value_t = 16)]
        features: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump the node table of the first configured seed.
    Encode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the oracle suites and print a summary table.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Deterministic echo learner on stdin/stdout, for protocol testing.
    #[command(hide = true)]
    EchoBridge {
        /// Buffer this many requests and answer them in reverse order.
        #[arg(long, default_value_t = 1)]
        reorder: usize,
    },
}

fn print_summary(r: &MetricsReport) {
    for s in &r.seeds {
        println!("seed {:>3}  accuracy {:.4}  predictors {}", s.seed, s.test_accuracy, s.predictors.len());
    }
    println!("B={}  mean {:.4}  std {:.4}  se {:.4}", r.num_tables, r.mean, r.std, r.std_err);
    for k in &r.skipped {
        println!("skipped seed {} {}: {}", k.seed, k.id, k.error);
    }
    for n in &r.notices {
        println!("notice seed {} [{}]: {}", n.seed, n.notice.source, n.notice.message);
    }
}

fn sweep_path(output: &Path, b: usize) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    output.with_file_name(format!("{stem}_b{b}.json"))
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Run { config } => {
            let cfg = RunConfig::from_file(&config)?;
            print_summary(&pipeline::run(&cfg)?);
        }
        Command::SweepB { config, b } => {
            let cfg = RunConfig::from_file(&config)?;
            for report in pipeline::sweep_b(&cfg, &b)? {
                if let Some(out) = &cfg.output {
                    report.write(&sweep_path(out, report.num_tables))?;
                }
                print_summary(&report);
            }
        }
        Command::Synth { out, blocks, nodes, p_in, p_out, shift, noise, features, seed } => {
            let params = SynthParams { blocks, nodes, p_in, p_out, shift, noise, features, seed, ..Default::default() };
            let data = pipeline::write_synthetic(&params, &out)?;
            println!(
                "wrote {} nodes, {} edges, {} splits to {}",
                data.graph.num_nodes(),
                data.graph.num_edges(),
                data.splits.len(),
                out.display()
            );
        }
        Command::Encode { config, out } => {
            let cfg = RunConfig::from_file(&config)?;
            let table = pipeline::encode_table(&cfg, &out)?;
            println!("wrote {}x{} table to {}", table.z.nrows(), table.width(), out.display());
        }
        Command::Selftest { seed } => {
            let reports = selftest::run_suites(&Fixtures::default(), seed);
            print!("{}", selftest::format_table(&reports));
            let failed = reports.iter().filter(|r| !r.passed()).count();
            if failed > 0 {
                return Err(PipelineError::SelftestFailed(failed));
            }
        }
        Command::EchoBridge { reorder } => {
            let stdin = std::io::stdin();
            let mut stdout = std::io::stdout().lock();
            let mut pending = Vec::new();
            for line in stdin.lock().lines() {
                let line = line.map_err(|source| PipelineError::Io { path: "<stdin>".into(), source })?;
                if line.trim().is_empty() {
                    continue;
                }
                pending.push(echo_response(&line));
                if pending.len() >= reorder.max(1) {
                    while let Some(reply) = pending.pop() {
                        writeln!(stdout, "{reply}")
                            .and_then(|()| stdout.flush())
                            .map_err(|source| PipelineError::Io { path: "<stdout>".into(), source })?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}
