use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptive_meta::bruteforce::{
    check_adaptive_monotonicity, check_adaptive_submodularity, remark2_meta, Guard, MetaTask, PropertyReport,
};
use adaptive_meta::harness::{run_experiment, ExperimentConfig};
use adaptive_meta::ic::{gen_graph, GraphKind};
use adaptive_meta::verify::{verify_ratios, Regime};
use adaptive_meta::{Error, Instance};
use clap::{Parser, Subcommand};
use serde_json::json;

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "adaptive-meta", version, about = "Adaptive submodular meta-learning experiments and oracles")]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "ADAPTIVE_META_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a JSON config and write the results as CSV.
    RunExperiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write per-algorithm plot series as JSON.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Record zero wall time so the CSV is reproducible byte for byte.
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        json: bool,
    },
    /// Check an approximation bound against the exact optimum on random tiny instances.
    VerifyRatios {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        regime: Regime,
        #[arg(long)]
        json: bool,
    },
    /// Check adaptive submodularity and monotonicity of a small instance.
    CheckSubmodularity {
        #[arg(required_unless_present = "remark2", conflicts_with = "remark2")]
        path: Option<PathBuf>,
        /// Use the built-in two-task instance whose average is not adaptive submodular.
        #[arg(long)]
        remark2: bool,
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic directed graph as an edge list.
    GenGraph {
        #[arg(long)]
        kind: GraphKind,
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        edges: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::TestLeak(_) => EXIT_FAILED,
                _ => EXIT_USAGE,
            })
        }
    }
}

/// Returns whether every check passed.
fn dispatch(command: Command) -> adaptive_meta::Result<bool> {
    match command {
        Command::RunExperiment { config, output, plot, no_timing, json } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if no_timing {
                cfg.record_wall_time = false;
            }
            let table = run_experiment(&cfg)?;
            let mut out = BufWriter::new(File::create(&output)?);
            table.emit_csv(&mut out)?;
            out.flush()?;
            if let Some(p) = plot {
                let mut w = BufWriter::new(File::create(p)?);
                table.emit_plot_data(&mut w)?;
                w.flush()?;
            }
            let summary = table.summarize();
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                println!("{:<15} {:>3} {:>3} {:>5} {:>12} {:>10}", "algorithm", "l", "k", "reps", "mean", "stderr");
                for s in &summary {
                    println!(
                        "{:<15} {:>3} {:>3} {:>5} {:>12.4} {:>10.4}",
                        s.algorithm.name(),
                        s.l,
                        s.k,
                        s.repetitions,
                        s.mean,
                        s.stderr
                    );
                }
                println!("wrote {} rows to {}", table.rows.len(), output.display());
            }
            Ok(true)
        }
        Command::VerifyRatios { count, seed, regime, json } => {
            let report = verify_ratios(count, seed, regime)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("regime {regime}: {count} instances, seed {seed}");
                println!("min ratio  {:.6}", report.min_ratio);
                println!("mean ratio {:.6}", report.mean_ratio);
                println!("min bound  {:.6}", report.min_bound);
                println!("violations {}", report.violations.len());
                for v in &report.violations {
                    println!(
                        "  instance {} (n={}, m={}, l={}, k={}): value {:.6} < {:.6} x optimum {:.6}",
                        v.instance, v.n, v.m, v.l, v.k, v.value, v.bound, v.optimum
                    );
                }
            }
            Ok(report.holds)
        }
        Command::CheckSubmodularity { path, remark2, json } => {
            let guard = Guard::default();
            let (reports, ok) = if remark2 {
                let meta = remark2_meta::<f64>();
                (vec![("average".to_string(), property_pair(&meta, &guard)?)], true)
            } else {
                check_file(path.as_deref().expect("clap requires a path"), &guard)?
            };
            if json {
                let obj: serde_json::Map<_, _> = reports
                    .iter()
                    .map(|(name, (sub, mono))| (name.clone(), json!({ "submodularity": sub, "monotonicity": mono })))
                    .collect();
                println!("{}", serde_json::to_string_pretty(&obj)?);
            } else {
                for (name, (sub, mono)) in &reports {
                    print_report(name, sub);
                    print_report(name, mono);
                }
            }
            Ok(ok)
        }
        Command::GenGraph { kind, nodes, edges, seed, output } => {
            let graph = gen_graph(kind, nodes, edges, seed)?;
            graph.write_edge_list(&output)?;
            println!("wrote {} nodes, {} edges to {}", graph.node_count(), graph.edge_count(), output.display());
            Ok(true)
        }
    }
}

type Pair = (PropertyReport, PropertyReport);

fn property_pair<T: adaptive_meta::model::Task<f64>>(task: &T, guard: &Guard) -> adaptive_meta::Result<Pair>
where
    T::State: serde::Serialize,
{
    Ok((check_adaptive_submodularity(task, guard)?, check_adaptive_monotonicity(task, guard)?))
}

/// Checks every task, and their average when there are several. Fails only
/// when a task declares a property it does not have.
fn check_file(path: &Path, guard: &Guard) -> adaptive_meta::Result<(Vec<(String, Pair)>, bool)> {
    let inst = Instance::load(path)?;
    let mut reports = Vec::new();
    let mut ok = true;
    for (i, task) in inst.tasks.iter().enumerate() {
        let pair = property_pair(task, guard)?;
        let flags = adaptive_meta::model::Task::flags(task);
        ok &= (!flags.adaptive_submodular || pair.0.holds) && (!flags.adaptive_monotone || pair.1.holds);
        reports.push((format!("task {i}"), pair));
    }
    if inst.tasks.len() > 1 {
        let meta = MetaTask::new(inst.tasks.clone())?;
        reports.push(("average".to_string(), property_pair(&meta, guard)?));
    }
    Ok((reports, ok))
}

fn print_report(name: &str, r: &PropertyReport) {
    let verdict = if r.holds { "holds" } else { "violated" };
    println!("{name}: {} {verdict} ({} comparisons)", r.property, r.checked);
    for v in r.violations.iter().take(5) {
        let psi = serde_json::to_string(&v.psi).unwrap_or_default();
        match &v.psi_prime {
            Some(p) => {
                let p = serde_json::to_string(p).unwrap_or_default();
                println!("  item {}: {} at psi={psi}, {} at psi'={p}", v.item.0, v.before, v.after);
            }
            None => println!("  item {}: {} at psi={psi}", v.item.0, v.before),
        }
    }
    if r.violations.len() > 5 {
        println!("  ... {} more", r.violations.len() - 5);
    }
}
