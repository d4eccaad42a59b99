use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use datos::config::ExperimentConfig;
use datos::engine::{run, RunTrace};
use datos::metrics::series_to_csv_string;
use datos::refsolver::cached_reference;
use datos::validate;

#[derive(Parser)]
#[command(name = "datos", about = "Decentralized adaptive splitting experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override for solver initialization.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configured run and emit trace + plot CSVs.
    Run { config: PathBuf },
    /// Run every listed algorithm on the shared problem and merge the traces.
    Compare { config: PathBuf },
    /// Fast invariant suite; nonzero exit on any failing group.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config, &cli),
        Command::Compare { config } => cmd_compare(config, &cli),
        Command::Validate => cmd_validate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: &Path, cli: &Cli) -> Result<(ExperimentConfig, PathBuf), String> {
    let mut cfg = ExperimentConfig::from_file(path).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        cfg.set("solver.seed", seed);
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).map_err(|e| e.to_string())?;
    Ok((cfg, out))
}

fn execute(
    cfg: &ExperimentConfig,
    out: &Path,
    algo: datos::engine::Algorithm,
) -> Result<RunTrace, String> {
    let prob = cfg.build_problem().map_err(|e| e.to_string())?;
    let (_, w) = cfg.build_graph().map_err(|e| e.to_string())?;
    let solver = cfg.build_solver().map_err(|e| e.to_string())?;
    let reference = cached_reference(
        &out.join("refcache"),
        &cfg.problem_cache_key(),
        &prob,
        cfg.reference_tol().map_err(|e| e.to_string())?,
        cfg.reference_max_iter().map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?
    .reference_point();
    let mut trace =
        run(&prob, &w, algo, &solver, Some(&reference)).map_err(|e| e.to_string())?;
    trace.config_echo = cfg.echo_lines();
    Ok(trace)
}

fn write_plot_csvs(trace: &RunTrace, out: &Path, prefix: &str) -> Result<(), String> {
    let gap: Vec<(usize, f64)> =
        trace.rows.iter().filter_map(|r| r.gap_surrogate.map(|v| (r.k, v))).collect();
    let cons: Vec<(usize, f64)> =
        trace.rows.iter().filter_map(|r| r.consensus_err.map(|v| (r.k, v))).collect();
    let alpha: Vec<(usize, f64)> = trace.rows.iter().map(|r| (r.k, r.alpha_min)).collect();
    for (name, series) in [("gap", gap), ("consensus", cons), ("alpha", alpha)] {
        fs::write(out.join(format!("{prefix}{name}.csv")), series_to_csv_string(&series))
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn cmd_run(config: &Path, cli: &Cli) -> Result<(), String> {
    let (cfg, out) = load_config(config, cli)?;
    let trace = execute(&cfg, &out, cfg.algorithm().map_err(|e| e.to_string())?)?;
    fs::write(out.join("trace.csv"), trace.to_csv_string()).map_err(|e| e.to_string())?;
    write_plot_csvs(&trace, &out, "")?;
    let last = trace.rows.last().expect("trace always has the initial row");
    println!(
        "final gap {}; rounds {}; messages vec={} scalar={} broadcast={}",
        last.gap_surrogate.map(|g| format!("{g:.3e}")).unwrap_or_else(|| "n/a".into()),
        last.k,
        trace.ledger.vector_msgs,
        trace.ledger.scalar_msgs,
        trace.ledger.broadcast_msgs
    );
    Ok(())
}

fn cmd_compare(config: &Path, cli: &Cli) -> Result<(), String> {
    let (cfg, out) = load_config(config, cli)?;
    let algos = cfg.compare_algorithms().map_err(|e| e.to_string())?;
    let mut traces = Vec::new();
    for (name, algo) in &algos {
        let trace = execute(&cfg, &out, *algo)?;
        fs::write(out.join(format!("trace_{name}.csv")), trace.to_csv_string())
            .map_err(|e| e.to_string())?;
        traces.push((name.clone(), trace));
    }

    let rows = traces.iter().map(|(_, t)| t.rows.len()).max().unwrap_or(0);
    let mut merged = String::from("k");
    for (name, _) in &traces {
        merged.push_str(&format!(",{name}_gap,{name}_consensus"));
    }
    merged.push('\n');
    for k in 0..rows {
        merged.push_str(&k.to_string());
        for (_, t) in &traces {
            match t.rows.get(k) {
                Some(r) => {
                    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.17e}")).unwrap_or_default();
                    merged.push_str(&format!(",{},{}", fmt(r.gap_surrogate), fmt(r.consensus_err)));
                }
                None => merged.push_str(",,"),
            }
        }
        merged.push('\n');
    }
    fs::write(out.join("compare.csv"), merged).map_err(|e| e.to_string())?;
    for (name, trace) in &traces {
        let last = trace.rows.last().unwrap();
        println!(
            "{name}: final gap {} after {} rounds",
            last.gap_surrogate.map(|g| format!("{g:.3e}")).unwrap_or_else(|| "n/a".into()),
            last.k
        );
    }
    Ok(())
}

fn cmd_validate() -> Result<(), String> {
    let report = validate::run_all();
    for (name, result) in &report.groups {
        match result {
            Ok(()) => println!("{name}: pass"),
            Err(msg) => println!("{name}: FAIL ({msg})"),
        }
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err("validation failed".into())
    }
}
