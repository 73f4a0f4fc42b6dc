//! Batch front end: synthetic data generation, experiment execution,
//! cost-versus-MSE benchmark sweeps, and chain diagnostics exports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mvpmcmc::error::{Error, Result};
use mvpmcmc::harness::benchmark::{benchmark_cost_mse, running_mean, BenchmarkConfig};
use mvpmcmc::harness::config::ExperimentConfig;
use mvpmcmc::harness::experiment::{generate_data, run_experiment};
use mvpmcmc::harness::output::{fmt_f64, write_csv, write_json};
use mvpmcmc::models::build_model;
use mvpmcmc::rng::StreamKey;

#[derive(Parser)]
#[command(name = "mvpmcmc", version, about = "Particle MCMC for partially observed McKean-Vlasov SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize observations and latent truth from a model configuration.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the configured PMCMC or MLPMCMC experiment.
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep accuracy budgets and fit cost-versus-MSE slopes.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Export running-mean and acceptance diagnostics for a finished run.
    Diagnose {
        /// Directory holding trace CSVs from a previous `run`.
        #[arg(long)]
        run_dir: PathBuf,
        /// Output directory (defaults to the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Samples to drop before computing summary statistics.
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
    },
}

fn init_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        // Ignore failure: the global pool can only be built once (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load_experiment_config(common: &CommonArgs, validate: bool) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&common.config)?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", common.config.display())))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if validate {
        cfg.validate()?;
    }
    Ok(cfg)
}

fn cmd_simulate(common: &CommonArgs) -> Result<()> {
    let cfg = load_experiment_config(common, false)?;
    let entry = build_model(&cfg.model, &cfg.overrides)?;
    let theta = match &cfg.theta_true {
        Some(v) => mvpmcmc::model::ParamVector::new(v.clone()),
        None => entry.theta_true.clone(),
    };
    let key = StreamKey::root(cfg.seed).derive("data", 0);
    let generated = generate_data(
        entry.model.as_ref(),
        &theta,
        cfg.horizon,
        cfg.sim_level,
        cfg.sim_cloud,
        &key,
    )?;
    std::fs::create_dir_all(&common.out)?;
    write_series(&common.out, "data.csv", "y", &generated.dataset.observations)?;
    write_series(&common.out, "latent.csv", "x", &generated.latent)?;
    eprintln!(
        "wrote {} observations to {}",
        generated.dataset.observations.len(),
        common.out.display()
    );
    Ok(())
}

fn write_series(dir: &Path, file: &str, prefix: &str, rows: &[Vec<f64>]) -> Result<()> {
    let dim = rows.first().map(|r| r.len()).unwrap_or(0);
    let header_owned: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=dim).map(|i| format!("{prefix}{i}")))
        .collect();
    let header: Vec<&str> = header_owned.iter().map(|s| s.as_str()).collect();
    let cells: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(t, r)| {
            std::iter::once((t + 1).to_string())
                .chain(r.iter().map(|v| fmt_f64(*v)))
                .collect()
        })
        .collect();
    write_csv(&dir.join(file), &header, &cells)
}

fn cmd_run(common: &CommonArgs) -> Result<()> {
    let cfg = load_experiment_config(common, true)?;
    let run = run_experiment(&cfg, &common.out)?;
    for (name, value) in &run.estimates {
        eprintln!("{name}: {}", fmt_f64(*value));
    }
    eprintln!("cost: {}", fmt_f64(run.cost));
    Ok(())
}

fn cmd_benchmark(common: &CommonArgs) -> Result<()> {
    let text = std::fs::read_to_string(&common.config)?;
    let mut cfg: BenchmarkConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", common.config.display())))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let result = benchmark_cost_mse(&cfg, Some(&common.out))?;
    eprintln!(
        "mlpmcmc slope {:.3} (r2 {:.3}); pmcmc slope {:.3} (r2 {:.3})",
        result.ml_fit.slope, result.ml_fit.r_squared, result.sl_fit.slope, result.sl_fit.r_squared
    );
    Ok(())
}

fn cmd_diagnose(run_dir: &Path, out: Option<&Path>, burn_in: usize) -> Result<()> {
    let out_dir = out.unwrap_or(run_dir);
    std::fs::create_dir_all(out_dir)?;
    let mut traces: Vec<PathBuf> = std::fs::read_dir(run_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("trace") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    traces.sort();
    if traces.is_empty() {
        return Err(Error::Config(format!(
            "no trace CSVs found in {}",
            run_dir.display()
        )));
    }
    let mut report = serde_json::Map::new();
    for trace in &traces {
        let stem = trace.file_stem().unwrap().to_string_lossy().into_owned();
        let (columns, rows) = read_trace(trace)?;
        let kept: Vec<&Vec<f64>> = rows.iter().skip(burn_in.min(rows.len())).collect();
        if kept.is_empty() {
            return Err(Error::Config(format!(
                "{}: burn_in {burn_in} leaves no samples",
                trace.display()
            )));
        }
        // parameter columns sit between `iter` and `log_lik`
        let last_param = columns.len() - 2;
        let mut chain = serde_json::Map::new();
        let mut rm_header = vec!["iter".to_string()];
        let mut rm_columns: Vec<Vec<f64>> = Vec::new();
        for c in 1..last_param {
            let series: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            rm_header.push(columns[c].clone());
            rm_columns.push(running_mean(&series));
            let kept_series: Vec<f64> = kept.iter().map(|r| r[c]).collect();
            let mean = kept_series.iter().sum::<f64>() / kept_series.len() as f64;
            let var = kept_series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / kept_series.len() as f64;
            chain.insert(
                columns[c].clone(),
                serde_json::json!({ "mean": mean, "sd": var.sqrt() }),
            );
        }
        let accepted = kept.iter().skip(1).filter(|r| r[columns.len() - 1] != 0.0).count();
        let denom = kept.len().saturating_sub(1).max(1);
        chain.insert(
            "acceptance_rate".into(),
            serde_json::json!(accepted as f64 / denom as f64),
        );
        chain.insert("samples".into(), serde_json::json!(rows.len()));
        report.insert(stem.clone(), serde_json::Value::Object(chain));

        let header: Vec<&str> = rm_header.iter().map(|s| s.as_str()).collect();
        let cells: Vec<Vec<String>> = (0..rows.len())
            .map(|k| {
                std::iter::once(k.to_string())
                    .chain(rm_columns.iter().map(|col| fmt_f64(col[k])))
                    .collect()
            })
            .collect();
        write_csv(&out_dir.join(format!("running_mean_{stem}.csv")), &header, &cells)?;
    }
    write_json(
        &out_dir.join("diagnostics.json"),
        &serde_json::Value::Object(report),
    )?;
    eprintln!("diagnostics for {} chain(s) written to {}", traces.len(), out_dir.display());
    Ok(())
}

fn read_trace(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty file", path.display())))?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("{}: row {}: {e}", path.display(), i + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Config(format!(
                "{}: row {} has {} cells, header has {}",
                path.display(),
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { common } => {
            init_workers(common.workers);
            cmd_simulate(common)
        }
        Command::Run { common } => {
            init_workers(common.workers);
            cmd_run(common)
        }
        Command::Benchmark { common } => {
            init_workers(common.workers);
            cmd_benchmark(common)
        }
        Command::Diagnose { run_dir, out, burn_in } => {
            cmd_diagnose(run_dir, out.as_deref(), *burn_in)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({
                "error": e.to_string(),
                "exit_code": e.exit_code(),
            });
            eprintln!("{record}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
