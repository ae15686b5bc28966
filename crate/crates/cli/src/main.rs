//! `deepesn`: layer-wise memory capacity of deep echo state networks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deepesn_core::experiment::io::{read_aggregates, unix_now};
use deepesn_core::experiment::plot::DEFAULT_FIG3_RHO;
use deepesn_core::experiment::{aggregate, run_sweep, SweepConfig, SweepOutput};
use deepesn_core::reservoir::init_deep_esn;
use deepesn_core::{emit_plots, emit_results, selftest, Error, OutputFormat, Result, RunManifest};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(
    name = "deepesn",
    version,
    about = "Memory capacity of deep echo state networks, layer by layer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep spectral radii and seeds; write tables, manifest and figures.
    Sweep(SweepArgs),
    /// Run one (rho, seed) realization and print per-layer MC.
    Run(RunArgs),
    /// Redraw fig2.svg and fig3.svg from an aggregates table.
    Plot(PlotArgs),
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Args, Debug, Default, Clone)]
struct Common {
    /// JSON file with a sweep configuration, or a run-manifest.json to replay.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory [default: results]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads [default: available cores]
    #[arg(long)]
    workers: Option<usize>,
    /// Spectral radius, or a comma-separated grid.
    #[arg(long, value_delimiter = ',', value_name = "RHO[,RHO...]")]
    rho: Option<Vec<f64>>,
    /// Number of network realizations per rho.
    #[arg(long)]
    seeds: Option<usize>,
    /// First realization seed; seeds are base_seed + i.
    #[arg(long)]
    base_seed: Option<u64>,
    /// Number of stacked layers.
    #[arg(long)]
    layers: Option<usize>,
    /// Units per layer.
    #[arg(long)]
    units: Option<usize>,
    /// Operator 2-norm of input and inter-layer matrices.
    #[arg(long)]
    coupling_norm: Option<f64>,
    /// Total time steps; train_len becomes steps - washout - test_len.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    washout: Option<usize>,
    #[arg(long)]
    test_len: Option<usize>,
    /// Largest delay measured.
    #[arg(long)]
    k_max: Option<usize>,
    /// Lower bound of the uniform input.
    #[arg(long, allow_hyphen_values = true)]
    input_low: Option<f64>,
    /// Upper bound of the uniform input.
    #[arg(long, allow_hyphen_values = true)]
    input_high: Option<f64>,
    /// Readout ridge penalty (0 = minimum-norm least squares).
    #[arg(long)]
    ridge: Option<f64>,
    /// Add a constant feature to the readouts.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    intercept: Option<bool>,
    /// Drive every realization with the input drawn from base_seed.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    shared_input: Option<bool>,
    /// Table format.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Spectral radius shown in fig3 [default: 0.9, else the closest grid value]
    #[arg(long)]
    fig3_rho: Option<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Network seed (same as --base-seed with one realization).
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the drawn network's checksums to this JSON file.
    #[arg(long, value_name = "FILE")]
    dump_network: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// aggregates.csv or aggregates.json
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Output directory [default: directory of --in]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FIG3_RHO)]
    fig3_rho: f64,
}

/// Keys a config file may add on top of a sweep configuration.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunnerKeys {
    workers: Option<usize>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
    fig3_rho: Option<f64>,
}

struct Effective {
    sweep: SweepConfig,
    workers: usize,
    out: PathBuf,
    format: OutputFormat,
    fig3_rho: Option<f64>,
}

fn load_config_file(path: &Path) -> Result<(SweepConfig, RunnerKeys)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let bad = |e: serde_json::Error| Error::Config(format!("{}: {e}", path.display()));
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    if value.get("config").is_some() && value.get("artifact").is_some() {
        let manifest: RunManifest = serde_json::from_value(value).map_err(bad)?;
        let keys = RunnerKeys {
            workers: Some(manifest.workers),
            ..Default::default()
        };
        return Ok((manifest.config, keys));
    }
    let mut keys = serde_json::Map::new();
    if let Some(obj) = value.as_object_mut() {
        for k in ["workers", "out", "format", "fig3_rho"] {
            if let Some(v) = obj.remove(k) {
                keys.insert(k.to_owned(), v);
            }
        }
    }
    let keys: RunnerKeys = serde_json::from_value(keys.into()).map_err(bad)?;
    let sweep: SweepConfig = serde_json::from_value(value).map_err(bad)?;
    Ok((sweep, keys))
}

fn effective(common: &Common) -> Result<Effective> {
    let (mut s, keys) = match &common.config {
        Some(path) => load_config_file(path)?,
        None => (SweepConfig::default(), RunnerKeys::default()),
    };
    if let Some(r) = &common.rho {
        s.rho_grid = r.clone();
    }
    if let Some(n) = common.seeds {
        s.n_realizations = n;
    }
    if let Some(b) = common.base_seed {
        s.base_seed = b;
    }
    if let Some(l) = common.layers {
        s.esn.n_layers = l;
    }
    if let Some(u) = common.units {
        s.esn.units_per_layer = u;
    }
    if let Some(c) = common.coupling_norm {
        s.esn.coupling_norm = c;
    }
    let p = &mut s.protocol;
    let resplit = common.steps.is_some() || common.washout.is_some() || common.test_len.is_some();
    p.total_steps = common.steps.unwrap_or(p.total_steps);
    p.washout = common.washout.unwrap_or(p.washout);
    p.test_len = common.test_len.unwrap_or(p.test_len);
    if resplit {
        p.train_len = p
            .total_steps
            .checked_sub(p.washout + p.test_len)
            .ok_or_else(|| {
                Error::Config(format!(
                    "steps ({}) must exceed washout ({}) + test_len ({})",
                    p.total_steps, p.washout, p.test_len
                ))
            })?;
    }
    if let Some(k) = common.k_max {
        p.k_max = k;
    }
    if let Some(v) = common.input_low {
        p.input_low = v;
    }
    if let Some(v) = common.input_high {
        p.input_high = v;
    }
    if let Some(r) = common.ridge {
        p.ridge = r;
    }
    if let Some(i) = common.intercept {
        p.intercept = i;
    }
    if let Some(sh) = common.shared_input {
        s.shared_input = sh;
    }
    let format = match &common.format {
        Some(f) => f.parse()?,
        None => keys.format.unwrap_or_default(),
    };
    let workers = common
        .workers
        .or(keys.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from));
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    s.validate()?;
    Ok(Effective {
        sweep: s,
        workers,
        out: common
            .out
            .clone()
            .or(keys.out)
            .unwrap_or_else(|| PathBuf::from("results")),
        format,
        fig3_rho: keys.fig3_rho,
    })
}

fn closest_to(grid: &[f64], target: f64) -> f64 {
    grid.iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .unwrap_or(target)
}

fn execute(eff: &Effective, fig3_rho: Option<f64>) -> Result<SweepOutput> {
    let mut manifest = RunManifest::new(&eff.sweep, eff.workers);
    match run_sweep(&eff.sweep, eff.workers) {
        Ok(output) => {
            manifest.finished_unix = unix_now();
            for p in emit_results(
                &output.records,
                &output.aggregates,
                &manifest,
                &eff.out,
                eff.format,
            )? {
                eprintln!("wrote {}", p.display());
            }
            let rho = fig3_rho
                .or(eff.fig3_rho)
                .unwrap_or_else(|| closest_to(&eff.sweep.rho_grid, DEFAULT_FIG3_RHO));
            for p in emit_plots(&output.aggregates, &eff.out, rho)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(output)
        }
        Err(failure) => {
            manifest.finished_unix = unix_now();
            manifest.error = Some(failure.error.to_string());
            let aggregates = aggregate(&failure.partial);
            emit_results(
                &failure.partial,
                &aggregates,
                &manifest,
                &eff.out,
                eff.format,
            )?;
            eprintln!(
                "partial results ({} records) flushed to {}",
                failure.partial.len(),
                eff.out.display()
            );
            Err(failure.error)
        }
    }
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let eff = effective(&args.common)?;
    eprintln!(
        "sweeping {} rho x {} seeds x {} layers on {} worker(s)",
        eff.sweep.rho_grid.len(),
        eff.sweep.n_realizations,
        eff.sweep.esn.n_layers,
        eff.workers
    );
    let output = execute(&eff, args.fig3_rho)?;
    println!("rho\tlayer\tmc_mean\tmc_std");
    for a in &output.aggregates {
        println!("{}\t{}\t{:.4}\t{:.4}", a.rho, a.layer, a.mc_mean, a.mc_std);
    }
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let mut common = args.common.clone();
    if let Some(rho) = &common.rho {
        if rho.len() != 1 {
            return Err(Error::Config("run takes a single --rho value".into()));
        }
    }
    common.rho.get_or_insert_with(|| vec![DEFAULT_FIG3_RHO]);
    if let Some(seed) = args.seed {
        common.base_seed = Some(seed);
    }
    common.seeds = Some(1);
    let mut eff = effective(&common)?;
    eff.sweep.rho_grid.truncate(1);
    eff.workers = 1;
    let rho = eff.sweep.rho_grid[0];
    if let Some(path) = &args.dump_network {
        let dump = init_deep_esn(&eff.sweep.esn.with_rho(rho), eff.sweep.base_seed)?
            .dump(eff.sweep.base_seed)?;
        let text = serde_json::to_string_pretty(&dump).map_err(|e| Error::Data(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        eprintln!("wrote {}", path.display());
    }
    let output = execute(&eff, Some(rho))?;
    println!("rho = {rho}, seed = {}", eff.sweep.base_seed);
    println!("layer\tmc_total");
    for r in &output.records {
        println!("{}\t{:.4}", r.layer, r.mc_total);
    }
    Ok(())
}

fn plot(args: &PlotArgs) -> Result<()> {
    let aggregates = read_aggregates(&args.input)?;
    let out = args.out.clone().unwrap_or_else(|| {
        args.input
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    });
    for p in emit_plots(&aggregates, &out, args.fig3_rho)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn run_selftest() -> Result<bool> {
    let checks = selftest::run_all();
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Run(a) => run(a),
        Command::Plot(a) => plot(a),
        Command::Selftest => match run_selftest() {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
