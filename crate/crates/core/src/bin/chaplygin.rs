use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use chaplygin::gamma::{decay_profile, good_unknown, magnitude, WeightSpec};
use chaplygin::harness::config::parse_values;
use chaplygin::harness::io::{load_checkpoint, read_sweep_file, timestamp, write_profile_csv, GridInfo, Manifest, SweepCsvWriter};
use chaplygin::harness::{fit_powerlaw, make_initial_data, run_scenario, run_sweep, Preset, ScenarioConfig, SweepParam};
use chaplygin::{Error, Result};

#[derive(Parser)]
#[command(name = "chaplygin", version, about = "Lifespan experiments for 2D compressible Euler flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML scenario file; laid over --preset when both are given
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write its norm history
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        wall_time: bool,
    },
    /// One run per value, records to sweep.csv
    Sweep {
        #[command(flatten)]
        common: Common,
        /// delta or eps
        #[arg(long)]
        sweep: Option<String>,
        /// comma separated, descending
        #[arg(long)]
        values: Option<String>,
        /// 0 uses every core
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        wall_time: bool,
    },
    /// Fit log t_break against log param from a sweep CSV
    Fit { csv: PathBuf },
    /// Build the initial data and print the measured data sizes
    Measure {
        #[command(flatten)]
        common: Common,
    },
    /// Radial profile of the weighted good unknown from a checkpoint
    Profile {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        spatial_power: f64,
        #[arg(long, default_value_t = 0.5)]
        cone_power: f64,
        #[arg(long, default_value_t = 0.5)]
        width: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the resolved configuration
    Config {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common) -> Result<ScenarioConfig> {
    let preset = common.preset.as_deref().map(str::parse::<Preset>).transpose()?;
    let mut cfg = match (&common.config, preset) {
        (Some(path), Some(p)) => ScenarioConfig::preset_with_overrides(p, &fs::read_to_string(path)?)?,
        (Some(path), None) => ScenarioConfig::from_file(path)?,
        (None, Some(p)) => p.config(),
        (None, None) => Preset::ChaplyginDelta.config(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &common.out_dir {
        cfg.output.out_dir = dir.clone();
    }
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.output.out_dir)?;
    Ok(&cfg.output.out_dir)
}

fn manifest(cfg: &ScenarioConfig, started_at: String) -> Result<Manifest> {
    Ok(Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        grid: GridInfo::from(&cfg.grid()?),
        seed: cfg.seed,
        started_at,
        finished_at: String::new(),
        runs: Vec::new(),
    })
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "none".to_string(), |t| format!("{t:.4}"))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, wall_time } => {
            let mut cfg = resolve(&common)?;
            cfg.output.wall_time |= wall_time;
            cfg.validate()?;
            let dir = out_dir(&cfg)?;
            let mut m = manifest(&cfg, timestamp())?;
            let outcome = run_scenario(&cfg, &cfg.name, Some(dir))?;
            let b = outcome.summary.breakdown;
            println!(
                "t_end = {:.4}, steps = {}, t_break = {}, reason = {}",
                outcome.summary.t_end,
                outcome.summary.steps,
                fmt_time(b.t_break),
                b.reason.map_or("none", |r| r.as_str())
            );
            m.runs.push(outcome.summary);
            m.finished_at = timestamp();
            m.write(&dir.join("manifest.json"))
        }
        Command::Sweep {
            common,
            sweep,
            values,
            threads,
            wall_time,
        } => {
            let mut cfg = resolve(&common)?;
            if let Some(p) = sweep {
                cfg.sweep.param = Some(p.parse::<SweepParam>()?);
            }
            if let Some(v) = values {
                cfg.sweep.values = parse_values(&v)?;
            }
            if let Some(t) = threads {
                cfg.sweep.threads = t;
            }
            cfg.output.wall_time |= wall_time;
            cfg.validate()?;
            let param = cfg
                .sweep
                .param
                .ok_or_else(|| Error::Config("no sweep parameter (use --sweep delta|eps)".into()))?;
            let dir = out_dir(&cfg)?;
            let mut m = manifest(&cfg, timestamp())?;
            let mut writer = SweepCsvWriter::create(&dir.join("sweep.csv"))?;
            let runs = run_sweep(&cfg, param, &cfg.sweep.values, cfg.sweep.threads, Some(dir), |r| {
                info!("{} = {}: t_break = {} ({})", param.as_str(), r.record.param_value, fmt_time(r.record.t_break), r.record.reason);
                writer.write(&r.record)
            })?;
            writer.into_inner()?;
            let records: Vec<_> = runs.iter().map(|r| r.record.clone()).collect();
            for r in &records {
                println!("{} = {}: t_break = {}, {}", param.as_str(), r.param_value, fmt_time(r.t_break), r.reason);
            }
            match fit_powerlaw(&records) {
                Ok(fit) => println!("slope = {:.4}, intercept = {:.4}, r2 = {:.4}, points = {}", fit.slope, fit.intercept, fit.r2, fit.points),
                Err(e) => println!("no fit: {e}"),
            }
            m.runs = runs.into_iter().map(|r| r.summary).collect();
            m.finished_at = timestamp();
            m.write(&dir.join("manifest.json"))
        }
        Command::Fit { csv } => {
            let fit = fit_powerlaw(&read_sweep_file(&csv)?)?;
            println!("{}", serde_json::to_string(&fit)?);
            Ok(())
        }
        Command::Measure { common } => {
            let cfg = resolve(&common)?;
            cfg.validate()?;
            let d = make_initial_data(&cfg)?;
            println!(
                "{}",
                serde_json::json!({
                    "eps": d.measured.eps,
                    "delta": d.measured.delta,
                    "support_radius": d.measured.support_radius,
                    "a": d.a,
                    "b": d.b,
                    "iterations": d.iterations,
                })
            );
            Ok(())
        }
        Command::Profile {
            checkpoint,
            spatial_power,
            cone_power,
            width,
            output,
        } => {
            let state = load_checkpoint(&checkpoint)?;
            let rows = decay_profile(
                &magnitude(&good_unknown(&state)),
                state.t,
                &WeightSpec::sup_only(spatial_power, cone_power),
                width,
            )?;
            match output {
                Some(p) => write_profile_csv(BufWriter::new(File::create(p)?), &rows),
                None => write_profile_csv(std::io::stdout().lock(), &rows),
            }
        }
        Command::Config { common } => {
            let cfg = resolve(&common)?;
            cfg.validate()?;
            print!("{}", cfg.to_toml_string());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
