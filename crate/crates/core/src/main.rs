use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use maris::ao::{self, AoSettings};
use maris::beamforming::BeamformingError;
use maris::channel::sample_realization;
use maris::config::{watts_to_dbm, ScenarioConfig};
use maris::experiments::{
    channel_gain_landscape, run_experiment, run_scheme, write_beampattern_csv, write_landscape_csv,
    write_outputs, ExperimentSpec, Scheme, SweepAxis,
};
use maris::metrics::beampattern_sweep;

#[derive(Parser)]
#[command(name = "maris", version, about = "Movable-antenna RIS-aided ISAC beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo run over channel draws, optionally sweeping one parameter.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_axis)]
        sweep: Option<SweepAxis>,
        /// Comma-separated axis values (defaults depend on the axis).
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "ma,fpa", value_parser = parse_scheme)]
        schemes: Vec<Scheme>,
        #[arg(long, default_value_t = 1)]
        realizations: usize,
        /// First channel seed (defaults to the config seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Beampattern over [−90°, 90°] after optimizing the config's channel draw.
    SweepBeampattern {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "ma,fpa", value_parser = parse_scheme)]
        schemes: Vec<Scheme>,
        #[arg(long, default_value_t = 361)]
        points: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Validates the config and the feasibility of its channel draw.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// BS–RIS channel power of a single antenna over the transmit region.
    Landscape {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse()
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse()
}

fn load(path: Option<&Path>) -> Result<ScenarioConfig, String> {
    let cfg = match path {
        Some(p) => ScenarioConfig::load(p).map_err(|e| e.to_string())?,
        None => ScenarioConfig::default(),
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run { config, sweep, values, schemes, realizations, seed, out } => {
            let base = load(config.as_deref())?;
            let mut spec = ExperimentSpec::new(base);
            spec.axis = sweep;
            spec.values = match sweep {
                Some(axis) if values.is_empty() => axis.default_values(),
                _ => values,
            };
            spec.schemes = schemes;
            spec.realizations = realizations;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let result = run_experiment(&spec).map_err(|e| e.to_string())?;
            let files = write_outputs(&spec, &result, &out).map_err(|e| e.to_string())?;
            for row in &result.summary {
                let value = row.axis_value.map(|v| format!("{v} ")).unwrap_or_default();
                match (row.mean_min_gain, row.stderr_min_gain) {
                    (Some(m), Some(se)) => println!(
                        "{value}{:<4} mean min-gain {m:.4e} ± {se:.1e} over {} draws ({} infeasible, {} failed)",
                        row.scheme, row.paired, row.infeasible, row.failed
                    ),
                    _ => println!("{value}{:<4} no successful draws ({} infeasible, {} failed)", row.scheme, row.infeasible, row.failed),
                }
            }
            println!("wrote {} files to {}", files.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::SweepBeampattern { config, schemes, points, out } => {
            let cfg = load(config.as_deref())?;
            let real = sample_realization(&cfg, cfg.seed);
            let settings = AoSettings::from_config(&cfg);
            std::fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            for scheme in schemes {
                let (t, _) = run_scheme(scheme, &cfg, &real, &settings).map_err(|e| format!("{scheme}: {e}"))?;
                let sweep = beampattern_sweep(&real, &t.state.layout, &t.state.phase, &t.state.cov.r, points)
                    .map_err(|e| e.to_string())?;
                let path = out.join(format!("beampattern_{scheme}.csv"));
                write_beampattern_csv(&path, &sweep).map_err(|e| e.to_string())?;
                println!("{scheme}: min-gain {:.4e}, wrote {}", t.final_gain(), path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { config } => {
            let cfg = load(config.as_deref())?;
            println!("config ok: M={} N={} K={} paths={}/{}/{}", cfg.m, cfg.n, cfg.k, cfg.l_t, cfg.l_r, cfg.l_tk);
            let real = sample_realization(&cfg, cfg.seed);
            match ao::initialize(&cfg, &real, &AoSettings::from_config(&cfg)) {
                Ok(state) => {
                    let ev = ao::Evaluation::new(&cfg, &real, &state.layout, &state.phase).map_err(|e| e.to_string())?;
                    println!("seed {}: feasible, initial min-gain {:.4e}", cfg.seed, ev.min_gain(&state.cov));
                    Ok(ExitCode::SUCCESS)
                }
                Err(ao::AoError::Initial(BeamformingError::Infeasible { class, required_power })) => {
                    match required_power {
                        Some(p) => println!(
                            "seed {}: infeasible ({class:?}); the SINR targets need {:.2} dBm, budget is {:.2} dBm",
                            cfg.seed,
                            watts_to_dbm(p),
                            watts_to_dbm(cfg.p0)
                        ),
                        None => println!("seed {}: infeasible ({class:?}) at any power", cfg.seed),
                    }
                    Ok(ExitCode::from(2))
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Command::Landscape { config, points, out } => {
            let cfg = load(config.as_deref())?;
            let real = sample_realization(&cfg, cfg.seed);
            std::fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            let grid = channel_gain_landscape(&real, cfg.region_side, points);
            let path = out.join("landscape.csv");
            write_landscape_csv(&path, &grid).map_err(|e| e.to_string())?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
