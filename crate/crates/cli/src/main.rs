use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use enhance_core::consensus::{load_state, ConsensusState, HistogramSource};
use enhance_core::pipeline::{
    decode_image, run_combine, write_image, write_synthetic_set, RunConfig, SynthConfig,
};
use enhance_core::rankcore::{kendall_tau, kendall_tau_sampled};
use enhance_core::register::{build_index, detect_stars, solve, DetectParams, SolveParams};
use enhance_core::{Error, Grid, StarList};

#[derive(Parser)]
#[command(name = "enhance", version, about = "Rank-based consensus imaging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene with observations and a combine config.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Plate-solve one image against a star catalog.
    Solve {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        sidecar_out: Option<PathBuf>,
    },
    /// Fuse registered images into a consensus.
    Combine {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render a saved state with the histogram of another image.
    Render {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        match_to: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kendall tau between two images of the same size.
    Tau(TauArgs),
}

#[derive(Args)]
struct TauArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, conflicts_with_all = ["pairs", "seed"])]
    exact: bool,
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Exit status for a failed command.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::EmptyRun => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> enhance_core::Result<u8> {
    match cmd {
        Command::Synth { spec, out_dir } => {
            let cfg = SynthConfig::load(&spec)?;
            let s = write_synthetic_set(&cfg, &out_dir)?;
            println!("truth: {}", s.truth.display());
            println!("catalog: {}", s.catalog.display());
            println!("observations: {}", s.observations.len());
            println!("config: {}", s.combine_config.display());
            Ok(0)
        }
        Command::Solve {
            catalog,
            image,
            sidecar_out,
        } => {
            let text = std::fs::read_to_string(&catalog)
                .map_err(|e| Error::Config(format!("catalog {}: {e}", catalog.display())))?;
            let catalog = StarList::parse(&text)?;
            let lum = decode_image(&image)?.luminance();
            let detected = detect_stars(&lum, 200, &DetectParams::default())?;
            info!("{} star(s) detected", detected.len());
            let index = build_index(&catalog, 50_000)?;
            let params = SolveParams::for_image(lum.width(), lum.height());
            match solve(&detected, &index, &catalog, &params)? {
                Some(sol) => {
                    print!("{}", sol.transform.to_sidecar());
                    println!("# matched {} of {} predicted", sol.matched, sol.predicted);
                    if let Some(p) = sidecar_out {
                        std::fs::write(p, sol.transform.to_sidecar())?;
                    }
                    Ok(0)
                }
                None => {
                    eprintln!("no solution");
                    Ok(1)
                }
            }
        }
        Command::Combine { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = run_combine(&cfg)?;
            print!("{}", out.report);
            Ok(0)
        }
        Command::Render {
            state,
            match_to,
            out,
        } => {
            let state: ConsensusState<f64> = load_state(&state)?;
            let img = decode_image(&match_to)?;
            let lum = img.luminance();
            let canvas = state.canvas();
            if lum.width() != canvas.width() || lum.height() != canvas.height() {
                return Err(Error::ShapeMismatch(format!(
                    "state is {}x{}, image is {}x{}",
                    canvas.width(),
                    canvas.height(),
                    lum.width(),
                    lum.height()
                )));
            }
            let values = state.render(&HistogramSource::from_values(lum.into_data())?)?;
            let grid = Grid::new(canvas.width(), canvas.height(), values)?;
            write_image(&out, &[grid], img.bit_depth)?;
            Ok(0)
        }
        Command::Tau(args) => {
            let a = decode_image(&args.a)?.luminance();
            let b = decode_image(&args.b)?.luminance();
            if (a.width(), a.height()) != (b.width(), b.height()) {
                return Err(Error::ShapeMismatch(format!(
                    "{}x{} vs {}x{}",
                    a.width(),
                    a.height(),
                    b.width(),
                    b.height()
                )));
            }
            if args.exact {
                println!("tau_b={:.6}", kendall_tau(a.data(), b.data())?);
            } else {
                let (t, se) = kendall_tau_sampled(a.data(), b.data(), args.pairs, args.seed)?;
                println!("tau={t:.6}\nstderr={se:.6}");
            }
            Ok(0)
        }
    }
}
