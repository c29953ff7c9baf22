use clap::{Parser, Subcommand};
use radiomap_cli::{commands, CliResult, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "radiomap", version, about = "Virtual obstacle maps and radio maps from attenuation samples")]
struct Cli {
    /// TOML run configuration, or a manifest of an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Procedural obstacle map.
    GenScene {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic measurements over an obstacle map.
    GenData {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a train/test split: `<stem>_train.csv` and `<stem>_test.csv`.
        #[arg(long)]
        split: Option<f64>,
    },
    /// Fits heights and path-loss parameters.
    Fit {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Start from this map instead of the clustered initialization.
        #[arg(long)]
        init_map: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        out_map: Option<PathBuf>,
    },
    /// Attenuation heatmap for the configured transmitter.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error metrics of a model on measurements.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Training data; enables the distance-only and nearest-neighbour baselines.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relay position for the configured user pair.
    Relay {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<PathBuf> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    }
    .with_seed(cli.seed);
    match cli.cmd {
        Cmd::GenScene { out } => commands::gen_scene(&cfg, out),
        Cmd::GenData { map, out, split } => {
            let out = commands::gen_data(&cfg, map, out)?;
            if let Some(f) = split {
                let stem = out.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                let train = out.with_file_name(format!("{stem}_train.csv"));
                let test = out.with_file_name(format!("{stem}_test.csv"));
                commands::split(&out, f, &train, &test)?;
            }
            Ok(out)
        }
        Cmd::Fit { data, init_map, out, out_map } => commands::fit(&cfg, data, init_map, out, out_map),
        Cmd::Predict { model, out } => commands::predict(&cfg, model, out),
        Cmd::Eval { model, data, train, out } => commands::eval(&cfg, model, data, train, out),
        Cmd::Relay { model, out } => commands::relay(&cfg, model, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            println!("{}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
