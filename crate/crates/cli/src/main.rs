//! `ripstat` command-line experiment runner.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "ripstat", version, about = "Rips persistence, H0 death-time fitting and replication inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a point cloud and write cloud.csv plus cloud.json.
    Sample(Common),
    /// Compute a persistence diagram (diagram.csv plus diagram.json).
    Rips {
        #[command(flatten)]
        common: Common,
        /// Use this cloud CSV instead of sampling.
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Fit the finite H0 deaths of a diagram (fit.json, histogram.csv).
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        diagram: PathBuf,
    },
    /// Test the order statistics of a diagram against a fitted model.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 2)]
        j_max: usize,
    },
    /// Classification, percentile and inference tables over a grid.
    Table(Common),
    /// Skewness, kurtosis and bottleneck data over repeated collections.
    Goodness(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON). Flags override its fields.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory [env: RIPSTAT_OUTPUT_DIR; default: current directory].
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// circle, two_concentric, two_distinct, sphere or torus3.
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    d_outer: Option<f64>,
    #[arg(long)]
    d_inner: Option<f64>,
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long, short)]
    n: Option<usize>,
    /// Noise fraction M in [0, 1].
    #[arg(long = "noise", short = 'm')]
    noise_fraction: Option<f64>,
    /// A positive number or "auto".
    #[arg(long)]
    maxscale: Option<String>,
    #[arg(long)]
    maxdim: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    collections: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
}

impl Common {
    fn overrides(&self) -> ripstat::Result<Map<String, Value>> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("shape", self.shape.clone().map(Value::from));
        put("r", self.r.map(Value::from));
        put("d_outer", self.d_outer.map(Value::from));
        put("d_inner", self.d_inner.map(Value::from));
        put("gap", self.gap.map(Value::from));
        put("n", self.n.map(Value::from));
        put("noise_fraction", self.noise_fraction.map(Value::from));
        put("maxdim", self.maxdim.map(Value::from));
        put("n_reps", self.reps.map(Value::from));
        put("n_collections", self.collections.map(Value::from));
        put("seed", self.seed.map(Value::from));
        put("alpha", self.alpha.map(Value::from));
        if let Some(s) = &self.maxscale {
            let v = if s == "auto" {
                Value::from("auto")
            } else {
                let x: f64 = s.parse().map_err(|_| ripstat::Error::InvalidParameter(format!("maxscale must be a number or \"auto\", got {s:?}")))?;
                Value::from(x)
            };
            m.insert("maxscale".into(), v);
        }
        Ok(m)
    }

    fn load(&self) -> ripstat::Result<(ExperimentConfig, PathBuf)> {
        let config = ExperimentConfig::load(self.config.as_deref(), self.overrides()?)?;
        let out = config.output_dir(self.out.as_deref());
        Ok((config, out))
    }
}

fn run(cli: Cli) -> ripstat::Result<Vec<PathBuf>> {
    match cli.command {
        Command::Sample(c) => {
            let (config, out) = c.load()?;
            commands::cmd_sample(&config, &out)
        }
        Command::Rips { common, cloud } => {
            let (config, out) = common.load()?;
            commands::cmd_rips(&config, cloud.as_deref(), &out)
        }
        Command::Fit { common, diagram } => {
            let (_, out) = common.load()?;
            commands::cmd_fit(&diagram, &out)
        }
        Command::Infer { common, diagram, model, j_max } => {
            let (config, out) = common.load()?;
            if j_max == 0 {
                return Err(ripstat::Error::InvalidParameter("j_max must be at least 1".into()));
            }
            commands::cmd_infer(&config, &diagram, &model, j_max, &out)
        }
        Command::Table(c) => {
            let (config, out) = c.load()?;
            commands::cmd_table(&config, &out)
        }
        Command::Goodness(c) => {
            let (config, out) = c.load()?;
            if config.n_collections < 2 {
                return Err(ripstat::Error::InvalidParameter("goodness needs at least 2 collections".into()));
            }
            commands::cmd_goodness(&config, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "code": e.code(), "message": e.to_string() } }));
            ExitCode::from(1)
        }
    }
}
