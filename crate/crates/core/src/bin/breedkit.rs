use std::path::PathBuf;
use std::process::ExitCode;

use breedkit::pipeline::{run, Command, ConfigError, Override, PipelineConfig, PipelineError};
use clap::{Args, Parser, Subcommand};

/// Plot phenotyping features, yield fusion, preference optimization and
/// benchmark scoring.
///
/// Exit codes: 0 success, 1 module error, 2 invalid config. A JSON summary
/// line goes to stdout; logs go to stderr.
#[derive(Parser)]
#[command(name = "breedkit", version)]
struct Cli {
    /// TOML config; relative paths inside it resolve against its directory.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set fuse.k=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-plot feature CSV from bands, elevation and masks.
    Extract(ExtractArgs),
    /// Ridge yield model with k-fold cross-validation.
    Fuse(FuseArgs),
    /// SFT, reward model and PPO on the tabular policy.
    #[command(subcommand)]
    Prefopt(PrefoptCmd),
    /// Score benchmark trials and reasoning ballots.
    Bench,
    /// Knowledge-base queries.
    #[command(subcommand)]
    Kb(KbCmd),
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    savi_l: Option<f64>,
    #[arg(long)]
    kndvi_sigma: Option<f64>,
    #[arg(long)]
    ch_percentile: Option<f64>,
    #[arg(long)]
    noise_floor: Option<f64>,
    #[arg(long)]
    weed_ring_inner: Option<f64>,
    #[arg(long)]
    weed_ring_outer: Option<f64>,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    k: Option<i64>,
    /// Comma-separated: RS, phenotyping, weather, germplasm.
    #[arg(long, value_delimiter = ',')]
    domains: Option<Vec<String>>,
}

#[derive(Args)]
struct PpoArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    ppo_clip: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    iterations: Option<i64>,
}

#[derive(Subcommand)]
enum PrefoptCmd {
    Sft,
    Rm,
    Ppo(PpoArgs),
}

#[derive(Subcommand)]
enum KbCmd {
    /// Germplasm matching a screening target and/or predicates.
    Screen {
        #[arg(long)]
        target: Option<String>,
        /// Predicate such as `plant_height<=80`. Repeatable.
        #[arg(long = "where")]
        predicates: Vec<String>,
    },
    /// Seed price observations nearest a date.
    Price {
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        date: Option<String>,
        #[arg(long)]
        variety: Option<String>,
    },
}

fn push<T: Into<toml::Value>>(out: &mut Vec<Override>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        out.push(Override::new(key, v));
    }
}

fn overrides(cli: &Cli) -> Result<Vec<Override>, ConfigError> {
    let mut ov = Vec::new();
    for s in &cli.set {
        ov.push(Override::parse(s)?);
    }
    if let Some(dir) = &cli.output_dir {
        let cwd = std::env::current_dir().map_err(|e| ConfigError::new("output_dir", e.to_string()))?;
        ov.push(Override::new("output_dir", cwd.join(dir).to_string_lossy().into_owned()));
    }
    push(&mut ov, "seed", cli.seed.map(|s| s as i64));
    match &cli.command {
        Cmd::Extract(a) => {
            push(&mut ov, "extract.savi_l", a.savi_l);
            push(&mut ov, "extract.kndvi_sigma", a.kndvi_sigma);
            push(&mut ov, "extract.ch_percentile", a.ch_percentile);
            push(&mut ov, "extract.noise_floor", a.noise_floor);
            push(&mut ov, "extract.weed_ring_inner", a.weed_ring_inner);
            push(&mut ov, "extract.weed_ring_outer", a.weed_ring_outer);
        }
        Cmd::Fuse(a) => {
            push(&mut ov, "fuse.lambda", a.lambda);
            push(&mut ov, "fuse.k", a.k);
            push(&mut ov, "fuse.domains", a.domains.clone());
        }
        Cmd::Prefopt(PrefoptCmd::Sft | PrefoptCmd::Rm) | Cmd::Bench => {}
        Cmd::Prefopt(PrefoptCmd::Ppo(a)) => {
            push(&mut ov, "prefopt.ppo.beta", a.beta);
            push(&mut ov, "prefopt.ppo.ppo_clip", a.ppo_clip);
            push(&mut ov, "prefopt.ppo.learning_rate", a.learning_rate);
            push(&mut ov, "prefopt.ppo.iterations", a.iterations);
        }
        Cmd::Kb(KbCmd::Screen { target, predicates }) => {
            push(&mut ov, "kb.target", target.clone());
            if !predicates.is_empty() {
                ov.push(Override::new("kb.predicates", predicates.clone()));
            }
        }
        Cmd::Kb(KbCmd::Price { point, date, variety }) => {
            push(&mut ov, "kb.observation_point", point.clone());
            if let Some(d) = date {
                let d: toml::value::Datetime = d
                    .parse()
                    .map_err(|_| ConfigError::new("kb.date", format!("`{d}` is not a date")))?;
                ov.push(Override::new("kb.date", d));
            }
            push(&mut ov, "kb.variety", variety.clone());
        }
    }
    Ok(ov)
}

fn command_of(cmd: &Cmd) -> Command {
    match cmd {
        Cmd::Extract(_) => Command::Extract,
        Cmd::Fuse(_) => Command::Fuse,
        Cmd::Prefopt(PrefoptCmd::Sft) => Command::Sft,
        Cmd::Prefopt(PrefoptCmd::Rm) => Command::Rm,
        Cmd::Prefopt(PrefoptCmd::Ppo(_)) => Command::Ppo,
        Cmd::Bench => Command::Bench,
        Cmd::Kb(KbCmd::Screen { .. }) => Command::KbScreen,
        Cmd::Kb(KbCmd::Price { .. }) => Command::KbPrice,
    }
}

fn execute(cli: &Cli) -> (Command, Result<serde_json::Value, PipelineError>) {
    let command = command_of(&cli.command);
    let result = (|| {
        let ov = overrides(cli)?;
        let cfg = PipelineConfig::load(cli.config.as_deref(), &ov)?;
        if let Some(n) = cli.threads {
            if n == 0 {
                return Err(ConfigError::new("threads", "must be > 0").into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| ConfigError::new("threads", e.to_string()))?;
        }
        run(command, &cfg)
    })();
    (command, result)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let (command, result) = execute(&cli);
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{} failed: {e}", command.name());
            println!("{}", e.summary(command));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
