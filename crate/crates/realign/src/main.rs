use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use realign::config::ExperimentConfig;
use realign::harness::{self, load_policy_set};
use realign::service::{self, AppState, ServiceConfig};
use realign::store::PolicySetFile;
use realign::summary::{render_table, summarize};
use realign::{envs, Error, Result};
use realign_core::learner::{build_policy_set, LearnerConfig, PolicySet};

#[derive(Parser)]
#[command(name = "realign", version, about = "Retroactive preference alignment over a multi-objective policy set")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `master_seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Override a field, e.g. `--override users.0.reaction_noise=0.1`
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("master_seed={seed}"));
        }
        ExperimentConfig::load(&self.config, &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the policy set for a configuration and cache it
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write the policy set to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every interpreter x selector x seed cell and write metrics
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory; overrides `output.dir`
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use a policy set written by `train --out` instead of training
        #[arg(long)]
        policy_set: Option<PathBuf>,
    },
    /// Aggregate a metrics CSV into per-cell statistics
    Summarize {
        /// metrics.csv written by `run`
        metrics: PathBuf,
        /// Write the summary CSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the HTTP session service
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        addr: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory of built UI assets
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Directory for profiles, the population prior and cached policy sets
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Print the learned policy set of an environment
    InspectFront {
        /// Environment id
        #[arg(long, default_value = envs::TREASURE_GRID, conflicts_with_all = ["config", "policy_set"])]
        env: String,
        /// Take environment and learner settings from a configuration
        #[arg(long)]
        config: Option<PathBuf>,
        /// Read a policy set written by `train --out`
        #[arg(long)]
        policy_set: Option<PathBuf>,
        /// Print JSON instead of a table
        #[arg(long)]
        json: bool,
    },
}

fn print_front(set: &PolicySet, names: &[String]) {
    println!("{} policies on {} (front order):", set.len(), set.env_id);
    println!("  {:>3}  {:<24}  {:<16}  scalarization", "id", names.join(" / "), "anchor weight");
    for &idx in &set.front_order {
        let p = &set.policies[idx];
        let ret: Vec<String> = p.return_vector.values().iter().map(|v| format!("{v:.3}")).collect();
        let w: Vec<String> = p.anchor_weight.weights().iter().map(|v| format!("{v:.2}")).collect();
        println!(
            "  {:>3}  {:<24}  {:<16}  {:?}",
            p.id,
            format!("({})", ret.join(", ")),
            format!("({})", w.join(", ")),
            p.scalarization
        );
    }
}

fn read_policy_set(path: &Path, cfg: &ExperimentConfig) -> Result<PolicySet> {
    let file = PolicySetFile::read(path)?;
    let spec = cfg.spec()?;
    if file.env_id != spec.id {
        return Err(Error::config(
            "env",
            format!("policy set {} is for `{}`, config uses `{}`", path.display(), file.env_id, spec.id),
        ));
    }
    file.policy_set.validate(&spec)?;
    Ok(file.policy_set)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out } => {
            let cfg = config.load()?;
            let spec = cfg.spec()?;
            let (set, cached) = load_policy_set(&cfg)?;
            if cached {
                eprintln!("loaded cached policy set");
            }
            if let Some(out) = out {
                PolicySetFile::new(&spec, &cfg.learner, set.clone()).write(&out)?;
                eprintln!("wrote {}", out.display());
            }
            print_front(&set, &spec.objective_names);
        }
        Command::Run { config, out, policy_set } => {
            let mut cfg = config.load()?;
            if let Some(out) = out {
                cfg.output.dir = Some(out);
            }
            let dir = cfg
                .output
                .dir
                .clone()
                .ok_or_else(|| Error::config("output.dir", "no output directory; pass --out or set output.dir"))?;
            let set = match policy_set {
                Some(path) => read_policy_set(&path, &cfg)?,
                None => load_policy_set(&cfg)?.0,
            };
            let output = harness::run_experiment(&cfg, Arc::new(set))?;
            let written = harness::write_outputs(&output, &dir, cfg.output.audit)?;
            print!("{}", render_table(&output.summary));
            eprintln!("wrote {} files under {}", written.len(), dir.display());
        }
        Command::Summarize { metrics, out } => {
            let rows = harness::read_metrics(&metrics)?;
            let summary = summarize(&rows)?;
            if let Some(out) = out {
                harness::write_csv(&out, &summary)?;
            }
            print!("{}", render_table(&summary));
        }
        Command::Serve {
            addr,
            port,
            static_dir,
            data_dir,
        } => {
            let state = Arc::new(AppState::new(ServiceConfig {
                learner: LearnerConfig::default(),
                data_dir,
            }));
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("starting runtime", e))?;
            runtime
                .block_on(service::serve(SocketAddr::new(addr, port), state, static_dir))
                .map_err(|e| Error::io("serving", e))?;
        }
        Command::InspectFront {
            env,
            config,
            policy_set,
            json,
        } => {
            let (spec, set) = match (config, policy_set) {
                (Some(path), policy_set) => {
                    let cfg = ExperimentConfig::load(&path, &[])?;
                    let set = match policy_set {
                        Some(p) => read_policy_set(&p, &cfg)?,
                        None => load_policy_set(&cfg)?.0,
                    };
                    (cfg.spec()?, set)
                }
                (None, Some(path)) => {
                    let file = PolicySetFile::read(&path)?;
                    let spec = envs::resolve_or_config_error(&file.env_id, "env_id")?;
                    file.policy_set.validate(&spec)?;
                    (spec, file.policy_set)
                }
                (None, None) => {
                    let spec = envs::resolve_or_config_error(&env, "env")?;
                    let set = build_policy_set(&spec, &LearnerConfig::default())?;
                    (spec, set)
                }
            };
            if json {
                println!("{}", serde_json::to_string_pretty(&set).expect("policy set serializes"));
            } else {
                print_front(&set, &spec.objective_names);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
