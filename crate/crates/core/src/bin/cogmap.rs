use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cogmap::harness::output::{summary_table, write_batch, TABLE_VERSION};
use cogmap::harness::{batch, oracle_steps, Controller, RunConfig, MAX_ORACLE_ROOMS};
use cogmap::roomworld::PRESETS;
use cogmap::{run_episode, RoomWorldSpec};

#[derive(Parser)]
#[command(
    name = "cogmap",
    version,
    about = "Active-inference exploration of grid-room worlds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and optionally write its trace, snapshot and plots.
    Run {
        #[command(flatten)]
        params: Params,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use uniformly random actions instead of the planner.
        #[arg(long)]
        random: bool,
        /// Record the EFE of every policy at every step.
        #[arg(long)]
        dump_efe: bool,
        /// Keep stepping after completion until --max-steps.
        #[arg(long)]
        run_to_max: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "grid3x3_aliased")]
        env: String,
    },
    /// Agent, random baseline and oracle over seeds 0..N of each environment.
    Batch {
        #[command(flatten)]
        params: Params,
        /// Environments to run; all presets when omitted.
        #[arg(long)]
        env: Vec<String>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shortest covering walk from every room (or one room).
    Oracle {
        #[arg(long, default_value = "grid3x3")]
        env: String,
        /// Start room as `row,col`.
        #[arg(long, value_parser = parse_room)]
        start: Option<(usize, usize)>,
    },
    /// Print or save an environment as a TOML document.
    DumpEnv {
        #[arg(long)]
        env: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Params {
    #[arg(long, default_value_t = 200)]
    max_steps: usize,
    /// Softmax precision over policies.
    #[arg(long, default_value_t = 8.0)]
    gamma: f64,
    #[arg(long, default_value_t = 4)]
    horizon: usize,
    #[arg(long, default_value_t = 1.0)]
    novelty_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    lr_exp: f64,
    #[arg(long, default_value_t = 0.1)]
    lr_imag: f64,
    #[arg(long, default_value_t = 0.5)]
    confidence_threshold: f64,
    #[arg(long, default_value_t = 0.6)]
    accuracy_threshold: f64,
}

impl Params {
    fn config(&self, env: &str, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::new(env, seed);
        cfg.max_steps = self.max_steps;
        cfg.accuracy_threshold = self.accuracy_threshold;
        cfg.agent.confidence_threshold = self.confidence_threshold;
        cfg.agent.planner.gamma = self.gamma;
        cfg.agent.planner.horizon = self.horizon;
        cfg.agent.planner.novelty_weight = self.novelty_weight;
        cfg.agent.learning.lr_experienced = self.lr_exp;
        cfg.agent.learning.lr_imagined = self.lr_imag;
        cfg
    }
}

fn parse_room(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(',').ok_or("expected row,col")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((parse(r)?, parse(c)?))
}

fn fmt_steps(v: Option<usize>) -> String {
    v.map_or_else(|| "never".to_string(), |s| s.to_string())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            params,
            seed,
            random,
            dump_efe,
            run_to_max,
            out,
            env,
        } => {
            let mut cfg = params.config(&env, seed);
            cfg.controller = if random {
                Controller::Random
            } else {
                Controller::ExpectedFreeEnergy
            };
            cfg.dump_efe = dump_efe;
            cfg.run_to_max = run_to_max;
            cfg.output_dir = out.clone();
            let r = run_episode(&cfg)?;
            println!("env {} seed {} start {}", r.env, r.seed, r.start_room);
            println!("steps_to_discovery {}", fmt_steps(r.steps_to_discovery));
            println!("steps_to_complete {}", fmt_steps(r.steps_to_complete));
            println!("final_accuracy {:.4}", r.final_accuracy);
            println!("states {}", r.snapshot.num_states);
            if let Some(dir) = out {
                println!("wrote {}", dir.display());
            }
        }
        Command::Batch {
            params,
            mut env,
            seeds,
            out,
        } => {
            if env.is_empty() {
                env = PRESETS.iter().map(|s| s.to_string()).collect();
            }
            let base = params.config(&env[0], 0);
            let (records, summary) = batch(&env, &base, seeds)?;
            print!("{}", summary_table(&summary));
            if let Some(dir) = out {
                write_batch(&dir, &records, &summary)
                    .with_context(|| format!("writing {}", dir.display()))?;
            }
        }
        Command::Oracle { env, start } => {
            let spec = RoomWorldSpec::load(&env)?;
            if spec.num_rooms() > MAX_ORACLE_ROOMS {
                bail!(
                    "{env} has {} rooms; the oracle handles at most {MAX_ORACLE_ROOMS}",
                    spec.num_rooms()
                );
            }
            let starts = match start {
                Some((row, col)) => vec![cogmap::Room::new(row, col)],
                None => spec.rooms().to_vec(),
            };
            let steps = starts
                .iter()
                .map(|&room| oracle_steps(&spec, room))
                .collect::<Result<Vec<_>, _>>()?;
            println!("# cogmap-oracle v{TABLE_VERSION}");
            println!("start\tsteps");
            for (room, n) in starts.iter().zip(steps) {
                println!("{room}\t{n}");
            }
        }
        Command::DumpEnv { env, out } => {
            let text = RoomWorldSpec::load(&env)?.to_toml();
            match out {
                Some(path) => {
                    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}
