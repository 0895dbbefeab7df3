//! Thin command-line front end over the harness: `run` simulates one
//! configuration and writes trace/summary files, `table` sweeps random
//! initializations over matrix families, `verify` executes the invariant
//! suites. Exit code 0 means no violations and no errors; 1 means at
//! least one invariant violation; 2 means a usage or runtime error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fpsim::harness::{
    apply_settings, cmd_run, cmd_table, cmd_verify, parse_config_file, parse_game,
    ExperimentConfig,
};
use fpsim::{Algo, GameSpec};

#[derive(Parser)]
#[command(
    name = "fpsim",
    about = "Fictitious-play dynamics in zero-sum games: simulation, tables, verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonFlags {
    /// Flat key-value config file; flags override its settings
    #[arg(long)]
    config: Option<PathBuf>,
    /// Game family: mp | identity | rps[:scale] | random01 | a41
    #[arg(long)]
    game: Option<String>,
    /// Matrix dimension for the family
    #[arg(long)]
    dim: Option<usize>,
    /// Algorithm: fp | ofp | afp
    #[arg(long)]
    algo: Option<String>,
    /// Tiebreak rule: lexicographic | random[:seed]
    #[arg(long)]
    tiebreak: Option<String>,
    /// Base seed for matrices, initializations, and random tiebreaking
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random initializations (table)
    #[arg(long)]
    inits: Option<u32>,
    /// Horizon T
    #[arg(long)]
    steps: Option<u64>,
    /// Initialization: random | vertex:i,j | mixed:p1,..[;q1,..]
    #[arg(long)]
    init_mode: Option<String>,
    /// Output directory (default: $FPSIM_OUT_DIR or ./out)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Output formats, comma separated: csv,json
    #[arg(long)]
    format: Option<String>,
    /// Inline check suites, comma separated: core,subspace,afp
    #[arg(long)]
    checks: Option<String>,
    /// Worker threads for batch runs (0 = rayon default)
    #[arg(long)]
    threads: Option<usize>,
    /// Corrupt the trace before checking (checker sensitivity test)
    #[arg(long, default_value_t = false)]
    fault_inject: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration; write a per-step CSV trace and a JSON summary
    Run(CommonFlags),
    /// Aggregate final regret over random initializations per (family, dim, algo)
    Table {
        #[command(flatten)]
        flags: CommonFlags,
        /// Comma-separated dimensions (default 15,25,50)
        #[arg(long)]
        dims: Option<String>,
        /// Comma-separated families (default identity,rps,random01)
        #[arg(long)]
        families: Option<String>,
    },
    /// Run the invariant suites; nonzero exit on any violation
    Verify(CommonFlags),
}

fn build_config(flags: &CommonFlags) -> fpsim::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &flags.config {
        let settings = parse_config_file(path)?;
        apply_settings(&mut cfg, &settings)?;
    }
    let mut overrides = BTreeMap::new();
    if let Some(v) = &flags.game {
        overrides.insert("game".to_string(), v.clone());
    }
    if let Some(v) = flags.dim {
        overrides.insert("dim".to_string(), v.to_string());
    }
    if let Some(v) = &flags.algo {
        overrides.insert("algo".to_string(), v.clone());
    }
    if let Some(v) = &flags.tiebreak {
        overrides.insert("tiebreak".to_string(), v.clone());
    }
    if let Some(v) = flags.seed {
        overrides.insert("seed".to_string(), v.to_string());
    }
    if let Some(v) = flags.inits {
        overrides.insert("inits".to_string(), v.to_string());
    }
    if let Some(v) = flags.steps {
        overrides.insert("steps".to_string(), v.to_string());
    }
    if let Some(v) = &flags.init_mode {
        overrides.insert("init_mode".to_string(), v.clone());
    }
    if let Some(v) = &flags.out_dir {
        overrides.insert("out_dir".to_string(), v.display().to_string());
    }
    if let Some(v) = &flags.format {
        overrides.insert("format".to_string(), v.clone());
    }
    if let Some(v) = &flags.checks {
        overrides.insert("checks".to_string(), v.clone());
    }
    if let Some(v) = flags.threads {
        overrides.insert("threads".to_string(), v.to_string());
    }
    if flags.fault_inject {
        overrides.insert("fault_inject".to_string(), "true".to_string());
    }
    apply_settings(&mut cfg, &overrides)?;
    Ok(cfg)
}

fn real_main() -> fpsim::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(flags) => {
            let cfg = build_config(&flags)?;
            let out = cmd_run(&cfg)?;
            if let Some(p) = &out.csv_path {
                eprintln!("trace:   {}", p.display());
            }
            if let Some(p) = &out.json_path {
                eprintln!("summary: {}", p.display());
            }
            println!("final regret: {:.6}", out.final_regret);
            for s in &out.suites {
                println!("suite {}: {} violations", s.suite, s.violations.len());
            }
            Ok(out.total_violations == 0)
        }
        Command::Table {
            flags,
            dims,
            families,
        } => {
            let cfg = build_config(&flags)?;
            let dims: Vec<usize> = match dims {
                Some(list) => list
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| fpsim::Error::Config(format!("bad dim `{s}`")))
                    })
                    .collect::<fpsim::Result<_>>()?,
                None => vec![15, 25, 50],
            };
            let families: Vec<GameSpec> = match families {
                Some(list) => list
                    .split(',')
                    .map(|s| parse_game(s.trim(), Some(dims[0]), None, cfg.seed))
                    .collect::<fpsim::Result<_>>()?,
                None => vec![
                    GameSpec::Identity { n: dims[0] },
                    GameSpec::Rps {
                        n: dims[0],
                        scale: 1.0,
                    },
                    GameSpec::RandomUnit {
                        n: dims[0],
                        seed: cfg.seed,
                    },
                ],
            };
            let algos = match cfg.algo {
                Algo::Afp => vec![Algo::Afp],
                _ => vec![Algo::Fp, Algo::Ofp],
            };
            let out = cmd_table(&cfg, &families, &dims, &algos)?;
            print!("{}", out.text);
            if let Some(p) = &out.json_path {
                eprintln!("table json: {}", p.display());
            }
            Ok(true)
        }
        Command::Verify(flags) => {
            let cfg = build_config(&flags)?;
            let out = cmd_verify(&cfg)?;
            for s in &out.suites {
                println!("suite {}: {} violations", s.suite, s.violations.len());
                for (k, v) in s.stats.iter() {
                    println!("  {k} = {v:.6}");
                }
                for v in s.violations.iter().take(5) {
                    println!("  [{}] t={}: {}", v.kind, v.step, v.detail);
                }
            }
            if let Some(p) = &out.json_path {
                eprintln!("report: {}", p.display());
            }
            Ok(out.total_violations == 0)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
