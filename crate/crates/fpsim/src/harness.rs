//! Experiment harness behind the CLI: run configuration (flat key-value
//! files plus flag overrides), single runs with CSV traces and JSON
//! summaries, batch tables over random initializations, and the invariant
//! verification suites. Identical configurations produce byte-identical
//! output files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::afp::{
    decompose_phases, fit_loglog_slope, mp_golden_trace, run_afp_subspace, verify_lb_ingredients,
};
use crate::dynamics::{run_alternating_with, run_with, Algo, PlayMode, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::game::{normalize_2x2, GameMatrix, MixedStrategy};
use crate::generators::{make, random_simplex, GameSpec};
use crate::regret::{alternating_regret, energy_full, regret, time_average_gap};
use crate::report::{SuiteReport, Violation};
use crate::rng::{derive_seed, GENERATOR_ID};
use crate::subspace::{check_cycling_invariants, energy_bound, psi, SubspaceParams};
use crate::tiebreak::{TiebreakRule, Tiebreaker};

/// Serializable tiebreak selection (the callback variant is API-only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TiebreakSpec {
    Lexicographic,
    Random { seed: u64 },
}

impl TiebreakSpec {
    pub fn rule(self) -> TiebreakRule {
        match self {
            TiebreakSpec::Lexicographic => TiebreakRule::Lexicographic,
            TiebreakSpec::Random { seed } => TiebreakRule::SeededRandom(seed),
        }
    }
}

/// Initialization policy for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitSpec {
    /// Seed-derived random simplex points (per-init streams).
    Random,
    /// Fixed vertex pair (e_i, e_j).
    Vertex { i: usize, j: usize },
    /// Explicit mixed strategies. `x2` is ignored under alternating play.
    Mixed { x1: Vec<f64>, x2: Vec<f64> },
}

/// Invariant suites that can run inline or under `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckSuite {
    /// Regret/energy/duality-gap identities on the recorded run.
    Core,
    /// 2x2 subspace invariants: cycling cases, energy bounds, projections.
    Subspace,
    /// Matching Pennies alternating-play analysis.
    Afp,
}

impl CheckSuite {
    pub fn name(self) -> &'static str {
        match self {
            CheckSuite::Core => "core",
            CheckSuite::Subspace => "subspace",
            CheckSuite::Afp => "afp",
        }
    }
}

/// Fully-resolved experiment configuration. A config plus the code version
/// determines every output byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub algo: Algo,
    pub tiebreak: TiebreakSpec,
    pub steps: u64,
    pub num_inits: u32,
    pub init: InitSpec,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub write_csv: bool,
    pub write_json: bool,
    pub checks: Vec<CheckSuite>,
    pub threads: usize,
    pub fault_inject: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            game: GameSpec::MatchingPennies,
            algo: Algo::Ofp,
            tiebreak: TiebreakSpec::Lexicographic,
            steps: 10_000,
            num_inits: 1,
            init: InitSpec::Random,
            seed: 0,
            out_dir: default_out_dir(),
            write_csv: true,
            write_json: true,
            checks: Vec::new(),
            threads: 0,
            fault_inject: false,
        }
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os("FPSIM_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Parse a flat `key = value` config file. Unknown keys are errors so
/// typos surface immediately.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}:{}: expected `key = value`, got `{raw}`",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Keys accepted in config files and as flag overrides.
pub const CONFIG_KEYS: &[&str] = &[
    "game", "dim", "scale", "algo", "tiebreak", "seed", "inits", "steps", "init_mode",
    "out_dir", "format", "checks", "threads", "fault_inject",
];

/// Apply textual key-value settings onto a config.
pub fn apply_settings(
    cfg: &mut ExperimentConfig,
    settings: &BTreeMap<String, String>,
) -> Result<()> {
    for key in settings.keys() {
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
    }
    let dim: Option<usize> = match settings.get("dim") {
        Some(v) => Some(
            v.parse()
                .map_err(|_| Error::Config(format!("bad dim `{v}`")))?,
        ),
        None => None,
    };
    let scale: Option<f64> = match settings.get("scale") {
        Some(v) => Some(
            v.parse()
                .map_err(|_| Error::Config(format!("bad scale `{v}`")))?,
        ),
        None => None,
    };
    if let Some(v) = settings.get("seed") {
        cfg.seed = v
            .parse()
            .map_err(|_| Error::Config(format!("bad seed `{v}`")))?;
    }
    if let Some(v) = settings.get("game") {
        cfg.game = parse_game(v, dim, scale, cfg.seed)?;
    } else if dim.is_some() || scale.is_some() {
        // re-derive the current family with the new dimension or scale
        let name = cfg.game.family_name().to_string();
        cfg.game = parse_game(&name, dim, scale, cfg.seed)?;
    }
    if let Some(v) = settings.get("algo") {
        cfg.algo = match v.to_lowercase().as_str() {
            "fp" => Algo::Fp,
            "ofp" => Algo::Ofp,
            "afp" => Algo::Afp,
            other => return Err(Error::Config(format!("unknown algo `{other}`"))),
        };
    }
    if let Some(v) = settings.get("tiebreak") {
        cfg.tiebreak = match v.to_lowercase().as_str() {
            "lexicographic" | "lex" => TiebreakSpec::Lexicographic,
            "random" => TiebreakSpec::Random { seed: cfg.seed },
            other => {
                if let Some(seed) = other.strip_prefix("random:") {
                    TiebreakSpec::Random {
                        seed: seed
                            .parse()
                            .map_err(|_| Error::Config(format!("bad tiebreak seed `{seed}`")))?,
                    }
                } else {
                    return Err(Error::Config(format!("unknown tiebreak `{other}`")));
                }
            }
        };
    }
    if let Some(v) = settings.get("inits") {
        cfg.num_inits = v
            .parse()
            .map_err(|_| Error::Config(format!("bad inits `{v}`")))?;
    }
    if let Some(v) = settings.get("steps") {
        cfg.steps = v
            .parse()
            .map_err(|_| Error::Config(format!("bad steps `{v}`")))?;
    }
    if let Some(v) = settings.get("init_mode") {
        cfg.init = parse_init(v)?;
    }
    if let Some(v) = settings.get("out_dir") {
        cfg.out_dir = PathBuf::from(v);
    }
    if let Some(v) = settings.get("format") {
        cfg.write_csv = false;
        cfg.write_json = false;
        for part in v.split(',') {
            match part.trim() {
                "csv" => cfg.write_csv = true,
                "json" => cfg.write_json = true,
                other => return Err(Error::Config(format!("unknown format `{other}`"))),
            }
        }
    }
    if let Some(v) = settings.get("checks") {
        cfg.checks.clear();
        for part in v.split(',').filter(|s| !s.trim().is_empty()) {
            cfg.checks.push(match part.trim() {
                "core" => CheckSuite::Core,
                "subspace" => CheckSuite::Subspace,
                "afp" => CheckSuite::Afp,
                other => return Err(Error::Config(format!("unknown check suite `{other}`"))),
            });
        }
    }
    if let Some(v) = settings.get("threads") {
        cfg.threads = v
            .parse()
            .map_err(|_| Error::Config(format!("bad threads `{v}`")))?;
    }
    if let Some(v) = settings.get("fault_inject") {
        cfg.fault_inject = v
            .parse()
            .map_err(|_| Error::Config(format!("bad fault_inject `{v}`")))?;
    }
    Ok(())
}

pub fn parse_game(
    name: &str,
    dim: Option<usize>,
    scale: Option<f64>,
    seed: u64,
) -> Result<GameSpec> {
    let (base, inline) = match name.split_once(':') {
        Some((b, rest)) => (b, Some(rest)),
        None => (name, None),
    };
    let n = dim.unwrap_or(15);
    match base.to_lowercase().as_str() {
        "mp" | "matching_pennies" => Ok(GameSpec::MatchingPennies),
        "identity" => Ok(GameSpec::Identity { n }),
        "rps" => {
            let s = match inline {
                Some(txt) => txt
                    .parse()
                    .map_err(|_| Error::Config(format!("bad rps scale `{txt}`")))?,
                None => scale.unwrap_or(1.0),
            };
            Ok(GameSpec::Rps { n, scale: s })
        }
        "random" | "random_unit" | "random01" => Ok(GameSpec::RandomUnit { n, seed }),
        "a41" | "a41_random" => Ok(GameSpec::Assumption41Random { seed }),
        other => Err(Error::Config(format!("unknown game family `{other}`"))),
    }
}

pub fn parse_init(text: &str) -> Result<InitSpec> {
    if text == "random" {
        return Ok(InitSpec::Random);
    }
    if let Some(rest) = text.strip_prefix("vertex:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::Config(format!("vertex init needs `vertex:i,j`, got `{text}`")));
        }
        let i = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad vertex index `{}`", parts[0])))?;
        let j = parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad vertex index `{}`", parts[1])))?;
        return Ok(InitSpec::Vertex { i, j });
    }
    if let Some(rest) = text.strip_prefix("mixed:") {
        let lists: Vec<&str> = rest.split(';').collect();
        let parse_list = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad probability `{v}`")))
                })
                .collect()
        };
        let x1 = parse_list(lists[0])?;
        let x2 = if lists.len() > 1 {
            parse_list(lists[1])?
        } else {
            Vec::new()
        };
        return Ok(InitSpec::Mixed { x1, x2 });
    }
    Err(Error::Config(format!("unknown init mode `{text}`")))
}

fn resolve_inits(
    cfg: &ExperimentConfig,
    a: &GameMatrix,
    init_index: u32,
) -> Result<(MixedStrategy, MixedStrategy)> {
    match &cfg.init {
        InitSpec::Random => {
            let s1 = derive_seed(cfg.seed, 2 * u64::from(init_index));
            let s2 = derive_seed(cfg.seed, 2 * u64::from(init_index) + 1);
            Ok((random_simplex(a.m(), s1)?, random_simplex(a.n(), s2)?))
        }
        InitSpec::Vertex { i, j } => Ok((
            MixedStrategy::vertex(a.m(), *i)?,
            MixedStrategy::vertex(a.n(), *j)?,
        )),
        InitSpec::Mixed { x1, x2 } => {
            let m1 = MixedStrategy::new(x1.clone())?;
            let m2 = if x2.is_empty() {
                MixedStrategy::uniform(a.n())?
            } else {
                MixedStrategy::new(x2.clone())?
            };
            Ok((m1, m2))
        }
    }
}

fn run_one(
    cfg: &ExperimentConfig,
    a: &GameMatrix,
    init_index: u32,
) -> Result<TrajectoryRecord> {
    let rule = cfg.tiebreak.rule();
    // per-init tiebreak streams so parallel inits stay independent
    let mut tb1 = match cfg.tiebreak {
        TiebreakSpec::Random { seed } => Tiebreaker::new(
            &TiebreakRule::SeededRandom(derive_seed(seed, 1_000_000 + u64::from(init_index))),
            0,
        ),
        _ => Tiebreaker::new(&rule, 0),
    };
    let mut tb2 = match cfg.tiebreak {
        TiebreakSpec::Random { seed } => Tiebreaker::new(
            &TiebreakRule::SeededRandom(derive_seed(seed, 1_000_000 + u64::from(init_index))),
            1,
        ),
        _ => Tiebreaker::new(&rule, 1),
    };
    match cfg.algo {
        Algo::Afp => {
            let (x1, _) = resolve_inits(cfg, a, init_index)?;
            run_alternating_with(a, x1, cfg.steps, &mut tb1, &mut tb2)
        }
        algo => {
            let x0 = resolve_inits(cfg, a, init_index)?;
            run_with(a, algo, x0, cfg.steps, &mut tb1, &mut tb2)
        }
    }
}

/// Format a real with 17 significant digits (round-trip exact).
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write the per-step CSV trace: one row per recorded step with the
/// running regret split, the subspace energy and region for 2x2
/// normal-form games, and any violation flags raised at that step.
fn write_csv_trace(
    path: &Path,
    a: &GameMatrix,
    traj: &TrajectoryRecord,
    flags: &BTreeMap<u64, Vec<String>>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("t,reg_total,reg1,reg2,psi,region,violation_flags\n");
    // running payoff sums for the per-player split
    let mut paid = 0.0;
    for t in traj.first_t()..=traj.steps {
        let x1 = traj.x1_at(t);
        let x2 = traj.x2_at(t);
        let ax2 = a.mul_col(x2)?;
        paid += x1.iter().zip(&ax2).map(|(p, q)| p * q).sum::<f64>();
        let (y1n, y2n) = traj.dual_at(t + 1);
        let best1 = y1n.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let best2 = y2n.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let reg1 = best1 - paid;
        let reg2 = best2 + paid;
        let psi_txt = traj
            .psi
            .as_ref()
            .map(|p| fmt_f64(p[t as usize]))
            .unwrap_or_default();
        let region_txt = traj
            .regions
            .as_ref()
            .map(|r| r[t as usize].as_str().to_string())
            .unwrap_or_default();
        let flag_txt = flags
            .get(&t)
            .map(|f| f.join(";"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{t},{},{},{},{psi_txt},{region_txt},{flag_txt}",
            fmt_f64(traj.reg_running[t as usize]),
            fmt_f64(reg1),
            fmt_f64(reg2),
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// Aggregate over random initializations. `runtime_ms` is informational
/// and deliberately left out of the serialized form so identical configs
/// produce identical bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub mean_regret: f64,
    pub std_regret: f64,
    pub per_init_regret: Vec<f64>,
    pub violations: BTreeMap<String, u64>,
    #[serde(skip)]
    pub runtime_ms: u128,
}

impl SummaryRecord {
    fn from_finals(finals: Vec<f64>, violations: BTreeMap<String, u64>, runtime_ms: u128) -> Self {
        let n = finals.len() as f64;
        let mean = finals.iter().sum::<f64>() / n;
        // population standard deviation: well-defined for a single init
        let var = finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        SummaryRecord {
            mean_regret: mean,
            std_regret: var.sqrt(),
            per_init_regret: finals,
            violations,
            runtime_ms,
        }
    }
}

#[derive(Debug, Serialize)]
struct RunSummaryFile<'a> {
    config: &'a ExperimentConfig,
    rng: &'static str,
    final_regret: f64,
    final_reg1: f64,
    final_reg2: f64,
    final_energy: f64,
    time_average_gap: f64,
    total_violations: u64,
    violations_by_suite: BTreeMap<String, u64>,
}

/// Output of the `run` command.
#[derive(Debug)]
pub struct RunOutput {
    pub csv_path: Option<PathBuf>,
    pub json_path: Option<PathBuf>,
    pub final_regret: f64,
    pub total_violations: u64,
    pub suites: Vec<SuiteReport>,
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

/// Single-run command: simulate, optionally run inline check suites,
/// write the CSV trace and JSON summary.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    if cfg.steps == 0 {
        return Err(Error::Config("steps must be >= 1".into()));
    }
    if cfg.algo == Algo::Afp && cfg.steps % 2 != 0 {
        return Err(Error::Config("alternating play needs an even horizon".into()));
    }
    let a = make(&cfg.game)?;
    let traj = run_one(cfg, &a, 0)?;

    let mut suites = Vec::new();
    for suite in &cfg.checks {
        suites.push(run_suite(*suite, cfg, &a, &traj)?);
    }
    let total_violations: u64 = suites.iter().map(|s| s.violations.len() as u64).sum();

    let horizon = cfg.steps;
    let (breakdown, gap) = match cfg.algo {
        Algo::Afp => (
            alternating_regret(&a, &traj, horizon)?,
            time_average_gap(&a, &traj, horizon, PlayMode::Alternating)?,
        ),
        _ => (
            regret(&a, &traj, horizon)?,
            time_average_gap(&a, &traj, horizon, PlayMode::Simultaneous)?,
        ),
    };
    let energy = energy_full(&traj.final_y1, &traj.final_y2)?;

    fs::create_dir_all(&cfg.out_dir)?;
    let stem = format!(
        "{}_{}_{}x{}_t{}",
        cfg.algo.as_str(),
        cfg.game.family_name(),
        a.m(),
        a.n(),
        cfg.steps
    );
    let mut csv_path = None;
    if cfg.write_csv {
        let path = cfg.out_dir.join(format!("{stem}_trace.csv"));
        let mut flags: BTreeMap<u64, Vec<String>> = BTreeMap::new();
        for s in &suites {
            for v in &s.violations {
                flags.entry(v.step).or_default().push(v.kind.clone());
            }
        }
        write_csv_trace(&path, &a, &traj, &flags)?;
        csv_path = Some(path);
    }
    let mut json_path = None;
    if cfg.write_json {
        let path = cfg.out_dir.join(format!("{stem}_summary.json"));
        let by_suite: BTreeMap<String, u64> = suites
            .iter()
            .map(|s| (s.suite.clone(), s.violations.len() as u64))
            .collect();
        let file = RunSummaryFile {
            config: cfg,
            rng: GENERATOR_ID,
            final_regret: breakdown.total,
            final_reg1: breakdown.reg1,
            final_reg2: breakdown.reg2,
            final_energy: energy,
            time_average_gap: gap,
            total_violations,
            violations_by_suite: by_suite,
        };
        fs::write(&path, serde_json::to_string_pretty(&file)? + "\n")?;
        json_path = Some(path);
    }
    Ok(RunOutput {
        csv_path,
        json_path,
        final_regret: breakdown.total,
        total_violations,
        suites,
    })
}

/// One cell of the batch table.
#[derive(Debug, Clone, Serialize)]
pub struct TableCell {
    pub family: String,
    pub dim: usize,
    pub algo: Algo,
    pub summary: SummaryRecord,
}

/// Output of the `table` command.
#[derive(Debug)]
pub struct TableOutput {
    pub cells: Vec<TableCell>,
    pub json_path: Option<PathBuf>,
    pub text: String,
}

/// Batch command: for each (family, dim, algo) cell run `num_inits`
/// seed-derived random initializations in parallel and aggregate the final
/// regrets. Results are merged in init order, so output is independent of
/// scheduling.
pub fn cmd_table(
    cfg: &ExperimentConfig,
    families: &[GameSpec],
    dims: &[usize],
    algos: &[Algo],
) -> Result<TableOutput> {
    if cfg.num_inits == 0 {
        return Err(Error::Config("table needs inits >= 1".into()));
    }
    let started = Instant::now();
    let mut cells = Vec::new();
    for family in families {
        for &dim in dims {
            let game = respecify(family, dim, cfg.seed)?;
            let a = make(&game)?;
            for &algo in algos {
                let cell_cfg = ExperimentConfig {
                    game: game.clone(),
                    algo,
                    ..cfg.clone()
                };
                let finals: Result<Vec<f64>> = in_pool(cfg.threads, || {
                    (0..cfg.num_inits)
                        .into_par_iter()
                        .map(|idx| {
                            let traj = run_one(&cell_cfg, &a, idx)?;
                            let r = match algo {
                                Algo::Afp => alternating_regret(&a, &traj, cfg.steps)?,
                                _ => regret(&a, &traj, cfg.steps)?,
                            };
                            Ok(r.total)
                        })
                        .collect()
                });
                let summary = SummaryRecord::from_finals(
                    finals?,
                    BTreeMap::new(),
                    started.elapsed().as_millis(),
                );
                cells.push(TableCell {
                    family: game.family_name().to_string(),
                    dim,
                    algo,
                    summary,
                });
            }
        }
    }

    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<16} {:>5} {:>5} {:>12} {:>10}  (T = {}, {} inits, tiebreak {:?})",
        "family", "dim", "algo", "mean_regret", "std", cfg.steps, cfg.num_inits, cfg.tiebreak
    );
    for c in &cells {
        let _ = writeln!(
            text,
            "{:<16} {:>5} {:>5} {:>12.3} {:>10.3}",
            c.family,
            c.dim,
            c.algo.as_str(),
            c.summary.mean_regret,
            c.summary.std_regret
        );
    }

    let mut json_path = None;
    if cfg.write_json {
        fs::create_dir_all(&cfg.out_dir)?;
        let path = cfg.out_dir.join("table.json");
        #[derive(Serialize)]
        struct TableFile<'a> {
            config: &'a ExperimentConfig,
            rng: &'static str,
            cells: &'a [TableCell],
        }
        let file = TableFile {
            config: cfg,
            rng: GENERATOR_ID,
            cells: &cells,
        };
        fs::write(&path, serde_json::to_string_pretty(&file)? + "\n")?;
        json_path = Some(path);
    }
    Ok(TableOutput {
        cells,
        json_path,
        text,
    })
}

fn respecify(family: &GameSpec, dim: usize, seed: u64) -> Result<GameSpec> {
    Ok(match family {
        GameSpec::MatchingPennies => GameSpec::MatchingPennies,
        GameSpec::Identity { .. } => GameSpec::Identity { n: dim },
        GameSpec::Rps { scale, .. } => GameSpec::Rps {
            n: dim,
            scale: *scale,
        },
        GameSpec::RandomUnit { .. } => GameSpec::RandomUnit { n: dim, seed },
        GameSpec::Assumption41Random { .. } => GameSpec::Assumption41Random { seed },
    })
}

/// Output of the `verify` command.
#[derive(Debug)]
pub struct VerifyOutput {
    pub suites: Vec<SuiteReport>,
    pub json_path: Option<PathBuf>,
    pub total_violations: u64,
}

/// Verification command: run the requested invariant suites against a
/// fresh run of the configured game. With fault injection enabled, the
/// recorded trace is corrupted mid-way first, to prove the checkers can
/// fail.
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<VerifyOutput> {
    let a = make(&cfg.game)?;
    let checks = if cfg.checks.is_empty() {
        match cfg.algo {
            Algo::Afp => vec![CheckSuite::Core, CheckSuite::Afp],
            _ => vec![CheckSuite::Core, CheckSuite::Subspace],
        }
    } else {
        cfg.checks.clone()
    };
    for suite in &checks {
        match suite {
            CheckSuite::Subspace => {
                if !a.is_2x2() {
                    return Err(Error::Config(
                        "subspace checks need a 2x2 game".into(),
                    ));
                }
            }
            CheckSuite::Afp => {
                if cfg.algo != Algo::Afp || cfg.game != GameSpec::MatchingPennies {
                    return Err(Error::Config(
                        "afp checks need the matching_pennies game under algo afp".into(),
                    ));
                }
            }
            CheckSuite::Core => {}
        }
    }

    let traj = run_one(cfg, &a, 0)?;
    let mut suites = Vec::new();
    for suite in checks {
        suites.push(run_suite(suite, cfg, &a, &traj)?);
    }
    let total: u64 = suites.iter().map(|s| s.violations.len() as u64).sum();

    let mut json_path = None;
    if cfg.write_json {
        fs::create_dir_all(&cfg.out_dir)?;
        let path = cfg.out_dir.join("verify_report.json");
        #[derive(Serialize)]
        struct VerifyFile<'a> {
            config: &'a ExperimentConfig,
            rng: &'static str,
            total_violations: u64,
            suites: &'a [SuiteReport],
        }
        let file = VerifyFile {
            config: cfg,
            rng: GENERATOR_ID,
            total_violations: total,
            suites: &suites,
        };
        fs::write(&path, serde_json::to_string_pretty(&file)? + "\n")?;
        json_path = Some(path);
    }
    Ok(VerifyOutput {
        suites,
        json_path,
        total_violations: total,
    })
}

fn run_suite(
    suite: CheckSuite,
    cfg: &ExperimentConfig,
    a: &GameMatrix,
    traj: &TrajectoryRecord,
) -> Result<SuiteReport> {
    match suite {
        CheckSuite::Core => core_suite(cfg, a, traj),
        CheckSuite::Subspace => subspace_suite(cfg, a, traj),
        CheckSuite::Afp => afp_suite(cfg),
    }
}

/// Regret = energy identity, time-average-gap identity, and dual-sum
/// consistency on the recorded trajectory.
fn core_suite(
    cfg: &ExperimentConfig,
    a: &GameMatrix,
    traj: &TrajectoryRecord,
) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("core");
    let horizon = cfg.steps;
    let (total, mode) = match cfg.algo {
        Algo::Afp => (
            alternating_regret(a, traj, horizon)?.total,
            PlayMode::Alternating,
        ),
        _ => (regret(a, traj, horizon)?.total, PlayMode::Simultaneous),
    };
    let energy = energy_full(&traj.final_y1, &traj.final_y2)?;
    let tol = 1e-6;
    if (total - energy).abs() > tol {
        report.violations.push(
            Violation::new("regret-energy-identity", horizon)
                .detail(format!("regret {total} vs energy {energy}"))
                .data("regret", total)
                .data("energy", energy),
        );
    }
    let gap = time_average_gap(a, traj, horizon, mode)?;
    let want = total / horizon as f64;
    if (gap - want).abs() > 1e-9 * (1.0 + want.abs()) {
        report.violations.push(
            Violation::new("gap-identity", horizon)
                .detail(format!("time-average gap {gap} vs regret/T {want}")),
        );
    }
    // dual-sum consistency at sampled steps
    let samples: Vec<u64> = (0..=horizon).step_by((horizon as usize / 64).max(1)).collect();
    let mut s1 = vec![0.0; a.m()];
    let mut s2 = vec![0.0; a.n()];
    let mut next = 0usize;
    for t in traj.first_t()..=horizon {
        if next < samples.len() && samples[next] == t {
            let y1 = traj.y1_at(t);
            let y2 = traj.y2_at(t);
            let bad1 = s1.iter().zip(y1).any(|(s, y)| (s - y).abs() > 1e-9);
            let bad2 = s2.iter().zip(y2).any(|(s, y)| (s - y).abs() > 1e-9);
            if bad1 || bad2 {
                report.violations.push(
                    Violation::new("dual-sum-consistency", t)
                        .detail("recorded duals diverge from recomputed sums".into()),
                );
            }
            next += 1;
        }
        let ax2 = a.mul_col(traj.x2_at(t))?;
        let atx1 = a.mul_row(traj.x1_at(t))?;
        for (s, d) in s1.iter_mut().zip(&ax2) {
            *s += d;
        }
        for (s, d) in s2.iter_mut().zip(&atx1) {
            *s -= d;
        }
    }
    report.stat("final_regret", total);
    report.stat("final_energy", energy);
    Ok(report)
}

/// Subspace invariants of an optimistic run on a 2x2 game: projection
/// equivalence psi = Psi, the subspace linear relation, cycling
/// invariants above threshold B, the crossing cap B', and the worst-case
/// energy bound. Fault injection corrupts one dual coordinate halfway.
fn subspace_suite(
    cfg: &ExperimentConfig,
    a: &GameMatrix,
    traj: &TrajectoryRecord,
) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("subspace");
    let norm = if a.satisfies_normal_form() {
        None
    } else {
        Some(normalize_2x2(a)?)
    };
    let (game, traj_owned);
    let (game_ref, traj_ref): (&GameMatrix, &TrajectoryRecord) = match &norm {
        None => (a, traj),
        Some(n) => {
            // re-run on the normalized game; original runs cannot be
            // projected because the subspace relation needs det = 0
            game = n.transformed.clone();
            let cfg2 = ExperimentConfig {
                game: cfg.game.clone(),
                ..cfg.clone()
            };
            traj_owned = run_one(&cfg2, &game, 0)?;
            (&game, &traj_owned)
        }
    };
    let params = SubspaceParams::from_game(game_ref)?;
    let mut zs: Vec<[f64; 2]> = (1..=traj_ref.steps + 1)
        .map(|t| traj_ref.z_at(t))
        .collect();
    if cfg.fault_inject {
        // deliberate corruption: shove one iterate far out of its cell
        let mid = zs.len() / 2;
        zs[mid][0] += 11.0 * params.a_max.max(1.0) + 17.0;
    }

    // psi/Psi equivalence and the subspace linear relation
    let mut max_dev: f64 = 0.0;
    for t in 1..=traj_ref.steps {
        let (y1, y2) = traj_ref.dual_at(t);
        let e = energy_full(y1, y2)?;
        let ps = psi(traj_ref.z_at(t), &params);
        max_dev = max_dev.max((e - ps).abs());
        let tol = 1e-9 * (t as f64) * params.a_max;
        if (y1[1] + params.rho1 * y1[0]).abs() > tol
            || (y2[1] + params.rho2 * y2[0]).abs() > tol
        {
            report.violations.push(
                Violation::new("subspace-relation", t)
                    .detail("dual coordinates left the rho-subspace".into()),
            );
        }
    }
    if max_dev > 1e-6 {
        report.violations.push(
            Violation::new("energy-equivalence", traj_ref.steps)
                .detail(format!("max |Psi - psi| = {max_dev}"))
                .data("max_dev", max_dev),
        );
    }
    report.stat("max_energy_deviation", max_dev);

    // cycling invariants, crossing cap
    let cyc = check_cycling_invariants(&zs, &params);
    report.stat("max_psi", cyc.max_psi);
    report.stat("steps_above_threshold", cyc.steps_above_threshold as f64);
    report.stat("crossings", cyc.crossings as f64);
    report.violations.extend(cyc.violations);

    // worst-case energy bound
    let bound = energy_bound(params.a_max, params.a_gap)?;
    report.stat("energy_bound", bound);
    let max_psi = zs
        .iter()
        .map(|&z| psi(z, &params))
        .fold(f64::NEG_INFINITY, f64::max);
    if cfg.algo == Algo::Ofp && max_psi > bound + 1e-9 {
        report.violations.push(
            Violation::new("global-energy-bound", traj_ref.steps)
                .detail(format!("max psi {max_psi} exceeds bound {bound}"))
                .data("max_psi", max_psi)
                .data("bound", bound),
        );
    }
    Ok(report)
}

/// Matching Pennies alternating-play suite: golden opening trace, phase
/// structure, lower-bound ingredients, and the regret growth exponent.
fn afp_suite(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("afp");
    let p = match &cfg.init {
        InitSpec::Mixed { x1, .. } if !x1.is_empty() => x1[0],
        _ => std::f64::consts::FRAC_PI_4,
    };
    let rule = cfg.tiebreak.rule();
    let run = run_afp_subspace(p, cfg.steps.max(8), &rule)?;

    let golden = mp_golden_trace(p);
    for (offset, want) in golden.iter().enumerate() {
        let t = 3 + offset as u64;
        let got = run.z(t);
        let dev = (got[0] - want[0]).abs().max((got[1] - want[1]).abs());
        let dev = if cfg.fault_inject { dev + 1.0 } else { dev };
        if dev > 1e-12 {
            report.violations.push(
                Violation::new("golden-trace", t)
                    .detail(format!("z^{t} = {got:?}, expected {want:?}"))
                    .data("deviation", dev),
            );
        }
    }

    let phases = decompose_phases(&run)?;
    let tau_sum: u64 = phases.iter().map(|ph| ph.tau).sum();
    if tau_sum != run.steps {
        report.violations.push(
            Violation::new("phase-partition", run.steps)
                .detail(format!("phase lengths sum to {tau_sum}, expected {}", run.steps)),
        );
    }
    let lb = verify_lb_ingredients(&run)?;
    report.stat("phases", lb.phases as f64);
    report.stat("qualifying_increases", lb.qualifying_increases as f64);
    report.stat("max_phase_increase", lb.max_phase_increase);
    report.stat("mean_tau_ratio", lb.mean_tau_ratio);
    report.stat("final_psi", lb.final_psi);
    report.violations.extend(lb.violations);

    // growth exponent over trailing decades when the horizon allows
    if cfg.steps >= 10_000 {
        let params = crate::afp::afp_mp_params();
        let mut pts = Vec::new();
        let mut t = cfg.steps;
        while t >= 1000 && pts.len() < 4 {
            let r = run_afp_subspace(p, t, &rule)?;
            pts.push((t as f64, r.psi_at(t + 1, &params)));
            t /= 10;
        }
        pts.reverse();
        let slope = fit_loglog_slope(&pts)?;
        report.stat("regret_exponent", slope);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("fpsim_test_{tag}_{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tmpdir("cfg");
        let path = dir.join("exp.cfg");
        fs::write(
            &path,
            "# comment\ngame = identity\ndim = 4\nalgo = fp\nsteps = 64\nseed = 5\ninits = 2\n",
        )
        .unwrap();
        let settings = parse_config_file(&path).unwrap();
        let mut cfg = ExperimentConfig::default();
        apply_settings(&mut cfg, &settings).unwrap();
        assert_eq!(cfg.game, GameSpec::Identity { n: 4 });
        assert_eq!(cfg.algo, Algo::Fp);
        assert_eq!(cfg.steps, 64);
        assert_eq!(cfg.num_inits, 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        let mut settings = BTreeMap::new();
        settings.insert("stepz".to_string(), "10".to_string());
        assert!(apply_settings(&mut cfg, &settings).is_err());
    }

    #[test]
    fn run_outputs_are_byte_identical() {
        let dir = tmpdir("repro");
        let cfg = ExperimentConfig {
            game: GameSpec::Identity { n: 4 },
            algo: Algo::Ofp,
            tiebreak: TiebreakSpec::Random { seed: 11 },
            steps: 200,
            init: InitSpec::Random,
            seed: 7,
            out_dir: dir.clone(),
            checks: vec![CheckSuite::Core],
            ..Default::default()
        };
        let out1 = cmd_run(&cfg).unwrap();
        let csv1 = fs::read(out1.csv_path.as_ref().unwrap()).unwrap();
        let json1 = fs::read(out1.json_path.as_ref().unwrap()).unwrap();
        let out2 = cmd_run(&cfg).unwrap();
        let csv2 = fs::read(out2.csv_path.as_ref().unwrap()).unwrap();
        let json2 = fs::read(out2.json_path.as_ref().unwrap()).unwrap();
        assert_eq!(csv1, csv2);
        assert_eq!(json1, json2);
    }

    #[test]
    fn run_rejects_zero_steps() {
        let cfg = ExperimentConfig {
            steps: 0,
            ..Default::default()
        };
        assert!(matches!(cmd_run(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn summary_moments_recompute() {
        let s = SummaryRecord::from_finals(vec![1.0, 2.0, 3.0, 4.0], BTreeMap::new(), 0);
        let mean = s.per_init_regret.iter().sum::<f64>() / 4.0;
        assert!((s.mean_regret - mean).abs() < 1e-12);
        let var = s
            .per_init_regret
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / 4.0;
        assert!((s.std_regret - var.sqrt()).abs() < 1e-12);
        let single = SummaryRecord::from_finals(vec![5.0], BTreeMap::new(), 0);
        assert_eq!(single.std_regret, 0.0);
    }

    #[test]
    fn verify_clean_and_fault_injected() {
        let dir = tmpdir("verify");
        let cfg = ExperimentConfig {
            game: GameSpec::MatchingPennies,
            algo: Algo::Ofp,
            steps: 2000,
            init: InitSpec::Vertex { i: 0, j: 0 },
            out_dir: dir.clone(),
            checks: vec![CheckSuite::Core, CheckSuite::Subspace],
            ..Default::default()
        };
        let clean = cmd_verify(&cfg).unwrap();
        assert_eq!(clean.total_violations, 0, "{:#?}", clean.suites);

        let faulty = ExperimentConfig {
            fault_inject: true,
            ..cfg
        };
        let out = cmd_verify(&faulty).unwrap();
        assert!(out.total_violations > 0);
    }

    #[test]
    fn verify_rejects_incompatible_suite() {
        let cfg = ExperimentConfig {
            game: GameSpec::Identity { n: 5 },
            checks: vec![CheckSuite::Subspace],
            ..Default::default()
        };
        assert!(cmd_verify(&cfg).is_err());
    }

    #[test]
    fn table_cells_are_deterministic_across_thread_counts() {
        let dir = tmpdir("table");
        let base = ExperimentConfig {
            steps: 300,
            num_inits: 6,
            seed: 3,
            out_dir: dir,
            write_csv: false,
            write_json: false,
            ..Default::default()
        };
        let families = [GameSpec::Identity { n: 4 }];
        let dims = [4usize];
        let algos = [Algo::Fp, Algo::Ofp];
        let one = cmd_table(
            &ExperimentConfig {
                threads: 1,
                ..base.clone()
            },
            &families,
            &dims,
            &algos,
        )
        .unwrap();
        let many = cmd_table(
            &ExperimentConfig {
                threads: 4,
                ..base
            },
            &families,
            &dims,
            &algos,
        )
        .unwrap();
        for (a, b) in one.cells.iter().zip(&many.cells) {
            assert_eq!(a.summary.per_init_regret, b.summary.per_init_regret);
        }
    }
}
