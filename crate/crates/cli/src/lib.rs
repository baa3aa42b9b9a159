//! `pohp run | verify | inspect`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pohp::deviations::{enumerate_pure_strategies, DeviationKind, DEFAULT_PURE_BUDGET};
use pohp::games::bundled::{load_bundled, Bundled, BUNDLED_IDS};
use pohp::games::gadget::gadget_theorem1;
use pohp::games::{GameDescription, PohpFormGame};
use pohp::learners::{run_self_play, theorem1_experiment, CurveRow, LearnerConfig};
use pohp::oracle::run_verification_suite;
use pohp::{build_tree_index, PohpError, TreeConfig, TreeIndex};

pub const EXIT_OK: i32 = 0;
/// A verification check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Bad arguments, unknown game id, or a request the game cannot support.
pub const EXIT_BAD_ARGS: i32 = 2;
/// A game file could not be read or parsed.
pub const EXIT_LOAD: i32 = 3;
/// Node, enumeration, or iteration budget exceeded.
pub const EXIT_RESOURCE: i32 = 4;
/// Writing output failed.
pub const EXIT_IO: i32 = 5;

pub const CSV_HEADER: &str = "round,player,state,max_cum_immediate_regret,cum_full_regret,exploitability";

#[derive(Debug, Parser)]
#[command(name = "pohp", version, about = "Immediate-regret experiments on partially observable history processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run self-play learners and write regret curves as CSV.
    Run(RunArgs),
    /// Run the verification suite and print one JSON record per check.
    Verify(VerifyArgs),
    /// Summarize a game's information states.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Bundled game id or path to a game file.
    #[arg(long)]
    pub game: String,
    #[arg(long, default_value_t = 1000)]
    pub rounds: usize,
    /// external, counterfactual, or swap; the gadget only supports external.
    #[arg(long)]
    pub deviations: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Log every this many rounds; the last round is always logged.
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub game: String,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Largest number of tree nodes built per view.
    #[arg(long, env = "POHP_NODE_BUDGET")]
    pub node_budget: Option<usize>,
}

impl BudgetArgs {
    fn tree_config(&self) -> TreeConfig {
        let mut config = TreeConfig::default();
        if let Some(b) = self.node_budget {
            config.node_budget = b;
        }
        config
    }
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<PohpError> for CliError {
    fn from(e: PohpError) -> Self {
        let code = match &e {
            PohpError::Resource(_) => EXIT_RESOURCE,
            PohpError::Parse { .. } | PohpError::Structure(_) => EXIT_LOAD,
            _ => EXIT_BAD_ARGS,
        };
        CliError::new(code, e.to_string())
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::new(EXIT_IO, format!("{}: {e}", path.display()))
}

/// Everything `run` needs, validated.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub game: String,
    pub learner: LearnerConfig,
    pub rounds: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub stride: usize,
    pub tree: TreeConfig,
}

impl ExperimentConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self, CliError> {
        if args.stride == 0 {
            return Err(CliError::new(EXIT_BAD_ARGS, "--stride must be at least 1"));
        }
        let kind = match args.deviations.as_deref() {
            None => DeviationKind::Counterfactual,
            Some(name) => {
                let kind: DeviationKind = name.parse()?;
                if kind == DeviationKind::Internal {
                    return Err(CliError::new(EXIT_BAD_ARGS, "--deviations takes external, counterfactual, or swap"));
                }
                kind
            }
        };
        if args.game == "theorem1_gadget" && args.deviations.is_some() && kind != DeviationKind::External {
            return Err(CliError::new(EXIT_BAD_ARGS, "theorem1_gadget runs with external deviations only"));
        }
        Ok(ExperimentConfig {
            game: args.game.clone(),
            learner: LearnerConfig { kind, seed: args.seed, ..LearnerConfig::default() },
            rounds: args.rounds,
            out: args.out.clone(),
            seed: args.seed,
            stride: args.stride,
            tree: args.budget.tree_config(),
        })
    }
}

/// A loaded game: a bundled id or a game file.
pub fn load_game(spec: &str, config: &TreeConfig) -> Result<Bundled, CliError> {
    if BUNDLED_IDS.contains(&spec) {
        return Ok(load_bundled(spec, config)?);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::new(
            EXIT_BAD_ARGS,
            format!("unknown game {spec:?}; expected a file or one of {}", BUNDLED_IDS.join(", ")),
        ));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::new(EXIT_LOAD, format!("{}: {e}", path.display())))?;
    let game = GameDescription::parse(&text).map_err(|e| CliError::new(EXIT_LOAD, format!("{}: {e}", path.display())))?;
    Ok(Bundled::Form(PohpFormGame::new(game, config)?))
}

pub fn csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.round, r.player, r.state, r.max_cum_immediate, r.cum_full, r.exploitability
        ));
    }
    out
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_error(path, e)),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

/// The curve rows of one experiment.
pub fn experiment_rows(config: &ExperimentConfig) -> Result<Vec<CurveRow>, CliError> {
    let rows = match load_game(&config.game, &config.tree)? {
        Bundled::Gadget => theorem1_experiment(config.rounds, config.stride)?.rows,
        Bundled::Form(form) => {
            let needs_recall = (0..form.players()).any(|i| !form.tree(i).has_perfect_recall());
            let form = if needs_recall { form.with_perfect_recall_players(&config.tree)? } else { form };
            run_self_play(&form, &config.learner, config.rounds, config.stride)?.rows
        }
    };
    Ok(rows)
}

pub fn cmd_run(config: &ExperimentConfig) -> Result<i32, CliError> {
    let rows = experiment_rows(config)?;
    emit(config.out.as_deref(), &csv(&rows))?;
    Ok(EXIT_OK)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32, CliError> {
    let reports = run_verification_suite(args.tolerance, args.seed)?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&r.to_json_line());
        text.push('\n');
    }
    emit(args.out.as_deref(), &text)?;
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        eprintln!("{failed} of {} checks failed", reports.len());
        Ok(EXIT_CHECK_FAILED)
    } else {
        Ok(EXIT_OK)
    }
}

fn plural(n: usize, noun: &str) -> String {
    if n == 1 {
        format!("1 {noun}")
    } else {
        format!("{n} {noun}s")
    }
}

fn pure_count(tree: &TreeIndex) -> String {
    match enumerate_pure_strategies(tree, DEFAULT_PURE_BUDGET) {
        Ok(xs) => plural(xs.len(), "pure strategy").replace("strategys", "strategies"),
        Err(_) => format!("more than {DEFAULT_PURE_BUDGET} pure strategies"),
    }
}

fn describe_tree(tree: &TreeIndex) -> Vec<String> {
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for s in tree.active_states() {
        *sizes.entry(tree.state(s).members.len()).or_default() += 1;
    }
    let histogram: Vec<String> = sizes.iter().map(|(k, n)| format!("{k}:{n}")).collect();
    vec![
        format!("{}, {}", plural(tree.num_active(), "active state"), pure_count(tree)),
        format!("  {} in total, horizon {}", plural(tree.states().len(), "state"), tree.horizon()),
        format!("  |I(s)| histogram: {}", if histogram.is_empty() { "-".into() } else { histogram.join(" ") }),
        format!(
            "  timed: {}, perfect recall: {}",
            if tree.is_timed() { "yes" } else { "no" },
            if tree.has_perfect_recall() { "yes" } else { "no" }
        ),
    ]
}

/// The text printed by `inspect`.
pub fn inspect_text(spec: &str, config: &TreeConfig) -> Result<String, CliError> {
    let mut lines = vec![format!("game: {spec}")];
    match load_game(spec, config)? {
        Bundled::Gadget => {
            let (env, agent) = gadget_theorem1();
            let tree = build_tree_index(&env, &agent, config)?;
            lines.extend(describe_tree(&tree));
        }
        Bundled::Form(form) => {
            let trees: Vec<&TreeIndex> = (0..form.players()).map(|i| form.tree(i)).collect();
            if trees.iter().all(|t| t.states().len() == 1) {
                lines.push("1 state (initial only)".into());
            } else {
                let counts: Vec<usize> = trees.iter().map(|t| t.num_active()).collect();
                if counts.windows(2).all(|w| w[0] == w[1]) {
                    lines.push(format!("{} per player", plural(counts[0], "active state")));
                }
                lines.push(format!("{}, game depth {}", plural(form.players(), "player"), form.game().depth()));
                for (i, tree) in trees.iter().enumerate() {
                    let mut block = describe_tree(tree);
                    block[0] = format!("player {i}: {}", block[0]);
                    lines.extend(block);
                }
            }
        }
    }
    lines.push(String::new());
    Ok(lines.join("\n"))
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<i32, CliError> {
    let text = inspect_text(&args.game, &args.budget.tree_config())?;
    emit(None, &text)?;
    Ok(EXIT_OK)
}

/// Parse, dispatch, and map every failure to its exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_ARGS } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(args) => ExperimentConfig::from_args(args).and_then(|c| cmd_run(&c)),
        Command::Verify(args) => cmd_verify(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
