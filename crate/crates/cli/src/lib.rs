//! The `ost` command line: scenario emission and validation, game solving,
//! budgeted investment, attack simulation and a markdown summary.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use ost_core::export::{self, SolutionRecord};
use ost_core::knapsack::{self, InvestmentSolution, KnapsackError};
use ost_core::scenario::Severity;
use ost_core::simulate::{default_games, ComparisonReport, GameRef, SimConfig, DEFAULT_SEED};
use ost_core::{
    build_all_families, builtin_use_case, enumerate_candidates, validate_scenario, Scenario, ScenarioError,
};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "OST_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "ost",
    version,
    about = "Optimal safeguard selection via cyber safeguard games"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Scenario file; the built-in use case when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    /// Directory for output files; stdout when omitted.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Base seed for the simulation (OST_SEED takes precedence).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Investment budget; falls back to the scenario's budget.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub budget: Option<f64>,
    /// Independent simulation runs per cell.
    #[arg(long, global = true)]
    pub runs: Option<u64>,
    /// Attacks sampled per run.
    #[arg(long, global = true)]
    pub attacks: Option<u64>,
    /// Game to simulate as `sigma:lambda`; repeatable. Defaults to λ = 2, 3 of every safeguard.
    #[arg(long = "game", global = true, value_name = "SIGMA:LAMBDA")]
    pub games: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit or validate a scenario file.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Solve every game Γ_{σ,λ} and export the equilibrium plans.
    Solve,
    /// Choose one plan per safeguard within the budget.
    Invest(InvestArgs),
    /// Compare defender policies against attacker profiles by simulation.
    Simulate,
    /// Run solve, invest and simulate and write a markdown summary.
    Report(InvestArgs),
}

#[derive(Debug, Subcommand)]
pub enum ScenarioAction {
    /// Write the scenario (built-in unless --scenario is given) as JSON.
    Emit,
    /// Check a scenario and list every violation.
    Validate,
}

#[derive(Debug, Clone, Args)]
pub struct InvestArgs {
    #[arg(long, value_enum, default_value_t = Method::Exhaustive)]
    pub method: Method,
    /// Cost quantum of the dynamic program.
    #[arg(long, default_value_t = 0.01)]
    pub quantum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exhaustive,
    Dp,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Limit(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Limit(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<KnapsackError> for CliError {
    fn from(e: KnapsackError) -> Self {
        match e {
            KnapsackError::EnumerationCapExceeded { .. } => CliError::Limit(format!("{e} (rerun with --method dp)")),
            KnapsackError::TableOverflow { .. } => CliError::Limit(e.to_string()),
            KnapsackError::InvalidBudget(_) | KnapsackError::InvalidQuantum(_) => CliError::Input(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// Output of one command: named files, and which one goes to stdout when no
/// output directory was given.
#[derive(Debug, Default)]
pub struct Output {
    pub files: Vec<(String, String)>,
    pub primary: usize,
    /// Diagnostics for stderr.
    pub notes: Vec<String>,
}

impl Output {
    fn single(name: &str, text: String) -> Self {
        Output {
            files: vec![(name.to_string(), text)],
            ..Output::default()
        }
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, t)| t.as_str())
    }
}

fn load(global: &GlobalArgs) -> Result<Scenario, CliError> {
    match &global.scenario {
        Some(path) => Ok(ost_core::load_scenario(path)?),
        None => Ok(builtin_use_case()),
    }
}

fn resolve_seed(global: &GlobalArgs) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{SEED_ENV}={v:?} is not an unsigned 64-bit integer"))),
        Err(_) => Ok(global.seed.unwrap_or(DEFAULT_SEED)),
    }
}

fn sim_config(global: &GlobalArgs) -> Result<SimConfig, CliError> {
    let d = SimConfig::default();
    let cfg = SimConfig {
        attacks_per_run: global.attacks.unwrap_or(d.attacks_per_run),
        runs: global.runs.unwrap_or(d.runs),
        seed: resolve_seed(global)?,
    };
    if cfg.runs == 0 || cfg.attacks_per_run == 0 {
        return Err(CliError::Input("--runs and --attacks must be positive".into()));
    }
    Ok(cfg)
}

/// Parses `sigma:lambda`. The split is at the last colon so safeguard ids
/// may themselves contain colons.
pub fn parse_game(text: &str) -> Result<GameRef, CliError> {
    let bad = || CliError::Input(format!("--game {text:?}: expected SIGMA:LAMBDA, e.g. 17.4:2"));
    let (sigma, lambda) = text.rsplit_once(':').ok_or_else(bad)?;
    if sigma.is_empty() {
        return Err(bad());
    }
    Ok(GameRef::new(sigma, lambda.trim().parse().map_err(|_| bad())?))
}

fn games(s: &Scenario, global: &GlobalArgs) -> Result<Vec<GameRef>, CliError> {
    if global.games.is_empty() {
        return Ok(default_games(s));
    }
    let games: Vec<GameRef> = global.games.iter().map(|g| parse_game(g)).collect::<Result<_, _>>()?;
    for g in &games {
        let sg = s
            .safeguard(&g.safeguard_id)
            .ok_or_else(|| CliError::Input(format!("--game {}: unknown safeguard", g.label())))?;
        if g.lambda > sg.level_count() {
            return Err(CliError::Input(format!(
                "--game {}: lambda exceeds the {} levels of this safeguard",
                g.label(),
                sg.level_count()
            )));
        }
    }
    Ok(games)
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(internal)?;
    text.push('\n');
    Ok(text)
}

pub fn cmd_scenario_emit(global: &GlobalArgs) -> Result<Output, CliError> {
    Ok(Output::single("scenario.json", load(global)?.to_json()))
}

#[derive(Serialize)]
struct ViolationLine<'a> {
    code: &'a str,
    severity: &'a str,
    path: &'a str,
    message: &'a str,
}

/// Validates without stopping at the first problem. Warnings alone pass.
pub fn cmd_scenario_validate(global: &GlobalArgs) -> Result<Output, CliError> {
    let scenario = match &global.scenario {
        None => builtin_use_case(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read scenario file {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("malformed scenario: {e}")))?
        }
    };
    let violations = validate_scenario(&scenario);
    let errors = violations.iter().filter(|v| v.severity == Severity::Error).count();
    let text = match global.format.unwrap_or(Format::Csv) {
        Format::Json => json(
            &violations
                .iter()
                .map(|v| ViolationLine {
                    code: v.code.as_str(),
                    severity: match v.severity {
                        Severity::Error => "error",
                        Severity::Warning => "warning",
                    },
                    path: &v.path,
                    message: &v.message,
                })
                .collect::<Vec<_>>(),
        )?,
        Format::Csv => {
            let mut t = String::new();
            for v in &violations {
                writeln!(t, "{v}").unwrap();
            }
            if errors == 0 {
                t.push_str("scenario is valid\n");
            }
            t
        }
    };
    if errors > 0 {
        return Err(CliError::Input(format!("{text}{errors} error(s) found")));
    }
    Ok(Output::single("validation.txt", text))
}

pub fn cmd_solve(global: &GlobalArgs) -> Result<Output, CliError> {
    let s = load(global)?;
    let records = solve_records(&s)?;
    let mut out = Output {
        files: vec![
            ("solutions.json".into(), json(&records)?),
            (
                "solutions.csv".into(),
                export::solutions_csv(&s, &records).map_err(internal)?,
            ),
        ],
        ..Output::default()
    };
    if global.format == Some(Format::Csv) {
        out.primary = 1;
    }
    Ok(out)
}

fn solve_records(s: &Scenario) -> Result<Vec<SolutionRecord>, CliError> {
    let families = build_all_families(s).map_err(internal)?;
    let records = export::solution_records(s, &families).map_err(internal)?;
    for r in &records {
        r.verify(s).map_err(internal)?;
    }
    Ok(records)
}

#[derive(Serialize)]
struct ChosenPlan<'a> {
    safeguard_id: &'a str,
    lambda: usize,
    plan: &'a [f64],
    game_value: Option<f64>,
    cost: f64,
    efficacy: std::collections::BTreeMap<&'a str, f64>,
}

#[derive(Serialize)]
struct InvestmentReport<'a> {
    budget: f64,
    method: &'static str,
    total_cost: f64,
    objective: f64,
    chosen_candidate_index: Option<u64>,
    portfolio: Vec<ChosenPlan<'a>>,
}

fn budget_for(s: &Scenario, global: &GlobalArgs) -> Result<f64, CliError> {
    let budget = global
        .budget
        .or(s.budget)
        .ok_or_else(|| CliError::Input("no budget: pass --budget or set \"budget\" in the scenario".into()))?;
    if budget.is_nan() || budget < 0.0 {
        return Err(CliError::Input(format!(
            "budget must be a non-negative number, got {budget}"
        )));
    }
    Ok(budget)
}

fn invest(s: &Scenario, global: &GlobalArgs, args: &InvestArgs) -> Result<InvestmentSolution, CliError> {
    let budget = budget_for(s, global)?;
    let families = build_all_families(s).map_err(internal)?;
    let candidates = enumerate_candidates(s, &families)?;
    Ok(match args.method {
        Method::Exhaustive => knapsack::solve_exhaustive(s, &candidates, budget)?,
        Method::Dp => knapsack::solve_dp(s, &candidates, budget, args.quantum)?,
    })
}

fn investment_json(s: &Scenario, sol: &InvestmentSolution, method: Method) -> Result<String, CliError> {
    let portfolio = sol
        .portfolio
        .selection
        .iter()
        .map(|c| ChosenPlan {
            safeguard_id: &c.safeguard_id,
            lambda: c.lambda,
            plan: &c.plan.probabilities,
            game_value: c.game_value,
            cost: c.cost,
            efficacy: s
                .groups
                .iter()
                .map(|g| g.id.as_str())
                .zip(c.efficacy.iter().copied())
                .collect(),
        })
        .collect();
    json(&InvestmentReport {
        budget: sol.budget,
        method: match method {
            Method::Exhaustive => "exhaustive",
            Method::Dp => "dp",
        },
        total_cost: sol.portfolio.total_cost,
        objective: sol.portfolio.objective,
        chosen_candidate_index: sol.frontier.iter().find(|e| e.chosen).map(|e| e.candidate_index),
        portfolio,
    })
}

pub fn cmd_invest(global: &GlobalArgs, args: &InvestArgs) -> Result<Output, CliError> {
    let s = load(global)?;
    let sol = invest(&s, global, args)?;
    let mut out = Output {
        files: vec![
            ("investment.json".into(), investment_json(&s, &sol, args.method)?),
            ("frontier.csv".into(), export::frontier_csv(&s, &sol).map_err(internal)?),
        ],
        ..Output::default()
    };
    if global.format == Some(Format::Csv) {
        out.primary = 1;
    }
    Ok(out)
}

fn simulate(s: &Scenario, global: &GlobalArgs) -> Result<ComparisonReport, CliError> {
    let cfg = sim_config(global)?;
    let games = games(s, global)?;
    ost_core::compare_strategies(s, &games, &cfg).map_err(|e| CliError::Input(e.to_string()))
}

/// Cells where NSS loses to another defender policy, as stderr notes.
fn dominance_notes(report: &ComparisonReport) -> Vec<String> {
    report
        .improvements
        .iter()
        .filter(|i| i.nss_over_wss_pct < 0.0 || i.nss_over_css_pct < 0.0)
        .map(|i| {
            format!(
                "note: in {} against {} the Nash plan trails (vs WSS {}%, vs CSS {}%)",
                i.game.label(),
                i.attacker.label(),
                i.nss_over_wss_pct,
                i.nss_over_css_pct
            )
        })
        .collect()
}

pub fn cmd_simulate(global: &GlobalArgs) -> Result<Output, CliError> {
    let s = load(global)?;
    let report = simulate(&s, global)?;
    let mut out = Output {
        files: vec![
            (
                "comparison.csv".into(),
                export::comparison_csv(&report).map_err(internal)?,
            ),
            (
                "improvement.csv".into(),
                export::improvement_csv(&report).map_err(internal)?,
            ),
        ],
        notes: dominance_notes(&report),
        ..Output::default()
    };
    if global.format == Some(Format::Json) {
        out.files.push(("comparison.json".into(), json(&report)?));
        out.primary = 2;
    }
    Ok(out)
}

fn strategy(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(f64::to_string).collect();
    format!("({})", parts.join(", "))
}

pub fn summary_markdown(
    s: &Scenario,
    records: &[SolutionRecord],
    investment: &InvestmentSolution,
    report: &ComparisonReport,
) -> String {
    let mut md = String::new();
    let w = &mut md;
    writeln!(w, "# Safeguard selection summary\n").unwrap();
    writeln!(
        w,
        "{} user groups, {} safeguards, weights w_L = {}, w_C = {}.\n",
        s.groups.len(),
        s.safeguards.len(),
        s.weights.loss_weight,
        s.weights.indirect_cost_weight
    )
    .unwrap();

    writeln!(w, "## Nash safeguards plans\n").unwrap();
    writeln!(
        w,
        "| game | value | plan over levels | attacker over groups | plan cost |"
    )
    .unwrap();
    writeln!(w, "|---|---|---|---|---|").unwrap();
    for r in records {
        writeln!(
            w,
            "| ({},{}) | {} | {} | {} | {} |",
            r.safeguard_id,
            r.lambda,
            r.value,
            strategy(&r.nsp),
            strategy(&r.attacker),
            r.plan_cost
        )
        .unwrap();
    }

    writeln!(w, "\n## Investment\n").unwrap();
    writeln!(
        w,
        "Budget {}: total cost {}, aggregated residual risk {}.\n",
        investment.budget, investment.portfolio.total_cost, investment.portfolio.objective
    )
    .unwrap();
    for c in &investment.portfolio.selection {
        writeln!(
            w,
            "- {}: plan of Γ({},{}) {} costing {}",
            c.safeguard_id,
            c.safeguard_id,
            c.lambda,
            strategy(&c.plan.probabilities),
            c.cost
        )
        .unwrap();
    }
    let feasible = investment.frontier.iter().filter(|e| e.feasible).count();
    writeln!(
        w,
        "\n{} of {} portfolios fit the budget.",
        feasible,
        investment.frontier.len()
    )
    .unwrap();

    writeln!(w, "\n## Simulation\n").unwrap();
    writeln!(
        w,
        "{} runs of {} attacks per cell, base seed {}.\n",
        report.config.runs, report.config.attacks_per_run, report.config.seed
    )
    .unwrap();
    writeln!(
        w,
        "| game | attacker | NSS | WSS | CSS | NSS over WSS % | NSS over CSS % |"
    )
    .unwrap();
    writeln!(w, "|---|---|---|---|---|---|---|").unwrap();
    for i in &report.improvements {
        let mean = |d| report.cell(&i.game, d, i.attacker).map_or(f64::NAN, |c| c.mean_utility);
        writeln!(
            w,
            "| {} | {} | {} | {} | {} | {} | {} |",
            i.game.label(),
            i.attacker.label(),
            mean(ost_core::DefenderKind::Nash),
            mean(ost_core::DefenderKind::Weighted),
            mean(ost_core::DefenderKind::Cautious),
            i.nss_over_wss_pct,
            i.nss_over_css_pct
        )
        .unwrap();
    }
    writeln!(w).unwrap();
    for a in &report.averages {
        writeln!(
            w,
            "- Against {} the Nash plans improve on WSS by {}% and on CSS by {}% on average.",
            a.attacker.label(),
            a.nss_over_wss_pct,
            a.nss_over_css_pct
        )
        .unwrap();
    }
    md
}

pub fn cmd_report(global: &GlobalArgs, args: &InvestArgs) -> Result<Output, CliError> {
    let s = load(global)?;
    let records = solve_records(&s)?;
    let investment = invest(&s, global, args)?;
    let report = simulate(&s, global)?;
    let summary = summary_markdown(&s, &records, &investment, &report);
    Ok(Output {
        files: vec![
            ("summary.md".into(), summary),
            ("solutions.json".into(), json(&records)?),
            ("investment.json".into(), investment_json(&s, &investment, args.method)?),
            (
                "frontier.csv".into(),
                export::frontier_csv(&s, &investment).map_err(internal)?,
            ),
            (
                "comparison.csv".into(),
                export::comparison_csv(&report).map_err(internal)?,
            ),
            (
                "improvement.csv".into(),
                export::improvement_csv(&report).map_err(internal)?,
            ),
        ],
        notes: dominance_notes(&report),
        primary: 0,
    })
}

pub fn execute(cli: &Cli) -> Result<Output, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Scenario {
            action: ScenarioAction::Emit,
        } => cmd_scenario_emit(g),
        Command::Scenario {
            action: ScenarioAction::Validate,
        } => cmd_scenario_validate(g),
        Command::Solve => cmd_solve(g),
        Command::Invest(a) => cmd_invest(g, a),
        Command::Simulate => cmd_simulate(g),
        Command::Report(a) => cmd_report(g, a),
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Writes the output files, or prints the primary one. Returns the written
/// paths.
pub fn emit(out: &Output, dir: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    for n in &out.notes {
        eprintln!("{n}");
    }
    match dir {
        None => {
            let (_, text) = &out.files[out.primary];
            std::io::stdout().write_all(text.as_bytes()).map_err(internal)?;
            Ok(Vec::new())
        }
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
            out.files
                .iter()
                .map(|(name, text)| {
                    let path = dir.join(name);
                    write_atomic(&path, text).map_err(|e| internal(format!("writing {}: {e}", path.display())))?;
                    Ok(path)
                })
                .collect()
        }
    }
}

/// Parses, runs and writes; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = execute(&cli).and_then(|out| {
        // Validation reports are for the terminal only.
        let dir = match cli.command {
            Command::Scenario {
                action: ScenarioAction::Validate,
            } => None,
            _ => cli.global.out.as_deref(),
        };
        emit(&out, dir)
    });
    match result {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
