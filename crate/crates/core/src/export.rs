//! Serialized forms of solver output: JSON solution records and the CSV
//! tables consumed by external plotting.
//!
//! Floats are written in their shortest round-trip representation, so every
//! exported number parses back to the exact value that was computed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{self, GameError, GameFamily, GameSolution, MixedStrategy, Player, EQUILIBRIUM_TOLERANCE};
use crate::knapsack::InvestmentSolution;
use crate::scenario::Scenario;
use crate::simulate::ComparisonReport;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("record for game ({safeguard},{lambda}) is not a saddle point (residuals {residuals:?})")]
    NotSaddlePoint {
        safeguard: String,
        lambda: usize,
        residuals: (f64, f64),
    },
}

/// One solved game as exported by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionRecord {
    pub safeguard_id: String,
    pub lambda: usize,
    pub nsp: Vec<f64>,
    pub attacker: Vec<f64>,
    pub value: f64,
    pub plan_cost: f64,
    pub plan_efficacy: BTreeMap<String, f64>,
}

impl SolutionRecord {
    pub fn from_solution(s: &Scenario, sol: &GameSolution) -> Result<Self, GameError> {
        let plan_efficacy = s
            .groups
            .iter()
            .map(|g| {
                Ok((
                    g.id.clone(),
                    game::plan_efficacy(s, &sol.safeguard_id, &sol.nsp, &g.id)?,
                ))
            })
            .collect::<Result<_, GameError>>()?;
        Ok(SolutionRecord {
            safeguard_id: sol.safeguard_id.clone(),
            lambda: sol.lambda,
            nsp: sol.nsp.probabilities.clone(),
            attacker: sol.attacker_strategy.probabilities.clone(),
            value: sol.value,
            plan_cost: game::plan_financial_cost(s, &sol.safeguard_id, &sol.nsp)?,
            plan_efficacy,
        })
    }

    pub fn to_solution(&self) -> Result<GameSolution, GameError> {
        Ok(GameSolution {
            safeguard_id: self.safeguard_id.clone(),
            lambda: self.lambda,
            nsp: MixedStrategy::new(Player::Defender, self.nsp.clone())?,
            attacker_strategy: MixedStrategy::new(Player::Attacker, self.attacker.clone())?,
            value: self.value,
        })
    }

    /// Rebuilds the game from the scenario and re-checks the saddle point.
    pub fn verify(&self, s: &Scenario) -> Result<(), ExportError> {
        let m = game::build_utility_matrix(s, &self.safeguard_id, self.lambda)?;
        let sol = self.to_solution()?;
        if sol.is_saddle_point(&m, EQUILIBRIUM_TOLERANCE) {
            Ok(())
        } else {
            Err(ExportError::NotSaddlePoint {
                safeguard: self.safeguard_id.clone(),
                lambda: self.lambda,
                residuals: sol.saddle_residuals(&m),
            })
        }
    }
}

pub fn solution_records(s: &Scenario, families: &[GameFamily]) -> Result<Vec<SolutionRecord>, GameError> {
    families
        .iter()
        .flat_map(|f| &f.solutions)
        .map(|sol| SolutionRecord::from_solution(s, sol))
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ExportError> {
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Solution records as CSV; strategies are `;`-separated probability lists.
pub fn solutions_csv(s: &Scenario, records: &[SolutionRecord]) -> Result<String, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "safeguard_id".to_string(),
        "lambda".into(),
        "value".into(),
        "plan_cost".into(),
        "nsp".into(),
        "attacker".into(),
    ];
    header.extend(s.groups.iter().map(|g| format!("efficacy_{}", g.id)));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.safeguard_id.clone(),
            r.lambda.to_string(),
            r.value.to_string(),
            r.plan_cost.to_string(),
            join(&r.nsp),
            join(&r.attacker),
        ];
        row.extend(s.groups.iter().map(|g| r.plan_efficacy[&g.id].to_string()));
        w.write_record(&row)?;
    }
    finish(w)
}

/// Column name for a safeguard's chosen λ, e.g. `plan_17_4_lambda`.
pub fn plan_column(safeguard_id: &str) -> String {
    let slug: String = safeguard_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("plan_{slug}_lambda")
}

/// The cost-versus-risk table, one row per enumerated portfolio.
pub fn frontier_csv(s: &Scenario, sol: &InvestmentSolution) -> Result<String, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["candidate_index".to_string()];
    header.extend(s.safeguards.iter().map(|sg| plan_column(&sg.id)));
    header.extend(
        ["total_cost", "aggregated_residual_risk", "feasible", "chosen"]
            .iter()
            .map(ToString::to_string),
    );
    w.write_record(&header)?;
    for e in &sol.frontier {
        let mut row = vec![e.candidate_index.to_string()];
        row.extend(e.lambdas.iter().map(ToString::to_string));
        row.push(e.total_cost.to_string());
        row.push(e.objective.to_string());
        row.push(e.feasible.to_string());
        row.push(e.chosen.to_string());
        w.write_record(&row)?;
    }
    finish(w)
}

/// Mean utility per (game, defender, attacker) cell.
pub fn comparison_csv(report: &ComparisonReport) -> Result<String, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "game",
        "defender",
        "attacker",
        "mean_utility",
        "std_error",
        "runs",
        "attacks_per_run",
        "seed",
    ])?;
    for c in &report.cells {
        w.write_record([
            c.game.label(),
            c.defender.label().to_string(),
            c.attacker.label().to_string(),
            c.mean_utility.to_string(),
            c.std_error.to_string(),
            c.runs.to_string(),
            c.attacks_per_run.to_string(),
            c.seed.to_string(),
        ])?;
    }
    finish(w)
}

/// NSS improvement percentages per game and attacker, followed by one
/// `average` row per attacker.
pub fn improvement_csv(report: &ComparisonReport) -> Result<String, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["game", "nss_over_wss_pct", "nss_over_css_pct", "attacker"])?;
    for i in &report.improvements {
        w.write_record([
            i.game.label(),
            i.nss_over_wss_pct.to_string(),
            i.nss_over_css_pct.to_string(),
            i.attacker.label().to_string(),
        ])?;
    }
    for a in &report.averages {
        w.write_record([
            "average".to_string(),
            a.nss_over_wss_pct.to_string(),
            a.nss_over_css_pct.to_string(),
            a.attacker.label().to_string(),
        ])?;
    }
    finish(w)
}
