//! Investment in Nash safeguards plans: pick exactly one plan per safeguard
//! (the level-0 plan is always available) so that the aggregated residual
//! loss `Σ_i A_i R_i Π_σ (1 - E(plan_σ, i))` is minimal and the summed plan
//! costs stay within the budget.
//!
//! Ties on the objective go to the cheaper portfolio, then to the
//! lexicographically smallest vector of chosen `λ` values.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

use crate::game::{plan, GameError, GameFamily, MixedStrategy};
use crate::scenario::Scenario;

/// Default bound on the number of portfolios [`solve_exhaustive`] visits.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// Default bound on the dynamic program's cost axis.
pub const MAX_DP_UNITS: u64 = 100_000_000;

/// Relative slack when comparing a summed cost against the budget, so that
/// sums of decimal costs such as `0.1 + 0.2` still fit a budget of `0.3`.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KnapsackError {
    #[error("safeguard {0:?} appears in more than one game family")]
    DuplicateSafeguard(String),
    #[error("safeguard {safeguard:?} has two candidates for lambda {lambda}")]
    DuplicateCandidate { safeguard: String, lambda: usize },
    #[error("no candidate plan for safeguard {0:?}")]
    MissingSafeguard(String),
    #[error("candidate for safeguard {safeguard:?} covers {found} groups, scenario has {expected}")]
    GroupMismatch {
        safeguard: String,
        expected: usize,
        found: usize,
    },
    #[error("budget must be a non-negative number, got {0}")]
    InvalidBudget(f64),
    #[error("cost quantum must be positive and finite, got {0}")]
    InvalidQuantum(f64),
    #[error("{combinations} portfolios exceed the enumeration cap of {cap}; use the dynamic program")]
    EnumerationCapExceeded { combinations: u64, cap: u64 },
    #[error("cost table of {units} cells exceeds the limit of {limit}; use a coarser quantum")]
    TableOverflow { units: u64, limit: u64 },
    #[error(transparent)]
    Game(#[from] GameError),
}

/// One fundable plan: the equilibrium plan of `Γ_{σ,λ}` (or any plan over
/// levels `0..=λ`) with its cost and per-group efficacy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub safeguard_id: String,
    pub lambda: usize,
    pub plan: MixedStrategy,
    /// Equilibrium value of the game the plan came from, if any.
    pub game_value: Option<f64>,
    pub cost: f64,
    /// `E(plan, i)` in scenario group order.
    pub efficacy: Vec<f64>,
    /// `1 - E(plan, i)` in scenario group order.
    pub residual_factor: Vec<f64>,
}

impl Candidate {
    /// Prices an arbitrary plan over levels `0..=λ` of `sigma`.
    pub fn from_plan(s: &Scenario, sigma: &str, plan: MixedStrategy) -> Result<Self, KnapsackError> {
        let sg = crate::game::resolve_safeguard(s, sigma)?;
        let cost = plan::plan_financial_cost(s, sigma, &plan)?;
        let efficacy: Vec<f64> = (0..s.groups.len())
            .map(|g| plan::efficacy_at(s, sg, &plan.probabilities, g))
            .collect();
        Ok(Candidate::new(
            &s.safeguards[sg].id,
            plan.len() - 1,
            plan,
            None,
            cost,
            efficacy,
        ))
    }

    pub fn new(
        safeguard_id: &str,
        lambda: usize,
        plan: MixedStrategy,
        game_value: Option<f64>,
        cost: f64,
        efficacy: Vec<f64>,
    ) -> Self {
        let residual_factor = efficacy.iter().map(|e| 1.0 - e).collect();
        Candidate {
            safeguard_id: safeguard_id.to_string(),
            lambda,
            plan,
            game_value,
            cost,
            efficacy,
            residual_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Portfolio {
    /// One candidate per safeguard, in scenario order.
    pub selection: Vec<Candidate>,
    pub total_cost: f64,
    pub objective: f64,
}

impl Portfolio {
    pub fn lambdas(&self) -> Vec<usize> {
        self.selection.iter().map(|c| c.lambda).collect()
    }
}

/// One row of the cost-versus-risk table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierEntry {
    /// 1-based position in lexicographic `λ` order.
    pub candidate_index: u64,
    pub lambdas: Vec<usize>,
    pub total_cost: f64,
    pub objective: f64,
    pub feasible: bool,
    pub chosen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvestmentSolution {
    pub budget: f64,
    pub portfolio: Portfolio,
    pub frontier: Vec<FrontierEntry>,
}

/// Turns solved game families into priced candidates, `|L| + 1` per
/// safeguard.
pub fn enumerate_candidates(s: &Scenario, families: &[GameFamily]) -> Result<Vec<Candidate>, KnapsackError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for family in families {
        if !seen.insert(family.safeguard_id.as_str()) {
            return Err(KnapsackError::DuplicateSafeguard(family.safeguard_id.clone()));
        }
        for solution in &family.solutions {
            let mut c = Candidate::from_plan(s, &family.safeguard_id, solution.nsp.clone())?;
            c.lambda = solution.lambda;
            c.game_value = Some(solution.value);
            out.push(c);
        }
    }
    Ok(out)
}

/// Combines per-safeguard efficacies for one group. The update
/// `e + e' - e e'` equals `1 - (1 - e)(1 - e')`.
fn combine(acc: f64, e: f64) -> f64 {
    acc + e - acc * e
}

fn objective_from_efficacy(s: &Scenario, combined: &[f64]) -> f64 {
    s.groups
        .iter()
        .zip(combined)
        .map(|(g, e)| g.baseline_loss() * (1.0 - e))
        .sum()
}

fn check_groups(s: &Scenario, c: &Candidate) -> Result<(), KnapsackError> {
    if c.efficacy.len() != s.groups.len() {
        return Err(KnapsackError::GroupMismatch {
            safeguard: c.safeguard_id.clone(),
            expected: s.groups.len(),
            found: c.efficacy.len(),
        });
    }
    Ok(())
}

/// Aggregated residual expected loss of a selection of plans.
pub fn portfolio_objective(s: &Scenario, selection: &[Candidate]) -> Result<f64, KnapsackError> {
    let mut combined = vec![0.0; s.groups.len()];
    for c in selection {
        check_groups(s, c)?;
        for (acc, e) in combined.iter_mut().zip(&c.efficacy) {
            *acc = combine(*acc, *e);
        }
    }
    Ok(objective_from_efficacy(s, &combined))
}

fn total_cost<'a>(selection: impl IntoIterator<Item = &'a Candidate>) -> f64 {
    selection.into_iter().fold(0.0, |acc, c| acc + c.cost)
}

fn fits(cost: f64, budget: f64) -> bool {
    cost <= budget + FEASIBILITY_SLACK * budget.abs().max(1.0)
}

fn check_budget(budget: f64) -> Result<(), KnapsackError> {
    if budget.is_nan() || budget < 0.0 {
        return Err(KnapsackError::InvalidBudget(budget));
    }
    Ok(())
}

/// Candidates bucketed by safeguard in scenario order, each bucket sorted by
/// `λ`.
fn group_candidates<'a>(s: &Scenario, candidates: &'a [Candidate]) -> Result<Vec<Vec<&'a Candidate>>, KnapsackError> {
    let mut buckets: Vec<Vec<&Candidate>> = vec![Vec::new(); s.safeguards.len()];
    for c in candidates {
        let sg = crate::game::resolve_safeguard(s, &c.safeguard_id)?;
        check_groups(s, c)?;
        if buckets[sg].iter().any(|o| o.lambda == c.lambda) {
            return Err(KnapsackError::DuplicateCandidate {
                safeguard: c.safeguard_id.clone(),
                lambda: c.lambda,
            });
        }
        buckets[sg].push(c);
    }
    for (bucket, sg) in buckets.iter_mut().zip(&s.safeguards) {
        if bucket.is_empty() {
            return Err(KnapsackError::MissingSafeguard(sg.id.clone()));
        }
        bucket.sort_by_key(|c| c.lambda);
    }
    Ok(buckets)
}

/// Lexicographic rank of a choice vector, 1-based.
fn rank(buckets: &[Vec<&Candidate>], choice: &[usize]) -> u64 {
    buckets
        .iter()
        .zip(choice)
        .fold(0u64, |acc, (b, &k)| acc * b.len() as u64 + k as u64)
        + 1
}

/// Orders `(objective, cost, λ-vector)` triples; smaller is better.
fn preference(a: (f64, f64, &[usize]), b: (f64, f64, &[usize])) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then_with(|| a.2.cmp(b.2))
}

fn build_solution(
    s: &Scenario,
    buckets: &[Vec<&Candidate>],
    budget: f64,
    best: &[usize],
    mut frontier: Vec<FrontierEntry>,
) -> Result<InvestmentSolution, KnapsackError> {
    let selection: Vec<Candidate> = buckets.iter().zip(best).map(|(b, &k)| b[k].clone()).collect();
    let objective = portfolio_objective(s, &selection)?;
    let chosen = rank(buckets, best);
    for entry in &mut frontier {
        entry.chosen = entry.candidate_index == chosen;
    }
    Ok(InvestmentSolution {
        budget,
        portfolio: Portfolio {
            total_cost: total_cost(&selection),
            objective,
            selection,
        },
        frontier,
    })
}

/// Enumerates every one-plan-per-safeguard portfolio.
pub fn solve_exhaustive(
    s: &Scenario,
    candidates: &[Candidate],
    budget: f64,
) -> Result<InvestmentSolution, KnapsackError> {
    solve_exhaustive_capped(s, candidates, budget, ENUMERATION_CAP)
}

pub fn solve_exhaustive_capped(
    s: &Scenario,
    candidates: &[Candidate],
    budget: f64,
    cap: u64,
) -> Result<InvestmentSolution, KnapsackError> {
    check_budget(budget)?;
    let buckets = group_candidates(s, candidates)?;
    let combinations = buckets
        .iter()
        .try_fold(1u64, |acc, b| acc.checked_mul(b.len() as u64))
        .unwrap_or(u64::MAX);
    if combinations > cap {
        return Err(KnapsackError::EnumerationCapExceeded { combinations, cap });
    }

    let mut choice = vec![0usize; buckets.len()];
    let mut frontier = Vec::with_capacity(combinations as usize);
    let mut best: Option<(f64, f64, Vec<usize>, Vec<usize>)> = None;
    for index in 1..=combinations {
        let selection: Vec<Candidate> = buckets.iter().zip(&choice).map(|(b, &k)| b[k].clone()).collect();
        let cost = total_cost(&selection);
        let objective = portfolio_objective(s, &selection)?;
        let feasible = fits(cost, budget);
        let lambdas: Vec<usize> = selection.iter().map(|c| c.lambda).collect();
        if feasible {
            let better = match &best {
                None => true,
                Some((o, c, l, _)) => preference((objective, cost, &lambdas), (*o, *c, l)) == Ordering::Less,
            };
            if better {
                best = Some((objective, cost, lambdas.clone(), choice.clone()));
            }
        }
        frontier.push(FrontierEntry {
            candidate_index: index,
            lambdas,
            total_cost: cost,
            objective,
            feasible,
            chosen: false,
        });

        // Odometer increment, last safeguard fastest.
        for pos in (0..choice.len()).rev() {
            choice[pos] += 1;
            if choice[pos] < buckets[pos].len() {
                break;
            }
            choice[pos] = 0;
        }
    }

    let best = best.map(|(_, _, _, c)| c).ok_or(KnapsackError::InvalidBudget(budget))?;
    build_solution(s, &buckets, budget, &best, frontier)
}

#[derive(Clone)]
struct Label {
    units: u64,
    cost: f64,
    combined: Vec<f64>,
    lambdas: Vec<usize>,
    choice: Vec<usize>,
}

impl Label {
    /// `self` is at least as good as `other` under every completion.
    fn dominates(&self, other: &Label) -> bool {
        self.units <= other.units
            && self.cost <= other.cost
            && self.lambdas <= other.lambdas
            && self.combined.iter().zip(&other.combined).all(|(a, b)| a >= b)
    }
}

fn to_units(cost: f64, quantum: f64) -> Result<u64, KnapsackError> {
    let scaled = (cost / quantum - 1e-9).ceil().max(0.0);
    if scaled > MAX_DP_UNITS as f64 {
        return Err(KnapsackError::TableOverflow {
            units: scaled as u64,
            limit: MAX_DP_UNITS,
        });
    }
    Ok(scaled as u64)
}

/// Multiple-choice knapsack by dynamic programming over costs rounded up to
/// multiples of `quantum`.
///
/// The objective is a sum of per-group products, so one scalar per cost
/// cell is not enough. Each stage keeps every label (cost units, combined
/// efficacy per group, choices so far) that no other label dominates.
pub fn solve_dp(
    s: &Scenario,
    candidates: &[Candidate],
    budget: f64,
    quantum: f64,
) -> Result<InvestmentSolution, KnapsackError> {
    check_budget(budget)?;
    if !(quantum > 0.0 && quantum.is_finite()) {
        return Err(KnapsackError::InvalidQuantum(quantum));
    }
    let buckets = group_candidates(s, candidates)?;
    let units: Vec<Vec<u64>> = buckets
        .iter()
        .map(|b| b.iter().map(|c| to_units(c.cost, quantum)).collect())
        .collect::<Result<_, _>>()?;
    let ceiling: u64 = units.iter().map(|u| u.iter().copied().max().unwrap_or(0)).sum();
    let capacity = if budget.is_finite() {
        ((budget / quantum + 1e-9).floor() as u64).min(ceiling)
    } else {
        ceiling
    };
    if capacity > MAX_DP_UNITS {
        return Err(KnapsackError::TableOverflow {
            units: capacity,
            limit: MAX_DP_UNITS,
        });
    }

    let mut labels = vec![Label {
        units: 0,
        cost: 0.0,
        combined: vec![0.0; s.groups.len()],
        lambdas: Vec::new(),
        choice: Vec::new(),
    }];
    for (bucket, bucket_units) in buckets.iter().zip(&units) {
        let mut next = Vec::new();
        for label in &labels {
            for (k, (c, &u)) in bucket.iter().zip(bucket_units).enumerate() {
                let total = label.units + u;
                if total > capacity {
                    continue;
                }
                let mut l = label.clone();
                l.units = total;
                l.cost += c.cost;
                for (acc, e) in l.combined.iter_mut().zip(&c.efficacy) {
                    *acc = combine(*acc, *e);
                }
                l.lambdas.push(c.lambda);
                l.choice.push(k);
                next.push(l);
            }
        }
        next.sort_by(|a, b| {
            a.units
                .cmp(&b.units)
                .then(a.cost.total_cmp(&b.cost))
                .then_with(|| a.lambdas.cmp(&b.lambdas))
        });
        let mut kept: Vec<Label> = Vec::with_capacity(next.len());
        for l in next {
            if !kept.iter().any(|k| k.dominates(&l)) {
                kept.push(l);
            }
        }
        labels = kept;
    }

    let scored: Vec<(f64, Label)> = labels
        .into_iter()
        .map(|l| (objective_from_efficacy(s, &l.combined), l))
        .collect();
    let best = scored
        .iter()
        .min_by(|a, b| preference((a.0, a.1.cost, &a.1.lambdas), (b.0, b.1.cost, &b.1.lambdas)))
        .map(|(_, l)| l.choice.clone())
        .ok_or(KnapsackError::InvalidBudget(budget))?;

    let mut frontier: Vec<FrontierEntry> = scored
        .iter()
        .map(|(objective, l)| FrontierEntry {
            candidate_index: rank(&buckets, &l.choice),
            lambdas: l.lambdas.clone(),
            total_cost: l.cost,
            objective: *objective,
            feasible: true,
            chosen: false,
        })
        .collect();
    frontier.sort_by_key(|e| e.candidate_index);
    build_solution(s, &buckets, budget, &best, frontier)
}
