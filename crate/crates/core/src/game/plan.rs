//! Properties of a safeguards plan (a defender mixed strategy over levels).
//! Efficacy mixes linearly across levels, so the plan's expected loss is the
//! probability-weighted loss of its levels.

use super::{resolve_group, resolve_safeguard, GameError, MixedStrategy, Player};
use crate::scenario::Scenario;

fn check_plan(s: &Scenario, sg: usize, plan: &MixedStrategy) -> Result<(), GameError> {
    plan.expect_owner(Player::Defender)?;
    let levels = s.safeguards[sg].level_count() + 1;
    if plan.len() > levels {
        return Err(GameError::DimensionMismatch {
            expected: levels,
            found: plan.len(),
        });
    }
    Ok(())
}

pub(crate) fn efficacy_at(s: &Scenario, sg: usize, plan: &[f64], group: usize) -> f64 {
    plan.iter()
        .enumerate()
        .skip(1)
        .fold(0.0, |acc, (j, p)| acc + p * s.efficacy(sg, j, group))
}

pub(crate) fn cost_at(s: &Scenario, sg: usize, plan: &[f64]) -> f64 {
    let safeguard = &s.safeguards[sg];
    plan.iter()
        .enumerate()
        .skip(1)
        .fold(0.0, |acc, (j, p)| acc + p * safeguard.direct_cost(j))
}

/// `E(δ, i) = Σ_j δ(j) E(j, i)`, with level 0 contributing nothing.
pub fn plan_efficacy(s: &Scenario, sigma: &str, plan: &MixedStrategy, group: &str) -> Result<f64, GameError> {
    let sg = resolve_safeguard(s, sigma)?;
    check_plan(s, sg, plan)?;
    let g = resolve_group(s, group)?;
    Ok(efficacy_at(s, sg, &plan.probabilities, g))
}

/// `R_i * A_i * (1 - E(δ, i))`.
pub fn plan_expected_loss(s: &Scenario, sigma: &str, plan: &MixedStrategy, group: &str) -> Result<f64, GameError> {
    let e = plan_efficacy(s, sigma, plan, group)?;
    let g = resolve_group(s, group)?;
    Ok(s.groups[g].baseline_loss() * (1.0 - e))
}

/// `F(δ) = Σ_{j>=1} δ(j) F(σ, j)`.
pub fn plan_financial_cost(s: &Scenario, sigma: &str, plan: &MixedStrategy) -> Result<f64, GameError> {
    let sg = resolve_safeguard(s, sigma)?;
    check_plan(s, sg, plan)?;
    Ok(cost_at(s, sg, &plan.probabilities))
}
