//! Cyber safeguard games: one zero-sum game per (safeguard, highest level
//! allowed). The defender picks an application level `0..=λ`, the attacker
//! picks a user group, and the defender's payoff is the negated weighted sum
//! of expected loss and indirect cost.

pub(crate) mod plan;
mod simplex;
mod support;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Scenario;

pub use plan::{plan_efficacy, plan_expected_loss, plan_financial_cost};
pub use simplex::solve_maximin;
pub use support::{support_enumeration, MAX_SUPPORT_DIM};

/// Tolerance on saddle-point residuals.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-9;

/// Tolerance on the sum of a probability vector.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("unknown safeguard {0:?}")]
    UnknownSafeguard(String),
    #[error("unknown user group {0:?}")]
    UnknownGroup(String),
    #[error("level {level} out of range for safeguard {safeguard:?} (highest level {max})")]
    LevelOutOfRange {
        safeguard: String,
        level: usize,
        max: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("strategy belongs to the {found:?}, expected the {expected:?}")]
    WrongOwner { expected: Player, found: Player },
    #[error("invalid probability vector: {0}")]
    InvalidStrategy(String),
    #[error("invalid utility matrix: {0}")]
    InvalidMatrix(String),
    #[error("{rows}x{cols} game exceeds the support enumeration limit of {limit} strategies")]
    TooLarge { rows: usize, cols: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Defender,
    Attacker,
}

/// Defender payoff table of one game. Rows are application levels `0..=λ`,
/// columns are user groups in scenario order.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMatrix {
    pub safeguard_id: String,
    pub max_level: usize,
    pub group_ids: Vec<String>,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl UtilityMatrix {
    /// Builds an unlabelled matrix from rows of defender payoffs.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, GameError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 {
            return Err(GameError::InvalidMatrix("matrix is empty".into()));
        }
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(GameError::InvalidMatrix("rows have different lengths".into()));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GameError::InvalidMatrix("entries must be finite".into()));
        }
        Ok(UtilityMatrix {
            safeguard_id: String::new(),
            max_level: nrows - 1,
            group_ids: (0..ncols).map(|i| i.to_string()).collect(),
            rows: nrows,
            cols: ncols,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `U_d(j, i)`.
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.cols + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.cols..(j + 1) * self.cols]
    }

    /// Attacker payoff `U_a(j, i) = -U_d(j, i)`.
    pub fn attacker_utility(&self, j: usize, i: usize) -> f64 {
        -self.get(j, i)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|j| self.row(j).to_vec()).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub(crate) fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn max_abs_entry(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Defender payoff of a mixed defender strategy against each attacker
    /// pure strategy.
    pub fn defender_payoffs(&self, defender: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|i| (0..self.rows).map(|j| defender[j] * self.get(j, i)).sum())
            .collect()
    }

    /// Defender payoff of each pure level against a mixed attacker strategy.
    pub fn level_payoffs(&self, attacker: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|j| self.row(j).iter().zip(attacker).map(|(u, a)| u * a).sum())
            .collect()
    }
}

/// Probability distribution over one player's pure strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    pub owner: Player,
    pub probabilities: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(owner: Player, probabilities: Vec<f64>) -> Result<Self, GameError> {
        if probabilities.is_empty() {
            return Err(GameError::InvalidStrategy("no pure strategies".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(GameError::InvalidStrategy(format!("entry {p} is not a probability")));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(GameError::InvalidStrategy(format!("entries sum to {sum}")));
        }
        Ok(MixedStrategy { owner, probabilities })
    }

    /// Rescales a non-negative weight vector to sum to one.
    pub fn normalized(owner: Player, mut weights: Vec<f64>) -> Result<Self, GameError> {
        for w in &mut weights {
            if *w < 0.0 && *w > -PROBABILITY_TOLERANCE {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(GameError::InvalidStrategy(format!("weights sum to {sum}")));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Self::new(owner, weights)
    }

    pub fn point_mass(owner: Player, len: usize, index: usize) -> Self {
        let mut probabilities = vec![0.0; len];
        probabilities[index] = 1.0;
        MixedStrategy { owner, probabilities }
    }

    pub fn uniform(owner: Player, len: usize) -> Self {
        MixedStrategy {
            owner,
            probabilities: vec![1.0 / len as f64; len],
        }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Indices played with positive probability.
    pub fn support(&self) -> Vec<usize> {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(k, _)| k)
            .collect()
    }

    pub(crate) fn expect_owner(&self, owner: Player) -> Result<(), GameError> {
        if self.owner == owner {
            Ok(())
        } else {
            Err(GameError::WrongOwner {
                expected: owner,
                found: self.owner,
            })
        }
    }
}

/// Equilibrium of one game: the defender's Nash safeguards plan, the
/// attacker's equilibrium strategy and the defender's equilibrium payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSolution {
    pub safeguard_id: String,
    pub lambda: usize,
    pub nsp: MixedStrategy,
    pub attacker_strategy: MixedStrategy,
    pub value: f64,
}

impl GameSolution {
    /// `(max_j U(j, α) - v, v - min_i U(δ, i))`. Both are `<= ε` at a
    /// saddle point.
    pub fn saddle_residuals(&self, m: &UtilityMatrix) -> (f64, f64) {
        let best_level = m
            .level_payoffs(&self.attacker_strategy.probabilities)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let worst_group = m
            .defender_payoffs(&self.nsp.probabilities)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        (best_level - self.value, self.value - worst_group)
    }

    pub fn is_saddle_point(&self, m: &UtilityMatrix, tolerance: f64) -> bool {
        if self.nsp.len() != m.rows() || self.attacker_strategy.len() != m.cols() {
            return false;
        }
        let (d, a) = self.saddle_residuals(m);
        d <= tolerance && a <= tolerance
    }
}

/// All games of one safeguard, `λ = 0..=|L|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameFamily {
    pub safeguard_id: String,
    pub solutions: Vec<GameSolution>,
}

pub(crate) fn resolve_safeguard(s: &Scenario, sigma: &str) -> Result<usize, GameError> {
    s.safeguard_index(sigma)
        .ok_or_else(|| GameError::UnknownSafeguard(sigma.to_string()))
}

pub(crate) fn resolve_group(s: &Scenario, group: &str) -> Result<usize, GameError> {
    s.group_index(group)
        .ok_or_else(|| GameError::UnknownGroup(group.to_string()))
}

fn check_level(s: &Scenario, sg: usize, level: usize) -> Result<(), GameError> {
    let max = s.safeguards[sg].level_count();
    if level > max {
        return Err(GameError::LevelOutOfRange {
            safeguard: s.safeguards[sg].id.clone(),
            level,
            max,
        });
    }
    Ok(())
}

pub(crate) fn loss_at(s: &Scenario, sg: usize, level: usize, group: usize) -> f64 {
    s.groups[group].baseline_loss() * (1.0 - s.efficacy(sg, level, group))
}

/// Expected loss `R_i * A_i * (1 - E(j, i))` of group `i` under level `j`.
pub fn expected_loss(s: &Scenario, sigma: &str, level: usize, group: &str) -> Result<f64, GameError> {
    let sg = resolve_safeguard(s, sigma)?;
    check_level(s, sg, level)?;
    let g = resolve_group(s, group)?;
    Ok(loss_at(s, sg, level, g))
}

/// Payoff table of the game for safeguard `sigma` restricted to levels
/// `0..=max_level`.
pub fn build_utility_matrix(s: &Scenario, sigma: &str, max_level: usize) -> Result<UtilityMatrix, GameError> {
    let sg = resolve_safeguard(s, sigma)?;
    check_level(s, sg, max_level)?;
    let w = s.weights;
    let rows = (0..=max_level)
        .map(|j| {
            (0..s.groups.len())
                .map(|i| -w.loss_weight * loss_at(s, sg, j, i) - w.indirect_cost_weight * s.indirect_cost(sg, j, i))
                .collect()
        })
        .collect();
    let mut m = UtilityMatrix::new(rows)?;
    m.safeguard_id = s.safeguards[sg].id.clone();
    m.group_ids = s.group_ids();
    Ok(m)
}

/// Bilinear payoff `Σ_j Σ_i U_d(j, i) δ(j) α(i)`.
pub fn expected_utility(
    m: &UtilityMatrix,
    defender: &MixedStrategy,
    attacker: &MixedStrategy,
) -> Result<f64, GameError> {
    if defender.len() != m.rows() {
        return Err(GameError::DimensionMismatch {
            expected: m.rows(),
            found: defender.len(),
        });
    }
    if attacker.len() != m.cols() {
        return Err(GameError::DimensionMismatch {
            expected: m.cols(),
            found: attacker.len(),
        });
    }
    Ok((0..m.rows())
        .map(|j| {
            let row: f64 = m.row(j).iter().zip(&attacker.probabilities).map(|(u, a)| u * a).sum();
            defender.probabilities[j] * row
        })
        .sum())
}

/// Solves one game and labels the solution.
pub fn solve_game(s: &Scenario, sigma: &str, lambda: usize) -> Result<(UtilityMatrix, GameSolution), GameError> {
    let m = build_utility_matrix(s, sigma, lambda)?;
    let solution = solve_maximin(&m);
    Ok((m, solution))
}

/// Solves `Γ_{σ,λ}` for every `λ = 0..=|L|`.
pub fn build_game_family(s: &Scenario, sigma: &str) -> Result<GameFamily, GameError> {
    let sg = resolve_safeguard(s, sigma)?;
    let solutions = (0..=s.safeguards[sg].level_count())
        .map(|lambda| solve_game(s, sigma, lambda).map(|(_, sol)| sol))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GameFamily {
        safeguard_id: s.safeguards[sg].id.clone(),
        solutions,
    })
}

/// One family per safeguard, in scenario order. Families are solved in
/// parallel.
pub fn build_all_families(s: &Scenario) -> Result<Vec<GameFamily>, GameError> {
    s.safeguards.par_iter().map(|sg| build_game_family(s, &sg.id)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin_use_case;

    #[test]
    fn expected_loss_examples() {
        let s = builtin_use_case();
        // 0.8 * 25 * (1 - 0.6)
        let v = expected_loss(&s, "17.6", 2, "administration").unwrap();
        assert!((v - 8.0).abs() < 1e-12);
        assert_eq!(expected_loss(&s, "17.4", 0, "ict").unwrap(), 20.0);
        assert!(matches!(
            expected_loss(&s, "17.4", 4, "ict"),
            Err(GameError::LevelOutOfRange { .. })
        ));
        assert!(matches!(
            expected_loss(&s, "9.9", 1, "ict"),
            Err(GameError::UnknownSafeguard(_))
        ));
        assert!(matches!(
            expected_loss(&s, "17.4", 1, "nurses"),
            Err(GameError::UnknownGroup(_))
        ));
    }

    #[test]
    fn expected_loss_near_full_efficacy() {
        let mut s = builtin_use_case();
        s.groups[0].attack_probability = 1.0;
        s.safeguards[0].levels[2].efficacy_per_group.insert("ict".into(), 0.99);
        let v = expected_loss(&s, "17.4", 3, "ict").unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn utility_matrix_entries() {
        let s = builtin_use_case();
        let m = build_utility_matrix(&s, "17.4", 3).unwrap();
        assert_eq!((m.rows(), m.cols()), (4, 3));
        assert!((m.get(1, 0) - -14.0).abs() < 1e-12);
        assert!((m.get(3, 1) - -367.5).abs() < 1e-12);
        assert_eq!(m.row(0), [-20.0, -25.0, -20.0]);
        assert_eq!(m.safeguard_id, "17.4");
        assert_eq!(m.group_ids, ["ict", "clinical", "administration"]);
        assert!(build_utility_matrix(&s, "17.4", 4).is_err());
    }

    #[test]
    fn utility_entries_are_non_positive_under_default_weights() {
        let s = builtin_use_case();
        for sg in &s.safeguards {
            let m = build_utility_matrix(&s, &sg.id, sg.level_count()).unwrap();
            assert!((0..m.rows()).all(|j| m.row(j).iter().all(|u| *u <= 0.0)));
        }
    }

    #[test]
    fn expected_utility_examples() {
        let pennies = UtilityMatrix::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let d = MixedStrategy::uniform(Player::Defender, 2);
        let a = MixedStrategy::uniform(Player::Attacker, 2);
        assert_eq!(expected_utility(&pennies, &d, &a).unwrap(), 0.0);

        let s = builtin_use_case();
        let m = build_utility_matrix(&s, "17.4", 2).unwrap();
        let d = MixedStrategy::point_mass(Player::Defender, 3, 2);
        let a = MixedStrategy::point_mass(Player::Attacker, 3, 1);
        assert_eq!(expected_utility(&m, &d, &a).unwrap(), m.get(2, 1));

        let d = MixedStrategy::new(Player::Defender, vec![0.0, 0.2, 0.8]).unwrap();
        let expect = 0.2 * m.get(1, 0) + 0.8 * m.get(2, 0);
        let got = expected_utility(&m, &d, &MixedStrategy::point_mass(Player::Attacker, 3, 0)).unwrap();
        assert!((got - expect).abs() < 1e-12);

        assert!(matches!(
            expected_utility(&m, &MixedStrategy::uniform(Player::Defender, 2), &a),
            Err(GameError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn strategy_validation() {
        assert!(MixedStrategy::new(Player::Attacker, vec![0.5, 0.6]).is_err());
        assert!(MixedStrategy::new(Player::Attacker, vec![-0.1, 1.1]).is_err());
        assert!(MixedStrategy::new(Player::Attacker, vec![]).is_err());
        let s = MixedStrategy::new(Player::Attacker, vec![0.0, 0.25, 0.75]).unwrap();
        assert_eq!(s.support(), [1, 2]);
    }

    #[test]
    fn matrix_validation() {
        assert!(UtilityMatrix::new(vec![]).is_err());
        assert!(UtilityMatrix::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(UtilityMatrix::new(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn families_of_the_use_case() {
        let s = builtin_use_case();
        let families = build_all_families(&s).unwrap();
        assert_eq!(families.len(), 2);
        for family in &families {
            assert_eq!(family.solutions.len(), 4);
            let zero = &family.solutions[0];
            assert_eq!(zero.nsp.probabilities, [1.0]);
            assert_eq!(zero.value, -25.0);
            assert_eq!(zero.attacker_strategy.probabilities, [0.0, 1.0, 0.0]);
            for pair in family.solutions.windows(2) {
                assert!(pair[1].value >= pair[0].value - EQUILIBRIUM_TOLERANCE);
            }
            for (lambda, sol) in family.solutions.iter().enumerate() {
                assert_eq!(sol.lambda, lambda);
                let m = build_utility_matrix(&s, &family.safeguard_id, lambda).unwrap();
                assert!(sol.is_saddle_point(&m, EQUILIBRIUM_TOLERANCE));
            }
        }
    }
}
