//! Optimal selection of cyber-hygiene safeguards.
//!
//! The pipeline has three stages:
//!
//! 1. [`game`]: for every safeguard and every highest admissible level `λ`,
//!    solve the zero-sum game between a defender choosing an application
//!    level and an attacker choosing a user group. The defender's
//!    equilibrium strategy is the Nash safeguards plan for that `λ`.
//! 2. [`knapsack`]: fund exactly one plan per safeguard within the budget,
//!    minimizing the aggregated residual expected loss.
//! 3. [`simulate`]: replay sampled attacks to compare the equilibrium plans
//!    against weighted and cautious defenders.
//!
//! ```
//! use ost_core::{builtin_use_case, build_all_families, enumerate_candidates, solve_exhaustive};
//!
//! let scenario = builtin_use_case();
//! let families = build_all_families(&scenario).unwrap();
//! let candidates = enumerate_candidates(&scenario, &families).unwrap();
//! let plan = solve_exhaustive(&scenario, &candidates, 0.0).unwrap();
//! assert_eq!(plan.portfolio.objective, 65.0);
//! ```

pub mod export;
pub mod game;
pub mod knapsack;
pub mod scenario;
pub mod simulate;

pub use export::{ExportError, SolutionRecord};
pub use game::{
    build_all_families, build_game_family, build_utility_matrix, expected_loss, expected_utility, plan_efficacy,
    plan_expected_loss, plan_financial_cost, solve_maximin, support_enumeration, GameError, GameFamily, GameSolution,
    MixedStrategy, Player, UtilityMatrix, EQUILIBRIUM_TOLERANCE,
};
pub use knapsack::{
    enumerate_candidates, portfolio_objective, solve_dp, solve_exhaustive, Candidate, FrontierEntry,
    InvestmentSolution, KnapsackError, Portfolio,
};
pub use scenario::{
    builtin_use_case, load_scenario, validate_scenario, LevelSpec, SafeguardSpec, Scenario, ScenarioError, UserGroup,
    Violation, ViolationCode, Weights,
};
pub use simulate::{
    compare_strategies, run_simulation, weighted_attacker, weighted_defender, AttackerKind, AttackerPolicy,
    ComparisonReport, DefenderKind, DefenderPolicy, GameRef, SimConfig, SimError,
};
