//! Monte Carlo replay of attacks against defender policies.
//!
//! Each run draws `attacks_per_run` independent (level, group) pairs from the
//! defender and attacker distributions and averages the defender payoff.
//! Run `r` uses ChaCha8 stream `r` of the configured seed, so runs can be
//! executed in parallel without changing any number. Means are computed from
//! per-cell hit counts, which makes them independent of draw order and exact
//! for point-mass policies.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::game::{self, GameError, GameSolution, MixedStrategy, Player, UtilityMatrix};
use crate::scenario::Scenario;

pub const DEFAULT_SEED: u64 = 20_210_611;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("weighted defender needs a one-signed matrix; row sums would give negative probabilities")]
    MixedSignMatrix,
    #[error("weighted attacker needs a positive total asset value")]
    NoAssets,
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DefenderKind {
    #[serde(rename = "NSS")]
    Nash,
    #[serde(rename = "WSS")]
    Weighted,
    #[serde(rename = "CSS")]
    Cautious,
}

impl DefenderKind {
    pub const ALL: [DefenderKind; 3] = [DefenderKind::Nash, DefenderKind::Weighted, DefenderKind::Cautious];

    pub fn label(self) -> &'static str {
        match self {
            DefenderKind::Nash => "NSS",
            DefenderKind::Weighted => "WSS",
            DefenderKind::Cautious => "CSS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AttackerKind {
    #[serde(rename = "NAS")]
    Nash,
    #[serde(rename = "WAS")]
    Weighted,
    #[serde(rename = "OAS")]
    Opportunistic,
}

impl AttackerKind {
    pub const ALL: [AttackerKind; 3] = [AttackerKind::Nash, AttackerKind::Weighted, AttackerKind::Opportunistic];

    pub fn label(self) -> &'static str {
        match self {
            AttackerKind::Nash => "NAS",
            AttackerKind::Weighted => "WAS",
            AttackerKind::Opportunistic => "OAS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefenderPolicy {
    pub kind: DefenderKind,
    pub distribution: MixedStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackerPolicy {
    pub kind: AttackerKind,
    pub distribution: MixedStrategy,
}

/// Plays the game's equilibrium plan.
pub fn nash_defender(solution: &GameSolution) -> DefenderPolicy {
    DefenderPolicy {
        kind: DefenderKind::Nash,
        distribution: solution.nsp.clone(),
    }
}

/// Level `j` with probability `Σ_i U(j, i) / Σ_j Σ_i U(j, i)`.
///
/// This is applied literally: with non-positive payoffs the rows with the
/// largest losses get the largest probabilities. An all-zero matrix yields
/// the uniform distribution.
pub fn weighted_defender(m: &UtilityMatrix) -> Result<DefenderPolicy, SimError> {
    let has_pos = (0..m.rows()).any(|j| m.row(j).iter().any(|u| *u > 0.0));
    let has_neg = (0..m.rows()).any(|j| m.row(j).iter().any(|u| *u < 0.0));
    if has_pos && has_neg {
        return Err(SimError::MixedSignMatrix);
    }
    let sums: Vec<f64> = (0..m.rows()).map(|j| m.row(j).iter().sum()).collect();
    let total: f64 = sums.iter().sum();
    let distribution = if total == 0.0 {
        MixedStrategy::uniform(Player::Defender, m.rows())
    } else {
        MixedStrategy::normalized(Player::Defender, sums.iter().map(|s| s / total).collect())?
    };
    Ok(DefenderPolicy {
        kind: DefenderKind::Weighted,
        distribution,
    })
}

/// Always the highest level available in the game.
pub fn cautious_defender(m: &UtilityMatrix) -> DefenderPolicy {
    DefenderPolicy {
        kind: DefenderKind::Cautious,
        distribution: MixedStrategy::point_mass(Player::Defender, m.rows(), m.rows() - 1),
    }
}

pub fn nash_attacker(solution: &GameSolution) -> AttackerPolicy {
    AttackerPolicy {
        kind: AttackerKind::Nash,
        distribution: solution.attacker_strategy.clone(),
    }
}

/// Group `i` with probability `A_i / Σ A`.
pub fn weighted_attacker(s: &Scenario) -> Result<AttackerPolicy, SimError> {
    let total: f64 = s.groups.iter().map(|g| g.asset_value).sum();
    if total.is_nan() || total <= 0.0 {
        return Err(SimError::NoAssets);
    }
    let weights = s.groups.iter().map(|g| g.asset_value / total).collect();
    Ok(AttackerPolicy {
        kind: AttackerKind::Weighted,
        distribution: MixedStrategy::normalized(Player::Attacker, weights)?,
    })
}

/// Uniform over groups.
pub fn opportunistic_attacker(groups: usize) -> AttackerPolicy {
    AttackerPolicy {
        kind: AttackerKind::Opportunistic,
        distribution: MixedStrategy::uniform(Player::Attacker, groups),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub attacks_per_run: u64,
    pub runs: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            attacks_per_run: 1000,
            runs: 25,
            seed: DEFAULT_SEED,
        }
    }
}

impl SimConfig {
    fn check(&self) -> Result<(), SimError> {
        if self.attacks_per_run == 0 || self.runs == 0 {
            return Err(SimError::InvalidConfig(
                "attacks_per_run and runs must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_means: Vec<f64>,
    /// Mean over all attacks of all runs.
    pub mean: f64,
    /// Standard deviation of the run means over `sqrt(runs)`; zero for a
    /// single run.
    pub std_error: f64,
}

fn mean_from_counts(m: &UtilityMatrix, counts: &[u64], total: u64) -> f64 {
    let n = total as f64;
    counts
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(k, &c)| (c as f64 / n) * m.get(k / m.cols(), k % m.cols()))
        .sum()
}

fn sample_counts(
    rows: &WeightedIndex<f64>,
    cols: &WeightedIndex<f64>,
    width: usize,
    cells: usize,
    cfg: &SimConfig,
    run: u64,
) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(run);
    let mut counts = vec![0u64; cells];
    for _ in 0..cfg.attacks_per_run {
        let j = rows.sample(&mut rng);
        let i = cols.sample(&mut rng);
        counts[j * width + i] += 1;
    }
    counts
}

/// Simulates `cfg.runs` runs of `cfg.attacks_per_run` attacks each.
pub fn run_simulation(
    m: &UtilityMatrix,
    defender: &DefenderPolicy,
    attacker: &AttackerPolicy,
    cfg: &SimConfig,
) -> Result<RunSummary, SimError> {
    cfg.check()?;
    if defender.distribution.len() != m.rows() {
        return Err(GameError::DimensionMismatch {
            expected: m.rows(),
            found: defender.distribution.len(),
        }
        .into());
    }
    if attacker.distribution.len() != m.cols() {
        return Err(GameError::DimensionMismatch {
            expected: m.cols(),
            found: attacker.distribution.len(),
        }
        .into());
    }
    let invalid = |e| SimError::Game(GameError::InvalidStrategy(format!("{e}")));
    let rows = WeightedIndex::new(&defender.distribution.probabilities).map_err(invalid)?;
    let cols = WeightedIndex::new(&attacker.distribution.probabilities).map_err(invalid)?;
    let cells = m.rows() * m.cols();

    let per_run: Vec<Vec<u64>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| sample_counts(&rows, &cols, m.cols(), cells, cfg, run))
        .collect();

    let run_means: Vec<f64> = per_run
        .iter()
        .map(|c| mean_from_counts(m, c, cfg.attacks_per_run))
        .collect();
    let mut totals = vec![0u64; cells];
    for counts in &per_run {
        for (t, c) in totals.iter_mut().zip(counts) {
            *t += c;
        }
    }
    let mean = mean_from_counts(m, &totals, cfg.attacks_per_run * cfg.runs);
    let std_error = if cfg.runs > 1 {
        let r = cfg.runs as f64;
        let centre = run_means.iter().sum::<f64>() / r;
        let var = run_means.iter().map(|x| (x - centre).powi(2)).sum::<f64>() / (r - 1.0);
        (var / r).sqrt()
    } else {
        0.0
    };
    Ok(RunSummary {
        run_means,
        mean,
        std_error,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct GameRef {
    pub safeguard_id: String,
    pub lambda: usize,
}

impl GameRef {
    pub fn new(safeguard_id: impl Into<String>, lambda: usize) -> Self {
        GameRef {
            safeguard_id: safeguard_id.into(),
            lambda,
        }
    }

    /// `(sigma,lambda)`, e.g. `(17.4,2)`.
    pub fn label(&self) -> String {
        format!("({},{})", self.safeguard_id, self.lambda)
    }
}

/// Games `λ = 2` and `λ = 3` of every safeguard, where available.
pub fn default_games(s: &Scenario) -> Vec<GameRef> {
    s.safeguards
        .iter()
        .flat_map(|sg| {
            [2, 3]
                .into_iter()
                .filter(|&l| l <= sg.level_count())
                .map(|l| GameRef::new(sg.id.clone(), l))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub game: GameRef,
    pub defender: DefenderKind,
    pub attacker: AttackerKind,
    pub mean_utility: f64,
    pub std_error: f64,
    pub run_means: Vec<f64>,
    /// Exact bilinear payoff of the two policies.
    pub expected_utility: f64,
    pub runs: u64,
    pub attacks_per_run: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Improvement {
    pub game: GameRef,
    pub attacker: AttackerKind,
    pub nss_over_wss_pct: f64,
    pub nss_over_css_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageImprovement {
    pub attacker: AttackerKind,
    pub nss_over_wss_pct: f64,
    pub nss_over_css_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSummary {
    pub game: GameRef,
    pub value: f64,
    pub nsp: Vec<f64>,
    pub nash_attacker: Vec<f64>,
    pub weighted_defender: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub config: SimConfig,
    pub games: Vec<GameSummary>,
    pub cells: Vec<CellResult>,
    pub improvements: Vec<Improvement>,
    pub averages: Vec<AverageImprovement>,
}

impl ComparisonReport {
    pub fn cell(&self, game: &GameRef, defender: DefenderKind, attacker: AttackerKind) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| &c.game == game && c.defender == defender && c.attacker == attacker)
    }
}

/// `(U_nss - U_other) / |U_other| * 100`; positive when the equilibrium plan
/// loses less.
pub fn improvement_pct(nss: f64, other: f64) -> f64 {
    (nss - other) / other.abs() * 100.0
}

/// SplitMix64 step, used to give every cell of a comparison its own seed.
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Plays every defender policy against every attacker policy in each game.
pub fn compare_strategies(s: &Scenario, games: &[GameRef], cfg: &SimConfig) -> Result<ComparisonReport, SimError> {
    cfg.check()?;
    let was = weighted_attacker(s)?;
    let oas = opportunistic_attacker(s.groups.len());

    let mut summaries = Vec::new();
    let mut cells = Vec::new();
    let mut improvements = Vec::new();
    let mut cell_index = 0u64;
    for g in games {
        let (m, solution) = game::solve_game(s, &g.safeguard_id, g.lambda)?;
        let defenders = [nash_defender(&solution), weighted_defender(&m)?, cautious_defender(&m)];
        let attackers = [nash_attacker(&solution), was.clone(), oas.clone()];
        summaries.push(GameSummary {
            game: g.clone(),
            value: solution.value,
            nsp: solution.nsp.probabilities.clone(),
            nash_attacker: solution.attacker_strategy.probabilities.clone(),
            weighted_defender: defenders[1].distribution.probabilities.clone(),
        });

        let first = cells.len();
        for d in &defenders {
            for a in &attackers {
                let cell_cfg = SimConfig {
                    seed: derive_seed(cfg.seed, cell_index),
                    ..*cfg
                };
                cell_index += 1;
                let summary = run_simulation(&m, d, a, &cell_cfg)?;
                cells.push(CellResult {
                    game: g.clone(),
                    defender: d.kind,
                    attacker: a.kind,
                    mean_utility: summary.mean,
                    std_error: summary.std_error,
                    run_means: summary.run_means,
                    expected_utility: game::expected_utility(&m, &d.distribution, &a.distribution)?,
                    runs: cell_cfg.runs,
                    attacks_per_run: cell_cfg.attacks_per_run,
                    seed: cell_cfg.seed,
                });
            }
        }
        let block = &cells[first..];
        for (k, attacker) in AttackerKind::ALL.into_iter().enumerate() {
            // Block layout: defender-major, attacker-minor.
            let nss = block[k].mean_utility;
            let wss = block[3 + k].mean_utility;
            let css = block[6 + k].mean_utility;
            improvements.push(Improvement {
                game: g.clone(),
                attacker,
                nss_over_wss_pct: improvement_pct(nss, wss),
                nss_over_css_pct: improvement_pct(nss, css),
            });
        }
    }

    let averages = AttackerKind::ALL
        .into_iter()
        .map(|attacker| {
            let rows: Vec<&Improvement> = improvements.iter().filter(|i| i.attacker == attacker).collect();
            let n = rows.len().max(1) as f64;
            AverageImprovement {
                attacker,
                nss_over_wss_pct: rows.iter().map(|i| i.nss_over_wss_pct).sum::<f64>() / n,
                nss_over_css_pct: rows.iter().map(|i| i.nss_over_css_pct).sum::<f64>() / n,
            }
        })
        .collect();

    Ok(ComparisonReport {
        config: *cfg,
        games: summaries,
        cells,
        improvements,
        averages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_utility_matrix, solve_maximin};
    use crate::scenario::builtin_use_case;

    fn matrix(rows: &[&[f64]]) -> UtilityMatrix {
        UtilityMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn weighted_defender_ratios() {
        let d = weighted_defender(&matrix(&[&[-4.0, -6.0], &[-10.0, -20.0]])).unwrap();
        assert_eq!(d.distribution.probabilities, [0.25, 0.75]);
        let d = weighted_defender(&matrix(&[&[-1.0, -2.0], &[-2.0, -1.0], &[-3.0, 0.0]])).unwrap();
        for p in &d.distribution.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(
            weighted_defender(&matrix(&[&[-1.0, 1.0]])),
            Err(SimError::MixedSignMatrix)
        );
        let zero = weighted_defender(&matrix(&[&[0.0], &[0.0]])).unwrap();
        assert_eq!(zero.distribution.probabilities, [0.5, 0.5]);
    }

    #[test]
    fn weighted_defender_on_use_case() {
        let s = builtin_use_case();
        let m = build_utility_matrix(&s, "17.4", 2).unwrap();
        let d = weighted_defender(&m).unwrap();
        let sums: Vec<f64> = (0..3).map(|j| m.row(j).iter().sum()).collect();
        let total: f64 = sums.iter().sum();
        for (p, r) in d.distribution.probabilities.iter().zip(&sums) {
            assert!((p - r / total).abs() < 1e-15);
        }
        assert!((d.distribution.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_attacker_ratios() {
        let s = builtin_use_case();
        let a = weighted_attacker(&s).unwrap();
        let expect = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
        for (p, e) in a.distribution.probabilities.iter().zip(expect) {
            assert!((p - e).abs() < 1e-15);
        }

        let mut equal = s.clone();
        equal.groups.iter_mut().for_each(|g| g.asset_value = 7.0);
        for p in weighted_attacker(&equal).unwrap().distribution.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }

        let mut single = s.clone();
        single.groups.truncate(1);
        assert_eq!(weighted_attacker(&single).unwrap().distribution.probabilities, [1.0]);

        let mut broke = s;
        broke.groups.iter_mut().for_each(|g| g.asset_value = 0.0);
        assert_eq!(weighted_attacker(&broke), Err(SimError::NoAssets));
    }

    #[test]
    fn point_masses_are_exact() {
        let m = matrix(&[&[-0.1, -0.7], &[-0.3, -1.0 / 3.0]]);
        let d = DefenderPolicy {
            kind: DefenderKind::Cautious,
            distribution: MixedStrategy::point_mass(Player::Defender, 2, 1),
        };
        let a = AttackerPolicy {
            kind: AttackerKind::Nash,
            distribution: MixedStrategy::point_mass(Player::Attacker, 2, 1),
        };
        let cfg = SimConfig {
            attacks_per_run: 999,
            runs: 7,
            seed: 3,
        };
        let r = run_simulation(&m, &d, &a, &cfg).unwrap();
        assert!(r.run_means.iter().all(|x| *x == -1.0 / 3.0));
        assert_eq!(r.mean, -1.0 / 3.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn matching_pennies_converges() {
        let m = matrix(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        let d = DefenderPolicy {
            kind: DefenderKind::Weighted,
            distribution: MixedStrategy::uniform(Player::Defender, 2),
        };
        let a = opportunistic_attacker(2);
        let cfg = SimConfig {
            attacks_per_run: 1_000_000,
            runs: 1,
            seed: 11,
        };
        let r = run_simulation(&m, &d, &a, &cfg).unwrap();
        assert!(r.mean.abs() < 0.01, "mean {}", r.mean);
    }

    #[test]
    fn nash_cell_matches_game_value() {
        let s = builtin_use_case();
        let m = build_utility_matrix(&s, "17.4", 3).unwrap();
        let sol = solve_maximin(&m);
        let r = run_simulation(&m, &nash_defender(&sol), &nash_attacker(&sol), &SimConfig::default()).unwrap();
        assert!((r.mean - sol.value).abs() <= 3.0 * r.std_error + 1e-12);
    }

    #[test]
    fn config_and_shape_errors() {
        let m = matrix(&[&[-1.0, -2.0]]);
        let d = cautious_defender(&m);
        let a = opportunistic_attacker(2);
        let bad = SimConfig {
            runs: 0,
            ..Default::default()
        };
        assert!(matches!(
            run_simulation(&m, &d, &a, &bad),
            Err(SimError::InvalidConfig(_))
        ));
        assert!(matches!(
            run_simulation(&m, &d, &opportunistic_attacker(3), &SimConfig::default()),
            Err(SimError::Game(GameError::DimensionMismatch { .. }))
        ));
    }

    #[test]
    fn comparison_shape_and_determinism() {
        let s = builtin_use_case();
        let games = default_games(&s);
        assert_eq!(
            games.iter().map(GameRef::label).collect::<Vec<_>>(),
            ["(17.4,2)", "(17.4,3)", "(17.6,2)", "(17.6,3)"]
        );
        let cfg = SimConfig {
            attacks_per_run: 200,
            runs: 5,
            seed: 9,
        };
        let a = compare_strategies(&s, &games, &cfg).unwrap();
        let b = compare_strategies(&s, &games, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 36);
        assert_eq!(a.improvements.len(), 12);
        let seeds: std::collections::HashSet<u64> = a.cells.iter().map(|c| c.seed).collect();
        assert_eq!(seeds.len(), 36);
    }

    #[test]
    fn improvement_sign() {
        assert!((improvement_pct(-25.0, -50.0) - 50.0).abs() < 1e-12);
        assert!(improvement_pct(-30.0, -25.0) < 0.0);
    }
}
