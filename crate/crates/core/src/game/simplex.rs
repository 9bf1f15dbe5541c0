//! Maximin solver for zero-sum games.
//!
//! The payoff table is shifted so every entry is at least 1, which makes the
//! game value positive. The attacker's side is then the bounded LP
//!
//! ```text
//! maximize  Σ y_i   s.t.  Σ_i M'(j, i) y_i <= 1  for every level j,  y >= 0
//! ```
//!
//! whose origin is feasible, so a single-phase tableau simplex suffices. The
//! defender's optimal weights are the dual prices read off the slack columns
//! of the final tableau, and the shifted value is `1 / Σ y`.

use super::{expected_utility, GameSolution, MixedStrategy, Player, UtilityMatrix};

const PIVOT_EPS: f64 = 1e-11;

struct Tableau {
    rows: usize,
    width: usize,
    cells: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.cells[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.at(pr, pc);
        for c in 0..w {
            self.cells[pr * w + c] /= p;
        }
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let factor = self.at(r, pc);
            if factor == 0.0 {
                continue;
            }
            for c in 0..w {
                let delta = factor * self.cells[pr * w + c];
                self.cells[r * w + c] -= delta;
            }
            self.cells[r * w + pc] = 0.0;
        }
        self.basis[pr] = pc;
    }
}

/// Solves `max_δ min_i Σ_j δ(j) U_d(j, i)` and its dual.
///
/// Entering variables are chosen by lowest index (Bland's rule), so the
/// returned vertex is deterministic when optima are not unique. Single-row
/// games are answered directly: the attacker takes the column minimum,
/// earliest column on ties.
pub fn solve_maximin(m: &UtilityMatrix) -> GameSolution {
    let (rows, cols) = (m.rows(), m.cols());

    if rows == 1 {
        let row = m.row(0);
        let (target, value) =
            row.iter().copied().enumerate().fold(
                (0, f64::INFINITY),
                |best, (i, u)| if u < best.1 { (i, u) } else { best },
            );
        return GameSolution {
            safeguard_id: m.safeguard_id.clone(),
            lambda: m.max_level,
            nsp: MixedStrategy::point_mass(Player::Defender, 1, 0),
            attacker_strategy: MixedStrategy::point_mass(Player::Attacker, cols, target),
            value,
        };
    }

    let shift = 1.0 - m.min_entry();
    // Columns: y_0..y_{cols-1}, slack_0..slack_{rows-1}, rhs.
    let width = cols + rows + 1;
    let mut cells = vec![0.0; (rows + 1) * width];
    for j in 0..rows {
        for i in 0..cols {
            cells[j * width + i] = m.get(j, i) + shift;
        }
        cells[j * width + cols + j] = 1.0;
        cells[j * width + width - 1] = 1.0;
    }
    for i in 0..cols {
        cells[rows * width + i] = -1.0;
    }
    let mut t = Tableau {
        rows,
        width,
        cells,
        basis: (cols..cols + rows).collect(),
    };

    loop {
        let entering = (0..width - 1).find(|&c| t.at(rows, c) < -PIVOT_EPS);
        let Some(pc) = entering else { break };

        let mut leaving: Option<(usize, f64)> = None;
        for r in 0..rows {
            let a = t.at(r, pc);
            if a <= PIVOT_EPS {
                continue;
            }
            let ratio = t.rhs(r) / a;
            leaving = match leaving {
                None => Some((r, ratio)),
                Some((br, best)) => {
                    let tie = (ratio - best).abs() <= PIVOT_EPS * best.abs().max(1.0);
                    if (tie && t.basis[r] < t.basis[br]) || (!tie && ratio < best) {
                        Some((r, ratio))
                    } else {
                        Some((br, best))
                    }
                }
            };
        }
        // Bounded: every column of M' is strictly positive.
        let (pr, _) = leaving.expect("shifted maximin LP is bounded");
        t.pivot(pr, pc);
    }

    let mut attacker = vec![0.0; cols];
    for r in 0..rows {
        if t.basis[r] < cols {
            attacker[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    let defender: Vec<f64> = (0..rows).map(|j| t.at(rows, cols + j).max(0.0)).collect();
    let total = t.rhs(rows);

    let nsp = MixedStrategy::normalized(Player::Defender, defender).expect("dual prices form a distribution");
    let attacker_strategy =
        MixedStrategy::normalized(Player::Attacker, attacker).expect("primal solution forms a distribution");
    // `1 / Σy - shift` loses digits to the shift; the bilinear payoff of the
    // returned pair does not, and is exact when both are pure.
    debug_assert!(total > 0.0);
    let value = expected_utility(m, &nsp, &attacker_strategy).expect("dimensions match");
    GameSolution {
        safeguard_id: m.safeguard_id.clone(),
        lambda: m.max_level,
        nsp,
        attacker_strategy,
        value,
    }
}
