//! Equilibrium by support enumeration, used as an independent check of the
//! simplex solver.
//!
//! Every matrix game has an extreme equilibrium supported on a square
//! nonsingular kernel: row set `I` and column set `J` of equal size on which
//! both players are indifferent. For each candidate kernel the two
//! indifference systems are solved directly and the result is accepted when
//! both strategies are distributions and neither player has a profitable
//! pure deviation anywhere in the full table.

use super::{GameError, GameSolution, MixedStrategy, Player, UtilityMatrix};

/// Largest `rows + cols` accepted by [`support_enumeration`].
pub const MAX_SUPPORT_DIM: usize = 12;

const SINGULAR_EPS: f64 = 1e-12;

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() <= SINGULAR_EPS * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(r);
            for (x, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

/// Indifference system for the player mixing over `own`, making the
/// opponent indifferent over `other`. Returns `(weights, value)`.
fn indifference(payoff: impl Fn(usize, usize) -> f64, own: &[usize], other: &[usize]) -> Option<(Vec<f64>, f64)> {
    let k = own.len();
    let mut a = Vec::with_capacity(k + 1);
    for &o in other {
        let mut row: Vec<f64> = own.iter().map(|&s| payoff(s, o)).collect();
        row.push(-1.0);
        a.push(row);
    }
    let mut total = vec![1.0; k];
    total.push(0.0);
    a.push(total);
    let mut b = vec![0.0; k];
    b.push(1.0);
    let mut x = solve_linear(a, b)?;
    let value = x.pop()?;
    Some((x, value))
}

fn subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << n)
        .filter(move |mask| mask.count_ones() as usize == k)
        .map(move |mask| (0..n).filter(|b| mask >> b & 1 == 1).collect())
}

fn scatter(len: usize, idx: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (&k, &w) in idx.iter().zip(weights) {
        out[k] = w.max(0.0);
    }
    out
}

/// Finds an equilibrium by enumerating square supports in order of size,
/// then lexicographically.
pub fn support_enumeration(m: &UtilityMatrix) -> Result<GameSolution, GameError> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows + cols > MAX_SUPPORT_DIM {
        return Err(GameError::TooLarge {
            rows,
            cols,
            limit: MAX_SUPPORT_DIM,
        });
    }
    let tol = 1e-10 * m.max_abs_entry().max(1.0);

    for k in 1..=rows.min(cols) {
        for levels in subsets(rows, k) {
            for groups in subsets(cols, k) {
                let Some((x, v)) = indifference(|j, i| m.get(j, i), &levels, &groups) else {
                    continue;
                };
                if x.iter().any(|p| *p < -tol) {
                    continue;
                }
                let Some((y, w)) = indifference(|i, j| m.get(j, i), &groups, &levels) else {
                    continue;
                };
                if y.iter().any(|p| *p < -tol) || (v - w).abs() > tol {
                    continue;
                }
                let defender = scatter(rows, &levels, &x);
                let attacker = scatter(cols, &groups, &y);
                let secure = m.defender_payoffs(&defender).iter().all(|u| *u >= v - tol);
                let deterred = m.level_payoffs(&attacker).iter().all(|u| *u <= v + tol);
                if secure && deterred {
                    return Ok(GameSolution {
                        safeguard_id: m.safeguard_id.clone(),
                        lambda: m.max_level,
                        nsp: MixedStrategy::normalized(Player::Defender, defender)?,
                        attacker_strategy: MixedStrategy::normalized(Player::Attacker, attacker)?,
                        value: v,
                    });
                }
            }
        }
    }
    unreachable!("every finite matrix game has a square-kernel equilibrium")
}
