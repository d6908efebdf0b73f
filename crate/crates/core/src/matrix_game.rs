//! Exact equilibria of small zero-sum matrix games by support enumeration,
//! and the backward-induction Nash equilibrium of a zero-sum Markov game.

use crate::error::{Error, Result};
use crate::game::{Strategy, ZeroSumView};

/// Largest action count accepted by the support enumerator.
pub const MAX_STAGE_ACTIONS: usize = 8;

const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    /// Maximizing (row) player's mixed strategy.
    pub row: Vec<f64>,
    /// Minimizing (column) player's mixed strategy.
    pub col: Vec<f64>,
    pub value: f64,
}

/// Solves `max_x min_y x^T M y` for a row-major `rows x cols` payoff matrix.
///
/// Enumerates equal-size supports in lexicographic order and accepts the first
/// square kernel whose bordered system is nonsingular and whose solution passes
/// the equilibrium feasibility checks. Every matrix game has such a kernel, so
/// failure indicates a numerical problem.
pub fn solve_stage_nash_zero_sum(payoff: &[f64], rows: usize, cols: usize) -> Result<MatrixGameSolution> {
    if rows == 0 || cols == 0 || payoff.len() != rows * cols {
        return Err(Error::Shape(format!("payoff has {} entries for {rows}x{cols}", payoff.len())));
    }
    if rows > MAX_STAGE_ACTIONS || cols > MAX_STAGE_ACTIONS {
        return Err(Error::Shape(format!(
            "support enumeration limited to {MAX_STAGE_ACTIONS} actions per player, got {rows}x{cols}"
        )));
    }
    crate::error::check_finite(payoff, "payoff matrix")?;

    let lo = payoff.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = payoff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let mut row = vec![0.0; rows];
        let mut col = vec![0.0; cols];
        row[0] = 1.0;
        col[0] = 1.0;
        return Ok(MatrixGameSolution { row, col, value: payoff[0] });
    }
    // Affine rescale into [1, 2]: same equilibria, strictly positive value.
    let scaled: Vec<f64> = payoff.iter().map(|v| 1.0 + (v - lo) / (hi - lo)).collect();
    let at = |i: usize, j: usize| scaled[i * cols + j];

    for k in 1..=rows.min(cols) {
        for rows_set in combinations(rows, k) {
            for cols_set in combinations(cols, k) {
                // Row strategy x on rows_set equalizing the columns in cols_set.
                let Some((x, v)) = solve_bordered(k, |r, c| at(rows_set[c], cols_set[r])) else {
                    continue;
                };
                let Some((y, w)) = solve_bordered(k, |r, c| at(rows_set[r], cols_set[c])) else {
                    continue;
                };
                if x.iter().chain(&y).any(|p| *p < -FEASIBILITY_TOL) || (v - w).abs() > FEASIBILITY_TOL {
                    continue;
                }
                let mut row = vec![0.0; rows];
                for (idx, &i) in rows_set.iter().enumerate() {
                    row[i] = x[idx].max(0.0);
                }
                let mut col = vec![0.0; cols];
                for (idx, &j) in cols_set.iter().enumerate() {
                    col[j] = y[idx].max(0.0);
                }
                normalize(&mut row);
                normalize(&mut col);
                let col_ok = (0..cols).all(|j| (0..rows).map(|i| row[i] * at(i, j)).sum::<f64>() >= v - FEASIBILITY_TOL);
                let row_ok = (0..rows).all(|i| (0..cols).map(|j| at(i, j) * col[j]).sum::<f64>() <= v + FEASIBILITY_TOL);
                if col_ok && row_ok {
                    let value = (0..rows)
                        .flat_map(|i| (0..cols).map(move |j| (i, j)))
                        .map(|(i, j)| row[i] * payoff[i * cols + j] * col[j])
                        .sum();
                    return Ok(MatrixGameSolution { row, col, value });
                }
            }
        }
    }
    Err(Error::SupportEnumeration { rows, cols })
}

/// Solves `sum_c z_c m(r, c) = t` for every `r`, `sum_c z_c = 1`.
fn solve_bordered(k: usize, m: impl Fn(usize, usize) -> f64) -> Option<(Vec<f64>, f64)> {
    let n = k + 1;
    let mut a = vec![0.0; n * (n + 1)];
    for r in 0..k {
        for c in 0..k {
            a[r * (n + 1) + c] = m(r, c);
        }
        a[r * (n + 1) + k] = -1.0;
    }
    for c in 0..k {
        a[k * (n + 1) + c] = 1.0;
    }
    a[k * (n + 1) + n] = 1.0;
    let sol = gaussian_solve(&mut a, n)?;
    Some((sol[..k].to_vec(), sol[k]))
}

/// In-place Gaussian elimination with partial pivoting on an `n x (n+1)`
/// augmented matrix.
fn gaussian_solve(a: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let w = n + 1;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * w + col].abs().total_cmp(&a[j * w + col].abs()))?;
        if a[pivot * w + col].abs() < 1e-12 {
            return None;
        }
        if pivot != col {
            for c in 0..w {
                a.swap(pivot * w + c, col * w + c);
            }
        }
        for r in col + 1..n {
            let f = a[r * w + col] / a[col * w + col];
            if f != 0.0 {
                for c in col..w {
                    a[r * w + c] -= f * a[col * w + c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r * w + c] * x[c]).sum();
        x[r] = (a[r * w + n] - tail) / a[r * w + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn normalize(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= sum);
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for t in i..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// Nash equilibrium of a zero-sum Markov game on the true model, built by
/// solving the stage matrix game `r_h + P_h V_{h+1}` at every `(h, s)`.
/// Returns the equilibrium profile and `V*_h(s)` at `h * S + s`.
pub fn zero_sum_markov_nash(view: ZeroSumView<'_>) -> Result<(Strategy, Vec<f64>)> {
    let game = view.game();
    let shape = game.shape();
    let (hz, ns) = (shape.horizon, shape.states);
    let (na, nb) = (view.max_actions(), view.min_actions());
    let mut values = vec![0.0; (hz + 1) * ns];
    let mut strategy = Strategy::uniform(shape);
    for h in (0..hz).rev() {
        for s in 0..ns {
            let mut q = vec![0.0; na * nb];
            for a in 0..na {
                for b in 0..nb {
                    let joint = a * nb + b;
                    let next: f64 = game
                        .transition(h, s, joint)
                        .iter()
                        .enumerate()
                        .map(|(s2, p)| p * values[(h + 1) * ns + s2])
                        .sum();
                    q[joint] = view.reward(h, s, a, b) + next;
                }
            }
            let sol = solve_stage_nash_zero_sum(&q, na, nb)?;
            values[h * ns + s] = sol.value;
            strategy.set_dist(h, s, 0, sol.row);
            strategy.set_dist(h, s, 1, sol.col);
        }
    }
    Ok((strategy, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(combinations(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(combinations(3, 1).len(), 3);
        assert_eq!(combinations(8, 4).len(), 70);
    }

    #[test]
    fn pennies_is_uniform() {
        let sol = solve_stage_nash_zero_sum(&[1.0, -1.0, -1.0, 1.0], 2, 2).unwrap();
        assert!((sol.row[0] - 0.5).abs() < 1e-12);
        assert!((sol.col[0] - 0.5).abs() < 1e-12);
        assert!(sol.value.abs() < 1e-12);
    }

    #[test]
    fn degenerate_two_by_two() {
        let sol = solve_stage_nash_zero_sum(&[1.0, 0.0, 0.0, 0.0], 2, 2).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.col, vec![0.0, 1.0]);
    }

    #[test]
    fn singleton_matrix() {
        let sol = solve_stage_nash_zero_sum(&[0.37], 1, 1).unwrap();
        assert_eq!(sol.value, 0.37);
        assert_eq!(sol.row, vec![1.0]);
        assert_eq!(sol.col, vec![1.0]);
    }

    #[test]
    fn rock_paper_scissors_variant() {
        // Row (1/4, 1/3, 5/12) equalizes all three columns at 1/12.
        let m = [0.0, 2.0, -1.0, -1.0, 0.0, 1.0, 1.0, -1.0, 0.0];
        let sol = solve_stage_nash_zero_sum(&m, 3, 3).unwrap();
        assert!((sol.value - 1.0 / 12.0).abs() < 1e-12);
        assert!((sol.row[0] - 0.25).abs() < 1e-12);
        assert!((sol.row[2] - 5.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_oversized() {
        assert!(solve_stage_nash_zero_sum(&vec![0.0; 81], 9, 9).is_err());
    }
}
