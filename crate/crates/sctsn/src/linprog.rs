//! Dense two-phase simplex over nonnegative variables.
//!
//! Small and deterministic rather than fast: pivot selection is Dantzig's
//! rule with lowest-index tie-breaks, falling back to Bland's rule when the
//! objective stalls so cycling cannot occur. Problems here stay in the low
//! hundreds of rows.

#![allow(clippy::needless_range_loop)] // dense tableau kernels are index code

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

/// One linear constraint `sum coeffs . v  rel  rhs` over variables `v >= 0`.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
}

/// `min c.v  s.t.  rows, v >= 0`.
#[derive(Debug, Clone)]
pub struct Lp {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Error)]
pub enum LpError {
    /// No feasible point; carries the index of the row with the largest
    /// residual infeasibility after phase 1.
    #[error("infeasible (worst row {worst_row}, residual {residual:.3e})")]
    Infeasible { worst_row: usize, residual: f64 },
    #[error("objective unbounded below")]
    Unbounded,
    #[error("iteration limit exceeded")]
    IterationLimit,
}

const EPS: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-10;

/// Iterations of no objective progress before switching to Bland's rule.
const STALL_LIMIT: usize = 64;

pub fn solve_lp(lp: &Lp) -> Result<LpSolution, LpError> {
    debug_assert_eq!(lp.objective.len(), lp.num_vars);
    let m = lp.rows.len();
    let n = lp.num_vars;

    // Column layout: structural vars, slack/surplus vars, artificials, rhs.
    let mut num_slack = 0usize;
    for r in &lp.rows {
        if r.rel != Rel::Eq {
            num_slack += 1;
        }
    }
    let num_art = m; // one artificial per row keeps the start basis trivial
    let cols = n + num_slack + num_art + 1;
    let rhs_col = cols - 1;
    let mut t = vec![0.0f64; m * cols];
    let mut basis = vec![0usize; m];
    // Maps artificial column -> original row index, for infeasibility reports.
    let art_base = n + num_slack;

    let mut slack_idx = 0usize;
    for (i, row) in lp.rows.iter().enumerate() {
        let flip = row.rhs < 0.0;
        let sgn = if flip { -1.0 } else { 1.0 };
        for &(j, a) in &row.coeffs {
            debug_assert!(j < n);
            t[i * cols + j] += sgn * a;
        }
        t[i * cols + rhs_col] = sgn * row.rhs;
        let rel = if flip {
            match row.rel {
                Rel::Le => Rel::Ge,
                Rel::Ge => Rel::Le,
                Rel::Eq => Rel::Eq,
            }
        } else {
            row.rel
        };
        match rel {
            Rel::Le => {
                t[i * cols + n + slack_idx] = 1.0;
                slack_idx += 1;
            }
            Rel::Ge => {
                t[i * cols + n + slack_idx] = -1.0;
                slack_idx += 1;
            }
            Rel::Eq => {}
        }
        t[i * cols + art_base + i] = 1.0;
        basis[i] = art_base + i;
    }

    // Phase 1: minimize the sum of artificials. Reduced costs start at
    // c_j - sum of rows (c is 1 on artificials, 0 elsewhere), which zeroes
    // the artificial columns since each is basic in exactly one row.
    let mut phase1_obj = vec![0.0f64; cols];
    for i in 0..m {
        for j in 0..cols {
            phase1_obj[j] -= t[i * cols + j];
        }
    }
    for j in art_base..art_base + num_art {
        phase1_obj[j] += 1.0;
    }
    // Artificials never re-enter the basis.
    run_simplex(&mut t, &mut phase1_obj, &mut basis, m, cols, art_base)?;
    let total_artificial: f64 = (0..m)
        .filter(|&i| basis[i] >= art_base)
        .map(|i| t[i * cols + rhs_col])
        .sum();
    if total_artificial > 1e-7 {
        // Report the row whose artificial retains the largest value.
        let mut worst_row = 0;
        let mut worst = -1.0;
        for i in 0..m {
            if basis[i] >= art_base && t[i * cols + rhs_col] > worst {
                worst = t[i * cols + rhs_col];
                worst_row = basis[i] - art_base;
            }
        }
        return Err(LpError::Infeasible {
            worst_row,
            residual: worst,
        });
    }

    // Drive remaining (degenerate) artificials out of the basis.
    for i in 0..m {
        if basis[i] >= art_base {
            let mut entered = false;
            for j in 0..art_base {
                if t[i * cols + j].abs() > PIVOT_EPS {
                    pivot(&mut t, &mut basis, m, cols, i, j);
                    entered = true;
                    break;
                }
            }
            if !entered {
                // Row is all zeros: redundant constraint; leave the
                // artificial basic at value zero and forbid it from moving.
            }
        }
    }

    // Phase 2: original objective expressed over the current basis.
    let mut obj = vec![0.0f64; cols];
    obj[..n].copy_from_slice(&lp.objective);
    for i in 0..m {
        let b = basis[i];
        let c = if b < n { lp.objective[b] } else { 0.0 };
        if c != 0.0 {
            for j in 0..cols {
                obj[j] -= c * t[i * cols + j];
            }
        }
    }
    run_simplex(&mut t, &mut obj, &mut basis, m, cols, art_base)?;

    let mut x = vec![0.0f64; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[i * cols + rhs_col];
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
    Ok(LpSolution { x, objective })
}

fn run_simplex(
    t: &mut [f64],
    obj: &mut [f64],
    basis: &mut [usize],
    m: usize,
    cols: usize,
    col_limit: usize,
) -> Result<(), LpError> {
    let rhs_col = cols - 1;
    let max_cols = if col_limit == usize::MAX {
        cols - 1
    } else {
        col_limit
    };
    let max_iters = 500 * (m + cols);
    let mut stall = 0usize;
    let mut last_obj = f64::NAN;
    for _ in 0..max_iters {
        let bland = stall >= STALL_LIMIT;
        // Entering column: most negative reduced cost, or (under Bland's
        // rule) the lowest-index negative one.
        let mut enter = None;
        if bland {
            for j in 0..max_cols {
                if obj[j] < -EPS {
                    enter = Some(j);
                    break;
                }
            }
        } else {
            let mut best = -EPS;
            for j in 0..max_cols {
                if obj[j] < best {
                    best = obj[j];
                    enter = Some(j);
                }
            }
        }
        let Some(enter) = enter else {
            return Ok(());
        };
        // Ratio test; smallest basis index among ties (Bland-compatible).
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = t[i * cols + enter];
            if a > PIVOT_EPS {
                let ratio = t[i * cols + rhs_col] / a;
                match leave {
                    None => {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                    Some(cur) => {
                        if ratio < best_ratio - EPS {
                            best_ratio = ratio;
                            leave = Some(i);
                        } else if (ratio - best_ratio).abs() <= EPS && basis[i] < basis[cur] {
                            leave = Some(i);
                        }
                    }
                }
            }
        }
        let Some(leave) = leave else {
            return Err(LpError::Unbounded);
        };
        pivot(t, basis, m, cols, leave, enter);
        let factor = obj[enter];
        if factor != 0.0 {
            for j in 0..cols {
                obj[j] -= factor * t[leave * cols + j];
            }
            obj[enter] = 0.0;
        }
        // Degenerate pivots leave the objective row's constant untouched.
        let cur = obj[rhs_col];
        if last_obj.is_nan() || (cur - last_obj).abs() > 1e-12 {
            stall = 0;
            last_obj = cur;
        } else {
            stall += 1;
        }
    }
    Err(LpError::IterationLimit)
}

fn pivot(t: &mut [f64], basis: &mut [usize], m: usize, cols: usize, row: usize, col: usize) {
    let piv = t[row * cols + col];
    let inv = 1.0 / piv;
    for j in 0..cols {
        t[row * cols + j] *= inv;
    }
    t[row * cols + col] = 1.0;
    for i in 0..m {
        if i == row {
            continue;
        }
        let f = t[i * cols + col];
        if f != 0.0 {
            for j in 0..cols {
                t[i * cols + j] -= f * t[row * cols + j];
            }
            t[i * cols + col] = 0.0;
        }
    }
    basis[row] = col;
}
