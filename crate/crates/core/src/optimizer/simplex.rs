//! Dense two-phase tableau simplex for small standard-form programs.
//!
//! The feasibility program solved here has one row per station plus the
//! bandwidth budget, so the tableau stays tiny in rows while columns scale
//! with the number of sharing combinations. Dantzig pricing with a Bland
//! fallback after a pivot budget guards against cycling.

const PIVOT_EPS: f64 = 1e-10;
const FEAS_EPS: f64 = 1e-8;

/// `minimize costs . x  subject to  rows x = rhs, x >= 0`, with `rhs >= 0`.
pub(crate) struct StandardLp {
    pub costs: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64> },
    Infeasible,
    Unbounded,
}

#[derive(Debug)]
pub(crate) struct LpFailure(pub String);

struct Tableau {
    /// Constraint rows, `m x (n + 1)`; the last column is the rhs.
    rows: Vec<Vec<f64>>,
    /// Reduced costs plus the negated objective value in the last slot.
    obj: Vec<f64>,
    /// Basic column per row.
    basis: Vec<usize>,
    /// Columns eligible to enter (artificials get disabled for phase 2).
    enterable: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    fn num_cols(&self) -> usize {
        self.obj.len() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let inv = 1.0 / self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        self.rows[row][col] = 1.0;
        let pivot_row = self.rows[row].clone();
        for (r, other) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = other[col];
            if factor != 0.0 {
                for (v, p) in other.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                other[col] = 0.0;
            }
        }
        let factor = self.obj[col];
        if factor != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Run simplex iterations until optimal or unbounded.
    fn optimize(&mut self, max_pivots: usize) -> Result<bool, LpFailure> {
        let n = self.num_cols();
        // Dantzig pricing normally finishes in a handful of pivots here;
        // switch to Bland's rule early if it ever stalls on degeneracy.
        let bland_after = 200 + 10 * self.rows.len();
        loop {
            if self.pivots > max_pivots {
                return Err(LpFailure(format!("simplex exceeded {max_pivots} pivots")));
            }
            // Pricing: most negative reduced cost, or first negative once
            // the pivot budget suggests cycling.
            let use_bland = self.pivots > bland_after;
            let mut entering = None;
            let mut best = -PIVOT_EPS;
            for j in 0..n {
                if !self.enterable[j] {
                    continue;
                }
                let c = self.obj[j];
                if c < best {
                    entering = Some(j);
                    if use_bland {
                        break;
                    }
                    best = c;
                }
            }
            let Some(col) = entering else {
                return Ok(true); // optimal
            };

            // Ratio test; ties by smallest basis index for determinism.
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a > PIVOT_EPS {
                    let ratio = self.rows[r][n] / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - PIVOT_EPS
                                || (ratio < lratio + PIVOT_EPS && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return Ok(false), // unbounded
            }
        }
    }
}

/// Two-phase dense simplex.
pub(crate) fn solve_standard_form(lp: &StandardLp) -> Result<LpOutcome, LpFailure> {
    let m = lp.rows.len();
    let n = lp.costs.len();
    debug_assert!(lp.rhs.iter().all(|&b| b >= 0.0));
    debug_assert!(lp.rows.iter().all(|r| r.len() == n));

    // Phase 1: artificial basis, minimize the sum of artificials.
    let total = n + m;
    let mut rows = Vec::with_capacity(m);
    for (r, lp_row) in lp.rows.iter().enumerate() {
        let mut row = Vec::with_capacity(total + 1);
        row.extend_from_slice(lp_row);
        for a in 0..m {
            row.push(if a == r { 1.0 } else { 0.0 });
        }
        row.push(lp.rhs[r]);
        rows.push(row);
    }
    // Reduced costs of `min sum(artificials)` with the artificial basis:
    // minus the column sums of the structural part. The last slot holds the
    // negated objective value, matching the elimination updates.
    let mut obj = vec![0.0; total + 1];
    for j in 0..n {
        obj[j] = -rows.iter().map(|r| r[j]).sum::<f64>();
    }
    obj[total] = -rows.iter().map(|r| r[total]).sum::<f64>();

    let mut tab = Tableau {
        rows,
        obj,
        basis: (n..total).collect(),
        enterable: (0..total).map(|j| j < n).collect(),
        pivots: 0,
    };
    let max_pivots = 100_000;
    if !tab.optimize(max_pivots)? {
        return Err(LpFailure("phase 1 reported unbounded".into()));
    }
    let scale = 1.0 + lp.rhs.iter().cloned().fold(0.0, f64::max);
    if -tab.obj[total] > FEAS_EPS * scale {
        return Ok(LpOutcome::Infeasible);
    }

    // Drive leftover artificials out of the basis where possible; a row
    // whose structural coefficients are all zero is redundant and stays.
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| tab.rows[r][j].abs() > PIVOT_EPS) {
                tab.pivot(r, col);
            }
        }
    }

    // Phase 2: real costs, artificials locked out.
    for j in n..total {
        tab.enterable[j] = false;
    }
    let mut obj = vec![0.0; total + 1];
    for (j, o) in obj.iter_mut().enumerate().take(n) {
        let mut c = lp.costs[j];
        for r in 0..m {
            if tab.basis[r] < n {
                c -= lp.costs[tab.basis[r]] * tab.rows[r][j];
            }
        }
        *o = c;
    }
    let mut value = 0.0;
    for r in 0..m {
        if tab.basis[r] < n {
            value += lp.costs[tab.basis[r]] * tab.rows[r][total];
        }
    }
    obj[total] = -value;
    tab.obj = obj;

    if !tab.optimize(max_pivots)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rows[r][total].max(0.0);
        }
    }
    Ok(LpOutcome::Optimal { x })
}
