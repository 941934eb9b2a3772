//! Dense two-phase primal simplex.
//!
//! Problems are `min c'x` subject to linear rows and `x >= 0`. Pivoting
//! follows Bland's rule, so the method terminates on degenerate problems.
//! Duals are recovered from the final basis by solving `B'y = c_B` against
//! the original columns, which makes them independent of accumulated tableau
//! round-off.

use thiserror::Error;

/// Pivot and feasibility tolerance.
pub const EPS: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row: the rate of change of the optimal objective
    /// per unit increase of that row's right-hand side.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("pivot limit reached")]
    PivotLimit,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> LinearProgram {
        LinearProgram {
            objective: vec![0.0; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, cost: f64) -> usize {
        self.objective.push(cost);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn dual_objective(&self, duals: &[f64]) -> f64 {
        self.rows.iter().zip(duals).map(|(r, y)| r.rhs * y).sum()
    }

    /// Largest violation of any row or sign constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0_f64, |w, &v| w.max(-v));
        for r in &self.rows {
            let lhs: f64 = r.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match r.relation {
                Relation::Le => lhs - r.rhs,
                Relation::Ge => r.rhs - lhs,
                Relation::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        Tableau::build(self).solve(self)
    }
}

struct Tableau {
    m: usize,
    /// Structural + slack + artificial columns.
    cols: usize,
    n_struct: usize,
    first_artificial: usize,
    /// Row-major `m x (cols + 1)`; last column is the right-hand side.
    a: Vec<f64>,
    basis: Vec<usize>,
    /// Standard-form copy of the constraint matrix (columns before artificials)
    /// used for dual recovery.
    std_a: Vec<f64>,
    /// +1 or -1: how each original row was scaled to make its rhs
    /// non-negative.
    sign: Vec<f64>,
    active: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let m = lp.rows.len();
        let n = lp.n_vars();
        let mut sign = vec![1.0; m];
        let mut rel = Vec::with_capacity(m);
        for (i, r) in lp.rows.iter().enumerate() {
            let mut relation = r.relation;
            if r.rhs < 0.0 {
                sign[i] = -1.0;
                relation = match relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            rel.push(relation);
        }
        let n_slack = rel.iter().filter(|r| **r != Relation::Eq).count();
        let n_art = rel.iter().filter(|r| **r != Relation::Le).count();
        let first_artificial = n + n_slack;
        let cols = first_artificial + n_art;
        let w = cols + 1;
        let mut a = vec![0.0; m * w];
        let mut basis = vec![0; m];
        let (mut s, mut t) = (n, first_artificial);
        for (i, r) in lp.rows.iter().enumerate() {
            for &(j, v) in &r.coeffs {
                a[i * w + j] += sign[i] * v;
            }
            a[i * w + cols] = sign[i] * r.rhs;
            match rel[i] {
                Relation::Le => {
                    a[i * w + s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    a[i * w + s] = -1.0;
                    s += 1;
                    a[i * w + t] = 1.0;
                    basis[i] = t;
                    t += 1;
                }
                Relation::Eq => {
                    a[i * w + t] = 1.0;
                    basis[i] = t;
                    t += 1;
                }
            }
        }
        let mut std_a = vec![0.0; m * first_artificial];
        for i in 0..m {
            std_a[i * first_artificial..(i + 1) * first_artificial]
                .copy_from_slice(&a[i * w..i * w + first_artificial]);
        }
        Tableau {
            m,
            cols,
            n_struct: n,
            first_artificial,
            a,
            basis,
            std_a,
            sign,
            active: vec![true; m],
            pivots: 0,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.cols + 1) + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let p = self.a[r * w + c];
        for j in 0..w {
            self.a[r * w + j] /= p;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * w + c];
            if f != 0.0 {
                for j in 0..w {
                    let v = self.a[r * w + j];
                    if v != 0.0 {
                        self.a[i * w + j] -= f * v;
                    }
                }
                self.a[i * w + c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs Bland-rule simplex on the given cost vector; columns at or beyond
    /// `limit` may not enter.
    fn optimize(&mut self, cost: &[f64], limit: usize) -> Result<(), LpError> {
        let max_pivots = 50_000 + 50 * (self.m + self.cols);
        loop {
            if self.pivots > max_pivots {
                return Err(LpError::PivotLimit);
            }
            // Reduced costs d_j = c_j - sum_i c_B(i) a_ij.
            let mut entering = None;
            for j in 0..limit {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..self.m {
                    if self.active[i] {
                        d -= cost[self.basis[i]] * self.at(i, j);
                    }
                }
                if d < -EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if !self.active[i] {
                    continue;
                }
                let aic = self.at(i, c);
                if aic > EPS {
                    let ratio = self.at(i, self.cols) / aic;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - EPS
                                || (ratio <= best + EPS && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Err(LpError::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }

    fn solve(mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        // Phase 1: minimise the sum of artificials.
        let mut phase1 = vec![0.0; self.cols];
        for c in phase1.iter_mut().skip(self.first_artificial) {
            *c = 1.0;
        }
        if self.first_artificial < self.cols {
            self.optimize(&phase1, self.cols)?;
            let infeas: f64 = (0..self.m)
                .filter(|&i| self.basis[i] >= self.first_artificial)
                .map(|i| self.at(i, self.cols))
                .sum();
            if infeas > EPS * (1.0 + self.rhs_scale()) {
                return Err(LpError::Infeasible);
            }
            // Drive remaining (zero-level) artificials out of the basis; rows
            // where that is impossible are redundant.
            for i in 0..self.m {
                if self.basis[i] < self.first_artificial {
                    continue;
                }
                let col = (0..self.first_artificial)
                    .filter(|j| !self.basis.contains(j))
                    .max_by(|&p, &q| self.at(i, p).abs().total_cmp(&self.at(i, q).abs()))
                    .filter(|&j| self.at(i, j).abs() > EPS);
                match col {
                    Some(j) => self.pivot(i, j),
                    None => self.active[i] = false,
                }
            }
        }

        // Phase 2 on the real objective, artificials barred.
        let mut cost = vec![0.0; self.cols];
        cost[..self.n_struct].copy_from_slice(&lp.objective);
        self.optimize(&cost, self.first_artificial)?;

        let mut x = vec![0.0; self.n_struct];
        for i in 0..self.m {
            if self.active[i] && self.basis[i] < self.n_struct {
                x[self.basis[i]] = self.at(i, self.cols).max(0.0);
            }
        }
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let duals = self.recover_duals(&cost);
        Ok(LpSolution {
            x,
            objective,
            duals,
            pivots: self.pivots,
        })
    }

    fn rhs_scale(&self) -> f64 {
        (0..self.m).map(|i| self.at(i, self.cols).abs()).fold(0.0, f64::max)
    }

    /// Solves `B' y = c_B` over active rows using the original standard-form
    /// columns, then undoes the row sign normalisation.
    fn recover_duals(&self, cost: &[f64]) -> Vec<f64> {
        let rows: Vec<usize> = (0..self.m).filter(|&i| self.active[i]).collect();
        let k = rows.len();
        let fa = self.first_artificial;
        // Matrix M = B' : M[r][s] = A[rows[s]][basis[rows[r]]]
        let mut mat = vec![0.0; k * (k + 1)];
        for (r, &ir) in rows.iter().enumerate() {
            let col = self.basis[ir];
            for (s, &is) in rows.iter().enumerate() {
                mat[r * (k + 1) + s] = if col < fa { self.std_a[is * fa + col] } else { 0.0 };
            }
            mat[r * (k + 1) + k] = if col < fa { cost[col] } else { 0.0 };
        }
        let y = solve_dense(&mut mat, k);
        let mut duals = vec![0.0; self.m];
        for (s, &is) in rows.iter().enumerate() {
            duals[is] = y[s] * self.sign[is];
        }
        duals
    }
}

/// Gaussian elimination with partial pivoting on an augmented `k x (k+1)`
/// row-major matrix. Singular directions get a zero component.
fn solve_dense(m: &mut [f64], k: usize) -> Vec<f64> {
    let w = k + 1;
    let mut piv_col = vec![usize::MAX; k];
    let mut row = 0;
    for col in 0..k {
        let best = (row..k).max_by(|&p, &q| m[p * w + col].abs().total_cmp(&m[q * w + col].abs()));
        let Some(b) = best else { break };
        if m[b * w + col].abs() < 1e-12 {
            continue;
        }
        for j in 0..w {
            m.swap(row * w + j, b * w + j);
        }
        let p = m[row * w + col];
        for j in 0..w {
            m[row * w + j] /= p;
        }
        for i in 0..k {
            if i != row {
                let f = m[i * w + col];
                if f != 0.0 {
                    for j in 0..w {
                        m[i * w + j] -= f * m[row * w + j];
                    }
                }
            }
        }
        piv_col[row] = col;
        row += 1;
    }
    let mut y = vec![0.0; k];
    for r in 0..row {
        y[piv_col[r]] = m[r * w + k];
    }
    y
}
