//! Dense two-phase simplex on a full tableau.
//!
//! Problems are stated as `minimize c'x` over free or nonnegative variables
//! subject to `<=`, `>=` and `=` rows. Free variables are split into a
//! positive and a negative part. Dantzig pricing is used until a run of
//! degenerate pivots is detected, after which Bland's rule takes over for
//! the rest of the solve.

use super::SolveStatus;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarDomain {
    Free,
    NonNeg,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub domains: Vec<VarDomain>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, domains: Vec<VarDomain>) -> Self {
        assert_eq!(objective.len(), domains.len());
        LinearProgram {
            objective,
            domains,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.add(coeffs, Relation::Le, rhs)
    }

    pub fn add_ge(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.add(coeffs, Relation::Ge, rhs)
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.add(coeffs, Relation::Eq, rhs)
    }

    /// Largest violation of a constraint or domain at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for (v, d) in x.iter().zip(&self.domains) {
            if *d == VarDomain::NonNeg {
                worst = worst.max(-v);
            }
        }
        for c in &self.constraints {
            let lhs = crate::linalg::dot(&c.coeffs, x);
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LpOptions {
    pub max_iterations: usize,
    pub tol: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            max_iterations: 100_000,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Recession direction with negative cost when `Unbounded`.
    pub ray: Option<Vec<f64>>,
    /// Phase-one optimum (sum of artificial values); positive when `Infeasible`.
    pub infeasibility: f64,
}

pub fn lp_solve(lp: &LinearProgram) -> LpSolution {
    lp_solve_with(lp, &LpOptions::default())
}

struct Tableau {
    rows: usize,
    cols: usize,
    // rows x (cols + 1), last column holds the right-hand side
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize, cost: &mut [f64]) {
        let w = self.cols + 1;
        let p = self.data[r * w + c];
        for k in 0..w {
            self.data[r * w + k] /= p;
        }
        self.data[r * w + c] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for k in 0..w {
                    row[k] -= f * prow[k];
                }
                row[c] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        let f = cost[c];
        if f != 0.0 {
            for k in 0..w {
                cost[k] -= f * prow[k];
            }
            cost[c] = 0.0;
        }
        self.basis[r] = c;
    }
}

enum Outcome {
    Optimal,
    Unbounded(usize),
    IterLimit,
}

fn run_simplex(
    t: &mut Tableau,
    cost: &mut [f64],
    allowed: &[bool],
    opts: &LpOptions,
    iterations: &mut usize,
) -> Outcome {
    let mut degenerate_run = 0usize;
    let mut bland = false;
    loop {
        if *iterations >= opts.max_iterations {
            return Outcome::IterLimit;
        }
        let mut enter = None;
        let mut best = -opts.tol;
        for j in 0..t.cols {
            if !allowed[j] {
                continue;
            }
            if cost[j] < best {
                enter = Some(j);
                if bland {
                    break;
                }
                best = cost[j];
            }
        }
        let Some(col) = enter else {
            return Outcome::Optimal;
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..t.rows {
            let a = t.at(r, col);
            if a > opts.tol {
                let ratio = t.rhs(r).max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - 1e-12
                            || (ratio <= best_ratio + 1e-12 && t.basis[r] < t.basis[l])
                    }
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(row) = leave else {
            return Outcome::Unbounded(col);
        };
        if best_ratio <= 1e-12 {
            degenerate_run += 1;
            if degenerate_run > 50 {
                bland = true;
            }
        } else {
            degenerate_run = 0;
        }
        t.pivot(row, col, cost);
        *iterations += 1;
    }
}

/// Minimizes `lp.objective` over the feasible set.
pub fn lp_solve_with(lp: &LinearProgram, opts: &LpOptions) -> LpSolution {
    let nv = lp.num_vars();
    // column layout: structural (split free vars), then one slack/surplus per
    // inequality, then artificials
    let mut struct_cols = Vec::with_capacity(nv);
    let mut ncols = 0usize;
    for d in &lp.domains {
        match d {
            VarDomain::NonNeg => {
                struct_cols.push((ncols, None));
                ncols += 1;
            }
            VarDomain::Free => {
                struct_cols.push((ncols, Some(ncols + 1)));
                ncols += 2;
            }
        }
    }
    let n_struct = ncols;
    let m = lp.constraints.len();
    let mut signs = Vec::with_capacity(m);
    let mut rels = Vec::with_capacity(m);
    for c in &lp.constraints {
        let flip = c.rhs < 0.0;
        signs.push(if flip { -1.0 } else { 1.0 });
        rels.push(match (c.relation, flip) {
            (Relation::Le, false) | (Relation::Ge, true) => Relation::Le,
            (Relation::Ge, false) | (Relation::Le, true) => Relation::Ge,
            (Relation::Eq, _) => Relation::Eq,
        });
    }
    let n_slack = rels.iter().filter(|r| **r != Relation::Eq).count();
    let n_art = rels.iter().filter(|r| **r != Relation::Le).count();
    let cols = n_struct + n_slack + n_art;
    let w = cols + 1;
    let mut t = Tableau {
        rows: m,
        cols,
        data: vec![0.0; m * w],
        basis: vec![0; m],
    };
    let mut is_art = vec![false; cols];
    let mut slack = n_struct;
    let mut art = n_struct + n_slack;
    for (i, c) in lp.constraints.iter().enumerate() {
        let s = signs[i];
        let row = &mut t.data[i * w..(i + 1) * w];
        for (v, &(pos, neg)) in struct_cols.iter().enumerate() {
            row[pos] = s * c.coeffs[v];
            if let Some(neg) = neg {
                row[neg] = -s * c.coeffs[v];
            }
        }
        row[cols] = s * c.rhs;
        match rels[i] {
            Relation::Le => {
                row[slack] = 1.0;
                t.basis[i] = slack;
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -1.0;
                slack += 1;
                row[art] = 1.0;
                t.basis[i] = art;
                is_art[art] = true;
                art += 1;
            }
            Relation::Eq => {
                row[art] = 1.0;
                t.basis[i] = art;
                is_art[art] = true;
                art += 1;
            }
        }
    }

    let mut iterations = 0usize;
    let mut infeasibility = 0.0;
    let extract = |t: &Tableau| -> Vec<f64> {
        let mut col_val = vec![0.0; cols];
        for r in 0..t.rows {
            col_val[t.basis[r]] = t.rhs(r);
        }
        struct_cols
            .iter()
            .map(|&(pos, neg)| col_val[pos] - neg.map_or(0.0, |n| col_val[n]))
            .collect()
    };

    if n_art > 0 {
        let mut cost = vec![0.0; w];
        for j in 0..cols {
            if is_art[j] {
                cost[j] = 1.0;
            }
        }
        for r in 0..m {
            if is_art[t.basis[r]] {
                for (c, v) in cost.iter_mut().zip(&t.data[r * w..(r + 1) * w]) {
                    *c -= v;
                }
            }
        }
        let allowed = vec![true; cols];
        if let Outcome::IterLimit = run_simplex(&mut t, &mut cost, &allowed, opts, &mut iterations)
        {
            return LpSolution {
                status: SolveStatus::IterLimit,
                x: extract(&t),
                objective: f64::NAN,
                iterations,
                ray: None,
                infeasibility: -cost[cols],
            };
        }
        infeasibility = -cost[cols];
        let scale = lp
            .constraints
            .iter()
            .fold(1.0_f64, |s, c| s.max(c.rhs.abs()));
        if infeasibility > opts.tol * scale {
            return LpSolution {
                status: SolveStatus::Infeasible,
                x: extract(&t),
                objective: f64::NAN,
                iterations,
                ray: None,
                infeasibility,
            };
        }
        // drive remaining artificials out of the basis
        let mut dummy = vec![0.0; w];
        for r in 0..m {
            if is_art[t.basis[r]] {
                let col = (0..cols)
                    .filter(|&j| !is_art[j])
                    .max_by(|&a, &b| t.at(r, a).abs().total_cmp(&t.at(r, b).abs()));
                if let Some(col) = col {
                    if t.at(r, col).abs() > 1e-9 {
                        t.pivot(r, col, &mut dummy);
                    }
                }
            }
        }
    }

    let mut cost = vec![0.0; w];
    for (v, &(pos, neg)) in struct_cols.iter().enumerate() {
        cost[pos] = lp.objective[v];
        if let Some(neg) = neg {
            cost[neg] = -lp.objective[v];
        }
    }
    for r in 0..m {
        let b = t.basis[r];
        let f = cost[b];
        if f != 0.0 {
            for (c, v) in cost.iter_mut().zip(&t.data[r * w..(r + 1) * w]) {
                *c -= f * v;
            }
        }
    }
    let allowed: Vec<bool> = is_art.iter().map(|a| !a).collect();
    let outcome = run_simplex(&mut t, &mut cost, &allowed, opts, &mut iterations);
    let x = extract(&t);
    let objective = crate::linalg::dot(&lp.objective, &x);
    match outcome {
        Outcome::Optimal => LpSolution {
            status: SolveStatus::Optimal,
            x,
            objective,
            iterations,
            ray: None,
            infeasibility,
        },
        Outcome::IterLimit => LpSolution {
            status: SolveStatus::IterLimit,
            x,
            objective,
            iterations,
            ray: None,
            infeasibility,
        },
        Outcome::Unbounded(col) => {
            let mut dir = vec![0.0; cols];
            dir[col] = 1.0;
            for r in 0..m {
                dir[t.basis[r]] -= t.at(r, col);
            }
            let ray = struct_cols
                .iter()
                .map(|&(pos, neg)| dir[pos] - neg.map_or(0.0, |n| dir[n]))
                .collect();
            LpSolution {
                status: SolveStatus::Unbounded,
                x,
                objective: f64::NEG_INFINITY,
                iterations,
                ray: Some(ray),
                infeasibility,
            }
        }
    }
}
