//! Stability analysis of linear inequality systems: strong Slater certification,
//! the distance formula, the exact Lipschitzian bound, coderivatives and
//! epsilon-active subsystems.

use crate::error::{Error, Result};
use crate::kernel::{
    lp_solve, max_ratio_over_hull, min_norm_sliced_hull, wolfe_min_norm, LinearProgram,
    SimplexWeights, SolveStatus, VarDomain,
};
use crate::linalg::{axpy, dot};
use crate::model::{
    characteristic_generators, BlockPartition, LinearSystem, NormSpec, Perturbation, DEFAULT_TOL,
};

pub const TRUNCATION_NOTE: &str =
    "truncation: bound may underestimate the infinite system's modulus";

#[derive(Clone, Debug, PartialEq)]
pub struct SscReport {
    pub holds: bool,
    /// Minimizer of the LP route, when one was found.
    pub slater_point: Option<Vec<f64>>,
    /// `max_t (<a_t, x> - b_t)` at `slater_point`.
    pub margin: f64,
    /// Euclidean norm of the min-norm point of `co {(a_t, b_t)}`.
    pub hull_gap: f64,
    pub lp_holds: bool,
    pub hull_holds: bool,
    /// False when the nominal system has no solution at all. The hull
    /// verdict does not apply then.
    pub consistent: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    SlaterPoint,
    Regular,
    SscFails,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::SlaterPoint => "SlaterPoint",
            Regime::Regular => "Regular",
            Regime::SscFails => "SSCFails",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipReport {
    pub bound: f64,
    pub regime: Regime,
    /// `u*` attaining the minimal norm on the slice.
    pub minimizer: Option<Vec<f64>>,
    pub slice_weights: SimplexWeights,
    pub ssc: SscReport,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoderivCertificate {
    /// `mu_t >= 0`, one per row.
    pub cone_weights: Vec<f64>,
    /// `p*_j = -sum_{t in T_j} mu_t`.
    pub p_star: Vec<f64>,
    /// `x* = -sum_t mu_t a_t`.
    pub x_star: Vec<f64>,
    /// L1 residual of the anchor identity at `cone_weights`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Membership {
    pub member: bool,
    pub certificate: CoderivCertificate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoderivNorm {
    pub value: f64,
    /// Maximizing cone weights per row; empty when the value is infinite.
    pub weights: Vec<f64>,
    /// LP solves used (one for polyhedral norms).
    pub rounds: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsActiveReport {
    pub indices: Vec<usize>,
    pub labels: Vec<String>,
    pub report: LipReport,
    pub full_bound: f64,
    pub matches_full: bool,
}

fn empty_ssc() -> SscReport {
    SscReport {
        holds: true,
        slater_point: None,
        margin: f64::NEG_INFINITY,
        hull_gap: f64::INFINITY,
        lp_holds: true,
        hull_holds: true,
        consistent: true,
    }
}

/// Certifies the strong Slater condition by two independent routes.
pub fn check_ssc(system: &LinearSystem, tol: f64) -> Result<SscReport> {
    if system.is_empty() {
        return Ok(empty_ssc());
    }
    let n = system.dimension;
    // min s  s.t.  <a_t, x> - s <= b_t,  s >= -1
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut lp = LinearProgram::new(objective, vec![VarDomain::Free; n + 1]);
    for row in &system.rows {
        let mut c = row.a.clone();
        c.push(-1.0);
        lp.add_le(c, row.b);
    }
    let mut floor = vec![0.0; n + 1];
    floor[n] = 1.0;
    lp.add_ge(floor, -1.0);
    let sol = lp_solve(&lp);
    if sol.status != SolveStatus::Optimal {
        return Err(Error::NonConvergent {
            what: "Slater LP",
            iterations: sol.iterations,
            gap: f64::NAN,
        });
    }
    let x = sol.x[..n].to_vec();
    let margin = system.max_residual(&x);
    let lp_holds = margin < -tol;
    let consistent = margin <= tol;

    let points: Vec<Vec<f64>> = system
        .rows
        .iter()
        .map(|r| {
            let mut v = r.a.clone();
            v.push(r.b);
            v
        })
        .collect();
    let hull_gap = wolfe_min_norm(&points).norm();
    let hull_holds = hull_gap > tol;

    if consistent && lp_holds != hull_holds {
        // both quantities vanish together; only flag clear contradictions
        let gray = 1e3 * tol;
        if margin < -gray || hull_gap > gray {
            return Err(Error::SscDisagreement { margin, hull_gap });
        }
    }
    Ok(SscReport {
        holds: lp_holds,
        slater_point: Some(x),
        margin,
        hull_gap,
        lp_holds,
        hull_holds,
        consistent,
    })
}

/// `dist(x; F_J(p))` via the hull ratio formula. Requires the strong Slater
/// condition for the perturbed system.
pub fn distance_formula(
    system: &LinearSystem,
    partition: &BlockPartition,
    p: &Perturbation,
    x: &[f64],
) -> Result<f64> {
    let blocks = partition.row_blocks(system)?;
    check_arity(p, blocks.n_blocks)?;
    check_point(system, x)?;
    let perturbed = system.perturbed(&blocks, p);
    let ssc = check_ssc(&perturbed, DEFAULT_TOL)?;
    if !ssc.holds {
        return Err(Error::SscViolated { margin: ssc.margin });
    }
    if system.is_empty() {
        return Ok(0.0);
    }
    let gens = characteristic_generators(system, &blocks, p);
    Ok(max_ratio_over_hull(&gens, x, system.norm)?.value)
}

fn check_point(system: &LinearSystem, x: &[f64]) -> Result<()> {
    if x.len() != system.dimension {
        return Err(Error::InvalidArgument(format!(
            "point has {} entries, system dimension is {}",
            x.len(),
            system.dimension
        )));
    }
    Ok(())
}

fn check_arity(p: &Perturbation, blocks: usize) -> Result<()> {
    if p.len() != blocks {
        return Err(Error::InvalidArgument(format!(
            "perturbation has {} values for {} blocks",
            p.len(),
            blocks
        )));
    }
    Ok(())
}

fn check_anchor(system: &LinearSystem, anchor: &[f64]) -> Result<()> {
    check_point(system, anchor)?;
    let residual = system.max_residual(anchor);
    if residual > DEFAULT_TOL {
        return Err(Error::InfeasibleAnchor { residual });
    }
    Ok(())
}

fn notes_for(system: &LinearSystem) -> Vec<String> {
    let mut notes = Vec::new();
    if let Some(t) = &system.truncation {
        notes.push(format!("{TRUNCATION_NOTE} ({t})"));
    }
    notes
}

/// Exact Lipschitzian bound of the feasible set mapping at `(0, anchor)`.
/// The value does not depend on the block partition.
pub fn lip_bound(system: &LinearSystem, anchor: &[f64]) -> Result<LipReport> {
    check_anchor(system, anchor)?;
    let ssc = check_ssc(system, DEFAULT_TOL)?;
    let notes = notes_for(system);
    let m = system.len();
    if !ssc.holds {
        return Ok(LipReport {
            bound: f64::INFINITY,
            regime: Regime::SscFails,
            minimizer: None,
            slice_weights: SimplexWeights(vec![0.0; m]),
            ssc,
            notes,
        });
    }
    if system.is_empty() {
        return Ok(LipReport {
            bound: 0.0,
            regime: Regime::SlaterPoint,
            minimizer: None,
            slice_weights: SimplexWeights(Vec::new()),
            ssc,
            notes,
        });
    }
    let slice = min_norm_sliced_hull(
        &system.nominal_generators(),
        anchor,
        system.norm,
        DEFAULT_TOL,
    )?;
    let report = match slice.status {
        SolveStatus::NoIntersection => LipReport {
            bound: 0.0,
            regime: Regime::SlaterPoint,
            minimizer: None,
            slice_weights: slice.weights,
            ssc,
            notes,
        },
        _ if slice.value <= 0.0 => LipReport {
            bound: f64::INFINITY,
            regime: Regime::SscFails,
            minimizer: Some(slice.minimizer),
            slice_weights: slice.weights,
            ssc,
            notes,
        },
        _ => LipReport {
            bound: 1.0 / slice.value,
            regime: Regime::Regular,
            minimizer: Some(slice.minimizer),
            slice_weights: slice.weights,
            ssc,
            notes,
        },
    };
    Ok(report)
}

/// Decides whether `(p*, x*)` is a coderivative pair at `(0, anchor)`, i.e.
/// whether `(p*, -x*, -<x*, anchor>)` lies in `cone {(-delta_j, a_t, b_t)}`.
pub fn coderivative_member(
    system: &LinearSystem,
    partition: &BlockPartition,
    anchor: &[f64],
    p_star: &[f64],
    x_star: &[f64],
) -> Result<Membership> {
    let blocks = partition.row_blocks(system)?;
    check_anchor(system, anchor)?;
    if p_star.len() != blocks.n_blocks {
        return Err(Error::InvalidArgument(format!(
            "p* has {} entries for {} blocks",
            p_star.len(),
            blocks.n_blocks
        )));
    }
    check_point(system, x_star)?;
    let m = system.len();
    let n = system.dimension;
    let k = blocks.n_blocks;
    let eqs = k + n + 1;

    let mut target = p_star.to_vec();
    target.extend(x_star.iter().map(|v| -v));
    target.push(-dot(x_star, anchor));

    // variables: mu (m), e+ (eqs), e- (eqs)
    let nv = m + 2 * eqs;
    let mut objective = vec![0.0; nv];
    objective[m..].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = LinearProgram::new(objective, vec![VarDomain::NonNeg; nv]);
    for (i, &rhs) in target.iter().enumerate() {
        let mut c = vec![0.0; nv];
        for (t, row) in system.rows.iter().enumerate() {
            c[t] = if i < k {
                if blocks.of_row[t] == i {
                    -1.0
                } else {
                    0.0
                }
            } else if i < k + n {
                row.a[i - k]
            } else {
                row.b
            };
        }
        c[m + i] = 1.0;
        c[m + eqs + i] = -1.0;
        lp.add_eq(c, rhs);
    }
    let sol = lp_solve(&lp);
    if sol.status != SolveStatus::Optimal {
        return Err(Error::NonConvergent {
            what: "coderivative membership LP",
            iterations: sol.iterations,
            gap: f64::NAN,
        });
    }
    let mu: Vec<f64> = sol.x[..m].iter().map(|v| v.max(0.0)).collect();

    let mut p_induced = vec![0.0; k];
    let mut x_induced = vec![0.0; n];
    let mut last = 0.0;
    for ((row, &j), &w) in system.rows.iter().zip(&blocks.of_row).zip(&mu) {
        p_induced[j] -= w;
        axpy(-w, &row.a, &mut x_induced);
        last += w * row.b;
    }
    let mut lhs = p_induced.clone();
    lhs.extend(x_induced.iter().map(|v| -v));
    lhs.push(last);
    let residual: f64 = lhs.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum();
    let scale = target.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
    Ok(Membership {
        member: residual <= DEFAULT_TOL * scale,
        certificate: CoderivCertificate {
            cone_weights: mu,
            p_star: p_induced,
            x_star: x_induced,
            residual,
        },
    })
}

const KELLEY_MAX_ROUNDS: usize = 5000;
const KELLEY_GAP: f64 = 1e-10;

/// Coderivative norm `sup { ||p*|| : p* in D*F(0, anchor)(y*), ||y*|| <= 1 }`,
/// computed as a cone program independent of the min-norm slice.
pub fn coderivative_norm(
    system: &LinearSystem,
    partition: &BlockPartition,
    anchor: &[f64],
) -> Result<CoderivNorm> {
    partition.row_blocks(system)?;
    check_anchor(system, anchor)?;
    let m = system.len();
    let n = system.dimension;
    let active: Vec<usize> = system
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            let ua = dot(&r.a, anchor);
            let scale = 1.0_f64.max(r.b.abs()).max(ua.abs());
            (ua - r.b).abs() <= DEFAULT_TOL * scale
        })
        .map(|(t, _)| t)
        .collect();
    if active.is_empty() {
        return Ok(CoderivNorm {
            value: 0.0,
            weights: vec![0.0; m],
            rounds: 0,
        });
    }
    let k = active.len();
    let column = |i: usize| -> Vec<f64> { active.iter().map(|&t| system.rows[t].a[i]).collect() };
    let spread = |mu: &[f64]| -> Vec<f64> {
        let mut w = vec![0.0; m];
        for (&t, &v) in active.iter().zip(mu) {
            w[t] = v.max(0.0);
        }
        w
    };
    let unbounded = || CoderivNorm {
        value: f64::INFINITY,
        weights: Vec::new(),
        rounds: 1,
    };

    match system.norm.dual() {
        NormSpec::LInf => {
            let mut lp = LinearProgram::new(vec![-1.0; k], vec![VarDomain::NonNeg; k]);
            for i in 0..n {
                let c = column(i);
                lp.add_le(c.clone(), 1.0);
                lp.add_ge(c, -1.0);
            }
            let sol = lp_solve(&lp);
            match sol.status {
                SolveStatus::Unbounded => Ok(unbounded()),
                SolveStatus::Optimal => Ok(CoderivNorm {
                    value: -sol.objective,
                    weights: spread(&sol.x),
                    rounds: 1,
                }),
                _ => Err(lp_failure(sol.iterations)),
            }
        }
        NormSpec::L1 => {
            // variables mu (k), s (n) with |(A mu)_i| <= s_i, sum s <= 1
            let nv = k + n;
            let mut objective = vec![0.0; nv];
            objective[..k].iter_mut().for_each(|c| *c = -1.0);
            let mut lp = LinearProgram::new(objective, vec![VarDomain::NonNeg; nv]);
            for i in 0..n {
                let mut up = column(i);
                up.resize(nv, 0.0);
                let mut down: Vec<f64> = up.iter().map(|v| -v).collect();
                up[k + i] = -1.0;
                down[k + i] = -1.0;
                lp.add_le(up, 0.0);
                lp.add_le(down, 0.0);
            }
            let mut budget = vec![0.0; nv];
            budget[k..].iter_mut().for_each(|c| *c = 1.0);
            lp.add_le(budget, 1.0);
            let sol = lp_solve(&lp);
            match sol.status {
                SolveStatus::Unbounded => Ok(unbounded()),
                SolveStatus::Optimal => Ok(CoderivNorm {
                    value: -sol.objective,
                    weights: spread(&sol.x[..k]),
                    rounds: 1,
                }),
                _ => Err(lp_failure(sol.iterations)),
            }
        }
        NormSpec::Euclid => {
            // Kelley outer approximation of the Euclidean ball
            let mut lp = LinearProgram::new(vec![-1.0; k], vec![VarDomain::NonNeg; k]);
            for i in 0..n {
                let c = column(i);
                lp.add_le(c.clone(), 1.0);
                lp.add_ge(c, -1.0);
            }
            let rows: Vec<&[f64]> = active
                .iter()
                .map(|&t| system.rows[t].a.as_slice())
                .collect();
            let mut lower = 0.0_f64;
            let mut best = vec![0.0; k];
            for round in 1..=KELLEY_MAX_ROUNDS {
                let sol = lp_solve(&lp);
                match sol.status {
                    SolveStatus::Unbounded => return Ok(unbounded()),
                    SolveStatus::Optimal => {}
                    _ => return Err(lp_failure(sol.iterations)),
                }
                let mu = &sol.x;
                let upper = -sol.objective;
                let mut z = vec![0.0; n];
                for (&w, a) in mu.iter().zip(&rows) {
                    axpy(w, a, &mut z);
                }
                let zn = crate::linalg::norm2(&z);
                let total: f64 = mu.iter().sum();
                let candidate = if zn > 1.0 { total / zn } else { total };
                if candidate > lower {
                    lower = candidate;
                    let s = zn.max(1.0);
                    best = mu.iter().map(|v| v / s).collect();
                }
                if upper - lower <= KELLEY_GAP * upper.max(1.0) {
                    return Ok(CoderivNorm {
                        value: lower,
                        weights: spread(&best),
                        rounds: round,
                    });
                }
                let cut: Vec<f64> = rows.iter().map(|a| dot(a, &z) / zn).collect();
                lp.add_le(cut, 1.0);
            }
            Err(Error::NonConvergent {
                what: "coderivative norm cutting planes",
                iterations: KELLEY_MAX_ROUNDS,
                gap: f64::NAN,
            })
        }
    }
}

fn lp_failure(iterations: usize) -> Error {
    Error::NonConvergent {
        what: "coderivative norm LP",
        iterations,
        gap: f64::NAN,
    }
}

/// Recomputes the bound over `T_eps(anchor) = {t : <a_t, anchor> >= b_t - eps}`.
pub fn eps_active(system: &LinearSystem, anchor: &[f64], eps: f64) -> Result<EpsActiveReport> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be >= 0, got {eps}"
        )));
    }
    check_anchor(system, anchor)?;
    let indices: Vec<usize> = system
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| dot(&r.a, anchor) >= r.b - eps)
        .map(|(t, _)| t)
        .collect();
    let sub = system.subsystem(&indices);
    let report = lip_bound(&sub, anchor)?;
    let full_bound = lip_bound(system, anchor)?.bound;
    let matches_full = same_bound(report.bound, full_bound, 1e-9);
    Ok(EpsActiveReport {
        labels: indices
            .iter()
            .map(|&t| system.rows[t].label.clone())
            .collect(),
        indices,
        report,
        full_bound,
        matches_full,
    })
}

/// Relative comparison of extended nonnegative scalars.
pub fn same_bound(a: f64, b: f64, rel: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
