//! Minimum-norm points of finitely generated convex hulls.
//!
//! [`wolfe_min_norm`] is Wolfe's algorithm for the Euclidean case. The
//! sliced variant restricts the hull to `{(u, alpha) : <u, anchor> = alpha}`.
//! The slice of a simplex by one hyperplane is again a polytope whose
//! vertices are the generators lying on the hyperplane and, for every pair
//! on opposite sides, the crossing point of their segment; the minimum is
//! taken over the hull of those vertices.

use super::lp::{lp_solve, LinearProgram, VarDomain};
use super::{SimplexWeights, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, solve_dense};
use crate::model::{CharacteristicSet, NormSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct MinNormPoint {
    pub point: Vec<f64>,
    pub weights: SimplexWeights,
    pub iterations: usize,
}

impl MinNormPoint {
    pub fn norm(&self) -> f64 {
        crate::linalg::norm2(&self.point)
    }
}

/// Euclidean minimum-norm point of `co(points)`.
pub fn wolfe_min_norm(points: &[Vec<f64>]) -> MinNormPoint {
    assert!(!points.is_empty(), "hull of an empty set");
    let dim = points[0].len();
    let m = points.len();
    let sq: Vec<f64> = points.iter().map(|p| dot(p, p)).collect();
    let max_sq = sq.iter().fold(0.0_f64, |a, &b| a.max(b)).max(1e-300);
    let eps = 1e-12;

    let start = (0..m)
        .min_by(|&a, &b| sq[a].total_cmp(&sq[b]).then(a.cmp(&b)))
        .unwrap();
    let mut set = vec![start];
    let mut w = vec![1.0];
    let mut x = points[start].clone();
    let mut iterations = 0;
    let cap = 50 * (m + dim) + 1000;

    'major: while iterations < cap {
        iterations += 1;
        let xx = dot(&x, &x);
        if xx <= 1e-30 * max_sq {
            break;
        }
        let (j, best) = (0..m)
            .map(|t| (t, dot(&x, &points[t])))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap();
        if best >= xx - eps * max_sq || set.contains(&j) {
            break;
        }
        set.push(j);
        w.push(0.0);
        loop {
            iterations += 1;
            let Some(v) = affine_min_norm(points, &set) else {
                // affinely dependent corral; keep the current point
                set.pop();
                w.pop();
                break 'major;
            };
            if v.iter().all(|&vi| vi > eps) {
                w = v;
                break;
            }
            let mut theta = 1.0_f64;
            for (wi, vi) in w.iter().zip(&v) {
                if *vi <= eps {
                    let d = wi - vi;
                    if d > 0.0 {
                        theta = theta.min(wi / d);
                    }
                }
            }
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi = theta * vi + (1.0 - theta) * *wi;
            }
            // drop at least the smallest weight
            let min_idx = (0..w.len()).min_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
            let mut keep_set = Vec::with_capacity(set.len());
            let mut keep_w = Vec::with_capacity(set.len());
            for (k, (&s, &wk)) in set.iter().zip(&w).enumerate() {
                if wk > eps && k != min_idx {
                    keep_set.push(s);
                    keep_w.push(wk);
                }
            }
            let total: f64 = keep_w.iter().sum();
            keep_w.iter_mut().for_each(|v| *v /= total);
            set = keep_set;
            w = keep_w;
            if set.len() <= 1 {
                break;
            }
        }
        x = vec![0.0; dim];
        for (&s, &ws) in set.iter().zip(&w) {
            axpy(ws, &points[s], &mut x);
        }
    }

    let mut weights = vec![0.0; m];
    for (&s, &ws) in set.iter().zip(&w) {
        weights[s] += ws;
    }
    MinNormPoint {
        point: x,
        weights: SimplexWeights(weights),
        iterations,
    }
}

/// Minimizer of `||sum v_i p_i||` subject to `sum v_i = 1` (no sign constraint).
fn affine_min_norm(points: &[Vec<f64>], set: &[usize]) -> Option<Vec<f64>> {
    let k = set.len();
    let n = k + 1;
    let mut mat = vec![0.0; n * n];
    for (a, &i) in set.iter().enumerate() {
        for (b, &j) in set.iter().enumerate() {
            mat[a * n + b] = dot(&points[i], &points[j]);
        }
        mat[a * n + k] = 1.0;
        mat[k * n + a] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[k] = 1.0;
    let sol = solve_dense(mat, rhs, n)?;
    Some(sol[..k].to_vec())
}

/// Largest violation of the optimality conditions of `min ||x||^2` over
/// the hull at the given weights, relative to the largest squared norm.
pub fn kkt_residual(points: &[Vec<f64>], weights: &SimplexWeights) -> f64 {
    let dim = points.first().map_or(0, |p| p.len());
    let x = weights.combine(points.iter(), dim);
    let xx = dot(&x, &x);
    let scale = points.iter().fold(1e-300_f64, |s, p| s.max(dot(p, p)));
    let mut worst = 0.0_f64;
    for (p, &wt) in points.iter().zip(&weights.0) {
        let g = dot(&x, p) - xx;
        worst = worst.max(-g);
        if wt > 1e-12 {
            worst = worst.max(g.abs());
        }
    }
    worst / scale
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceResult {
    pub status: SolveStatus,
    /// Minimal dual norm over the slice; `+inf` when the slice is empty.
    pub value: f64,
    pub weights: SimplexWeights,
    pub minimizer: Vec<f64>,
    /// Generator indices whose constraint value counted as zero.
    pub on_slice: Vec<usize>,
}

/// `min { ||sum l_t u_t||_* : l in simplex, sum l_t (<u_t, anchor> - alpha_t) = 0 }`.
///
/// `tol` decides when a generator lies on the slicing hyperplane; it is
/// applied relative to `max(1, |alpha_t|, |<u_t, anchor>|)`.
pub fn min_norm_sliced_hull(
    generators: &CharacteristicSet,
    anchor: &[f64],
    norm: NormSpec,
    tol: f64,
) -> Result<SliceResult> {
    if generators.is_empty() {
        return Err(Error::InvalidArgument("empty generator list".into()));
    }
    let dim = anchor.len();
    let gens = &generators.generators;
    let mut level = Vec::with_capacity(gens.len());
    let (mut zero, mut pos, mut neg) = (Vec::new(), Vec::new(), Vec::new());
    for (t, g) in gens.iter().enumerate() {
        let ua = dot(&g.u, anchor);
        let c = ua - g.alpha;
        let scale = 1.0_f64.max(g.alpha.abs()).max(ua.abs());
        if c.abs() <= tol * scale {
            zero.push(t);
            level.push(0.0);
        } else if c > 0.0 {
            pos.push(t);
            level.push(c);
        } else {
            neg.push(t);
            level.push(c);
        }
    }

    // vertices of the sliced simplex as sparse weight lists
    let mut vertices: Vec<Vec<(usize, f64)>> = zero.iter().map(|&t| vec![(t, 1.0)]).collect();
    for &s in &pos {
        for &t in &neg {
            let (cs, ct) = (level[s], level[t]);
            let d = cs - ct;
            vertices.push(vec![(s, -ct / d), (t, cs / d)]);
        }
    }
    if vertices.is_empty() {
        return Ok(SliceResult {
            status: SolveStatus::NoIntersection,
            value: f64::INFINITY,
            weights: SimplexWeights(vec![0.0; gens.len()]),
            minimizer: vec![0.0; dim],
            on_slice: zero,
        });
    }
    let points: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| {
            let mut q = vec![0.0; dim];
            for &(t, wt) in v {
                axpy(wt, &gens[t].u, &mut q);
            }
            q
        })
        .collect();

    let vertex_weights = match norm.dual() {
        NormSpec::Euclid => wolfe_min_norm(&points).weights,
        dual => min_polyhedral_norm(&points, dual)?,
    };
    let mut weights = vec![0.0; gens.len()];
    for (v, &omega) in vertices.iter().zip(&vertex_weights.0) {
        if omega != 0.0 {
            for &(t, wt) in v {
                weights[t] += omega * wt;
            }
        }
    }
    let weights = SimplexWeights(weights);
    let minimizer = vertex_weights.combine(points.iter(), dim);
    Ok(SliceResult {
        status: SolveStatus::Optimal,
        value: norm.dual_norm(&minimizer),
        weights,
        minimizer,
        on_slice: zero,
    })
}

/// LP route for `min ||sum w_v q_v||` with `w` in the simplex and a polyhedral norm.
fn min_polyhedral_norm(points: &[Vec<f64>], norm: NormSpec) -> Result<SimplexWeights> {
    let k = points.len();
    let dim = points[0].len();
    // variables: w (k, >= 0) then either t (linf) or s (dim, l1)
    let extra = if norm == NormSpec::LInf { 1 } else { dim };
    let nv = k + extra;
    let mut objective = vec![0.0; nv];
    objective[k..].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = LinearProgram::new(objective, vec![VarDomain::NonNeg; nv]);
    let mut simplex = vec![0.0; nv];
    simplex[..k].iter_mut().for_each(|c| *c = 1.0);
    lp.add_eq(simplex, 1.0);
    for i in 0..dim {
        let slot = if norm == NormSpec::LInf { k } else { k + i };
        let mut up = vec![0.0; nv];
        let mut down = vec![0.0; nv];
        for (v, q) in points.iter().enumerate() {
            up[v] = q[i];
            down[v] = -q[i];
        }
        up[slot] = -1.0;
        down[slot] = -1.0;
        lp.add_le(up, 0.0);
        lp.add_le(down, 0.0);
    }
    let sol = lp_solve(&lp);
    match sol.status {
        SolveStatus::Optimal => Ok(SimplexWeights(
            sol.x[..k].iter().map(|v| v.max(0.0)).collect(),
        )),
        _ => Err(Error::NonConvergent {
            what: "min-norm LP",
            iterations: sol.iterations,
            gap: f64::NAN,
        }),
    }
}
