//! `sup { [<u, x> - alpha]_+ / ||u||_* : (u, alpha) in co(generators) }`.
//!
//! Solved by Dinkelbach iteration on `N(l) / D(l)` with `N(l) = sum l_t w_t`,
//! `w_t = <u_t, x> - alpha_t` and `D(l) = ||sum l_t u_t||_*`. Each parametric
//! subproblem `max_l N(l) - rho D(l)` over the unit simplex is concave. In the
//! Euclidean case it is solved by away-step Frank-Wolfe with exact line
//! search, after which the support face is polished in closed form and the
//! global optimality condition `w_t - rho <u_t, z> <= 0` (with `z` the unit
//! vector along the current combination) is checked. Polyhedral dual norms
//! turn the subproblem into a linear program.

use super::lp::{lp_solve, LinearProgram, VarDomain};
use super::{SimplexWeights, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{axpy, cholesky, cholesky_solve, dot, norm2};
use crate::model::{CharacteristicSet, NormSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct RatioResult {
    /// Supremum of the ratio; `+inf` when a zero combination has negative
    /// scalar part.
    pub value: f64,
    pub weights: SimplexWeights,
    /// Dinkelbach parameters, one per outer iteration (nondecreasing).
    pub trace: Vec<f64>,
    /// Value of the last parametric subproblem (zero at convergence).
    pub inner_final: f64,
    pub iterations: usize,
}

const MAX_OUTER: usize = 200;
const MAX_INNER: usize = 20_000;

pub fn max_ratio_over_hull(
    generators: &CharacteristicSet,
    x: &[f64],
    norm: NormSpec,
) -> Result<RatioResult> {
    if generators.is_empty() {
        return Err(Error::InvalidArgument("empty generator list".into()));
    }
    let gens = &generators.generators;
    let m = gens.len();
    let w: Vec<f64> = gens.iter().map(|g| dot(&g.u, x) - g.alpha).collect();
    let scale = gens.iter().zip(&w).fold(1.0_f64, |s, (g, wt)| {
        s.max(wt.abs()).max(norm.dual_norm(&g.u))
    });

    let (best, &wmax) = w
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    if wmax <= 0.0 {
        return Ok(RatioResult {
            value: 0.0,
            weights: SimplexWeights::vertex(m, best),
            trace: Vec::new(),
            inner_final: 0.0,
            iterations: 0,
        });
    }

    if let Some(cert) = zero_combination_with_negative_level(generators)? {
        return Ok(RatioResult {
            value: f64::INFINITY,
            weights: cert,
            trace: Vec::new(),
            inner_final: f64::INFINITY,
            iterations: 0,
        });
    }

    // start at the best single generator
    let mut rho = 0.0_f64;
    let mut start = best;
    for (t, g) in gens.iter().enumerate() {
        let d = norm.dual_norm(&g.u);
        if w[t] > 0.0 && d > 0.0 && w[t] / d > rho {
            rho = w[t] / d;
            start = t;
        }
    }
    let mut lambda = SimplexWeights::vertex(m, start);
    let mut trace = vec![rho];
    let mut iterations = 0;
    let mut inner_final = f64::NAN;

    for _ in 0..MAX_OUTER {
        iterations += 1;
        let (cand, inner) = match norm.dual() {
            NormSpec::Euclid => euclid_step(gens, &w, rho, &lambda, scale),
            dual => polyhedral_step(gens, &w, rho, dual)?,
        };
        inner_final = inner;
        let ratio = ratio_at(gens, &w, &cand, norm);
        let certified = matches!(norm.dual(), NormSpec::Euclid)
            && ratio >= rho
            && optimality_violation(gens, &w, &cand, ratio) <= 1e-12 * scale;
        if ratio > rho {
            rho = ratio;
            lambda = cand;
            trace.push(rho);
        }
        if certified {
            inner_final = 0.0;
            break;
        }
        if inner <= 1e-12 * scale || ratio <= rho * (1.0 + 1e-13) && inner <= 1e-8 * scale {
            break;
        }
    }
    if !(inner_final <= 1e-8 * scale) {
        return Err(Error::NonConvergent {
            what: "Dinkelbach ratio maximization",
            iterations,
            gap: inner_final,
        });
    }
    let total = lambda.sum();
    lambda.0.iter_mut().for_each(|v| *v /= total);
    Ok(RatioResult {
        value: rho,
        weights: lambda,
        trace,
        inner_final,
        iterations,
    })
}

/// Finds `l` in the simplex with `sum l_t u_t = 0` and `sum l_t alpha_t < 0`.
fn zero_combination_with_negative_level(
    generators: &CharacteristicSet,
) -> Result<Option<SimplexWeights>> {
    let gens = &generators.generators;
    let m = gens.len();
    let dim = generators.dimension();
    let objective: Vec<f64> = gens.iter().map(|g| g.alpha).collect();
    let scale = objective.iter().fold(1.0_f64, |s, a| s.max(a.abs()));
    let mut lp = LinearProgram::new(objective, vec![VarDomain::NonNeg; m]);
    lp.add_eq(vec![1.0; m], 1.0);
    for i in 0..dim {
        lp.add_eq(gens.iter().map(|g| g.u[i]).collect(), 0.0);
    }
    let sol = lp_solve(&lp);
    match sol.status {
        SolveStatus::Optimal if sol.objective < -1e-9 * scale => Ok(Some(SimplexWeights(
            sol.x.iter().map(|v| v.max(0.0)).collect(),
        ))),
        SolveStatus::Optimal | SolveStatus::Infeasible => Ok(None),
        _ => Err(Error::NonConvergent {
            what: "zero-combination LP",
            iterations: sol.iterations,
            gap: f64::NAN,
        }),
    }
}

fn combination(gens: &[crate::model::Generator], lambda: &SimplexWeights) -> Vec<f64> {
    let dim = gens[0].u.len();
    lambda.combine(gens.iter().map(|g| &g.u), dim)
}

fn ratio_at(
    gens: &[crate::model::Generator],
    w: &[f64],
    lambda: &SimplexWeights,
    norm: NormSpec,
) -> f64 {
    let num = dot(w, &lambda.0);
    let den = norm.dual_norm(&combination(gens, lambda));
    if num <= 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `max_t (w_t - rho <u_t, z>)` with `z` the unit vector along the combination.
fn optimality_violation(
    gens: &[crate::model::Generator],
    w: &[f64],
    lambda: &SimplexWeights,
    rho: f64,
) -> f64 {
    let z = combination(gens, lambda);
    let nz = norm2(&z);
    if nz == 0.0 {
        return f64::INFINITY;
    }
    gens.iter()
        .zip(w)
        .map(|(g, wt)| wt - rho * dot(&g.u, &z) / nz)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn euclid_step(
    gens: &[crate::model::Generator],
    w: &[f64],
    rho: f64,
    warm: &SimplexWeights,
    scale: f64,
) -> (SimplexWeights, f64) {
    let mut lambda = warm.clone();
    let inner = frank_wolfe(gens, w, rho, &mut lambda, scale);
    let polished = polish_face(gens, w, &lambda);
    match polished {
        Some(p)
            if ratio_at(gens, w, &p, NormSpec::Euclid)
                >= ratio_at(gens, w, &lambda, NormSpec::Euclid) =>
        {
            (p, inner)
        }
        _ => (lambda, inner),
    }
}

/// Away-step Frank-Wolfe for `max_l w'l - rho ||A l||` over the simplex.
/// Returns the final subproblem value.
fn frank_wolfe(
    gens: &[crate::model::Generator],
    w: &[f64],
    rho: f64,
    lambda: &mut SimplexWeights,
    scale: f64,
) -> f64 {
    let dim = gens[0].u.len();
    let m = gens.len();
    let mut z = combination(gens, lambda);
    let mut grad = vec![0.0; m];
    let mut dir = vec![0.0; dim];
    let value = |lambda: &SimplexWeights, z: &[f64]| dot(w, &lambda.0) - rho * norm2(z);
    for _ in 0..MAX_INNER {
        let nz = norm2(&z);
        for (t, g) in gens.iter().enumerate() {
            grad[t] = if nz > 0.0 {
                w[t] - rho * dot(&g.u, &z) / nz
            } else {
                w[t]
            };
        }
        let current: f64 = dot(&grad, &lambda.0);
        let s = (0..m).max_by(|&a, &b| grad[a].total_cmp(&grad[b])).unwrap();
        let v = (0..m)
            .filter(|&t| lambda.0[t] > 0.0)
            .min_by(|&a, &b| grad[a].total_cmp(&grad[b]))
            .unwrap();
        let fw_gap = grad[s] - current;
        let away_gap = current - grad[v];
        if fw_gap <= 1e-15 * scale {
            break;
        }
        let wl = dot(w, &lambda.0);
        let (slope, gmax, toward) = if fw_gap >= away_gap {
            // d = e_s - lambda
            dir.copy_from_slice(&gens[s].u);
            axpy(-1.0, &z, &mut dir);
            (w[s] - wl, 1.0, Some(s))
        } else {
            // d = lambda - e_v
            let lv = lambda.0[v];
            if lv >= 1.0 {
                break;
            }
            dir.copy_from_slice(&z);
            axpy(-1.0, &gens[v].u, &mut dir);
            (wl - w[v], lv / (1.0 - lv), None)
        };
        let gamma = line_search(&z, &dir, slope, rho, gmax);
        if gamma <= 0.0 {
            break;
        }
        match toward {
            Some(s) => {
                lambda.0.iter_mut().for_each(|l| *l *= 1.0 - gamma);
                lambda.0[s] += gamma;
            }
            None => {
                lambda.0.iter_mut().for_each(|l| *l *= 1.0 + gamma);
                lambda.0[v] -= gamma;
                if gamma >= gmax {
                    lambda.0[v] = 0.0;
                }
            }
        }
        axpy(gamma, &dir, &mut z);
    }
    value(lambda, &z)
}

/// Maximizes `g * slope - rho ||z + g d||` over `g` in `[0, gmax]`.
fn line_search(z: &[f64], d: &[f64], slope: f64, rho: f64, gmax: f64) -> f64 {
    let deriv = |g: f64| {
        let mut zz = 0.0;
        let mut zd = 0.0;
        for (zi, di) in z.iter().zip(d) {
            let v = zi + g * di;
            zz += v * v;
            zd += v * di;
        }
        let n = zz.sqrt();
        if n == 0.0 {
            slope
        } else {
            slope - rho * zd / n
        }
    };
    if deriv(gmax) >= 0.0 {
        return gmax;
    }
    if deriv(0.0) <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, gmax);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deriv(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Exact ratio maximizer over the cone of the current support: `mu = M^{-1} w`
/// with `M` the Gram matrix of the support, shrinking the support while any
/// weight turns nonpositive.
fn polish_face(
    gens: &[crate::model::Generator],
    w: &[f64],
    lambda: &SimplexWeights,
) -> Option<SimplexWeights> {
    let mut support = lambda.support(1e-12);
    let dim = gens[0].u.len();
    while support.len() > dim {
        let drop = *support
            .iter()
            .min_by(|&&a, &&b| lambda.0[a].total_cmp(&lambda.0[b]))
            .unwrap();
        support.retain(|&t| t != drop);
    }
    while !support.is_empty() {
        let k = support.len();
        let mut gram = vec![0.0; k * k];
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                gram[a * k + b] = dot(&gens[i].u, &gens[j].u);
            }
        }
        if !cholesky(&mut gram, k) {
            return None;
        }
        let mut mu: Vec<f64> = support.iter().map(|&t| w[t]).collect();
        cholesky_solve(&gram, k, &mut mu);
        let (worst, &wv) = mu
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        if wv > 0.0 {
            let total: f64 = mu.iter().sum();
            let mut out = vec![0.0; gens.len()];
            for (&t, v) in support.iter().zip(&mu) {
                out[t] = v / total;
            }
            return Some(SimplexWeights(out));
        }
        support.remove(worst);
    }
    None
}

/// Dinkelbach subproblem for a polyhedral dual norm, as an LP in
/// `(l, t)` or `(l, s)`.
fn polyhedral_step(
    gens: &[crate::model::Generator],
    w: &[f64],
    rho: f64,
    dual: NormSpec,
) -> Result<(SimplexWeights, f64)> {
    let m = gens.len();
    let dim = gens[0].u.len();
    let extra = if dual == NormSpec::LInf { 1 } else { dim };
    let nv = m + extra;
    // minimize -(w'l) + rho * t
    let mut objective: Vec<f64> = w.iter().map(|v| -v).collect();
    objective.extend(std::iter::repeat_n(rho, extra));
    let mut lp = LinearProgram::new(objective, vec![VarDomain::NonNeg; nv]);
    let mut simplex = vec![0.0; nv];
    simplex[..m].iter_mut().for_each(|c| *c = 1.0);
    lp.add_eq(simplex, 1.0);
    for i in 0..dim {
        let slot = if dual == NormSpec::LInf { m } else { m + i };
        let mut up = vec![0.0; nv];
        let mut down = vec![0.0; nv];
        for (t, g) in gens.iter().enumerate() {
            up[t] = g.u[i];
            down[t] = -g.u[i];
        }
        up[slot] = -1.0;
        down[slot] = -1.0;
        lp.add_le(up, 0.0);
        lp.add_le(down, 0.0);
    }
    let sol = lp_solve(&lp);
    if sol.status != SolveStatus::Optimal {
        return Err(Error::NonConvergent {
            what: "Dinkelbach LP subproblem",
            iterations: sol.iterations,
            gap: f64::NAN,
        });
    }
    let lambda = SimplexWeights(sol.x[..m].iter().map(|v| v.max(0.0)).collect());
    Ok((lambda, -sol.objective))
}
