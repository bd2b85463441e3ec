//! Nearest point of a polyhedron `{y : <n_i, y> <= c_i}`.
//!
//! The Euclidean case runs the Goldfarb-Idnani dual active-set method with
//! identity Hessian: start from the unconstrained minimizer `x`, repeatedly
//! add the most violated constraint and move along the null space of the
//! current working set, dropping constraints whose multipliers would turn
//! negative. The polyhedral norms are solved as linear programs in epigraph
//! form.

use super::lp::{lp_solve, LinearProgram, VarDomain};
use super::SolveStatus;
use crate::error::{Error, Result};
use crate::linalg::{axpy, cholesky, cholesky_solve, dot, norm_inf};
use crate::model::{LinearSystem, NormSpec};

/// Dense row-major constraint data.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyhedron {
    pub dim: usize,
    pub normals: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl Polyhedron {
    pub fn new(dim: usize) -> Self {
        Polyhedron {
            dim,
            normals: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn from_system(system: &LinearSystem) -> Self {
        let mut p = Polyhedron::new(system.dimension);
        for row in &system.rows {
            p.push(&row.a, row.b);
        }
        p
    }

    pub fn push(&mut self, normal: &[f64], rhs: f64) {
        assert_eq!(normal.len(), self.dim);
        self.normals.extend_from_slice(normal);
        self.rhs.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    #[inline]
    pub fn normal(&self, i: usize) -> &[f64] {
        &self.normals[i * self.dim..(i + 1) * self.dim]
    }

    pub fn max_violation(&self, y: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| dot(self.normal(i), y) - self.rhs[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub distance: f64,
    pub point: Vec<f64>,
    pub iterations: usize,
}

/// Returns `min { ||y - x|| : y in poly }` and an attaining `y`.
pub fn project_polyhedron(x: &[f64], poly: &Polyhedron, norm: NormSpec) -> Result<Projection> {
    assert_eq!(x.len(), poly.dim);
    match norm {
        NormSpec::Euclid => project_euclid(x, poly),
        NormSpec::L1 | NormSpec::LInf => project_lp(x, poly, norm),
    }
}

fn project_euclid(x: &[f64], poly: &Polyhedron) -> Result<Projection> {
    let n = poly.dim;
    let m = poly.len();
    let row_norm: Vec<f64> = (0..m)
        .map(|i| crate::linalg::norm2(poly.normal(i)))
        .collect();
    let scale = 1.0 + norm_inf(x) + poly.rhs.iter().fold(0.0_f64, |s, c| s.max(c.abs()));
    let feas_tol = 1e-12 * scale;

    for (i, &rn) in row_norm.iter().enumerate() {
        if rn == 0.0 && poly.rhs[i] < -feas_tol {
            return Err(Error::Infeasible);
        }
    }

    let mut y = x.to_vec();
    let mut working: Vec<usize> = Vec::with_capacity(n);
    let mut mult: Vec<f64> = Vec::with_capacity(n);
    let mut iterations = 0usize;
    let cap = 20 * (m + n) + 200;

    let mut gram = Vec::with_capacity(n * n);
    let mut r = Vec::with_capacity(n);
    let mut z = vec![0.0; n];

    loop {
        let mut enter = None;
        let mut worst = feas_tol;
        for (i, &rn) in row_norm.iter().enumerate() {
            if rn == 0.0 {
                continue;
            }
            let v = (dot(poly.normal(i), &y) - poly.rhs[i]) / rn;
            if v > worst {
                worst = v;
                enter = Some(i);
            }
        }
        let Some(k) = enter else {
            break;
        };
        let nk = poly.normal(k);
        let mut mult_k = 0.0;
        loop {
            iterations += 1;
            if iterations > cap {
                return Err(Error::NonConvergent {
                    what: "polyhedral projection",
                    iterations,
                    gap: poly.max_violation(&y),
                });
            }
            // r = (A_W A_W^T)^{-1} A_W n_k and z = n_k - A_W^T r
            let w = working.len();
            r.clear();
            r.extend(working.iter().map(|&i| dot(poly.normal(i), nk)));
            let mut independent_basis = true;
            if w > 0 {
                gram.clear();
                for &i in &working {
                    for &j in &working {
                        gram.push(dot(poly.normal(i), poly.normal(j)));
                    }
                }
                independent_basis = cholesky(&mut gram, w);
                if independent_basis {
                    cholesky_solve(&gram, w, &mut r);
                }
            }
            if !independent_basis {
                // numerically degenerate working set; drop the newest member
                working.pop();
                mult.pop();
                continue;
            }
            z.copy_from_slice(nk);
            for (idx, &i) in working.iter().enumerate() {
                axpy(-r[idx], poly.normal(i), &mut z);
            }
            let zz = dot(&z, &z);
            let dependent = zz <= 1e-20 * row_norm[k] * row_norm[k];

            let mut partial = f64::INFINITY;
            let mut blocking = None;
            for (idx, &ri) in r.iter().enumerate() {
                if ri > 1e-14 {
                    let t = mult[idx] / ri;
                    if t < partial {
                        partial = t;
                        blocking = Some(idx);
                    }
                }
            }
            let violation = dot(nk, &y) - poly.rhs[k];
            let full = if dependent {
                f64::INFINITY
            } else {
                violation.max(0.0) / zz
            };
            if dependent && blocking.is_none() {
                return Err(Error::Infeasible);
            }
            let step = partial.min(full);
            if !dependent {
                axpy(-step, &z, &mut y);
            }
            for (idx, ri) in r.iter().enumerate() {
                mult[idx] -= step * ri;
            }
            mult_k += step;
            if full <= partial {
                working.push(k);
                mult.push(mult_k);
                break;
            }
            let l = blocking.expect("partial step has a blocking constraint");
            working.remove(l);
            mult.remove(l);
        }
    }

    let distance = crate::linalg::norm2(&crate::linalg::sub(&y, x));
    Ok(Projection {
        distance,
        point: y,
        iterations,
    })
}

fn project_lp(x: &[f64], poly: &Polyhedron, norm: NormSpec) -> Result<Projection> {
    let n = poly.dim;
    let (objective, domains) = match norm {
        // y (free), t
        NormSpec::LInf => {
            let mut obj = vec![0.0; n + 1];
            obj[n] = 1.0;
            let mut dom = vec![VarDomain::Free; n];
            dom.push(VarDomain::NonNeg);
            (obj, dom)
        }
        // y (free), s >= 0 componentwise
        NormSpec::L1 => {
            let mut obj = vec![0.0; 2 * n];
            obj[n..].iter_mut().for_each(|c| *c = 1.0);
            let mut dom = vec![VarDomain::Free; n];
            dom.extend(std::iter::repeat_n(VarDomain::NonNeg, n));
            (obj, dom)
        }
        NormSpec::Euclid => unreachable!(),
    };
    let nv = objective.len();
    let mut lp = LinearProgram::new(objective, domains);
    for i in 0..n {
        let slot = if norm == NormSpec::LInf { n } else { n + i };
        let mut up = vec![0.0; nv];
        up[i] = 1.0;
        up[slot] = -1.0;
        lp.add_le(up, x[i]);
        let mut down = vec![0.0; nv];
        down[i] = -1.0;
        down[slot] = -1.0;
        lp.add_le(down, -x[i]);
    }
    for k in 0..poly.len() {
        let mut c = vec![0.0; nv];
        c[..n].copy_from_slice(poly.normal(k));
        lp.add_le(c, poly.rhs[k]);
    }
    let sol = lp_solve(&lp);
    match sol.status {
        SolveStatus::Optimal => {
            let point = sol.x[..n].to_vec();
            let distance = norm.norm(&crate::linalg::sub(&point, x));
            Ok(Projection {
                distance,
                point,
                iterations: sol.iterations,
            })
        }
        SolveStatus::Infeasible => Err(Error::Infeasible),
        _ => Err(Error::NonConvergent {
            what: "projection LP",
            iterations: sol.iterations,
            gap: f64::NAN,
        }),
    }
}
