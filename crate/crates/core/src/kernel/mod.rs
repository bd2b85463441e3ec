//! Dense convex-optimization primitives shared by the analysis modules.

pub mod lp;
pub mod minnorm;
pub mod projection;
pub mod ratio;

pub use lp::{lp_solve, lp_solve_with, LinearProgram, LpOptions, LpSolution, Relation, VarDomain};
pub use minnorm::{min_norm_sliced_hull, wolfe_min_norm, MinNormPoint, SliceResult};
pub use projection::{project_polyhedron, Polyhedron, Projection};
pub use ratio::{max_ratio_over_hull, RatioResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    /// The slice `{(u, <u, x>)}` misses the hull.
    NoIntersection,
}

/// Nonnegative weights over a generator list.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SimplexWeights(pub Vec<f64>);

impl SimplexWeights {
    pub fn vertex(len: usize, at: usize) -> Self {
        let mut w = vec![0.0; len];
        w[at] = 1.0;
        SimplexWeights(w)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Indices with weight above `tol`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > tol)
            .map(|(i, _)| i)
            .collect()
    }

    /// `sum_t w_t u_t` over the generator vectors.
    pub fn combine(
        &self,
        vectors: impl IntoIterator<Item = impl AsRef<[f64]>>,
        dim: usize,
    ) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (w, v) in self.0.iter().zip(vectors) {
            if *w != 0.0 {
                crate::linalg::axpy(*w, v.as_ref(), &mut out);
            }
        }
        out
    }
}
