//! Convex inequality systems `f_j(x) <= p_j`, their conjugates, and the
//! subgradient-cut linearization into block-perturbed linear systems.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{
    lp_solve, project_polyhedron, LinearProgram, Polyhedron, SolveStatus, VarDomain,
};
use crate::linalg::{axpy, cholesky, cholesky_solve, dot, sub};
use crate::model::{Block, BlockPartition, LinearSystem, NormSpec, Row, DEFAULT_TOL};
use crate::stability::{lip_bound, same_bound, LipReport, Regime};

#[derive(Clone, Debug, PartialEq)]
pub enum ConvexFunctionSpec {
    /// `<c, x> + d`
    Affine { c: Vec<f64>, d: f64 },
    /// `1/2 <Qx, x> + <c, x> + r` with `Q` symmetric positive definite.
    Quadratic {
        q: Vec<Vec<f64>>,
        c: Vec<f64>,
        r: f64,
    },
    /// `max_i <c_i, x> + d_i`
    MaxAffine { pieces: Vec<(Vec<f64>, f64)> },
    /// `kappa ||x - shift|| + offset`
    ScaledNorm {
        kappa: f64,
        shift: Vec<f64>,
        offset: f64,
        norm: NormSpec,
    },
}

impl ConvexFunctionSpec {
    pub fn class_name(&self) -> &'static str {
        match self {
            ConvexFunctionSpec::Affine { .. } => "affine",
            ConvexFunctionSpec::Quadratic { .. } => "quadratic",
            ConvexFunctionSpec::MaxAffine { .. } => "max-affine",
            ConvexFunctionSpec::ScaledNorm { .. } => "scaled-norm",
        }
    }

    /// Checks dimensions, finiteness and the class-specific invariants.
    pub fn validate(&self, dimension: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            ConvexFunctionSpec::Affine { c, d } => {
                if c.len() != dimension || !finite(c) || !d.is_finite() {
                    return bad(format!("affine: expected {dimension} finite coefficients"));
                }
            }
            ConvexFunctionSpec::Quadratic { q, c, r } => {
                if q.len() != dimension
                    || q.iter().any(|row| row.len() != dimension || !finite(row))
                    || c.len() != dimension
                    || !finite(c)
                    || !r.is_finite()
                {
                    return bad(format!(
                        "quadratic: expected a {dimension}x{dimension} matrix"
                    ));
                }
                for i in 0..dimension {
                    for j in 0..i {
                        let s = q[i][i].abs().max(q[j][j].abs()).max(1.0);
                        if (q[i][j] - q[j][i]).abs() > 1e-12 * s {
                            return bad("quadratic: Q is not symmetric".into());
                        }
                    }
                }
                if self.factor().is_none() {
                    return bad("quadratic: Q is not positive definite".into());
                }
            }
            ConvexFunctionSpec::MaxAffine { pieces } => {
                if pieces.is_empty() {
                    return bad("max-affine: at least one piece required".into());
                }
                if pieces
                    .iter()
                    .any(|(c, d)| c.len() != dimension || !finite(c) || !d.is_finite())
                {
                    return bad(format!(
                        "max-affine: expected {dimension} finite coefficients"
                    ));
                }
            }
            ConvexFunctionSpec::ScaledNorm {
                kappa,
                shift,
                offset,
                ..
            } => {
                if !(*kappa > 0.0 && kappa.is_finite()) {
                    return bad("scaled-norm: kappa must be positive".into());
                }
                if shift.len() != dimension || !finite(shift) || !offset.is_finite() {
                    return bad(format!(
                        "scaled-norm: expected a shift of length {dimension}"
                    ));
                }
            }
        }
        Ok(())
    }

    fn factor(&self) -> Option<Vec<f64>> {
        let ConvexFunctionSpec::Quadratic { q, .. } = self else {
            return None;
        };
        let n = q.len();
        let mut flat: Vec<f64> = q.iter().flatten().copied().collect();
        cholesky(&mut flat, n).then_some(flat)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        eval_sub(self, x).0
    }
}

/// Value and a subgradient at `x`. Max-affine ties go to the first piece;
/// norm kinks use sign(0) = 0 and the first maximal coordinate.
pub fn eval_sub(f: &ConvexFunctionSpec, x: &[f64]) -> (f64, Vec<f64>) {
    match f {
        ConvexFunctionSpec::Affine { c, d } => (dot(c, x) + d, c.clone()),
        ConvexFunctionSpec::Quadratic { q, c, r } => {
            let qx: Vec<f64> = q.iter().map(|row| dot(row, x)).collect();
            let value = 0.5 * dot(&qx, x) + dot(c, x) + r;
            let mut g = qx;
            axpy(1.0, c, &mut g);
            (value, g)
        }
        ConvexFunctionSpec::MaxAffine { pieces } => {
            let mut best = 0;
            let mut value = f64::NEG_INFINITY;
            for (i, (c, d)) in pieces.iter().enumerate() {
                let v = dot(c, x) + d;
                if v > value {
                    value = v;
                    best = i;
                }
            }
            (value, pieces[best].0.clone())
        }
        ConvexFunctionSpec::ScaledNorm {
            kappa,
            shift,
            offset,
            norm,
        } => {
            let y = sub(x, shift);
            let ny = norm.norm(&y);
            let mut g = vec![0.0; y.len()];
            if ny > 0.0 {
                match norm {
                    NormSpec::Euclid => {
                        for (gi, yi) in g.iter_mut().zip(&y) {
                            *gi = yi / ny;
                        }
                    }
                    NormSpec::L1 => {
                        for (gi, yi) in g.iter_mut().zip(&y) {
                            *gi = if *yi > 0.0 {
                                1.0
                            } else if *yi < 0.0 {
                                -1.0
                            } else {
                                0.0
                            };
                        }
                    }
                    NormSpec::LInf => {
                        let i = y.iter().position(|v| v.abs() == ny).unwrap();
                        g[i] = y[i].signum();
                    }
                }
            }
            g.iter_mut().for_each(|v| *v *= kappa);
            (kappa * ny + offset, g)
        }
    }
}

/// `f*(u) = sup_x <u, x> - f(x)`, with `+inf` outside the domain.
pub fn conjugate_value(f: &ConvexFunctionSpec, u: &[f64]) -> f64 {
    match f {
        ConvexFunctionSpec::Affine { c, d } => {
            let scale = c.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
            let off = c
                .iter()
                .zip(u)
                .fold(0.0_f64, |s, (a, b)| s.max((a - b).abs()));
            if off <= 1e-12 * scale {
                -d
            } else {
                f64::INFINITY
            }
        }
        ConvexFunctionSpec::Quadratic { c, r, .. } => {
            let factor = f.factor().expect("validated quadratic");
            let v = sub(u, c);
            let mut y = v.clone();
            cholesky_solve(&factor, v.len(), &mut y);
            0.5 * dot(&v, &y) - r
        }
        ConvexFunctionSpec::MaxAffine { pieces } => max_affine_conjugate(pieces, u),
        ConvexFunctionSpec::ScaledNorm {
            kappa,
            shift,
            offset,
            norm,
        } => {
            if norm.dual_norm(u) <= kappa * (1.0 + 1e-12) {
                dot(u, shift) - offset
            } else {
                f64::INFINITY
            }
        }
    }
}

/// `min { -sum th_i d_i : sum th_i c_i = u, th in simplex }`.
fn max_affine_conjugate(pieces: &[(Vec<f64>, f64)], u: &[f64]) -> f64 {
    let k = pieces.len();
    let objective = pieces.iter().map(|(_, d)| -d).collect();
    let mut lp = LinearProgram::new(objective, vec![VarDomain::NonNeg; k]);
    lp.add_eq(vec![1.0; k], 1.0);
    for i in 0..u.len() {
        lp.add_eq(pieces.iter().map(|(c, _)| c[i]).collect(), u[i]);
    }
    let sol = lp_solve(&lp);
    match sol.status {
        SolveStatus::Optimal => sol.objective,
        _ => f64::INFINITY,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexBlock {
    pub label: String,
    pub f: ConvexFunctionSpec,
}

/// `{ f_j(x) <= p_j, j in J }` on `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexSystem {
    pub dimension: usize,
    pub norm: NormSpec,
    pub blocks: Vec<ConvexBlock>,
}

impl ConvexSystem {
    pub fn new(dimension: usize, norm: NormSpec) -> Self {
        ConvexSystem {
            dimension,
            norm,
            blocks: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, f: ConvexFunctionSpec) -> &mut Self {
        self.blocks.push(ConvexBlock {
            label: label.into(),
            f,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if self.blocks.is_empty() {
            return Err(Error::InvalidArgument(
                "convex system has no functions".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for b in &self.blocks {
            if !seen.insert(b.label.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate block label {}",
                    b.label
                )));
            }
            b.f.validate(self.dimension)?;
        }
        Ok(())
    }

    /// `max_j (f_j(x) - p_j)`
    pub fn max_violation(&self, p: &[f64], x: &[f64]) -> f64 {
        self.blocks
            .iter()
            .zip(p)
            .map(|(b, pj)| b.f.value(x) - pj)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConjugateSample {
    pub block: usize,
    pub u: Vec<f64>,
    pub value: f64,
    /// Point `x` with `u` in the subdifferential of `f_j` at `x`.
    pub provenance: Option<Vec<f64>>,
}

/// Rows `<u*, x> <= f_j*(u*) + p_j`, one per sample, grouped by block.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedSystem {
    pub system: LinearSystem,
    pub partition: BlockPartition,
    pub samples: Vec<ConjugateSample>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutConfig {
    /// Sample points per block in the first round, the anchor included.
    pub budget: usize,
    /// Sampling radii around the anchor, cycled.
    pub radii: Vec<f64>,
    pub seed: u64,
    /// Refinement rounds for the bound, the first round included.
    pub max_rounds: usize,
    pub rel_tol: f64,
}

impl Default for CutConfig {
    fn default() -> Self {
        CutConfig {
            budget: 64,
            radii: vec![1.0, 0.1, 0.01],
            seed: 0,
            max_rounds: 8,
            rel_tol: 1e-4,
        }
    }
}

const DEDUP_TOL: f64 = 1e-12;

struct CutBuilder<'a> {
    system: &'a ConvexSystem,
    per_block: Vec<Vec<ConjugateSample>>,
    counters: Vec<usize>,
}

impl<'a> CutBuilder<'a> {
    fn new(system: &'a ConvexSystem) -> Self {
        let k = system.blocks.len();
        CutBuilder {
            system,
            per_block: vec![Vec::new(); k],
            counters: vec![0; k],
        }
    }

    /// Adds the cut of block `j` at `x` unless an equal one exists.
    fn add(&mut self, j: usize, x: &[f64]) -> bool {
        let f = &self.system.blocks[j].f;
        let (fx, u) = eval_sub(f, x);
        let value = dot(&u, x) - fx;
        self.counters[j] += 1;
        let dup = self.per_block[j].iter().any(|s| {
            (s.value - value).abs() <= DEDUP_TOL * s.value.abs().max(1.0)
                && s.u
                    .iter()
                    .zip(&u)
                    .all(|(a, b)| (a - b).abs() <= DEDUP_TOL * a.abs().max(1.0))
        });
        if dup {
            return false;
        }
        self.per_block[j].push(ConjugateSample {
            block: j,
            u,
            value,
            provenance: Some(x.to_vec()),
        });
        true
    }

    fn finish(&self) -> LinearizedSystem {
        let mut system = LinearSystem::new(self.system.dimension, self.system.norm);
        let mut blocks = Vec::new();
        let mut samples = Vec::new();
        for (j, list) in self.per_block.iter().enumerate() {
            let label = &self.system.blocks[j].label;
            let mut members = Vec::new();
            for (k, s) in list.iter().enumerate() {
                let row = format!("(j={label}, sample {k})");
                system
                    .rows
                    .push(Row::new(row.clone(), s.u.clone(), s.value));
                members.push(row);
                samples.push(s.clone());
            }
            blocks.push(Block {
                label: label.clone(),
                members,
            });
        }
        LinearizedSystem {
            system,
            partition: BlockPartition::new(blocks),
            samples,
        }
    }
}

fn block_rng(seed: u64, block: usize, round: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((round as u64) << 32) | block as u64);
    rng
}

fn sphere_point(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..center.len())
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let nd = crate::linalg::norm2(&dir);
        if nd > 1e-12 {
            return center
                .iter()
                .zip(&dir)
                .map(|(c, d)| c + radius * d / nd)
                .collect();
        }
    }
}

/// Samples for block `j` in the first round. Budgets share prefixes.
fn base_points(cfg: &CutConfig, j: usize, anchor: &[f64]) -> Vec<Vec<f64>> {
    let mut rng = block_rng(cfg.seed, j, 0);
    let mut pts = vec![anchor.to_vec()];
    for k in 1..cfg.budget.max(1) {
        let r = cfg.radii[(k - 1) % cfg.radii.len()];
        pts.push(sphere_point(&mut rng, anchor, r));
    }
    pts
}

fn check_cfg(cfg: &CutConfig) -> Result<()> {
    if cfg.radii.is_empty() || cfg.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument(
            "radii must be positive and finite".into(),
        ));
    }
    if cfg.budget == 0 || cfg.max_rounds == 0 {
        return Err(Error::InvalidArgument(
            "budget and rounds must be positive".into(),
        ));
    }
    Ok(())
}

/// Subgradient cuts at the anchor and at `cfg.budget - 1` seeded sphere samples
/// per block.
pub fn linearize(
    system: &ConvexSystem,
    cfg: &CutConfig,
    anchor: &[f64],
) -> Result<LinearizedSystem> {
    system.validate()?;
    check_cfg(cfg)?;
    check_len(system, anchor)?;
    let mut builder = CutBuilder::new(system);
    for j in 0..system.blocks.len() {
        for x in base_points(cfg, j, anchor) {
            builder.add(j, &x);
        }
    }
    Ok(builder.finish())
}

/// Cuts at explicitly given points, `points[j]` for block `j`.
pub fn linearize_at(system: &ConvexSystem, points: &[Vec<Vec<f64>>]) -> Result<LinearizedSystem> {
    system.validate()?;
    if points.len() != system.blocks.len() {
        return Err(Error::InvalidArgument(
            "one point list per block required".into(),
        ));
    }
    let mut builder = CutBuilder::new(system);
    for (j, list) in points.iter().enumerate() {
        for x in list {
            check_len(system, x)?;
            builder.add(j, x);
        }
    }
    Ok(builder.finish())
}

fn check_len(system: &ConvexSystem, x: &[f64]) -> Result<()> {
    if x.len() != system.dimension {
        return Err(Error::InvalidArgument(format!(
            "point has {} entries, system dimension is {}",
            x.len(),
            system.dimension
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexLipReport {
    pub report: LipReport,
    /// Bound after each refinement round.
    pub trace: Vec<f64>,
    pub converged: bool,
    /// Difference between the last two rounds.
    pub gap: f64,
    /// Smallest and largest dual norm among the generated cut slopes.
    pub generator_norms: (f64, f64),
    pub rows: usize,
}

pub const REFINEMENT_NOTE: &str =
    "refinement: extra cuts sampled near the cuts supporting the slice minimizer";
pub const SAMPLED_NOTE: &str = "sampled hull: bound is a lower estimate of the convex modulus";

/// Lower estimate of the exact bound of the convex system at `(0, anchor)`
/// from a growing set of conjugate samples.
pub fn lip_bound_convex(
    system: &ConvexSystem,
    anchor: &[f64],
    cfg: &CutConfig,
) -> Result<ConvexLipReport> {
    system.validate()?;
    check_cfg(cfg)?;
    check_len(system, anchor)?;
    let residual = system.max_violation(&vec![0.0; system.blocks.len()], anchor);
    if residual > DEFAULT_TOL {
        return Err(Error::InfeasibleAnchor { residual });
    }
    let mut builder = CutBuilder::new(system);
    for j in 0..system.blocks.len() {
        for x in base_points(cfg, j, anchor) {
            builder.add(j, &x);
        }
    }
    let mut trace = Vec::new();
    let mut converged = false;
    let mut lin = builder.finish();
    let mut report = lip_bound(&lin.system, anchor)?;
    trace.push(report.bound);
    let smallest = cfg.radii.iter().copied().fold(f64::INFINITY, f64::min);
    for round in 1..cfg.max_rounds {
        if report.regime == Regime::SscFails {
            converged = true;
            break;
        }
        let centers = support_points(&lin, &report, anchor);
        let shrink = smallest / (1u64 << round.min(40)) as f64;
        for j in 0..system.blocks.len() {
            let mut rng = block_rng(cfg.seed, j, round);
            let own: Vec<&Vec<f64>> = centers
                .iter()
                .filter(|(b, _)| *b == j)
                .map(|(_, x)| x)
                .collect();
            for k in 0..cfg.budget {
                let x = if own.is_empty() || k % 2 == 0 {
                    let r = cfg.radii[k % cfg.radii.len()];
                    sphere_point(&mut rng, anchor, r)
                } else {
                    sphere_point(&mut rng, own[(k / 2) % own.len()], shrink)
                };
                builder.add(j, &x);
            }
        }
        lin = builder.finish();
        report = lip_bound(&lin.system, anchor)?;
        trace.push(report.bound);
        let prev = trace[trace.len() - 2];
        if same_bound(report.bound, prev, cfg.rel_tol) {
            converged = true;
            break;
        }
    }
    let gap = match trace.len() {
        0 | 1 => 0.0,
        n if trace[n - 1].is_infinite() => 0.0,
        n => (trace[n - 1] - trace[n - 2]).abs(),
    };
    if report.regime == Regime::SscFails {
        converged = true;
    }
    let norms = lin
        .samples
        .iter()
        .map(|s| system.norm.dual_norm(&s.u))
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    report.notes.push(SAMPLED_NOTE.into());
    report.notes.push(REFINEMENT_NOTE.into());
    report
        .notes
        .push(format!("generator norms: [{}, {}]", norms.0, norms.1));
    if !converged {
        report.notes.push(format!(
            "non-convergent: refinement stopped after {} rounds with gap {gap:e}",
            trace.len()
        ));
    }
    Ok(ConvexLipReport {
        rows: lin.system.len(),
        report,
        trace,
        converged,
        gap,
        generator_norms: norms,
    })
}

/// Provenance points of the cuts carrying weight in the slice minimizer.
fn support_points(
    lin: &LinearizedSystem,
    report: &LipReport,
    anchor: &[f64],
) -> Vec<(usize, Vec<f64>)> {
    report
        .slice_weights
        .support(1e-12)
        .into_iter()
        .map(|t| {
            let s = &lin.samples[t];
            (
                s.block,
                s.provenance.clone().unwrap_or_else(|| anchor.to_vec()),
            )
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexDistance {
    pub distance: f64,
    pub point: Vec<f64>,
    pub cuts: usize,
    pub violation: f64,
}

const DISTANCE_MAX_CUTS: usize = 500;
const DISTANCE_TOL: f64 = 1e-8;

/// `dist(x; F(p))` by cutting planes: project onto the current outer
/// linearization and cut off every violated function at the projection.
pub fn distance_convex(system: &ConvexSystem, p: &[f64], x: &[f64]) -> Result<ConvexDistance> {
    system.validate()?;
    check_len(system, x)?;
    if p.len() != system.blocks.len() {
        return Err(Error::InvalidArgument(format!(
            "perturbation has {} values for {} blocks",
            p.len(),
            system.blocks.len()
        )));
    }
    let n = system.dimension;
    let mut poly = Polyhedron::new(n);
    let mut cuts = 0;
    let add_cuts = |poly: &mut Polyhedron, y: &[f64], cuts: &mut usize, only_violated: bool| {
        for (b, pj) in system.blocks.iter().zip(p) {
            let (fy, u) = eval_sub(&b.f, y);
            if !only_violated || fy - pj > DISTANCE_TOL {
                let rhs = dot(&u, y) - fy + pj;
                poly.push(&u, rhs);
                *cuts += 1;
            }
        }
    };
    add_cuts(&mut poly, x, &mut cuts, false);
    loop {
        let proj = project_polyhedron(x, &poly, system.norm)?;
        let violation = system.max_violation(p, &proj.point);
        if violation <= DISTANCE_TOL {
            return Ok(ConvexDistance {
                distance: proj.distance,
                point: proj.point,
                cuts,
                violation,
            });
        }
        if cuts >= DISTANCE_MAX_CUTS {
            return Err(Error::NonConvergent {
                what: "convex distance cutting planes",
                iterations: cuts,
                gap: violation,
            });
        }
        add_cuts(&mut poly, &proj.point, &mut cuts, true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn square(r: f64) -> ConvexSystem {
        let mut s = ConvexSystem::new(1, NormSpec::Euclid);
        s.push(
            "f",
            ConvexFunctionSpec::Quadratic {
                q: vec![vec![2.0]],
                c: vec![0.0],
                r,
            },
        );
        s
    }

    fn abs_fn() -> ConvexFunctionSpec {
        ConvexFunctionSpec::MaxAffine {
            pieces: vec![(vec![1.0], 0.0), (vec![-1.0], 0.0)],
        }
    }

    fn classes() -> Vec<ConvexFunctionSpec> {
        vec![
            ConvexFunctionSpec::Affine {
                c: vec![1.0, -2.0],
                d: 0.5,
            },
            ConvexFunctionSpec::Quadratic {
                q: vec![vec![2.0, 0.5], vec![0.5, 1.0]],
                c: vec![0.3, -0.1],
                r: -1.0,
            },
            ConvexFunctionSpec::MaxAffine {
                pieces: vec![
                    (vec![1.0, 0.0], 0.0),
                    (vec![-1.0, 1.0], 0.5),
                    (vec![0.0, -1.0], -0.2),
                ],
            },
            ConvexFunctionSpec::ScaledNorm {
                kappa: 2.0,
                shift: vec![0.5, -0.5],
                offset: -1.0,
                norm: NormSpec::Euclid,
            },
            ConvexFunctionSpec::ScaledNorm {
                kappa: 1.5,
                shift: vec![0.0, 1.0],
                offset: 0.0,
                norm: NormSpec::L1,
            },
            ConvexFunctionSpec::ScaledNorm {
                kappa: 0.5,
                shift: vec![1.0, 0.0],
                offset: 0.2,
                norm: NormSpec::LInf,
            },
        ]
    }

    #[test]
    fn eval_examples() {
        let sq = &square(0.0).blocks[0].f;
        assert_eq!(eval_sub(sq, &[3.0]), (9.0, vec![6.0]));
        assert_eq!(eval_sub(&abs_fn(), &[0.0]), (0.0, vec![1.0]));
        let aff = ConvexFunctionSpec::Affine {
            c: vec![2.0],
            d: 1.0,
        };
        assert_eq!(eval_sub(&aff, &[4.0]), (9.0, vec![2.0]));
    }

    #[test]
    fn conjugate_examples() {
        let sq = &square(0.0).blocks[0].f;
        assert_abs_diff_eq!(conjugate_value(sq, &[2.0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(conjugate_value(&abs_fn(), &[0.5]), 0.0, epsilon = 1e-12);
        assert_eq!(conjugate_value(&abs_fn(), &[2.0]), f64::INFINITY);
        let aff = ConvexFunctionSpec::Affine {
            c: vec![1.0, 2.0],
            d: 3.0,
        };
        assert_eq!(conjugate_value(&aff, &[1.0, 2.0]), -3.0);
        assert_eq!(conjugate_value(&aff, &[1.0, 2.5]), f64::INFINITY);
    }

    #[test]
    fn validation_rejects_indefinite() {
        let f = ConvexFunctionSpec::Quadratic {
            q: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            c: vec![0.0, 0.0],
            r: 0.0,
        };
        assert!(f.validate(2).is_err());
        assert!(classes().iter().all(|f| f.validate(2).is_ok()));
        let bad = ConvexFunctionSpec::ScaledNorm {
            kappa: 0.0,
            shift: vec![0.0],
            offset: 0.0,
            norm: NormSpec::Euclid,
        };
        assert!(bad.validate(1).is_err());
    }

    #[test]
    fn linearize_square_at_three_points() {
        let lin = linearize_at(&square(0.0), &[vec![vec![-1.0], vec![0.0], vec![1.0]]]).unwrap();
        let rows: Vec<(f64, f64)> = lin.system.rows.iter().map(|r| (r.a[0], r.b)).collect();
        assert_eq!(rows, vec![(-2.0, 1.0), (0.0, 0.0), (2.0, 1.0)]);
        assert_eq!(lin.system.rows[1].label, "(j=f, sample 1)");
        assert_eq!(lin.partition.len(), 1);
    }

    #[test]
    fn linearize_affine_single_cut() {
        let mut s = ConvexSystem::new(2, NormSpec::Euclid);
        s.push(
            "a",
            ConvexFunctionSpec::Affine {
                c: vec![1.0, 1.0],
                d: -1.0,
            },
        );
        s.push("b", square_2d());
        let lin = linearize(&s, &CutConfig::default(), &[0.0, 0.0]).unwrap();
        assert_eq!(lin.partition.len(), 2);
        assert_eq!(lin.partition.blocks[0].members.len(), 1);
        assert!(lin.partition.blocks[1].members.len() > 1);
    }

    fn square_2d() -> ConvexFunctionSpec {
        ConvexFunctionSpec::Quadratic {
            q: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            c: vec![0.0, 0.0],
            r: -1.0,
        }
    }

    #[test]
    fn anchor_cut_is_tight() {
        let f = &classes()[1];
        let mut s = ConvexSystem::new(2, NormSpec::Euclid);
        s.push("q", f.clone());
        let anchor = [0.2, -0.3];
        let lin = linearize(&s, &CutConfig::default(), &anchor).unwrap();
        let row = &lin.system.rows[0];
        assert_abs_diff_eq!(
            dot(&row.a, &anchor) - row.b,
            f.value(&anchor),
            epsilon = 1e-12
        );
    }

    #[test]
    fn convex_bound_examples() {
        let r = lip_bound_convex(&square(-1.0), &[1.0], &CutConfig::default()).unwrap();
        assert_abs_diff_eq!(r.report.bound, 0.5, epsilon = 1e-9);
        assert!(r.converged);
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
        let r = lip_bound_convex(&square(0.0), &[0.0], &CutConfig::default()).unwrap();
        assert_eq!(r.report.bound, f64::INFINITY);
        assert_eq!(r.report.regime, Regime::SscFails);
        let mut s = ConvexSystem::new(2, NormSpec::Euclid);
        s.push(
            "h",
            ConvexFunctionSpec::Affine {
                c: vec![3.0, 4.0],
                d: -5.0,
            },
        );
        let r = lip_bound_convex(&s, &[0.6, 0.8], &CutConfig::default()).unwrap();
        assert_abs_diff_eq!(r.report.bound, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn convex_bound_rejects_infeasible_anchor() {
        let err = lip_bound_convex(&square(-1.0), &[2.0], &CutConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleAnchor { .. }));
    }

    #[test]
    fn distance_examples() {
        let d = distance_convex(&square(-1.0), &[0.0], &[2.0]).unwrap();
        assert_abs_diff_eq!(d.distance, 1.0, epsilon = 1e-8);
        let d = distance_convex(&square(-1.0), &[0.0], &[0.5]).unwrap();
        assert_eq!(d.distance, 0.0);
        let mut s = ConvexSystem::new(2, NormSpec::Euclid);
        s.push(
            "h",
            ConvexFunctionSpec::Affine {
                c: vec![1.0, 0.0],
                d: -1.0,
            },
        );
        let d = distance_convex(&s, &[0.0], &[2.0, 0.0]).unwrap();
        assert_eq!(d.cuts, 1);
        assert_abs_diff_eq!(d.distance, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_disk() {
        let mut s = ConvexSystem::new(2, NormSpec::Euclid);
        s.push("disk", square_2d());
        let d = distance_convex(&s, &[0.0], &[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(d.distance, 5.0 - 1.0, epsilon = 1e-6);
    }

    #[test]
    fn distance_empty_set() {
        let err = distance_convex(&square(0.0), &[-1.0], &[1.0]).unwrap_err();
        assert!(matches!(
            err,
            Error::Infeasible | Error::NonConvergent { .. }
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fenchel_young(which in 0usize..6, x in proptest::collection::vec(-3.0..3.0f64, 2),
                         y in proptest::collection::vec(-3.0..3.0f64, 2)) {
            let f = &classes()[which];
            let (fx, u) = eval_sub(f, &x);
            let conj = conjugate_value(f, &u);
            prop_assert!((fx + conj - dot(&u, &x)).abs() <= 1e-9 * (1.0 + fx.abs()));
            prop_assert!(f.value(&y) + conj >= dot(&u, &y) - 1e-9);
        }

        #[test]
        fn cuts_are_valid(seed in any::<u64>(), y in proptest::collection::vec(-3.0..3.0f64, 2)) {
            let mut s = ConvexSystem::new(2, NormSpec::Euclid);
            for (i, f) in classes().into_iter().enumerate() {
                s.push(format!("f{i}"), f);
            }
            let cfg = CutConfig { budget: 16, seed, ..CutConfig::default() };
            let lin = linearize(&s, &cfg, &[0.1, 0.2]).unwrap();
            for (row, sample) in lin.system.rows.iter().zip(&lin.samples) {
                let fy = s.blocks[sample.block].f.value(&y);
                prop_assert!(dot(&row.a, &y) - row.b <= fy + 1e-9);
            }
        }

        #[test]
        fn budget_monotone(seed in any::<u64>(), small in 2usize..20, extra in 1usize..40) {
            let mut s = ConvexSystem::new(2, NormSpec::Euclid);
            s.push("disk", square_2d());
            let anchor = [0.6, 0.8];
            let run = |budget| {
                let cfg = CutConfig { budget, seed, max_rounds: 1, ..CutConfig::default() };
                lip_bound_convex(&s, &anchor, &cfg).unwrap().report.bound
            };
            prop_assert!(run(small + extra) >= run(small));
        }
    }
}
