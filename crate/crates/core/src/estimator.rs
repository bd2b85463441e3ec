//! Monte Carlo estimate of the Lipschitz modulus from the distance quotient
//! `dist(x; F(p)) / dist(p; F^{-1}(x))` near `(0, anchor)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{project_polyhedron, Polyhedron};
use crate::model::{
    residual_inverse_distance, BlockPartition, LinearSystem, NormSpec, Perturbation, RowBlocks,
    DEFAULT_TOL,
};
use crate::stability::{check_ssc, lip_bound, TRUNCATION_NOTE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// Perturb both `p` and `x`.
    #[default]
    Joint,
    /// Keep `x` at the anchor.
    ParameterOnly,
}

impl SamplingMode {
    pub fn name(self) -> &'static str {
        match self {
            SamplingMode::Joint => "joint",
            SamplingMode::ParameterOnly => "parameter-only",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingConfig {
    pub radii: Vec<f64>,
    pub samples_per_radius: usize,
    pub seed: u64,
    pub mode: SamplingMode,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            radii: vec![1e-1, 1e-2, 1e-3],
            samples_per_radius: 2000,
            seed: 0,
            mode: SamplingMode::Joint,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(Error::InvalidArgument("radius ladder is empty".into()));
        }
        if self.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument(
                "radii must be positive and finite".into(),
            ));
        }
        if self.radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument(
                "radii must be strictly decreasing".into(),
            ));
        }
        if self.samples_per_radius == 0 {
            return Err(Error::InvalidArgument(
                "samples per radius must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuotientSample {
    pub p: Vec<f64>,
    pub x: Vec<f64>,
    pub numerator: f64,
    pub denominator: f64,
    pub quotient: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusStats {
    pub radius: f64,
    pub max_quotient: f64,
    pub samples: usize,
    /// Samples with both distances zero, counted as quotient 0.
    pub zero_over_zero: usize,
    /// Samples whose perturbed feasible set was empty.
    pub skipped: usize,
    pub argmax: Option<QuotientSample>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub per_radius: Vec<RadiusStats>,
    /// Maximum quotient at the smallest radius.
    pub estimate: f64,
    pub mode: SamplingMode,
    pub notes: Vec<String>,
}

/// Denominators at or below this are treated as zero.
const ZERO_DEN: f64 = 1e-12;

enum Outcome {
    Quotient(QuotientSample),
    ZeroOverZero,
    Empty,
}

/// Point uniformly distributed on the unit sphere of `norm`. The L1 and LInf
/// spheres are sampled face by face; all faces have equal area.
pub fn sphere_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize, norm: NormSpec) -> Vec<f64> {
    match norm {
        NormSpec::Euclid => loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let n = crate::linalg::norm2(&v);
            if n > 1e-12 {
                return v.into_iter().map(|c| c / n).collect();
            }
        },
        NormSpec::LInf => {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let face = rng.random_range(0..dim);
            v[face] = if rng.random::<bool>() { 1.0 } else { -1.0 };
            v
        }
        NormSpec::L1 => {
            let e: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = e.iter().sum();
            e.into_iter()
                .map(|c| {
                    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    s * c / total
                })
                .collect()
        }
    }
}

fn sample_rng(seed: u64, radius: usize, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((radius as u64) << 40) | sample as u64);
    rng
}

struct Problem<'a> {
    system: &'a LinearSystem,
    blocks: RowBlocks,
    anchor: &'a [f64],
    mode: SamplingMode,
    seed: u64,
}

impl Problem<'_> {
    fn evaluate(&self, ri: usize, radius: f64, si: usize) -> Result<Outcome> {
        let mut rng = sample_rng(self.seed, ri, si);
        let k = self.blocks.n_blocks;
        let n = self.system.dimension;
        let sp: f64 = rng.random();
        let p: Vec<f64> = sphere_direction(&mut rng, k, NormSpec::LInf)
            .into_iter()
            .map(|v| radius * sp * v)
            .collect();
        let x: Vec<f64> = match self.mode {
            SamplingMode::Joint => {
                let sx: f64 = rng.random();
                sphere_direction(&mut rng, n, self.system.norm)
                    .into_iter()
                    .zip(self.anchor)
                    .map(|(d, a)| a + radius * sx * d)
                    .collect()
            }
            SamplingMode::ParameterOnly => self.anchor.to_vec(),
        };
        let p = Perturbation(p);
        let denominator = residual_inverse_distance(self.system, &self.blocks, &p, &x);
        let perturbed = self.system.perturbed(&self.blocks, &p);
        let poly = Polyhedron::from_system(&perturbed);
        let numerator = match project_polyhedron(&x, &poly, self.system.norm) {
            Ok(proj) => proj.distance,
            Err(Error::Infeasible) => return Ok(Outcome::Empty),
            Err(e) => return Err(e),
        };
        if denominator <= ZERO_DEN {
            return Ok(Outcome::ZeroOverZero);
        }
        Ok(Outcome::Quotient(QuotientSample {
            p: p.0,
            x,
            numerator,
            denominator,
            quotient: numerator / denominator,
        }))
    }

    fn run_radius(
        &self,
        ri: usize,
        radius: f64,
        count: usize,
        exec: Execution,
    ) -> Result<RadiusStats> {
        let outcomes = match exec {
            Execution::Sequential => (0..count)
                .map(|si| self.evaluate(ri, radius, si))
                .collect::<Result<Vec<_>>>()?,
            Execution::Parallel => self.parallel(ri, radius, count)?,
        };
        let mut stats = RadiusStats {
            radius,
            max_quotient: 0.0,
            samples: count,
            zero_over_zero: 0,
            skipped: 0,
            argmax: None,
        };
        for o in outcomes {
            match o {
                Outcome::Quotient(q) => {
                    if q.quotient > stats.max_quotient {
                        stats.max_quotient = q.quotient;
                        stats.argmax = Some(q);
                    }
                }
                Outcome::ZeroOverZero => stats.zero_over_zero += 1,
                Outcome::Empty => stats.skipped += 1,
            }
        }
        Ok(stats)
    }

    #[cfg(feature = "parallel")]
    fn parallel(&self, ri: usize, radius: f64, count: usize) -> Result<Vec<Outcome>> {
        use rayon::prelude::*;
        let work = || {
            (0..count)
                .into_par_iter()
                .map(|si| self.evaluate(ri, radius, si))
                .collect::<Result<Vec<_>>>()
        };
        match thread_cap() {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
                .install(work),
            None => work(),
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn parallel(&self, ri: usize, radius: f64, count: usize) -> Result<Vec<Outcome>> {
        (0..count).map(|si| self.evaluate(ri, radius, si)).collect()
    }
}

/// Thread cap from `LIPSTAB_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("LIPSTAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

pub fn empirical_lip(
    system: &LinearSystem,
    partition: &BlockPartition,
    anchor: &[f64],
    cfg: &SamplingConfig,
) -> Result<EstimateReport> {
    empirical_lip_with(system, partition, anchor, cfg, Execution::default())
}

pub fn empirical_lip_with(
    system: &LinearSystem,
    partition: &BlockPartition,
    anchor: &[f64],
    cfg: &SamplingConfig,
    exec: Execution,
) -> Result<EstimateReport> {
    cfg.validate()?;
    let blocks = partition.row_blocks(system)?;
    if anchor.len() != system.dimension {
        return Err(Error::InvalidArgument(format!(
            "anchor has {} entries, system dimension is {}",
            anchor.len(),
            system.dimension
        )));
    }
    let residual = system.max_residual(anchor);
    if residual > DEFAULT_TOL {
        return Err(Error::InfeasibleAnchor { residual });
    }
    let mut notes = Vec::new();
    if let Some(t) = &system.truncation {
        notes.push(format!("{TRUNCATION_NOTE} ({t})"));
    }
    if !check_ssc(system, DEFAULT_TOL)?.holds {
        notes.push("strong Slater condition fails: modulus is infinite".into());
        return Ok(EstimateReport {
            per_radius: Vec::new(),
            estimate: f64::INFINITY,
            mode: cfg.mode,
            notes,
        });
    }
    let problem = Problem {
        system,
        blocks,
        anchor,
        mode: cfg.mode,
        seed: cfg.seed,
    };
    let per_radius = cfg
        .radii
        .iter()
        .enumerate()
        .map(|(ri, &r)| problem.run_radius(ri, r, cfg.samples_per_radius, exec))
        .collect::<Result<Vec<_>>>()?;
    let estimate = per_radius.last().map_or(0.0, |s| s.max_quotient);
    Ok(EstimateReport {
        per_radius,
        estimate,
        mode: cfg.mode,
        notes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionEstimate {
    pub name: String,
    pub blocks: usize,
    pub report: EstimateReport,
    pub within_tolerance: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionComparison {
    pub lip_bound: f64,
    /// Minimum partition first, maximum partition last.
    pub entries: Vec<PartitionEstimate>,
    pub slack: f64,
}

pub const ORDER_SLACK: f64 = 0.05;

/// Estimates for the minimum partition, each given partition and the maximum
/// partition, checked against `min <= J <= max` within slack and against the
/// exact bound.
pub fn partition_compare(
    system: &LinearSystem,
    partitions: &[(String, BlockPartition)],
    anchor: &[f64],
    cfg: &SamplingConfig,
    exec: Execution,
) -> Result<PartitionComparison> {
    let lip = lip_bound(system, anchor)?.bound;
    let mut all = vec![("min".to_string(), BlockPartition::minimum(system))];
    all.extend(partitions.iter().cloned());
    all.push(("max".to_string(), BlockPartition::maximum(system)));
    let slack = if lip.is_finite() {
        ORDER_SLACK * lip
    } else {
        0.0
    };
    let mut entries = Vec::with_capacity(all.len());
    for (name, part) in all {
        let report = empirical_lip_with(system, &part, anchor, cfg, exec)?;
        let within_tolerance = if lip.is_infinite() {
            report.estimate.is_infinite()
        } else {
            (report.estimate - lip).abs() <= slack + 1e-12
        };
        entries.push(PartitionEstimate {
            name,
            blocks: part.len(),
            report,
            within_tolerance,
        });
    }
    let first = entries[0].report.estimate;
    let last = entries[entries.len() - 1].report.estimate;
    let mut bad = Vec::new();
    for e in &entries {
        let v = e.report.estimate;
        if first > v + slack || v > last + slack {
            let witness = e
                .report
                .per_radius
                .last()
                .and_then(|s| s.argmax.as_ref())
                .map(|q| format!("p={:?} x={:?} quotient={}", q.p, q.x, q.quotient))
                .unwrap_or_default();
            bad.push(format!(
                "{}: estimate {v} outside [{first} - {slack}, {last} + {slack}] {witness}",
                e.name
            ));
        }
    }
    if !bad.is_empty() {
        return Err(Error::OrderingViolation {
            details: bad.join("; "),
        });
    }
    Ok(PartitionComparison {
        lip_bound: lip,
        entries,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Row;
    use approx::assert_abs_diff_eq;

    fn halfspace() -> LinearSystem {
        LinearSystem::with_rows(
            2,
            NormSpec::Euclid,
            vec![Row::new("t", vec![3.0, 4.0], 5.0)],
        )
    }

    fn boxed() -> LinearSystem {
        let rows = [
            ([1.0, 0.0], 1.0),
            ([-1.0, 0.0], 1.0),
            ([0.0, 1.0], 1.0),
            ([0.0, -1.0], 1.0),
        ]
        .iter()
        .enumerate()
        .map(|(i, (a, b))| Row::new(format!("t{i}"), a.to_vec(), *b))
        .collect();
        LinearSystem::with_rows(2, NormSpec::Euclid, rows)
    }

    fn small_cfg() -> SamplingConfig {
        SamplingConfig {
            samples_per_radius: 300,
            seed: 11,
            ..SamplingConfig::default()
        }
    }

    #[test]
    fn sphere_directions_have_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for norm in [NormSpec::Euclid, NormSpec::L1, NormSpec::LInf] {
            for _ in 0..100 {
                let d = sphere_direction(&mut rng, 4, norm);
                assert_abs_diff_eq!(norm.norm(&d), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn halfspace_constant_ratio() {
        let s = halfspace();
        let part = BlockPartition::maximum(&s);
        let r = empirical_lip(&s, &part, &[0.6, 0.8], &small_cfg()).unwrap();
        for stats in &r.per_radius {
            assert_abs_diff_eq!(stats.max_quotient, 0.2, epsilon = 1e-9);
        }
    }

    #[test]
    fn interior_anchor_is_zero() {
        let s = boxed();
        let cfg = SamplingConfig {
            radii: vec![0.5, 0.1],
            ..small_cfg()
        };
        let r = empirical_lip(&s, &BlockPartition::maximum(&s), &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.per_radius[1].zero_over_zero, cfg.samples_per_radius);
    }

    #[test]
    fn ssc_failure_is_infinite() {
        let s = LinearSystem::with_rows(
            1,
            NormSpec::Euclid,
            vec![
                Row::new("a", vec![1.0], 0.0),
                Row::new("b", vec![-1.0], 0.0),
            ],
        );
        let r = empirical_lip(&s, &BlockPartition::maximum(&s), &[0.0], &small_cfg()).unwrap();
        assert_eq!(r.estimate, f64::INFINITY);
    }

    #[test]
    fn parameter_only_mode() {
        let s = halfspace();
        let cfg = SamplingConfig {
            mode: SamplingMode::ParameterOnly,
            ..small_cfg()
        };
        let r = empirical_lip(&s, &BlockPartition::maximum(&s), &[0.6, 0.8], &cfg).unwrap();
        assert_abs_diff_eq!(r.estimate, 0.2, epsilon = 1e-9);
    }

    #[test]
    fn sequential_matches_parallel() {
        let s = boxed();
        let part = BlockPartition::maximum(&s);
        let a = empirical_lip_with(&s, &part, &[1.0, 1.0], &small_cfg(), Execution::Sequential)
            .unwrap();
        let b =
            empirical_lip_with(&s, &part, &[1.0, 1.0], &small_cfg(), Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quotients_respect_exact_bound() {
        let s = boxed();
        let lip = lip_bound(&s, &[1.0, 1.0]).unwrap().bound;
        let r = empirical_lip(&s, &BlockPartition::minimum(&s), &[1.0, 1.0], &small_cfg()).unwrap();
        for stats in &r.per_radius {
            assert!(stats.max_quotient <= lip * 1.05 + 1e-9);
        }
        assert!(r.estimate >= 0.9 * lip);
    }

    #[test]
    fn compare_box_vertex() {
        let s = boxed();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let random = BlockPartition::random(&s, 2, &mut rng);
        let cfg = SamplingConfig {
            samples_per_radius: 2000,
            ..small_cfg()
        };
        let c = partition_compare(
            &s,
            &[("random".into(), random)],
            &[1.0, 1.0],
            &cfg,
            Execution::default(),
        )
        .unwrap();
        assert_eq!(c.entries.len(), 3);
        assert!(
            c.entries.iter().all(|e| e.within_tolerance),
            "{:?}",
            c.entries
                .iter()
                .map(|e| e.report.estimate)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn rejects_bad_ladder() {
        let s = halfspace();
        let cfg = SamplingConfig {
            radii: vec![0.1, 0.2],
            ..small_cfg()
        };
        assert!(empirical_lip(&s, &BlockPartition::maximum(&s), &[0.6, 0.8], &cfg).is_err());
    }
}
