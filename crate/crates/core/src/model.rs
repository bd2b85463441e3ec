//! Linear inequality systems `<a_t, x> <= b_t + p_j` (t in block T_j), their
//! block partitions, perturbations and characteristic generators.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm1, norm2, norm_inf};

/// Default absolute tolerance for feasibility comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Norm on the decision space `R^n`. The dual norm is derived, never stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum NormSpec {
    #[default]
    Euclid,
    L1,
    LInf,
}

impl NormSpec {
    pub fn dual(self) -> NormSpec {
        match self {
            NormSpec::Euclid => NormSpec::Euclid,
            NormSpec::L1 => NormSpec::LInf,
            NormSpec::LInf => NormSpec::L1,
        }
    }

    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            NormSpec::Euclid => norm2(x),
            NormSpec::L1 => norm1(x),
            NormSpec::LInf => norm_inf(x),
        }
    }

    /// Norm of a functional, i.e. the norm of `dual()`.
    pub fn dual_norm(self, u: &[f64]) -> f64 {
        self.dual().norm(u)
    }

    pub fn name(self) -> &'static str {
        match self {
            NormSpec::Euclid => "euclid",
            NormSpec::L1 => "l1",
            NormSpec::LInf => "linf",
        }
    }

    pub fn parse(s: &str) -> Option<NormSpec> {
        match s {
            "euclid" => Some(NormSpec::Euclid),
            "l1" => Some(NormSpec::L1),
            "linf" => Some(NormSpec::LInf),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub label: String,
    pub a: Vec<f64>,
    pub b: f64,
}

impl Row {
    pub fn new(label: impl Into<String>, a: Vec<f64>, b: f64) -> Self {
        Row {
            label: label.into(),
            a,
            b,
        }
    }

    #[inline]
    pub fn residual(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) - self.b
    }
}

/// Nominal system `{<a_t, x> <= b_t, t in T}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub dimension: usize,
    pub rows: Vec<Row>,
    pub norm: NormSpec,
    /// Set when the system is a finite truncation of an infinite family.
    pub truncation: Option<String>,
}

impl LinearSystem {
    pub fn new(dimension: usize, norm: NormSpec) -> Self {
        LinearSystem {
            dimension,
            rows: Vec::new(),
            norm,
            truncation: None,
        }
    }

    pub fn with_rows(dimension: usize, norm: NormSpec, rows: Vec<Row>) -> Self {
        LinearSystem {
            dimension,
            rows,
            norm,
            truncation: None,
        }
    }

    pub fn push(&mut self, label: impl Into<String>, a: Vec<f64>, b: f64) -> &mut Self {
        self.rows.push(Row::new(label, a, b));
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `sup_t (<a_t, x> - b_t)`, or `-inf` for an empty system.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.residual(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.max_residual(x) <= tol
    }

    /// Same rows with the right-hand sides shifted blockwise by `p`.
    pub fn perturbed(&self, blocks: &RowBlocks, p: &Perturbation) -> LinearSystem {
        let mut out = self.clone();
        for (row, &j) in out.rows.iter_mut().zip(&blocks.of_row) {
            row.b += p.0[j];
        }
        out
    }

    /// Subsystem keeping the rows whose indices are listed.
    pub fn subsystem(&self, indices: &[usize]) -> LinearSystem {
        LinearSystem {
            dimension: self.dimension,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            norm: self.norm,
            truncation: self.truncation.clone(),
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.label.as_str())
    }

    /// Generators `(a_t, b_t)` of the unperturbed characteristic set.
    pub fn nominal_generators(&self) -> CharacteristicSet {
        CharacteristicSet {
            generators: self
                .rows
                .iter()
                .map(|r| Generator {
                    u: r.a.clone(),
                    alpha: r.b,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    pub members: Vec<String>,
}

/// Partition `{T_j | j in J}` of the row labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    pub blocks: Vec<Block>,
}

impl BlockPartition {
    pub fn new(blocks: Vec<Block>) -> Self {
        BlockPartition { blocks }
    }

    /// One block containing every row.
    pub fn minimum(system: &LinearSystem) -> Self {
        BlockPartition {
            blocks: vec![Block {
                label: "all".into(),
                members: system.labels().map(String::from).collect(),
            }],
        }
    }

    /// One singleton block per row, labelled by the row label.
    pub fn maximum(system: &LinearSystem) -> Self {
        BlockPartition {
            blocks: system
                .labels()
                .map(|l| Block {
                    label: l.to_string(),
                    members: vec![l.to_string()],
                })
                .collect(),
        }
    }

    /// Builds a partition from a row-to-block assignment. Empty blocks are dropped.
    pub fn from_assignment(system: &LinearSystem, assignment: &[usize]) -> Self {
        let k = assignment.iter().copied().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); k];
        for (row, &j) in system.rows.iter().zip(assignment) {
            members[j].push(row.label.clone());
        }
        BlockPartition {
            blocks: members
                .into_iter()
                .enumerate()
                .filter(|(_, m)| !m.is_empty())
                .map(|(j, members)| Block {
                    label: format!("B{j}"),
                    members,
                })
                .collect(),
        }
    }

    /// Uniformly random assignment of rows to at most `k` blocks.
    pub fn random<R: Rng + ?Sized>(system: &LinearSystem, k: usize, rng: &mut R) -> Self {
        let k = k.max(1);
        let assignment: Vec<usize> = (0..system.len()).map(|_| rng.random_range(0..k)).collect();
        Self::from_assignment(system, &assignment)
    }

    /// [`BlockPartition::random`] driven by a ChaCha8 stream from `seed`.
    pub fn random_seeded(system: &LinearSystem, k: usize, seed: u64) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Self::random(system, k, &mut rng)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Resolves each row to its block index, failing with the validation
    /// report if the partition does not match the system.
    pub fn row_blocks(&self, system: &LinearSystem) -> Result<RowBlocks> {
        let report = validate(system, self);
        if !report.accepted() {
            return Err(Error::Validation(report));
        }
        let mut block_of: HashMap<&str, usize> = HashMap::new();
        for (j, block) in self.blocks.iter().enumerate() {
            for m in &block.members {
                block_of.insert(m.as_str(), j);
            }
        }
        Ok(RowBlocks {
            of_row: system.labels().map(|l| block_of[l]).collect(),
            n_blocks: self.blocks.len(),
        })
    }
}

/// Row-to-block map of a validated (system, partition) pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowBlocks {
    pub of_row: Vec<usize>,
    pub n_blocks: usize,
}

impl RowBlocks {
    pub fn singletons(rows: usize) -> Self {
        RowBlocks {
            of_row: (0..rows).collect(),
            n_blocks: rows,
        }
    }
}

/// Right-hand side perturbation, one value per block.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation(pub Vec<f64>);

impl Perturbation {
    pub fn zeros(blocks: usize) -> Self {
        Perturbation(vec![0.0; blocks])
    }

    pub fn sup_norm(&self) -> f64 {
        norm_inf(&self.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A point `(u, alpha)` of `X* x R`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub u: Vec<f64>,
    pub alpha: f64,
}

/// Generator list whose convex hull is the characteristic set.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CharacteristicSet {
    pub generators: Vec<Generator>,
}

impl CharacteristicSet {
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.generators.first().map_or(0, |g| g.u.len())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValidationIssue {
    NonPositiveDimension,
    DimensionMismatch {
        label: String,
        expected: usize,
        found: usize,
    },
    NonFinite {
        label: String,
    },
    DuplicateLabel(String),
    EmptyBlock(String),
    DuplicateBlock(String),
    UnknownLabel {
        block: String,
        label: String,
    },
    Overlap {
        label: String,
    },
    NotCovered(Vec<String>),
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::NonPositiveDimension => write!(f, "dimension must be positive"),
            ValidationIssue::DimensionMismatch {
                label,
                expected,
                found,
            } => write!(
                f,
                "row {label:?} has {found} coefficients, expected {expected}"
            ),
            ValidationIssue::NonFinite { label } => write!(f, "row {label:?} has non-finite data"),
            ValidationIssue::DuplicateLabel(l) => write!(f, "duplicate row label {l:?}"),
            ValidationIssue::EmptyBlock(b) => write!(f, "block {b:?} is empty"),
            ValidationIssue::DuplicateBlock(b) => write!(f, "duplicate block label {b:?}"),
            ValidationIssue::UnknownLabel { block, label } => {
                write!(f, "block {block:?} names unknown row {label:?}")
            }
            ValidationIssue::Overlap { label } => {
                write!(f, "row {label:?} belongs to more than one block")
            }
            ValidationIssue::NotCovered(missing) => write!(
                f,
                "partition does not cover index set (missing {})",
                missing.join(", ")
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.accepted() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "accepted");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Checks the system rows on their own.
pub fn validate_system(system: &LinearSystem) -> ValidationReport {
    let mut issues = Vec::new();
    if system.dimension == 0 {
        issues.push(ValidationIssue::NonPositiveDimension);
    }
    let mut seen = HashSet::new();
    for row in &system.rows {
        if row.a.len() != system.dimension {
            issues.push(ValidationIssue::DimensionMismatch {
                label: row.label.clone(),
                expected: system.dimension,
                found: row.a.len(),
            });
        }
        if !row.b.is_finite() || row.a.iter().any(|v| !v.is_finite()) {
            issues.push(ValidationIssue::NonFinite {
                label: row.label.clone(),
            });
        }
        if !seen.insert(row.label.as_str()) {
            issues.push(ValidationIssue::DuplicateLabel(row.label.clone()));
        }
    }
    ValidationReport { issues }
}

/// Structural validation of a (system, partition) pair. Nothing is repaired.
pub fn validate(system: &LinearSystem, partition: &BlockPartition) -> ValidationReport {
    let mut report = validate_system(system);
    let labels: HashSet<&str> = system.labels().collect();
    let mut covered: HashSet<&str> = HashSet::new();
    let mut block_labels = HashSet::new();
    for block in &partition.blocks {
        if !block_labels.insert(block.label.as_str()) {
            report
                .issues
                .push(ValidationIssue::DuplicateBlock(block.label.clone()));
        }
        if block.members.is_empty() {
            report
                .issues
                .push(ValidationIssue::EmptyBlock(block.label.clone()));
        }
        for m in &block.members {
            if !labels.contains(m.as_str()) {
                report.issues.push(ValidationIssue::UnknownLabel {
                    block: block.label.clone(),
                    label: m.clone(),
                });
            } else if !covered.insert(m.as_str()) {
                report
                    .issues
                    .push(ValidationIssue::Overlap { label: m.clone() });
            }
        }
    }
    let missing: Vec<String> = system
        .labels()
        .filter(|l| !covered.contains(l))
        .map(String::from)
        .collect();
    if !missing.is_empty() {
        report.issues.push(ValidationIssue::NotCovered(missing));
    }
    report
}

/// `dist(p; F_J^{-1}(x)) = max_j [ max_{t in T_j} (<a_t,x> - b_t) - p_j ]_+`
/// under the sup-norm on perturbations.
pub fn residual_inverse_distance(
    system: &LinearSystem,
    blocks: &RowBlocks,
    p: &Perturbation,
    x: &[f64],
) -> f64 {
    let mut worst = 0.0_f64;
    for (row, &j) in system.rows.iter().zip(&blocks.of_row) {
        worst = worst.max(row.residual(x) - p.0[j]);
    }
    worst
}

/// One generator `(a_t, b_t + p_j)` per row, in row order.
pub fn characteristic_generators(
    system: &LinearSystem,
    blocks: &RowBlocks,
    p: &Perturbation,
) -> CharacteristicSet {
    CharacteristicSet {
        generators: system
            .rows
            .iter()
            .zip(&blocks.of_row)
            .map(|(row, &j)| Generator {
                u: row.a.clone(),
                alpha: row.b + p.0[j],
            })
            .collect(),
    }
}
