//! Built-in example systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::convex::{ConvexFunctionSpec, ConvexSystem};
use crate::document::SystemDocument;
use crate::error::{Error, Result};
use crate::model::{LinearSystem, NormSpec, Row, DEFAULT_TOL};
use crate::stability::check_ssc;

pub const RANDOM_RETRIES: usize = 100;

/// Rows `(-1)^t t x_1 <= 1` for `t = 1..N` followed by `x_1 + x_2 <= 0`
/// labelled `t=0`: a finite truncation of a countable system.
pub fn paper_example(n: usize) -> Result<LinearSystem> {
    if n < 2 {
        return Err(Error::InvalidArgument("paper-example needs N >= 2".into()));
    }
    let mut s = LinearSystem::new(2, NormSpec::Euclid);
    for t in 1..=n {
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        s.push(format!("t={t}"), vec![sign * t as f64, 0.0], 1.0);
    }
    s.push("t=0", vec![1.0, 1.0], 0.0);
    s.truncation = Some(format!("first {n} of countably many rows t=1,2,..."));
    Ok(s)
}

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

/// `x^2 <= p`
pub fn convex_square() -> ConvexSystem {
    square(0.0)
}

/// `x^2 - 1 <= p`
pub fn convex_square_shifted() -> ConvexSystem {
    square(-1.0)
}

/// One draw of a random system in `R^n` with `m` rows. Rows are normal
/// vectors with right-hand sides set so that a random center has slack in
/// `[-0.2, 1]`; negative slack can break the Slater condition.
pub fn random_candidate<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> LinearSystem {
    let center: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rows = (0..m)
        .map(|t| {
            let a: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let slack = rng.random_range(-0.2..1.0);
            let b = crate::linalg::dot(&a, &center) + slack;
            Row::new(format!("r{}", t + 1), a, b)
        })
        .collect();
    LinearSystem::with_rows(n, NormSpec::Euclid, rows)
}

/// Random system satisfying the strong Slater condition, redrawn up to
/// [`RANDOM_RETRIES`] times.
pub fn random_system(n: usize, m: usize, seed: u64) -> Result<LinearSystem> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(
            "random needs n >= 1 and m >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_RETRIES {
        let s = random_candidate(n, m, &mut rng);
        if check_ssc(&s, DEFAULT_TOL)?.holds {
            return Ok(s);
        }
    }
    Err(Error::RetryExhausted(RANDOM_RETRIES))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Demo {
    PaperExample { n: usize },
    ConvexSquare,
    ConvexSquareShifted,
    Random { n: usize, m: usize, seed: u64 },
}

pub fn demo_generate(demo: &Demo) -> Result<SystemDocument> {
    Ok(match demo {
        Demo::PaperExample { n } => SystemDocument::from_linear(&paper_example(*n)?, None),
        Demo::ConvexSquare => SystemDocument::from_convex(&convex_square()),
        Demo::ConvexSquareShifted => SystemDocument::from_convex(&convex_square_shifted()),
        Demo::Random { n, m, seed } => {
            SystemDocument::from_linear(&random_system(*n, *m, *seed)?, None)
        }
    })
}
