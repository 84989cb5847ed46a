//! Schwab–Borchardt two-sequence iteration and the cube-root / weighted-average
//! bounds it gives for L, P and T.

use serde::Serialize;
use thiserror::Error;

use crate::means::{eval_mean, MeanError, MeanKind, PositivePair};

pub const MAX_ITERATIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error(transparent)]
    Mean(#[from] MeanError),
    #[error("bounds are only defined for L, P and T, not {0}")]
    UnsupportedKind(MeanKind),
    #[error("{0} iterations requested, at most {MAX_ITERATIONS} allowed")]
    TooManySteps(usize),
    #[error("relative tolerance {0} is below 1e-15")]
    Tolerance(f64),
    #[error("no convergence after {MAX_ITERATIONS} iterations (gap {gap:e})")]
    Convergence { gap: f64 },
}

pub type Result<T> = std::result::Result<T, BoundsError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsStep {
    pub first: f64,
    pub second: f64,
    pub lower: f64,
    pub upper: f64,
}

impl BoundsStep {
    fn new(first: f64, second: f64) -> Self {
        BoundsStep {
            first,
            second,
            lower: (second * second * first).cbrt(),
            upper: (first + 2.0 * second) / 3.0,
        }
    }

    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsTrace {
    pub kind: MeanKind,
    /// Steps 0..=n.
    pub steps: Vec<BoundsStep>,
    pub target: f64,
}

/// Applies `first' = (first + second)/2, second' = sqrt(first' * second)` n times.
/// The returned list has n + 1 entries, starting with the initial pair.
pub fn sb_iterate(first0: f64, second0: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    PositivePair::new(first0, second0)?;
    if n > MAX_ITERATIONS {
        return Err(BoundsError::TooManySteps(n));
    }
    let mut out = Vec::with_capacity(n + 1);
    let (mut f, mut s) = (first0, second0);
    out.push((f, s));
    for _ in 0..n {
        f = (f + s) / 2.0;
        s = (f * s).sqrt();
        out.push((f, s));
    }
    Ok(out)
}

fn start(kind: MeanKind, pair: PositivePair) -> Result<(f64, f64)> {
    let a = eval_mean(MeanKind::A, pair)?;
    match kind {
        MeanKind::P => Ok((eval_mean(MeanKind::G, pair)?, a)),
        MeanKind::L => Ok((a, eval_mean(MeanKind::G, pair)?)),
        MeanKind::T => Ok((a, eval_mean(MeanKind::Q, pair)?)),
        other => Err(BoundsError::UnsupportedKind(other)),
    }
}

/// The full trace of bounds for steps 0..=n.
pub fn trace(kind: MeanKind, pair: PositivePair, n: usize) -> Result<BoundsTrace> {
    let (f0, s0) = start(kind, pair)?;
    let steps = sb_iterate(f0, s0, n)?
        .into_iter()
        .map(|(f, s)| BoundsStep::new(f, s))
        .collect();
    Ok(BoundsTrace {
        kind,
        steps,
        target: eval_mean(kind, pair)?,
    })
}

/// (lower_n, upper_n) with lower_n < kind(pair) < upper_n when a != b.
pub fn bounds_for(kind: MeanKind, pair: PositivePair, n: usize) -> Result<(f64, f64)> {
    let (f0, s0) = start(kind, pair)?;
    let &(f, s) = sb_iterate(f0, s0, n)?.last().expect("at least the initial pair");
    let step = BoundsStep::new(f, s);
    Ok((step.lower, step.upper))
}

/// Iterates until `upper - lower <= rel_tol * value`; returns the midpoint and
/// the number of iterations used.
pub fn converge(kind: MeanKind, pair: PositivePair, rel_tol: f64) -> Result<(f64, usize)> {
    if !(rel_tol >= 1e-15) {
        return Err(BoundsError::Tolerance(rel_tol));
    }
    let (mut f, mut s) = start(kind, pair)?;
    let mut gap = f64::INFINITY;
    for it in 0..=MAX_ITERATIONS {
        let step = BoundsStep::new(f, s);
        let mid = 0.5 * (step.lower + step.upper);
        gap = step.gap();
        if gap <= rel_tol * mid {
            return Ok((mid, it));
        }
        f = (f + s) / 2.0;
        s = (f * s).sqrt();
    }
    Err(BoundsError::Convergence { gap })
}
