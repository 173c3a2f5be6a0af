//! Model-based benchmark: Dinkelbach power allocation, penalty RIS-phase SCA
//! and AGM-based UAV placement, alternated by a BCD outer loop.
//!
//! All subproblems are noise-normalized before they reach the convex solver.
//! The benchmark assumes perfect CSI and continuous phases.

mod bcd;
mod power;
mod ris;
pub mod surrogates;
mod uav;

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::convex::{SmoothFn, SolverOptions, Term};
use crate::error::Result;

pub use bcd::{bcd_outer, BcdResult};
pub use power::{dinkelbach_power, PowerResult};
pub use ris::{ris_phase_sca, RisModel, RisResult};
pub use surrogates::*;
pub use uav::{uav_location_sca, UavModel, UavResult};

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOptions {
    /// Inner stopping tolerance on `zeta` (bits/s/Hz).
    pub eps: f64,
    /// Outer stopping tolerance on the WCSEE.
    pub eps_out: f64,
    pub i_max: usize,
    pub inner_max: usize,
    pub penalty_start: f64,
    pub penalty_factor: f64,
    pub penalty_max: f64,
    /// Largest accepted `1 - |s_m|` at an SCA exit before the penalty grows.
    pub unit_tol: f64,
    pub solver: SolverOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            eps: 0.01,
            eps_out: 1e-3,
            i_max: 20,
            inner_max: 50,
            penalty_start: 10.0,
            penalty_factor: 5.0,
            penalty_max: 1e4,
            unit_tol: 1e-3,
            solver: SolverOptions {
                tol: 1e-10,
                max_iter: 200,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Power,
    Ris,
    Uav,
}

impl Block {
    pub fn name(&self) -> &'static str {
        match self {
            Block::Power => "power",
            Block::Ris => "ris",
            Block::Uav => "uav",
        }
    }
}

/// One row of the per-iteration SCA trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub outer_iter: usize,
    pub block: Block,
    /// Penalty stage for the RIS block, zero otherwise.
    pub stage: usize,
    pub inner_iter: usize,
    /// Quantity the block's SCA iterations never decrease.
    pub objective: f64,
    /// Dinkelbach parameter (power block) or penalty weight (RIS block).
    pub lambda: f64,
    /// True harvested RF power minus the requirement (W).
    pub eh_slack: f64,
}

pub const TRACE_HEADER: &str = "outer_iter,block,stage,inner_iter,objective,lambda,eh_slack";

pub fn write_trace<W: Write>(rows: &[TraceRow], w: &mut W) -> Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.12e},{:.12e},{:.12e}",
            r.outer_iter,
            r.block.name(),
            r.stage,
            r.inner_iter,
            r.objective,
            r.lambda,
            r.eh_slack
        )?;
    }
    Ok(())
}

/// Largest decrease between consecutive iterations of one SCA run, relative to
/// `max(1, |objective|)`. Runs are split on block, outer iteration and stage.
pub fn max_monotonicity_violation(rows: &[TraceRow]) -> f64 {
    let mut worst: f64 = 0.0;
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.block == b.block && a.outer_iter == b.outer_iter && a.stage == b.stage && b.inner_iter == a.inner_iter + 1 {
            let drop = (a.objective - b.objective) / a.objective.abs().max(1.0);
            worst = worst.max(drop);
        }
    }
    worst
}

/// Accumulates `1/2 x'Px + q'x + r` for one constraint or objective.
#[derive(Debug, Clone)]
pub(crate) struct QuadBuilder {
    p: DMatrix<f64>,
    q: DVector<f64>,
    r: f64,
    quadratic: bool,
    terms: Vec<Term>,
}

impl QuadBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            p: DMatrix::zeros(n, n),
            q: DVector::zeros(n),
            r: 0.0,
            quadratic: false,
            terms: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn lin(&mut self, i: usize, v: f64) -> &mut Self {
        self.q[i] += v;
        self
    }

    pub fn lin_slice(&mut self, offset: usize, v: &[f64], scale: f64) -> &mut Self {
        for (i, x) in v.iter().enumerate() {
            self.q[offset + i] += scale * x;
        }
        self
    }

    pub fn constant(&mut self, v: f64) -> &mut Self {
        self.r += v;
        self
    }

    /// Adds `w (a'x + a0)^2` where `a` is given as `(index, value)` pairs.
    pub fn square(&mut self, a: &[(usize, f64)], a0: f64, w: f64) -> &mut Self {
        self.quadratic = true;
        for &(i, ai) in a {
            self.q[i] += 2.0 * w * a0 * ai;
            for &(j, aj) in a {
                self.p[(i, j)] += 2.0 * w * ai * aj;
            }
        }
        self.r += w * a0 * a0;
        self
    }

    /// `-w ln(a'x + b)` with `a = coef * e_i`.
    pub fn neg_log(&mut self, i: usize, coef: f64, b: f64, w: f64) -> &mut Self {
        let mut a = DVector::zeros(self.n());
        a[i] = coef;
        self.terms.push(Term::NegLog { w, a, b });
        self
    }

    pub fn neg_log_vec(&mut self, a: DVector<f64>, b: f64, w: f64) -> &mut Self {
        self.terms.push(Term::NegLog { w, a, b });
        self
    }

    pub fn neg_pow(&mut self, i: usize, p: f64, w: f64) -> &mut Self {
        let mut a = DVector::zeros(self.n());
        a[i] = 1.0;
        self.terms.push(Term::NegPow { w, a, b: 0.0, p });
        self
    }

    pub fn build(self) -> SmoothFn {
        SmoothFn {
            p: self.quadratic.then_some(self.p),
            q: self.q,
            r: self.r,
            terms: self.terms,
        }
    }
}

/// Stacks a complex vector as `[Re; Im]`.
pub(crate) fn stack(s: &crate::channels::CVector) -> Vec<f64> {
    s.iter().map(|z| z.re).chain(s.iter().map(|z| z.im)).collect()
}

pub(crate) fn unstack(x: &[f64]) -> crate::channels::CVector {
    let m = x.len() / 2;
    crate::channels::CVector::from_fn(m, |i, _| num_complex::Complex64::new(x[i], x[m + i]))
}
