//! Actor-critic agents and their training loop.

pub mod ddpg;
pub mod sac;
pub mod train;

use nalgebra::DMatrix;

use crate::neural::{Batch, Mlp};

pub use ddpg::{DdpgAgent, DdpgConfig};
pub use sac::{SacAgent, SacConfig};
pub use train::{evaluate_policy, train, LearningCurve, PolicyEval, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    /// Stochastic or noise-perturbed action used while collecting data.
    Explore,
    /// Deterministic action used for evaluation.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    /// SAC temperature; DDPG reports its current exploration scale.
    pub temperature: f64,
}

pub trait Agent {
    fn act(&mut self, s: &[f64], mode: ActMode) -> Vec<f64>;
    fn update(&mut self, batch: &Batch) -> UpdateStats;
    fn temperature(&self) -> f64;
    /// Fraction of the training budget consumed, in `[0, 1]`.
    fn set_progress(&mut self, _frac: f64) {}
}

/// `target <- tau * online + (1 - tau) * target`, elementwise.
pub fn polyak(target: &mut Mlp, online: &Mlp, tau: f64) {
    assert_eq!(target.widths(), online.widths());
    if tau == 1.0 {
        target.params.copy_from_slice(&online.params);
        return;
    }
    for (t, o) in target.params.iter_mut().zip(&online.params) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

/// Vertical concatenation of two matrices with equal column counts.
pub fn stack_rows(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(top.ncols(), bottom.ncols());
    let (r1, r2) = (top.nrows(), bottom.nrows());
    let mut out = DMatrix::zeros(r1 + r2, top.ncols());
    out.rows_mut(0, r1).copy_from(top);
    out.rows_mut(r1, r2).copy_from(bottom);
    out
}
