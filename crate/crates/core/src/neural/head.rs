//! Tanh-squashed diagonal Gaussian policy head.
//!
//! The actor trunk outputs `2A` rows per sample: means, then log standard
//! deviations. Actions are `tanh(mean + std * xi)` with `xi ~ N(0, I)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Guard inside `ln(1 - a^2 + EPS)`.
pub const EPS: f64 = 1e-6;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone)]
pub struct SquashedSample {
    /// `A x B` actions in `(-1, 1)`.
    pub action: DMatrix<f64>,
    /// Per-sample log-density of `action`.
    pub log_prob: Vec<f64>,
    xi: DMatrix<f64>,
    std: DMatrix<f64>,
    /// 1 where the raw log-std was inside the clamp interval.
    ls_mask: DMatrix<f64>,
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Reparameterized sample for given noise `xi` (`A x B`).
pub fn squashed_sample(out: &DMatrix<f64>, xi: &DMatrix<f64>) -> SquashedSample {
    let a_dim = out.nrows() / 2;
    assert_eq!(out.nrows(), 2 * a_dim);
    assert_eq!(xi.shape(), (a_dim, out.ncols()));
    let b = out.ncols();
    let mut action = DMatrix::zeros(a_dim, b);
    let mut std = DMatrix::zeros(a_dim, b);
    let mut ls_mask = DMatrix::zeros(a_dim, b);
    let mut log_prob = vec![0.0; b];
    for c in 0..b {
        let mut lp = 0.0;
        for r in 0..a_dim {
            let raw = out[(a_dim + r, c)];
            let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            ls_mask[(r, c)] = if raw == ls { 1.0 } else { 0.0 };
            let sd = ls.exp();
            let x = xi[(r, c)];
            let a = (out[(r, c)] + sd * x).tanh();
            std[(r, c)] = sd;
            action[(r, c)] = a;
            lp += -0.5 * x * x - ls - HALF_LN_TAU - (1.0 - a * a + EPS).ln();
        }
        log_prob[c] = lp;
    }
    SquashedSample {
        action,
        log_prob,
        xi: xi.clone(),
        std,
        ls_mask,
    }
}

/// Cotangent of the trunk output given cotangents of the actions and of
/// the per-sample log-probabilities.
pub fn squashed_backward(s: &SquashedSample, g_action: &DMatrix<f64>, g_logp: &[f64]) -> DMatrix<f64> {
    let (a_dim, b) = s.action.shape();
    let mut g = DMatrix::zeros(2 * a_dim, b);
    for c in 0..b {
        for r in 0..a_dim {
            let a = s.action[(r, c)];
            let one_m = 1.0 - a * a;
            let dlogp_du = 2.0 * a * one_m / (one_m + EPS);
            let gu = g_action[(r, c)] * one_m + g_logp[c] * dlogp_du;
            g[(r, c)] = gu;
            g[(a_dim + r, c)] = s.ls_mask[(r, c)] * (gu * s.std[(r, c)] * s.xi[(r, c)] - g_logp[c]);
        }
    }
    g
}

/// Noise-free action `tanh(mean)`.
pub fn deterministic_action(out: &DMatrix<f64>) -> DMatrix<f64> {
    let a_dim = out.nrows() / 2;
    out.rows(0, a_dim).map(|m| m.tanh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngStream, StreamTag};

    fn phi(x: f64) -> f64 {
        0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
    }

    #[test]
    fn zero_std_is_deterministic() {
        let out = DMatrix::from_column_slice(4, 1, &[0.3, -0.7, -20.0, -25.0]);
        let xi = DMatrix::from_column_slice(2, 1, &[1.5, -2.0]);
        let s = squashed_sample(&out, &xi);
        let det = deterministic_action(&out);
        for r in 0..2 {
            assert!((s.action[(r, 0)] - det[(r, 0)]).abs() < 1e-8);
        }
    }

    #[test]
    fn log_prob_finite_near_bounds() {
        // pre-squash value giving |a| = 1 - 1e-6
        let u = (1.0f64 - 1e-6).atanh();
        let out = DMatrix::from_column_slice(2, 1, &[u, -20.0]);
        let xi = DMatrix::zeros(1, 1);
        let s = squashed_sample(&out, &xi);
        assert!(s.log_prob[0].is_finite());
        let out = DMatrix::from_column_slice(2, 1, &[50.0, 2.0]);
        let s = squashed_sample(&out, &DMatrix::from_element(1, 1, 3.0));
        assert!(s.log_prob[0].is_finite());
    }

    #[test]
    fn log_prob_matches_change_of_variables() {
        // small enough std and mean that eps is negligible
        let (m, ls) = (0.2, -0.5);
        let out = DMatrix::from_column_slice(2, 1, &[m, ls]);
        let x = 0.7;
        let s = squashed_sample(&out, &DMatrix::from_element(1, 1, x));
        let a: f64 = s.action[(0, 0)];
        let sd = f64::exp(ls);
        let u = a.atanh();
        let dens = (-0.5 * ((u - m) / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt()) / (1.0 - a * a);
        assert!((s.log_prob[0] - dens.ln()).abs() < 1e-5);
    }

    #[test]
    fn histogram_matches_analytic_cdf() {
        let (m, ls) = (0.3, -0.2);
        let n = 1_000_000;
        let mut rng = RngStream::new(3).substream(StreamTag::Policy, 0);
        let out = DMatrix::from_fn(2, n, |r, _| if r == 0 { m } else { ls });
        let xi = standard_normal(&mut rng, 1, n);
        let s = squashed_sample(&out, &xi);
        let mut a: Vec<f64> = s.action.iter().copied().collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let sd = f64::exp(ls);
        let mut ks: f64 = 0.0;
        for (i, v) in a.iter().enumerate() {
            let cdf = phi((v.atanh() - m) / sd);
            ks = ks.max((cdf - i as f64 / n as f64).abs()).max((cdf - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 0.01, "KS = {ks}");
        assert!(a.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = RngStream::new(5).substream(StreamTag::Policy, 0);
        let out = DMatrix::from_fn(6, 4, |r, _| if r < 3 { rng.gen_range(-1.0..1.0) } else { rng.gen_range(-1.5..0.5) });
        let xi = standard_normal(&mut rng, 3, 4);
        let ga = DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0));
        let gl: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = |o: &DMatrix<f64>| {
            let s = squashed_sample(o, &xi);
            s.action.zip_map(&ga, |a, b| a * b).sum() + s.log_prob.iter().zip(&gl).map(|(a, b)| a * b).sum::<f64>()
        };
        let s = squashed_sample(&out, &xi);
        let g = squashed_backward(&s, &ga, &gl);
        let h = 1e-6;
        for r in 0..6 {
            for c in 0..4 {
                let mut p = out.clone();
                p[(r, c)] += h;
                let mut q = out.clone();
                q[(r, c)] -= h;
                let fd = (f(&p) - f(&q)) / (2.0 * h);
                assert!((fd - g[(r, c)]).abs() <= 1e-6 * (1.0 + fd.abs()), "{r},{c}: {fd} vs {}", g[(r, c)]);
            }
        }
    }
}
