//! Physical-layer math: ZF precoding, SINRs, worst-case secrecy bounds, the
//! logistic EH model and the WCSEE objective.
//!
//! Precoders are stored as unit-norm directions `p_hat_k`; the transmitted
//! beam for IHR `k` is `sqrt(p_k) * p_hat_k`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channels::{CMatrix, CVector, ChannelRealization, ScenarioConfig};
use crate::error::{Error, Result};

/// Condition number of `H^H H` above which ZF is refused.
pub const ZF_MAX_COND: f64 = 1e12;

/// Logistic (saturating) energy-harvesting model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhModel {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for EhModel {
    fn default() -> Self {
        Self::zero_anchored(150.0, 0.014, 0.024, 1.0)
    }
}

impl EhModel {
    /// Model with `k2` chosen so that no input power gives no output power.
    pub fn zero_anchored(b0: f64, b1: f64, b2: f64, k1: f64) -> Self {
        let k2 = b2 / (k1 * (1.0 + (b0 * b1).exp()));
        Self { b0, b1, b2, k1, k2 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.b0, self.b2, self.k1].iter().all(|v| v.is_finite() && *v > 0.0)
            && self.b1.is_finite()
            && self.k2.is_finite()
            && self.k2 >= 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid EH model {self:?}")));
        }
        Ok(())
    }

    /// Harvested DC power for received RF power `p`.
    pub fn dc(&self, p: f64) -> f64 {
        self.b2 / (self.k1 * (1.0 + (-self.b0 * (p - self.b1)).exp())) - self.k2
    }

    /// Limit of [`EhModel::dc`] as the input grows without bound.
    pub fn saturation(&self) -> f64 {
        self.b2 / self.k1 - self.k2
    }

    /// RF power needed to harvest `x` watts of DC.
    pub fn inverse(&self, x: f64) -> Result<f64> {
        let arg = self.b2 / (self.k1 * (x + self.k2)) - 1.0;
        if !(arg > 0.0) || !(x + self.k2 > 0.0) {
            return Err(Error::EhDomain {
                x,
                saturation: self.saturation(),
            });
        }
        Ok(self.b1 - arg.ln() / self.b0)
    }
}

pub fn eh_dc(p_rf: f64, model: &EhModel) -> f64 {
    model.dc(p_rf)
}

pub fn eh_inverse(x: f64, model: &EhModel) -> Result<f64> {
    model.inverse(x)
}

/// Unit-norm ZF directions and their effective gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfPrecoder {
    /// `N_t x K`, column `k` is `p_hat_k`.
    pub dirs: CMatrix,
    /// `a_k = |h_c,k^H p_hat_k|^2`.
    pub gains: Vec<f64>,
}

impl ZfPrecoder {
    pub fn k(&self) -> usize {
        self.dirs.ncols()
    }

    /// `|u^H p_hat_k|^2` for every `k`.
    pub fn leakage(&self, u: &CVector) -> Vec<f64> {
        (self.dirs.adjoint() * u).iter().map(|z| z.norm_sqr()).collect()
    }

    /// Beam `sqrt(p_k) p_hat_k`.
    pub fn beam(&self, p: &[f64], k: usize) -> CVector {
        self.dirs.column(k) * Complex64::new(p[k].max(0.0).sqrt(), 0.0)
    }
}

pub fn zf_precoder(h_c: &CMatrix) -> Result<ZfPrecoder> {
    let (n_t, k) = h_c.shape();
    if k == 0 || n_t < k {
        return Err(Error::DimensionMismatch {
            expected: k.max(1),
            got: n_t,
        });
    }
    let gram = h_c.adjoint() * h_c;
    let sv = gram.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= ZF_MAX_COND) || !smax.is_finite() {
        return Err(Error::RankDeficient { cond });
    }
    // H (H^H H)^{-1} = Q R^{-H} from the thin QR of H
    let qr = h_c.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let pbar_h = r
        .solve_upper_triangular(&q.adjoint())
        .ok_or(Error::RankDeficient { cond })?;
    let mut dirs = pbar_h.adjoint();
    for mut col in dirs.column_iter_mut() {
        let n = col.norm();
        col.unscale_mut(n);
    }
    let gains = (0..k)
        .map(|i| h_c.column(i).dotc(&dirs.column(i)).norm_sqr())
        .collect();
    Ok(ZfPrecoder { dirs, gains })
}

/// `gamma_k = p_k a_k / sigma^2`.
pub fn legit_sinr(pre: &ZfPrecoder, p: &[f64], sigma2: f64) -> Vec<f64> {
    pre.gains.iter().zip(p).map(|(a, pk)| pk * a / sigma2).collect()
}

fn interference_ratio(b: &[f64], p: &[f64], sigma2: f64, k: usize) -> f64 {
    let interf: f64 = (0..b.len()).filter(|l| *l != k).map(|l| p[l] * b[l]).sum();
    p[k] * b[k] / (interf + sigma2)
}

/// SINR of a UEHR with cascaded channel `u` decoding IHR `k`'s stream.
pub fn eve_sinr(u: &CVector, pre: &ZfPrecoder, p: &[f64], sigma2: f64, k: usize) -> f64 {
    interference_ratio(&pre.leakage(u), p, sigma2, k)
}

/// Upper bound on [`eve_sinr`] over all true channels within `nu` of `u_hat`.
pub fn worst_case_eve_sinr(
    u_hat: &CVector,
    pre: &ZfPrecoder,
    p: &[f64],
    sigma2: f64,
    nu: f64,
    k: usize,
) -> f64 {
    worst_case_from_leakage(&pre.leakage(u_hat), p, sigma2, nu, k)
}

fn worst_case_from_leakage(b: &[f64], p: &[f64], sigma2: f64, nu: f64, k: usize) -> f64 {
    if nu == 0.0 {
        return interference_ratio(b, p, sigma2, k);
    }
    let root: Vec<f64> = b.iter().map(|v| v.sqrt()).collect();
    let num = p[k] * (root[k] + nu).powi(2);
    let interf: f64 = (0..root.len())
        .filter(|l| *l != k)
        .map(|l| p[l] * (root[l] - nu).max(0.0).powi(2))
        .sum();
    num / (interf + sigma2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyRates {
    /// Per-IHR worst-case secrecy rates (bits/s/Hz).
    pub per_user: Vec<f64>,
    /// Minimum over IHRs.
    pub min: f64,
    pub gamma: Vec<f64>,
    /// Worst-case eavesdropping SINR per IHR, maximized over UEHRs.
    pub gamma_e: Vec<f64>,
}

pub fn secrecy_rate_parts(
    u_hat: &[CVector],
    pre: &ZfPrecoder,
    p: &[f64],
    sigma2: f64,
    nu: f64,
) -> SecrecyRates {
    let k = pre.k();
    let gamma = legit_sinr(pre, p, sigma2);
    let leaks: Vec<Vec<f64>> = u_hat.iter().map(|u| pre.leakage(u)).collect();
    let gamma_e: Vec<f64> = (0..k)
        .map(|i| {
            leaks
                .iter()
                .map(|b| worst_case_from_leakage(b, p, sigma2, nu, i))
                .fold(0.0, f64::max)
        })
        .collect();
    let per_user: Vec<f64> = gamma
        .iter()
        .zip(&gamma_e)
        .map(|(g, e)| ((1.0 + g).log2() - (1.0 + e).log2()).max(0.0))
        .collect();
    let min = per_user.iter().copied().fold(f64::INFINITY, f64::min);
    SecrecyRates {
        per_user,
        min,
        gamma,
        gamma_e,
    }
}

pub fn secrecy_rate(
    real: &ChannelRealization,
    pre: &ZfPrecoder,
    p: &[f64],
    cfg: &ScenarioConfig,
) -> SecrecyRates {
    secrecy_rate_parts(&real.u_hat, pre, p, cfg.sigma2, cfg.nu)
}

/// Lower bound on the RF power UEHR `j` harvests over the CSI error ball.
pub fn eh_lower_bound(u_hat: &CVector, pre: &ZfPrecoder, p: &[f64], nu: f64) -> f64 {
    pre.leakage(u_hat)
        .iter()
        .zip(p)
        .map(|(b, pk)| {
            let pk = pk.max(0.0);
            ((pk * b).sqrt() - nu * pk.sqrt()).max(0.0).powi(2)
        })
        .sum()
}

/// RF power actually received by a UEHR with channel `u`.
pub fn eh_received(u: &CVector, pre: &ZfPrecoder, p: &[f64]) -> f64 {
    pre.leakage(u).iter().zip(p).map(|(b, pk)| pk * b).sum()
}

pub fn wcsee(r_sec: f64, p: &[f64], varrho: f64, p0: f64) -> f64 {
    r_sec / (varrho * p.iter().sum::<f64>() + p0)
}

/// Everything derived from one `(channels, powers)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub precoder: ZfPrecoder,
    pub rates: SecrecyRates,
    /// Per-UEHR EH lower bounds (W of RF).
    pub eh_lower: Vec<f64>,
    /// `Omega^{-1}(E_h)`, clamped at zero.
    pub eh_threshold: f64,
    pub eh_ok: bool,
    pub total_power: f64,
    pub wcsee: f64,
}

impl Evaluation {
    pub fn eh_total(&self) -> f64 {
        self.eh_lower.iter().sum()
    }

    pub fn eh_slack(&self) -> f64 {
        self.eh_total() - self.eh_threshold
    }
}

pub fn evaluate(cfg: &ScenarioConfig, real: &ChannelRealization, p: &[f64]) -> Result<Evaluation> {
    if p.len() != cfg.k {
        return Err(Error::DimensionMismatch {
            expected: cfg.k,
            got: p.len(),
        });
    }
    let precoder = zf_precoder(&real.h_c)?;
    evaluate_with(cfg, real, precoder, p)
}

pub fn evaluate_with(
    cfg: &ScenarioConfig,
    real: &ChannelRealization,
    precoder: ZfPrecoder,
    p: &[f64],
) -> Result<Evaluation> {
    let rates = secrecy_rate(real, &precoder, p, cfg);
    let eh_lower: Vec<f64> = real
        .u_hat
        .iter()
        .map(|u| eh_lower_bound(u, &precoder, p, cfg.nu))
        .collect();
    let eh_threshold = cfg.eh_threshold()?;
    let eh_ok = cfg.e_h <= 0.0 || eh_lower.iter().sum::<f64>() >= eh_threshold;
    let total_power = cfg.varrho * p.iter().sum::<f64>() + cfg.p0;
    let w = wcsee(rates.min, p, cfg.varrho, cfg.p0);
    Ok(Evaluation {
        precoder,
        rates,
        eh_lower,
        eh_threshold,
        eh_ok,
        total_power,
        wcsee: w,
    })
}

/// Relative ZF orthogonality residual `max_{i!=k} |h_i^H p_k| / max_k |h_k^H p_k|`.
pub fn zf_residual(h_c: &CMatrix, pre: &ZfPrecoder) -> f64 {
    let cross: DMatrix<f64> = (h_c.adjoint() * &pre.dirs).map(|z| z.norm());
    let k = cross.ncols();
    let mut off: f64 = 0.0;
    let mut diag: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                diag = diag.max(cross[(i, j)]);
            } else {
                off = off.max(cross[(i, j)]);
            }
        }
    }
    off / diag
}
