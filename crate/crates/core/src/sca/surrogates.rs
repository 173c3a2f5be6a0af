//! One-sided convex/affine bounds used to build SCA subproblems.
//!
//! Each constructor takes the expansion point and returns a small value type
//! that evaluates the bound and exposes its coefficients.

use num_complex::Complex64;

use crate::channels::CVector;
use crate::error::{Error, Result};

/// `log2(sigma^2 + sum p_l b_l) <= log2(S0) + sum eta_l (p_l - p0_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogUpper {
    pub s0: f64,
    pub eta: Vec<f64>,
    pub p0: Vec<f64>,
}

pub fn log_upper(p0: &[f64], b: &[f64], sigma2: f64) -> LogUpper {
    let s0 = sigma2 + p0.iter().zip(b).map(|(p, b)| p * b).sum::<f64>();
    let eta = b.iter().map(|b| b / (std::f64::consts::LN_2 * s0)).collect();
    LogUpper {
        s0,
        eta,
        p0: p0.to_vec(),
    }
}

impl LogUpper {
    pub fn eval(&self, p: &[f64]) -> f64 {
        self.s0.log2() + self.eta.iter().zip(p).zip(&self.p0).map(|((e, p), p0)| e * (p - p0)).sum::<f64>()
    }
}

/// Components of the real-valued representation `x = [Re s; Im s]`.
pub(crate) fn re_im_rows(t: &CVector) -> (Vec<f64>, Vec<f64>) {
    // t^H s = sum conj(t_m) s_m = (a'x) + i (b'x)
    let m = t.len();
    let mut a = vec![0.0; 2 * m];
    let mut b = vec![0.0; 2 * m];
    for (i, z) in t.iter().enumerate() {
        a[i] = z.re;
        a[m + i] = z.im;
        b[i] = -z.im;
        b[m + i] = z.re;
    }
    (a, b)
}

/// Affine lower bound of `|t^H s|^2 / rho`: `2 Re{conj(z0) t^H s}/rho0 - |z0|^2 rho / rho0^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadOverLinLb {
    /// Coefficients on `[Re s; Im s]`.
    pub s_coef: Vec<f64>,
    pub rho_coef: f64,
}

pub fn quad_over_lin_lb(s0: &CVector, rho0: f64, t: &CVector) -> QuadOverLinLb {
    let z0 = t.dotc(s0);
    let (a, b) = re_im_rows(t);
    // Re{conj(z0) z} = z0.re * Re z + z0.im * Im z
    let s_coef = a.iter().zip(&b).map(|(a, b)| 2.0 * (z0.re * a + z0.im * b) / rho0).collect();
    QuadOverLinLb {
        s_coef,
        rho_coef: -z0.norm_sqr() / (rho0 * rho0),
    }
}

impl QuadOverLinLb {
    pub fn eval(&self, s: &CVector, rho: f64) -> f64 {
        let m = s.len();
        let mut v = self.rho_coef * rho;
        for (i, z) in s.iter().enumerate() {
            v += self.s_coef[i] * z.re + self.s_coef[m + i] * z.im;
        }
        v
    }
}

/// Concave lower bound of `xy`, tight along `x + y = x0 + y0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearLb {
    pub x0: f64,
    pub y0: f64,
}

pub fn bilinear_lb(x0: f64, y0: f64) -> BilinearLb {
    BilinearLb { x0, y0 }
}

impl BilinearLb {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let c = self.x0 + self.y0;
        0.5 * c * (x + y) - 0.25 * c * c - 0.25 * (x - y) * (x - y)
    }
}

/// First-order Taylor bound of `|c + t^H s|^2` around `s0`.
///
/// `2 Re{conj(w0) (c + t^H s)} - |w0|^2` with `w0 = c + t^H s0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadLb {
    pub s_coef: Vec<f64>,
    pub constant: f64,
}

pub fn quad_lb(c: Complex64, t: &CVector, s0: &CVector) -> QuadLb {
    let w0 = c + t.dotc(s0);
    let (a, b) = re_im_rows(t);
    let s_coef = a.iter().zip(&b).map(|(a, b)| 2.0 * (w0.re * a + w0.im * b)).collect();
    QuadLb {
        s_coef,
        constant: 2.0 * (w0.conj() * c).re - w0.norm_sqr(),
    }
}

impl QuadLb {
    pub fn eval(&self, s: &CVector) -> f64 {
        let m = s.len();
        let mut v = self.constant;
        for (i, z) in s.iter().enumerate() {
            v += self.s_coef[i] * z.re + self.s_coef[m + i] * z.im;
        }
        v
    }
}

/// `2^x0 (1 + ln2 (x - x0)) <= 2^x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp2Lb {
    pub x0: f64,
}

pub fn exp2_lb(x0: f64) -> Exp2Lb {
    Exp2Lb { x0 }
}

impl Exp2Lb {
    pub fn slope(&self) -> f64 {
        self.x0.exp2() * std::f64::consts::LN_2
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.x0.exp2() * (1.0 + std::f64::consts::LN_2 * (x - self.x0))
    }
}

/// `ab <= 1/2 (b0/a0 a^2 + a0/b0 b^2)` for `a, b >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgmUb {
    pub a0: f64,
    pub b0: f64,
}

pub fn agm_ub(a0: f64, b0: f64) -> AgmUb {
    debug_assert!(a0 > 0.0 && b0 > 0.0);
    AgmUb { a0, b0 }
}

impl AgmUb {
    /// Weights `(wa, wb)` of `a^2` and `b^2`.
    pub fn weights(&self) -> (f64, f64) {
        (0.5 * self.b0 / self.a0, 0.5 * self.a0 / self.b0)
    }

    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let (wa, wb) = self.weights();
        wa * a * a + wb * b * b
    }
}

/// `1/y >= 1/y0 - (y - y0)/y0^2` for `y > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvAffineLb {
    pub y0: f64,
}

pub fn inv_affine_lb(y0: f64) -> InvAffineLb {
    debug_assert!(y0 > 0.0);
    InvAffineLb { y0 }
}

impl InvAffineLb {
    pub fn eval(&self, y: f64) -> f64 {
        2.0 / self.y0 - y / (self.y0 * self.y0)
    }
}

/// `(A, B)` with `U + S x^2 + 2 T x >= A + B x^2` for all real `x`.
pub fn eh_quadratic_lb(u: f64, s: f64, t: f64, epsilon: f64) -> Result<(f64, f64)> {
    if !(s > 0.0) || !(epsilon > 1.0 / s) {
        return Err(Error::InvalidEpsilon {
            epsilon,
            bound: 1.0 / s,
        });
    }
    Ok((u - epsilon * t * t, s - 1.0 / epsilon))
}
