use num_complex::Complex64;

use super::surrogates::re_im_rows;
use super::{bilinear_lb, exp2_lb, quad_lb, quad_over_lin_lb, stack, unstack, Block, QuadBuilder, ScaOptions, TraceRow};
use crate::channels::{CVector, ChannelRealization, ScenarioConfig};
use crate::convex::{solve_optimal, ConvexProgram};
use crate::error::Result;

const INV_LN2: f64 = std::f64::consts::LOG2_E;

/// Signal terms as functions of the reflection vector for fixed beams, in
/// noise-normalized units: IHR `k` sees `t_kl^H s` from beam `l`, UEHR `j`
/// sees `c_jl + t_jl^H s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisModel {
    pub t_ihr: Vec<Vec<CVector>>,
    pub t_uehr: Vec<Vec<CVector>>,
    pub c_uehr: Vec<Vec<Complex64>>,
    /// Required harvested power over noise.
    pub eh_req: f64,
    pub sigma2: f64,
}

impl RisModel {
    /// `beams[l]` is the full transmit vector `sqrt(p_l) p_hat_l`.
    pub fn new(real: &ChannelRealization, beams: &[CVector], cfg: &ScenarioConfig) -> Result<Self> {
        let inv_sigma = 1.0 / cfg.sigma2.sqrt();
        let v: Vec<CVector> = beams.iter().map(|p| &real.g_b * p).collect();
        let t_of = |x: &CVector| -> Vec<CVector> {
            v.iter()
                .map(|vl| x.zip_map(vl, |a, b| a * b.conj() * inv_sigma))
                .collect()
        };
        Ok(Self {
            t_ihr: real.g.iter().map(t_of).collect(),
            t_uehr: real.h.iter().map(t_of).collect(),
            c_uehr: real
                .h_bj
                .iter()
                .map(|h| beams.iter().map(|p| h.dotc(p) * inv_sigma).collect())
                .collect(),
            eh_req: cfg.eh_threshold()? / cfg.sigma2,
            sigma2: cfg.sigma2,
        })
    }

    pub fn k(&self) -> usize {
        self.t_ihr.len()
    }

    pub fn j(&self) -> usize {
        self.t_uehr.len()
    }

    pub fn gamma(&self, s: &CVector, k: usize) -> f64 {
        let row = &self.t_ihr[k];
        let interf: f64 = (0..row.len()).filter(|l| *l != k).map(|l| row[l].dotc(s).norm_sqr()).sum();
        row[k].dotc(s).norm_sqr() / (interf + 1.0)
    }

    fn uehr_power(&self, s: &CVector, j: usize, l: usize) -> f64 {
        (self.c_uehr[j][l] + self.t_uehr[j][l].dotc(s)).norm_sqr()
    }

    /// Interference plus noise seen by UEHR `j` when decoding stream `k`.
    pub fn uehr_interference(&self, s: &CVector, j: usize, k: usize) -> f64 {
        (0..self.k()).filter(|l| *l != k).map(|l| self.uehr_power(s, j, l)).sum::<f64>() + 1.0
    }

    pub fn gamma_e(&self, s: &CVector, j: usize, k: usize) -> f64 {
        self.uehr_power(s, j, k) / self.uehr_interference(s, j, k)
    }

    /// Minimum secrecy rate with the hinge.
    pub fn min_secrecy(&self, s: &CVector) -> f64 {
        (0..self.k())
            .map(|k| {
                let e = (0..self.j()).map(|j| self.gamma_e(s, j, k)).fold(0.0, f64::max);
                ((1.0 + self.gamma(s, k)).log2() - (1.0 + e).log2()).max(0.0)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Harvested RF power over noise, summed over UEHRs.
    pub fn eh(&self, s: &CVector) -> f64 {
        (0..self.j()).map(|j| (0..self.k()).map(|l| self.uehr_power(s, j, l)).sum::<f64>()).sum()
    }

    /// One minorize-maximize step on the harvested power over unit-modulus
    /// reflections: the linearization at `s` is maximized elementwise by the
    /// phase of the gradient. Harvested power never decreases.
    pub fn eh_ascent(&self, s: &CVector) -> CVector {
        let mut g = CVector::zeros(s.len());
        for j in 0..self.j() {
            for l in 0..self.k() {
                let t = &self.t_uehr[j][l];
                let w = self.c_uehr[j][l] + t.dotc(s);
                g += t * w;
            }
        }
        g.map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RisResult {
    /// Unit-modulus reflection vector after projection.
    pub s: CVector,
    /// Relaxed solution before projection.
    pub s_relaxed: CVector,
    pub zeta: f64,
    /// `max_m (1 - |s_m|)` before projection.
    pub unit_gap: f64,
    pub penalty: f64,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
struct RisPoint {
    s: CVector,
    zeta: f64,
    rho: Vec<f64>,
    rho_e: Vec<f64>,
    f_e: Vec<f64>,
    xi: Vec<f64>,
}

struct Layout {
    m: usize,
    k: usize,
    j: usize,
}

impl Layout {
    fn zeta(&self) -> usize {
        2 * self.m
    }
    fn rho(&self, k: usize) -> usize {
        2 * self.m + 1 + k
    }
    fn rho_e(&self, j: usize, k: usize) -> usize {
        2 * self.m + 1 + self.k + j * self.k + k
    }
    fn f_e(&self, k: usize) -> usize {
        2 * self.m + 1 + self.k + self.j * self.k + k
    }
    fn xi(&self, j: usize, k: usize) -> usize {
        2 * self.m + 1 + 2 * self.k + self.j * self.k + j * self.k + k
    }
    fn n(&self) -> usize {
        2 * self.m + 1 + 2 * self.k + 2 * self.j * self.k
    }

    fn pack(&self, p: &RisPoint) -> nalgebra::DVector<f64> {
        let mut x = nalgebra::DVector::zeros(self.n());
        for (i, v) in stack(&p.s).into_iter().enumerate() {
            x[i] = v;
        }
        x[self.zeta()] = p.zeta;
        for k in 0..self.k {
            x[self.rho(k)] = p.rho[k];
            x[self.f_e(k)] = p.f_e[k];
            for j in 0..self.j {
                x[self.rho_e(j, k)] = p.rho_e[j * self.k + k];
                x[self.xi(j, k)] = p.xi[j * self.k + k];
            }
        }
        x
    }

    fn unpack(&self, x: &nalgebra::DVector<f64>) -> RisPoint {
        let jk = self.j * self.k;
        RisPoint {
            s: unstack(&x.as_slice()[..2 * self.m]),
            zeta: x[self.zeta()],
            rho: (0..self.k).map(|k| x[self.rho(k)]).collect(),
            rho_e: (0..jk).map(|i| x[self.rho_e(i / self.k, i % self.k)]).collect(),
            f_e: (0..self.k).map(|k| x[self.f_e(k)]).collect(),
            xi: (0..jk).map(|i| x[self.xi(i / self.k, i % self.k)]).collect(),
        }
    }
}

const MARGIN: f64 = 1e-6;

/// Slacks at their defining values, nudged inward by a small margin.
fn tight_point(model: &RisModel, s: &CVector) -> RisPoint {
    let (k, j) = (model.k(), model.j());
    let rho: Vec<f64> = (0..k).map(|i| (model.gamma(s, i) * (1.0 - MARGIN)).max(1e-12)).collect();
    let mut xi = vec![0.0; j * k];
    let mut rho_e = vec![0.0; j * k];
    for jj in 0..j {
        for kk in 0..k {
            let inter = model.uehr_interference(s, jj, kk);
            let x = inter * (1.0 - MARGIN);
            xi[jj * k + kk] = x;
            rho_e[jj * k + kk] = model.uehr_power(s, jj, kk) / x * (1.0 + MARGIN) + 1e-12;
        }
    }
    let f_e: Vec<f64> = (0..k)
        .map(|kk| (0..j).map(|jj| (1.0 + rho_e[jj * k + kk]).log2()).fold(0.0, f64::max) + MARGIN)
        .collect();
    let zeta = (0..k).map(|i| (1.0 + rho[i]).log2() - f_e[i]).fold(f64::INFINITY, f64::min) - MARGIN;
    RisPoint {
        s: s.clone(),
        zeta,
        rho,
        rho_e,
        f_e,
        xi,
    }
}

fn square_of(b: &mut QuadBuilder, t: &CVector, c: Complex64) {
    let (a, bb) = re_im_rows(t);
    let pa: Vec<(usize, f64)> = a.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect();
    let pb: Vec<(usize, f64)> = bb.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect();
    b.square(&pa, c.re, 1.0);
    b.square(&pb, c.im, 1.0);
}

fn build_program(model: &RisModel, lay: &Layout, pt: &RisPoint, penalty: f64) -> ConvexProgram {
    let (m, k, j, n) = (lay.m, lay.k, lay.j, lay.n());
    let mut obj = QuadBuilder::new(n);
    obj.lin(lay.zeta(), -1.0);
    let s0 = stack(&pt.s);
    obj.lin_slice(0, &s0, -2.0 * penalty).constant(penalty * pt.s.norm_squared());
    let mut prog = ConvexProgram::new(obj.build());
    for kk in 0..k {
        // legitimate SINR slack
        let mut c = QuadBuilder::new(n);
        for l in (0..k).filter(|l| *l != kk) {
            square_of(&mut c, &model.t_ihr[kk][l], Complex64::new(0.0, 0.0));
        }
        let psi = quad_over_lin_lb(&pt.s, pt.rho[kk], &model.t_ihr[kk][kk]);
        c.constant(1.0).lin_slice(0, &psi.s_coef, -1.0).lin(lay.rho(kk), -psi.rho_coef);
        prog.add(c.build());
        // secrecy epigraph
        let mut c = QuadBuilder::new(n);
        c.lin(lay.zeta(), 1.0).lin(lay.f_e(kk), 1.0).neg_log(lay.rho(kk), 1.0, 1.0, INV_LN2);
        prog.add(c.build());
        for jj in 0..j {
            let idx = jj * k + kk;
            // eavesdropper signal below the bilinear bound
            let bl = bilinear_lb(pt.xi[idx], pt.rho_e[idx]);
            let sum0 = bl.x0 + bl.y0;
            let mut c = QuadBuilder::new(n);
            square_of(&mut c, &model.t_uehr[jj][kk], model.c_uehr[jj][kk]);
            c.square(&[(lay.xi(jj, kk), 1.0), (lay.rho_e(jj, kk), -1.0)], 0.0, 0.25)
                .lin(lay.xi(jj, kk), -0.5 * sum0)
                .lin(lay.rho_e(jj, kk), -0.5 * sum0)
                .constant(0.25 * sum0 * sum0);
            prog.add(c.build());
            // interference slack
            let mut c = QuadBuilder::new(n);
            c.lin(lay.xi(jj, kk), 1.0).constant(-1.0);
            for l in (0..k).filter(|l| *l != kk) {
                let q = quad_lb(model.c_uehr[jj][l], &model.t_uehr[jj][l], &pt.s);
                c.lin_slice(0, &q.s_coef, -1.0).constant(-q.constant);
            }
            prog.add(c.build());
            // 1 + rho_E <= 2^f_E
            let g = exp2_lb(pt.f_e[kk]);
            let mut c = QuadBuilder::new(n);
            c.constant(1.0 - g.eval(0.0)).lin(lay.f_e(kk), -g.slope()).lin(lay.rho_e(jj, kk), 1.0);
            prog.add(c.build());
        }
    }
    if model.eh_req > 0.0 {
        let mut c = QuadBuilder::new(n);
        c.constant(model.eh_req);
        for jj in 0..j {
            for l in 0..k {
                let q = quad_lb(model.c_uehr[jj][l], &model.t_uehr[jj][l], &pt.s);
                c.lin_slice(0, &q.s_coef, -1.0).constant(-q.constant);
            }
        }
        prog.add(c.build());
    }
    for i in 0..m {
        let mut c = QuadBuilder::new(n);
        c.square(&[(i, 1.0)], 0.0, 1.0).square(&[(m + i, 1.0)], 0.0, 1.0).constant(-1.0);
        prog.add(c.build());
    }
    prog
}

pub(crate) fn unit_gap(s: &CVector) -> f64 {
    s.iter().map(|z| 1.0 - z.norm()).fold(0.0, f64::max)
}

pub(crate) fn project_unit(s: &CVector) -> CVector {
    s.map(|z| {
        let r = z.norm();
        if r < 1e-9 {
            Complex64::new(1.0, 0.0)
        } else {
            z / r
        }
    })
}

/// Penalty SCA over the relaxed reflection vector, then unit-modulus projection.
pub fn ris_phase_sca(model: &RisModel, s_init: &CVector, opts: &ScaOptions, outer_iter: usize) -> Result<RisResult> {
    let lay = Layout {
        m: s_init.len(),
        k: model.k(),
        j: model.j(),
    };
    let clipped = s_init.map(|z| if z.norm() > 1.0 { z / z.norm() } else { z });
    let mut pt = tight_point(model, &clipped);
    let mut penalty = opts.penalty_start;
    let mut trace = Vec::new();
    let mut stage = 0;
    let mut first = true;
    loop {
        for t in 0..opts.inner_max {
            // re-anchor the slacks at their defining values for the current s
            let anchor = tight_point(model, &pt.s);
            let prog = build_program(model, &lay, &anchor, penalty);
            let sol = match solve_optimal(&prog, &opts.solver, Some(&lay.pack(&anchor))) {
                Ok(s) => s,
                Err(e) if first => return Err(e),
                Err(_) => break,
            };
            first = false;
            let next = lay.unpack(&sol.x);
            let done = (next.zeta - pt.zeta).abs() <= opts.eps;
            let eh_slack = (model.eh(&next.s) - model.eh_req) * model.sigma2;
            trace.push(TraceRow {
                outer_iter,
                block: Block::Ris,
                stage,
                inner_iter: t,
                objective: next.zeta + penalty * next.s.norm_squared(),
                lambda: penalty,
                eh_slack,
            });
            pt = next;
            if done {
                break;
            }
        }
        if unit_gap(&pt.s) > opts.unit_tol && penalty < opts.penalty_max {
            penalty = (penalty * opts.penalty_factor).min(opts.penalty_max);
            stage += 1;
        } else {
            break;
        }
    }
    Ok(RisResult {
        s: project_unit(&pt.s),
        unit_gap: unit_gap(&pt.s),
        s_relaxed: pt.s,
        zeta: pt.zeta,
        penalty,
        trace,
    })
}
