use nalgebra::DVector;
use num_complex::Complex64;

use super::{agm_ub, eh_quadratic_lb, Block, QuadBuilder, ScaOptions, TraceRow};
use crate::channels::{CVector, ChannelRealization, ScenarioConfig};
use crate::convex::{solve_optimal, ConvexProgram};
use crate::error::{Error, Result};
use crate::geometry::{project_uav, Position2D, UavRegion};

const INV_LN2: f64 = std::f64::consts::LOG2_E;

/// Path-loss-separated link model for fixed beams, reflection and small-scale
/// fading: only the distances move with the UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct UavModel {
    /// `A[k][l] = rho0^2 |g~_k^H Theta G~_b p_l|^2`.
    pub a: Vec<Vec<f64>>,
    /// `D[j][l] = rho0 h~_j^H Theta G~_b p_l`.
    pub d: Vec<Vec<Complex64>>,
    /// Direct-link terms `c[j][l] = h_bj^H p_l`.
    pub c: Vec<Vec<Complex64>>,
    pub bs: Position2D,
    pub ihr: Vec<Position2D>,
    pub uehr: Vec<Position2D>,
    pub altitude: f64,
    pub alpha: f64,
    pub sigma2: f64,
    /// Required harvested RF power (W).
    pub eh_req: f64,
    pub region: UavRegion,
}

fn dist2(q: Position2D, w: Position2D, h: f64) -> f64 {
    (q.x - w.x).powi(2) + (q.y - w.y).powi(2) + h * h
}

impl UavModel {
    pub fn new(real: &ChannelRealization, beams: &[CVector], cfg: &ScenarioConfig, placement: &crate::channels::Placement) -> Result<Self> {
        let v: Vec<CVector> = beams.iter().map(|p| &real.g_b_tilde * p).collect();
        let through = |x: &CVector, vl: &CVector| -> Complex64 {
            x.iter().zip(real.s.iter()).zip(vl.iter()).map(|((x, s), v)| x.conj() * s * v).sum()
        };
        let rho0 = cfg.rho0;
        Ok(Self {
            a: real
                .g_tilde
                .iter()
                .map(|g| v.iter().map(|vl| rho0 * rho0 * through(g, vl).norm_sqr()).collect())
                .collect(),
            d: real
                .h_tilde
                .iter()
                .map(|h| v.iter().map(|vl| through(h, vl) * rho0).collect())
                .collect(),
            c: real.h_bj.iter().map(|h| beams.iter().map(|p| h.dotc(p)).collect()).collect(),
            bs: placement.bs,
            ihr: placement.ihr.clone(),
            uehr: placement.uehr.clone(),
            altitude: cfg.altitude,
            alpha: cfg.alpha,
            sigma2: cfg.sigma2,
            eh_req: cfg.eh_threshold()?,
            region: cfg.region,
        })
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn j(&self) -> usize {
        self.d.len()
    }

    fn d_b(&self, q: Position2D) -> f64 {
        dist2(q, self.bs, self.altitude).sqrt()
    }

    pub fn gamma(&self, q: Position2D, k: usize) -> f64 {
        let pl = (dist2(q, self.ihr[k], self.altitude).sqrt() * self.d_b(q)).powf(-self.alpha);
        let row = &self.a[k];
        let interf: f64 = (0..row.len()).filter(|l| *l != k).map(|l| row[l]).sum();
        row[k] * pl / (interf * pl + self.sigma2)
    }

    pub fn min_rate(&self, q: Position2D) -> f64 {
        (0..self.k()).map(|k| (1.0 + self.gamma(q, k)).log2()).fold(f64::INFINITY, f64::min)
    }

    /// Harvested RF power (W) summed over UEHRs.
    pub fn eh(&self, q: Position2D) -> f64 {
        (0..self.j())
            .map(|j| {
                let x = (dist2(q, self.uehr[j], self.altitude).sqrt() * self.d_b(q)).powf(-0.5 * self.alpha);
                self.c[j].iter().zip(&self.d[j]).map(|(c, d)| (c + d * x).norm_sqr()).sum::<f64>()
            })
            .sum()
    }

    /// `(U_j, S_j, T_j)` of the harvested-power quadratic in the path-loss factor.
    pub fn eh_coefficients(&self, j: usize) -> (f64, f64, f64) {
        let u = self.c[j].iter().map(|c| c.norm_sqr()).sum();
        let s = self.d[j].iter().map(|d| d.norm_sqr()).sum();
        let t = self.c[j].iter().zip(&self.d[j]).map(|(c, d)| (c.conj() * d).re).sum();
        (u, s, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavResult {
    pub q: Position2D,
    pub zeta: f64,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
struct UavPoint {
    q: Position2D,
    zeta: f64,
    rho: Vec<f64>,
    y_k: Vec<f64>,
    y_j: Vec<f64>,
}

const MARGIN: f64 = 1e-6;

/// `(c0, c1)` with `c0 + c1 y` a lower bound on UEHR harvested power as a
/// function of the normalized distance slack `y >= 1 / (y0 x^2)`, where
/// `x` is the path-loss amplitude factor, tangent at `yp` when possible. The
/// slope is negative, so enlarging the slack never helps the constraint.
fn eh_line(u: f64, s: f64, t: f64, y0: f64, yp: f64) -> Result<(f64, f64)> {
    if !(s > 0.0) {
        return Ok((u, 0.0));
    }
    let x0 = 1.0 / (yp * y0).sqrt();
    if t >= 0.0 {
        // U + S / (y y0) + 2 T / sqrt(y y0) is convex in y
        let g = u + s * x0 * x0 + 2.0 * t * x0;
        let dg = -s / (y0 * yp * yp) - t * x0 / yp;
        return Ok((g - dg * yp, dg));
    }
    // Young's weight tangent at x0 when it is admissible, else 2 / S
    let tangent = -x0 / t;
    let eps = if tangent * s > 1.0 + 1e-9 { tangent } else { 2.0 / s };
    let (a, b) = eh_quadratic_lb(u, s, t, eps)?;
    // b / (y y0) is bounded below by its tangent line at yp
    Ok((a + 2.0 * b / (yp * y0), -b / (y0 * yp * yp)))
}

/// SCA over the UAV position maximizing the minimum IHR rate.
pub fn uav_location_sca(model: &UavModel, q_init: Position2D, opts: &ScaOptions, outer_iter: usize) -> Result<UavResult> {
    let (k, j) = (model.k(), model.j());
    let r = &model.region;
    let q_init = project_uav(q_init, r);
    let (cx, cy) = (0.5 * (r.x_min + r.x_max), 0.5 * (r.y_min + r.y_max));
    let (hx, hy) = (0.5 * (r.x_max - r.x_min), 0.5 * (r.y_max - r.y_min));
    let h = model.altitude;
    let alpha = model.alpha;
    if !(alpha > 1.0) {
        return Err(Error::Config(format!("path-loss exponent {alpha} must exceed 1")));
    }
    let db0 = model.d_b(q_init);
    let dk0: Vec<f64> = model.ihr.iter().map(|w| dist2(q_init, *w, h).sqrt()).collect();
    let dj0: Vec<f64> = model.uehr.iter().map(|w| dist2(q_init, *w, h).sqrt()).collect();
    // normalizers: products of distances at the start and their alpha powers
    let big_d_k: Vec<f64> = dk0.iter().map(|d| d * db0).collect();
    let big_d_j: Vec<f64> = dj0.iter().map(|d| d * db0).collect();
    let y0_k: Vec<f64> = big_d_k.iter().map(|d| d.powf(alpha)).collect();
    let y0_j: Vec<f64> = big_d_j.iter().map(|d| d.powf(alpha)).collect();
    // largest normalized UEHR slack over the region, doubled
    let corners = [
        Position2D::new(r.x_min, r.y_min),
        Position2D::new(r.x_min, r.y_max),
        Position2D::new(r.x_max, r.y_min),
        Position2D::new(r.x_max, r.y_max),
    ];
    let far = |w: Position2D| corners.iter().map(|c| dist2(*c, w, h).sqrt()).fold(0.0, f64::max);
    let y_cap_j: Vec<f64> = (0..j)
        .map(|jj| 2.0 * (far(model.uehr[jj]) * far(model.bs)).powf(alpha) / y0_j[jj])
        .collect();
    let a_hat: Vec<Vec<f64>> = (0..k)
        .map(|i| model.a[i].iter().map(|v| v / (model.sigma2 * y0_k[i])).collect())
        .collect();
    let interf: Vec<f64> = (0..k).map(|i| (0..k).filter(|l| *l != i).map(|l| a_hat[i][l]).sum()).collect();
    let eh_req = model.eh_req / model.sigma2;
    let eh_coef: Vec<(f64, f64, f64)> = (0..j).map(|jj| model.eh_coefficients(jj)).collect();

    // slacks at their defining values for position q, loosened by MARGIN
    let anchor = |q: Position2D| -> UavPoint {
        let db = model.d_b(q);
        let y_k: Vec<f64> = (0..k)
            .map(|i| (dist2(q, model.ihr[i], h).sqrt() * db / big_d_k[i]).powf(alpha) * (1.0 + MARGIN))
            .collect();
        let rho: Vec<f64> = (0..k)
            .map(|i| (a_hat[i][i] / (interf[i] + y_k[i]) * (1.0 - MARGIN)).max(1e-12))
            .collect();
        let zeta = rho.iter().map(|r| (1.0 + r).log2()).fold(f64::INFINITY, f64::min) - MARGIN;
        let y_j = (0..j)
            .map(|jj| (dist2(q, model.uehr[jj], h).sqrt() * db / big_d_j[jj]).powf(alpha) * (1.0 + MARGIN))
            .collect();
        UavPoint { q, zeta, rho, y_k, y_j }
    };
    let mut pt = anchor(q_init);

    // layout: z (2), zeta, rho (K), y_k (K), y_j (J); the UEHR slacks are
    // unbounded above without a harvesting constraint and are left out
    let with_eh = eh_req > 0.0 && j > 0;
    let n_j = if with_eh { j } else { 0 };
    let n = 3 + 2 * k + n_j;
    let iz = 2;
    let irho = |i: usize| 3 + i;
    let iyk = |i: usize| 3 + k + i;
    let iyj = |i: usize| 3 + 2 * k + i;
    let add_dist2 = |b: &mut QuadBuilder, w: Position2D, weight: f64| {
        b.square(&[(0, hx)], cx - w.x, weight)
            .square(&[(1, hy)], cy - w.y, weight)
            .constant(weight * h * h);
    };
    let mut trace = Vec::new();
    for t in 0..opts.inner_max {
        if t > 0 {
            pt = anchor(pt.q);
        }
        let mut obj = QuadBuilder::new(n);
        obj.lin(iz, -1.0);
        let mut prog = ConvexProgram::new(obj.build());
        let db = model.d_b(pt.q);
        for i in 0..k {
            let mut c = QuadBuilder::new(n);
            c.lin(iz, 1.0).neg_log(irho(i), 1.0, 1.0, INV_LN2);
            prog.add(c.build());
            let agm = agm_ub(pt.rho[i], pt.y_k[i]);
            let (wa, wb) = agm.weights();
            let mut c = QuadBuilder::new(n);
            c.lin(irho(i), interf[i])
                .square(&[(irho(i), 1.0)], 0.0, wa)
                .square(&[(iyk(i), 1.0)], 0.0, wb)
                .constant(-a_hat[i][i]);
            prog.add(c.build());
            let dk = dist2(pt.q, model.ihr[i], h).sqrt();
            let (wa, wb) = agm_ub(dk, db).weights();
            let mut c = QuadBuilder::new(n);
            add_dist2(&mut c, model.ihr[i], wa / big_d_k[i]);
            add_dist2(&mut c, model.bs, wb / big_d_k[i]);
            c.neg_pow(iyk(i), 1.0 / alpha, 1.0);
            prog.add(c.build());
            prog.add_bounds(irho(i), 0.0, f64::INFINITY);
        }
        for jj in 0..n_j {
            let dj = dist2(pt.q, model.uehr[jj], h).sqrt();
            let (wa, wb) = agm_ub(dj, db).weights();
            let mut c = QuadBuilder::new(n);
            add_dist2(&mut c, model.uehr[jj], wa / big_d_j[jj]);
            add_dist2(&mut c, model.bs, wb / big_d_j[jj]);
            c.neg_pow(iyj(jj), 1.0 / alpha, 1.0);
            prog.add(c.build());
        }
        for jj in 0..n_j {
            prog.add_bounds(iyj(jj), 0.0, y_cap_j[jj]);
        }
        if with_eh {
            let mut c = QuadBuilder::new(n);
            c.constant(eh_req);
            for (jj, &(u, sj, tj)) in eh_coef.iter().enumerate() {
                let (c0, c1) = eh_line(u, sj, tj, y0_j[jj], pt.y_j[jj])?;
                c.constant(-c0 / model.sigma2).lin(iyj(jj), -c1 / model.sigma2);
            }
            prog.add(c.build());
        }
        prog.add_bounds(0, -1.0, 1.0).add_bounds(1, -1.0, 1.0);
        let zx = if hx > 0.0 { (pt.q.x - cx) / hx } else { 0.0 };
        let zy = if hy > 0.0 { (pt.q.y - cy) / hy } else { 0.0 };
        let mut start = DVector::zeros(n);
        start[0] = zx.clamp(-1.0, 1.0);
        start[1] = zy.clamp(-1.0, 1.0);
        start[iz] = pt.zeta;
        for i in 0..k {
            start[irho(i)] = pt.rho[i];
            start[iyk(i)] = pt.y_k[i];
        }
        for jj in 0..n_j {
            start[iyj(jj)] = pt.y_j[jj];
        }
        let sol = match solve_optimal(&prog, &opts.solver, Some(&start)) {
            Ok(s) => s,
            Err(e) if t == 0 => return Err(e),
            Err(_) => break,
        };
        let x = &sol.x;
        let q = project_uav(Position2D::new(cx + hx * x[0], cy + hy * x[1]), r);
        let next = UavPoint {
            q,
            zeta: x[iz],
            rho: (0..k).map(|i| x[irho(i)]).collect(),
            y_k: (0..k).map(|i| x[iyk(i)]).collect(),
            y_j: (0..j).map(|i| if with_eh { x[iyj(i)] } else { pt.y_j[i] }).collect(),
        };
        trace.push(TraceRow {
            outer_iter,
            block: Block::Uav,
            stage: 0,
            inner_iter: t,
            objective: next.zeta,
            lambda: 0.0,
            eh_slack: model.eh(q) - model.eh_req,
        });
        let done = (next.zeta - pt.zeta).abs() <= opts.eps;
        pt = next;
        if done {
            break;
        }
    }
    Ok(UavResult {
        q: pt.q,
        zeta: pt.zeta,
        trace,
    })
}
