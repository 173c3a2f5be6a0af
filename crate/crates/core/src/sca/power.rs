use nalgebra::DVector;

use super::{log_upper, Block, QuadBuilder, ScaOptions, TraceRow};
use crate::channels::{ChannelRealization, ScenarioConfig};
use crate::convex::{solve_optimal, ConvexProgram};
use crate::error::{Error, Result};
use crate::phy::ZfPrecoder;

const INV_LN2: f64 = std::f64::consts::LOG2_E;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub p: Vec<f64>,
    /// Dinkelbach parameters used at each iteration.
    pub lambdas: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

/// Normalized power-block data: `x = p / P_max`, unit noise.
struct PowerData {
    a: Vec<f64>,
    /// `b[j][l]`.
    b: Vec<Vec<f64>>,
    eh_coef: Vec<f64>,
    eh_req: f64,
}

impl PowerData {
    fn new(real: &ChannelRealization, pre: &ZfPrecoder, cfg: &ScenarioConfig) -> Result<Self> {
        let sc = cfg.p_max / cfg.sigma2;
        let a: Vec<f64> = pre.gains.iter().map(|g| g * sc).collect();
        let b: Vec<Vec<f64>> = real
            .u_hat
            .iter()
            .map(|u| pre.leakage(u).iter().map(|v| v * sc).collect())
            .collect();
        let eh_coef = (0..a.len()).map(|k| b.iter().map(|bj| bj[k]).sum()).collect();
        Ok(Self {
            a,
            b,
            eh_coef,
            eh_req: cfg.eh_threshold()? / cfg.sigma2,
        })
    }

    fn rate_pair(&self, x: &[f64], k: usize, j: usize) -> f64 {
        let legit = (1.0 + x[k] * self.a[k]).log2();
        let bj = &self.b[j];
        let others: f64 = (0..x.len()).filter(|l| *l != k).map(|l| x[l] * bj[l]).sum();
        legit + (1.0 + others).log2() - (1.0 + others + x[k] * bj[k]).log2()
    }

    /// `min_{k,j}` of the secrecy expression without the hinge.
    fn zeta(&self, x: &[f64]) -> f64 {
        let mut z = f64::INFINITY;
        for k in 0..x.len() {
            if self.b.is_empty() {
                z = z.min((1.0 + x[k] * self.a[k]).log2());
            }
            for j in 0..self.b.len() {
                z = z.min(self.rate_pair(x, k, j));
            }
        }
        z
    }

    fn eh(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.eh_coef).map(|(x, e)| x * e).sum()
    }
}

fn initial_point(d: &PowerData, k: usize, init: Option<&[f64]>, p_max: f64) -> Result<Vec<f64>> {
    let uniform = vec![1.0 / k as f64; k];
    let mut x = match init {
        Some(p) if p.iter().sum::<f64>() > 0.0 => p.iter().map(|v| (v / p_max).max(0.0)).collect(),
        _ => uniform.clone(),
    };
    let total: f64 = x.iter().sum();
    if total > 1.0 {
        x.iter_mut().for_each(|v| *v /= total);
    }
    if d.eh_req > 0.0 && d.eh(&x) < d.eh_req {
        let (best, emax) = d
            .eh_coef
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, e)| if *e > acc.1 { (i, *e) } else { acc });
        if emax < d.eh_req {
            return Err(Error::Infeasible);
        }
        let eu = d.eh(&uniform);
        let tau = ((d.eh_req - eu) / (emax - eu) * (1.0 + 1e-9)).clamp(0.0, 1.0);
        x = uniform.iter().enumerate().map(|(i, u)| (1.0 - tau) * u + if i == best { tau } else { 0.0 }).collect();
    }
    Ok(x)
}

/// Dinkelbach iterations with one SCA solve per parameter update.
pub fn dinkelbach_power(
    real: &ChannelRealization,
    pre: &ZfPrecoder,
    cfg: &ScenarioConfig,
    init: Option<&[f64]>,
    opts: &ScaOptions,
    outer_iter: usize,
) -> Result<PowerResult> {
    let k = pre.k();
    let d = PowerData::new(real, pre, cfg)?;
    if cfg.p_max <= 0.0 {
        if d.eh_req > 0.0 {
            return Err(Error::Infeasible);
        }
        return Ok(PowerResult {
            p: vec![0.0; k],
            lambdas: Vec::new(),
            trace: Vec::new(),
        });
    }
    let power = |x: &[f64]| cfg.varrho * cfg.p_max * x.iter().sum::<f64>() + cfg.p0;
    let eh_slack = |x: &[f64]| (d.eh(x) - d.eh_req) * cfg.sigma2;
    let mut x = initial_point(&d, k, init, cfg.p_max)?;
    let mut zeta = d.zeta(&x);
    let mut lambdas = Vec::new();
    let mut trace = Vec::new();
    let n = k + 1;
    for t in 0..opts.inner_max {
        let lambda = (zeta / power(&x)).max(0.0);
        let mut obj = QuadBuilder::new(n);
        obj.lin(k, -1.0);
        for i in 0..k {
            obj.lin(i, lambda * cfg.varrho * cfg.p_max);
        }
        let mut prog = ConvexProgram::new(obj.build());
        for kk in 0..k {
            if d.b.is_empty() {
                let mut c = QuadBuilder::new(n);
                c.lin(k, 1.0).neg_log(kk, d.a[kk], 1.0, INV_LN2);
                prog.add(c.build());
            }
            for bj in &d.b {
                let mut c = QuadBuilder::new(n);
                c.lin(k, 1.0).neg_log(kk, d.a[kk], 1.0, INV_LN2);
                let others = DVector::from_fn(n, |l, _| if l < k && l != kk { bj[l] } else { 0.0 });
                if others.iter().any(|v| *v != 0.0) {
                    c.neg_log_vec(others, 1.0, INV_LN2);
                }
                let lu = log_upper(&x, bj, 1.0);
                c.constant(lu.s0.log2());
                for l in 0..k {
                    c.lin(l, lu.eta[l]).constant(-lu.eta[l] * x[l]);
                }
                prog.add(c.build());
            }
        }
        if d.eh_req > 0.0 {
            let mut c = QuadBuilder::new(n);
            c.constant(d.eh_req).lin_slice(0, &d.eh_coef, -1.0);
            prog.add(c.build());
        }
        let mut budget = QuadBuilder::new(n);
        budget.lin_slice(0, &vec![1.0; k], 1.0).constant(-1.0);
        prog.add(budget.build());
        for i in 0..k {
            prog.add_bounds(i, 0.0, f64::INFINITY);
        }
        let mut start = DVector::from_fn(n, |i, _| if i < k { x[i] } else { zeta - 1.0 });
        if !start.iter().all(|v| v.is_finite()) {
            start = DVector::zeros(n);
        }
        let sol = match solve_optimal(&prog, &opts.solver, Some(&start)) {
            Ok(s) => s,
            Err(e) if t == 0 => return Err(e),
            Err(_) => break,
        };
        let x_new: Vec<f64> = sol.x.iter().take(k).map(|v| v.max(0.0)).collect();
        let zeta_new = sol.x[k];
        lambdas.push(lambda);
        trace.push(TraceRow {
            outer_iter,
            block: Block::Power,
            stage: 0,
            inner_iter: t,
            objective: zeta_new / power(&x_new),
            lambda,
            eh_slack: eh_slack(&x_new),
        });
        let done = (zeta_new - zeta).abs() <= opts.eps;
        x = x_new;
        zeta = zeta_new;
        if done {
            break;
        }
    }
    Ok(PowerResult {
        p: x.iter().map(|v| v * cfg.p_max).collect(),
        lambdas,
        trace,
    })
}
