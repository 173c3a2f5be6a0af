use super::ris::RisModel;
use super::{dinkelbach_power, ris_phase_sca, uav_location_sca, ScaOptions, TraceRow, UavModel};
use crate::channels::{CVector, ChannelDraw, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::Position2D;
use crate::phy::{evaluate, evaluate_with, zf_precoder, ZfPrecoder};

#[derive(Debug, Clone, PartialEq)]
pub struct BcdResult {
    pub p: Vec<f64>,
    pub s: CVector,
    pub q: Position2D,
    /// WCSEE after each outer iteration.
    pub eta: Vec<f64>,
    pub trace: Vec<TraceRow>,
    /// Whether the final point meets the EH requirement.
    pub eh_ok: bool,
    /// Blocks that kept their previous iterate, as `(outer_iter, block, reason)`,
    /// plus a `start` entry when the starting reflection was repaired.
    pub kept: Vec<(usize, &'static str, String)>,
}

fn beams(pre: &ZfPrecoder, p: &[f64]) -> Vec<CVector> {
    (0..pre.k()).map(|l| pre.beam(p, l)).collect()
}

/// Raises harvested power by reflection ascent until the EH requirement holds
/// at `(p, s, q)`. Returns whether it holds.
fn restore_eh(cfg: &ScenarioConfig, draw: &ChannelDraw, p: &[f64], s: &mut CVector, q: Position2D) -> Result<bool> {
    for _ in 0..RESTORE_STEPS {
        let real = draw.realize(cfg, q, s);
        let pre = match zf_precoder(&real.h_c) {
            Ok(pre) => pre,
            Err(Error::RankDeficient { .. }) => return Ok(false),
            Err(e) => return Err(e),
        };
        if evaluate_with(cfg, &real, pre.clone(), p)?.eh_ok {
            return Ok(true);
        }
        let model = RisModel::new(&real, &beams(&pre, p), cfg)?;
        let next = model.eh_ascent(s);
        if model.eh(&next) <= model.eh(s) * (1.0 + 1e-9) {
            return Ok(false);
        }
        *s = next;
    }
    Ok(false)
}

const RESTORE_STEPS: usize = 100;

/// Position on an 11 x 11 grid over the region with the most harvested power.
fn most_harvesting_position(cfg: &ScenarioConfig, draw: &ChannelDraw, p: &[f64], s: &CVector) -> Position2D {
    let r = &cfg.region;
    let mut best = (f64::NEG_INFINITY, cfg.uav_start);
    for a in 0..=10 {
        for b in 0..=10 {
            let q = Position2D::new(
                r.x_min + (r.x_max - r.x_min) * a as f64 / 10.0,
                r.y_min + (r.y_max - r.y_min) * b as f64 / 10.0,
            );
            if let Ok(ev) = evaluate(cfg, &draw.realize(cfg, q, s), p) {
                if ev.eh_total() > best.0 {
                    best = (ev.eh_total(), q);
                }
            }
        }
    }
    best.1
}

/// EH requirement multipliers tried in turn when a block's result misses the
/// requirement once ZF directions are recomputed (or, for the RIS block,
/// once phases are projected to unit modulus).
const HEADROOM: [f64; 4] = [1.0, 1.01, 1.05, 1.2];

/// The power vector under which `(p, s, q)` meets the EH requirement with ZF
/// recomputed: `p` itself, or `p` scaled up (harvested power is linear in
/// it) when the budget allows. `None` if neither works.
fn accept(cfg: &ScenarioConfig, draw: &ChannelDraw, p: &[f64], s: &CVector, q: Position2D) -> Result<Option<Vec<f64>>> {
    let real = draw.realize(cfg, q, s);
    let ev = match evaluate(cfg, &real, p) {
        Ok(ev) => ev,
        Err(Error::RankDeficient { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    if ev.eh_ok {
        return Ok(Some(p.to_vec()));
    }
    let eh = ev.eh_total();
    let total: f64 = p.iter().sum();
    if !(eh > 0.0) {
        return Ok(None);
    }
    let f = ev.eh_threshold / eh * (1.0 + 1e-9);
    if f * total > cfg.p_max {
        return Ok(None);
    }
    let scaled: Vec<f64> = p.iter().map(|v| v * f).collect();
    let ok = evaluate(cfg, &real, &scaled).map(|e| e.eh_ok).unwrap_or(false);
    Ok(ok.then_some(scaled))
}

fn recoverable(e: &Error) -> bool {
    matches!(e, Error::Infeasible | Error::MaxIter(_) | Error::InvalidEpsilon { .. })
}

/// Alternates power, RIS and UAV blocks, recomputing ZF directions each pass.
///
/// Starts from uniform full-budget power, all-ones reflection and the
/// configured UAV start unless `init` is given. Phases are continuous. A start
/// that misses the EH requirement is first repaired by reflection ascent,
/// since no block can make progress from an EH-infeasible point.
pub fn bcd_outer(
    cfg: &ScenarioConfig,
    draw: &ChannelDraw,
    init: Option<(Vec<f64>, CVector, Position2D)>,
    opts: &ScaOptions,
) -> Result<BcdResult> {
    let (mut p, mut s, mut q) = init.unwrap_or_else(|| {
        (
            vec![cfg.p_max / cfg.k as f64; cfg.k],
            CVector::from_element(cfg.m, num_complex::Complex64::new(1.0, 0.0)),
            cfg.uav_start,
        )
    });
    let mut eta = Vec::new();
    let mut trace = Vec::new();
    let mut kept = Vec::new();
    let mut prev_eta = None;
    let mut eh_ok = false;
    if cfg.e_h > 0.0 {
        let before = s.clone();
        if restore_eh(cfg, draw, &p, &mut s, q)? {
            if s != before {
                kept.push((0, "start", "EH requirement restored by reflection ascent".into()));
            }
        } else {
            q = most_harvesting_position(cfg, draw, &p, &s);
            if restore_eh(cfg, draw, &p, &mut s, q)? {
                kept.push((0, "start", "EH requirement restored by moving the UAV and reflection ascent".into()));
            } else {
                kept.push((0, "start", "could not meet the EH requirement".into()));
            }
        }
    }
    for i in 0..opts.i_max {
        let real = draw.realize(cfg, q, &s);
        let pre = zf_precoder(&real.h_c)?;
        let mut feasible = accept(cfg, draw, &p, &s, q)?.is_some();

        match dinkelbach_power(&real, &pre, cfg, Some(&p), opts, i) {
            Ok(r) => {
                trace.extend(r.trace);
                match accept(cfg, draw, &r.p, &s, q)? {
                    Some(pn) => {
                        p = pn;
                        feasible = true;
                    }
                    None if !feasible => p = r.p,
                    None => kept.push((i, "power", "result misses the EH requirement".into())),
                }
            }
            Err(e) if recoverable(&e) => kept.push((i, "power", e.to_string())),
            Err(e) => return Err(e),
        }

        let base = RisModel::new(&real, &beams(&pre, &p), cfg)?;
        for (attempt, headroom) in HEADROOM.iter().enumerate() {
            let model = RisModel {
                eh_req: base.eh_req * headroom,
                ..base.clone()
            };
            match ris_phase_sca(&model, &s, opts, i) {
                Ok(r) => {
                    if attempt == 0 {
                        trace.extend(r.trace);
                    }
                    match accept(cfg, draw, &p, &r.s, q)? {
                        Some(pn) => {
                            if pn != p {
                                kept.push((i, "ris", "EH restored by scaling power up".into()));
                            }
                            p = pn;
                            s = r.s;
                            feasible = true;
                            break;
                        }
                        None if !feasible => {
                            s = r.s;
                            break;
                        }
                        None => kept.push((i, "ris", format!("projected phases miss the EH requirement (headroom {headroom})"))),
                    }
                }
                Err(e) if recoverable(&e) => {
                    kept.push((i, "ris", e.to_string()));
                    break;
                }
                Err(e) => return Err(e),
            }
        }

        let real = draw.realize(cfg, q, &s);
        let pre = zf_precoder(&real.h_c)?;
        let base = UavModel::new(&real, &beams(&pre, &p), cfg, &draw.placement)?;
        for (attempt, headroom) in HEADROOM.iter().enumerate() {
            let model = UavModel {
                eh_req: base.eh_req * headroom,
                ..base.clone()
            };
            match uav_location_sca(&model, q, opts, i) {
                Ok(r) => {
                    if attempt == 0 {
                        trace.extend(r.trace);
                    }
                    match accept(cfg, draw, &p, &s, r.q)? {
                        Some(pn) => {
                            if pn != p {
                                kept.push((i, "uav", "EH restored by scaling power up".into()));
                            }
                            p = pn;
                            q = r.q;
                            break;
                        }
                        None if !feasible => {
                            q = r.q;
                            break;
                        }
                        None => kept.push((i, "uav", format!("new position misses the EH requirement (headroom {headroom})"))),
                    }
                }
                Err(e) if recoverable(&e) => {
                    kept.push((i, "uav", e.to_string()));
                    break;
                }
                Err(e) => return Err(e),
            }
        }

        let real = draw.realize(cfg, q, &s);
        let value = match evaluate(cfg, &real, &p) {
            Ok(ev) => {
                eh_ok = ev.eh_ok;
                ev.wcsee
            }
            Err(Error::RankDeficient { .. }) => {
                eh_ok = false;
                0.0
            }
            Err(e) => return Err(e),
        };
        eta.push(value);
        if prev_eta.is_some_and(|v: f64| (value - v).abs() <= opts.eps_out) {
            break;
        }
        prev_eta = Some(value);
    }
    Ok(BcdResult {
        p,
        s,
        q,
        eta,
        trace,
        eh_ok,
        kept,
    })
}
