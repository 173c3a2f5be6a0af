//! MDP wrapper around the physical layer.
//!
//! The observation stacks the real and imaginary parts of every cascaded IHR
//! channel and every estimated UEHR channel, scaled by `sqrt(P_max / sigma^2)`
//! so that squared entries read as per-antenna SNRs, followed by the UAV
//! position mapped affinely onto `[-1, 1]^2`.

use std::f64::consts::TAU;
use std::io::Write;

use crate::channels::{reflection_from_phases, ChannelDraw, ChannelRealization, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{project_uav, quantize_phase, wrap_phase, Position2D};
use crate::phy::{evaluate, Evaluation};
use crate::rng::RngStream;

/// Joint decision: per-IHR powers, RIS phases and UAV position.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub p: Vec<f64>,
    pub theta: Vec<f64>,
    pub q: Position2D,
}

fn unit(a: f64) -> f64 {
    0.5 * (a.clamp(-1.0, 1.0) + 1.0)
}

/// Raw action in `[-1, 1]^{K+M+2}` to a feasible decision.
pub fn map_action(a: &[f64], cfg: &ScenarioConfig) -> Result<ControlDecision> {
    if a.len() != cfg.action_dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.action_dim(),
            got: a.len(),
        });
    }
    let raw: Vec<f64> = a[..cfg.k].iter().map(|v| unit(*v)).collect();
    let total: f64 = raw.iter().sum();
    let p = if total > 0.0 {
        raw.iter().map(|v| cfg.p_max * v / total).collect()
    } else {
        vec![0.0; cfg.k]
    };
    let theta = a[cfg.k..cfg.k + cfg.m]
        .iter()
        .map(|v| {
            let t = wrap_phase(TAU * unit(*v));
            match &cfg.codebook {
                Some(cb) => quantize_phase(t, cb),
                None => t,
            }
        })
        .collect();
    let r = &cfg.region;
    let q = Position2D::new(
        r.x_min + unit(a[cfg.k + cfg.m]) * (r.x_max - r.x_min),
        r.y_min + unit(a[cfg.k + cfg.m + 1]) * (r.y_max - r.y_min),
    );
    Ok(ControlDecision {
        p,
        theta,
        q: project_uav(q, r),
    })
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub reward: f64,
    pub r_sec: f64,
    pub power_sum: f64,
    /// `sum_j P_lower_j - Omega^{-1}(E_h)`; `NaN` when ZF failed.
    pub eh_slack: f64,
    pub q: Position2D,
    pub eh_ok: bool,
    pub rank_deficient: bool,
}

/// Reward of a decision on a realization, with the hard EH gate.
pub fn reward_of(cfg: &ScenarioConfig, real: &ChannelRealization, p: &[f64]) -> Result<(f64, Option<Evaluation>)> {
    match evaluate(cfg, real, p) {
        Ok(ev) => {
            let r = if ev.eh_ok { ev.wcsee } else { 0.0 };
            Ok((r, Some(ev)))
        }
        Err(Error::RankDeficient { .. }) => Ok((0.0, None)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvOptions {
    pub horizon: usize,
    /// Reuse one scenario draw for every episode.
    pub fixed_realization: bool,
}

impl Default for EnvOptions {
    fn default() -> Self {
        Self {
            horizon: 200,
            fixed_realization: false,
        }
    }
}

pub struct WcseeEnv {
    cfg: ScenarioConfig,
    opts: EnvOptions,
    root: RngStream,
    episode: u64,
    t: usize,
    draw: ChannelDraw,
    real: ChannelRealization,
    scale: f64,
}

impl WcseeEnv {
    /// Environment reset to episode 0.
    pub fn new(cfg: ScenarioConfig, opts: EnvOptions, root: RngStream) -> Result<Self> {
        cfg.validate()?;
        if opts.horizon == 0 {
            return Err(Error::Config("episode horizon must be positive".into()));
        }
        let draw = ChannelDraw::sample(&cfg, &root.child(0))?;
        let real = draw.realize(&cfg, cfg.uav_start, &reflection_from_phases(&vec![0.0; cfg.m]));
        let scale = (cfg.p_max / cfg.sigma2).sqrt();
        Ok(Self {
            cfg,
            opts,
            root,
            episode: 0,
            t: 0,
            draw,
            real,
            scale,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn options(&self) -> EnvOptions {
        self.opts
    }

    pub fn state_dim(&self) -> usize {
        self.cfg.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.cfg.action_dim()
    }

    pub fn realization(&self) -> &ChannelRealization {
        &self.real
    }

    pub fn draw(&self) -> &ChannelDraw {
        &self.draw
    }

    pub fn step_index(&self) -> usize {
        self.t
    }

    /// Start `episode` with a fresh placement and fading draw (or the fixed
    /// one), UAV at the configured start and all phases at zero.
    pub fn reset(&mut self, episode: u64) -> Vec<f64> {
        self.episode = episode;
        self.t = 0;
        let idx = if self.opts.fixed_realization { 0 } else { episode };
        self.draw = ChannelDraw::sample(&self.cfg, &self.root.child(idx)).expect("config validated");
        self.real = self.draw.realize(
            &self.cfg,
            self.cfg.uav_start,
            &reflection_from_phases(&vec![0.0; self.cfg.m]),
        );
        self.observe()
    }

    pub fn observe(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.state_dim());
        for z in self.real.h_c.iter() {
            s.push(z.re * self.scale);
            s.push(z.im * self.scale);
        }
        for u in &self.real.u_hat {
            for z in u.iter() {
                s.push(z.re * self.scale);
                s.push(z.im * self.scale);
            }
        }
        let r = &self.cfg.region;
        let norm = |v: f64, lo: f64, hi: f64| if hi > lo { 2.0 * (v - lo) / (hi - lo) - 1.0 } else { 0.0 };
        s.push(norm(self.real.q.x, r.x_min, r.x_max));
        s.push(norm(self.real.q.y, r.y_min, r.y_max));
        s
    }

    /// Apply a decision without advancing the episode clock.
    pub fn evaluate_decision(&self, d: &ControlDecision) -> Result<(StepInfo, ChannelRealization)> {
        let real = self.draw.realize(&self.cfg, d.q, &reflection_from_phases(&d.theta));
        let (reward, ev) = reward_of(&self.cfg, &real, &d.p)?;
        let info = StepInfo {
            reward,
            r_sec: ev.as_ref().map_or(0.0, |e| e.rates.min),
            power_sum: d.p.iter().sum(),
            eh_slack: ev.as_ref().map_or(f64::NAN, |e| e.eh_slack()),
            q: d.q,
            eh_ok: ev.as_ref().map_or(false, |e| e.eh_ok),
            rank_deficient: ev.is_none(),
        };
        Ok((info, real))
    }

    /// Returns `(reward, next_state, done, info)`.
    pub fn step(&mut self, a: &[f64]) -> Result<(f64, Vec<f64>, bool, StepInfo)> {
        let d = map_action(a, &self.cfg)?;
        let (info, real) = self.evaluate_decision(&d)?;
        self.real = real;
        self.t += 1;
        let done = self.t >= self.opts.horizon;
        Ok((info.reward, self.observe(), done, info))
    }
}

/// Per-step trajectory CSV.
pub struct TrajectoryLog<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryLog<W> {
    pub const HEADER: &'static str = "episode,step,reward,r_sec,power_sum,eh_slack,q_x,q_y";

    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", Self::HEADER)?;
        Ok(Self { out })
    }

    pub fn record(&mut self, episode: u64, step: usize, info: &StepInfo) -> Result<()> {
        writeln!(
            self.out,
            "{episode},{step},{:e},{:e},{:e},{:e},{:e},{:e}",
            info.reward, info.r_sec, info.power_sum, info.eh_slack, info.q.x, info.q.y
        )?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
