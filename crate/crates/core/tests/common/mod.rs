//! Tiny single-user instances and brute-force grids shared by the SCA tests.
#![allow(dead_code)]

use num_complex::Complex64;
use wcsee_core::channels::{reflection_from_phases, CVector, ChannelDraw, ChannelRealization, ScenarioConfig};
use wcsee_core::geometry::Position2D;
use wcsee_core::phy::{evaluate_with, zf_precoder, ZfPrecoder};
use wcsee_core::rng::RngStream;
use wcsee_core::sca::{RisModel, UavModel};

pub fn tiny(m: usize) -> ScenarioConfig {
    ScenarioConfig {
        k: 1,
        j: 1,
        m,
        n_t: 2,
        codebook: None,
        ..ScenarioConfig::desk()
    }
}

pub struct Instance {
    pub cfg: ScenarioConfig,
    pub draw: ChannelDraw,
    pub real: ChannelRealization,
    pub pre: ZfPrecoder,
}

impl Instance {
    pub fn new(cfg: ScenarioConfig, seed: u64) -> Self {
        let draw = ChannelDraw::sample(&cfg, &RngStream::new(seed)).unwrap();
        let s = CVector::from_element(cfg.m, Complex64::new(1.0, 0.0));
        let real = draw.realize(&cfg, cfg.uav_start, &s);
        let pre = zf_precoder(&real.h_c).unwrap();
        Self { cfg, draw, real, pre }
    }

    pub fn beams(&self) -> Vec<CVector> {
        vec![self.pre.beam(&[self.cfg.p_max], 0)]
    }

    pub fn power_grid(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..=10_000 {
            let p = self.cfg.p_max * i as f64 / 1e4;
            let ev = evaluate_with(&self.cfg, &self.real, self.pre.clone(), &[p]).unwrap();
            if ev.eh_ok {
                best = best.max(ev.wcsee);
            }
        }
        best
    }

    pub fn ris_model(&self) -> RisModel {
        RisModel::new(&self.real, &self.beams(), &self.cfg).unwrap()
    }

    pub fn ris_grid(&self) -> f64 {
        let model = self.ris_model();
        let mut best: f64 = 0.0;
        for i in 0..4096 {
            let s = reflection_from_phases(&[std::f64::consts::TAU * i as f64 / 4096.0]);
            if model.eh(&s) >= model.eh_req {
                best = best.max(model.min_secrecy(&s));
            }
        }
        best
    }

    pub fn uav_model(&self) -> UavModel {
        UavModel::new(&self.real, &self.beams(), &self.cfg, &self.draw.placement).unwrap()
    }

    pub fn uav_grid(&self) -> f64 {
        let model = self.uav_model();
        let r = self.cfg.region;
        let mut best: f64 = 0.0;
        for a in 0..100 {
            for b in 0..100 {
                let q = Position2D::new(
                    r.x_min + (r.x_max - r.x_min) * a as f64 / 99.0,
                    r.y_min + (r.y_max - r.y_min) * b as f64 / 99.0,
                );
                if model.eh(q) >= model.eh_req {
                    best = best.max(model.min_rate(q));
                }
            }
        }
        best
    }
}

/// First seed whose tiny M=1 instance has a positive grid optimum in every
/// block and an EH-feasible default starting point.
pub fn oracle_instance() -> Instance {
    for seed in 0..100 {
        let inst = Instance::new(tiny(1), seed);
        let one = CVector::from_element(1, Complex64::new(1.0, 0.0));
        let start_ok = inst.ris_model().eh(&one) >= inst.ris_model().eh_req
            && inst.uav_model().eh(inst.cfg.uav_start) >= inst.uav_model().eh_req;
        if start_ok && inst.power_grid() > 0.0 && inst.ris_grid() > 0.0 && inst.uav_grid() > 0.0 {
            return inst;
        }
    }
    panic!("no oracle instance in the first 100 seeds");
}
