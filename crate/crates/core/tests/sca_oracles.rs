use num_complex::Complex64;
use rand::Rng;
use wcsee_core::channels::{CVector, ChannelDraw, ScenarioConfig};
use wcsee_core::geometry::{Position2D, UavRegion};
use wcsee_core::phy::evaluate_with;
use wcsee_core::rng::{RngStream, StreamTag};
use wcsee_core::sca::*;

mod common;

use common::{oracle_instance, tiny, Instance};

#[test]
fn power_block_matches_grid() {
    let inst = oracle_instance();
    let opts = ScaOptions::default();
    let r = dinkelbach_power(&inst.real, &inst.pre, &inst.cfg, None, &opts, 0).unwrap();
    let ev = evaluate_with(&inst.cfg, &inst.real, inst.pre.clone(), &r.p).unwrap();
    let grid = inst.power_grid();
    assert!(ev.eh_ok);
    assert!(ev.wcsee >= 0.99 * grid, "sca {} grid {grid}", ev.wcsee);

    // F(lambda*) = max_p [secrecy - lambda* power] is zero at the optimum
    let lambda = grid;
    let mut f_max = f64::NEG_INFINITY;
    for i in 0..=10_000 {
        let p = inst.cfg.p_max * i as f64 / 1e4;
        let ev = evaluate_with(&inst.cfg, &inst.real, inst.pre.clone(), &[p]).unwrap();
        if ev.eh_ok {
            f_max = f_max.max(ev.rates.min - lambda * (inst.cfg.varrho * p + inst.cfg.p0));
        }
    }
    assert!(f_max.abs() < 1e-9, "F(lambda*) = {f_max}");
}

#[test]
fn ris_block_matches_phase_grid() {
    let inst = oracle_instance();
    let model = inst.ris_model();
    let s0 = CVector::from_element(1, Complex64::new(1.0, 0.0));
    let r = ris_phase_sca(&model, &s0, &ScaOptions::default(), 0).unwrap();
    let grid = inst.ris_grid();
    let got = model.min_secrecy(&r.s);
    assert!(got >= 0.98 * grid, "sca {got} grid {grid}");
    assert!((r.s[0].norm() - 1.0).abs() < 1e-12);
}

#[test]
fn uav_block_matches_position_grid() {
    let inst = oracle_instance();
    let model = inst.uav_model();
    let r = uav_location_sca(&model, inst.cfg.uav_start, &ScaOptions::default(), 0).unwrap();
    let grid = inst.uav_grid();
    let got = model.min_rate(r.q);
    assert!(got >= 0.98 * grid, "sca {got} grid {grid}");
    assert!(inst.cfg.region.contains(&r.q));
    assert!(model.eh(r.q) >= model.eh_req);
}

#[test]
fn large_penalty_drives_unit_modulus() {
    let inst = Instance::new(tiny(4), 1);
    let model = RisModel::new(&inst.real, &inst.beams(), &inst.cfg).unwrap();
    let s0 = CVector::from_element(4, Complex64::new(0.5, 0.0));
    let opts = ScaOptions {
        penalty_start: 1e4,
        ..ScaOptions::default()
    };
    let r = ris_phase_sca(&model, &s0, &opts, 0).unwrap();
    assert!(r.unit_gap <= 1e-3, "gap {}", r.unit_gap);
}

#[test]
fn collapsed_region_pins_the_uav() {
    let point = Position2D::new(1010.0, -5.0);
    let cfg = ScenarioConfig {
        region: UavRegion::new(point.x, point.x, point.y, point.y).unwrap(),
        uav_start: point,
        e_h: 0.0,
        ..tiny(2)
    };
    let inst = Instance::new(cfg, 1);
    let r = uav_location_sca(&inst.uav_model(), point, &ScaOptions::default(), 0).unwrap();
    assert_eq!(r.q, point);
    assert_eq!(r.trace.len(), 1);
}

#[test]
fn symmetric_layout_keeps_uav_on_axis() {
    let cfg = ScenarioConfig {
        ihr_positions: Some(vec![Position2D::new(1400.0, 0.0)]),
        uehr_positions: Some(vec![Position2D::new(1000.0, -250.0)]),
        e_h: 0.0,
        ..tiny(2)
    };
    let inst = Instance::new(cfg, 3);
    let r = uav_location_sca(&inst.uav_model(), Position2D::new(1000.0, 10.0), &ScaOptions::default(), 0).unwrap();
    assert!(r.q.y.abs() <= 1.0, "q = {:?}", r.q);
}

fn bcd_cfg() -> ScenarioConfig {
    ScenarioConfig {
        k: 2,
        j: 2,
        m: 4,
        n_t: 4,
        codebook: None,
        ..ScenarioConfig::desk()
    }
}

#[test]
fn bcd_single_pass_and_repeatable() {
    let cfg = bcd_cfg();
    let draw = ChannelDraw::sample(&cfg, &RngStream::new(7)).unwrap();
    let one = ScaOptions {
        i_max: 1,
        ..ScaOptions::default()
    };
    let r = bcd_outer(&cfg, &draw, None, &one).unwrap();
    assert_eq!(r.eta.len(), 1);
    let a = bcd_outer(&cfg, &draw, None, &ScaOptions::default()).unwrap();
    let b = bcd_outer(&cfg, &draw, None, &ScaOptions::default()).unwrap();
    assert_eq!(a, b);
    let (mut wa, mut wb) = (Vec::new(), Vec::new());
    write_trace(&a.trace, &mut wa).unwrap();
    write_trace(&b.trace, &mut wb).unwrap();
    assert_eq!(wa, wb);
}

#[test]
fn block_traces_are_monotone() {
    let cfg = bcd_cfg();
    let opts = ScaOptions {
        i_max: 3,
        ..ScaOptions::default()
    };
    for seed in 0..20 {
        let draw = ChannelDraw::sample(&cfg, &RngStream::new(100 + seed)).unwrap();
        let r = bcd_outer(&cfg, &draw, None, &opts).unwrap();
        let v = max_monotonicity_violation(&r.trace);
        assert!(v <= 1e-6, "seed {seed}: violation {v}");
        // Dinkelbach parameters within each power run
        for w in r.trace.windows(2) {
            if w[0].block == Block::Power && w[1].block == Block::Power && w[0].outer_iter == w[1].outer_iter && w[0].eh_slack >= 0.0 {
                assert!(w[1].lambda >= w[0].lambda - 1e-6 * w[0].lambda.abs().max(1.0), "seed {seed}: {:?} {:?}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn eh_bound_chain_holds_over_region() {
    let inst = Instance::new(tiny(2), 5);
    let model = inst.uav_model();
    let (u, s, t) = model.eh_coefficients(0);
    let (a, b) = eh_quadratic_lb(u, s, t, 2.0 / s).unwrap();
    let mut rng = RngStream::new(11).substream(StreamTag::Misc, 0);
    let r = inst.cfg.region;
    let h = inst.cfg.altitude;
    let dist = |q: Position2D, w: Position2D| ((q.x - w.x).powi(2) + (q.y - w.y).powi(2) + h * h).sqrt();
    let mut violations = 0;
    for _ in 0..10_000 {
        let q = Position2D::new(rng.gen_range(r.x_min..=r.x_max), rng.gen_range(r.y_min..=r.y_max));
        let y_min = (dist(q, model.uehr[0]) * dist(q, model.bs)).powf(model.alpha);
        let y = y_min * (1.0 + rng.gen::<f64>());
        let y0 = y_min * (0.5 + 2.0 * rng.gen::<f64>());
        let bound = a + b * inv_affine_lb(y0).eval(y);
        if bound > model.eh(q) * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}
