//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; missing
//! keys keep the defaults of the selected preset. Powers given in dBm are
//! converted to Watts here and nowhere else.

use std::path::Path;

use crate::agents::{DdpgConfig, SacConfig, Schedule};
use crate::channels::{db_to_linear, dbm_to_watts, ScenarioConfig};
use crate::env::EnvOptions;
use crate::error::{Error, Result};
use crate::geometry::{PhaseCodebook, Position2D, UavRegion};
use crate::sca::ScaOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Scenario defaults as printed, with `rho0 = 1e-3`.
    Paper,
    /// Paper defaults with the reference gain raised to a workable link budget.
    Desk,
    /// `K = J = 1`, `M = 2`, `N_t = 2` on the desk link budget, with short
    /// episodes and small networks.
    Tiny,
}

impl Preset {
    fn parse(v: &str) -> Option<Self> {
        match v {
            "paper" => Some(Self::Paper),
            "desk" => Some(Self::Desk),
            "tiny" => Some(Self::Tiny),
            _ => None,
        }
    }
}

/// Which optimizer a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sac,
    Ddpg,
    Sca,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sac => "sac",
            Method::Ddpg => "ddpg",
            Method::Sca => "sca",
        }
    }
}

/// Everything a configuration file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub preset: Preset,
    pub scenario: ScenarioConfig,
    pub env: EnvOptions,
    pub schedule: Schedule,
    pub sac: SacConfig,
    pub ddpg: DdpgConfig,
    pub sca: ScaOptions,
    /// Optimizer for the `sweep` and `eval` modes.
    pub method: Method,
    /// Held-out episodes for greedy evaluation.
    pub eval_episodes: usize,
    /// Episodes averaged into the final-reward summary.
    pub tail_episodes: usize,
}

impl Config {
    pub fn preset(p: Preset) -> Self {
        let base = Self {
            preset: p,
            scenario: ScenarioConfig::default(),
            env: EnvOptions::default(),
            schedule: Schedule::default(),
            sac: SacConfig::default(),
            ddpg: DdpgConfig::default(),
            sca: ScaOptions::default(),
            method: Method::Sac,
            eval_episodes: 10,
            tail_episodes: 10,
        };
        match p {
            Preset::Paper => base,
            Preset::Desk => Self {
                scenario: ScenarioConfig::desk(),
                ..base
            },
            Preset::Tiny => {
                let hidden = vec![32, 32];
                Self {
                    scenario: ScenarioConfig {
                        n_t: 2,
                        k: 1,
                        j: 1,
                        m: 2,
                        ..ScenarioConfig::desk()
                    },
                    env: EnvOptions {
                        horizon: 20,
                        fixed_realization: false,
                    },
                    schedule: Schedule {
                        episodes: 5,
                        warmup_steps: 40,
                        batch_size: 16,
                        buffer_capacity: 1000,
                        updates_per_step: 1,
                    },
                    sac: SacConfig {
                        hidden: hidden.clone(),
                        ..SacConfig::default()
                    },
                    ddpg: DdpgConfig {
                        hidden,
                        ..DdpgConfig::default()
                    },
                    sca: ScaOptions {
                        i_max: 5,
                        ..ScaOptions::default()
                    },
                    eval_episodes: 3,
                    tail_episodes: 2,
                    ..base
                }
            }
        }
    }

    /// Checks the whole configuration, including the scenario.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate().map_err(|e| Error::Validation(e.to_string()))?;
        let s = &self.schedule;
        if s.episodes == 0 || self.env.horizon == 0 {
            return Err(Error::Validation("episodes and horizon must be positive".into()));
        }
        if s.batch_size == 0 || s.buffer_capacity < s.batch_size {
            return Err(Error::Validation(format!(
                "buffer_capacity ({}) must be at least batch_size ({}) and batch_size positive",
                s.buffer_capacity, s.batch_size
            )));
        }
        if self.sac.hidden.is_empty() || self.sac.hidden.contains(&0) {
            return Err(Error::Validation("hidden widths must be positive".into()));
        }
        if self.eval_episodes == 0 || self.tail_episodes == 0 {
            return Err(Error::Validation("eval_episodes and tail_episodes must be positive".into()));
        }
        if self.sca.i_max == 0 || self.sca.inner_max == 0 || !(self.sca.eps > 0.0) || !(self.sca.eps_out > 0.0) {
            return Err(Error::Validation("SCA tolerances and iteration caps must be positive".into()));
        }
        Ok(())
    }
}

impl Default for Config {
    fn default() -> Self {
        Self::preset(Preset::Paper)
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{key}` expects a number, got `{v}`"),
    })
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Parse {
            line,
            msg: format!("`{key}` expects true or false, got `{v}`"),
        }),
    }
}

fn parse_widths(line: usize, key: &str, v: &str) -> Result<Vec<usize>> {
    v.split([',', 'x'])
        .map(|w| parse_num::<usize>(line, key, w.trim()))
        .collect()
}

/// Splits a non-comment line into `(key, value)`.
fn split_line(line: usize, raw: &str) -> Result<Option<(String, String)>> {
    let text = raw.split('#').next().unwrap_or("").trim();
    if text.is_empty() {
        return Ok(None);
    }
    let Some((k, v)) = text.split_once('=') else {
        return Err(Error::Parse {
            line,
            msg: format!("expected `key = value`, got `{text}`"),
        });
    };
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        return Err(Error::Parse {
            line,
            msg: format!("empty key or value in `{text}`"),
        });
    }
    Ok(Some((k.to_ascii_lowercase(), v.to_string())))
}

/// Parses configuration text. The preset is applied before any other key
/// wherever it appears; a key given twice is rejected.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut entries = Vec::new();
    let mut preset = Preset::Paper;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if let Some((k, v)) = split_line(line, raw)? {
            if entries.iter().any(|(_, k0, _): &(usize, String, String)| *k0 == k) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key `{k}`"),
                });
            }
            if k == "preset" {
                preset = Preset::parse(&v).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("unknown preset `{v}` (paper, desk or tiny)"),
                })?;
            }
            entries.push((line, k, v));
        }
    }
    let mut c = Config::preset(preset);
    let mut region_side = None;
    let mut uav_start = None;
    for (line, k, v) in &entries {
        let (line, v) = (*line, v.as_str());
        let sc = &mut c.scenario;
        match k.as_str() {
            "preset" => {}
            "n_t" => sc.n_t = parse_num(line, k, v)?,
            "k" => sc.k = parse_num(line, k, v)?,
            "j" => sc.j = parse_num(line, k, v)?,
            "m" => sc.m = parse_num(line, k, v)?,
            "altitude" => sc.altitude = parse_num(line, k, v)?,
            "alpha" => sc.alpha = parse_num(line, k, v)?,
            "rho0" => sc.rho0 = parse_num(line, k, v)?,
            "sigma2" => sc.sigma2 = parse_num(line, k, v)?,
            "k_bs_db" => sc.k_bs = db_to_linear(parse_num(line, k, v)?),
            "k_ihr_db" => sc.k_ihr = db_to_linear(parse_num(line, k, v)?),
            "k_uehr_db" => sc.k_uehr = db_to_linear(parse_num(line, k, v)?),
            "p_max_dbm" => sc.p_max = dbm_to_watts(parse_num(line, k, v)?),
            "p0" => sc.p0 = parse_num(line, k, v)?,
            "varrho" => sc.varrho = parse_num(line, k, v)?,
            "nu" => sc.nu = parse_num(line, k, v)?,
            "e_h" => sc.e_h = parse_num(line, k, v)?,
            "placement_radius" => sc.placement_radius = parse_num(line, k, v)?,
            "phase_bits" => {
                let bits: u32 = parse_num(line, k, v)?;
                sc.codebook = if bits == 0 {
                    None
                } else {
                    Some(PhaseCodebook::new(bits).map_err(|e| Error::Parse {
                        line,
                        msg: e.to_string(),
                    })?)
                };
            }
            "region_side" => region_side = Some(parse_num::<f64>(line, k, v)?),
            "uav_start" => {
                let xy: Vec<f64> = v
                    .split(',')
                    .map(|t| parse_num(line, k, t.trim()))
                    .collect::<Result<_>>()?;
                if xy.len() != 2 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("`uav_start` expects `x, y`, got `{v}`"),
                    });
                }
                uav_start = Some(Position2D::new(xy[0], xy[1]));
            }
            "episodes" => c.schedule.episodes = parse_num(line, k, v)?,
            "horizon" => c.env.horizon = parse_num(line, k, v)?,
            "fixed_realization" => c.env.fixed_realization = parse_bool(line, k, v)?,
            "warmup_steps" => c.schedule.warmup_steps = parse_num(line, k, v)?,
            "batch_size" => c.schedule.batch_size = parse_num(line, k, v)?,
            "buffer_capacity" => c.schedule.buffer_capacity = parse_num(line, k, v)?,
            "updates_per_step" => c.schedule.updates_per_step = parse_num(line, k, v)?,
            "hidden" => {
                let w = parse_widths(line, k, v)?;
                c.sac.hidden = w.clone();
                c.ddpg.hidden = w;
            }
            "gamma" => {
                c.sac.gamma = parse_num(line, k, v)?;
                c.ddpg.gamma = c.sac.gamma;
            }
            "tau" => {
                c.sac.tau = parse_num(line, k, v)?;
                c.ddpg.tau = c.sac.tau;
            }
            "lr_actor" => {
                c.sac.lr_actor = parse_num(line, k, v)?;
                c.ddpg.lr_actor = c.sac.lr_actor;
            }
            "lr_critic" => {
                c.sac.lr_critic = parse_num(line, k, v)?;
                c.ddpg.lr_critic = c.sac.lr_critic;
            }
            "lr_temperature" => c.sac.lr_temperature = parse_num(line, k, v)?,
            "init_temperature" => c.sac.init_temperature = parse_num(line, k, v)?,
            "target_entropy" => c.sac.target_entropy = Some(parse_num(line, k, v)?),
            "noise_start" => c.ddpg.noise_start = parse_num(line, k, v)?,
            "noise_end" => c.ddpg.noise_end = parse_num(line, k, v)?,
            "method" => {
                c.method = match v {
                    "sac" => Method::Sac,
                    "ddpg" => Method::Ddpg,
                    "sca" => Method::Sca,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("unknown method `{v}` (sac, ddpg or sca)"),
                        })
                    }
                }
            }
            "eval_episodes" => c.eval_episodes = parse_num(line, k, v)?,
            "tail_episodes" => c.tail_episodes = parse_num(line, k, v)?,
            "sca_eps" => c.sca.eps = parse_num(line, k, v)?,
            "sca_eps_out" => c.sca.eps_out = parse_num(line, k, v)?,
            "sca_i_max" => c.sca.i_max = parse_num(line, k, v)?,
            "sca_inner_max" => c.sca.inner_max = parse_num(line, k, v)?,
            _ => return Err(Error::Validation(format!("line {line}: unknown key `{k}`"))),
        }
    }
    if let Some(q) = uav_start {
        c.scenario.uav_start = q;
    }
    if uav_start.is_some() || region_side.is_some() {
        let r = &c.scenario.region;
        let side = region_side.unwrap_or(r.x_max - r.x_min);
        c.scenario.region = UavRegion::centered(c.scenario.uav_start, side).map_err(|e| Error::Validation(e.to_string()))?;
    }
    c.validate()?;
    Ok(c)
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.scenario.n_t, 6);
        assert_eq!(c.scenario.k, 4);
        assert_eq!(c.scenario.m, 10);
        assert_eq!(c.schedule.batch_size, 256);
        assert_eq!(c.schedule.buffer_capacity, 100_000);
        assert_eq!(c.sac.hidden, vec![256, 256]);
        assert!((c.scenario.p_max - 0.01).abs() < 1e-15);
        assert_eq!(parse_config("# nothing\n\n   \n").unwrap(), c);
    }

    #[test]
    fn dbm_converted_at_the_boundary() {
        let c = parse_config("p_max_dbm = 20\nk_bs_db = 10").unwrap();
        assert!((c.scenario.p_max - 0.1).abs() < 1e-15);
        assert!((c.scenario.k_bs - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zf_dimension_rule_is_enforced() {
        let e = parse_config("n_t = 2\nk = 4").unwrap_err();
        assert!(matches!(e, Error::Validation(ref m) if m.contains("N_t >= K")), "{e}");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config("m = 4\nbogus_key = 3").unwrap_err();
        match e {
            Error::Validation(m) => {
                assert!(m.contains("bogus_key"));
                assert!(m.contains("line 2"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_the_line() {
        for (text, line) in [("m = 4\nk = four", 2), ("\n\nnot a pair", 3), ("m = 4\nm = 5", 2), ("preset = huge", 1)] {
            match parse_config(text).unwrap_err() {
                Error::Parse { line: l, .. } => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn preset_applies_before_other_keys() {
        let c = parse_config("m = 3\npreset = tiny").unwrap();
        assert_eq!(c.scenario.m, 3);
        assert_eq!(c.scenario.k, 1);
        assert_eq!(c.preset, Preset::Tiny);
    }

    #[test]
    fn region_follows_start() {
        let c = parse_config("preset = desk\nuav_start = 900, 10\nregion_side = 20").unwrap();
        let r = c.scenario.region;
        assert_eq!((r.x_min, r.x_max, r.y_min, r.y_max), (890.0, 910.0, 0.0, 20.0));
        let c = parse_config("phase_bits = 0\nhidden = 64x32").unwrap();
        assert!(c.scenario.codebook.is_none());
        assert_eq!(c.ddpg.hidden, vec![64, 32]);
    }
}
