//! Deterministic-policy actor-critic baseline with Gaussian exploration.

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use crate::agents::{polyak, stack_rows, ActMode, Agent, UpdateStats};
use crate::error::{Error, Result};
use crate::neural::head::standard_normal;
use crate::neural::{Adam, Batch, Mlp};
use crate::rng::{RngStream, StreamTag};

use super::sac::critic_loss_grad;

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Exploration noise scale on raw actions at the start of training.
    pub noise_start: f64,
    /// Scale reached at the end of the budget (linear decay).
    pub noise_end: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            gamma: 0.99,
            tau: 5e-3,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            noise_start: 0.1,
            noise_end: 0.0,
        }
    }
}

pub struct DdpgAgent {
    pub cfg: DdpgConfig,
    pub s_dim: usize,
    pub a_dim: usize,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    opt_actor: Adam,
    opt_critic: Adam,
    noise: ChaCha8Rng,
    sigma: f64,
}

fn tanh_m(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.tanh())
}

impl DdpgAgent {
    pub fn new(s_dim: usize, a_dim: usize, cfg: DdpgConfig, rng: &RngStream) -> Result<Self> {
        if !(cfg.noise_start >= 0.0) || !(cfg.noise_end >= 0.0) {
            return Err(Error::Config("DDPG noise scales must be non-negative".into()));
        }
        let mut aw = vec![s_dim];
        aw.extend_from_slice(&cfg.hidden);
        aw.push(a_dim);
        let mut cw = vec![s_dim + a_dim];
        cw.extend_from_slice(&cfg.hidden);
        cw.push(1);
        let actor = Mlp::new(&aw, &mut rng.substream(StreamTag::NetworkInit, 10))?;
        let critic = Mlp::new(&cw, &mut rng.substream(StreamTag::NetworkInit, 11))?;
        Ok(Self {
            opt_actor: Adam::new(actor.num_params(), cfg.lr_actor),
            opt_critic: Adam::new(critic.num_params(), cfg.lr_critic),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            s_dim,
            a_dim,
            noise: rng.substream(StreamTag::Policy, 1),
            sigma: cfg.noise_start,
            cfg,
        })
    }

    pub fn noise_scale(&self) -> f64 {
        self.sigma
    }
}

impl Agent for DdpgAgent {
    fn act(&mut self, s: &[f64], mode: ActMode) -> Vec<f64> {
        let x = DMatrix::from_column_slice(s.len(), 1, s);
        let a = tanh_m(&self.actor.forward(&x).expect("actor input width"));
        match mode {
            ActMode::Greedy => a.as_slice().to_vec(),
            ActMode::Explore => {
                let xi = standard_normal(&mut self.noise, self.a_dim, 1);
                a.iter()
                    .zip(xi.iter())
                    .map(|(v, e)| (v + self.sigma * e).clamp(-1.0, 1.0))
                    .collect()
            }
        }
    }

    fn update(&mut self, batch: &Batch) -> UpdateStats {
        let n = batch.len();
        let a2 = tanh_m(&self.actor_target.forward(&batch.s2).expect("actor input width"));
        let qn = self
            .critic_target
            .forward(&stack_rows(&batch.s2, &a2))
            .expect("critic input width");
        let y: Vec<f64> = (0..n)
            .map(|c| batch.r[c] + self.cfg.gamma * (1.0 - batch.done[c]) * qn[(0, c)])
            .collect();
        let (critic_loss, g) = critic_loss_grad(&self.critic, &stack_rows(&batch.s, &batch.a), &y);
        self.opt_critic.step(&mut self.critic.params, &g);

        let cache = self.actor.forward_cached(&batch.s).expect("actor input width");
        let a = tanh_m(cache.output());
        let cc = self.critic.forward_cached(&stack_rows(&batch.s, &a)).expect("critic input width");
        let actor_loss = -cc.output().sum() / n as f64;
        let dy = DMatrix::from_element(1, n, -1.0 / n as f64);
        let gx = self.critic.backward(&cc, &dy, None);
        let ga = gx
            .rows(self.s_dim, self.a_dim)
            .zip_map(&a, |g, t| g * (1.0 - t * t));
        let mut g = vec![0.0; self.actor.num_params()];
        self.actor.backward(&cache, &ga, Some(&mut g));
        self.opt_actor.step(&mut self.actor.params, &g);

        polyak(&mut self.critic_target, &self.critic, self.cfg.tau);
        polyak(&mut self.actor_target, &self.actor, self.cfg.tau);
        UpdateStats {
            critic_loss,
            actor_loss,
            temperature: self.sigma,
        }
    }

    fn temperature(&self) -> f64 {
        self.sigma
    }

    fn set_progress(&mut self, frac: f64) {
        let f = frac.clamp(0.0, 1.0);
        self.sigma = self.cfg.noise_start + (self.cfg.noise_end - self.cfg.noise_start) * f;
    }
}
