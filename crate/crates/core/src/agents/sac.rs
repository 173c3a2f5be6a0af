//! Soft actor-critic with twin critics, Polyak-averaged target critics and
//! automatic temperature tuning.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use crate::agents::{polyak, stack_rows, ActMode, Agent, UpdateStats};
use crate::error::{Error, Result};
use crate::neural::head::standard_normal;
use crate::neural::{deterministic_action, squashed_backward, squashed_sample, Adam, Batch, Mlp};
use crate::rng::{RngStream, StreamTag};

#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_temperature: f64,
    pub init_temperature: f64,
    /// Defaults to minus the action dimension.
    pub target_entropy: Option<f64>,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            gamma: 0.99,
            tau: 5e-3,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            lr_temperature: 1e-3,
            init_temperature: 1.0,
            target_entropy: None,
        }
    }
}

pub struct SacAgent {
    pub cfg: SacConfig,
    pub s_dim: usize,
    pub a_dim: usize,
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_beta: f64,
    pub target_entropy: f64,
    opt_actor: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    opt_beta: Adam,
    noise: ChaCha8Rng,
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

/// Mean squared Bellman error `mean_b (Q(x_b) - y_b)^2` and its gradient.
pub fn critic_loss_grad(q: &Mlp, sa: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let cache = q.forward_cached(sa).expect("critic input width");
    let out = cache.output();
    let n = y.len() as f64;
    let mut loss = 0.0;
    let dy = DMatrix::from_fn(1, y.len(), |_, c| {
        let e = out[(0, c)] - y[c];
        loss += e * e;
        2.0 * e / n
    });
    let mut g = vec![0.0; q.num_params()];
    q.backward(&cache, &dy, Some(&mut g));
    (loss / n, g)
}

/// Actor surrogate `mean_b (beta log pi(a_b|s_b) - min_i Q_i(s_b, a_b))` with
/// `a_b = tanh(mean + std xi_b)`. Returns the loss, the actor gradient and
/// the per-sample log-probabilities.
pub fn actor_loss_grad(
    actor: &Mlp,
    q1: &Mlp,
    q2: &Mlp,
    s: &DMatrix<f64>,
    xi: &DMatrix<f64>,
    beta: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let b = s.ncols();
    let n = b as f64;
    let a_cache = actor.forward_cached(s).expect("actor input width");
    let sample = squashed_sample(a_cache.output(), xi);
    let sa = stack_rows(s, &sample.action);
    let c1 = q1.forward_cached(&sa).expect("critic input width");
    let c2 = q2.forward_cached(&sa).expect("critic input width");
    let mut d1 = DMatrix::zeros(1, b);
    let mut d2 = DMatrix::zeros(1, b);
    let mut loss = 0.0;
    for c in 0..b {
        let (v1, v2) = (c1.output()[(0, c)], c2.output()[(0, c)]);
        if v1 <= v2 {
            d1[(0, c)] = -1.0 / n;
            loss += beta * sample.log_prob[c] - v1;
        } else {
            d2[(0, c)] = -1.0 / n;
            loss += beta * sample.log_prob[c] - v2;
        }
    }
    let s_dim = s.nrows();
    let gx = q1.backward(&c1, &d1, None) + q2.backward(&c2, &d2, None);
    let g_action = gx.rows(s_dim, sample.action.nrows()).clone_owned();
    let g_logp = vec![beta / n; b];
    let g_out = squashed_backward(&sample, &g_action, &g_logp);
    let mut g = vec![0.0; actor.num_params()];
    actor.backward(&a_cache, &g_out, Some(&mut g));
    (loss / n, g, sample.log_prob)
}

/// Temperature loss `mean_b (-beta (log pi_b + target))` with
/// `beta = exp(log_beta)`, and its derivative in `log_beta`.
pub fn temperature_loss_grad(log_beta: f64, log_probs: &[f64], target_entropy: f64) -> (f64, f64) {
    let m = log_probs.iter().map(|l| l + target_entropy).sum::<f64>() / log_probs.len() as f64;
    let beta = log_beta.exp();
    (-beta * m, -beta * m)
}

impl SacAgent {
    pub fn new(s_dim: usize, a_dim: usize, cfg: SacConfig, rng: &RngStream) -> Result<Self> {
        if !(cfg.init_temperature > 0.0) || !(0.0..=1.0).contains(&cfg.tau) || !(0.0..=1.0).contains(&cfg.gamma) {
            return Err(Error::Config(format!("invalid SAC settings {cfg:?}")));
        }
        let actor = Mlp::new(&widths(s_dim, &cfg.hidden, 2 * a_dim), &mut rng.substream(StreamTag::NetworkInit, 0))?;
        let qw = widths(s_dim + a_dim, &cfg.hidden, 1);
        let q1 = Mlp::new(&qw, &mut rng.substream(StreamTag::NetworkInit, 1))?;
        let q2 = Mlp::new(&qw, &mut rng.substream(StreamTag::NetworkInit, 2))?;
        let target_entropy = cfg.target_entropy.unwrap_or(-(a_dim as f64));
        Ok(Self {
            opt_actor: Adam::new(actor.num_params(), cfg.lr_actor),
            opt_q1: Adam::new(q1.num_params(), cfg.lr_critic),
            opt_q2: Adam::new(q2.num_params(), cfg.lr_critic),
            opt_beta: Adam::new(1, cfg.lr_temperature),
            log_beta: cfg.init_temperature.ln(),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            actor,
            q1,
            q2,
            target_entropy,
            s_dim,
            a_dim,
            noise: rng.substream(StreamTag::Policy, 0),
            cfg,
        })
    }

    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }

    /// Soft Bellman targets `r + gamma (1 - done)(min_i Qbar_i(s', a') - beta log pi(a'|s'))`.
    pub fn critic_target_with(&self, batch: &Batch, xi: &DMatrix<f64>) -> Vec<f64> {
        let out = self.actor.forward(&batch.s2).expect("actor input width");
        let sample = squashed_sample(&out, xi);
        let sa = stack_rows(&batch.s2, &sample.action);
        let t1 = self.q1_target.forward(&sa).expect("critic input width");
        let t2 = self.q2_target.forward(&sa).expect("critic input width");
        let beta = self.beta();
        (0..batch.len())
            .map(|c| {
                let soft = t1[(0, c)].min(t2[(0, c)]) - beta * sample.log_prob[c];
                batch.r[c] + self.cfg.gamma * (1.0 - batch.done[c]) * soft
            })
            .collect()
    }

    pub fn critic_target(&mut self, batch: &Batch) -> Vec<f64> {
        let xi = standard_normal(&mut self.noise, self.a_dim, batch.len());
        self.critic_target_with(batch, &xi)
    }

    /// One Adam step on each online critic toward `y`; returns both losses.
    pub fn critic_update(&mut self, batch: &Batch, y: &[f64]) -> (f64, f64) {
        let sa = stack_rows(&batch.s, &batch.a);
        let (l1, g1) = critic_loss_grad(&self.q1, &sa, y);
        let (l2, g2) = critic_loss_grad(&self.q2, &sa, y);
        self.opt_q1.step(&mut self.q1.params, &g1);
        self.opt_q2.step(&mut self.q2.params, &g2);
        (l1, l2)
    }

    /// One Adam step on the actor; returns the loss and the sampled log-probabilities.
    pub fn actor_update(&mut self, batch: &Batch) -> (f64, Vec<f64>) {
        let xi = standard_normal(&mut self.noise, self.a_dim, batch.len());
        let (loss, g, logp) = actor_loss_grad(&self.actor, &self.q1, &self.q2, &batch.s, &xi, self.beta());
        self.opt_actor.step(&mut self.actor.params, &g);
        (loss, logp)
    }

    pub fn temperature_update(&mut self, log_probs: &[f64]) -> f64 {
        let (_, g) = temperature_loss_grad(self.log_beta, log_probs, self.target_entropy);
        let mut lb = [self.log_beta];
        self.opt_beta.step(&mut lb, &[g]);
        self.log_beta = lb[0];
        self.beta()
    }

    pub fn update_targets(&mut self) {
        polyak(&mut self.q1_target, &self.q1, self.cfg.tau);
        polyak(&mut self.q2_target, &self.q2, self.cfg.tau);
    }

    /// Checkpoint: magic `WCSEESAC`, `log_beta` as `f64`, then the actor,
    /// both critics and both target critics in network checkpoint format.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"WCSEESAC")?;
        w.write_all(&self.log_beta.to_le_bytes())?;
        for net in [&self.actor, &self.q1, &self.q2, &self.q1_target, &self.q2_target] {
            net.save(w)?;
        }
        Ok(())
    }

    /// Restore parameters from [`SacAgent::save`] output. Optimizer moments
    /// are not part of the checkpoint and restart from zero.
    pub fn load_params<R: Read>(&mut self, r: &mut R) -> Result<()> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Checkpoint("truncated header".into()))?;
        if &magic != b"WCSEESAC" {
            return Err(Error::Checkpoint("not a SAC checkpoint".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(|_| Error::Checkpoint("truncated header".into()))?;
        let log_beta = f64::from_le_bytes(b8);
        let nets: Vec<Mlp> = (0..5).map(|_| Mlp::load(r)).collect::<Result<_>>()?;
        let expect = [&self.actor, &self.q1, &self.q2, &self.q1_target, &self.q2_target];
        for (n, e) in nets.iter().zip(expect) {
            if n.widths() != e.widths() {
                return Err(Error::Checkpoint(format!(
                    "layer widths {:?} do not match {:?}",
                    n.widths(),
                    e.widths()
                )));
            }
        }
        let mut it = nets.into_iter();
        self.actor = it.next().unwrap();
        self.q1 = it.next().unwrap();
        self.q2 = it.next().unwrap();
        self.q1_target = it.next().unwrap();
        self.q2_target = it.next().unwrap();
        self.log_beta = log_beta;
        Ok(())
    }
}

impl Agent for SacAgent {
    fn act(&mut self, s: &[f64], mode: ActMode) -> Vec<f64> {
        let x = DMatrix::from_column_slice(s.len(), 1, s);
        let out = self.actor.forward(&x).expect("actor input width");
        match mode {
            ActMode::Explore => {
                let xi = standard_normal(&mut self.noise, self.a_dim, 1);
                squashed_sample(&out, &xi).action.as_slice().to_vec()
            }
            ActMode::Greedy => deterministic_action(&out).as_slice().to_vec(),
        }
    }

    fn update(&mut self, batch: &Batch) -> UpdateStats {
        let y = self.critic_target(batch);
        let (l1, l2) = self.critic_update(batch, &y);
        let (actor_loss, logp) = self.actor_update(batch);
        let beta = self.temperature_update(&logp);
        self.update_targets();
        UpdateStats {
            critic_loss: 0.5 * (l1 + l2),
            actor_loss,
            temperature: beta,
        }
    }

    fn temperature(&self) -> f64 {
        self.beta()
    }
}
